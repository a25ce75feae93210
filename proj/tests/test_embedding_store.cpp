#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "test_util.hpp"
#include "zsdd/decoupling.hpp"
#include "zsdd/embedding_store.hpp"

namespace zsdd {
namespace {

using testing::TempDir;

void write_raw(const fs::path &p, const std::string &bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

std::string f32le(std::initializer_list<float> values) {
  std::string out;
  for (float v : values)
    io::append_f32le(out, v);
  return out;
}

const char *kMinimalManifest = R"({"format_version":1,"dim":2,"count":1,"payload":"p.f32","dtype":"f32le",
  "records":[{"subject_id":"A","sample_id":"0","class_id":0}]})";

TEST(EmbeddingStore, LoadsMinimalFile) {
  TempDir dir;
  write_raw(dir / "m.json", kMinimalManifest);
  write_raw(dir / "p.f32", f32le({1.0f, 0.0f}));
  const auto ds = load_dataset(dir / "m.json");
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.dim, 2);
  EXPECT_EQ(ds.records[0].subject_id, "A");
  EXPECT_EQ(ds.records[0].sample_id, "0");
  EXPECT_EQ(ds.records[0].class_id, 0);
  EXPECT_EQ(ds.records[0].vector, (std::vector<float>{1.0f, 0.0f}));
}

TEST(EmbeddingStore, PayloadIsLittleEndian) {
  std::string bytes = f32le({1.0f});
  // 1.0f = 0x3F800000
  EXPECT_EQ(static_cast<unsigned char>(bytes[0]), 0x00);
  EXPECT_EQ(static_cast<unsigned char>(bytes[3]), 0x3F);
}

TEST(EmbeddingStore, OneRecordPayloadSize) {
  TempDir dir;
  auto ds = make_dataset(7, {{"s", "x", 0, std::vector<float>(7, 0.25f)}});
  save_dataset(ds, dir / "one.json");
  EXPECT_EQ(fs::file_size(dir / "one.f32"), 7u * 4u);
}

TEST(EmbeddingStore, SaveIsDeterministicAndLoadSaveIsAFixedPoint) {
  std::mt19937_64 gen(3);
  const auto ds = testing::random_dataset(gen, 4, 5, 9, 3);
  TempDir dir;
  save_dataset(ds, dir / "a.json");
  save_dataset(ds, dir / "b.json");
  EXPECT_EQ(testing::slurp(dir / "a.f32"), testing::slurp(dir / "b.f32"));

  const auto loaded = load_dataset(dir / "a.json");
  EXPECT_EQ(loaded, ds);
  save_dataset(loaded, dir / "c.json");
  EXPECT_EQ(testing::slurp(dir / "a.f32"), testing::slurp(dir / "c.f32"));
  // Manifests differ only by the payload name.
  auto a = nlohmann::json::parse(testing::slurp(dir / "a.json"));
  auto c = nlohmann::json::parse(testing::slurp(dir / "c.json"));
  a.erase("payload");
  c.erase("payload");
  EXPECT_EQ(a, c);
}

TEST(EmbeddingStore, ManifestFieldOrderAndSchema) {
  TempDir dir;
  save_dataset(make_dataset(2, {{"A", "0", 1, {1.0f, 2.0f}}}), dir / "m.json");
  const auto j = nlohmann::ordered_json::parse(testing::slurp(dir / "m.json"));
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it)
    keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"format_version", "dim", "count", "payload", "dtype", "records"}));
  EXPECT_EQ(j["payload"], "m.f32");
  EXPECT_EQ(j["records"][0], (nlohmann::ordered_json{{"subject_id", "A"}, {"sample_id", "0"}, {"class_id", 1}}));
}

// Property: for random datasets, record k lives at payload rows [k*dim, (k+1)*dim)
// and round-trips bit-for-bit, including awkward values.
TEST(EmbeddingStore, RoundTripAndRowOrderProperty) {
  std::mt19937_64 gen(11);
  const float specials[] = {-0.0f, std::numeric_limits<float>::denorm_min(), std::numeric_limits<float>::max(),
                            -std::numeric_limits<float>::min(), 1e-30f};
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 1 + static_cast<int>(gen() % 12);
    auto ds = testing::random_dataset(gen, 1 + static_cast<int>(gen() % 4), 1 + static_cast<int>(gen() % 6), dim, 4);
    ds.records[0].vector[0] = specials[trial % 5];
    TempDir dir;
    save_dataset(ds, dir / "d.json");
    const std::string payload = testing::slurp(dir / "d.f32");
    ASSERT_EQ(payload.size(), ds.size() * static_cast<std::size_t>(dim) * 4);
    for (std::size_t k = 0; k < ds.size(); ++k)
      for (int i = 0; i < dim; ++i) {
        const float stored = io::read_f32le(payload.data() + (k * static_cast<std::size_t>(dim) + i) * 4);
        EXPECT_EQ(std::bit_cast<std::uint32_t>(stored), std::bit_cast<std::uint32_t>(ds.records[k].vector[i]));
      }
    const auto back = load_dataset(dir / "d.json");
    ASSERT_EQ(back.size(), ds.size());
    for (std::size_t k = 0; k < ds.size(); ++k) {
      EXPECT_EQ(back.records[k].subject_id, ds.records[k].subject_id);
      EXPECT_EQ(std::memcmp(back.records[k].vector.data(), ds.records[k].vector.data(), dim * 4u), 0);
    }
  }
}

class LoadErrors : public ::testing::Test {
protected:
  TempDir dir;
  void expect_invalid(const std::string &manifest, const std::string &payload) {
    write_raw(dir / "m.json", manifest);
    write_raw(dir / "p.f32", payload);
    EXPECT_THROW(load_dataset(dir / "m.json"), ValidationError);
  }
};

TEST_F(LoadErrors, MalformedJson) { expect_invalid("{\"format_version\":1,", f32le({1, 0})); }

TEST_F(LoadErrors, PayloadLengthMismatch) { expect_invalid(kMinimalManifest, f32le({1, 0, 0})); }

TEST_F(LoadErrors, NonFiniteValue) { expect_invalid(kMinimalManifest, f32le({NAN, 0})); }

TEST_F(LoadErrors, InfiniteValue) { expect_invalid(kMinimalManifest, f32le({INFINITY, 0})); }

TEST_F(LoadErrors, DuplicateKeys) {
  expect_invalid(R"({"format_version":1,"dim":1,"count":2,"payload":"p.f32","dtype":"f32le",
    "records":[{"subject_id":"A","sample_id":"0","class_id":0},{"subject_id":"A","sample_id":"0","class_id":1}]})",
                 f32le({1, 2}));
}

TEST_F(LoadErrors, CountDisagreesWithRecords) {
  expect_invalid(R"({"format_version":1,"dim":2,"count":2,"payload":"p.f32","dtype":"f32le",
    "records":[{"subject_id":"A","sample_id":"0","class_id":0}]})",
                 f32le({1, 0, 1, 0}));
}

TEST_F(LoadErrors, WrongDtype) {
  expect_invalid(R"({"format_version":1,"dim":2,"count":1,"payload":"p.f32","dtype":"f64le",
    "records":[{"subject_id":"A","sample_id":"0","class_id":0}]})",
                 f32le({1, 0}));
}

TEST_F(LoadErrors, MissingField) {
  expect_invalid(R"({"format_version":1,"count":1,"payload":"p.f32","dtype":"f32le",
    "records":[{"subject_id":"A","sample_id":"0","class_id":0}]})",
                 f32le({1, 0}));
}

TEST_F(LoadErrors, NegativeClassId) {
  expect_invalid(R"({"format_version":1,"dim":2,"count":1,"payload":"p.f32","dtype":"f32le",
    "records":[{"subject_id":"A","sample_id":"0","class_id":-1}]})",
                 f32le({1, 0}));
}

TEST(EmbeddingStore, MissingPayloadIsIoError) {
  TempDir dir;
  write_raw(dir / "m.json", kMinimalManifest);
  EXPECT_THROW(load_dataset(dir / "m.json"), IoError);
  EXPECT_THROW(load_dataset(dir / "absent.json"), IoError);
}

TEST(EmbeddingStore, InvalidDatasetsAreRejectedOnConstruction) {
  EXPECT_THROW(make_dataset(2, {}), ValidationError);
  EXPECT_THROW(make_dataset(2, {{"A", "0", 0, {1.0f}}}), ValidationError);
  // class_count must cover every label.
  EXPECT_THROW(validate(Dataset{1, 1, {{"A", "0", 1, {1.0f}}}}), ValidationError);
}

TEST(Prompts, ShippedOursRendersClassZero) {
  const auto ps = load_prompts(fs::path(ZSDD_DATA_DIR) / "prompts_ours.json");
  ASSERT_EQ(ps.class_count(), 10);
  EXPECT_EQ(ps.render(0), "an image of a person holding steering wheel with both hands while driving.");
  EXPECT_EQ(ps.render(9), "an image of a person keeping the head down.");
}

TEST(Prompts, ShippedDriveClipRendersClassZero) {
  const auto ps = load_prompts(fs::path(ZSDD_DATA_DIR) / "prompts_driveclip.json");
  ASSERT_EQ(ps.class_count(), 10);
  EXPECT_EQ(ps.render(0), "an image of a person driving safely.");
  EXPECT_EQ(ps.render(8), "an image of a person reaching behind while driving.");
}

TEST(Prompts, RenderingIsPure) {
  const auto ps = make_prompt_set("a {} b", {"x", "y"});
  EXPECT_EQ(ps.render_all(), ps.render_all());
  EXPECT_EQ(ps.render_all(), (std::vector<std::string>{"a x b", "a y b"}));
}

TEST(Prompts, Validation) {
  TempDir dir;
  write_raw(dir / "p.json", R"({"template":"an image of a person.","classes":["a","b"]})");
  EXPECT_THROW(load_prompts(dir / "p.json"), ValidationError);
  write_raw(dir / "p.json", R"({"template":"{}","classes":["a"]})");
  EXPECT_THROW(load_prompts(dir / "p.json"), ValidationError);
  write_raw(dir / "p.json", R"({"template":"{} and {}","classes":["a","b"]})");
  EXPECT_THROW(load_prompts(dir / "p.json"), ValidationError);
  write_raw(dir / "p.json", R"({"template":"{}","classes":["a",3]})");
  EXPECT_THROW(load_prompts(dir / "p.json"), ValidationError);
}

// A file produced by an independent (numpy) writer loads bit-exactly.
TEST(EmbeddingStore, ExternalWriterRoundTrip) {
  TempDir dir;
  const std::string cmd = "python3 \"" ZSDD_FIXTURE_DIR "/write_interchange.py\" \"" + dir.path().string() + "\"";
  if (std::system(cmd.c_str()) != 0)
    GTEST_SKIP() << "python3 with numpy not available";
  const auto ds = load_dataset(dir / "extracted.json");
  ASSERT_EQ(ds.size(), 100u);
  ASSERT_EQ(ds.dim, 16);
  EXPECT_EQ(ds.class_count, 10);
  EXPECT_EQ(ds.subjects().size(), 5u);
  const auto bits = nlohmann::json::parse(testing::slurp(dir / "expected_bits.json")).get<std::vector<std::uint32_t>>();
  ASSERT_EQ(bits.size(), 1600u);
  for (std::size_t k = 0; k < 100; ++k)
    for (std::size_t i = 0; i < 16; ++i)
      ASSERT_EQ(std::bit_cast<std::uint32_t>(ds.records[k].vector[i]), bits[k * 16 + i]);
  // Saving it back reproduces the external payload byte for byte.
  save_dataset(ds, dir / "resaved.json");
  EXPECT_EQ(testing::slurp(dir / "resaved.f32"), testing::slurp(dir / "extracted.f32"));
}

} // namespace
} // namespace zsdd
