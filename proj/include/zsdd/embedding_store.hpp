#pragma once

// Embedding datasets and their on-disk interchange format.
//
// A dataset is a JSON manifest plus a headerless payload of count*dim
// little-endian f32 values, one row per record in manifest order:
//
//   {"format_version":1, "dim":D, "count":N, "payload":"<relative path>",
//    "dtype":"f32le", "records":[{"subject_id":..,"sample_id":..,"class_id":..}, ...]}
//
// Text embeddings use the same format; class_id names the class column and
// sample_id carries the rendered prompt the vector was encoded from.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "zsdd/error.hpp"
#include "zsdd/io.hpp"

namespace zsdd {

namespace fs = std::filesystem;

struct EmbeddingRecord {
  std::string subject_id;
  std::string sample_id;
  int class_id = 0;
  std::vector<float> vector;

  bool operator==(const EmbeddingRecord &) const = default;
};

struct Dataset {
  int dim = 0;
  // Number of classes the labels refer to; at least max(class_id) + 1.
  int class_count = 0;
  std::vector<EmbeddingRecord> records;

  std::size_t size() const { return records.size(); }

  // Distinct subject ids in order of first appearance.
  std::vector<std::string> subjects() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto &r : records)
      if (seen.insert(r.subject_id).second)
        out.push_back(r.subject_id);
    return out;
  }

  bool operator==(const Dataset &) const = default;
};

inline constexpr int kFormatVersion = 1;
inline constexpr const char *kDtype = "f32le";

// Throws ValidationError on the first violated dataset invariant.
inline void validate(const Dataset &ds) {
  detail::require(ds.dim > 0, "dim must be positive");
  detail::require(!ds.records.empty(), "dataset has no records");
  std::set<std::pair<std::string, std::string>> keys;
  int max_class = -1;
  for (std::size_t k = 0; k < ds.records.size(); ++k) {
    const auto &r = ds.records[k];
    const auto where = "record " + std::to_string(k);
    detail::require(static_cast<int>(r.vector.size()) == ds.dim,
                    where + ": vector has " + std::to_string(r.vector.size()) +
                        " entries, expected dim " + std::to_string(ds.dim));
    detail::require(std::all_of(r.vector.begin(), r.vector.end(),
                                [](float v) { return std::isfinite(v); }),
                    where + ": non-finite value in vector");
    detail::require(r.class_id >= 0, where + ": negative class_id");
    detail::require(keys.emplace(r.subject_id, r.sample_id).second,
                    where + ": duplicate (subject_id, sample_id) = (" + r.subject_id + ", " +
                        r.sample_id + ")");
    max_class = std::max(max_class, r.class_id);
  }
  detail::require(ds.class_count > max_class,
                  "class_id " + std::to_string(max_class) + " out of range for class_count " +
                      std::to_string(ds.class_count));
}

inline Dataset make_dataset(int dim, std::vector<EmbeddingRecord> records, int class_count = 0) {
  Dataset ds;
  ds.dim = dim;
  ds.records = std::move(records);
  int max_class = -1;
  for (const auto &r : ds.records)
    max_class = std::max(max_class, r.class_id);
  ds.class_count = std::max(class_count, max_class + 1);
  validate(ds);
  return ds;
}

// Payload path written next to a manifest: "x.json" -> "x.f32".
inline fs::path default_payload_path(const fs::path &manifest_path) {
  fs::path p = manifest_path;
  p.replace_extension(".f32");
  return p;
}

inline void save_dataset(const Dataset &ds, const fs::path &manifest_path) {
  validate(ds);
  constexpr auto max_entries = static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max() / 4);
  detail::require(static_cast<std::uint64_t>(ds.size()) <= max_entries / static_cast<std::uint64_t>(ds.dim),
                  "count*dim overflows the payload format");

  const fs::path payload = default_payload_path(manifest_path);

  nlohmann::ordered_json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["dim"] = ds.dim;
  manifest["count"] = ds.size();
  manifest["payload"] = payload.filename().string();
  manifest["dtype"] = kDtype;
  auto &records = manifest["records"] = nlohmann::ordered_json::array();
  std::string bytes;
  bytes.reserve(ds.size() * static_cast<std::size_t>(ds.dim) * 4);
  for (const auto &r : ds.records) {
    records.push_back({{"subject_id", r.subject_id}, {"sample_id", r.sample_id}, {"class_id", r.class_id}});
    for (float v : r.vector)
      io::append_f32le(bytes, v);
  }

  io::write_file_atomic(payload, bytes);
  io::write_file_atomic(manifest_path, manifest.dump(2) + "\n");
}

inline Dataset load_dataset(const fs::path &manifest_path) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(io::read_file(manifest_path));
  } catch (const nlohmann::json::parse_error &e) {
    throw ValidationError(manifest_path.string() + ": malformed JSON manifest: " + e.what());
  }

  auto field = [&](const char *name) -> const nlohmann::json & {
    if (!manifest.is_object() || !manifest.contains(name))
      detail::fail(manifest_path.string() + ": manifest missing field '" + name + "'");
    return manifest.at(name);
  };
  auto integer = [&](const char *name) {
    const auto &v = field(name);
    detail::require(v.is_number_integer(), manifest_path.string() + ": field '" + name + "' must be an integer");
    return v.get<std::int64_t>();
  };

  detail::require(integer("format_version") == kFormatVersion,
                  manifest_path.string() + ": unsupported format_version");
  detail::require(field("dtype") == kDtype, manifest_path.string() + ": dtype must be \"f32le\"");
  const auto dim = integer("dim");
  const auto count = integer("count");
  detail::require(dim > 0 && dim <= std::numeric_limits<int>::max(), manifest_path.string() + ": invalid dim");
  detail::require(count > 0, manifest_path.string() + ": count must be positive");
  const auto &payload_name = field("payload");
  detail::require(payload_name.is_string(), manifest_path.string() + ": field 'payload' must be a string");
  const auto &recs = field("records");
  detail::require(recs.is_array() && static_cast<std::int64_t>(recs.size()) == count,
                  manifest_path.string() + ": records length does not match count");

  const fs::path payload = manifest_path.parent_path() / payload_name.get<std::string>();
  const std::string bytes = io::read_file(payload);
  const auto expected = static_cast<std::uint64_t>(count) * static_cast<std::uint64_t>(dim) * 4u;
  detail::require(bytes.size() == expected, payload.string() + ": payload is " + std::to_string(bytes.size()) +
                                                " bytes, expected count*dim*4 = " + std::to_string(expected));

  std::vector<EmbeddingRecord> records;
  records.reserve(static_cast<std::size_t>(count));
  const char *p = bytes.data();
  for (const auto &jr : recs) {
    detail::require(jr.is_object() && jr.contains("subject_id") && jr.contains("sample_id") &&
                        jr.contains("class_id"),
                    manifest_path.string() + ": record missing subject_id/sample_id/class_id");
    detail::require(jr["subject_id"].is_string() && jr["sample_id"].is_string() &&
                        jr["class_id"].is_number_integer(),
                    manifest_path.string() + ": record field has wrong type");
    EmbeddingRecord r;
    r.subject_id = jr["subject_id"].get<std::string>();
    r.sample_id = jr["sample_id"].get<std::string>();
    r.class_id = jr["class_id"].get<int>();
    r.vector.resize(static_cast<std::size_t>(dim));
    for (auto &v : r.vector) {
      v = io::read_f32le(p);
      p += 4;
    }
    records.push_back(std::move(r));
  }
  return make_dataset(static_cast<int>(dim), std::move(records));
}

// Class names plus a template with a single "{}" placeholder.
struct PromptSet {
  std::string template_text;
  std::vector<std::string> class_names;

  int class_count() const { return static_cast<int>(class_names.size()); }

  std::string render(int class_id) const {
    detail::require(class_id >= 0 && class_id < class_count(), "class id out of range");
    auto pos = template_text.find("{}");
    return template_text.substr(0, pos) + class_names[static_cast<std::size_t>(class_id)] +
           template_text.substr(pos + 2);
  }

  std::vector<std::string> render_all() const {
    std::vector<std::string> out;
    for (int c = 0; c < class_count(); ++c)
      out.push_back(render(c));
    return out;
  }
};

inline PromptSet make_prompt_set(std::string template_text, std::vector<std::string> class_names) {
  const auto first = template_text.find("{}");
  detail::require(first != std::string::npos, "prompt template has no \"{}\" placeholder");
  detail::require(template_text.find("{}", first + 2) == std::string::npos,
                  "prompt template has more than one \"{}\" placeholder");
  detail::require(class_names.size() >= 2, "prompt set needs at least 2 classes");
  return {std::move(template_text), std::move(class_names)};
}

inline PromptSet load_prompts(const fs::path &path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error &e) {
    throw ValidationError(path.string() + ": malformed prompt JSON: " + e.what());
  }
  detail::require(j.is_object() && j.contains("template") && j["template"].is_string(),
                  path.string() + ": missing string field 'template'");
  detail::require(j.contains("classes") && j["classes"].is_array(), path.string() + ": missing array field 'classes'");
  std::vector<std::string> names;
  for (const auto &c : j["classes"]) {
    detail::require(c.is_string(), path.string() + ": class names must be strings");
    names.push_back(c.get<std::string>());
  }
  try {
    return make_prompt_set(j["template"].get<std::string>(), std::move(names));
  } catch (const ValidationError &e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

// Class text embeddings stacked as columns of a dim x |C| matrix.
struct TextMatrix {
  Eigen::MatrixXd columns;

  int dim() const { return static_cast<int>(columns.rows()); }
  int class_count() const { return static_cast<int>(columns.cols()); }
};

// Stores a text matrix in the interchange format, one record per class.
// `prompts`, when given, become the sample ids so lookups can key on them.
inline Dataset text_dataset(const TextMatrix &texts, const std::vector<std::string> &prompts = {}) {
  detail::require(prompts.empty() || static_cast<int>(prompts.size()) == texts.class_count(),
                  "prompt count does not match text columns");
  std::vector<EmbeddingRecord> records;
  for (int c = 0; c < texts.class_count(); ++c) {
    EmbeddingRecord r;
    r.subject_id = "text";
    r.sample_id = prompts.empty() ? "class_" + std::to_string(c) : prompts[static_cast<std::size_t>(c)];
    r.class_id = c;
    r.vector.resize(static_cast<std::size_t>(texts.dim()));
    for (int i = 0; i < texts.dim(); ++i)
      r.vector[static_cast<std::size_t>(i)] = static_cast<float>(texts.columns(i, c));
    records.push_back(std::move(r));
  }
  return make_dataset(texts.dim(), std::move(records), texts.class_count());
}

} // namespace zsdd
