#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_util.hpp"
#include "zsdd/classifier.hpp"

namespace zsdd {
namespace {

TEST(Cosine, Examples) {
  EXPECT_DOUBLE_EQ(cosine({1, 0}, {1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(cosine({1, 0}, {0, 1}), 0.0);
  EXPECT_NEAR(cosine({3, 4}, {4, 3}), 0.96, 1e-15);
  EXPECT_THROW(cosine({0, 0}, {1, 0}), ValidationError);
  EXPECT_THROW(cosine({1, 0, 0}, {1, 0}), ValidationError);
}

TextMatrix identity_texts(int dim, int classes) {
  return {Eigen::MatrixXd::Identity(dim, classes)};
}

TEST(Classify, ExactMatchWins) {
  const auto ds = make_dataset(4, {{"A", "0", 3, {0.0f, 0.0f, 0.0f, 2.0f}}});
  const auto rows = classify(ds, identity_texts(4, 4));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].predicted_class, 3);
  EXPECT_DOUBLE_EQ(rows[0].similarities[3], 1.0);
  EXPECT_EQ(rows[0].ranking.front(), 3);
  EXPECT_TRUE(rows[0].predicted_binary);
}

TEST(Classify, TiesGoToLowerClassId) {
  TextMatrix t{Eigen::MatrixXd(2, 3)};
  t.columns << 1, 0, 1, 0, 1, 0; // columns 0 and 2 identical
  const auto ds = make_dataset(2, {{"A", "0", 0, {1.0f, 0.0f}}, {"A", "1", 1, {0.0f, 1.0f}}});
  const auto rows = classify(ds, t);
  EXPECT_EQ(rows[0].ranking, (std::vector<int>{0, 2, 1}));
  EXPECT_EQ(rows[1].ranking, (std::vector<int>{1, 0, 2}));
  // Tie between class 0 and a distracted class: margin 0, decision safe.
  EXPECT_DOUBLE_EQ(rows[0].distraction_score, 0.0);
  EXPECT_FALSE(rows[0].predicted_binary);
}

TEST(Classify, MatchesBruteForceArgmax) {
  std::mt19937_64 gen(12);
  std::normal_distribution<double> n01;
  const auto ds = testing::random_dataset(gen, 4, 5, 16, 5);
  oracle::Matrix texts(5, std::vector<double>(16));
  TextMatrix t{Eigen::MatrixXd(16, 5)};
  for (int c = 0; c < 5; ++c)
    for (int r = 0; r < 16; ++r)
      t.columns(r, c) = texts[c][r] = n01(gen);
  const auto rows = classify(ds, t);
  ASSERT_EQ(rows.size(), 20u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::vector<double> image(ds.records[i].vector.begin(), ds.records[i].vector.end());
    EXPECT_EQ(rows[i].predicted_class, oracle::argmax_class(image, texts));
    for (int c = 0; c < 5; ++c)
      EXPECT_NEAR(rows[i].similarities[c], oracle::naive_cosine(image, texts[c]), 1e-12);
  }
}

TEST(Classify, RowInvariants) {
  std::mt19937_64 gen(13);
  const auto ds = testing::random_dataset(gen, 3, 10, 8, 4);
  TextMatrix t{Eigen::MatrixXd::Random(8, 4)};
  for (const auto &row : classify(ds, t)) {
    for (double s : row.similarities) {
      EXPECT_GE(s, -1.0 - 1e-6);
      EXPECT_LE(s, 1.0 + 1e-6);
    }
    EXPECT_EQ(row.predicted_class, row.ranking.front());
    EXPECT_EQ(row.predicted_binary, row.predicted_class != 0);
    EXPECT_EQ(row.predicted_binary, row.distraction_score > 0.0);
    EXPECT_EQ(binary_decision(row), row.predicted_binary);
  }
}

TEST(Classify, BinaryDecision) {
  auto safe = make_prediction("A", "0", 0, {0.9, 0.1, 0.2});
  EXPECT_FALSE(binary_decision(safe));
  std::vector<double> sims(10, 0.0);
  sims[7] = 0.5;
  EXPECT_TRUE(binary_decision(make_prediction("A", "1", 7, sims)));
}

TEST(Classify, PartitionOfDecisions) {
  std::mt19937_64 gen(14);
  const auto rows = oracle::random_rows(gen, 500, 10);
  std::size_t safe = 0, distracted = 0;
  for (const auto &r : rows)
    (binary_decision(r) ? distracted : safe) += 1;
  EXPECT_EQ(safe + distracted, rows.size());
}

TEST(Classify, ScaleInvariance) {
  std::mt19937_64 gen(15);
  auto ds = testing::random_dataset(gen, 3, 8, 10, 4);
  TextMatrix t{Eigen::MatrixXd::Random(10, 4)};
  const auto before = classify(ds, t);
  for (auto &r : ds.records)
    for (auto &v : r.vector)
      v *= 4.0f; // power of two keeps the floats exact
  const auto after = classify(ds, t);
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(before[i].ranking, after[i].ranking);
    EXPECT_EQ(before[i].predicted_binary, after[i].predicted_binary);
  }
}

TEST(Classify, PermutationEquivariance) {
  std::mt19937_64 gen(16);
  const auto ds = testing::random_dataset(gen, 3, 8, 10, 4);
  TextMatrix t{Eigen::MatrixXd::Random(10, 4)};
  const std::vector<int> perm{2, 0, 3, 1}; // new column j = old column perm[j]
  TextMatrix tp{Eigen::MatrixXd(10, 4)};
  for (int j = 0; j < 4; ++j)
    tp.columns.col(j) = t.columns.col(perm[j]);
  const auto a = classify(ds, t), b = classify(ds, tp);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int j = 0; j < 4; ++j)
      EXPECT_EQ(b[i].similarities[j], a[i].similarities[perm[j]]);
    EXPECT_EQ(perm[b[i].predicted_class], a[i].predicted_class);
  }
}

TEST(Classify, DimensionMismatchAndLabelRange) {
  const auto ds = make_dataset(3, {{"A", "0", 0, {1.0f, 0.0f, 0.0f}}});
  EXPECT_THROW(classify(ds, identity_texts(4, 3)), ValidationError);
  const auto high = make_dataset(3, {{"A", "0", 5, {1.0f, 0.0f, 0.0f}}});
  EXPECT_THROW(classify(high, identity_texts(3, 3)), ValidationError);
}

TEST(Classify, DecoupledRecordsCarryFallbackFlag) {
  const auto ds = make_dataset(2, {{"A", "0", 0, {1.0f, 0.0f}}, {"A", "1", 1, {0.0f, 1.0f}}, {"B", "0", 1, {0.0f, 1.0f}}});
  const auto rows = classify(apply_dad(ds), identity_texts(2, 2));
  EXPECT_FALSE(rows[0].fallback_used);
  EXPECT_TRUE(rows[2].fallback_used);
  EXPECT_EQ(rows[2].predicted_class, 1);
}

TEST(Classify, JsonlSerializationIsDeterministic) {
  std::mt19937_64 gen(17);
  const auto ds = testing::random_dataset(gen, 2, 4, 6, 3);
  TextMatrix t{Eigen::MatrixXd::Random(6, 3)};
  const auto a = to_jsonl(classify(ds, t));
  const auto b = to_jsonl(classify(ds, t));
  EXPECT_EQ(a, b);
  const auto first = nlohmann::ordered_json::parse(a.substr(0, a.find('\n')));
  std::vector<std::string> keys;
  for (auto it = first.begin(); it != first.end(); ++it)
    keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"subject_id", "sample_id", "class_id_true", "similarities", "ranking",
                                            "predicted_class", "distraction_score", "predicted_binary",
                                            "fallback_used"}));
}

} // namespace
} // namespace zsdd
