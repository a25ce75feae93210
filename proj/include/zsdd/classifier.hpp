#pragma once

// Cosine-argmax zero-shot classification against class text embeddings.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <numeric>
#include <ranges>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "zsdd/decoupling.hpp"
#include "zsdd/embedding_store.hpp"
#include "zsdd/error.hpp"

namespace zsdd {

template <class T>
concept Scalar = std::same_as<T, float> || std::same_as<T, double>;

// Computed in double regardless of the storage type.
template <Scalar A, Scalar B>
double cosine(std::span<const A> a, std::span<const B> b) {
  detail::require(a.size() == b.size(), "cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto x = static_cast<double>(a[i]);
    const auto y = static_cast<double>(b[i]);
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  detail::require(na >= kZeroNorm && nb >= kZeroNorm, "cosine: zero-norm vector");
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

inline double cosine(const std::vector<double> &a, const std::vector<double> &b) {
  return cosine(std::span<const double>(a), std::span<const double>(b));
}

struct PredictionRow {
  std::string subject_id;
  std::string sample_id;
  int class_id_true = 0;
  std::vector<double> similarities;
  // Class ids by similarity descending, ties by ascending class id.
  std::vector<int> ranking;
  int predicted_class = 0;
  // max_{c>=1} sim[c] - sim[0]; positive exactly when predicted_binary.
  double distraction_score = 0.0;
  bool predicted_binary = false;
  bool fallback_used = false;
};

// true = distracted.
inline bool binary_decision(const PredictionRow &row) { return row.predicted_class != 0; }

inline std::vector<int> rank_classes(const std::vector<double> &similarities) {
  std::vector<int> order(similarities.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double sa = similarities[static_cast<std::size_t>(a)];
    const double sb = similarities[static_cast<std::size_t>(b)];
    return sa != sb ? sa > sb : a < b;
  });
  return order;
}

// Builds a row from its similarity vector; the rest of the fields follow.
inline PredictionRow make_prediction(std::string subject_id, std::string sample_id, int class_id_true,
                                     std::vector<double> similarities, bool fallback_used = false) {
  detail::require(similarities.size() >= 2, "need at least 2 classes");
  PredictionRow row;
  row.subject_id = std::move(subject_id);
  row.sample_id = std::move(sample_id);
  row.class_id_true = class_id_true;
  row.ranking = rank_classes(similarities);
  row.predicted_class = row.ranking.front();
  row.distraction_score =
      *std::max_element(similarities.begin() + 1, similarities.end()) - similarities.front();
  row.similarities = std::move(similarities);
  row.predicted_binary = binary_decision(row);
  row.fallback_used = fallback_used;
  return row;
}

// Records with subject_id, sample_id, class_id and a float/double vector.
template <class R>
concept ImageRecord = requires(const R &r) {
  { r.subject_id } -> std::convertible_to<std::string>;
  { r.sample_id } -> std::convertible_to<std::string>;
  { r.class_id } -> std::convertible_to<int>;
  requires Scalar<typename std::remove_cvref_t<decltype(r.vector)>::value_type>;
};

template <class D>
concept ImageSet = requires(const D &d) {
  { d.dim } -> std::convertible_to<int>;
  requires ImageRecord<typename std::remove_cvref_t<decltype(d.records)>::value_type>;
};

template <class M>
concept TextColumns = requires(const M &m) {
  { m.columns } -> std::convertible_to<Eigen::MatrixXd>;
};

template <ImageSet Images, TextColumns Texts>
std::vector<PredictionRow> classify(const Images &images, const Texts &texts) {
  const Eigen::MatrixXd &t = texts.columns;
  detail::require(t.cols() >= 2, "need at least 2 classes");
  detail::require(images.dim == t.rows(), "image dim " + std::to_string(images.dim) + " does not match text dim " +
                                              std::to_string(t.rows()));
  std::vector<std::vector<double>> columns(static_cast<std::size_t>(t.cols()));
  for (Eigen::Index c = 0; c < t.cols(); ++c)
    columns[static_cast<std::size_t>(c)].assign(t.col(c).data(), t.col(c).data() + t.rows());

  std::vector<PredictionRow> rows;
  rows.reserve(images.records.size());
  for (const auto &r : images.records) {
    detail::require(r.class_id < t.cols(), "record (" + r.subject_id + ", " + r.sample_id + ") has class_id " +
                                               std::to_string(r.class_id) + " beyond the " +
                                               std::to_string(t.cols()) + " text classes");
    using V = typename std::remove_cvref_t<decltype(r.vector)>::value_type;
    std::span<const V> image(r.vector);
    std::vector<double> sims;
    sims.reserve(columns.size());
    for (const auto &col : columns)
      sims.push_back(cosine(image, std::span<const double>(col)));
    bool fallback = false;
    if constexpr (requires { r.fallback_used; })
      fallback = r.fallback_used;
    rows.push_back(make_prediction(r.subject_id, r.sample_id, r.class_id, std::move(sims), fallback));
  }
  return rows;
}

inline nlohmann::ordered_json to_json(const PredictionRow &row) {
  nlohmann::ordered_json j;
  j["subject_id"] = row.subject_id;
  j["sample_id"] = row.sample_id;
  j["class_id_true"] = row.class_id_true;
  j["similarities"] = row.similarities;
  j["ranking"] = row.ranking;
  j["predicted_class"] = row.predicted_class;
  j["distraction_score"] = row.distraction_score;
  j["predicted_binary"] = row.predicted_binary;
  j["fallback_used"] = row.fallback_used;
  return j;
}

// One JSON object per line.
inline std::string to_jsonl(const std::vector<PredictionRow> &rows) {
  std::string out;
  for (const auto &row : rows) {
    out += to_json(row).dump();
    out += '\n';
  }
  return out;
}

} // namespace zsdd
