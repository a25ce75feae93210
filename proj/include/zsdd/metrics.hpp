#pragma once

// Evaluation of zero-shot predictions.
//
// Conventions:
//  * precision/recall are macro averages over all classes; a class with a zero
//    denominator contributes 0 and still counts in the average;
//  * the binary task treats "distracted" (true class != 0) as positive, the
//    hard decision is predicted_class != 0 and the continuous score is the
//    row's distraction_score margin;
//  * AUPRC is average precision, sum_n (R_n - R_{n-1}) P_n, with no
//    interpolation;
//  * FNR is measured at the hard decision.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zsdd/classifier.hpp"
#include "zsdd/error.hpp"

namespace zsdd {

struct ConfusionMatrix {
  int classes = 0;
  // Row-major, rows = true class, columns = predicted class.
  std::vector<std::int64_t> counts;

  explicit ConfusionMatrix(int n = 0) : classes(n), counts(static_cast<std::size_t>(n) * n, 0) {}

  std::int64_t &at(int truth, int predicted) {
    return counts[static_cast<std::size_t>(truth) * classes + predicted];
  }
  std::int64_t at(int truth, int predicted) const {
    return counts[static_cast<std::size_t>(truth) * classes + predicted];
  }
  std::int64_t row_sum(int truth) const {
    std::int64_t s = 0;
    for (int p = 0; p < classes; ++p)
      s += at(truth, p);
    return s;
  }
  std::int64_t col_sum(int predicted) const {
    std::int64_t s = 0;
    for (int t = 0; t < classes; ++t)
      s += at(t, predicted);
    return s;
  }
  std::int64_t total() const { return std::accumulate(counts.begin(), counts.end(), std::int64_t{0}); }
  std::int64_t trace() const {
    std::int64_t s = 0;
    for (int c = 0; c < classes; ++c)
      s += at(c, c);
    return s;
  }
};

namespace detail {

inline void check_aligned(const std::vector<PredictionRow> &rows, const std::vector<int> &truths) {
  require(!rows.empty(), "no prediction rows");
  require(rows.size() == truths.size(), "predictions and truths differ in length");
}

inline std::vector<int> truths_of(const std::vector<PredictionRow> &rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (const auto &r : rows)
    out.push_back(r.class_id_true);
  return out;
}

} // namespace detail

inline ConfusionMatrix confusion_matrix(const std::vector<PredictionRow> &rows, const std::vector<int> &truths) {
  detail::check_aligned(rows, truths);
  const int n = static_cast<int>(rows.front().similarities.size());
  ConfusionMatrix cm(n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail::require(truths[i] >= 0 && truths[i] < n, "true class out of range");
    detail::require(static_cast<int>(rows[i].similarities.size()) == n, "rows disagree on class count");
    ++cm.at(truths[i], rows[i].predicted_class);
  }
  return cm;
}

inline double topk_accuracy(const std::vector<PredictionRow> &rows, const std::vector<int> &truths, int k) {
  detail::check_aligned(rows, truths);
  detail::require(k >= 1, "k must be >= 1");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto &rank = rows[i].ranking;
    const auto end = rank.begin() + std::min<std::ptrdiff_t>(k, static_cast<std::ptrdiff_t>(rank.size()));
    if (std::find(rank.begin(), end, truths[i]) != end)
      ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

inline PrecisionRecall macro_precision_recall(const ConfusionMatrix &cm) {
  detail::require(cm.total() > 0, "empty confusion matrix");
  PrecisionRecall out;
  for (int c = 0; c < cm.classes; ++c) {
    const auto tp = static_cast<double>(cm.at(c, c));
    const auto col = cm.col_sum(c);
    const auto row = cm.row_sum(c);
    out.precision += col > 0 ? tp / static_cast<double>(col) : 0.0;
    out.recall += row > 0 ? tp / static_cast<double>(row) : 0.0;
  }
  out.precision /= cm.classes;
  out.recall /= cm.classes;
  return out;
}

struct PRPoint {
  // Samples with score >= threshold are predicted positive.
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::int64_t true_positives = 0;
  std::int64_t false_positives = 0;
};

struct PRCurve {
  // Thresholds strictly decreasing, recall nondecreasing.
  std::vector<PRPoint> points;
  std::int64_t positives = 0;
};

inline PRCurve pr_curve(const std::vector<double> &scores, const std::vector<bool> &labels) {
  detail::require(scores.size() == labels.size(), "scores and labels differ in length");
  PRCurve curve;
  curve.positives = std::count(labels.begin(), labels.end(), true);
  detail::require(curve.positives > 0, "precision-recall curve needs at least one positive label");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::int64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == threshold; ++i)
      (labels[order[i]] ? tp : fp) += 1;
    curve.points.push_back({threshold, static_cast<double>(tp) / static_cast<double>(tp + fp),
                            static_cast<double>(tp) / static_cast<double>(curve.positives), tp, fp});
  }
  return curve;
}

inline double auprc(const PRCurve &curve) {
  double area = 0.0, prev_recall = 0.0;
  for (const auto &p : curve.points) {
    area += (p.recall - prev_recall) * p.precision;
    prev_recall = p.recall;
  }
  return area;
}

// Binary labels (true = distracted) and margin scores of a prediction set.
inline std::vector<bool> distracted_labels(const std::vector<int> &truths) {
  std::vector<bool> out;
  out.reserve(truths.size());
  for (int t : truths)
    out.push_back(t != 0);
  return out;
}

inline std::vector<double> distraction_scores(const std::vector<PredictionRow> &rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto &r : rows)
    out.push_back(r.distraction_score);
  return out;
}

inline double fnr(const std::vector<PredictionRow> &rows, const std::vector<int> &truths) {
  detail::check_aligned(rows, truths);
  std::int64_t tp = 0, fn = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (truths[i] == 0)
      continue;
    (binary_decision(rows[i]) ? tp : fn) += 1;
  }
  detail::require(tp + fn > 0, "FNR needs at least one truly distracted row");
  return static_cast<double>(fn) / static_cast<double>(tp + fn);
}

// Which pipeline stages produced the predictions.
struct RunToggles {
  // Prompt-set label; empty when text embeddings were read by class id.
  std::string prompts;
  bool dad = false;
  bool teo = false;
  bool pre_normalize = false;
  double calibration_fraction = 1.0;
};

struct MetricsReport {
  double top1 = 0.0;
  double top3 = 0.0;
  int k = 3;
  double topk = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  ConfusionMatrix confusion;
  double auprc = 0.0;
  double fnr = 0.0;
  std::int64_t n_samples = 0;
  std::int64_t n_subjects = 0;
  std::int64_t n_fallback = 0;
  RunToggles config;
};

inline MetricsReport evaluate(const std::vector<PredictionRow> &rows, const std::vector<int> &truths,
                              const RunToggles &config = {}, int k = 3) {
  detail::check_aligned(rows, truths);
  MetricsReport rep;
  rep.config = config;
  rep.k = k;
  rep.top1 = topk_accuracy(rows, truths, 1);
  rep.top3 = topk_accuracy(rows, truths, 3);
  rep.topk = topk_accuracy(rows, truths, k);
  rep.confusion = confusion_matrix(rows, truths);
  const auto pr = macro_precision_recall(rep.confusion);
  rep.macro_precision = pr.precision;
  rep.macro_recall = pr.recall;

  // Single-label data: micro precision = micro recall = top-1.
  const double micro = static_cast<double>(rep.confusion.trace()) / static_cast<double>(rep.confusion.total());
  if (micro != rep.top1)
    throw std::logic_error("micro-averaged precision disagrees with top-1 accuracy");

  rep.auprc = auprc(pr_curve(distraction_scores(rows), distracted_labels(truths)));
  rep.fnr = fnr(rows, truths);
  rep.n_samples = static_cast<std::int64_t>(rows.size());
  std::set<std::string> subjects;
  for (const auto &r : rows) {
    subjects.insert(r.subject_id);
    rep.n_fallback += r.fallback_used ? 1 : 0;
  }
  rep.n_subjects = static_cast<std::int64_t>(subjects.size());
  return rep;
}

inline MetricsReport evaluate(const std::vector<PredictionRow> &rows, const RunToggles &config = {}, int k = 3) {
  return evaluate(rows, detail::truths_of(rows), config, k);
}

inline nlohmann::ordered_json to_json(const RunToggles &c) {
  nlohmann::ordered_json j;
  j["prompts"] = c.prompts.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(c.prompts);
  j["pe"] = !c.prompts.empty();
  j["dad"] = c.dad;
  j["teo"] = c.teo;
  j["pre_normalize"] = c.pre_normalize;
  j["calibration_fraction"] = c.calibration_fraction;
  return j;
}

inline nlohmann::ordered_json to_json(const MetricsReport &r) {
  nlohmann::ordered_json j;
  j["top1"] = r.top1;
  j["top3"] = r.top3;
  j["k"] = r.k;
  j["topk"] = r.topk;
  j["macro_precision"] = r.macro_precision;
  j["macro_recall"] = r.macro_recall;
  auto cm = nlohmann::ordered_json::array();
  for (int t = 0; t < r.confusion.classes; ++t) {
    auto row = nlohmann::ordered_json::array();
    for (int p = 0; p < r.confusion.classes; ++p)
      row.push_back(r.confusion.at(t, p));
    cm.push_back(std::move(row));
  }
  j["confusion"] = std::move(cm);
  j["auprc"] = r.auprc;
  j["fnr"] = r.fnr;
  j["n_samples"] = r.n_samples;
  j["n_subjects"] = r.n_subjects;
  j["n_fallback"] = r.n_fallback;
  j["config"] = to_json(r.config);
  j["conventions"] = {{"precision_recall_averaging", "macro"},
                      {"zero_denominator", "contributes 0"},
                      {"binary_score", "max_{c>=1} sim[c] - sim[0]"},
                      {"auprc_estimator", "average_precision"},
                      {"fnr_decision", "argmax"}};
  return j;
}

namespace detail {

inline std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

} // namespace detail

inline std::string csv_header() {
  return "prompts,dad,teo,top1,top3,macro_precision,macro_recall,auprc,fnr,n_samples,n_subjects";
}

inline std::string to_csv_row(const MetricsReport &r) {
  using detail::format_number;
  std::string out = r.config.prompts;
  out += r.config.dad ? ",1" : ",0";
  out += r.config.teo ? ",1" : ",0";
  for (double v : {r.top1, r.top3, r.macro_precision, r.macro_recall, r.auprc, r.fnr})
    out += "," + format_number(v);
  out += "," + std::to_string(r.n_samples) + "," + std::to_string(r.n_subjects);
  return out;
}

inline std::string to_csv(const PRCurve &curve) {
  std::string out = "threshold,precision,recall\n";
  for (const auto &p : curve.points)
    out += detail::format_number(p.threshold) + "," + detail::format_number(p.precision) + "," +
           detail::format_number(p.recall) + "\n";
  return out;
}

} // namespace zsdd
