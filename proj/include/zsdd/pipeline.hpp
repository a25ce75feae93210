#pragma once

// End-to-end zero-shot run: optional appearance decoupling, optional text
// orthogonalization, cosine classification, evaluation.

#include <string>
#include <vector>

#include "zsdd/classifier.hpp"
#include "zsdd/decoupling.hpp"
#include "zsdd/embedding_store.hpp"
#include "zsdd/metrics.hpp"

namespace zsdd {

struct PipelineResult {
  std::vector<PredictionRow> predictions;
  MetricsReport report;
};

inline std::vector<PredictionRow> predict(const Dataset &images, const TextMatrix &texts, const RunToggles &run) {
  detail::require(images.class_count <= texts.class_count(),
                  "image labels use " + std::to_string(images.class_count) + " classes but only " +
                      std::to_string(texts.class_count()) + " text embeddings are available");
  const DadOptions dad_opts{run.pre_normalize, run.calibration_fraction};
  detail::check_options(dad_opts);
  auto classify_images = [&](const auto &text_columns) {
    if (run.dad)
      return classify(apply_dad(images, dad_opts), text_columns);
    return classify(images, text_columns);
  };
  if (run.teo)
    return classify_images(teo_project(texts));
  return classify_images(texts);
}

inline PipelineResult run_pipeline(const Dataset &images, const TextMatrix &texts, const RunToggles &run,
                                   int k = 3) {
  PipelineResult out;
  out.predictions = predict(images, texts, run);
  out.report = evaluate(out.predictions, run, k);
  return out;
}

struct AblationCell {
  bool dad = false;
  bool teo = false;
  MetricsReport report;
};

// The 2x2 {DAD, TEO} grid in the order none, DAD, TEO, DAD+TEO.
inline std::vector<AblationCell> ablation_grid(const Dataset &images, const TextMatrix &texts, RunToggles base,
                                               int k = 3) {
  std::vector<AblationCell> cells;
  for (auto [dad, teo] : {std::pair{false, false}, {true, false}, {false, true}, {true, true}}) {
    base.dad = dad;
    base.teo = teo;
    cells.push_back({dad, teo, run_pipeline(images, texts, base, k).report});
  }
  return cells;
}

inline std::string ablation_csv(const std::vector<AblationCell> &cells) {
  std::string out = csv_header() + "\n";
  for (const auto &c : cells)
    out += to_csv_row(c.report) + "\n";
  return out;
}

} // namespace zsdd
