// zsdd: command-line front end for the zero-shot decoupling pipeline.
//
//   zsdd synth     --seed N --out DIR [generator flags]
//   zsdd classify  --images I.json --texts T.json [--prompts P.json] [--dad] [--teo] ...
//   zsdd ablate    (--seed N [generator flags] | --images I.json --texts T.json [--prompts P.json]...) --out grid.csv
//   zsdd export-2d --images I.json --texts T.json [--dad] [--teo] --out points.csv
//
// Exit codes: 0 success, 1 I/O failure, 2 validation error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zsdd/zsdd.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;

struct InputOptions {
  std::string images;
  std::vector<std::string> texts;
  std::vector<std::string> prompts;
};

struct StageOptions {
  bool dad = false;
  bool teo = false;
  bool pre_normalize = false;
  double calibration_fraction = 1.0;
  int k = 3;
};

struct SynthOptions {
  std::optional<std::uint64_t> seed;
  zsdd::SynthConfig cfg;
};

void add_inputs(CLI::App *cmd, InputOptions &in, bool many_texts) {
  cmd->add_option("--images", in.images, "Image embedding manifest (JSON)");
  if (many_texts) {
    cmd->add_option("--texts", in.texts, "Text embedding manifest; one for all prompt files or one per prompt file");
    cmd->add_option("--prompts", in.prompts, "Prompt file; repeat to compare prompt sets");
  } else {
    cmd->add_option("--texts", in.texts, "Text embedding manifest (JSON)")->expected(1);
    cmd->add_option("--prompts", in.prompts, "Prompt file; texts are looked up by rendered prompt")->expected(1);
  }
}

void add_stages(CLI::App *cmd, StageOptions &st, bool toggles) {
  if (toggles) {
    cmd->add_flag("--dad", st.dad, "Subtract per-subject mean image embeddings");
    cmd->add_flag("--teo", st.teo, "Orthogonalize text embeddings (nearest orthonormal frame)");
  }
  cmd->add_flag("--pre-normalize", st.pre_normalize, "Unit-normalize image embeddings before subject means");
  cmd->add_option("--calibration-fraction", st.calibration_fraction,
                  "Fraction of each subject's records (in file order) used for its mean, in (0, 1]")
      ->capture_default_str();
  cmd->add_option("--k", st.k, "k for the extra top-k accuracy in the report")->capture_default_str();
}

void add_synth(CLI::App *cmd, SynthOptions &s) {
  cmd->add_option("--seed", s.seed, "Generator seed (required for synthetic data)");
  cmd->add_option("--dim", s.cfg.dim, "Embedding dimension")->capture_default_str();
  cmd->add_option("--classes", s.cfg.n_classes, "Number of classes")->capture_default_str();
  cmd->add_option("--subjects", s.cfg.n_subjects, "Number of subjects")->capture_default_str();
  cmd->add_option("--samples-per-cell", s.cfg.samples_per_cell, "Records per (subject, class)")
      ->capture_default_str();
  cmd->add_option("--alpha,--appearance-strength", s.cfg.appearance_strength, "Subject appearance strength")
      ->capture_default_str();
  cmd->add_option("--beta,--class-strength", s.cfg.class_strength, "Class signal strength")->capture_default_str();
  cmd->add_option("--sigma,--noise-sigma", s.cfg.noise_sigma, "Isotropic noise scale")->capture_default_str();
  cmd->add_option("--gamma,--text-tightness", s.cfg.text_tightness, "Text collapse toward the mean prototype")
      ->capture_default_str();
}

void check_stages(const StageOptions &st) {
  if (!(st.calibration_fraction > 0.0 && st.calibration_fraction <= 1.0))
    throw zsdd::ValidationError("--calibration-fraction must be in (0, 1]");
  if (st.k < 1)
    throw zsdd::ValidationError("--k must be >= 1");
}

zsdd::RunToggles toggles_of(const StageOptions &st, std::string prompts_label = {}) {
  return {std::move(prompts_label), st.dad, st.teo, st.pre_normalize, st.calibration_fraction};
}

zsdd::TextMatrix load_texts(const std::string &texts_path, const std::string &prompts_path) {
  const auto texts = zsdd::load_dataset(texts_path);
  if (prompts_path.empty())
    return zsdd::text_matrix_by_class(texts);
  const zsdd::StoredTextEncoder encoder(texts);
  return zsdd::embed_prompts(zsdd::load_prompts(prompts_path), encoder);
}

std::string stem(const std::string &path) { return path.empty() ? "" : fs::path(path).stem().string(); }

void require_field(bool ok, const std::string &field) {
  if (!ok)
    throw zsdd::ValidationError(field + " is required");
}

zsdd::SynthConfig synth_config(const SynthOptions &s) {
  require_field(s.seed.has_value(), "--seed");
  auto cfg = s.cfg;
  cfg.seed = *s.seed;
  zsdd::validate(cfg);
  return cfg;
}

int cmd_synth(const SynthOptions &s, const std::string &out_dir) {
  const auto cfg = synth_config(s);
  require_field(!out_dir.empty(), "--out");
  const auto data = zsdd::generate(cfg);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    throw zsdd::IoError("cannot create " + out_dir);
  zsdd::save_dataset(data.images, fs::path(out_dir) / "images.json");
  zsdd::save_dataset(zsdd::text_dataset(data.texts), fs::path(out_dir) / "texts.json");
  std::cout << "wrote " << data.images.size() << " image records and " << data.texts.class_count()
            << " text records to " << out_dir << "\n";
  return 0;
}

struct ClassifyOutputs {
  std::string predictions = "predictions.jsonl";
  std::string report = "report.json";
  std::string csv;
  std::string pr_curve;
};

int cmd_classify(const InputOptions &in, const StageOptions &st, const ClassifyOutputs &out) {
  check_stages(st);
  require_field(!in.images.empty(), "--images");
  require_field(in.texts.size() == 1, "--texts");
  const std::string prompts = in.prompts.empty() ? "" : in.prompts.front();

  const auto images = zsdd::load_dataset(in.images);
  const auto texts = load_texts(in.texts.front(), prompts);
  const auto result = zsdd::run_pipeline(images, texts, toggles_of(st, stem(prompts)), st.k);

  zsdd::io::write_file_atomic(out.predictions, zsdd::to_jsonl(result.predictions));
  zsdd::io::write_file_atomic(out.report, zsdd::to_json(result.report).dump(2) + "\n");
  if (!out.csv.empty())
    zsdd::io::write_file_atomic(out.csv, zsdd::csv_header() + "\n" + zsdd::to_csv_row(result.report) + "\n");
  if (!out.pr_curve.empty()) {
    const auto truths = zsdd::detail::truths_of(result.predictions);
    const auto curve = zsdd::pr_curve(zsdd::distraction_scores(result.predictions), zsdd::distracted_labels(truths));
    zsdd::io::write_file_atomic(out.pr_curve, zsdd::to_csv(curve));
  }
  const auto &r = result.report;
  std::cout << "top1=" << r.top1 << " top3=" << r.top3 << " macro_p=" << r.macro_precision
            << " macro_r=" << r.macro_recall << " auprc=" << r.auprc << " fnr=" << r.fnr << "\n";
  return 0;
}

int cmd_ablate(const InputOptions &in, const StageOptions &st, const SynthOptions &s, const std::string &out) {
  check_stages(st);
  require_field(!out.empty(), "--out");
  std::vector<zsdd::AblationCell> cells;
  if (s.seed) {
    if (!in.images.empty() || !in.texts.empty() || !in.prompts.empty())
      throw zsdd::ValidationError("--seed selects synthetic mode; drop --images/--texts/--prompts");
    cells = zsdd::run_ablation(synth_config(s), toggles_of(st), st.k);
  } else {
    require_field(!in.images.empty(), "--images");
    require_field(!in.texts.empty(), "--texts");
    const auto variants = std::max<std::size_t>(1, in.prompts.size());
    if (in.texts.size() != 1 && in.texts.size() != variants)
      throw zsdd::ValidationError("--texts must be given once or once per --prompts");
    const auto images = zsdd::load_dataset(in.images);
    for (std::size_t v = 0; v < variants; ++v) {
      const std::string prompts = in.prompts.empty() ? "" : in.prompts[v];
      const auto texts = load_texts(in.texts.size() == 1 ? in.texts.front() : in.texts[v], prompts);
      auto grid = zsdd::ablation_grid(images, texts, toggles_of(st, stem(prompts)), st.k);
      cells.insert(cells.end(), grid.begin(), grid.end());
    }
  }
  const auto csv = zsdd::ablation_csv(cells);
  zsdd::io::write_file_atomic(out, csv);
  std::cout << csv;
  return 0;
}

int cmd_export_2d(const InputOptions &in, const StageOptions &st, const std::string &out) {
  check_stages(st);
  require_field(!in.images.empty(), "--images");
  require_field(in.texts.size() == 1, "--texts");
  require_field(!out.empty(), "--out");
  const auto images = zsdd::load_dataset(in.images);
  const auto texts = load_texts(in.texts.front(), in.prompts.empty() ? "" : in.prompts.front());
  const zsdd::DadOptions dad{st.pre_normalize, st.calibration_fraction};

  std::vector<zsdd::ExportPoint> points;
  auto run = [&](const auto &text_columns) {
    points = st.dad ? zsdd::export_2d(zsdd::apply_dad(images, dad), text_columns)
                    : zsdd::export_2d(images, text_columns);
  };
  if (st.teo)
    run(zsdd::teo_project(texts));
  else
    run(texts);
  zsdd::io::write_file_atomic(out, zsdd::export_csv(points));
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Zero-shot distracted-driver classification with appearance and text decoupling"};
  app.require_subcommand(1);

  InputOptions in;
  StageOptions st;
  SynthOptions synth;
  ClassifyOutputs outputs;
  std::string out;

  auto *synth_cmd = app.add_subcommand("synth", "Generate a synthetic confounded embedding benchmark");
  add_synth(synth_cmd, synth);
  synth_cmd->add_option("--out", out, "Output directory (images.json, texts.json + payloads)");

  auto *classify_cmd = app.add_subcommand("classify", "Run the pipeline and write predictions and metrics");
  add_inputs(classify_cmd, in, false);
  add_stages(classify_cmd, st, true);
  classify_cmd->add_option("--predictions", outputs.predictions, "Predictions output (JSON Lines)")
      ->capture_default_str();
  classify_cmd->add_option("--report", outputs.report, "Metrics report output (JSON)")->capture_default_str();
  classify_cmd->add_option("--csv", outputs.csv, "Also write the report as a one-row CSV");
  classify_cmd->add_option("--pr-curve", outputs.pr_curve, "Write the binary precision-recall curve as CSV");

  auto *ablate_cmd = app.add_subcommand("ablate", "Evaluate the {DAD, TEO} grid (per prompt file in real mode)");
  add_inputs(ablate_cmd, in, true);
  add_stages(ablate_cmd, st, false);
  add_synth(ablate_cmd, synth);
  ablate_cmd->add_option("--out", out, "Combined CSV, one row per cell");

  auto *export_cmd = app.add_subcommand("export-2d", "Project images and texts onto the top-2 image PCs (CSV)");
  add_inputs(export_cmd, in, false);
  add_stages(export_cmd, st, true);
  export_cmd->add_option("--out", out, "Output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (synth_cmd->parsed())
      return cmd_synth(synth, out);
    if (classify_cmd->parsed())
      return cmd_classify(in, st, outputs);
    if (ablate_cmd->parsed())
      return cmd_ablate(in, st, synth, out);
    return cmd_export_2d(in, st, out);
  } catch (const zsdd::IoError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const zsdd::ValidationError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}
