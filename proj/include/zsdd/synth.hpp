#pragma once

// Synthetic embedding benchmark with a known subject-appearance confound.
//
// Generative model (our construction, not measured from any encoder):
//   image(s, c, i) = unit(beta * mu_c + alpha * a_s + sigma * eta)
//   text(c)        = unit((1 - gamma) * mu_c + gamma * m + 0.05 * zeta_c)
// mu_c are orthonormal class prototypes, a_s and zeta_c unit Gaussian
// directions, m the mean prototype, eta standard Gaussian. alpha controls the
// subject confound, gamma collapses the text embeddings toward each other.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "zsdd/embedding_store.hpp"
#include "zsdd/error.hpp"
#include "zsdd/metrics.hpp"
#include "zsdd/pipeline.hpp"
#include "zsdd/rng.hpp"

namespace zsdd {

struct SynthConfig {
  std::uint64_t seed = 0;
  int dim = 64;
  int n_classes = 10;
  int n_subjects = 10;
  int samples_per_cell = 20;
  double appearance_strength = 0.0; // alpha
  double class_strength = 1.0;      // beta
  double noise_sigma = 0.0;         // sigma
  double text_tightness = 0.0;      // gamma
};

inline void validate(const SynthConfig &cfg) {
  detail::require(cfg.n_classes >= 2, "n_classes must be >= 2");
  detail::require(cfg.n_subjects >= 1, "n_subjects must be >= 1");
  detail::require(cfg.samples_per_cell >= 1, "samples_per_cell must be >= 1");
  detail::require(cfg.dim >= cfg.n_classes, "dim must be >= n_classes");
  detail::require(cfg.appearance_strength >= 0.0, "appearance_strength must be >= 0");
  detail::require(cfg.class_strength > 0.0, "class_strength must be > 0");
  detail::require(cfg.noise_sigma >= 0.0, "noise_sigma must be >= 0");
  detail::require(cfg.text_tightness >= 0.0 && cfg.text_tightness <= 1.0, "text_tightness must be in [0, 1]");
}

struct SynthData {
  Dataset images;
  TextMatrix texts;
  std::vector<int> truths;
  // dim x n_classes orthonormal prototypes the data was drawn around.
  Eigen::MatrixXd prototypes;
};

namespace detail {

enum StreamTag : std::uint64_t { kPrototypes = 1, kSubjects = 2, kTextNoise = 3, kCellNoise = 4 };

inline Eigen::VectorXd gaussian(Rng &rng, int dim) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i)
    v[i] = rng.normal();
  return v;
}

inline Eigen::VectorXd unit(const Eigen::VectorXd &v) {
  const double n = v.norm();
  require(n > 0.0, "cannot normalize a zero vector");
  return v / n;
}

// Orthonormal basis of the column span, signs fixed so R has a positive diagonal.
inline Eigen::MatrixXd orthonormal_columns(const Eigen::MatrixXd &g) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
  const Eigen::MatrixXd r = qr.matrixQR().topRows(g.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < g.cols(); ++j)
    if (r(j, j) < 0.0)
      q.col(j) = -q.col(j);
  return q;
}

inline std::string padded(int value, int width) {
  std::string s = std::to_string(value);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

} // namespace detail

inline SynthData generate(const SynthConfig &cfg) {
  validate(cfg);
  const int d = cfg.dim, nc = cfg.n_classes;

  SynthData out;
  {
    Rng rng(derive_seed(cfg.seed, detail::kPrototypes));
    Eigen::MatrixXd g(d, nc);
    for (int c = 0; c < nc; ++c)
      g.col(c) = detail::gaussian(rng, d);
    out.prototypes = detail::orthonormal_columns(g);
  }
  const Eigen::VectorXd mean_proto = out.prototypes.rowwise().mean();

  out.texts.columns.resize(d, nc);
  for (int c = 0; c < nc; ++c) {
    Rng rng(derive_seed(cfg.seed, detail::kTextNoise, static_cast<std::uint64_t>(c)));
    const Eigen::VectorXd zeta = detail::unit(detail::gaussian(rng, d));
    out.texts.columns.col(c) = detail::unit((1.0 - cfg.text_tightness) * out.prototypes.col(c) +
                                            cfg.text_tightness * mean_proto + 0.05 * zeta);
  }

  const int sw = static_cast<int>(std::to_string(cfg.n_subjects - 1).size());
  const int cw = static_cast<int>(std::to_string(nc - 1).size());
  const int iw = static_cast<int>(std::to_string(cfg.samples_per_cell - 1).size());

  std::vector<EmbeddingRecord> records;
  records.reserve(static_cast<std::size_t>(cfg.n_subjects) * nc * cfg.samples_per_cell);
  for (int s = 0; s < cfg.n_subjects; ++s) {
    Rng subject_rng(derive_seed(cfg.seed, detail::kSubjects, static_cast<std::uint64_t>(s)));
    const Eigen::VectorXd appearance = detail::unit(detail::gaussian(subject_rng, d));
    const std::string subject = "S" + detail::padded(s, sw);
    for (int c = 0; c < nc; ++c) {
      Rng cell_rng(derive_seed(cfg.seed, detail::kCellNoise, static_cast<std::uint64_t>(s),
                               static_cast<std::uint64_t>(c)));
      for (int i = 0; i < cfg.samples_per_cell; ++i) {
        const Eigen::VectorXd eta = detail::gaussian(cell_rng, d);
        const Eigen::VectorXd v = detail::unit(cfg.class_strength * out.prototypes.col(c) +
                                               cfg.appearance_strength * appearance + cfg.noise_sigma * eta);
        EmbeddingRecord r;
        r.subject_id = subject;
        r.sample_id = subject + "_c" + detail::padded(c, cw) + "_" + detail::padded(i, iw);
        r.class_id = c;
        r.vector.resize(static_cast<std::size_t>(d));
        for (int k = 0; k < d; ++k)
          r.vector[static_cast<std::size_t>(k)] = static_cast<float>(v[k]);
        out.truths.push_back(c);
        records.push_back(std::move(r));
      }
    }
  }
  out.images = make_dataset(d, std::move(records), nc);
  return out;
}

// Text matrix as seen by the pipeline: the stored f32 values, widened.
inline TextMatrix stored_texts(const SynthData &data) {
  TextMatrix t;
  t.columns = data.texts.columns.cast<float>().cast<double>();
  return t;
}

inline std::vector<AblationCell> run_ablation(const SynthConfig &cfg, const RunToggles &base = {}, int k = 3) {
  const SynthData data = generate(cfg);
  return ablation_grid(data.images, stored_texts(data), base, k);
}

// 2-D principal-component export of image and text embeddings.

struct PcaBasis {
  Eigen::VectorXd center;
  // dim x 2, orthonormal, leading component first.
  Eigen::MatrixXd axes;

  Eigen::Vector2d project(const Eigen::VectorXd &v) const { return axes.transpose() * (v - center); }
  Eigen::VectorXd lift(const Eigen::Vector2d &p) const { return center + axes * p; }
};

// Rows of `points` are observations.
inline PcaBasis pca_basis(const Eigen::MatrixXd &points) {
  detail::require(points.rows() >= 1, "PCA needs at least one point");
  detail::require(points.cols() >= 2, "2-D export needs dim >= 2");
  PcaBasis basis;
  basis.center = points.colwise().mean().transpose();
  const Eigen::MatrixXd centered = points.rowwise() - basis.center.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(points.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::Index n = cov.rows();
  basis.axes.resize(n, 2);
  for (int j = 0; j < 2; ++j) {
    Eigen::VectorXd axis = eig.eigenvectors().col(n - 1 - j);
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis[arg] < 0.0)
      axis = -axis;
    basis.axes.col(j) = axis;
  }
  return basis;
}

struct ExportPoint {
  double x = 0.0;
  double y = 0.0;
  std::string kind; // "image" or "text"
  std::string subject_id;
  int class_id = 0;
};

template <ImageSet Images, TextColumns Texts>
std::vector<ExportPoint> export_2d(const Images &images, const Texts &texts) {
  detail::require(!images.records.empty(), "no image records to export");
  detail::require(images.dim >= 2, "2-D export needs dim >= 2");
  const Eigen::MatrixXd &t = texts.columns;
  detail::require(t.rows() == images.dim, "image and text dims differ");

  Eigen::MatrixXd points(static_cast<Eigen::Index>(images.records.size()), images.dim);
  for (std::size_t i = 0; i < images.records.size(); ++i)
    for (int k = 0; k < images.dim; ++k)
      points(static_cast<Eigen::Index>(i), k) = static_cast<double>(images.records[i].vector[static_cast<std::size_t>(k)]);
  const PcaBasis basis = pca_basis(points);

  std::vector<ExportPoint> out;
  out.reserve(images.records.size() + static_cast<std::size_t>(t.cols()));
  for (std::size_t i = 0; i < images.records.size(); ++i) {
    const Eigen::Vector2d p = basis.project(points.row(static_cast<Eigen::Index>(i)).transpose());
    out.push_back({p.x(), p.y(), "image", images.records[i].subject_id, images.records[i].class_id});
  }
  for (Eigen::Index c = 0; c < t.cols(); ++c) {
    const Eigen::Vector2d p = basis.project(t.col(c));
    out.push_back({p.x(), p.y(), "text", "", static_cast<int>(c)});
  }
  return out;
}

inline std::string export_csv(const std::vector<ExportPoint> &points) {
  std::string out = "x,y,kind,subject_id,class_id\n";
  for (const auto &p : points)
    out += detail::format_number(p.x) + "," + detail::format_number(p.y) + "," + p.kind + "," + p.subject_id + "," +
           std::to_string(p.class_id) + "\n";
  return out;
}

} // namespace zsdd
