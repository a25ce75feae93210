#pragma once

// Decoupling transforms applied before zero-shot classification.
//
// Appearance decoupling subtracts each subject's mean image embedding from
// that subject's embeddings. Text orthogonalization replaces the class text
// matrix T by its nearest matrix with orthonormal columns, U V^T from the thin
// SVD T = U S V^T (the orthogonal Procrustes / Stiefel projection).

#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "zsdd/embedding_store.hpp"
#include "zsdd/error.hpp"

namespace zsdd {

// Below this norm a decoupled vector counts as zero.
inline constexpr double kZeroNorm = 1e-9;
// Smallest admissible sigma_min / sigma_max for text orthogonalization.
inline constexpr double kRankTolerance = 1e-8;

struct DadOptions {
  // Unit-normalize raw embeddings before computing means.
  bool pre_normalize = false;
  // Means are estimated from the first ceil(fraction * N_s) records of each
  // subject (dataset order). 1.0 uses every record.
  double calibration_fraction = 1.0;
};

struct SubjectMean {
  Eigen::VectorXd mean;
  // N_s: records of this subject in the dataset.
  int count = 0;
  // Records that entered the mean (< count only with a calibration prefix).
  int used = 0;
};

struct SubjectMeans {
  int dim = 0;
  std::map<std::string, SubjectMean> by_subject;

  const SubjectMean &at(const std::string &subject) const {
    auto it = by_subject.find(subject);
    if (it == by_subject.end())
      detail::fail("no mean for subject '" + subject + "'");
    return it->second;
  }
};

struct DecoupledRecord {
  std::string subject_id;
  std::string sample_id;
  int class_id = 0;
  std::vector<double> vector;
  // The centered vector was numerically zero, so the input vector was kept.
  bool fallback_used = false;
};

struct DecoupledDataset {
  int dim = 0;
  int class_count = 0;
  std::vector<DecoupledRecord> records;

  std::size_t size() const { return records.size(); }
  std::size_t fallback_count() const {
    std::size_t n = 0;
    for (const auto &r : records)
      n += r.fallback_used ? 1 : 0;
    return n;
  }
};

namespace detail {

inline Eigen::VectorXd to_vector(const std::vector<float> &v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = static_cast<double>(v[i]);
  return out;
}

inline Eigen::VectorXd prepared(const EmbeddingRecord &r, const DadOptions &opts) {
  Eigen::VectorXd v = to_vector(r.vector);
  if (opts.pre_normalize) {
    const double n = v.norm();
    require(n >= kZeroNorm, "cannot pre-normalize zero vector of (" + r.subject_id + ", " + r.sample_id + ")");
    v /= n;
  }
  return v;
}

inline void check_options(const DadOptions &opts) {
  require(opts.calibration_fraction > 0.0 && opts.calibration_fraction <= 1.0,
          "calibration_fraction must be in (0, 1]");
}

} // namespace detail

inline SubjectMeans compute_subject_means(const Dataset &ds, const DadOptions &opts = {}) {
  detail::require(!ds.records.empty(), "cannot compute subject means of an empty dataset");
  detail::check_options(opts);

  SubjectMeans out;
  out.dim = ds.dim;
  for (const auto &r : ds.records)
    ++out.by_subject[r.subject_id].count;

  std::map<std::string, int> quota;
  for (auto &[subject, m] : out.by_subject) {
    m.mean = Eigen::VectorXd::Zero(ds.dim);
    const auto prefix = static_cast<int>(std::ceil(opts.calibration_fraction * m.count - 1e-12));
    quota[subject] = std::max(1, std::min(m.count, prefix));
  }
  for (const auto &r : ds.records) {
    auto &m = out.by_subject[r.subject_id];
    if (m.used < quota[r.subject_id]) {
      m.mean += detail::prepared(r, opts);
      ++m.used;
    }
  }
  for (auto &[subject, m] : out.by_subject)
    m.mean /= static_cast<double>(m.used);
  return out;
}

inline DecoupledDataset apply_dad(const Dataset &ds, const SubjectMeans &means, const DadOptions &opts = {}) {
  detail::require(means.dim == ds.dim, "subject means dim does not match dataset dim");
  DecoupledDataset out;
  out.dim = ds.dim;
  out.class_count = ds.class_count;
  out.records.reserve(ds.size());
  for (const auto &r : ds.records) {
    const Eigen::VectorXd e = detail::prepared(r, opts);
    Eigen::VectorXd centered = e - means.at(r.subject_id).mean;
    DecoupledRecord d{r.subject_id, r.sample_id, r.class_id, {}, false};
    if (centered.norm() < kZeroNorm) {
      centered = e;
      d.fallback_used = true;
    }
    d.vector.assign(centered.data(), centered.data() + centered.size());
    out.records.push_back(std::move(d));
  }
  return out;
}

inline DecoupledDataset apply_dad(const Dataset &ds, const DadOptions &opts = {}) {
  return apply_dad(ds, compute_subject_means(ds, opts), opts);
}

struct OrthoTextMatrix {
  Eigen::MatrixXd columns;
  // Squared Frobenius distance to the input matrix.
  double residual = 0.0;
  // Singular values of the input, nonincreasing.
  Eigen::VectorXd singular_values;

  int dim() const { return static_cast<int>(columns.rows()); }
  int class_count() const { return static_cast<int>(columns.cols()); }
};

// Nearest matrix with orthonormal columns to `texts` in Frobenius norm.
inline OrthoTextMatrix teo_project(const TextMatrix &texts) {
  const Eigen::MatrixXd &t = texts.columns;
  detail::require(t.cols() >= 1, "text matrix has no columns");
  if (t.rows() < t.cols())
    detail::fail("text orthogonalization needs dim >= class count, got dim " + std::to_string(t.rows()) +
                 " < " + std::to_string(t.cols()) + " classes");
  detail::require(t.allFinite(), "text matrix has non-finite entries");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(t, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd &sigma = svd.singularValues();
  const double ratio = sigma[0] > 0.0 ? sigma[sigma.size() - 1] / sigma[0] : 0.0;
  if (!(ratio > kRankTolerance)) {
    std::ostringstream msg;
    msg << "text matrix is rank deficient: sigma_min/sigma_max = " << ratio << " <= " << kRankTolerance
        << ", nearest orthonormal frame is not unique";
    detail::fail(msg.str());
  }

  OrthoTextMatrix out;
  out.columns = svd.matrixU() * svd.matrixV().transpose();
  out.residual = (out.columns - t).squaredNorm();
  out.singular_values = sigma;
  return out;
}

inline TextMatrix as_text_matrix(const OrthoTextMatrix &m) { return {m.columns}; }

// Maps a rendered prompt to its text embedding.
using TextEncoder = std::function<Eigen::VectorXd(const std::string &prompt)>;

// Encoder backed by a stored text-embedding file: looks a prompt up by the
// sample_id it was saved under.
class StoredTextEncoder {
public:
  explicit StoredTextEncoder(const Dataset &texts) : dim_(texts.dim) {
    for (const auto &r : texts.records) {
      auto v = detail::to_vector(r.vector);
      auto [it, inserted] = by_prompt_.emplace(r.sample_id, v);
      detail::require(inserted || it->second == v, "conflicting text embeddings for prompt '" + r.sample_id + "'");
    }
  }

  Eigen::VectorXd operator()(const std::string &prompt) const {
    auto it = by_prompt_.find(prompt);
    if (it == by_prompt_.end())
      detail::fail("no stored text embedding for prompt '" + prompt + "'");
    return it->second;
  }

  int dim() const { return dim_; }

private:
  int dim_;
  std::unordered_map<std::string, Eigen::VectorXd> by_prompt_;
};

// Column c is the embedding of the prompt rendered for class c.
inline TextMatrix embed_prompts(const PromptSet &prompts, const TextEncoder &encoder) {
  TextMatrix out;
  for (int c = 0; c < prompts.class_count(); ++c) {
    Eigen::VectorXd v = encoder(prompts.render(c));
    if (c == 0)
      out.columns.resize(v.size(), prompts.class_count());
    detail::require(v.size() == out.columns.rows() && v.size() > 0,
                    "text encoder returned dim " + std::to_string(v.size()) + " for class " + std::to_string(c) +
                        ", expected " + std::to_string(out.columns.rows()));
    out.columns.col(c) = v;
  }
  return out;
}

// Text matrix read directly by class_id, for text files without prompts.
inline TextMatrix text_matrix_by_class(const Dataset &texts) {
  TextMatrix out;
  out.columns.setZero(texts.dim, texts.class_count);
  std::vector<bool> seen(static_cast<std::size_t>(texts.class_count), false);
  for (const auto &r : texts.records) {
    auto c = static_cast<std::size_t>(r.class_id);
    detail::require(!seen[c], "duplicate text embedding for class " + std::to_string(r.class_id));
    seen[c] = true;
    out.columns.col(r.class_id) = detail::to_vector(r.vector);
  }
  for (std::size_t c = 0; c < seen.size(); ++c)
    detail::require(seen[c], "missing text embedding for class " + std::to_string(c));
  return out;
}

} // namespace zsdd
