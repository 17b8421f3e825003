#pragma once

// Linear discriminant analysis: class statistics, the two scatter matrices,
// the feature-space transform (eigenvectors of S_W^-1 S_B) and the closed
// form discriminant classifier delta = W x + b.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ldanet/linalg.hpp"

namespace ldanet {

/// How the per-class covariance used by the discriminant functions is built.
///   per_class: Sigma_c = (N_c - 1)/(n - |C|) * sum_{x in c} (x - mu_c)(x - mu_c)^T
///   shared:    Sigma   = 1/(n - |C|) * sum_c sum_{x in c} (x - mu_c)(x - mu_c)^T
enum class CovarianceMode { per_class, shared };

inline const char* to_string(CovarianceMode mode) {
  return mode == CovarianceMode::per_class ? "per_class" : "shared";
}

inline CovarianceMode covariance_mode_from_string(const std::string& s) {
  if (s == "per_class") return CovarianceMode::per_class;
  if (s == "shared") return CovarianceMode::shared;
  throw InvalidInputError("unknown covariance mode '" + s + "'");
}

/// Observations (one per row) with a class index each.
template <typename Scalar = double>
class LabeledPatchSet {
 public:
  LabeledPatchSet(Matrix<Scalar> features, std::vector<int> labels, int class_count)
      : features_(std::move(features)), labels_(std::move(labels)), class_count_(class_count) {
    if (class_count_ < 1) throw InvalidInputError("LabeledPatchSet: class_count must be >= 1");
    if (features_.rows() != static_cast<Eigen::Index>(labels_.size())) {
      throw ShapeError("LabeledPatchSet: feature rows and label count differ");
    }
    if (features_.cols() < 1) throw InvalidInputError("LabeledPatchSet: dimension must be >= 1");
    if (!features_.allFinite()) throw InvalidInputError("LabeledPatchSet: non-finite feature");
    std::vector<std::size_t> counts(static_cast<std::size_t>(class_count_), 0);
    for (int label : labels_) {
      if (label < 0 || label >= class_count_) {
        throw InvalidInputError("LabeledPatchSet: label " + std::to_string(label) +
                                " outside [0, " + std::to_string(class_count_) + ")");
      }
      ++counts[static_cast<std::size_t>(label)];
    }
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (counts[c] == 0) {
        throw InvalidInputError("LabeledPatchSet: class " + std::to_string(c) + " has no samples");
      }
    }
  }

  Eigen::Index dim() const { return features_.cols(); }
  Eigen::Index size() const { return features_.rows(); }
  int class_count() const { return class_count_; }
  const Matrix<Scalar>& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }

 private:
  Matrix<Scalar> features_;
  std::vector<int> labels_;
  int class_count_;
};

template <typename Scalar = double>
struct ClassStats {
  Matrix<Scalar> class_means;  // row c = mu_c
  Vector<Scalar> overall_mean;
  std::vector<std::size_t> counts;
  Scalar mean_class_size = 0;
  Vector<Scalar> priors;

  std::size_t total() const {
    std::size_t n = 0;
    for (auto c : counts) n += c;
    return n;
  }
  int class_count() const { return static_cast<int>(counts.size()); }
};

template <typename Scalar = double>
struct LdaModel {
  Matrix<Scalar> transform;  // rows = generalized eigenvectors, descending eigenvalue
  Vector<Scalar> eigenvalues;
  Matrix<Scalar> classifier_weights;  // |C| x d, row c = Sigma_c^-1 mu_c
  Vector<Scalar> classifier_bias;     // b_c = -1/2 mu_c^T Sigma_c^-1 mu_c + log pi_c
  ClassStats<Scalar> stats;
  CovarianceMode covariance = CovarianceMode::per_class;
  std::vector<std::string> warnings;

  Eigen::Index dim() const { return transform.cols(); }
  int class_count() const { return stats.class_count(); }
};

struct FitOptions {
  double ridge = kDefaultRidge;
  CovarianceMode covariance = CovarianceMode::per_class;
};

template <typename Scalar>
ClassStats<Scalar> class_stats(const LabeledPatchSet<Scalar>& data) {
  const auto d = data.dim();
  const int classes = data.class_count();
  ClassStats<Scalar> s;
  s.class_means = Matrix<Scalar>::Zero(classes, d);
  s.overall_mean = Vector<Scalar>::Zero(d);
  s.counts.assign(static_cast<std::size_t>(classes), 0);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const int c = data.labels()[static_cast<std::size_t>(i)];
    s.class_means.row(c) += data.features().row(i);
    s.overall_mean += data.features().row(i).transpose();
    ++s.counts[static_cast<std::size_t>(c)];
  }
  const auto n = static_cast<Scalar>(data.size());
  for (int c = 0; c < classes; ++c) {
    s.class_means.row(c) /= static_cast<Scalar>(s.counts[static_cast<std::size_t>(c)]);
  }
  s.overall_mean /= n;
  s.mean_class_size = n / static_cast<Scalar>(classes);
  s.priors.resize(classes);
  for (int c = 0; c < classes; ++c) {
    s.priors(c) = static_cast<Scalar>(s.counts[static_cast<std::size_t>(c)]) / n;
  }
  return s;
}

/// Sum over x in class c of (x - mu_c)(x - mu_c)^T, one matrix per class.
template <typename Scalar>
std::vector<Matrix<Scalar>> class_scatters(const LabeledPatchSet<Scalar>& data,
                                           const ClassStats<Scalar>& stats) {
  const auto d = data.dim();
  std::vector<Matrix<Scalar>> out(static_cast<std::size_t>(data.class_count()),
                                  Matrix<Scalar>::Zero(d, d));
  for (int c = 0; c < data.class_count(); ++c) {
    const auto n_c = static_cast<Eigen::Index>(stats.counts[static_cast<std::size_t>(c)]);
    Matrix<Scalar> centered(n_c, d);
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      if (data.labels()[static_cast<std::size_t>(i)] != c) continue;
      centered.row(row++) = data.features().row(i) - stats.class_means.row(c);
    }
    out[static_cast<std::size_t>(c)] = centered.transpose() * centered;
  }
  return out;
}

namespace detail {

template <typename Scalar>
void check_stats(const LabeledPatchSet<Scalar>& data, const ClassStats<Scalar>& stats) {
  if (stats.class_count() != data.class_count() || stats.class_means.cols() != data.dim()) {
    throw ShapeError("class statistics do not match the data set");
  }
}

template <typename Scalar>
Matrix<Scalar> weighted_within(const std::vector<Matrix<Scalar>>& scatters,
                               const ClassStats<Scalar>& stats) {
  const auto d = stats.class_means.cols();
  Matrix<Scalar> s_w = Matrix<Scalar>::Zero(d, d);
  for (std::size_t c = 0; c < scatters.size(); ++c) {
    s_w += scatters[c] / static_cast<Scalar>(stats.counts[c]);
  }
  s_w *= stats.mean_class_size;
  return s_w;
}

template <typename Scalar>
Matrix<Scalar> weighted_between(const ClassStats<Scalar>& stats) {
  const auto d = stats.class_means.cols();
  Matrix<Scalar> s_b = Matrix<Scalar>::Zero(d, d);
  for (int c = 0; c < stats.class_count(); ++c) {
    const Vector<Scalar> delta = stats.class_means.row(c).transpose() - stats.overall_mean;
    s_b += (delta * delta.transpose()) / static_cast<Scalar>(stats.counts[static_cast<std::size_t>(c)]);
  }
  s_b *= stats.mean_class_size;
  return s_b;
}

}  // namespace detail

/// S_W = Nbar * sum_c 1/N_c * sum_{x in c} (x - mu_c)(x - mu_c)^T
template <typename Scalar>
Matrix<Scalar> scatter_within(const LabeledPatchSet<Scalar>& data,
                              const ClassStats<Scalar>& stats) {
  detail::check_stats(data, stats);
  return detail::weighted_within(class_scatters(data, stats), stats);
}

/// S_B = Nbar * sum_c 1/N_c * (mu_c - mu)(mu_c - mu)^T
template <typename Scalar>
Matrix<Scalar> scatter_between(const LabeledPatchSet<Scalar>& data,
                               const ClassStats<Scalar>& stats) {
  detail::check_stats(data, stats);
  return detail::weighted_between(stats);
}

/// Streaming version of the class statistics and per-class scatters.  Samples
/// arrive as columns of a d x m block; sums are kept relative to the first
/// sample seen in each class to limit cancellation.  Results depend only on
/// the order in which samples are added.
template <typename Scalar = double>
class ScatterAccumulator {
 public:
  ScatterAccumulator(Eigen::Index dim, int class_count) : dim_(dim) {
    if (dim < 1 || class_count < 1) {
      throw InvalidInputError("ScatterAccumulator: dim and class_count must be >= 1");
    }
    classes_.resize(static_cast<std::size_t>(class_count));
    for (auto& c : classes_) {
      c.shift = Vector<Scalar>::Zero(dim);
      c.sum = Vector<Scalar>::Zero(dim);
      c.gram = Matrix<Scalar>::Zero(dim, dim);
    }
  }

  Eigen::Index dim() const { return dim_; }
  int class_count() const { return static_cast<int>(classes_.size()); }

  void add(const Eigen::Ref<const Matrix<Scalar>>& samples, std::span<const int> labels) {
    if (samples.rows() != dim_) throw ShapeError("ScatterAccumulator: sample dimension mismatch");
    if (samples.cols() != static_cast<Eigen::Index>(labels.size())) {
      throw ShapeError("ScatterAccumulator: sample and label counts differ");
    }
    if (!samples.allFinite()) throw InvalidInputError("ScatterAccumulator: non-finite sample");
    std::vector<std::vector<Eigen::Index>> members(classes_.size());
    for (std::size_t j = 0; j < labels.size(); ++j) {
      const int label = labels[j];
      if (label < 0 || label >= class_count()) {
        throw InvalidInputError("ScatterAccumulator: label " + std::to_string(label) +
                                " out of range");
      }
      members[static_cast<std::size_t>(label)].push_back(static_cast<Eigen::Index>(j));
    }
    for (std::size_t c = 0; c < classes_.size(); ++c) {
      if (members[c].empty()) continue;
      auto& acc = classes_[c];
      if (acc.count == 0) acc.shift = samples.col(members[c].front());
      Matrix<Scalar> block(dim_, static_cast<Eigen::Index>(members[c].size()));
      for (std::size_t k = 0; k < members[c].size(); ++k) {
        block.col(static_cast<Eigen::Index>(k)) = samples.col(members[c][k]) - acc.shift;
      }
      acc.sum += block.rowwise().sum();
      acc.gram.template selfadjointView<Eigen::Lower>().rankUpdate(block);
      acc.count += members[c].size();
    }
  }

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& c : classes_) n += c.count;
    return n;
  }

  ClassStats<Scalar> stats() const {
    for (std::size_t c = 0; c < classes_.size(); ++c) {
      if (classes_[c].count == 0) {
        throw InvalidInputError("class " + std::to_string(c) + " has no samples");
      }
    }
    const int classes = class_count();
    ClassStats<Scalar> s;
    s.class_means.resize(classes, dim_);
    s.overall_mean = Vector<Scalar>::Zero(dim_);
    s.counts.resize(classes_.size());
    for (int c = 0; c < classes; ++c) {
      const auto& acc = classes_[static_cast<std::size_t>(c)];
      const Vector<Scalar> mean = acc.shift + acc.sum / static_cast<Scalar>(acc.count);
      s.class_means.row(c) = mean.transpose();
      s.overall_mean += mean * static_cast<Scalar>(acc.count);
      s.counts[static_cast<std::size_t>(c)] = acc.count;
    }
    const auto n = static_cast<Scalar>(total());
    s.overall_mean /= n;
    s.mean_class_size = n / static_cast<Scalar>(classes);
    s.priors.resize(classes);
    for (int c = 0; c < classes; ++c) {
      s.priors(c) = static_cast<Scalar>(s.counts[static_cast<std::size_t>(c)]) / n;
    }
    return s;
  }

  std::vector<Matrix<Scalar>> class_scatters() const {
    std::vector<Matrix<Scalar>> out;
    out.reserve(classes_.size());
    for (const auto& acc : classes_) {
      Matrix<Scalar> g = acc.gram.template selfadjointView<Eigen::Lower>();
      if (acc.count > 0) {
        g -= (acc.sum * acc.sum.transpose()) / static_cast<Scalar>(acc.count);
      }
      g = (g + g.transpose()).eval() * Scalar(0.5);
      out.push_back(std::move(g));
    }
    return out;
  }

 private:
  struct PerClass {
    std::size_t count = 0;
    Vector<Scalar> shift;
    Vector<Scalar> sum;   // sum of (x - shift)
    Matrix<Scalar> gram;  // lower triangle of sum of (x - shift)(x - shift)^T
  };

  Eigen::Index dim_;
  std::vector<PerClass> classes_;
};

namespace detail {

template <typename Scalar>
LdaModel<Scalar> fit_from_scatters(ClassStats<Scalar> stats,
                                   const std::vector<Matrix<Scalar>>& scatters,
                                   const FitOptions& options) {
  const auto n = stats.total();
  const auto classes = static_cast<std::size_t>(stats.class_count());
  if (n <= classes) {
    throw InvalidInputError("fit: need more observations (" + std::to_string(n) +
                            ") than classes (" + std::to_string(classes) + ")");
  }
  LdaModel<Scalar> model;
  model.covariance = options.covariance;
  for (std::size_t c = 0; c < classes; ++c) {
    if (stats.counts[c] < 2) {
      model.warnings.push_back("class " + std::to_string(c) +
                               " has a single sample and contributes no covariance");
    }
  }

  const Matrix<Scalar> s_w = weighted_within(scatters, stats);
  const Matrix<Scalar> s_b = weighted_between(stats);
  auto eig = generalized_eig(s_b, s_w, options.ridge);
  model.transform = std::move(eig.eigenvectors);
  model.eigenvalues = std::move(eig.eigenvalues);

  const auto d = stats.class_means.cols();
  const auto denom = static_cast<Scalar>(n - classes);
  model.classifier_weights.resize(static_cast<Eigen::Index>(classes), d);
  model.classifier_bias.resize(static_cast<Eigen::Index>(classes));

  Matrix<Scalar> shared_inverse;
  if (options.covariance == CovarianceMode::shared) {
    Matrix<Scalar> pooled = Matrix<Scalar>::Zero(d, d);
    for (const auto& s : scatters) pooled += s;
    pooled /= denom;
    shared_inverse = invert_spd(pooled, options.ridge);
  }
  for (std::size_t c = 0; c < classes; ++c) {
    Matrix<Scalar> inverse;
    if (options.covariance == CovarianceMode::shared) {
      inverse = shared_inverse;
    } else {
      const Scalar scale = static_cast<Scalar>(stats.counts[c] - 1) / denom;
      inverse = invert_spd((scatters[c] * scale).eval(), options.ridge);
    }
    const Vector<Scalar> mu = stats.class_means.row(static_cast<Eigen::Index>(c)).transpose();
    const Vector<Scalar> w = inverse * mu;
    const auto row = static_cast<Eigen::Index>(c);
    model.classifier_weights.row(row) = w.transpose();
    model.classifier_bias(row) = Scalar(-0.5) * mu.dot(w) + std::log(stats.priors(row));
  }
  model.stats = std::move(stats);
  return model;
}

}  // namespace detail

/// Fits transform and discriminant classifier in one go.
template <typename Scalar>
LdaModel<Scalar> fit(const LabeledPatchSet<Scalar>& data, const FitOptions& options = {}) {
  auto stats = class_stats(data);
  const auto scatters = class_scatters(data, stats);
  return detail::fit_from_scatters(std::move(stats), scatters, options);
}

template <typename Scalar>
LdaModel<Scalar> fit(const ScatterAccumulator<Scalar>& acc, const FitOptions& options = {}) {
  return detail::fit_from_scatters(acc.stats(), acc.class_scatters(), options);
}

/// y = W_lda x, no activation.
template <typename Scalar, typename Derived>
Vector<Scalar> transform(const LdaModel<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != model.dim()) throw ShapeError("transform: input length mismatch");
  return model.transform * x;
}

/// delta = W x + b, one score per class.
template <typename Scalar, typename Derived>
Vector<Scalar> discriminants(const LdaModel<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != model.classifier_weights.cols()) {
    throw ShapeError("discriminants: input length mismatch");
  }
  return model.classifier_weights * x + model.classifier_bias;
}

/// Index of the largest entry; the smallest index wins ties.
template <typename Derived>
int argmax(const Eigen::MatrixBase<Derived>& scores) {
  int best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i) {
    if (scores(i) > scores(best)) best = static_cast<int>(i);
  }
  return best;
}

template <typename Scalar, typename Derived>
int classify(const LdaModel<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  return argmax(discriminants(model, x));
}

}  // namespace ldanet
