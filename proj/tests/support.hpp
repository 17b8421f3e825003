#pragma once

// Shared fixtures and independent oracles for the test binaries.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "ldanet/data.hpp"
#include "ldanet/lda.hpp"
#include "ldanet/network.hpp"

namespace testing {

using ldanet::MatrixXd;
using ldanet::VectorXd;

inline MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

/// Gaussian blobs, one per class, with random means and anisotropic noise.
inline ldanet::LabeledPatchSet<double> gaussian_classes(std::mt19937_64& rng, int dim, int classes,
                                                        int per_class, double spread = 3.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  const MatrixXd mixing = random_matrix(rng, dim, dim);
  MatrixXd x(classes * per_class, dim);
  std::vector<int> labels;
  for (int c = 0; c < classes; ++c) {
    VectorXd mu(dim);
    for (auto& v : mu) v = spread * n(rng);
    for (int i = 0; i < per_class; ++i) {
      VectorXd z(dim);
      for (auto& v : z) v = n(rng);
      x.row(c * per_class + i) = (mu + mixing * z).transpose();
      labels.push_back(c);
    }
  }
  return {x, labels, classes};
}

/// Eq. 5 by explicit double loop over samples and coordinates.
inline MatrixXd naive_within(const ldanet::LabeledPatchSet<double>& data) {
  const int C = data.class_count();
  const Eigen::Index d = data.dim();
  const Eigen::Index n = data.size();
  std::vector<std::vector<double>> mu(C, std::vector<double>(d, 0.0));
  std::vector<double> count(C, 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = data.labels()[i];
    count[c] += 1;
    for (Eigen::Index k = 0; k < d; ++k) mu[c][k] += data.features()(i, k);
  }
  for (int c = 0; c < C; ++c)
    for (auto& v : mu[c]) v /= count[c];
  const double nbar = static_cast<double>(n) / C;
  MatrixXd s = MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = data.labels()[i];
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = 0; b < d; ++b)
        s(a, b) += nbar / count[c] * (data.features()(i, a) - mu[c][a]) * (data.features()(i, b) - mu[c][b]);
  }
  return s;
}

/// Eq. 6 by explicit loops.
inline MatrixXd naive_between(const ldanet::LabeledPatchSet<double>& data) {
  const int C = data.class_count();
  const Eigen::Index d = data.dim();
  const Eigen::Index n = data.size();
  std::vector<std::vector<double>> mu(C, std::vector<double>(d, 0.0));
  std::vector<double> all(d, 0.0);
  std::vector<double> count(C, 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = data.labels()[i];
    count[c] += 1;
    for (Eigen::Index k = 0; k < d; ++k) {
      mu[c][k] += data.features()(i, k);
      all[k] += data.features()(i, k);
    }
  }
  for (int c = 0; c < C; ++c)
    for (auto& v : mu[c]) v /= count[c];
  for (auto& v : all) v /= static_cast<double>(n);
  const double nbar = static_cast<double>(n) / C;
  MatrixXd s = MatrixXd::Zero(d, d);
  for (int c = 0; c < C; ++c)
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = 0; b < d; ++b) s(a, b) += nbar / count[c] * (mu[c][a] - all[a]) * (mu[c][b] - all[b]);
  return s;
}

inline double fisher_quotient(const MatrixXd& s_b, const MatrixXd& s_w, const VectorXd& v) {
  return v.dot(s_b * v) / v.dot(s_w * v);
}

/// Replays a fixed list of patches; `restart` picks a seeded permutation so
/// different seeds see different orders.
class FixedStream final : public ldanet::PatchStream {
 public:
  explicit FixedStream(ldanet::PatchBatch all) : all_(std::move(all)) { restart(0); }

  void restart(std::uint64_t seed) override {
    order_.resize(all_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order_.begin(), order_.end(), rng);
    cursor_ = 0;
  }

  ldanet::PatchBatch next(std::size_t count) override {
    ldanet::PatchBatch out;
    out.height = all_.height;
    out.width = all_.width;
    out.channels = all_.channels;
    const Eigen::Index px = all_.height * all_.width;
    out.values.resize(all_.channels, static_cast<Eigen::Index>(count) * px);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t src = order_[cursor_++ % order_.size()];
      out.values.middleCols(static_cast<Eigen::Index>(i) * px, px) =
          all_.values.middleCols(static_cast<Eigen::Index>(src) * px, px);
      out.labels.push_back(all_.labels[src]);
    }
    return out;
  }

 private:
  ldanet::PatchBatch all_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

inline ldanet::PatchBatch random_batch(std::mt19937_64& rng, int size, int channels, int count, int classes) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ldanet::PatchBatch b;
  b.height = b.width = size;
  b.channels = channels;
  b.values.resize(channels, static_cast<Eigen::Index>(count) * size * size);
  for (Eigen::Index j = 0; j < b.values.cols(); ++j)
    for (Eigen::Index i = 0; i < channels; ++i) b.values(i, j) = u(rng);
  for (int i = 0; i < count; ++i) b.labels.push_back(i % classes);
  return b;
}

/// Small synthetic dataset shared by the slower suites.
inline const ldanet::Dataset& small_dataset() {
  static const ldanet::Dataset ds = ldanet::generate_dataset(11, 4, 128, 160);
  return ds;
}

/// Pages whose pixel color spells out the class: channel c-1 is 255 exactly
/// where the label is c (c >= 1).
inline ldanet::PageSet oracle_pages(const std::vector<ldanet::LabelMap>& truths) {
  ldanet::PageSet set;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    ldanet::Page page;
    page.name = "oracle_" + std::to_string(i);
    page.truth = truths[i];
    page.image = ldanet::RgbImage(truths[i].width, truths[i].height);
    for (int y = 0; y < page.truth.height; ++y)
      for (int x = 0; x < page.truth.width; ++x) {
        const int c = page.truth.at(x, y);
        if (c > 0) page.image.at(x, y, c - 1) = 255;
      }
    set.pages.push_back(std::move(page));
  }
  return set;
}

/// Reads the center pixel of a 23x23 window and classifies oracle_pages
/// perfectly.
inline ldanet::Network oracle_network() {
  ldanet::Network net(3, 4, {{23, 23, 1, 1, 4}});
  auto& hidden = net.layer(0);
  hidden.weights.setZero();
  const Eigen::Index center = (11 * 23 + 11) * 3;
  for (int c = 1; c < 4; ++c) hidden.weights(c, center + c - 1) = 1.0;  // softsign(+-1) = +-0.5
  auto& head = net.head();
  head.weights.setZero();
  for (int c = 1; c < 4; ++c) head.weights(c, c) = 2.0;
  return net;
}

/// Label map of horizontal bands, one band per class.
inline ldanet::LabelMap banded_truth(int w, int h, int classes = 4) {
  ldanet::LabelMap m(w, h, classes);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(x, y, (y * classes) / h);
  return m;
}

}  // namespace testing
