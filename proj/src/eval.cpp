#include "ldanet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ldanet/errors.hpp"

namespace ldanet {

ConfusionMatrix::ConfusionMatrix(int class_count)
    : classes_(class_count),
      counts_(static_cast<std::size_t>(class_count) * static_cast<std::size_t>(class_count), 0) {
  if (class_count < 1) throw InvalidInputError("ConfusionMatrix: class_count must be >= 1");
}

void ConfusionMatrix::add(int truth, int predicted, std::uint64_t n) {
  if (truth < 0 || truth >= classes_ || predicted < 0 || predicted >= classes_) {
    throw InvalidInputError("ConfusionMatrix: class index out of range");
  }
  counts_[static_cast<std::size_t>(truth * classes_ + predicted)] += n;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (auto c : counts_) n += c;
  return n;
}

std::uint64_t ConfusionMatrix::correct() const {
  std::uint64_t n = 0;
  for (int c = 0; c < classes_; ++c) n += at(c, c);
  return n;
}

std::uint64_t ConfusionMatrix::truth_count(int c) const {
  std::uint64_t n = 0;
  for (int p = 0; p < classes_; ++p) n += at(c, p);
  return n;
}

std::uint64_t ConfusionMatrix::predicted_count(int c) const {
  std::uint64_t n = 0;
  for (int t = 0; t < classes_; ++t) n += at(t, c);
  return n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw ShapeError("ConfusionMatrix: class counts differ");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

Metrics metrics_from_confusion(const ConfusionMatrix& confusion) {
  Metrics m;
  m.confusion = confusion;
  const auto total = confusion.total();
  if (total == 0) throw InvalidInputError("metrics: empty confusion matrix");
  m.accuracy = static_cast<double>(confusion.correct()) / static_cast<double>(total);
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < confusion.class_count(); ++c) {
    const auto tp = confusion.at(c, c);
    const auto in_truth = confusion.truth_count(c);
    if (in_truth == 0) {
      m.per_class_iu.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const auto uni = in_truth + confusion.predicted_count(c) - tp;
    const double iu = static_cast<double>(tp) / static_cast<double>(uni);
    m.per_class_iu.push_back(iu);
    sum += iu;
    ++present;
  }
  m.mean_iu = sum / present;
  return m;
}

nlohmann::json Metrics::to_json() const {
  auto per_class = nlohmann::json::array();
  for (double v : per_class_iu) {
    if (std::isnan(v)) {
      per_class.push_back(nullptr);
    } else {
      per_class.push_back(v);
    }
  }
  auto rows = nlohmann::json::array();
  for (int t = 0; t < confusion.class_count(); ++t) {
    auto row = nlohmann::json::array();
    for (int p = 0; p < confusion.class_count(); ++p) row.push_back(confusion.at(t, p));
    rows.push_back(row);
  }
  return {{"mean_iu", mean_iu}, {"accuracy", accuracy}, {"per_class_iu", per_class}, {"confusion", rows}};
}

namespace {

constexpr std::size_t kEvalBatch = 512;

struct GridRange {
  int x0, x1, y0, y1;  // inclusive center coordinates
};

GridRange center_range(const Network& net, const RgbImage& image) {
  const int patch = net.receptive_field();
  const int half = patch / 2;
  return {half, image.width - (patch - half), half, image.height - (patch - half)};
}

// Calls sink(x, y, predicted) for every stride grid center of the page.
template <typename Sink>
void classify_grid(const Network& net, const Page& page, int stride, Sink&& sink) {
  const int patch = net.receptive_field();
  if (net.receptive_field_w() != patch) throw ShapeError("evaluate: non-square receptive field");
  if (net.input_channels() != 3) throw ShapeError("evaluate: network must take RGB input");
  const GridRange g = center_range(net, page.image);
  if (g.x1 < g.x0 || g.y1 < g.y0) return;
  const auto area = static_cast<Eigen::Index>(patch) * patch;

  std::vector<std::pair<int, int>> centers;
  PatchBatch batch;
  batch.height = batch.width = patch;
  batch.channels = 3;
  auto flush = [&] {
    if (centers.empty()) return;
    batch.labels.assign(centers.size(), 0);
    batch.values.conservativeResize(3, area * static_cast<Eigen::Index>(centers.size()));
    const auto pred = predict(net, batch);
    for (std::size_t i = 0; i < centers.size(); ++i) sink(centers[i].first, centers[i].second, pred[i]);
    centers.clear();
  };
  batch.values.resize(3, area * static_cast<Eigen::Index>(kEvalBatch));
  for (int y = g.y0; y <= g.y1; y += stride) {
    for (int x = g.x0; x <= g.x1; x += stride) {
      extract_patch(page.image, x, y, patch, batch.values,
                    static_cast<Eigen::Index>(centers.size()) * area);
      centers.emplace_back(x, y);
      if (centers.size() == kEvalBatch) {
        flush();
        batch.values.resize(3, area * static_cast<Eigen::Index>(kEvalBatch));
      }
    }
  }
  flush();
}

}  // namespace

ConfusionMatrix evaluate_confusion(const Network& net, const PageSet& pages, int stride) {
  if (stride < 1) throw InvalidInputError("evaluate: stride must be >= 1");
  if (net.class_count() != pages.class_count) {
    throw ShapeError("evaluate: network and pages disagree on the class count");
  }
  ConfusionMatrix cm(pages.class_count);
  for (const Page& page : pages.pages) {
    classify_grid(net, page, stride, [&](int x, int y, int pred) { cm.add(page.truth.at(x, y), pred); });
  }
  if (cm.total() == 0) throw InvalidInputError("evaluate: no pixel of the pages can be evaluated");
  return cm;
}

Metrics evaluate(const Network& net, const PageSet& pages, int stride) {
  return metrics_from_confusion(evaluate_confusion(net, pages, stride));
}

LabelMap predict_page(const Network& net, const Page& page, int stride) {
  if (stride < 1) throw InvalidInputError("predict_page: stride must be >= 1");
  LabelMap grid_pred(page.truth.width, page.truth.height, page.truth.class_count);
  grid_pred.palette = page.truth.palette;
  const GridRange g = center_range(net, page.image);
  if (g.x1 < g.x0 || g.y1 < g.y0) throw InvalidInputError("predict_page: page smaller than patch");
  classify_grid(net, page, stride, [&](int x, int y, int pred) { grid_pred.set(x, y, pred); });

  // Spread grid values to all pixels (nearest evaluated center, clamped).
  const int gx_last = (g.x1 - g.x0) / stride;
  const int gy_last = (g.y1 - g.y0) / stride;
  auto nearest = [stride](int v, int lo, int last) {
    const int k = static_cast<int>(std::lround(static_cast<double>(v - lo) / stride));
    return lo + std::clamp(k, 0, last) * stride;
  };
  LabelMap out = grid_pred;
  for (int y = 0; y < out.height; ++y) {
    const int sy = nearest(y, g.y0, gy_last);
    for (int x = 0; x < out.width; ++x) out.set(x, y, grid_pred.at(nearest(x, g.x0, gx_last), sy));
  }
  return out;
}

RgbImage render_overlay(const LabelMap& truth, const LabelMap& predicted, int background_class) {
  if (truth.width != predicted.width || truth.height != predicted.height) {
    throw ShapeError("render_overlay: label maps differ in size");
  }
  RgbImage out(truth.width, truth.height);
  for (int y = 0; y < truth.height; ++y) {
    for (int x = 0; x < truth.width; ++x) {
      const int t = truth.at(x, y);
      const int p = predicted.at(x, y);
      const bool t_bg = t == background_class;
      const bool p_bg = p == background_class;
      Rgb c;
      if (t == p) {
        c = t_bg ? overlay::kCorrectBackground : overlay::kCorrectForeground;
      } else if (p_bg) {
        c = overlay::kMissedForeground;
      } else if (t_bg) {
        c = overlay::kFalseForeground;
      } else {
        c = overlay::kWrongForeground;
      }
      out.set(x, y, c);
    }
  }
  return out;
}

std::vector<RgbImage> render_features(const Layer& layer, int channels) {
  if (channels != 3 || layer.input_channels != 3 ||
      layer.fan_in() != layer.spec.patch_h * layer.spec.patch_w * 3) {
    throw ShapeError("render_features: only RGB input layers can be rendered");
  }
  std::vector<RgbImage> tiles;
  for (Eigen::Index n = 0; n < layer.weights.rows(); ++n) {
    const auto row = layer.weights.row(n);
    const double maxabs = row.cwiseAbs().maxCoeff();
    RgbImage tile(layer.spec.patch_w, layer.spec.patch_h);
    for (int r = 0; r < layer.spec.patch_h; ++r) {
      for (int c = 0; c < layer.spec.patch_w; ++c) {
        for (int ch = 0; ch < 3; ++ch) {
          const double w = row((r * layer.spec.patch_w + c) * 3 + ch);
          const double t = maxabs > 0 ? w / maxabs : 0.0;
          tile.at(c, r, ch) = static_cast<std::uint8_t>(std::clamp(std::lround(127.5 + 127.5 * t), 0L, 255L));
        }
      }
    }
    tiles.push_back(std::move(tile));
  }
  return tiles;
}

RgbImage feature_sheet(const std::vector<RgbImage>& tiles, int scale) {
  if (tiles.empty()) return RgbImage(1, 1, {255, 255, 255});
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(tiles.size()))));
  const int rows = static_cast<int>((tiles.size() + static_cast<std::size_t>(cols) - 1) / static_cast<std::size_t>(cols));
  const int tw = tiles.front().width * scale;
  const int th = tiles.front().height * scale;
  RgbImage sheet(cols * (tw + 1) + 1, rows * (th + 1) + 1, {255, 255, 255});
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const int ox = 1 + static_cast<int>(i % static_cast<std::size_t>(cols)) * (tw + 1);
    const int oy = 1 + static_cast<int>(i / static_cast<std::size_t>(cols)) * (th + 1);
    for (int y = 0; y < th; ++y) {
      for (int x = 0; x < tw; ++x) sheet.set(ox + x, oy + y, tiles[i].pixel(x / scale, y / scale));
    }
  }
  return sheet;
}

double tile_stddev(const RgbImage& tile) {
  if (tile.pixels.empty()) return 0.0;
  double sum = 0.0, sq = 0.0;
  for (auto v : tile.pixels) {
    sum += v;
    sq += static_cast<double>(v) * v;
  }
  const double n = static_cast<double>(tile.pixels.size());
  const double mean = sum / n;
  return std::sqrt(std::max(0.0, sq / n - mean * mean));
}

}  // namespace ldanet
