#pragma once

// Pixel-level evaluation (confusion matrix, mean IU, accuracy) and the image
// emitters: classification overlays and first-layer feature tiles.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldanet/data.hpp"
#include "ldanet/network.hpp"

namespace ldanet {

/// Rows are ground truth, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int class_count = kDocumentClassCount);

  int class_count() const { return classes_; }
  void add(int truth, int predicted, std::uint64_t n = 1);
  std::uint64_t at(int truth, int predicted) const {
    return counts_[static_cast<std::size_t>(truth * classes_ + predicted)];
  }
  std::uint64_t total() const;
  std::uint64_t correct() const;
  std::uint64_t truth_count(int c) const;      // TP + FN
  std::uint64_t predicted_count(int c) const;  // TP + FP
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int classes_;
  std::vector<std::uint64_t> counts_;
};

struct Metrics {
  double mean_iu = 0.0;
  double accuracy = 0.0;
  std::vector<double> per_class_iu;  // NaN for classes absent from the truth
  ConfusionMatrix confusion;

  nlohmann::json to_json() const;
};

/// IU_c = TP/(TP+FP+FN); the mean runs over classes present in the truth.
Metrics metrics_from_confusion(const ConfusionMatrix& confusion);

/// Classifies the center pixel of every full window on a stride-spaced grid.
ConfusionMatrix evaluate_confusion(const Network& net, const PageSet& pages, int stride = 1);
Metrics evaluate(const Network& net, const PageSet& pages, int stride = 1);

/// Predictions on the stride grid, spread to every pixel from the nearest
/// evaluated center.
LabelMap predict_page(const Network& net, const Page& page, int stride = 1);

namespace overlay {
inline constexpr Rgb kCorrectForeground{0, 255, 0};
inline constexpr Rgb kCorrectBackground{0, 0, 0};
inline constexpr Rgb kMissedForeground{0, 0, 255};   // truth foreground, predicted background
inline constexpr Rgb kFalseForeground{255, 0, 0};    // truth background, predicted foreground
inline constexpr Rgb kWrongForeground{255, 255, 0};  // foreground predicted as another foreground
}  // namespace overlay

RgbImage render_overlay(const LabelMap& truth, const LabelMap& predicted, int background_class = 0);

/// One patch_h x patch_w RGB tile per neuron; each tile maps
/// [-maxabs, +maxabs] of its own weights onto [0, 255], so zero is gray 128.
std::vector<RgbImage> render_features(const Layer& layer, int channels = 3);

/// Tiles on a grid, each magnified by `scale`, separated by white lines.
RgbImage feature_sheet(const std::vector<RgbImage>& tiles, int scale = 8);

/// Standard deviation of the tile's channel values (colorfulness proxy).
double tile_stddev(const RgbImage& tile);

}  // namespace ldanet
