#pragma once

// Pages, label maps, dataset manifests, patch sampling and the synthetic
// four-class document generator.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ldanet/image.hpp"
#include "ldanet/network.hpp"

namespace ldanet {

/// Class indices of the document task.
enum DocumentClass : int { kBackground = 0, kComment = 1, kDecoration = 2, kText = 3 };
inline constexpr int kDocumentClassCount = 4;

std::vector<std::string> document_class_names();
std::vector<Rgb> document_palette();

struct LabelMap {
  int width = 0;
  int height = 0;
  int class_count = 0;
  std::vector<std::uint8_t> labels;  // row-major class indices
  std::vector<Rgb> palette;          // class index -> display color

  LabelMap() = default;
  LabelMap(int w, int h, int classes, std::uint8_t fill = 0);

  int at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  void set(int x, int y, int c) {
    labels[static_cast<std::size_t>(y) * width + x] = static_cast<std::uint8_t>(c);
  }
  std::vector<std::size_t> histogram() const;
  GrayImage to_gray() const;
  RgbImage to_color() const;
  bool operator==(const LabelMap&) const = default;
};

struct Page {
  std::string name;
  RgbImage image;
  LabelMap truth;
};

enum class Split { train, validation, test };
const char* to_string(Split s);
Split split_from_string(const std::string& s);

struct PageSet {
  Split split = Split::train;
  int class_count = kDocumentClassCount;
  std::vector<Page> pages;
};

struct Dataset {
  int class_count = kDocumentClassCount;
  std::vector<std::string> class_names;
  std::vector<Rgb> palette;
  PageSet train;
  PageSet validation;
  PageSet test;

  const PageSet& split(Split s) const;
  PageSet& split(Split s);
};

/// Reads an RGB image and a grayscale label map (pixel value = class index).
Page load_page(const std::filesystem::path& image_path, const std::filesystem::path& label_path,
               int class_count);

/// Manifest:
///   {format_version, class_count, class_names, palette: [[r,g,b], ...],
///    splits: {train|validation|test: [{image, labels}, ...]}}
/// Paths are relative to the manifest's directory.
Dataset load_dataset(const std::filesystem::path& manifest);

/// Writes every page as <name>.png / <name>_gt.png plus manifest.json and
/// returns the manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const Dataset& dataset);

/// Synthetic parchment pages: dark text strokes in a main column, lighter
/// narrower comment strokes in a margin column and colored decoration blobs,
/// with a pixel-accurate label map.  Page i depends only on (seed, i).
PageSet generate_synthetic(std::uint64_t seed, int pages, int width, int height);

/// generate_synthetic split into train / validation / test (roughly 2:1:1).
Dataset generate_dataset(std::uint64_t seed, int pages, int width, int height);

struct PatchCenter {
  std::uint32_t page = 0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
};

/// patch_size x patch_size window centered on (x, y) (top-left at
/// (x - patch_size/2, y - patch_size/2)), scaled with scale_pixel.
void extract_patch(const RgbImage& image, int x, int y, int patch_size, MatrixXd& out,
                   Eigen::Index column_offset);

/// Draws labeled patches whose centers keep the full window inside the page.
/// With balancing, sample j of a restarted stream is drawn from class
/// j mod class_count.
class PatchSampler final : public PatchStream {
 public:
  PatchSampler(const PageSet& pages, int patch_size, bool balanced = true, std::uint64_t seed = 0);

  void restart(std::uint64_t seed) override;
  PatchBatch next(std::size_t count) override;

  int patch_size() const { return patch_size_; }
  bool balanced() const { return balanced_; }
  std::size_t candidate_count(int cls) const { return by_class_.at(static_cast<std::size_t>(cls)).size(); }

 private:
  PatchCenter draw();

  const PageSet* pages_;
  int patch_size_;
  bool balanced_;
  std::vector<std::vector<PatchCenter>> by_class_;
  std::size_t total_ = 0;
  std::mt19937_64 rng_;
  std::size_t cursor_ = 0;
};

}  // namespace ldanet
