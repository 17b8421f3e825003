#include "ldanet/data.hpp"

#include <algorithm>
#include <cmath>

#include "ldanet/errors.hpp"
#include "ldanet/model_io.hpp"

namespace ldanet {

std::vector<std::string> document_class_names() {
  return {"background", "comment", "decoration", "text"};
}

std::vector<Rgb> document_palette() {
  return {Rgb{20, 20, 20}, Rgb{60, 180, 75}, Rgb{230, 25, 75}, Rgb{0, 130, 200}};
}

LabelMap::LabelMap(int w, int h, int classes, std::uint8_t fill)
    : width(w),
      height(h),
      class_count(classes),
      labels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill),
      palette(document_palette()) {
  palette.resize(static_cast<std::size_t>(classes), Rgb{128, 128, 128});
}

std::vector<std::size_t> LabelMap::histogram() const {
  std::vector<std::size_t> h(static_cast<std::size_t>(class_count), 0);
  for (auto l : labels) ++h[l];
  return h;
}

GrayImage LabelMap::to_gray() const {
  GrayImage g(width, height);
  g.pixels = labels;
  return g;
}

RgbImage LabelMap::to_color() const {
  RgbImage out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) out.set(x, y, palette[static_cast<std::size_t>(at(x, y))]);
  }
  return out;
}

const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  throw InvalidInputError("unknown split '" + s + "'");
}

const PageSet& Dataset::split(Split s) const {
  switch (s) {
    case Split::train: return train;
    case Split::validation: return validation;
    case Split::test: return test;
  }
  return train;
}

PageSet& Dataset::split(Split s) {
  return const_cast<PageSet&>(static_cast<const Dataset&>(*this).split(s));
}

Page load_page(const std::filesystem::path& image_path, const std::filesystem::path& label_path,
               int class_count) {
  Page page;
  page.name = image_path.stem().string();
  page.image = read_png_rgb(image_path);
  const GrayImage gray = read_png_gray(label_path);
  if (gray.width != page.image.width || gray.height != page.image.height) {
    throw DataError(label_path.string() + ": label map is " + std::to_string(gray.width) + "x" +
                    std::to_string(gray.height) + " but the image is " +
                    std::to_string(page.image.width) + "x" + std::to_string(page.image.height));
  }
  for (auto v : gray.pixels) {
    if (v >= class_count) {
      throw DataError(label_path.string() + ": label value " + std::to_string(v) +
                      " is not below class_count " + std::to_string(class_count));
    }
  }
  page.truth = LabelMap(gray.width, gray.height, class_count);
  page.truth.labels = gray.pixels;
  return page;
}

Dataset load_dataset(const std::filesystem::path& manifest) {
  const auto doc = read_json(manifest);
  const auto base = manifest.parent_path();
  Dataset ds;
  try {
    ds.class_count = doc.at("class_count").get<int>();
    if (ds.class_count < 1 || ds.class_count > 255) throw DataError("manifest: bad class_count");
    ds.class_names = doc.value("class_names", std::vector<std::string>{});
    if (doc.contains("palette")) {
      for (const auto& c : doc["palette"]) {
        ds.palette.push_back(Rgb{c.at(0).get<std::uint8_t>(), c.at(1).get<std::uint8_t>(),
                                 c.at(2).get<std::uint8_t>()});
      }
    }
    for (Split s : {Split::train, Split::validation, Split::test}) {
      PageSet& set = ds.split(s);
      set.split = s;
      set.class_count = ds.class_count;
      const auto& splits = doc.at("splits");
      if (!splits.contains(to_string(s))) continue;
      for (const auto& entry : splits[to_string(s)]) {
        Page page = load_page(base / entry.at("image").get<std::string>(),
                              base / entry.at("labels").get<std::string>(), ds.class_count);
        if (!ds.palette.empty()) {
          page.truth.palette = ds.palette;
          page.truth.palette.resize(static_cast<std::size_t>(ds.class_count), Rgb{128, 128, 128});
        }
        set.pages.push_back(std::move(page));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest.string() + ": " + e.what());
  }
  return ds;
}

std::filesystem::path write_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  nlohmann::json doc;
  doc["format_version"] = 1;
  doc["class_count"] = dataset.class_count;
  doc["class_names"] = dataset.class_names;
  auto palette = nlohmann::json::array();
  for (const auto& c : dataset.palette) palette.push_back({c[0], c[1], c[2]});
  doc["palette"] = palette;
  nlohmann::json splits = nlohmann::json::object();
  for (Split s : {Split::train, Split::validation, Split::test}) {
    auto list = nlohmann::json::array();
    for (const auto& page : dataset.split(s).pages) {
      const std::string image = page.name + ".png";
      const std::string labels = page.name + "_gt.png";
      write_png(dir / image, page.image);
      write_png(dir / labels, page.truth.to_gray());
      list.push_back({{"image", image}, {"labels", labels}});
    }
    splits[to_string(s)] = list;
  }
  doc["splits"] = splits;
  const auto path = dir / "manifest.json";
  write_json(path, doc);
  return path;
}

// ---------------------------------------------------------------------------
// Synthetic pages

namespace {

struct Ellipse {
  double cx, cy, rx, ry;
  int x0, y0, x1, y1;  // bounding box, inclusive, with margin
};

std::uint8_t clamp_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

class PageBuilder {
 public:
  PageBuilder(std::uint64_t seed, int width, int height)
      : rng_(seed), w_(width), h_(height), image_(width, height), truth_(width, height,
                                                                          kDocumentClassCount) {}

  Page build(std::string name) {
    paint_background();
    const int pitch = std::max(8, h_ / 36);
    // bleed-through from the verso: faint mirrored writing that stays background
    write_column(static_cast<int>(0.06 * w_), static_cast<int>(0.70 * w_), pitch, kText, true);
    place_decorations();
    write_column(static_cast<int>(0.30 * w_), static_cast<int>(0.94 * w_), pitch, kText);
    write_column(static_cast<int>(0.05 * w_), static_cast<int>(0.24 * w_),
                 std::max(6, pitch * 3 / 4), kComment);
    add_stains();
    return Page{std::move(name), std::move(image_), std::move(truth_)};
  }

 private:
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng_); }

  void paint_background() {
    const double base[3] = {uniform(212, 228), uniform(190, 206), uniform(148, 166)};
    const double gx = uniform(-10, 10), gy = uniform(-10, 10);
    const double fx = uniform(1.0, 3.0), fy = uniform(1.0, 3.0), phase = uniform(0, 6.28);
    std::normal_distribution<double> noise(0.0, 6.0);
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) {
        const double u = static_cast<double>(x) / w_, v = static_cast<double>(y) / h_;
        const double shade = gx * (u - 0.5) + gy * (v - 0.5) +
                             4.0 * std::sin(fx * 6.28 * u + fy * 6.28 * v + phase);
        const double n = noise(rng_);
        for (int ch = 0; ch < 3; ++ch) image_.at(x, y, ch) = clamp_byte(base[ch] + shade + n);
      }
    }
  }

  void place_decorations() {
    const int count = integer(2, 3);
    const double unit = std::min(w_, h_);
    const int col_x0 = static_cast<int>(0.30 * w_);
    const int col_y0 = static_cast<int>(0.06 * h_);
    const int col_y1 = static_cast<int>(0.94 * h_);
    const double band = static_cast<double>(col_y1 - col_y0) / count;
    for (int i = 0; i < count; ++i) {
      const double r = unit * uniform(0.06, 0.09);
      Ellipse e;
      e.rx = r * uniform(0.8, 1.1);
      e.ry = r * uniform(0.9, 1.2);
      e.cx = col_x0 + e.rx + 1;
      e.cy = col_y0 + band * i + e.ry + uniform(0, std::max(1.0, band - 2 * e.ry));
      const int margin = 3;
      e.x0 = std::max(0, static_cast<int>(e.cx - e.rx) - margin);
      e.x1 = std::min(w_ - 1, static_cast<int>(e.cx + e.rx) + margin);
      e.y0 = std::max(0, static_cast<int>(e.cy - e.ry) - margin);
      e.y1 = std::min(h_ - 1, static_cast<int>(e.cy + e.ry) + margin);
      blobs_.push_back(e);

      const bool red = integer(0, 1) == 0;
      const double color[3] = {red ? uniform(160, 190) : uniform(35, 60),
                               red ? uniform(30, 55) : uniform(55, 80),
                               red ? uniform(25, 45) : uniform(135, 170)};
      std::normal_distribution<double> noise(0.0, 8.0);
      for (int y = e.y0; y <= e.y1; ++y) {
        for (int x = e.x0; x <= e.x1; ++x) {
          const double dx = (x - e.cx) / e.rx, dy = (y - e.cy) / e.ry;
          const double d2 = dx * dx + dy * dy;
          if (d2 > 1.0) continue;
          // a paler inner ring gives the blob some texture
          const double tone = (d2 > 0.25 && d2 < 0.45) ? 40.0 : 0.0;
          const double n = noise(rng_);
          for (int ch = 0; ch < 3; ++ch) image_.at(x, y, ch) = clamp_byte(color[ch] + tone + n);
          truth_.set(x, y, kDecoration);
        }
      }
    }
  }

  bool blocked(int x, int y) const {
    for (const auto& e : blobs_) {
      if (x >= e.x0 && x <= e.x1 && y >= e.y0 && y <= e.y1) return true;
    }
    return false;
  }

  void ink(int x, int y, const double color[3], int cls, std::normal_distribution<double>& noise,
           double opacity) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_ || blocked(x, y)) return;
    const double n = noise(rng_);
    for (int ch = 0; ch < 3; ++ch) {
      const double under = image_.at(x, y, ch);
      image_.at(x, y, ch) = clamp_byte(under + opacity * (color[ch] + n - under));
    }
    if (opacity >= 1.0) truth_.set(x, y, cls);
  }

  // Darker, slightly yellowed low-contrast blotches over everything.
  void add_stains() {
    const int count = integer(1, 3);
    const double unit = std::min(w_, h_);
    for (int i = 0; i < count; ++i) {
      const double cx = uniform(0, w_), cy = uniform(0, h_);
      const double r = unit * uniform(0.10, 0.25);
      const double depth = uniform(0.08, 0.18);
      for (int y = std::max(0, static_cast<int>(cy - r)); y < std::min(h_, static_cast<int>(cy + r) + 1); ++y) {
        for (int x = std::max(0, static_cast<int>(cx - r)); x < std::min(w_, static_cast<int>(cx + r) + 1); ++x) {
          const double d = std::hypot(x - cx, y - cy) / r;
          if (d >= 1.0) continue;
          const double k = 1.0 - depth * (1.0 - d * d);
          image_.at(x, y, 0) = clamp_byte(image_.at(x, y, 0) * k);
          image_.at(x, y, 1) = clamp_byte(image_.at(x, y, 1) * k * 0.98);
          image_.at(x, y, 2) = clamp_byte(image_.at(x, y, 2) * k * 0.92);
        }
      }
    }
  }

  // Lines of pseudo-glyphs: vertical stems joined by partial hairlines, with
  // occasional ascenders/descenders.
  void write_column(int x0, int x1, int pitch, int cls, bool ghost = false) {
    const bool text = cls == kText;
    const double opacity = ghost ? uniform(0.15, 0.3) : 1.0;
    const double color[3] = {text ? uniform(40, 60) : uniform(115, 140),
                             text ? uniform(28, 42) : uniform(95, 115),
                             text ? uniform(20, 32) : uniform(80, 100)};
    std::normal_distribution<double> noise(0.0, text ? 8.0 : 10.0);
    const int xheight = std::max(3, pitch * (text ? 5 : 4) / 10);
    const int stem = text ? 2 : 1;
    const int spacing = text ? 4 : 3;
    const int y_start = static_cast<int>(0.06 * h_);
    const int y_end = static_cast<int>(0.94 * h_);
    for (int base = y_start + pitch; base < y_end; base += pitch) {
      if (integer(0, 9) == 0) continue;  // paragraph gap
      int x = x0 + integer(0, 3);
      const int line_end = x1 - integer(0, (x1 - x0) / 5 + 1);
      while (x < line_end) {
        const int letters = integer(2, 7);
        for (int l = 0; l < letters && x < line_end; ++l) {
          const int top = base - xheight - (integer(0, 6) == 0 ? xheight / 2 + 1 : 0);
          const int bottom = base + (integer(0, 9) == 0 ? xheight / 2 : 0);
          for (int y = top; y < bottom; ++y) {
            for (int s = 0; s < stem; ++s) ink(x + s, y, color, cls, noise, opacity);
          }
          if (integer(0, 1) == 0) {
            const int y = integer(0, 1) == 0 ? base - xheight : base - 1;
            for (int dx = 0; dx < spacing; ++dx) ink(x + dx, y, color, cls, noise, opacity);
          }
          x += spacing;
        }
        x += spacing + integer(1, spacing + 1);  // word gap
      }
    }
  }

  std::mt19937_64 rng_;
  int w_, h_;
  RgbImage image_;
  LabelMap truth_;
  std::vector<Ellipse> blobs_;
};

std::string page_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "page_%03d", i);
  return buf;
}

}  // namespace

PageSet generate_synthetic(std::uint64_t seed, int pages, int width, int height) {
  if (pages < 1) throw InvalidInputError("generate_synthetic: pages must be >= 1");
  if (width < 64 || height < 64) {
    throw InvalidInputError("generate_synthetic: pages must be at least 64x64");
  }
  if (width > 65535 || height > 65535) throw InvalidInputError("generate_synthetic: page too large");
  PageSet set;
  set.split = Split::train;
  set.class_count = kDocumentClassCount;
  for (int i = 0; i < pages; ++i) {
    PageBuilder builder(mix_seed(seed, static_cast<std::uint64_t>(i)), width, height);
    set.pages.push_back(builder.build(page_name(i)));
  }
  return set;
}

Dataset generate_dataset(std::uint64_t seed, int pages, int width, int height) {
  PageSet all = generate_synthetic(seed, pages, width, height);
  const int test = pages >= 2 ? std::max(1, pages / 4) : 0;
  const int validation = pages / 4;
  const int train = pages - test - validation;
  Dataset ds;
  ds.class_count = kDocumentClassCount;
  ds.class_names = document_class_names();
  ds.palette = document_palette();
  for (int i = 0; i < pages; ++i) {
    const Split s = i < train ? Split::train : (i < train + validation ? Split::validation : Split::test);
    ds.split(s).pages.push_back(std::move(all.pages[static_cast<std::size_t>(i)]));
  }
  for (Split s : {Split::train, Split::validation, Split::test}) {
    ds.split(s).split = s;
    ds.split(s).class_count = ds.class_count;
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Patch sampling

void extract_patch(const RgbImage& image, int x, int y, int patch_size, MatrixXd& out,
                   Eigen::Index column_offset) {
  const int x0 = x - patch_size / 2;
  const int y0 = y - patch_size / 2;
  if (x0 < 0 || y0 < 0 || x0 + patch_size > image.width || y0 + patch_size > image.height) {
    throw InvalidInputError("extract_patch: window leaves the page");
  }
  for (int r = 0; r < patch_size; ++r) {
    const std::uint8_t* row = &image.pixels[(static_cast<std::size_t>(y0 + r) * image.width + x0) * 3];
    for (int c = 0; c < patch_size; ++c) {
      const Eigen::Index col = column_offset + r * patch_size + c;
      for (int ch = 0; ch < 3; ++ch) out(ch, col) = scale_pixel(row[c * 3 + ch]);
    }
  }
}

PatchSampler::PatchSampler(const PageSet& pages, int patch_size, bool balanced, std::uint64_t seed)
    : pages_(&pages), patch_size_(patch_size), balanced_(balanced) {
  if (patch_size < 1) throw InvalidInputError("PatchSampler: patch_size must be >= 1");
  if (pages.pages.empty()) throw DataError("PatchSampler: no pages");
  by_class_.resize(static_cast<std::size_t>(pages.class_count));
  const int half = patch_size / 2;
  for (std::size_t p = 0; p < pages.pages.size(); ++p) {
    const Page& page = pages.pages[p];
    if (page.image.width < patch_size || page.image.height < patch_size) {
      throw DataError("PatchSampler: page " + page.name + " is smaller than the " +
                      std::to_string(patch_size) + "px patch");
    }
    for (int y = half; y + (patch_size - half) <= page.image.height; ++y) {
      for (int x = half; x + (patch_size - half) <= page.image.width; ++x) {
        const int c = page.truth.at(x, y);
        by_class_[static_cast<std::size_t>(c)].push_back(
            {static_cast<std::uint32_t>(p), static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y)});
        ++total_;
      }
    }
  }
  if (balanced_) {
    for (std::size_t c = 0; c < by_class_.size(); ++c) {
      if (by_class_[c].empty()) {
        throw DataError("PatchSampler: class " + std::to_string(c) +
                        " does not occur on any page, cannot balance");
      }
    }
  }
  restart(seed);
}

void PatchSampler::restart(std::uint64_t seed) {
  rng_.seed(seed);
  cursor_ = 0;
}

PatchCenter PatchSampler::draw() {
  if (balanced_) {
    const auto& pool = by_class_[cursor_ % by_class_.size()];
    ++cursor_;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    return pool[pick(rng_)];
  }
  std::uniform_int_distribution<std::size_t> pick(0, total_ - 1);
  std::size_t i = pick(rng_);
  for (const auto& pool : by_class_) {
    if (i < pool.size()) return pool[i];
    i -= pool.size();
  }
  return by_class_.back().back();
}

PatchBatch PatchSampler::next(std::size_t count) {
  PatchBatch batch;
  batch.height = batch.width = patch_size_;
  batch.channels = 3;
  const auto area = static_cast<Eigen::Index>(patch_size_) * patch_size_;
  batch.values.resize(3, area * static_cast<Eigen::Index>(count));
  batch.labels.resize(count);
  for (std::size_t b = 0; b < count; ++b) {
    const PatchCenter pc = draw();
    const Page& page = pages_->pages[pc.page];
    extract_patch(page.image, pc.x, pc.y, patch_size_, batch.values,
                  static_cast<Eigen::Index>(b) * area);
    batch.labels[b] = page.truth.at(pc.x, pc.y);
  }
  return batch;
}

}  // namespace ldanet
