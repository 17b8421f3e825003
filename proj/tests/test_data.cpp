#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ldanet/data.hpp"
#include "ldanet/errors.hpp"
#include "ldanet/image.hpp"

using namespace ldanet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ldanet_test_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Pixel (x, y) encodes its own coordinates and label, so a patch tells us
// where its center was drawn from.
PageSet coordinate_pages(int w, int h) {
  PageSet set;
  Page page;
  page.name = "coords";
  page.image = RgbImage(w, h);
  page.truth = LabelMap(w, h, 4);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int label = (x / 8 + y / 8) % 4;
      page.truth.set(x, y, label);
      page.image.set(x, y, {static_cast<std::uint8_t>(x), static_cast<std::uint8_t>(y),
                            static_cast<std::uint8_t>(label * 60)});
    }
  set.pages.push_back(std::move(page));
  return set;
}

int decode(double v) { return static_cast<int>(std::lround((v + 1.0) * 127.5)); }

}  // namespace

TEST_CASE("png round trip") {
  const fs::path dir = scratch("png");
  RgbImage rgb(5, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 5; ++x) rgb.set(x, y, {static_cast<std::uint8_t>(x * 40), static_cast<std::uint8_t>(y * 90), 7});
  write_png(dir / "a.png", rgb);
  CHECK(read_png_rgb(dir / "a.png") == rgb);
  GrayImage g(4, 2, 3);
  g.at(1, 1) = 200;
  write_png(dir / "g.png", g);
  CHECK(read_png_gray(dir / "g.png") == g);
  CHECK_THROWS_AS(read_png_gray(dir / "a.png"), DataError);
  CHECK_THROWS_AS(read_png_rgb(dir / "missing.png"), DataError);
}

TEST_CASE("load_page: single pixel, label range, size mismatch") {
  const fs::path dir = scratch("page");
  write_png(dir / "white.png", RgbImage(1, 1, {255, 255, 255}));
  write_png(dir / "zero.png", GrayImage(1, 1, 0));
  write_png(dir / "seven.png", GrayImage(1, 1, 7));
  write_png(dir / "big.png", GrayImage(2, 1, 0));
  const Page p = load_page(dir / "white.png", dir / "zero.png", 4);
  CHECK(p.truth.at(0, 0) == kBackground);
  CHECK(p.image.pixel(0, 0) == Rgb{255, 255, 255});
  CHECK_THROWS_AS(load_page(dir / "white.png", dir / "seven.png", 4), DataError);
  CHECK_THROWS_AS(load_page(dir / "white.png", dir / "big.png", 4), DataError);
  CHECK_THROWS_AS(load_page(dir / "white.png", dir / "nothing.png", 4), DataError);
}

TEST_CASE("synthetic pages: classes, shares, determinism") {
  for (const auto& [w, h] : {std::pair{192, 256}, std::pair{480, 640}, std::pair{64, 64}}) {
    const PageSet a = generate_synthetic(5, 3, w, h);
    const PageSet b = generate_synthetic(5, 3, w, h);
    REQUIRE(a.pages.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(a.pages[i].image == b.pages[i].image);
      CHECK(a.pages[i].truth == b.pages[i].truth);
      const auto hist = a.pages[i].truth.histogram();
      const double total = static_cast<double>(w) * h;
      CHECK(hist[kBackground] / total >= 0.5);
      CHECK(hist[kBackground] / total <= 0.9);
      for (int c : {kComment, kDecoration, kText}) {
        CHECK(hist[c] / total >= 0.01);
        CHECK(hist[c] / total <= 0.3);
      }
    }
    CHECK(a.pages[0].image != a.pages[1].image);
  }
  CHECK(generate_synthetic(5, 1, 192, 256).pages[0].image != generate_synthetic(6, 1, 192, 256).pages[0].image);
  CHECK_THROWS_AS(generate_synthetic(1, 1, 63, 100), InvalidInputError);
  CHECK_THROWS_AS(generate_synthetic(1, 0, 100, 100), InvalidInputError);
}

TEST_CASE("page i depends only on (seed, i)") {
  const PageSet two = generate_synthetic(9, 2, 128, 128);
  const PageSet five = generate_synthetic(9, 5, 128, 128);
  CHECK(two.pages[1].image == five.pages[1].image);
}

TEST_CASE("dataset manifest round trip") {
  const fs::path dir = scratch("manifest");
  const Dataset ds = generate_dataset(2, 6, 96, 96);
  CHECK(ds.train.pages.size() + ds.validation.pages.size() + ds.test.pages.size() == 6);
  CHECK(!ds.test.pages.empty());
  const fs::path manifest = write_dataset(dir, ds);
  const Dataset back = load_dataset(manifest);
  CHECK(back.class_count == 4);
  CHECK(back.class_names == document_class_names());
  for (Split s : {Split::train, Split::validation, Split::test}) {
    REQUIRE(back.split(s).pages.size() == ds.split(s).pages.size());
    for (std::size_t i = 0; i < ds.split(s).pages.size(); ++i) {
      CHECK(back.split(s).pages[i].truth.labels == ds.split(s).pages[i].truth.labels);
      CHECK(back.split(s).pages[i].image == ds.split(s).pages[i].image);
    }
  }
  const auto doc = nlohmann::json::parse(std::ifstream(manifest));
  CHECK(doc["splits"]["test"].size() == ds.test.pages.size());
  CHECK(doc["palette"].size() == 4);

  std::ofstream(dir / "broken.json") << "{\"class_count\": 4}";
  CHECK_THROWS_AS(load_dataset(dir / "broken.json"), DataError);
}

TEST_CASE("label map rendering") {
  LabelMap m(2, 1, 4);
  m.palette = document_palette();
  m.set(1, 0, kText);
  CHECK(m.to_gray().at(1, 0) == kText);
  CHECK(m.to_color().pixel(1, 0) == document_palette()[kText]);
  CHECK(m.histogram() == std::vector<std::size_t>{1, 0, 0, 1});
}

TEST_CASE("gray page gives constant patches") {
  PageSet set;
  Page page;
  page.name = "gray";
  page.image = RgbImage(30, 30, {128, 128, 128});
  page.truth = LabelMap(30, 30, 4);
  page.truth.set(15, 15, 1);
  page.truth.set(14, 15, 2);
  page.truth.set(16, 15, 3);
  set.pages.push_back(page);
  PatchSampler s(set, 23, true, 1);
  const PatchBatch b = s.next(8);
  CHECK(b.values.rows() == 3);
  CHECK(b.values.cols() == 8 * 23 * 23);
  CHECK((b.values.array() - (128 / 127.5 - 1)).abs().maxCoeff() <= 1e-15);
  CHECK(b.values(0, 0) == doctest::Approx(0.0039).epsilon(0.01));
}

TEST_CASE("sampler: centers, labels, balance, determinism") {
  const PageSet set = coordinate_pages(60, 50);
  PatchSampler s(set, 23, true, 4);
  const PatchBatch b = s.next(4000);
  std::vector<int> counts(4, 0);
  const Eigen::Index center = 11 * 23 + 11;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const Eigen::Index col = static_cast<Eigen::Index>(i) * 23 * 23 + center;
    const int x = decode(b.values(0, col));
    const int y = decode(b.values(1, col));
    CHECK(x >= 11);
    CHECK(y >= 11);
    CHECK(x <= 60 - 12);
    CHECK(y <= 50 - 12);
    CHECK(b.labels[i] == set.pages[0].truth.at(x, y));
    CHECK(decode(b.values(2, col)) == b.labels[i] * 60);
    ++counts[static_cast<std::size_t>(b.labels[i])];
  }
  CHECK(counts == std::vector<int>{1000, 1000, 1000, 1000});

  s.restart(4);
  const PatchBatch first = s.next(1500);
  const PatchBatch second = s.next(2500);
  CHECK(first.values == b.values.leftCols(first.values.cols()));
  CHECK(second.values == b.values.rightCols(second.values.cols()));
  s.restart(5);
  CHECK(s.next(10).values != b.values.leftCols(10 * 23 * 23));
}

TEST_CASE("sampler: unbalanced mode follows class frequency") {
  const Dataset ds = generate_dataset(3, 2, 128, 160);
  PatchSampler s(ds.train, 23, false, 1);
  const PatchBatch b = s.next(20000);
  std::vector<double> share(4, 0.0);
  for (int l : b.labels) share[static_cast<std::size_t>(l)] += 1.0 / 20000;
  double candidates = 0;
  for (int c = 0; c < 4; ++c) candidates += static_cast<double>(s.candidate_count(c));
  for (int c = 0; c < 4; ++c) CHECK(std::abs(share[c] - s.candidate_count(c) / candidates) <= 0.02);
}

TEST_CASE("sampler errors") {
  PageSet small;
  small.pages.push_back({"tiny", RgbImage(20, 20), LabelMap(20, 20, 4)});
  CHECK_THROWS_AS(PatchSampler(small, 23), DataError);
  PageSet plain;
  plain.pages.push_back({"plain", RgbImage(40, 40), LabelMap(40, 40, 4)});
  CHECK_THROWS_AS(PatchSampler(plain, 23, true), DataError);
  CHECK_NOTHROW(PatchSampler(plain, 23, false));
  CHECK_THROWS_AS(PatchSampler(PageSet{}, 23), DataError);
}

TEST_CASE("split names") {
  CHECK(split_from_string("validation") == Split::validation);
  CHECK(std::string(to_string(Split::test)) == "test");
  CHECK_THROWS_AS(split_from_string("dev"), InvalidInputError);
}
