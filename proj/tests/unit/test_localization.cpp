#include <cmath>
#include <random>

#include "doctest.h"
#include "itpatch/error.hpp"
#include "itpatch/localization.hpp"

using namespace itpatch;

namespace {

ImageBuffer gray_row(const std::vector<int>& levels) {
  ImageBuffer img(static_cast<int>(levels.size()), 1);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const float v = from_byte(static_cast<std::uint8_t>(levels[i]));
    img.set_pixel(static_cast<int>(i), 0, {v, v, v});
  }
  return img;
}

Mask disk_mask(int w, int h, double cx, double cy, double r) {
  Mask m(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r * r) m.set(x, y, true);
    }
  }
  return m;
}

ImageBuffer paint(const Mask& m, Triplet fg, Triplet bg) {
  ImageBuffer img(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) img.set_pixel(x, y, m(x, y) ? fg : bg);
  }
  return img;
}

}  // namespace

TEST_CASE("contrast ratio") {
  SUBCASE("uniform image is low contrast with ratio 0") {
    const auto img = ImageBuffer::filled(8, 8, {0.4f, 0.4f, 0.4f});
    CHECK(contrast_ratio(img) == 0.0);
    CHECK(is_low_contrast(img));
  }
  SUBCASE("full ramp") {
    std::vector<int> levels(256);
    for (int i = 0; i < 256; ++i) levels[static_cast<std::size_t>(i)] = i;
    const auto img = gray_row(levels);
    // P1 = 2.55, P99 = 252.45 by linear interpolation over 256 samples.
    CHECK(contrast_ratio(img) == doctest::Approx(249.9 / 255.0).epsilon(1e-9));
    CHECK_FALSE(is_low_contrast(img));
  }
  SUBCASE("threshold boundary is not low contrast") {
    std::vector<int> levels(101);
    levels[0] = 0;
    levels[100] = 200;
    for (int i = 1; i < 100; ++i) levels[static_cast<std::size_t>(i)] = 100 + (i - 1) % 11;
    const auto img = gray_row(levels);
    CHECK(contrast_ratio(img) == 0.05);
    CHECK_FALSE(is_low_contrast(img, 0.05));
    CHECK(is_low_contrast(img, 0.0500001));
  }
  SUBCASE("mostly flat image with outliers is low contrast") {
    std::vector<int> levels(400, 120);
    levels[0] = 0;
    levels[1] = 255;
    CHECK(is_low_contrast(gray_row(levels)));
  }
}

TEST_CASE("equalize") {
  SUBCASE("single level is unchanged") {
    const auto img = ImageBuffer::filled(5, 5, {0.2f, 0.3f, 0.6f});
    CHECK(equalize(img) == img);
  }
  SUBCASE("two levels spread to the cdf") {
    const auto img = gray_row({50, 200, 50, 200});
    const auto eq = equalize(img);
    CHECK(value_channel(eq.pixel(0, 0)) == 128.0f);
    CHECK(value_channel(eq.pixel(1, 0)) == 255.0f);
  }
  SUBCASE("idempotent up to quantization") {
    std::mt19937 rng(3);
    std::uniform_int_distribution<int> byte(0, 255);
    std::vector<int> levels(300);
    for (auto& l : levels) l = byte(rng);
    const auto once = equalize(gray_row(levels));
    const auto twice = equalize(once);
    for (int x = 0; x < once.width(); ++x) {
      CHECK(std::fabs(value_channel(once.pixel(x, 0)) - value_channel(twice.pixel(x, 0))) <= 1.0f);
    }
  }
  SUBCASE("hue and saturation preserved") {
    ImageBuffer img(2, 1);
    img.set_pixel(0, 0, {0.4f, 0.2f, 0.1f});
    img.set_pixel(1, 0, {0.1f, 0.1f, 0.8f});
    const auto eq = equalize(img);
    for (int x = 0; x < 2; ++x) {
      const auto a = rgb_to_hsv(img.pixel(x, 0));
      const auto b = rgb_to_hsv(eq.pixel(x, 0));
      CHECK(std::fabs(a[0] - b[0]) <= 1.0f);
      CHECK(std::fabs(a[1] - b[1]) <= 1.0f);
    }
  }
}

TEST_CASE("canny edges") {
  SUBCASE("constant image has no edges") {
    CHECK_FALSE(canny_edges(ImageBuffer::filled(16, 16, {0.5f, 0.5f, 0.5f}), 50, 150).any());
  }
  SUBCASE("vertical step gives a single one-pixel line") {
    Mask right(16, 16);
    for (int y = 0; y < 16; ++y) {
      for (int x = 8; x < 16; ++x) right.set(x, y, true);
    }
    const auto edges = canny_edges(paint(right, {1, 1, 1}, {0, 0, 0}), 50, 150);
    REQUIRE(edges.count() == 16);
    const BBox box = edges.bounding_box();
    CHECK(box.x_min == box.x_max);
    CHECK(box.x_min >= 7);
    CHECK(box.x_min <= 8);
  }
  SUBCASE("thresholds above the gradient range suppress everything") {
    Mask right(16, 16);
    for (int y = 0; y < 16; ++y) right.set(12, y, true);
    CHECK_FALSE(canny_edges(paint(right, {1, 1, 1}, {0, 0, 0}), 5000, 6000).any());
  }
  SUBCASE("low must be below high") {
    CHECK_THROWS_AS(canny_edges(ImageBuffer(4, 4), 10, 10), ContractViolation);
  }
}

TEST_CASE("color boxes") {
  const auto ranges = default_hsv_ranges();
  auto hit = [&](Triplet hsv) {
    std::vector<std::string> names;
    for (const auto& r : ranges) {
      if (r.contains(hsv)) names.push_back(r.name);
    }
    return names;
  };
  CHECK(hit({25, 100, 100}) == std::vector<std::string>{"yellow"});
  CHECK(hit({170, 100, 100}) == std::vector<std::string>{"red2"});
  CHECK(hit({60, 0, 255}).empty());
  CHECK(hit({5, 100, 100}) == std::vector<std::string>{"red1", "black"});

  LocalizerConfig cfg;
  cfg.use_black_v_range = true;
  const auto eff = cfg.effective_ranges();
  REQUIRE(eff.size() == ranges.size());
  CHECK(eff.back().contains({100, 0, 30}));
  CHECK_FALSE(eff.back().contains({100, 0, 61}));
}

TEST_CASE("elliptical kernel matches the usual 5x5 ellipse") {
  const Mask k = elliptical_kernel(5);
  const char* rows[] = {"00100", "11111", "11111", "11111", "00100"};
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 5; ++x) CHECK(k(x, y) == (rows[y][x] == '1'));
  }
}

TEST_CASE("morphology") {
  Mask m(9, 9);
  m.set(4, 4, true);
  const Mask k = elliptical_kernel(3);
  CHECK(dilate(m, k).count() == 5);
  CHECK_FALSE(open(m, k).any());
  CHECK(erode(Mask(4, 4, 1), k).count() == 16);

  Mask ring(7, 7);
  for (int i = 1; i < 6; ++i) {
    ring.set(i, 1, true);
    ring.set(i, 5, true);
    ring.set(1, i, true);
    ring.set(5, i, true);
  }
  const Mask filled = fill_enclosed(ring);
  CHECK(filled.count() == 25);
  CHECK(filled.test(3, 3));

  Mask two(10, 3);
  two.set(0, 0, true);
  for (int x = 4; x < 8; ++x) two.set(x, 1, true);
  CHECK(largest_component(two).count() == 4);
  CHECK(largest_component(Mask(3, 3)).count() == 0);
}

TEST_CASE("color mask is monotone in the range boxes") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  ImageBuffer img(40, 40);
  for (float& v : img.data()) v = unit(rng);
  auto ranges = default_hsv_ranges();
  const Mask before = color_mask(img, ranges);
  for (auto& r : ranges) {
    r.lower[1] = 10;
    r.upper[2] = 255;
  }
  const Mask after = color_mask(img, ranges);
  CHECK(before.subset_of(after));
  CHECK(raw_color_mask(img, default_hsv_ranges()).subset_of(raw_color_mask(img, ranges)));
}

TEST_CASE("localize") {
  SUBCASE("red disk on gray") {
    const Mask truth = disk_mask(128, 128, 64, 64, 40);
    const auto loc = localize(paint(truth, {1, 0, 0}, {0.5f, 0.5f, 0.5f}));
    CHECK(mask_iou(loc.whole.mask, truth) >= 0.9);
  }
  SUBCASE("blue square") {
    Mask truth(100, 100);
    for (int y = 30; y < 80; ++y) {
      for (int x = 20; x < 70; ++x) truth.set(x, y, true);
    }
    const auto loc = localize(paint(truth, {0.1f, 0.2f, 0.7f}, {0.9f, 0.9f, 0.9f}));
    const BBox box = loc.whole.bbox;
    CHECK(std::fabs(box.x_min - 20) <= 3);
    CHECK(std::fabs(box.x_max - 69) <= 3);
    CHECK(std::fabs(box.y_min - 30) <= 3);
    CHECK(std::fabs(box.y_max - 79) <= 3);
  }
  SUBCASE("blank image has no region") {
    CHECK_THROWS_AS(localize(ImageBuffer::filled(64, 64, {0.5f, 0.5f, 0.5f})), NoRegionFound);
  }
  SUBCASE("region variants partition the whole mask") {
    const Mask truth = disk_mask(96, 96, 40, 50, 25);
    const auto loc = localize(paint(truth, {0.9f, 0.8f, 0.1f}, {0.3f, 0.3f, 0.3f}));
    CHECK(loc.interior.mask.subset_of(loc.whole.mask));
    CHECK(loc.interior.area() < loc.whole.area());
    CHECK(loc.interior.area() > 0);
    CHECK((loc.interior.mask | loc.border.mask) == loc.whole.mask);
    CHECK_FALSE((loc.interior.mask & loc.border.mask).any());
    CHECK(&loc.select(RegionVariant::Border) == &loc.border);
    CHECK(parse_region_variant("interior") == RegionVariant::Interior);
    CHECK_THROWS_AS(parse_region_variant("edge"), ConfigError);
  }
  SUBCASE("low contrast input is equalized first") {
    const Mask truth = disk_mask(64, 64, 32, 32, 18);
    ImageBuffer img = paint(truth, {0.43f, 0.43f, 0.43f}, {0.45f, 0.45f, 0.45f});
    img.set_pixel(0, 0, {0, 0, 0});
    img.set_pixel(63, 63, {1, 1, 1});
    CHECK(localize(img).equalized);
  }
}

TEST_CASE("localizer config validation") {
  LocalizerConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.canny_low = 200;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.contrast_threshold = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.hsv_ranges[0].lower[0] = 90;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
