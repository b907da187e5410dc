#include <cmath>

#include "doctest.h"
#include "itpatch/color.hpp"
#include "itpatch/error.hpp"
#include "itpatch/transforms.hpp"

using namespace itpatch;

namespace {

Mask disk(int size, double cx, double cy, double r) {
  Mask m(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) m.set(x, y, true);
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

TEST_CASE("sampling stays inside the published ranges") {
  const TransformSpec spec;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const auto s = sample(spec, i);
    REQUIRE(s.rotation_deg >= -10);
    REQUIRE(s.rotation_deg <= 10);
    REQUIRE(s.brightness_l >= 0);
    REQUIRE(s.brightness_l <= 50);
    REQUIRE(s.h_view_deg >= -30);
    REQUIRE(s.h_view_deg <= 60);
    REQUIRE(s.v_view_deg >= 0);
    REQUIRE(s.v_view_deg <= 60);
    REQUIRE(s.distance_m > 0);
    REQUIRE(s.distance_m <= 20);
    REQUIRE(s.blur_len_px >= 0);
    REQUIRE(s.blur_len_px <= 9);
    REQUIRE(s.blur_angle_deg >= 0);
    REQUIRE(s.blur_angle_deg < 180);
    REQUIRE(s.residual_alpha >= 0);
    REQUIRE(s.residual_alpha <= 0.1);
    REQUIRE(s.background_index == -1);
  }
}

TEST_CASE("sampling is deterministic and degenerate ranges are constant") {
  TransformSpec spec;
  CHECK(sample(spec, 42) == sample(spec, 42));
  CHECK_FALSE(sample(spec, 42) == sample(spec, 43));
  CHECK(sample_many(spec, 7, 5) == sample_many(spec, 7, 5));

  spec.rotation_deg = {3, 3};
  spec.blur_len_px = {4, 4};
  spec.distance_m = {6, 6};
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto s = sample(spec, i);
    CHECK(s.rotation_deg == 3);
    CHECK(s.blur_len_px == 4);
    CHECK(s.distance_m == 6);
  }

  bool all_lengths = true;
  std::vector<int> seen(10, 0);
  for (std::uint64_t i = 0; i < 2000; ++i) ++seen[static_cast<std::size_t>(sample(TransformSpec{}, i).blur_len_px)];
  for (int c : seen) all_lengths = all_lengths && c > 0;
  CHECK(all_lengths);
}

TEST_CASE("spec validation") {
  TransformSpec spec;
  CHECK_NOTHROW(spec.validate());
  spec.rotation_deg = {-20, 10};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.allow_widen = true;
  CHECK_NOTHROW(spec.validate());
  spec = {};
  spec.rotation_deg = {5, -5};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = {};
  spec.distance_m = {0, 10};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = {};
  spec.use_backgrounds = true;
  CHECK_THROWS_AS(sample(spec, 1), ConfigError);
}

TEST_CASE("identity pipeline") {
  const Mask m = disk(32, 15, 16, 9);
  const auto img = paint(m, {0.8f, 0.1f, 0.1f}, {0.3f, 0.6f, 0.2f});
  const auto spec = TransformSpec::identity();
  const auto s = sample(spec, 5);
  const auto t = apply(img, m, s, spec);
  CHECK(t.image == img);
  CHECK(t.mask == m);
}

TEST_CASE("distance follows the pinhole model") {
  const Mask m = disk(96, 48, 48, 10);
  const auto img = paint(m, {0.9f, 0.9f, 0.1f}, {0.2f, 0.2f, 0.2f});
  const auto spec = TransformSpec::identity();
  TransformSample near, far;
  near.distance_m = 4;
  far.distance_m = 8;
  const auto a = apply(img, m, near, spec).mask.bounding_box();
  const auto b = apply(img, m, far, spec).mask.bounding_box();
  const double wa = a.width() + 1, wb = b.width() + 1;
  CHECK(std::fabs(wa - spec.focal_scale * spec.sign_size_m / 4) <= 1.0);
  CHECK(std::fabs(wb - wa / 2) <= 1.0);
}

TEST_CASE("brightness offset inside the sign only") {
  const Mask m = disk(32, 16, 16, 8);
  const auto img = paint(m, {0.5f, 0.5f, 0.5f}, {0.2f, 0.3f, 0.4f});
  const auto spec = TransformSpec::identity();
  TransformSample s;
  s.brightness_l = 50;
  const auto t = apply(img, m, s, spec);
  const double before = rgb_to_lab(img.pixel(16, 16))[0];
  CHECK(rgb_to_lab(t.image.pixel(16, 16))[0] == doctest::Approx(std::min(100.0, before + 50)).epsilon(1e-3));
  CHECK(t.image.pixel(0, 0) == img.pixel(0, 0));

  s.brightness_l = 20;
  const auto u = apply(img, m, s, spec);
  CHECK(rgb_to_lab(u.image.pixel(16, 16))[0] == doctest::Approx(before + 20).epsilon(1e-3));
}

TEST_CASE("rotation and perspective keep the sign inside the frame") {
  const Mask m = disk(64, 32, 32, 12);
  const auto img = paint(m, {0.1f, 0.2f, 0.8f}, {0.5f, 0.5f, 0.5f});
  const auto spec = TransformSpec::identity();
  TransformSample s;
  s.rotation_deg = 10;
  s.h_view_deg = 30;
  s.v_view_deg = 20;
  const auto t = apply(img, m, s, spec);
  CHECK(t.mask.count() > 0);
  CHECK(t.mask.count() < m.count());
  const auto c = t.mask.bounding_box();
  CHECK(std::fabs((c.x_min + c.x_max) / 2 - 32) <= 2);
}

TEST_CASE("background compositing") {
  const Mask m = disk(16, 8, 8, 6);
  const auto img = paint(m, {1, 0, 0}, {0, 1, 0});
  TransformSpec spec = TransformSpec::identity();
  spec.use_backgrounds = true;
  spec.backgrounds = {ImageBuffer::filled(40, 30, {0, 0, 1})};
  const auto s = sample(spec, 3);
  CHECK(s.background_index == 0);
  const auto t = apply(img, m, s, spec);
  CHECK(t.image.width() == 40);
  CHECK(t.image.height() == 30);
  CHECK(t.mask.count() == m.count());
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 40; ++x) {
      const Triplet want = t.mask(x, y) ? Triplet{1, 0, 0} : Triplet{0, 0, 1};
      CHECK(t.image.pixel(x, y) == want);
    }
  }
  spec.backgrounds = {ImageBuffer::filled(8, 8, {0, 0, 1})};
  CHECK_THROWS_AS(apply(img, m, s, spec), ContractViolation);
}

TEST_CASE("motion blur") {
  const auto flat = ImageBuffer::filled(12, 12, {0.3f, 0.6f, 0.9f});
  const auto b = motion_blur(flat, 7, 33);
  for (int c = 0; c < 3; ++c) CHECK(b.at(5, 5, c) == doctest::Approx(flat.at(5, 5, c)).epsilon(1e-6));

  ImageBuffer dot(15, 15);
  dot.set_pixel(7, 7, {1, 1, 1});
  CHECK(motion_blur(dot, 1, 0) == dot);
  const auto h = motion_blur(dot, 5, 0);
  CHECK(h.at(7, 7, 0) == doctest::Approx(0.2));
  CHECK(h.at(9, 7, 0) == doctest::Approx(0.2));
  CHECK(h.at(10, 7, 0) == 0.0f);
  CHECK(h.at(7, 8, 0) == 0.0f);
  const auto v = motion_blur(dot, 3, 90);
  CHECK(v.at(7, 8, 0) == doctest::Approx(1.0 / 3));
}

TEST_CASE("sample json roundtrip") {
  const auto s = sample(TransformSpec{}, 99);
  const nlohmann::json j = s;
  CHECK(j.get<TransformSample>() == s);
  const nlohmann::json r = Range{-1, 2, false};
  CHECK(r.get<Range>() == Range{-1, 2, false});
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"range":[0,1],"extra":1})").get<Range>(), ConfigError);
}
