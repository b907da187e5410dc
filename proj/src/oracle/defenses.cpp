// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <random>

#include "itpatch/error.hpp"
#include "itpatch/oracle.hpp"
#include "itpatch/transforms.hpp"

namespace itpatch {

std::uint64_t image_hash(const ImageBuffer& img) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint8_t b) {
    h ^= b;
    h *= 1099511628211ull;
  };
  for (int v : {img.width(), img.height()}) {
    for (int s = 0; s < 32; s += 8) mix(static_cast<std::uint8_t>(v >> s));
  }
  for (float v : img.data()) mix(to_byte(v));
  return h;
}

GaussianSmoothing::GaussianSmoothing(BackendPtr inner, double sigma, int draws, std::uint64_t seed)
    : inner_(std::move(inner)), sigma_(sigma), draws_(draws), seed_(seed) {
  if (!inner_) throw ConfigError("gaussian smoothing: no inner backend");
  if (!(sigma_ >= 0)) throw ConfigError("gaussian smoothing: sigma must be >= 0");
  if (draws_ < 1) throw ConfigError("gaussian smoothing: draws must be >= 1");
}

std::string GaussianSmoothing::describe() const {
  return "gaussian-smoothing(" + std::to_string(sigma_) + ")>" + inner_->describe();
}

OracleResponse GaussianSmoothing::query(Task task, const ImageBuffer& img) {
  if (sigma_ == 0) return inner_->query(task, img);
  const std::uint64_t base = seed_ ^ image_hash(img);
  auto noisy = [&](int draw) {
    std::mt19937_64 rng(derive_seed(base, static_cast<std::uint64_t>(draw)));
    std::normal_distribution<float> noise(0.0f, static_cast<float>(sigma_));
    ImageBuffer out = img;
    for (float& v : out.data()) v = std::clamp(v + noise(rng), 0.0f, 1.0f);
    return out;
  };
  if (task == Task::Detect) return inner_->query(task, noisy(0));
  OracleResponse acc = inner_->query(task, noisy(0));
  for (int d = 1; d < draws_; ++d) {
    const OracleResponse r = inner_->query(task, noisy(d));
    if (r.probs.size() != acc.probs.size()) throw ValidationError("class count changed between draws");
    for (std::size_t i = 0; i < acc.probs.size(); ++i) acc.probs[i] += r.probs[i];
    acc.latency_s += r.latency_s;
  }
  for (auto& p : acc.probs) p /= draws_;
  return acc;
}

InputRandomization::InputRandomization(BackendPtr inner, int from_size, int to_size,
                                       std::uint64_t seed)
    : inner_(std::move(inner)), from_size_(from_size), to_size_(to_size), seed_(seed) {
  if (!inner_) throw ConfigError("input randomization: no inner backend");
  if (from_size_ < 1 || to_size_ < from_size_) {
    throw ConfigError("input randomization: need 1 <= from_size <= to_size");
  }
}

std::string InputRandomization::describe() const {
  return "input-randomization(" + std::to_string(from_size_) + "->" + std::to_string(to_size_) +
         ")>" + inner_->describe();
}

ImageBuffer InputRandomization::randomize(const ImageBuffer& img, int* side, int* left,
                                          int* top) const {
  img.require_space(ColorSpace::RGB, "InputRandomization");
  std::mt19937_64 rng(seed_ ^ image_hash(img));
  const int r = std::uniform_int_distribution<int>(from_size_, to_size_)(rng);
  const int x0 = std::uniform_int_distribution<int>(0, to_size_ - r)(rng);
  const int y0 = std::uniform_int_distribution<int>(0, to_size_ - r)(rng);
  const ImageBuffer small = resize(img, r, r);
  ImageBuffer out(to_size_, to_size_, ColorSpace::RGB, 0.0f);
  for (int y = 0; y < r; ++y) {
    for (int x = 0; x < r; ++x) out.set_pixel(x0 + x, y0 + y, small.pixel(x, y));
  }
  if (side) *side = r;
  if (left) *left = x0;
  if (top) *top = y0;
  return out;
}

OracleResponse InputRandomization::query(Task task, const ImageBuffer& img) {
  int side = 0, left = 0, top = 0;
  const ImageBuffer in = randomize(img, &side, &left, &top);
  OracleResponse r = inner_->query(task, in);
  const double sx = static_cast<double>(img.width()) / side;
  const double sy = static_cast<double>(img.height()) / side;
  for (auto& d : r.detections) {
    d.bbox = {(d.bbox.x_min - left) * sx, (d.bbox.y_min - top) * sy, (d.bbox.x_max - left) * sx,
              (d.bbox.y_max - top) * sy};
  }
  return r;
}

}  // namespace itpatch
