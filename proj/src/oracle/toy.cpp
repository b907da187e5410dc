// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "itpatch/error.hpp"
#include "itpatch/kernels.hpp"
#include "itpatch/objectives.hpp"
#include "itpatch/oracle.hpp"

namespace itpatch {

void ToyClassifierWeights::validate() const {
  if (input_size < 1) throw ConfigError("toy weights: input_size must be positive");
  if (classes.size() < 2) throw ConfigError("toy weights: need at least two classes");
  if (templates.size() != classes.size()) throw ConfigError("toy weights: one template per class");
  const std::size_t n = static_cast<std::size_t>(input_size) * input_size * 3;
  for (const auto& t : templates) {
    if (t.size() != n) throw ConfigError("toy weights: template size does not match input_size");
  }
  if (!(temperature > 0) || !std::isfinite(temperature)) {
    throw ConfigError("toy weights: temperature must be positive");
  }
}

ToyClassifierWeights ToyClassifierWeights::from_images(const std::vector<std::string>& names,
                                                       const std::vector<ImageBuffer>& images,
                                                       int input_size, double temperature) {
  ToyClassifierWeights w;
  w.input_size = input_size;
  w.classes = names;
  w.temperature = temperature;
  for (const auto& img : images) {
    const ImageBuffer r = resize(img, input_size, input_size);
    w.templates.emplace_back(r.data().begin(), r.data().end());
  }
  w.validate();
  return w;
}

void to_json(nlohmann::json& j, const ToyClassifierWeights& w) {
  j = nlohmann::ordered_json{{"input_size", w.input_size},
                             {"classes", w.classes},
                             {"templates", w.templates},
                             {"temperature", w.temperature}};
}

void from_json(const nlohmann::json& j, ToyClassifierWeights& w) {
  try {
    for (const auto& [key, _] : j.items()) {
      if (key != "input_size" && key != "classes" && key != "templates" && key != "temperature") {
        throw ConfigError("toy weights: unknown key '" + key + "'");
      }
    }
    w.input_size = j.at("input_size").get<int>();
    w.classes = j.at("classes").get<std::vector<std::string>>();
    w.templates = j.at("templates").get<std::vector<std::vector<float>>>();
    w.temperature = j.value("temperature", 0.05);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("toy weights: ") + e.what());
  }
  w.validate();
}

ToyClassifierWeights ToyClassifierWeights::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return j.get<ToyClassifierWeights>();
}

void ToyClassifierWeights::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << nlohmann::json(*this).dump() << '\n';
  if (!out) throw IoError("write failed: " + path);
}

ToyClassifier::ToyClassifier(ToyClassifierWeights weights) : weights_(std::move(weights)) {
  weights_.validate();
}

std::vector<double> ToyClassifier::probabilities(const ImageBuffer& img) const {
  img.require_space(ColorSpace::RGB, "ToyClassifier");
  if (img.empty()) throw ContractViolation("ToyClassifier: empty image");
  const int s = weights_.input_size;
  const ImageBuffer in = (img.width() == s && img.height() == s) ? img : resize(img, s, s);
  const std::size_t k = weights_.templates.size();
  const double n = static_cast<double>(in.data().size());
  std::vector<double> logits(k);
  for (std::size_t c = 0; c < k; ++c) {
    const double d = std::sqrt(kernels::squared_distance(in.data(), weights_.templates[c]) / n);
    logits[c] = -d / weights_.temperature;
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0;
  for (auto& l : logits) {
    l = std::exp(l - top);
    sum += l;
  }
  for (auto& l : logits) l /= sum;
  return logits;
}

OracleResponse ToyClassifier::query(Task task, const ImageBuffer& img) {
  if (task != Task::Classify) throw ContractViolation("toy-classifier only answers classify");
  OracleResponse r;
  r.task = Task::Classify;
  r.probs = probabilities(img);
  return r;
}

void ToyDetectorConfig::validate() const {
  if (palette.empty()) throw ConfigError("toy detector: empty palette");
  if (min_window < 1) throw ConfigError("toy detector: min_window must be positive");
  if (stride_divisor < 1) throw ConfigError("toy detector: stride_divisor must be positive");
  for (double v : {object_threshold, nms_iou}) {
    if (!(v >= 0 && v <= 1)) throw ConfigError("toy detector: thresholds must lie in [0,1]");
  }
}

ToyDetector::ToyDetector(ToyClassifierWeights weights, ToyDetectorConfig cfg)
    : classifier_(std::move(weights)), cfg_(std::move(cfg)) {
  cfg_.validate();
}

namespace {

struct Window {
  int x, y, size;
  long count;
  double fraction;
};

// Summed-area table with a zero first row and column.
class Integral {
 public:
  explicit Integral(const Mask& m) : w_(m.width()), sat_(static_cast<std::size_t>(m.width() + 1) * (m.height() + 1), 0) {
    for (int y = 0; y < m.height(); ++y) {
      long run = 0;
      for (int x = 0; x < w_; ++x) {
        run += m(x, y);
        at(x + 1, y + 1) = at(x + 1, y) + run;
      }
    }
  }
  long sum(int x, int y, int size) const {
    return at(x + size, y + size) - at(x, y + size) - at(x + size, y) + at(x, y);
  }

 private:
  long& at(int x, int y) { return sat_[static_cast<std::size_t>(y) * (w_ + 1) + x]; }
  long at(int x, int y) const { return sat_[static_cast<std::size_t>(y) * (w_ + 1) + x]; }
  int w_;
  std::vector<long> sat_;
};

}  // namespace

std::vector<Detection> ToyDetector::detections(const ImageBuffer& img) const {
  img.require_space(ColorSpace::RGB, "ToyDetector");
  const int w = img.width(), h = img.height();
  const Mask palette = raw_color_mask(img, cfg_.palette);
  const Integral sat(palette);

  std::vector<int> sizes;
  const int limit = std::min(w, h);
  for (int s = cfg_.min_window; s < limit; s += std::max(1, s / cfg_.stride_divisor)) sizes.push_back(s);
  if (limit >= 1 && (sizes.empty() || sizes.back() < limit)) sizes.push_back(limit);

  std::vector<Window> windows;
  for (int size : sizes) {
    const int stride = std::max(1, size / cfg_.stride_divisor);
    std::vector<int> xs, ys;
    for (int x = 0; x + size <= w; x += stride) xs.push_back(x);
    if (xs.back() != w - size) xs.push_back(w - size);
    for (int y = 0; y + size <= h; y += stride) ys.push_back(y);
    if (ys.back() != h - size) ys.push_back(h - size);
    for (int y : ys) {
      for (int x : xs) {
        const long c = sat.sum(x, y, size);
        const double f = static_cast<double>(c) / (static_cast<double>(size) * size);
        if (c > 0 && f >= cfg_.object_threshold) windows.push_back({x, y, size, c, f});
      }
    }
  }
  // Most palette pixels first, then the tighter window, then raster order.
  std::stable_sort(windows.begin(), windows.end(), [](const Window& a, const Window& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.fraction > b.fraction;
  });

  std::vector<Detection> kept;
  Mask claimed(w, h);
  Integral claimed_sat(claimed);
  for (const auto& win : windows) {
    const BBox box{static_cast<double>(win.x), static_cast<double>(win.y),
                   static_cast<double>(win.x + win.size), static_cast<double>(win.y + win.size)};
    bool suppressed = false;
    for (const auto& d : kept) {
      if (iou(d.bbox, box) > cfg_.nms_iou) {
        suppressed = true;
        break;
      }
    }
    if (suppressed) continue;
    const long fresh = win.count - claimed_sat.sum(win.x, win.y, win.size);
    if (static_cast<double>(fresh) < cfg_.object_threshold * win.size * win.size) continue;
    Detection d;
    d.bbox = box;
    d.object_score = win.fraction;
    kept.push_back(std::move(d));
    for (int y = win.y; y < win.y + win.size; ++y) {
      for (int x = win.x; x < win.x + win.size; ++x) {
        if (palette(x, y)) claimed.set(x, y, true);
      }
    }
    claimed_sat = Integral(claimed);
  }
  for (auto& d : kept) {
    d.class_scores = classifier_.probabilities(crop(img, static_cast<int>(d.bbox.x_min),
                                                    static_cast<int>(d.bbox.y_min),
                                                    static_cast<int>(d.bbox.x_max),
                                                    static_cast<int>(d.bbox.y_max)));
  }
  return kept;
}

OracleResponse ToyDetector::query(Task task, const ImageBuffer& img) {
  if (task != Task::Detect) throw ContractViolation("toy-detector only answers detect");
  OracleResponse r;
  r.task = Task::Detect;
  r.detections = detections(img);
  return r;
}

}  // namespace itpatch
