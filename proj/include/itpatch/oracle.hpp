// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "itpatch/image.hpp"
#include "itpatch/localization.hpp"
#include "itpatch/oracle_types.hpp"
#include "json.hpp"

namespace itpatch {

// Black-box model access. Implementations must accept concurrent queries.
class Backend {
 public:
  virtual ~Backend() = default;

  // Throws ContractViolation when the task is unsupported.
  virtual OracleResponse query(Task task, const ImageBuffer& img) = 0;
  virtual bool supports(Task task) const = 0;
  // Class count k, or 0 when unknown.
  virtual std::size_t classes() const = 0;
  virtual std::string describe() const = 0;

  OracleResponse classify(const ImageBuffer& img) { return query(Task::Classify, img); }
  OracleResponse detect(const ImageBuffer& img) { return query(Task::Detect, img); }
  int predict(const ImageBuffer& img) { return classify(img).argmax(); }
};

using BackendPtr = std::shared_ptr<Backend>;

struct ToyClassifierWeights {
  int input_size = 32;
  std::vector<std::string> classes;
  // One row-major RGB raster in [0,1] per class, input_size^2 * 3 values.
  std::vector<std::vector<float>> templates;
  double temperature = 0.05;

  // Throws ConfigError.
  void validate() const;

  // Templates from clean class exemplars (resized to input_size).
  static ToyClassifierWeights from_images(const std::vector<std::string>& names,
                                          const std::vector<ImageBuffer>& images,
                                          int input_size = 32, double temperature = 0.05);
  static ToyClassifierWeights load(const std::string& path);
  void save(const std::string& path) const;
};

void to_json(nlohmann::json& j, const ToyClassifierWeights& w);
void from_json(const nlohmann::json& j, ToyClassifierWeights& w);

// softmax(-d_k / T) where d_k is the RMS distance between the resized input
// and template k.
class ToyClassifier : public Backend {
 public:
  explicit ToyClassifier(ToyClassifierWeights weights);

  OracleResponse query(Task task, const ImageBuffer& img) override;
  bool supports(Task task) const override { return task == Task::Classify; }
  std::size_t classes() const override { return weights_.classes.size(); }
  std::string describe() const override { return "toy-classifier"; }

  std::vector<double> probabilities(const ImageBuffer& img) const;
  const ToyClassifierWeights& weights() const { return weights_; }

 private:
  ToyClassifierWeights weights_;
};

struct ToyDetectorConfig {
  std::vector<HsvRange> palette = default_hsv_ranges();
  int min_window = 8;
  // Stride = max(1, size / stride_divisor); window sizes advance by the
  // stride of the current size too.
  int stride_divisor = 8;
  double object_threshold = 0.5;
  double nms_iou = 0.5;

  void validate() const;
};

// Sliding-window palette detector. object_score is the palette fraction of
// the window; class scores come from the classifier on the window crop.
// Windows are taken greedily by palette count (then fraction). A window is
// dropped when its IoU with a kept one exceeds nms_iou, or when the palette
// pixels not already inside kept windows fall below object_threshold of its
// area.
class ToyDetector : public Backend {
 public:
  ToyDetector(ToyClassifierWeights weights, ToyDetectorConfig cfg = {});

  OracleResponse query(Task task, const ImageBuffer& img) override;
  bool supports(Task task) const override { return task == Task::Detect; }
  std::size_t classes() const override { return classifier_.classes(); }
  std::string describe() const override { return "toy-detector"; }

  std::vector<Detection> detections(const ImageBuffer& img) const;

 private:
  ToyClassifier classifier_;
  ToyDetectorConfig cfg_;
};

// Adds N(0, sigma) noise per channel value ([0,1] scale, clamped) and averages
// probabilities over `draws` noisy copies. Detection queries use one draw.
// Noise is seeded from `seed` and the image content.
class GaussianSmoothing : public Backend {
 public:
  GaussianSmoothing(BackendPtr inner, double sigma, int draws = 8, std::uint64_t seed = 0);

  OracleResponse query(Task task, const ImageBuffer& img) override;
  bool supports(Task task) const override { return inner_->supports(task); }
  std::size_t classes() const override { return inner_->classes(); }
  std::string describe() const override;

 private:
  BackendPtr inner_;
  double sigma_;
  int draws_;
  std::uint64_t seed_;
};

// Resizes to a random side r in [from_size, to_size], then zero-pads at a
// random offset to to_size x to_size. Detection boxes are mapped back to the
// input frame. Seeded from `seed` and the image content.
class InputRandomization : public Backend {
 public:
  InputRandomization(BackendPtr inner, int from_size = 32, int to_size = 36,
                     std::uint64_t seed = 0);

  OracleResponse query(Task task, const ImageBuffer& img) override;
  bool supports(Task task) const override { return inner_->supports(task); }
  std::size_t classes() const override { return inner_->classes(); }
  std::string describe() const override;

  // The randomized image handed to the inner backend; offset/side out-params
  // describe the placement.
  ImageBuffer randomize(const ImageBuffer& img, int* side = nullptr, int* left = nullptr,
                        int* top = nullptr) const;

 private:
  BackendPtr inner_;
  int from_size_, to_size_;
  std::uint64_t seed_;
};

// FNV-1a over the 8-bit quantized pixels and the dimensions.
std::uint64_t image_hash(const ImageBuffer& img);

// ---- Wire protocol ----------------------------------------------------------

struct OracleRequest {
  std::string id;
  Task task = Task::Classify;
  int width = 0;
  int height = 0;
  // Row-major 8-bit RGB, width * height * 3 bytes.
  std::vector<std::uint8_t> pixels;

  static OracleRequest from_image(std::string id, Task task, const ImageBuffer& img);
  ImageBuffer image() const;
  bool operator==(const OracleRequest&) const = default;
};

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
// Throws DecodeError on invalid input.
std::vector<std::uint8_t> base64_decode(const std::string& text);

// One JSON record without the trailing newline.
std::string encode_request(const OracleRequest& r);
// Throws DecodeError on schema violations.
OracleRequest decode_request(const std::string& line);

std::string encode_response(const OracleResponse& r);
std::string encode_error(const std::string& id, const std::string& message);
// Parses a response to a request of kind `task`. Checks, in order: JSON
// shape and id (MalformedResponse), id == *expected_id when given
// (IdMismatch), error records (RemoteError), payload schema
// (MalformedResponse).
OracleResponse decode_response(const std::string& line, Task task,
                               const std::string* expected_id = nullptr);

// Answers one request line with one response line (server side). Failures
// become error records; this never throws.
std::string handle_request_line(Backend& backend, const std::string& line);

// Byte stream carrying newline-terminated records.
class Transport {
 public:
  virtual ~Transport() = default;
  // Throws BackendUnavailable.
  virtual void write_line(const std::string& line) = 0;
  // Throws OracleTimeout when the deadline passes and BackendUnavailable on
  // EOF or I/O errors.
  virtual std::string read_line(std::chrono::steady_clock::time_point deadline) = 0;
};

// "tcp://host:port" or "host:port".
std::unique_ptr<Transport> connect_tcp(const std::string& address);
// Runs `command` through /bin/sh and talks over its stdin/stdout.
std::unique_ptr<Transport> spawn_process(const std::string& command);
// Dispatches on the endpoint syntax ("exec:CMD", otherwise TCP).
std::unique_ptr<Transport> open_transport(const std::string& endpoint);

struct ClientConfig {
  std::chrono::milliseconds timeout{10000};
  // Expected class count; 0 accepts any k.
  std::size_t classes = 0;
  // Tasks the remote model serves.
  bool classify = true;
  bool detect = true;
};

// Backend speaking the wire protocol. Requests are serialized internally; a
// timed-out or broken connection is reopened on the next query.
class ProtocolClient : public Backend {
 public:
  ProtocolClient(std::string endpoint, ClientConfig cfg = {});
  // Uses an already open transport (never reopened).
  ProtocolClient(std::unique_ptr<Transport> transport, ClientConfig cfg = {});

  OracleResponse query(Task task, const ImageBuffer& img) override;
  bool supports(Task task) const override;
  std::size_t classes() const override { return cfg_.classes; }
  std::string describe() const override { return "external:" + endpoint_; }

 private:
  std::string endpoint_;
  ClientConfig cfg_;
  std::mutex mu_;
  std::unique_ptr<Transport> transport_;
  std::uint64_t next_id_ = 1;
};

}  // namespace itpatch
