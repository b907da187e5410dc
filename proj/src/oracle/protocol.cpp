// SPDX-License-Identifier: Apache-2.0

#include <openssl/evp.h>

#include "itpatch/error.hpp"
#include "itpatch/oracle.hpp"

namespace itpatch {

using nlohmann::ordered_json;

OracleRequest OracleRequest::from_image(std::string id, Task task, const ImageBuffer& img) {
  img.require_space(ColorSpace::RGB, "OracleRequest");
  OracleRequest r;
  r.id = std::move(id);
  r.task = task;
  r.width = img.width();
  r.height = img.height();
  r.pixels.reserve(img.data().size());
  for (float v : img.data()) r.pixels.push_back(to_byte(v));
  return r;
}

ImageBuffer OracleRequest::image() const {
  if (width < 1 || height < 1 ||
      pixels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3) {
    throw DecodeError("pixel payload does not match width x height x 3");
  }
  std::vector<float> data(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) data[i] = from_byte(pixels[i]);
  return ImageBuffer(width, height, ColorSpace::RGB, std::move(data));
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw DecodeError("base64 length is not a multiple of 4");
  for (char c : text) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '/' || c == '=')) {
      throw DecodeError("invalid base64 character");
    }
  }
  std::vector<std::uint8_t> out(text.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw DecodeError("invalid base64 payload");
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string encode_request(const OracleRequest& r) {
  ordered_json j;
  j["id"] = r.id;
  j["task"] = to_string(r.task);
  j["width"] = r.width;
  j["height"] = r.height;
  j["pixels"] = base64_encode(r.pixels);
  return j.dump();
}

OracleRequest decode_request(const std::string& line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("request is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw DecodeError("request is not an object");
  for (const char* key : {"id", "task", "width", "height", "pixels"}) {
    if (!j.contains(key)) throw DecodeError(std::string("request lacks '") + key + "'");
  }
  if (!j["id"].is_string() || !j["task"].is_string() || !j["width"].is_number_integer() ||
      !j["height"].is_number_integer() || !j["pixels"].is_string()) {
    throw DecodeError("request field has the wrong type");
  }
  OracleRequest r;
  r.id = j["id"].get<std::string>();
  try {
    r.task = parse_task(j["task"].get<std::string>());
  } catch (const ValidationError& e) {
    throw DecodeError(e.what());
  }
  r.width = j["width"].get<int>();
  r.height = j["height"].get<int>();
  r.pixels = base64_decode(j["pixels"].get<std::string>());
  r.image();  // size check
  return r;
}

std::string encode_response(const OracleResponse& r) {
  ordered_json j;
  j["id"] = r.id;
  if (r.task == Task::Classify) {
    j["probs"] = r.probs;
  } else {
    ordered_json dets = ordered_json::array();
    for (const auto& d : r.detections) {
      ordered_json o;
      o["bbox"] = {d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max};
      o["object_score"] = d.object_score;
      o["class_scores"] = d.class_scores;
      dets.push_back(std::move(o));
    }
    j["detections"] = std::move(dets);
  }
  return j.dump();
}

std::string encode_error(const std::string& id, const std::string& message) {
  ordered_json j;
  j["id"] = id;
  j["error"] = message;
  return j.dump();
}

namespace {

std::vector<double> number_array(const ordered_json& j, const char* what) {
  if (!j.is_array()) throw MalformedResponse(std::string(what) + " is not an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw MalformedResponse(std::string(what) + " holds a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

OracleResponse decode_response(const std::string& line, Task task,
                               const std::string* expected_id) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedResponse(std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw MalformedResponse("response is not an object");
  if (!j.contains("id") || !j["id"].is_string()) throw MalformedResponse("response lacks a string id");
  OracleResponse r;
  r.id = j["id"].get<std::string>();
  r.task = task;
  if (expected_id && r.id != *expected_id) {
    throw IdMismatch("response id '" + r.id + "' does not match request '" + *expected_id + "'");
  }
  if (j.contains("error")) {
    const auto& e = j["error"];
    throw RemoteError("oracle error for id " + r.id + ": " + (e.is_string() ? e.get<std::string>() : e.dump()));
  }
  if (task == Task::Classify) {
    if (!j.contains("probs")) throw MalformedResponse("classify response lacks probs");
    r.probs = number_array(j["probs"], "probs");
  } else {
    if (!j.contains("detections") || !j["detections"].is_array()) {
      throw MalformedResponse("detect response lacks a detections array");
    }
    for (const auto& o : j["detections"]) {
      if (!o.is_object() || !o.contains("bbox") || !o.contains("object_score") ||
          !o.contains("class_scores") || !o["object_score"].is_number()) {
        throw MalformedResponse("detection record is incomplete");
      }
      const auto b = number_array(o["bbox"], "bbox");
      if (b.size() != 4) throw MalformedResponse("bbox needs four numbers");
      Detection d;
      d.bbox = {b[0], b[1], b[2], b[3]};
      d.object_score = o["object_score"].get<double>();
      d.class_scores = number_array(o["class_scores"], "class_scores");
      r.detections.push_back(std::move(d));
    }
  }
  return r;
}

std::string handle_request_line(Backend& backend, const std::string& line) {
  OracleRequest req;
  try {
    req = decode_request(line);
  } catch (const std::exception& e) {
    ordered_json j;
    j["id"] = nullptr;
    try {
      const auto probe = ordered_json::parse(line);
      if (probe.is_object() && probe.contains("id") && probe["id"].is_string()) j["id"] = probe["id"];
    } catch (const nlohmann::json::exception&) {
    }
    j["error"] = e.what();
    return j.dump();
  }
  try {
    if (!backend.supports(req.task)) {
      return encode_error(req.id, std::string("task not supported: ") + to_string(req.task));
    }
    OracleResponse r = backend.query(req.task, req.image());
    r.id = req.id;
    r.task = req.task;
    validate_response(r, backend.classes());
    return encode_response(r);
  } catch (const std::exception& e) {
    return encode_error(req.id, e.what());
  }
}

}  // namespace itpatch
