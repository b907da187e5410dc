#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include "doctest.h"
#include "itpatch/error.hpp"
#include "itpatch/objectives.hpp"
#include "itpatch/oracle.hpp"
#include "itpatch/synth.hpp"

using namespace itpatch;

namespace {

ImageBuffer random_image(std::mt19937& rng, int w, int h) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ImageBuffer img(w, h);
  for (float& v : img.data()) v = u(rng);
  return img;
}

// Three templates at equal distance from mid-gray: each differs from 0.5 by
// +-0.25 in a disjoint third of the values.
ToyClassifierWeights equidistant_weights() {
  ToyClassifierWeights w;
  w.input_size = 4;
  w.classes = {"a", "b", "c"};
  const std::size_t n = 4 * 4 * 3;
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<float> t(n, 0.5f);
    for (std::size_t i = k * n / 3; i < (k + 1) * n / 3; ++i) t[i] = (i % 2) ? 0.75f : 0.25f;
    w.templates.push_back(t);
  }
  return w;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

// Serves one backend over a loopback TCP socket, a thread per connection.
class LoopbackServer {
 public:
  explicit LoopbackServer(Backend& backend) : backend_(backend) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    REQUIRE(::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    REQUIRE(::listen(fd_, 4) == 0);
    thread_ = std::thread([this] { run(); });
  }
  ~LoopbackServer() {
    stop_ = true;
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    thread_.join();
    {
      std::lock_guard lock(mu_);
      for (int c : clients_) ::shutdown(c, SHUT_RDWR);
    }
    for (auto& t : workers_) t.join();
  }
  std::string address() const { return "tcp://127.0.0.1:" + std::to_string(port_); }

 private:
  void run() {
    while (!stop_) {
      const int c = ::accept(fd_, nullptr, nullptr);
      if (c < 0) return;
      std::lock_guard lock(mu_);
      clients_.push_back(c);
      workers_.emplace_back([this, c] { serve(c); });
    }
  }

  void serve(int c) {
    {
      std::string buf;
      char chunk[4096];
      for (;;) {
        const ssize_t n = ::read(c, chunk, sizeof chunk);
        if (n <= 0) break;
        buf.append(chunk, static_cast<std::size_t>(n));
        for (auto nl = buf.find('\n'); nl != std::string::npos; nl = buf.find('\n')) {
          const std::string out = handle_request_line(backend_, buf.substr(0, nl)) + "\n";
          buf.erase(0, nl + 1);
          if (::write(c, out.data(), out.size()) < 0) break;
        }
      }
      ::close(c);
    }
  }

  Backend& backend_;
  int fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stop_{false};
  std::thread thread_;
  std::mutex mu_;
  std::vector<int> clients_;
  std::vector<std::thread> workers_;
};

}  // namespace

TEST_CASE("toy classifier") {
  const auto w = toy_weights();
  ToyClassifier clf(w);
  CHECK(clf.classes() == 3);
  for (int label = 0; label < 3; ++label) {
    const auto r = clf.classify(draw_sign(toy_exemplar_spec(label)).image);
    CHECK(r.argmax() == label);
    CHECK(r.probs[static_cast<std::size_t>(label)] > 1.0 / 3);
  }

  ToyClassifier eq(equidistant_weights());
  const auto r = eq.classify(ImageBuffer::filled(9, 7, {0.5f, 0.5f, 0.5f}));
  for (double p : r.probs) CHECK(p == doctest::Approx(1.0 / 3).epsilon(0).scale(0).epsilon(1e-6));
  CHECK(r.argmax() == 0);

  // Hand computation: RMS distances to two templates on a 1x1 input.
  ToyClassifierWeights tiny;
  tiny.input_size = 1;
  tiny.classes = {"dark", "light"};
  tiny.templates = {{0, 0, 0}, {1, 1, 1}};
  tiny.temperature = 0.5;
  const auto p = ToyClassifier(tiny).probabilities(ImageBuffer::filled(1, 1, {0.25f, 0.25f, 0.25f}));
  const double e0 = std::exp(-0.25 / 0.5), e1 = std::exp(-0.75 / 0.5);
  CHECK(p[0] == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-9));

  std::mt19937 rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto q = clf.classify(random_image(rng, 40, 24));
    double s = 0;
    for (double v : q.probs) s += v;
    CHECK(std::fabs(s - 1) <= 1e-4);
  }

  // A one-pixel change moves the probabilities only slightly.
  ImageBuffer img = draw_sign(toy_exemplar_spec(0)).image;
  const auto before = clf.probabilities(img);
  img.set_pixel(16, 16, {0.2f, 0.9f, 0.2f});
  const auto after = clf.probabilities(img);
  for (std::size_t k = 0; k < 3; ++k) CHECK(std::fabs(after[k] - before[k]) < 0.02);

  CHECK_THROWS_AS(clf.detect(img), ContractViolation);
  CHECK(clf.predict(draw_sign(toy_exemplar_spec(2)).image) == 2);
}

TEST_CASE("toy weights validation and json") {
  auto w = toy_weights();
  const nlohmann::json j = w;
  CHECK(j.at("input_size") == 32);
  CHECK(j.at("classes").size() == 3);
  CHECK(j.get<ToyClassifierWeights>().templates == w.templates);
  auto bad = j;
  bad["extra"] = 1;
  CHECK_THROWS_AS(bad.get<ToyClassifierWeights>(), ConfigError);
  w.classes.resize(1);
  w.templates.resize(1);
  CHECK_THROWS_AS(w.validate(), ConfigError);
  w = toy_weights();
  w.templates[1].pop_back();
  CHECK_THROWS_AS(w.validate(), ConfigError);
  w = toy_weights();
  w.temperature = 0;
  CHECK_THROWS_AS(w.validate(), ConfigError);
}

TEST_CASE("toy detector") {
  ToyDetector det(toy_weights());
  CHECK(det.detect(ImageBuffer::filled(64, 64, {0.5f, 0.5f, 0.5f})).detections.empty());

  SUBCASE("disk filling a window") {
    SynthSpec s = toy_exemplar_spec(0, 64);
    s.cx = s.cy = 31.5;
    s.half = 16;
    const auto item = draw_sign(s);
    const auto dets = det.detect(item.image).detections;
    REQUIRE(dets.size() == 1);
    // A disk inscribed in a square covers pi/4 of it.
    CHECK(dets[0].object_score >= 0.7);
    CHECK(dets[0].object_score <= M_PI / 4 + 0.02);
    const BBox disk{s.cx - s.half, s.cy - s.half, s.cx + s.half, s.cy + s.half};
    CHECK(iou(dets[0].bbox, disk) >= 0.8);
    CHECK(dets[0].class_scores.size() == 3);
    validate_response(det.detect(item.image), 3);
  }
  SUBCASE("two disjoint disks") {
    SynthSpec a = toy_exemplar_spec(0, 64);
    a.half = 9;
    a.cx = 14;
    a.cy = 20;
    auto img = draw_sign(a).image;
    SynthSpec b = a;
    b.cx = 48;
    b.cy = 44;
    const auto second = draw_sign(b);
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        if (second.truth(x, y)) img.set_pixel(x, y, second.image.pixel(x, y));
      }
    }
    const auto dets = det.detect(img).detections;
    REQUIRE(dets.size() == 2);
    const BBox ba{a.cx - 9, a.cy - 9, a.cx + 9, a.cy + 9};
    const BBox bb{b.cx - 9, b.cy - 9, b.cx + 9, b.cy + 9};
    CHECK(std::max(iou(dets[0].bbox, ba), iou(dets[1].bbox, ba)) >= 0.6);
    CHECK(std::max(iou(dets[0].bbox, bb), iou(dets[1].bbox, bb)) >= 0.6);
  }
  CHECK_THROWS_AS(det.classify(ImageBuffer(8, 8)), ContractViolation);
}

TEST_CASE("gaussian smoothing wrapper") {
  auto base = std::make_shared<ToyClassifier>(toy_weights());
  const ImageBuffer img = draw_sign(toy_exemplar_spec(1)).image;
  GaussianSmoothing zero(base, 0.0);
  CHECK(zero.classify(img).probs == base->classify(img).probs);

  GaussianSmoothing smooth(base, 0.5, 8, 11);
  const auto a = smooth.classify(img);
  const auto b = smooth.classify(img);
  CHECK(a.probs == b.probs);
  CHECK(a.probs != base->classify(img).probs);
  validate_response(a, 3);
  std::mt19937 rng(5);
  for (double sigma : {0.01, 0.1, 0.5, 2.0}) {
    GaussianSmoothing g(base, sigma, 3, 1);
    for (int i = 0; i < 10; ++i) validate_response(g.classify(random_image(rng, 16, 16)), 3);
  }
  CHECK_THROWS_AS(GaussianSmoothing(base, -0.1), ConfigError);
  CHECK_THROWS_AS(GaussianSmoothing(base, 0.5, 0), ConfigError);
}

TEST_CASE("input randomization wrapper") {
  auto base = std::make_shared<ToyClassifier>(toy_weights());
  const ImageBuffer img = draw_sign(toy_exemplar_spec(2)).image;
  InputRandomization same(base, 32, 32);
  CHECK(same.randomize(img) == img);
  CHECK(same.classify(img).probs == base->classify(img).probs);

  InputRandomization rnd(base);
  int side = 0, left = 0, top = 0;
  const ImageBuffer out = rnd.randomize(img, &side, &left, &top);
  CHECK(out.width() == 36);
  CHECK(out.height() == 36);
  CHECK(side >= 32);
  CHECK(side <= 36);
  for (int y = 0; y < 36; ++y) {
    for (int x = 0; x < 36; ++x) {
      const bool pad = x < left || y < top || x >= left + side || y >= top + side;
      if (pad) CHECK(out.pixel(x, y) == std::array<float, 3>{0, 0, 0});
    }
  }
  CHECK(rnd.classify(img).probs == rnd.classify(img).probs);
  validate_response(rnd.classify(img), 3);

  // Offsets and sides over many images stay within the declared ranges.
  std::mt19937 rng(8);
  std::set<int> sides;
  for (int i = 0; i < 60; ++i) {
    rnd.randomize(random_image(rng, 32, 32), &side, &left, &top);
    sides.insert(side);
    CHECK(left + side <= 36);
    CHECK(top + side <= 36);
  }
  CHECK(sides.size() > 1);
  CHECK_THROWS_AS(InputRandomization(base, 36, 32), ConfigError);

  // Detection boxes are mapped back into the input frame.
  auto det = std::make_shared<ToyDetector>(toy_weights());
  InputRandomization rdet(det, 64, 72, 4);
  SynthSpec s = toy_exemplar_spec(0, 64);
  s.half = 16;
  const auto d = rdet.detect(draw_sign(s).image).detections;
  REQUIRE(d.size() == 1);
  CHECK(iou(d[0].bbox, BBox{s.cx - 16, s.cy - 16, s.cx + 16, s.cy + 16}) >= 0.6);
}

TEST_CASE("wrappers compose") {
  auto base = std::make_shared<ToyClassifier>(toy_weights());
  auto inner = std::make_shared<InputRandomization>(base);
  GaussianSmoothing outer(inner, 0.1, 4, 2);
  CHECK(outer.describe() == "gaussian-smoothing(0.100000)>input-randomization(32->36)>toy-classifier");
  validate_response(outer.classify(draw_sign(toy_exemplar_spec(0)).image), 3);
}

TEST_CASE("base64") {
  CHECK(base64_encode({}) == "");
  CHECK(base64_encode({'f'}) == "Zg==");
  CHECK(base64_encode({'f', 'o'}) == "Zm8=");
  CHECK(base64_encode({'f', 'o', 'o', 'b', 'a', 'r'}) == "Zm9vYmFy");
  CHECK(base64_decode("Zm8=") == std::vector<std::uint8_t>{'f', 'o'});
  CHECK(base64_decode("Zg==") == std::vector<std::uint8_t>{'f'});
  std::mt19937 rng(1);
  for (int n = 0; n < 50; ++n) {
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(n));
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
    CHECK(base64_decode(base64_encode(bytes)) == bytes);
  }
  CHECK_THROWS_AS(base64_decode("abc"), DecodeError);
  CHECK_THROWS_AS(base64_decode("ab$="), DecodeError);
}

TEST_CASE("golden transcript") {
  const auto lines = read_lines(ITPATCH_FIXTURE_DIR "/golden_transcript.jsonl");
  REQUIRE(lines.size() == 8);
  for (std::size_t i = 0; i < lines.size(); i += 2) {
    const OracleRequest req = decode_request(lines[i]);
    CHECK(encode_request(req) == lines[i]);
    const std::string& resp = lines[i + 1];
    if (resp.find("\"error\"") != std::string::npos) {
      CHECK_THROWS_AS(decode_response(resp, req.task, &req.id), RemoteError);
      CHECK(encode_error(req.id, "model not loaded") == resp);
      continue;
    }
    const OracleResponse r = decode_response(resp, req.task, &req.id);
    CHECK(encode_response(r) == resp);
  }
  const OracleRequest first = decode_request(lines[0]);
  CHECK(first.width == 2);
  CHECK(first.pixels == std::vector<std::uint8_t>{255, 0, 0, 0, 255, 0});
  const ImageBuffer img = first.image();
  CHECK(img.pixel(0, 0) == std::array<float, 3>{1, 0, 0});
  CHECK(encode_request(OracleRequest::from_image("1", Task::Classify, img)) == lines[0]);
  const auto det = decode_response(lines[3], Task::Detect);
  REQUIRE(det.detections.size() == 1);
  CHECK(det.detections[0].bbox == BBox{0, 0, 2, 1});
  CHECK(det.detections[0].class_scores == std::vector<double>{0.125, 0.625, 0.25});
}

TEST_CASE("protocol decoding errors") {
  const std::string id = "7";
  CHECK_THROWS_AS(decode_response("not json", Task::Classify, &id), MalformedResponse);
  CHECK_THROWS_AS(decode_response("[1,2]", Task::Classify, &id), MalformedResponse);
  CHECK_THROWS_AS(decode_response(R"({"probs":[1]})", Task::Classify, &id), MalformedResponse);
  CHECK_THROWS_AS(decode_response(R"({"id":"8","probs":[1]})", Task::Classify, &id), IdMismatch);
  CHECK_THROWS_AS(decode_response(R"({"id":"7","error":"x"})", Task::Classify, &id), RemoteError);
  CHECK_THROWS_AS(decode_response(R"({"id":"7"})", Task::Classify, &id), MalformedResponse);
  CHECK_THROWS_AS(decode_response(R"({"id":"7","probs":["a"]})", Task::Classify, &id), MalformedResponse);
  CHECK_THROWS_AS(decode_response(R"({"id":"7","detections":[{"bbox":[1,2,3]}]})", Task::Detect, &id),
                  MalformedResponse);
  CHECK_THROWS_AS(decode_request(R"({"id":"1","task":"classify","width":2,"height":2,"pixels":"/wAAAP8A"})"),
                  DecodeError);
  CHECK_THROWS_AS(decode_request(R"({"id":"1","task":"segment","width":2,"height":1,"pixels":"/wAAAP8A"})"),
                  DecodeError);
}

TEST_CASE("request handling") {
  ToyClassifier clf(toy_weights());
  const OracleRequest req = OracleRequest::from_image("abc", Task::Classify, draw_sign(toy_exemplar_spec(1)).image);
  const auto r = decode_response(handle_request_line(clf, encode_request(req)), Task::Classify);
  CHECK(r.id == "abc");
  CHECK(r.argmax() == 1);
  CHECK(handle_request_line(clf, "garbage").rfind(R"({"id":null,"error":)", 0) == 0);
  OracleRequest det = req;
  det.task = Task::Detect;
  CHECK_THROWS_AS(decode_response(handle_request_line(clf, encode_request(det)), Task::Detect), RemoteError);
}

TEST_CASE("protocol client over tcp") {
  ToyClassifier clf(toy_weights());
  LoopbackServer server(clf);
  ClientConfig cfg;
  cfg.classes = 3;
  ProtocolClient client(server.address(), cfg);
  for (int label = 0; label < 3; ++label) {
    const ImageBuffer img = draw_sign(toy_exemplar_spec(label)).image;
    const auto r = client.classify(img);
    CHECK(r.argmax() == label);
    // The wire carries 8-bit pixels; the exemplars are exactly representable
    // up to that quantization.
    for (std::size_t k = 0; k < 3; ++k) CHECK(r.probs[k] == doctest::Approx(clf.classify(img).probs[k]).epsilon(1e-3));
    CHECK(r.latency_s >= 0);
  }
  // Concurrent callers are serialized internally.
  std::vector<std::thread> pool;
  std::atomic<int> good{0};
  for (int t = 0; t < 4; ++t) {
    pool.emplace_back([&, t] {
      for (int i = 0; i < 5; ++i) {
        if (client.predict(draw_sign(toy_exemplar_spec((t + i) % 3)).image) == (t + i) % 3) ++good;
      }
    });
  }
  for (auto& th : pool) th.join();
  CHECK(good == 20);

  ClientConfig wrong = cfg;
  wrong.classes = 4;
  ProtocolClient mismatched(server.address(), wrong);
  CHECK_THROWS_AS(mismatched.classify(ImageBuffer(8, 8)), ValidationError);
}

TEST_CASE("protocol client error kinds") {
  ClientConfig fast;
  fast.timeout = std::chrono::milliseconds(300);
  const ImageBuffer img(4, 4);
  SUBCASE("timeout") {
    ProtocolClient c("exec:sleep 5", fast);
    CHECK_THROWS_AS(c.classify(img), OracleTimeout);
  }
  SUBCASE("unknown id") {
    ProtocolClient c(R"(exec:while read l; do echo '{"id":"1","probs":[1]}'; done)", fast);
    CHECK(c.classify(img).probs == std::vector<double>{1});
    CHECK_THROWS_AS(c.classify(img), IdMismatch);
  }
  SUBCASE("malformed") {
    ProtocolClient c("exec:while read l; do echo nope; done", fast);
    CHECK_THROWS_AS(c.classify(img), MalformedResponse);
  }
  SUBCASE("remote error") {
    ProtocolClient c(R"(exec:while read l; do echo '{"id":"1","error":"boom"}'; done)", fast);
    CHECK_THROWS_AS(c.classify(img), RemoteError);
  }
  SUBCASE("unavailable") {
    ProtocolClient dead("exec:true", fast);
    CHECK_THROWS_AS(dead.classify(img), BackendUnavailable);
    ProtocolClient refused("tcp://127.0.0.1:1", fast);
    CHECK_THROWS_AS(refused.classify(img), BackendUnavailable);
    CHECK_THROWS_AS(ProtocolClient("127.0.0.1", fast).classify(img), ConfigError);
  }
  SUBCASE("unsupported task") {
    ClientConfig cls = fast;
    cls.detect = false;
    ProtocolClient c("exec:cat", cls);
    CHECK_THROWS_AS(c.detect(img), ContractViolation);
  }
}

TEST_CASE("conformance across backends") {
  auto clf = std::make_shared<ToyClassifier>(toy_weights());
  auto det = std::make_shared<ToyDetector>(toy_weights());
  LoopbackServer cls_server(*clf);
  LoopbackServer det_server(*det);
  ClientConfig ccfg;
  ccfg.classes = 3;
  ccfg.detect = false;
  ClientConfig dcfg;
  dcfg.classes = 3;
  dcfg.classify = false;
  std::vector<BackendPtr> backends{
      clf,
      det,
      std::make_shared<GaussianSmoothing>(clf, 0.5, 8, 1),
      std::make_shared<InputRandomization>(clf),
      std::make_shared<GaussianSmoothing>(det, 0.05, 8, 1),
      std::make_shared<InputRandomization>(det, 32, 36, 2),
      std::make_shared<ProtocolClient>(cls_server.address(), ccfg),
      std::make_shared<ProtocolClient>(det_server.address(), dcfg),
  };
  std::mt19937 rng(21);
  std::vector<ImageBuffer> images;
  for (int i = 0; i < 6; ++i) images.push_back(random_image(rng, 32, 32));
  for (const auto& item : toy_corpus(6, 3)) images.push_back(item.image);
  for (const auto& b : backends) {
    CAPTURE(b->describe());
    CHECK(b->classes() == 3);
    for (const auto& img : images) {
      for (Task t : {Task::Classify, Task::Detect}) {
        if (!b->supports(t)) continue;
        const auto r = b->query(t, img);
        CHECK(r.task == t);
        CHECK_NOTHROW(validate_response(r, 3));
      }
    }
  }
}
