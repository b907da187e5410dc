// SPDX-License-Identifier: Apache-2.0

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "itpatch/error.hpp"
#include "itpatch/oracle.hpp"

namespace itpatch {

namespace {

using Clock = std::chrono::steady_clock;

// Line reader/writer over a pair of file descriptors.
class FdTransport : public Transport {
 public:
  FdTransport(int in_fd, int out_fd, bool socket) : in_(in_fd), out_(out_fd), socket_(socket) {}
  ~FdTransport() override {
    if (in_ >= 0) ::close(in_);
    if (out_ >= 0 && out_ != in_) ::close(out_);
  }

  void write_line(const std::string& line) override {
    std::string buf = line + '\n';
    std::size_t off = 0;
    while (off < buf.size()) {
      const ssize_t n = socket_ ? ::send(out_, buf.data() + off, buf.size() - off, MSG_NOSIGNAL)
                                : ::write(out_, buf.data() + off, buf.size() - off);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw BackendUnavailable(std::string("oracle write failed: ") + std::strerror(errno));
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line(Clock::time_point deadline) override {
    for (;;) {
      const auto nl = pending_.find('\n');
      if (nl != std::string::npos) {
        std::string line = pending_.substr(0, nl);
        pending_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      if (left.count() <= 0) throw OracleTimeout("oracle did not answer in time");
      pollfd p{in_, POLLIN, 0};
      const int rc = ::poll(&p, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
      if (rc < 0 && errno == EINTR) continue;
      if (rc < 0) throw BackendUnavailable(std::string("poll failed: ") + std::strerror(errno));
      if (rc == 0) continue;
      char buf[65536];
      const ssize_t n = ::read(in_, buf, sizeof buf);
      if (n < 0 && errno == EINTR) continue;
      if (n < 0) throw BackendUnavailable(std::string("oracle read failed: ") + std::strerror(errno));
      if (n == 0) throw BackendUnavailable("oracle closed the connection");
      pending_.append(buf, static_cast<std::size_t>(n));
    }
  }

 protected:
  int in_, out_;
  bool socket_;
  std::string pending_;
};

class ProcessTransport : public FdTransport {
 public:
  ProcessTransport(int in_fd, int out_fd, pid_t pid) : FdTransport(in_fd, out_fd, false), pid_(pid) {}
  ~ProcessTransport() override {
    ::close(out_);
    out_ = -1;
    ::kill(pid_, SIGTERM);
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }

 private:
  pid_t pid_;
};

}  // namespace

std::unique_ptr<Transport> connect_tcp(const std::string& address) {
  std::string rest = address;
  if (rest.rfind("tcp://", 0) == 0) rest = rest.substr(6);
  const auto colon = rest.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size()) {
    throw ConfigError("oracle address must be host:port, got '" + address + "'");
  }
  std::string host = rest.substr(0, colon);
  if (host.size() > 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  const std::string port = rest.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw BackendUnavailable("cannot resolve " + address + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw BackendUnavailable("cannot connect to " + address);
  return std::make_unique<FdTransport>(fd, fd, true);
}

std::unique_ptr<Transport> spawn_process(const std::string& command) {
  // Writes to a dead child must surface as EPIPE, not kill the caller.
  ::signal(SIGPIPE, SIG_IGN);
  int to_child[2], from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw BackendUnavailable("pipe failed");
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw BackendUnavailable("pipe failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
    throw BackendUnavailable("fork failed");
  }
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::make_unique<ProcessTransport>(from_child[0], to_child[1], pid);
}

std::unique_ptr<Transport> open_transport(const std::string& endpoint) {
  if (endpoint.rfind("exec:", 0) == 0) return spawn_process(endpoint.substr(5));
  return connect_tcp(endpoint);
}

ProtocolClient::ProtocolClient(std::string endpoint, ClientConfig cfg)
    : endpoint_(std::move(endpoint)), cfg_(cfg) {
  if (endpoint_.empty()) throw ConfigError("empty oracle endpoint");
  if (cfg_.timeout.count() <= 0) throw ConfigError("oracle timeout must be positive");
}

ProtocolClient::ProtocolClient(std::unique_ptr<Transport> transport, ClientConfig cfg)
    : endpoint_("stream"), cfg_(cfg), transport_(std::move(transport)) {
  if (!transport_) throw ConfigError("null oracle transport");
}

bool ProtocolClient::supports(Task task) const {
  return task == Task::Classify ? cfg_.classify : cfg_.detect;
}

OracleResponse ProtocolClient::query(Task task, const ImageBuffer& img) {
  if (!supports(task)) throw ContractViolation(std::string("oracle does not serve ") + to_string(task));
  std::lock_guard lock(mu_);
  const bool reopenable = endpoint_ != "stream";
  if (!transport_) {
    if (!reopenable) throw BackendUnavailable("oracle stream is closed");
    transport_ = open_transport(endpoint_);
  }
  const std::string id = std::to_string(next_id_++);
  const auto start = Clock::now();
  std::string line;
  try {
    transport_->write_line(encode_request(OracleRequest::from_image(id, task, img)));
    line = transport_->read_line(start + cfg_.timeout);
  } catch (const OracleError&) {
    // A late answer would desynchronise the stream; start afresh next time.
    if (reopenable) transport_.reset();
    throw;
  }
  OracleResponse r = decode_response(line, task, &id);
  r.latency_s = std::chrono::duration<double>(Clock::now() - start).count();
  validate_response(r, cfg_.classes);
  return r;
}

}  // namespace itpatch
