// Copyright 2026 The e2nas Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Client for evaluators living in another process. Two transports:
//   pipe   - any endpoint that is not host:port is run through /bin/sh -c and
//            spoken to over its stdin/stdout
//   stream - "host:port" connects over TCP
// Requests are strictly sequential; one outstanding request per handle.

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <csignal>
#include <optional>
#include <regex>
#include <string>
#include <thread>
#include <utility>

#include <nlohmann/json.hpp>

#include "e2nas/errors.hpp"
#include "e2nas/evaluator.hpp"
#include "e2nas/protocol.hpp"

namespace e2nas {

// Owns a read fd and a write fd (possibly the same socket) and frames lines.
class LineChannel {
 public:
  static constexpr std::size_t kMaxLine = std::size_t{64} << 20;

  LineChannel() = default;
  LineChannel(int read_fd, int write_fd, bool is_socket)
      : rfd_(read_fd), wfd_(write_fd), socket_(is_socket) {}
  LineChannel(const LineChannel&) = delete;
  LineChannel& operator=(const LineChannel&) = delete;
  LineChannel(LineChannel&& o) noexcept { *this = std::move(o); }
  LineChannel& operator=(LineChannel&& o) noexcept {
    if (this != &o) {
      close();
      rfd_ = std::exchange(o.rfd_, -1);
      wfd_ = std::exchange(o.wfd_, -1);
      socket_ = o.socket_;
      buf_ = std::move(o.buf_);
    }
    return *this;
  }
  ~LineChannel() { close(); }

  bool is_open() const noexcept { return rfd_ >= 0; }

  void close() noexcept {
    if (wfd_ >= 0 && wfd_ != rfd_) ::close(wfd_);
    if (rfd_ >= 0) ::close(rfd_);
    rfd_ = wfd_ = -1;
  }

  // Closes only the writing side (signals EOF to a pipe peer).
  void close_write() noexcept {
    if (wfd_ >= 0 && wfd_ != rfd_) {
      ::close(wfd_);
      wfd_ = -1;
    } else if (wfd_ >= 0 && socket_) {
      ::shutdown(wfd_, SHUT_WR);
    }
  }

  void write_line(const std::string& line) {
    if (wfd_ < 0) throw ConnectionLost("transport closed");
    std::string data = line;
    data.push_back('\n');
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = socket_ ? ::send(wfd_, data.data() + off, data.size() - off, MSG_NOSIGNAL)
                                : ::write(wfd_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        if (errno == EPIPE || errno == ECONNRESET) throw ConnectionLost("peer closed the connection");
        throw ConnectionLost(std::string("write failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  // Next line without its terminator; nullopt on clean EOF. A negative
  // timeout waits forever.
  std::optional<std::string> read_line(double timeout_s = -1.0) {
    if (rfd_ < 0) throw ConnectionLost("transport closed");
    using clock = std::chrono::steady_clock;
    const auto deadline = clock::now() + std::chrono::duration_cast<clock::duration>(
                                             std::chrono::duration<double>(std::max(timeout_s, 0.0)));
    for (;;) {
      if (const auto nl = buf_.find('\n'); nl != std::string::npos) {
        std::string line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      if (buf_.size() > kMaxLine) throw ProtocolError("line exceeds maximum length");
      int wait_ms = -1;
      if (timeout_s >= 0.0) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
        if (left.count() <= 0) throw TimeoutError("no response within " + std::to_string(timeout_s) + " s");
        wait_ms = static_cast<int>(std::min<long long>(left.count(), 1 << 30));
      }
      pollfd pfd{rfd_, POLLIN, 0};
      const int pr = ::poll(&pfd, 1, wait_ms);
      if (pr < 0) {
        if (errno == EINTR) continue;
        throw ConnectionLost(std::string("poll failed: ") + std::strerror(errno));
      }
      if (pr == 0) continue;  // deadline re-checked above
      char chunk[65536];
      const ssize_t n = ::read(rfd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw ConnectionLost(std::string("read failed: ") + std::strerror(errno));
      }
      if (n == 0) {
        if (buf_.empty()) return std::nullopt;
        std::string line = std::move(buf_);
        buf_.clear();
        return line;
      }
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int rfd_ = -1;
  int wfd_ = -1;
  bool socket_ = false;
  std::string buf_;
};

// Serves the echo stub over a channel until EOF.
inline void serve_stub(LineChannel& ch, int psr_dim = 64) {
  protocol::EchoStub stub(psr_dim);
  while (auto line = ch.read_line()) {
    if (auto reply = stub.handle(*line)) ch.write_line(*reply);
  }
}

struct ExternalOptions {
  double evaluate_timeout_s = 600.0;
  double handshake_timeout_s = 30.0;
};

class ExternalEvaluator final : public Evaluator {
 public:
  // Parses the endpoint and completes the handshake.
  explicit ExternalEvaluator(const std::string& endpoint, ExternalOptions opts = {})
      : opts_(opts), endpoint_(endpoint) {
    if (endpoint.empty()) throw InvalidArgument("empty evaluator endpoint");
    static const std::regex host_port(R"(^([A-Za-z0-9.\-]+|\[[0-9A-Fa-f:]+\]):([0-9]{1,5})$)");
    std::smatch m;
    if (std::regex_match(endpoint, m, host_port)) {
      std::string host = m[1].str();
      if (host.front() == '[') host = host.substr(1, host.size() - 2);
      connect_tcp(host, m[2].str());
    } else {
      spawn(endpoint);
    }
    try {
      handshake();
    } catch (...) {
      close();
      throw;
    }
  }

  ExternalEvaluator(const ExternalEvaluator&) = delete;
  ExternalEvaluator& operator=(const ExternalEvaluator&) = delete;
  ~ExternalEvaluator() override { close(); }

  EvalResult evaluate(const Genotype& prefix, int epochs) override {
    if (epochs < 1) throw InvalidArgument("epochs must be positive");
    const auto id = next_id_++;
    const nlohmann::json reply =
        call(protocol::evaluate_request(id, epochs, prefix), id, "result", opts_.evaluate_timeout_s);
    EvalResult r;
    try {
      r.is_score = reply.at("is").get<double>();
      r.fid_score = reply.at("fid").get<double>();
      r.psr = reply.at("psr").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      poison();
      throw ProtocolError(std::string("malformed result: ") + e.what());
    }
    if (static_cast<int>(r.psr.size()) != desc_.psr_dim) {
      poison();
      throw ProtocolError("result psr has dimension " + std::to_string(r.psr.size()) +
                          ", handshake said " + std::to_string(desc_.psr_dim));
    }
    return r;
  }

  void reset_weights() override {
    const auto id = next_id_++;
    call(protocol::reset_request(id), id, "ok", opts_.evaluate_timeout_s);
  }

  EvaluatorDescriptor descriptor() const override { return desc_; }

  bool poisoned() const noexcept { return poisoned_; }
  const std::string& endpoint() const noexcept { return endpoint_; }

  void close() noexcept {
    ch_.close_write();
    ch_.close();
    reap();
  }

 private:
  void poison() noexcept { poisoned_ = true; }

  nlohmann::json call(const nlohmann::json& request, std::int64_t id, const char* expected,
                      double timeout_s) {
    if (!ch_.is_open()) throw ConnectionLost("transport closed");
    if (poisoned_) throw ConnectionLost("evaluator handle is poisoned by an earlier failure");
    std::optional<std::string> line;
    try {
      ch_.write_line(request.dump());
      line = ch_.read_line(timeout_s);
    } catch (const EvaluatorError&) {
      poison();
      throw;
    }
    if (!line) {
      poison();
      throw ConnectionLost("evaluator closed the connection");
    }
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(*line);
    } catch (const nlohmann::json::exception& e) {
      poison();
      throw ProtocolError(std::string("malformed response: ") + e.what());
    }
    if (!reply.is_object() || !reply.contains("type") || !reply["type"].is_string()) {
      poison();
      throw ProtocolError("response lacks a type");
    }
    if (!reply.contains("id") || !reply["id"].is_number_integer() ||
        reply["id"].get<std::int64_t>() != id) {
      poison();
      throw ProtocolError("response id does not match request " + std::to_string(id));
    }
    const std::string type = reply["type"].get<std::string>();
    if (type == "error") throw RemoteError("evaluator error: " + reply.value("message", std::string("?")));
    if (type != expected) {
      poison();
      throw ProtocolError("expected '" + std::string(expected) + "', got '" + type + "'");
    }
    return reply;
  }

  void handshake() {
    std::optional<std::string> line;
    try {
      ch_.write_line(protocol::hello_request().dump());
      line = ch_.read_line(opts_.handshake_timeout_s);
    } catch (const ConnectionLost& e) {
      fail_handshake_eof(e.what());
    }
    if (!line) fail_handshake_eof("evaluator closed the connection during handshake");
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(*line);
    } catch (const nlohmann::json::exception& e) {
      close();
      throw ProtocolError(std::string("malformed handshake: ") + e.what());
    }
    if (!reply.is_object() || reply.value("type", "") != "hello") {
      close();
      throw HandshakeError("unexpected handshake reply: " + line->substr(0, 200));
    }
    if (reply.value("version", -1) != protocol::kVersion) {
      close();
      throw HandshakeError("evaluator speaks protocol version " + reply["version"].dump() +
                           ", expected " + std::to_string(protocol::kVersion));
    }
    try {
      desc_.name = reply.at("name").get<std::string>();
      desc_.psr_dim = reply.at("psr_dim").get<int>();
    } catch (const nlohmann::json::exception& e) {
      close();
      throw ProtocolError(std::string("malformed handshake: ") + e.what());
    }
    if (desc_.psr_dim < 1) {
      close();
      throw ProtocolError("handshake psr_dim must be positive");
    }
  }

  [[noreturn]] void fail_handshake_eof(const std::string& what) {
    close();
    if (spawned_) throw SpawnError("evaluator process '" + endpoint_ + "' exited: " + what);
    throw ConnectError(what);
  }

  void spawn(const std::string& command) {
    struct sigaction old{};
    if (::sigaction(SIGPIPE, nullptr, &old) == 0 && old.sa_handler == SIG_DFL) {
      std::signal(SIGPIPE, SIG_IGN);
    }
    int to_child[2], from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw SpawnError(std::string("pipe: ") + std::strerror(errno));
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw SpawnError(std::string("pipe: ") + std::strerror(errno));
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
      for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
      throw SpawnError(std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::signal(SIGPIPE, SIG_DFL);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    child_ = pid;
    spawned_ = true;
    ch_ = LineChannel(from_child[0], to_child[1], false);
  }

  void connect_tcp(const std::string& host, const std::string& port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
      throw ConnectError("cannot resolve " + host + ": " + ::gai_strerror(rc));
    }
    int fd = -1;
    std::string last = "no address";
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
      fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
      last = std::strerror(errno);
      ::close(fd);
      fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw ConnectError("cannot connect to " + host + ":" + port + ": " + last);
    ch_ = LineChannel(fd, fd, true);
  }

  void reap() noexcept {
    if (child_ <= 0) return;
    int status = 0;
    for (int i = 0; i < 100; ++i) {
      if (::waitpid(child_, &status, WNOHANG) != 0) {
        child_ = -1;
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(child_, SIGKILL);
    ::waitpid(child_, &status, 0);
    child_ = -1;
  }

  ExternalOptions opts_;
  std::string endpoint_;
  LineChannel ch_;
  pid_t child_ = -1;
  bool spawned_ = false;
  bool poisoned_ = false;
  std::int64_t next_id_ = 1;
  EvaluatorDescriptor desc_;
};

// Binds a loopback TCP listener; port 0 picks a free port. Returns the fd
// and the bound port.
inline std::pair<int, int> listen_loopback(int port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw IoError(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 4) != 0) {
    const std::string err = std::strerror(errno);
    ::close(fd);
    throw IoError("cannot listen on port " + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  return {fd, ntohs(addr.sin_port)};
}

// Accepts one connection on a listening socket and serves the stub on it.
inline void serve_stub_once(int listen_fd, int psr_dim = 64) {
  const int conn = ::accept4(listen_fd, nullptr, nullptr, SOCK_CLOEXEC);
  if (conn < 0) throw IoError(std::string("accept: ") + std::strerror(errno));
  LineChannel ch(conn, conn, true);
  serve_stub(ch, psr_dim);
}

}  // namespace e2nas
