#pragma once

// Client for the line-delimited external scorer protocol.
//
//   client: HELLO bitext-sieve/1 score=<parallelism|perplexity>
//   server: OK <name>/<version>
//   client: <id>\t<source>\t<target>        (pipelined, bounded window)
//   server: <id>\t<float>                    (any order)
//   client: BYE                              (server exits 0)
//
// The child runs under /bin/sh -c with its stdin and stdout connected to one
// end of a Unix socket pair; stderr is inherited.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bitext_sieve/core.hpp"

namespace sieve {

// Recoverable failure of the child process (exit, EOF, timeout).
struct TransportError : ProtocolError {
  using ProtocolError::ProtocolError;
};

enum class ScoreKind { parallelism, perplexity };

inline const char* to_string(ScoreKind k) { return k == ScoreKind::parallelism ? "parallelism" : "perplexity"; }

struct ScorerOptions {
  std::size_t window = 256;
  int timeout_ms = 30000;
  int retries = 2;
};

inline constexpr std::string_view kProtocolHello = "HELLO bitext-sieve/1 score=";

class ChildProcess {
 public:
  explicit ChildProcess(const std::string& command) {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
      throw TransportError(std::string("socketpair failed: ") + std::strerror(errno));
    }
    pid_ = ::fork();
    if (pid_ < 0) {
      ::close(fds[0]);
      ::close(fds[1]);
      throw TransportError(std::string("fork failed: ") + std::strerror(errno));
    }
    if (pid_ == 0) {
      ::dup2(fds[1], STDIN_FILENO);
      ::dup2(fds[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(fds[1]);
    fd_ = fds[0];
    ::fcntl(fd_, F_SETFL, ::fcntl(fd_, F_GETFL) | O_NONBLOCK);
  }

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  ~ChildProcess() { terminate(); }

  int fd() const { return fd_; }

  void close_write() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
  }

  // Waits up to `grace_ms` for a voluntary exit, then kills. Returns the exit
  // status when the child exited on its own.
  std::optional<int> terminate(int grace_ms = 2000) {
    std::optional<int> status;
    if (pid_ > 0) {
      const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(grace_ms);
      int st = 0;
      pid_t r = 0;
      while ((r = ::waitpid(pid_, &st, WNOHANG)) == 0 && std::chrono::steady_clock::now() < deadline) {
        ::usleep(2000);
      }
      if (r == pid_) {
        if (WIFEXITED(st)) status = WEXITSTATUS(st);
      } else {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &st, 0);
      }
      pid_ = -1;
    }
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
    return status;
  }

 private:
  pid_t pid_ = -1;
  int fd_ = -1;
};

class ExternalScorer {
 public:
  ExternalScorer(std::string command, ScoreKind kind, ScorerOptions options = {})
      : command_(std::move(command)), kind_(kind), options_(options) {
    if (options_.window == 0) throw ConfigError("scorer window must be >= 1");
  }

  ExternalScorer(const ExternalScorer&) = delete;
  ExternalScorer& operator=(const ExternalScorer&) = delete;

  ~ExternalScorer() {
    try {
      shutdown();
    } catch (...) {
    }
  }

  ScoreKind kind() const { return kind_; }
  const std::string& server_name() const { return server_name_; }
  int restarts() const { return restarts_; }

  // Scores every pair exactly once. Results are returned in input order as
  // (id, score); responses are matched by id regardless of arrival order.
  std::vector<std::pair<std::uint64_t, double>> score_batch(std::span<const SentencePair> pairs) {
    std::unordered_map<std::uint64_t, std::size_t> index;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& p = pairs[i];
      if (!index.emplace(p.id, i).second) throw ConfigError("duplicate id " + std::to_string(p.id) + " in batch");
      for (const std::string* side : {&p.source, &p.target}) {
        if (side->find_first_of("\t\n") != std::string::npos) {
          throw ConfigError("pair " + std::to_string(p.id) + " contains a tab or newline");
        }
      }
    }
    std::vector<std::optional<double>> scores(pairs.size());
    for (int attempt = 0;; ++attempt) {
      try {
        run(pairs, index, scores);
        break;
      } catch (const TransportError& e) {
        abandon();
        if (attempt >= options_.retries) {
          throw ProtocolError("scorer '" + command_ + "' failed after " + std::to_string(options_.retries) +
                              " retries: " + e.what());
        }
        ++restarts_;
      } catch (const ProtocolError&) {
        abandon();
        throw;
      }
    }
    std::vector<std::pair<std::uint64_t, double>> out;
    out.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) out.emplace_back(pairs[i].id, *scores[i]);
    return out;
  }

  std::vector<double> scores(std::span<const SentencePair> pairs) {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& [id, s] : score_batch(pairs)) out.push_back(s);
    return out;
  }

  // Sends BYE and reaps the child. Returns its exit status if it exited.
  std::optional<int> shutdown() {
    if (!child_) return std::nullopt;
    std::optional<int> status;
    try {
      send_all("BYE\n", 1000);
      child_->close_write();
      status = child_->terminate();
    } catch (const TransportError&) {
      status = child_->terminate(0);
    }
    child_.reset();
    return status;
  }

 private:
  void abandon() {
    if (child_) child_->terminate(0);
    child_.reset();
  }

  void start() {
    child_ = std::make_unique<ChildProcess>(command_);
    inbuf_.clear();
    send_all(std::string(kProtocolHello) + to_string(kind_) + "\n", options_.timeout_ms);
    const auto reply = read_line(options_.timeout_ms);
    if (!reply) throw TransportError("scorer closed the connection during handshake");
    if (reply->rfind("OK ", 0) != 0) {
      throw ProtocolError("scorer rejected handshake: '" + *reply + "'");
    }
    server_name_ = reply->substr(3);
  }

  void run(std::span<const SentencePair> pairs, const std::unordered_map<std::uint64_t, std::size_t>& index,
           std::vector<std::optional<double>>& scores) {
    if (!child_) start();
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (!scores[i]) todo.push_back(i);
    }
    std::size_t next = 0;
    std::size_t in_flight = 0;
    std::string outbuf;
    std::size_t out_pos = 0;
    std::size_t answered = pairs.size() - todo.size();

    while (answered < pairs.size()) {
      while (next < todo.size() && in_flight < options_.window) {
        const auto& p = pairs[todo[next++]];
        outbuf += std::to_string(p.id);
        outbuf.push_back('\t');
        outbuf += p.source;
        outbuf.push_back('\t');
        outbuf += p.target;
        outbuf.push_back('\n');
        ++in_flight;
      }
      pollfd pfd{child_->fd(), POLLIN, 0};
      if (out_pos < outbuf.size()) pfd.events |= POLLOUT;
      const int rc = ::poll(&pfd, 1, options_.timeout_ms);
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("poll failed: ") + std::strerror(errno));
      }
      if (rc == 0) {
        throw TransportError("timed out after " + std::to_string(options_.timeout_ms) + " ms with " +
                             std::to_string(pairs.size() - answered) + " ids unanswered");
      }
      if (pfd.revents & POLLOUT) {
        const ssize_t w = ::send(child_->fd(), outbuf.data() + out_pos, outbuf.size() - out_pos, MSG_NOSIGNAL);
        if (w < 0 && errno != EAGAIN && errno != EINTR) {
          throw TransportError(std::string("write to scorer failed: ") + std::strerror(errno));
        }
        if (w > 0) out_pos += static_cast<std::size_t>(w);
        if (out_pos == outbuf.size()) {
          outbuf.clear();
          out_pos = 0;
        }
      }
      if (pfd.revents & (POLLIN | POLLHUP | POLLERR)) {
        if (!fill()) {
          throw TransportError("scorer exited with " + std::to_string(pairs.size() - answered) +
                               " ids unanswered");
        }
        while (auto line = take_line()) {
          handle_response(*line, index, scores);
          ++answered;
          --in_flight;
        }
      }
    }
  }

  void handle_response(const std::string& line, const std::unordered_map<std::uint64_t, std::size_t>& index,
                       std::vector<std::optional<double>>& scores) const {
    if (line.rfind("ERR", 0) == 0) throw ProtocolError("scorer reported an error: '" + line + "'");
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw ProtocolError("malformed scorer response: '" + line + "'");
    }
    std::uint64_t id = 0;
    const auto* id_end = line.data() + tab;
    const auto r = std::from_chars(line.data(), id_end, id);
    if (r.ec != std::errc() || r.ptr != id_end) throw ProtocolError("malformed id in scorer response: '" + line + "'");
    double value = 0.0;
    const auto* v_end = line.data() + line.size();
    const auto rv = std::from_chars(line.data() + tab + 1, v_end, value);
    if (rv.ec != std::errc() || rv.ptr != v_end || !std::isfinite(value)) {
      throw ProtocolError("malformed score in scorer response: '" + line + "'");
    }
    if (kind_ == ScoreKind::parallelism && (value < 0.0 || value > 1.0)) {
      throw ProtocolError("parallelism score out of [0,1]: '" + line + "'");
    }
    if (kind_ == ScoreKind::perplexity && !(value > 0.0)) {
      throw ProtocolError("perplexity must be > 0: '" + line + "'");
    }
    const auto it = index.find(id);
    if (it == index.end()) throw ProtocolError("scorer answered unknown id: '" + line + "'");
    auto& slot = scores[it->second];
    if (slot) throw ProtocolError("scorer answered id " + std::to_string(id) + " twice");
    slot = value;
  }

  void send_all(const std::string& data, int timeout_ms) {
    std::size_t pos = 0;
    while (pos < data.size()) {
      pollfd pfd{child_->fd(), POLLOUT, 0};
      const int rc = ::poll(&pfd, 1, timeout_ms);
      if (rc <= 0) throw TransportError("timed out writing to scorer");
      const ssize_t w = ::send(child_->fd(), data.data() + pos, data.size() - pos, MSG_NOSIGNAL);
      if (w < 0) {
        if (errno == EAGAIN || errno == EINTR) continue;
        throw TransportError(std::string("write to scorer failed: ") + std::strerror(errno));
      }
      pos += static_cast<std::size_t>(w);
    }
  }

  // Reads whatever is available. Returns false on EOF.
  bool fill() {
    char buf[65536];
    for (;;) {
      const ssize_t r = ::read(child_->fd(), buf, sizeof buf);
      if (r > 0) {
        inbuf_.append(buf, static_cast<std::size_t>(r));
        if (static_cast<std::size_t>(r) < sizeof buf) return true;
        continue;
      }
      if (r == 0) return false;
      if (errno == EAGAIN || errno == EINTR) return true;
      throw TransportError(std::string("read from scorer failed: ") + std::strerror(errno));
    }
  }

  std::optional<std::string> take_line() {
    const auto nl = inbuf_.find('\n');
    if (nl == std::string::npos) return std::nullopt;
    std::string line = inbuf_.substr(0, nl);
    inbuf_.erase(0, nl + 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  std::optional<std::string> read_line(int timeout_ms) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    for (;;) {
      if (auto line = take_line()) return line;
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw TransportError("timed out waiting for scorer");
      pollfd pfd{child_->fd(), POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (rc < 0 && errno != EINTR) throw TransportError("poll failed");
      if (rc > 0 && !fill()) return take_line();
    }
  }

  std::string command_;
  ScoreKind kind_;
  ScorerOptions options_;
  std::unique_ptr<ChildProcess> child_;
  std::string inbuf_;
  std::string server_name_;
  int restarts_ = 0;
};

}  // namespace sieve
