#pragma once

#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include "httplib.h"
#include "json.hpp"

#include "docparse/error.hpp"
#include "docparse/reward.hpp"
#include "docparse/table_merge.hpp"
#include "docparse/text.hpp"

// Adapters for scorers that live outside the process. Both speak one JSON
// request and one float response per call:
//   exec:<command>   a long-running child fed one request line on stdin,
//                    answering one line on stdout
//   http(s)://...    one POST per request, the body holding the request
namespace docparse {

class ScorerChannel {
public:
  virtual ~ScorerChannel() = default;
  virtual std::string exchange(const std::string& request_line) = 0;
};

class SubprocessChannel : public ScorerChannel {
public:
  explicit SubprocessChannel(std::string command, std::chrono::milliseconds timeout = std::chrono::seconds(30))
      : command_(std::move(command)), timeout_(timeout) {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0)
      throw Error(ErrorCode::ScorerFailure, "socketpair failed");
    pid_ = ::fork();
    if (pid_ < 0) {
      ::close(fds[0]);
      ::close(fds[1]);
      throw Error(ErrorCode::ScorerFailure, "fork failed");
    }
    if (pid_ == 0) {
      ::close(fds[0]);
      ::dup2(fds[1], STDIN_FILENO);
      ::dup2(fds[1], STDOUT_FILENO);
      ::close(fds[1]);
      ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(fds[1]);
    fd_ = fds[0];
  }

  SubprocessChannel(const SubprocessChannel&) = delete;
  SubprocessChannel& operator=(const SubprocessChannel&) = delete;

  ~SubprocessChannel() override {
    if (fd_ >= 0) ::close(fd_);
    if (pid_ > 0) {
      int status = 0;
      if (::waitpid(pid_, &status, WNOHANG) == 0) {
        ::kill(pid_, SIGTERM);
        ::waitpid(pid_, &status, 0);
      }
    }
  }

  std::string exchange(const std::string& request_line) override {
    const std::string payload = request_line + "\n";
    std::size_t sent = 0;
    while (sent < payload.size()) {
      const ssize_t n = ::send(fd_, payload.data() + sent, payload.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::ScorerFailure, "scorer process \"" + command_ + "\" is not accepting input");
      }
      sent += static_cast<std::size_t>(n);
    }
    while (true) {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      pollfd p{fd_, POLLIN, 0};
      const int ready = ::poll(&p, 1, static_cast<int>(timeout_.count()));
      if (ready == 0) throw Error(ErrorCode::ScorerFailure, "scorer process timed out");
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::ScorerFailure, "poll failed");
      }
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n <= 0) throw Error(ErrorCode::ScorerFailure, "scorer process closed its output");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

private:
  std::string command_;
  std::chrono::milliseconds timeout_;
  pid_t pid_ = -1;
  int fd_ = -1;
  std::string buffer_;
};

class HttpChannel : public ScorerChannel {
public:
  explicit HttpChannel(const std::string& url) {
    const auto scheme_end = url.find("://");
    const auto path_begin = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    base_ = path_begin == std::string::npos ? url : url.substr(0, path_begin);
    path_ = path_begin == std::string::npos ? "/" : url.substr(path_begin);
  }

  std::string exchange(const std::string& request_line) override {
    httplib::Client client(base_);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    const auto res = client.Post(path_, request_line, "application/json");
    if (!res) throw Error(ErrorCode::ScorerFailure, "HTTP scorer " + base_ + path_ + " unreachable");
    if (res->status != 200)
      throw Error(ErrorCode::ScorerFailure, "HTTP scorer answered status " + std::to_string(res->status));
    return res->body;
  }

private:
  std::string base_;
  std::string path_;
};

inline std::unique_ptr<ScorerChannel> make_channel(const std::string& endpoint) {
  if (endpoint.rfind("exec:", 0) == 0) return std::make_unique<SubprocessChannel>(endpoint.substr(5));
  if (endpoint.rfind("http://", 0) == 0 || endpoint.rfind("https://", 0) == 0)
    return std::make_unique<HttpChannel>(endpoint);
  throw Error(ErrorCode::ConfigError, "scorer endpoint must start with exec: or http://, got \"" + endpoint + "\"");
}

namespace detail {

inline double parse_score(std::string_view response) {
  const std::string body(text::trim(response));
  double value = 0.0;
  try {
    std::size_t used = 0;
    value = std::stod(body, &used);
    if (used != body.size()) throw std::invalid_argument(body);
  } catch (const std::exception&) {
    throw Error(ErrorCode::ScorerFailure, "scorer response \"" + body + "\" is not a number");
  }
  if (!(value >= 0.0 && value <= 1.0)) throw Error(ErrorCode::ScorerFailure, "scorer response outside [0,1]");
  return value;
}

}  // namespace detail

/// Request: {"tail":[...], "head":[...], "column_map":[...]}.
class ExternalContinuationScorer : public ContinuationScorer {
public:
  explicit ExternalContinuationScorer(std::unique_ptr<ScorerChannel> channel) : channel_(std::move(channel)) {}

  double score(const std::vector<std::string>& tail, const std::vector<std::string>& head,
               const std::vector<std::size_t>& column_map) override {
    const nlohmann::json request = {{"tail", tail}, {"head", head}, {"column_map", column_map}};
    std::lock_guard lock(mutex_);
    return detail::parse_score(channel_->exchange(request.dump()));
  }

private:
  std::unique_ptr<ScorerChannel> channel_;
  std::mutex mutex_;
};

/// Request: {"original_descriptor":..., "candidate_html":..., "rendered_canonical":...}.
class ExternalRewardScorer : public RewardScorer {
public:
  explicit ExternalRewardScorer(std::unique_ptr<ScorerChannel> channel) : channel_(std::move(channel)) {}

  double score(const std::string& original_descriptor, const std::string& candidate_html,
               const std::string& rendered_canonical) override {
    const nlohmann::json request = {{"original_descriptor", original_descriptor},
                                    {"candidate_html", candidate_html},
                                    {"rendered_canonical", rendered_canonical}};
    std::lock_guard lock(mutex_);
    return detail::parse_score(channel_->exchange(request.dump()));
  }

private:
  std::unique_ptr<ScorerChannel> channel_;
  std::mutex mutex_;
};

}  // namespace docparse
