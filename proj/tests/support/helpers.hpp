#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "icrl/episode.hpp"
#include "icrl/http.hpp"
#include "icrl/reward.hpp"

namespace icrl::testing {

// Self-deleting scratch directory under the system temp root.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    auto base = std::filesystem::temp_directory_path();
    path_ = base / ("icrl-test-" + std::to_string(::getpid()) + "-" +
                    std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& name = "") const {
    return name.empty() ? path_.string() : (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

// Sets (or clears, for nullptr) an environment variable and restores the
// previous state on scope exit, so tests never leak env changes.
class EnvGuard {
 public:
  EnvGuard(const char* name, const char* value) : name_(name) {
    const char* old = std::getenv(name);
    had_old_ = old != nullptr;
    if (had_old_) old_ = old;
    if (value == nullptr) {
      ::unsetenv(name);
    } else {
      ::setenv(name, value, 1);
    }
  }
  ~EnvGuard() {
    if (had_old_) {
      ::setenv(name_.c_str(), old_.c_str(), 1);
    } else {
      ::unsetenv(name_.c_str());
    }
  }
  EnvGuard(const EnvGuard&) = delete;
  EnvGuard& operator=(const EnvGuard&) = delete;

 private:
  std::string name_;
  std::string old_;
  bool had_old_ = false;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << bytes;
  if (!out) throw std::runtime_error("cannot write " + path);
}

inline Episode make_episode(std::uint64_t t, std::string query,
                            std::string gold, std::string prediction,
                            int reward, bool observed = true) {
  Episode e;
  e.t = t;
  e.example.id = "fix-" + std::to_string(t);
  e.example.query = std::move(query);
  e.example.gold_label = std::move(gold);
  e.prediction = std::move(prediction);
  e.reward = RewardValue{reward, observed};
  return e;
}

// Fails the run loudly if any code path tries to do network I/O.
class PanickingTransport final : public HttpTransport {
 public:
  HttpResponse post_json(const std::string& path, const std::string& body,
                         const HttpHeaders& headers) override {
    (void)path;
    (void)body;
    (void)headers;
    std::fprintf(stderr, "unexpected network call to %s\n", path.c_str());
    std::abort();
  }
};

// Plays back canned responses and records every request it saw.
class ScriptedTransport final : public HttpTransport {
 public:
  explicit ScriptedTransport(std::vector<HttpResponse> responses)
      : responses_(std::move(responses)) {}

  HttpResponse post_json(const std::string& path, const std::string& body,
                         const HttpHeaders& headers) override {
    paths.push_back(path);
    bodies.push_back(body);
    header_log.push_back(headers);
    if (cursor_ >= responses_.size()) {
      throw std::runtime_error("scripted transport exhausted");
    }
    return responses_[cursor_++];
  }

  std::vector<std::string> paths;
  std::vector<std::string> bodies;
  std::vector<HttpHeaders> header_log;

 private:
  std::vector<HttpResponse> responses_;
  std::size_t cursor_ = 0;
};

}  // namespace icrl::testing
