#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "icrl/dataset.hpp"
#include "icrl/episode.hpp"
#include "icrl/http.hpp"
#include "icrl/prompt.hpp"
#include "icrl/rng.hpp"

namespace icrl {

// Everything a backend may look at when producing a prediction. The remote
// backend only reads transcript / answer_prefix / labels; example carries the
// gold label strictly for the oracle-style mocks.
struct PredictionRequest {
  ChatTranscript transcript;
  std::string answer_prefix;
  Example example;
  std::vector<Episode> ctx;
  PromptMode mode = PromptMode::icrl;
  const LabelSpace* labels = nullptr;  // outlives the call, never null
  // 1-based training timestep; an eval sweep keeps the step it runs at
  // (0 for the zero-shot sweep) and sets eval_index as well.
  std::uint64_t step = 0;
  std::optional<std::size_t> eval_index;  // position in the test set during eval
};

struct PredictionResult {
  std::string label;     // element of the label space unless rejected
  std::string raw_text;  // untrimmed completion text
  // 0 = unknown; the runner then counts raw_text with the run tokenizer.
  std::size_t completion_tokens = 0;
  bool invalid = false;        // completion never mapped to a label
  bool resampled = false;      // a second sample was requested
  bool fallback_used = false;  // label chosen by common-prefix fallback
};

class PolicyBackend {
 public:
  virtual ~PolicyBackend() = default;
  virtual std::string name() const = 0;
  // rng is the caller-owned sampling stream for this step (or this eval item),
  // so prediction order never affects the draws a given request sees.
  virtual PredictionResult predict(const PredictionRequest& req, RngStream& rng) = 0;
  // Remote backends cannot be re-run deterministically; replay substitutes
  // their logged predictions instead of calling out again.
  virtual bool is_remote() const { return false; }
};

// Always answers with the gold label.
class OracleBackend final : public PolicyBackend {
 public:
  std::string name() const override { return "oracle"; }
  PredictionResult predict(const PredictionRequest& req, RngStream& rng) override;
};

// Always answers with one fixed label.
class ConstantBackend final : public PolicyBackend {
 public:
  explicit ConstantBackend(std::string label);
  std::string name() const override { return "constant"; }
  PredictionResult predict(const PredictionRequest& req, RngStream& rng) override;

 private:
  std::string label_;
};

// Repeats the shown label of the most recent positive-reward context episode,
// or answers uniformly at random when the context has none.
class ParrotLastPositiveBackend final : public PolicyBackend {
 public:
  std::string name() const override { return "parrot_last_positive"; }
  PredictionResult predict(const PredictionRequest& req, RngStream& rng) override;
};

// Word-overlap nearest-neighbour learner. With probability epsilon it answers
// uniformly at random; otherwise it scores each context episode by the size
// of the word-set intersection with the query and answers with the most
// frequent shown label among the top-scoring episodes (lexicographic
// tie-break). An empty context or all-zero overlap degrades to a uniform
// draw over the full label space.
class FrequencyLearnerBackend final : public PolicyBackend {
 public:
  explicit FrequencyLearnerBackend(double epsilon);
  std::string name() const override { return "frequency_learner"; }
  PredictionResult predict(const PredictionRequest& req, RngStream& rng) override;

 private:
  double epsilon_;
};

// Plays back fixed prediction sequences: train[step - 1] during training and
// eval[eval_index] during evaluation. A missing eval script answers gold so
// tests can script the training arc alone. Out-of-range lookups throw.
class ScriptedBackend final : public PolicyBackend {
 public:
  ScriptedBackend(std::vector<std::string> train, std::vector<std::string> eval);
  std::string name() const override { return "scripted"; }
  PredictionResult predict(const PredictionRequest& req, RngStream& rng) override;

 private:
  std::vector<std::string> train_;
  std::vector<std::string> eval_;
};

enum class InvalidCompletionPolicy { resample_once, fallback, reject };

InvalidCompletionPolicy invalid_policy_from_string(const std::string& s);
std::string to_string(InvalidCompletionPolicy p);

struct RemoteChatConfig {
  std::string endpoint;  // base URL of an OpenAI-compatible server
  std::string api_key;   // optional bearer token
  std::string model;
  double temperature = 0.0;
  std::size_t max_tokens = 16;
  // vllm extension: constrain decoding to the label strings.
  bool guided_choice = false;
  int max_attempts = 3;
  double backoff_seconds = 0.5;
  int timeout_seconds = 60;
  InvalidCompletionPolicy on_invalid = InvalidCompletionPolicy::resample_once;
};

// Maps a raw completion onto the label space: trim, drop a leading
// answer_prefix, then exact match, then the longest label that prefixes the
// cleaned text. nullopt when nothing matches.
std::optional<std::string> map_completion(const std::string& raw,
                                          const std::string& answer_prefix,
                                          const LabelSpace& labels);

// Label sharing the longest common prefix with the cleaned completion, ties
// to the lexicographically first label.
std::string fallback_label(const std::string& raw, const std::string& answer_prefix,
                           const LabelSpace& labels);

// POSTs /v1/chat/completions, retrying transient failures with exponential
// backoff; unmappable completions are handled per on_invalid.
class RemoteChatBackend final : public PolicyBackend {
 public:
  RemoteChatBackend(RemoteChatConfig config, std::shared_ptr<HttpTransport> transport);
  std::string name() const override { return "remote_chat"; }
  PredictionResult predict(const PredictionRequest& req, RngStream& rng) override;
  bool is_remote() const override { return true; }

 private:
  struct Completion {
    std::string text;
    std::size_t completion_tokens = 0;
  };
  Completion complete_once(const PredictionRequest& req);

  RemoteChatConfig config_;
  std::shared_ptr<HttpTransport> transport_;
};

}  // namespace icrl
