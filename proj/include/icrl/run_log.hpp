#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace icrl {

// First line of every run log. No wall-clock fields: reruns of the same
// config and seed must be byte-identical.
struct RunHeader {
  std::string schema = "icrl.runlog";
  int version = 1;
  std::string algorithm;  // naive | explorative | approximate | supervised_icl
  std::string backend;
  std::string dialect;
  std::string mode;  // icl | icrl | icrl_no_feedback
  std::string tokenizer;
  std::uint64_t seed = 0;
  std::size_t window_tokens = 0;
  std::size_t overhead_tokens = 0;
  std::string task;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::size_t steps_planned = 0;  // 0 for supervised_icl (no step events)
  std::size_t eval_every = 0;
  std::size_t train_window = 0;
  std::vector<std::string> label_space;
};

// One training interaction. ctx lists the timesteps of the episodes rendered
// into the prompt; ctx_index identifies the stored context used (approximate
// scheme only). reward_true is the noise-free reward, reward_obs the value
// shown to the agent (meaningful only when reward_observed).
struct StepEvent {
  std::uint64_t t = 0;
  std::string example_id;
  std::vector<std::uint64_t> ctx;
  std::optional<std::size_t> ctx_index;
  std::string prompt_hash;
  std::size_t prompt_tokens = 0;
  std::string prediction;
  std::string raw_text;
  std::size_t completion_tokens = 0;
  int reward_true = 0;
  int reward_obs = 0;
  bool reward_observed = false;
  bool admitted = false;
  bool invalid = false;
  bool resampled = false;
  bool fallback_used = false;
};

// One sweep over the test set using the training context as of step t
// (t = 0 is the zero-shot sweep). predictions align with test-set order.
struct EvalEvent {
  std::uint64_t t = 0;
  double accuracy = 0.0;
  std::vector<std::string> predictions;
  bool incomplete = false;
  std::vector<std::string> missing_ids;
};

struct WarningEvent {
  std::uint64_t t = 0;
  std::string code;
  std::string message;
};

// Canonical single-line JSON for each record (sorted keys, no whitespace).
std::string to_json_line(const RunHeader& h);
std::string to_json_line(const StepEvent& e);
std::string to_json_line(const EvalEvent& e);
std::string to_json_line(const WarningEvent& e);

// Appends one line per event, flushing after each so an interrupted run
// leaves a usable prefix. begin() must come first; the runner calls it once
// it has assembled the header.
class RunLogWriter {
 public:
  explicit RunLogWriter(const std::string& path);
  void begin(const RunHeader& header);
  void append(const StepEvent& e);
  void append(const EvalEvent& e);
  void append(const WarningEvent& e);

 private:
  void write_line(const std::string& line);
  std::ofstream out_;
  std::string path_;
  bool started_ = false;
};

struct RunLog {
  RunHeader header;
  std::vector<StepEvent> steps;
  std::vector<EvalEvent> evals;
  std::vector<WarningEvent> warnings;
};

// Parses a log written by RunLogWriter. Throws IntegrityError on schema or
// structural problems; a trailing partial line (crash artifact) is rejected.
RunLog read_run_log(const std::string& path);

}  // namespace icrl
