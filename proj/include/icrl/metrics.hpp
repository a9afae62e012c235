#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "icrl/dataset.hpp"
#include "icrl/prompt.hpp"
#include "icrl/run_log.hpp"
#include "icrl/tokenizer.hpp"

namespace icrl {

struct RegretPoint {
  std::uint64_t t = 0;
  double instant = 0.0;     // 1 when the true reward was 0
  double cumulative = 0.0;  // running count of incorrect steps
};

// Regret against the true (noise-free) reward, one point per training step.
std::vector<RegretPoint> compute_regret(const std::vector<StepEvent>& steps);

struct AccuracyPoint {
  std::uint64_t t = 0;
  double accuracy = 0.0;
};

// Mean true reward over the trailing `window` steps, one point per step.
std::vector<AccuracyPoint> running_train_accuracy(const std::vector<StepEvent>& steps,
                                                  std::size_t window);

// Confusion counts indexed [predicted][true], label order = LabelSpace order.
// Marginals are the predicted / true label distributions.
struct Confusion {
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> counts;
  std::vector<std::size_t> predicted_marginal;
  std::vector<std::size_t> true_marginal;
  std::size_t total = 0;

  double accuracy() const;
  // Shannon entropy (bits) of the predicted-label distribution.
  double predicted_entropy() const;
  double true_entropy() const;
};

// gold and pred must be equal-length; labels outside the space throw
// ContractViolation (predictions are constrained to the space by policy).
Confusion confusion_matrix(const std::vector<std::string>& gold,
                           const std::vector<std::string>& pred,
                           const LabelSpace& labels);

// Confusion over training steps; gold labels come from the dataset index.
Confusion train_confusion(const std::vector<StepEvent>& steps,
                          const DatasetIndex& index, const LabelSpace& labels);

// Confusion over one eval sweep; gold labels come from the test set order.
Confusion eval_confusion(const EvalEvent& eval, const std::vector<Example>& test,
                         const LabelSpace& labels);

// Longest-common-prefix lookup over previously processed token sequences,
// mirroring automatic prefix caching on an inference server (no eviction).
class PrefixTrie {
 public:
  PrefixTrie() : nodes_(1) {}
  std::size_t longest_prefix(const std::vector<std::string>& seq) const;
  void insert(const std::vector<std::string>& seq);
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    std::unordered_map<std::uint32_t, std::uint32_t> children;
  };
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::uint32_t> token_ids_;
};

struct StepTokens {
  std::uint64_t t = 0;
  std::size_t prompt_tokens = 0;
  std::size_t cached_prefix_tokens = 0;
  std::size_t processed_tokens = 0;  // prompt - cached
};

struct TokenAccount {
  std::vector<StepTokens> per_step;
  std::size_t prompt_tokens_total = 0;     // prefill cost with no cache at all
  std::size_t cached_tokens_total = 0;     // prefix hits against earlier steps
  std::size_t processed_tokens_total = 0;  // prompt - cached, summed
  std::size_t completion_tokens_total = 0;

  // How much larger prefill would be without prefix caching.
  double cache_ratio() const {
    return processed_tokens_total == 0
               ? 0.0
               : static_cast<double>(prompt_tokens_total) /
                     static_cast<double>(processed_tokens_total);
  }
};

// Reconstructs the flat prompt of one logged step from the context timesteps
// recorded there (shared by token accounting, replay and report).
std::string reconstruct_step_prompt(const RunLog& log, std::size_t step_index,
                                    const DatasetIndex& index,
                                    const PromptTemplate& tmpl);

// Walks the training steps in order, reconstructing every prompt and
// verifying it against the logged hash and token count (IntegrityError on
// mismatch). cached = longest token prefix shared with any earlier prompt.
TokenAccount account_tokens(const RunLog& log, const DatasetIndex& index,
                            const Tokenizer& tok, const PromptTemplate& tmpl);

// Trailing-window usage of one stored context slot in an approximate run.
struct ContextSlotSeries {
  std::size_t ctx_index = 0;
  std::size_t uses = 0;             // total selections
  double mean_reward_true = 0.0;    // over selecting steps
  std::vector<AccuracyPoint> hit_rate;  // per step: window share of this slot
  std::vector<AccuracyPoint> accuracy;  // points only at steps with hits
};

// Per-slot series over a trailing window. Throws ContractViolation when the
// log carries no context indices (not an approximate run).
std::vector<ContextSlotSeries> per_context_stats(const std::vector<StepEvent>& steps,
                                                 std::size_t window);

struct RunSummary {
  std::string algorithm;
  std::string backend;
  std::string task;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  bool truncated = false;  // fewer step events than the header planned
  double final_regret = 0.0;
  double mean_reward_true = 0.0;
  std::optional<double> zero_shot_accuracy;   // eval at t = 0
  std::optional<double> final_accuracy;       // last eval sweep
  std::vector<AccuracyPoint> eval_accuracy;   // all eval sweeps in order
  std::size_t warning_count = 0;
  bool window_saturated = false;
  std::size_t invalid_completions = 0;
  TokenAccount tokens;
  std::vector<ContextSlotSeries> per_context;
};

RunSummary summarize(const RunLog& log, const TokenAccount& tokens);

// Shortest round-trip decimal form, used wherever a double lands in a CSV
// or JSON artifact.
std::string format_double(double v);

void write_summary_json(const std::string& path, const RunSummary& summary);
void write_regret_csv(const std::string& path, const std::vector<RegretPoint>& points);
void write_accuracy_csv(const std::string& path,
                        const std::vector<AccuracyPoint>& points);

}  // namespace icrl
