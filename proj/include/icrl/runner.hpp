#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "icrl/context.hpp"
#include "icrl/dataset.hpp"
#include "icrl/policy.hpp"
#include "icrl/prompt.hpp"
#include "icrl/reward.hpp"
#include "icrl/run_log.hpp"
#include "icrl/tokenizer.hpp"

namespace icrl {

enum class Algorithm { naive, explorative, approximate, supervised_icl };

Algorithm algorithm_from_string(const std::string& s);
std::string to_string(Algorithm a);

enum class BufferAdmission { positive_only, all, negative_only };

BufferAdmission admission_from_string(const std::string& s);
std::string to_string(BufferAdmission a);

struct RunnerConfig {
  Algorithm algorithm = Algorithm::explorative;
  double p_keep = 0.1;
  std::size_t k = 8;
  SelectionStrategy selection = SelectionStrategy::uniform;
  DownsampleStrategy downsample = DownsampleStrategy::unbiased;
  RewardMode reward_mode = RewardMode::standard();
  // Unset: naive admits everything, explorative and approximate admit
  // positive rewards only; the *_visible reward kinds force their admission.
  std::optional<BufferAdmission> admission;
  // budget.overhead_tokens is reserved headroom on top of the rendered
  // prompt; per-step chrome is measured from the actual query.
  TokenBudget budget{4096, 0};
  std::size_t steps = 0;  // 0 means one pass over the training stream
  std::size_t eval_every = 500;
  std::size_t train_window = 256;
  std::size_t eval_concurrency = 1;
  std::uint64_t seed = 0;
  PromptTemplate tmpl;
  std::string task;  // defaults to the dataset task name

  // Rendering mode implied by algorithm and reward kind: supervised_icl
  // renders gold demonstrations, reward kind none renders predictions
  // without feedback lines, everything else renders full icrl prompts.
  PromptMode prompt_mode() const;
  // Admission actually in force (explicit, reward-kind override, or the
  // per-algorithm default).
  BufferAdmission effective_admission() const;
};

// Throws ConfigError on contradictory settings (e.g. approximate with a
// non-positive admission, k = 0, p_keep outside [0,1]).
void validate(const RunnerConfig& config);

struct RunInputs {
  DatasetSplit split;
  LabelSpace labels;
  std::shared_ptr<const Tokenizer> tokenizer;
  std::shared_ptr<PolicyBackend> backend;
};

// Everything run_experiment leaves behind, in memory. The optional writer
// receives the same events as they happen so an aborted run still leaves a
// usable log prefix on disk.
RunLog run_experiment(const RunnerConfig& config, const RunInputs& inputs,
                      RunLogWriter* writer = nullptr);

// Re-executes a logged run. Mock backends are re-driven and each regenerated
// event must match the stored log byte for byte; remote backends have their
// logged predictions substituted instead of calling out. A truncated log is
// resumed: verified up to its end, then continued live to completion.
// Returns the full (possibly extended) log.
RunLog replay_experiment(const RunnerConfig& config, const RunInputs& inputs,
                         const RunLog& stored, RunLogWriter* writer = nullptr);

// One sweep over the test set with a fixed context. Per-item rng streams are
// derived from (t, item index), so any fan-out degree yields identical
// results. Transport failures mark the event incomplete rather than aborting.
EvalEvent evaluate_test(PolicyBackend& backend, const std::vector<Episode>& ctx,
                        const std::vector<Example>& test, const LabelSpace& labels,
                        const PromptTemplate& tmpl, PromptMode mode,
                        const SeedSequence& seeds, std::uint64_t t,
                        std::size_t concurrency);

}  // namespace icrl
