#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "icrl/episode.hpp"
#include "icrl/prompt.hpp"
#include "icrl/rng.hpp"
#include "icrl/tokenizer.hpp"

namespace icrl {

// Rule for shrinking an over-budget context: random removal, longest prefix,
// or longest suffix.
enum class DownsampleStrategy { unbiased, start_biased, end_biased };

DownsampleStrategy downsample_from_string(const std::string& s);
std::string to_string(DownsampleStrategy s);

// An ordered subset of buffer episodes destined for one prompt. Per-entry
// token costs are cached under the (tokenizer, template, mode) the context
// was built with; the cache is rebuilt whenever those change.
class Context {
 public:
  Context() = default;
  Context(std::vector<Episode> entries, const PromptTemplate& tmpl,
          PromptMode mode, const Tokenizer& tok);

  const std::vector<Episode>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // Sum of cached per-episode segment costs.
  std::size_t token_len() const { return token_len_; }
  const std::vector<std::size_t>& entry_costs() const { return entry_costs_; }

  bool fits(const TokenBudget& budget) const {
    return token_len_ <= budget.episode_room();
  }

  // Appends one episode (ascending t), updating the cached cost.
  void append(const Episode& e, const PromptTemplate& tmpl, PromptMode mode,
              const Tokenizer& tok);

  // Timesteps of the entries, for run-log serialization.
  std::vector<std::uint64_t> timesteps() const;

 private:
  std::vector<Episode> entries_;
  std::vector<std::size_t> entry_costs_;
  std::size_t token_len_ = 0;
};

// All retained episodes in observation order if they fit, otherwise the
// longest suffix of recent episodes that fits the budget.
Context build_naive_context(const EpisodeBuffer& buffer, const TokenBudget& budget,
                            const Tokenizer& tok, const PromptTemplate& tmpl,
                            PromptMode mode);

// Fresh independent Bernoulli(p_keep) draw per buffer episode, ascending t,
// order preserved.
Context build_explorative_context(const EpisodeBuffer& buffer, double p_keep,
                                  RngStream& rng, const PromptTemplate& tmpl,
                                  PromptMode mode, const Tokenizer& tok);

// Shrinks ctx until it fits. start_biased keeps the maximal fitting prefix,
// end_biased the maximal fitting suffix, unbiased removes uniformly random
// entries until it fits. No-op when ctx already fits.
Context downsample_context(const Context& ctx, const TokenBudget& budget,
                           DownsampleStrategy strategy, const Tokenizer& tok,
                           const PromptTemplate& tmpl, PromptMode mode,
                           RngStream& rng);

// log P(ctx | buffer, p_keep) under the per-episode Bernoulli process:
// |ctx| inclusions and |buffer| - |ctx| exclusions. Throws ContractViolation
// if ctx is not a subsequence of the buffer (by timestep).
double context_log_probability(const Context& ctx, const EpisodeBuffer& buffer,
                               double p_keep);

// exp of the above.
double context_probability(const Context& ctx, const EpisodeBuffer& buffer,
                           double p_keep);

// The K cached contexts of the approximate scheme. K is fixed for a run.
class ContextStore {
 public:
  ContextStore(std::size_t k, const PromptTemplate& tmpl, PromptMode mode);
  std::size_t k() const { return contexts_.size(); }
  const Context& operator[](std::size_t i) const { return contexts_[i]; }
  const std::vector<Context>& contexts() const { return contexts_; }

  // Appends episode to each context independently with probability p_keep,
  // drawing in ascending context index. The episode must carry a positive
  // observed reward; everything stored here ends up in prompts as-is.
  void expand(const Episode& episode, double p_keep, RngStream& rng,
              const Tokenizer& tok);

 private:
  std::vector<Context> contexts_;
  PromptTemplate tmpl_;
  PromptMode mode_;
};

enum class SelectionStrategy { uniform, exact };

SelectionStrategy selection_from_string(const std::string& s);
std::string to_string(SelectionStrategy s);

struct SelectResult {
  std::size_t index = 0;
  // True when exact selection found every stored context at probability zero
  // and fell back to uniform.
  bool exact_underflow = false;
};

// uniform: index ~ U(0..K-1). exact: index drawn proportionally to each
// stored context's Bernoulli-process probability given the current buffer,
// normalized over the K stored contexts.
SelectResult select_context(const ContextStore& store, SelectionStrategy strategy,
                            const EpisodeBuffer& buffer, double p_keep,
                            RngStream& rng);

}  // namespace icrl
