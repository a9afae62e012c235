#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "icrl/dataset.hpp"
#include "icrl/episode.hpp"
#include "icrl/prompt.hpp"
#include "icrl/tokenizer.hpp"

namespace icrl {

// Worst-case episode capacity of a context window: the largest number of
// context episodes that is guaranteed to fit no matter which examples stream
// in. Episodes are costed adversarially (longest inputs, longest label,
// longer feedback verbalization) and the pending query slot is charged at the
// longest query in the pool.
struct CapacityEstimate {
  std::size_t episodes = 0;       // largest n that always fits
  std::size_t prompt_tokens = 0;  // adversarial prompt size at that n
  std::size_t window_tokens = 0;
  std::size_t reserved_tokens = 0;  // headroom kept out of the budget
  std::size_t chrome_tokens = 0;    // fixed prompt cost incl. worst query
  std::size_t worst_episode_tokens = 0;
  std::string worst_label;
  bool query_fits = false;  // zero-episode prompt fits at all
};

// Longest label by token count; ties resolve to the lexicographically first.
std::string worst_case_label(const LabelSpace& labels, const Tokenizer& tok);

// One worst-case episode per pool example, sorted by segment cost descending
// (stable, so pool order breaks ties), timesteps reassigned 1..N in that
// order. Every episode carries the worst-case label; in icrl mode it also
// carries whichever reward sign verbalizes longer.
std::vector<Episode> adversarial_episodes(const std::vector<Example>& pool,
                                          const LabelSpace& labels,
                                          const PromptTemplate& tmpl,
                                          PromptMode mode, const Tokenizer& tok);

// The pool example whose pending-query chrome costs the most tokens.
Example worst_query(const std::vector<Example>& pool, const PromptTemplate& tmpl,
                    PromptMode mode, const Tokenizer& tok);

// budget.overhead_tokens is treated as reserved headroom on top of the
// rendered prompt (generation allowance etc.), not as the chrome cost; the
// chrome is measured here. Throws ConfigError on an empty pool or label set.
CapacityEstimate estimate_capacity(const std::vector<Example>& pool,
                                   const LabelSpace& labels, const Tokenizer& tok,
                                   const PromptTemplate& tmpl, PromptMode mode,
                                   const TokenBudget& budget);

}  // namespace icrl
