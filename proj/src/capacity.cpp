#include "icrl/capacity.hpp"

#include <algorithm>
#include <numeric>

#include "icrl/errors.hpp"
#include "icrl/reward.hpp"

namespace icrl {

std::string worst_case_label(const LabelSpace& labels, const Tokenizer& tok) {
  if (labels.labels.empty()) throw ConfigError("label space is empty");
  // labels are stored sorted, so keeping only strict improvements makes ties
  // resolve to the lexicographically first label.
  const std::string* best = &labels.labels.front();
  std::size_t best_cost = tok.count(*best);
  for (const std::string& label : labels.labels) {
    std::size_t cost = tok.count(label);
    if (cost > best_cost) {
      best = &label;
      best_cost = cost;
    }
  }
  return *best;
}

namespace {

// Reward sign whose feedback string costs more tokens for this prediction.
RewardValue worst_reward(const std::string& prediction, const Tokenizer& tok) {
  RewardValue pos{1, true};
  RewardValue neg{0, true};
  std::size_t pos_cost = tok.count(verbalize_reward(prediction, pos));
  std::size_t neg_cost = tok.count(verbalize_reward(prediction, neg));
  return pos_cost >= neg_cost ? pos : neg;
}

}  // namespace

std::vector<Episode> adversarial_episodes(const std::vector<Example>& pool,
                                          const LabelSpace& labels,
                                          const PromptTemplate& tmpl,
                                          PromptMode mode, const Tokenizer& tok) {
  if (pool.empty()) throw ConfigError("example pool is empty");
  const std::string label = worst_case_label(labels, tok);
  RewardValue reward{0, false};
  if (mode == PromptMode::icrl) reward = worst_reward(label, tok);

  std::vector<Episode> eps;
  eps.reserve(pool.size());
  for (const Example& ex : pool) {
    Episode e;
    e.example = ex;
    if (mode == PromptMode::icl) e.example.gold_label = label;
    e.prediction = label;
    e.reward = reward;
    eps.push_back(std::move(e));
  }

  std::vector<std::size_t> costs(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) {
    costs[i] = episode_token_cost(eps[i], tmpl, mode, tok);
  }
  std::vector<std::size_t> order(eps.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return costs[a] > costs[b]; });

  std::vector<Episode> sorted;
  sorted.reserve(eps.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    Episode e = std::move(eps[order[i]]);
    e.t = i + 1;
    sorted.push_back(std::move(e));
  }
  return sorted;
}

Example worst_query(const std::vector<Example>& pool, const PromptTemplate& tmpl,
                    PromptMode mode, const Tokenizer& tok) {
  if (pool.empty()) throw ConfigError("example pool is empty");
  const Example* best = &pool.front();
  std::size_t best_cost = prompt_overhead_tokens(*best, tmpl, mode, tok);
  for (const Example& ex : pool) {
    std::size_t cost = prompt_overhead_tokens(ex, tmpl, mode, tok);
    if (cost > best_cost) {
      best = &ex;
      best_cost = cost;
    }
  }
  return *best;
}

CapacityEstimate estimate_capacity(const std::vector<Example>& pool,
                                   const LabelSpace& labels, const Tokenizer& tok,
                                   const PromptTemplate& tmpl, PromptMode mode,
                                   const TokenBudget& budget) {
  std::vector<Episode> eps = adversarial_episodes(pool, labels, tmpl, mode, tok);
  const Example query = worst_query(pool, tmpl, mode, tok);
  const std::size_t chrome = prompt_overhead_tokens(query, tmpl, mode, tok);

  // Prefix sums over descending costs: cum[n] = cost of the n worst episodes.
  std::vector<std::size_t> cum(eps.size() + 1, 0);
  for (std::size_t i = 0; i < eps.size(); ++i) {
    cum[i + 1] = cum[i] + episode_token_cost(eps[i], tmpl, mode, tok);
  }

  const auto fits = [&](std::size_t n) {
    std::size_t need = chrome + cum[n] + budget.overhead_tokens;
    return need <= budget.window_tokens;
  };

  CapacityEstimate est;
  est.window_tokens = budget.window_tokens;
  est.reserved_tokens = budget.overhead_tokens;
  est.chrome_tokens = chrome;
  est.worst_label = worst_case_label(labels, tok);
  est.worst_episode_tokens =
      eps.empty() ? 0 : episode_token_cost(eps.front(), tmpl, mode, tok);
  est.query_fits = fits(0);
  if (!est.query_fits) {
    est.episodes = 0;
    est.prompt_tokens = chrome;
    return est;
  }

  // Largest n with fits(n); fits is monotone because costs are nonnegative.
  std::size_t lo = 0, hi = eps.size();
  while (lo < hi) {
    std::size_t mid = lo + (hi - lo + 1) / 2;
    if (fits(mid)) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  est.episodes = lo;
  est.prompt_tokens = chrome + cum[lo];
  return est;
}

}  // namespace icrl
