#include "icrl/context.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "icrl/errors.hpp"

namespace icrl {

DownsampleStrategy downsample_from_string(const std::string& s) {
  if (s == "unbiased") return DownsampleStrategy::unbiased;
  if (s == "start_biased") return DownsampleStrategy::start_biased;
  if (s == "end_biased") return DownsampleStrategy::end_biased;
  throw ConfigError("unknown downsample strategy: '" + s + "'");
}

std::string to_string(DownsampleStrategy s) {
  switch (s) {
    case DownsampleStrategy::unbiased: return "unbiased";
    case DownsampleStrategy::start_biased: return "start_biased";
    case DownsampleStrategy::end_biased: return "end_biased";
  }
  throw ContractViolation("bad DownsampleStrategy");
}

SelectionStrategy selection_from_string(const std::string& s) {
  if (s == "uniform") return SelectionStrategy::uniform;
  if (s == "exact") return SelectionStrategy::exact;
  throw ConfigError("unknown selection strategy: '" + s + "'");
}

std::string to_string(SelectionStrategy s) {
  switch (s) {
    case SelectionStrategy::uniform: return "uniform";
    case SelectionStrategy::exact: return "exact";
  }
  throw ContractViolation("bad SelectionStrategy");
}

Context::Context(std::vector<Episode> entries, const PromptTemplate& tmpl,
                 PromptMode mode, const Tokenizer& tok)
    : entries_(std::move(entries)) {
  entry_costs_.reserve(entries_.size());
  for (const Episode& e : entries_) {
    entry_costs_.push_back(episode_token_cost(e, tmpl, mode, tok));
    token_len_ += entry_costs_.back();
  }
}

void Context::append(const Episode& e, const PromptTemplate& tmpl,
                     PromptMode mode, const Tokenizer& tok) {
  if (!entries_.empty() && e.t <= entries_.back().t) {
    throw ContractViolation("context entries must have ascending timesteps");
  }
  entries_.push_back(e);
  entry_costs_.push_back(episode_token_cost(e, tmpl, mode, tok));
  token_len_ += entry_costs_.back();
}

std::vector<std::uint64_t> Context::timesteps() const {
  std::vector<std::uint64_t> out;
  out.reserve(entries_.size());
  for (const Episode& e : entries_) out.push_back(e.t);
  return out;
}

Context build_naive_context(const EpisodeBuffer& buffer, const TokenBudget& budget,
                            const Tokenizer& tok, const PromptTemplate& tmpl,
                            PromptMode mode) {
  Context full(buffer.episodes(), tmpl, mode, tok);
  if (full.fits(budget)) return full;

  // Longest fitting suffix: walk back from the newest episode.
  const std::vector<Episode>& eps = buffer.episodes();
  const std::vector<std::size_t>& costs = full.entry_costs();
  std::size_t room = budget.episode_room();
  std::size_t acc = 0;
  std::size_t start = eps.size();
  while (start > 0 && acc + costs[start - 1] <= room) {
    acc += costs[start - 1];
    --start;
  }
  std::vector<Episode> tail(eps.begin() + static_cast<std::ptrdiff_t>(start),
                            eps.end());
  return Context(std::move(tail), tmpl, mode, tok);
}

Context build_explorative_context(const EpisodeBuffer& buffer, double p_keep,
                                  RngStream& rng, const PromptTemplate& tmpl,
                                  PromptMode mode, const Tokenizer& tok) {
  if (!(p_keep >= 0.0 && p_keep <= 1.0)) {
    throw ContractViolation("p_keep must lie in [0, 1]");
  }
  std::vector<Episode> kept;
  for (const Episode& e : buffer.episodes()) {
    if (rng.bernoulli(p_keep)) kept.push_back(e);
  }
  return Context(std::move(kept), tmpl, mode, tok);
}

Context downsample_context(const Context& ctx, const TokenBudget& budget,
                           DownsampleStrategy strategy, const Tokenizer& tok,
                           const PromptTemplate& tmpl, PromptMode mode,
                           RngStream& rng) {
  if (ctx.fits(budget)) return ctx;
  const std::vector<Episode>& eps = ctx.entries();
  const std::vector<std::size_t>& costs = ctx.entry_costs();
  const std::size_t room = budget.episode_room();

  switch (strategy) {
    case DownsampleStrategy::start_biased: {
      std::size_t acc = 0;
      std::size_t end = 0;
      while (end < eps.size() && acc + costs[end] <= room) {
        acc += costs[end];
        ++end;
      }
      std::vector<Episode> head(eps.begin(),
                                eps.begin() + static_cast<std::ptrdiff_t>(end));
      return Context(std::move(head), tmpl, mode, tok);
    }
    case DownsampleStrategy::end_biased: {
      std::size_t acc = 0;
      std::size_t start = eps.size();
      while (start > 0 && acc + costs[start - 1] <= room) {
        acc += costs[start - 1];
        --start;
      }
      std::vector<Episode> tail(eps.begin() + static_cast<std::ptrdiff_t>(start),
                                eps.end());
      return Context(std::move(tail), tmpl, mode, tok);
    }
    case DownsampleStrategy::unbiased: {
      // Remove uniformly random entries until the remainder fits.
      std::vector<Episode> live(eps);
      std::vector<std::size_t> live_costs(costs);
      std::size_t total = ctx.token_len();
      while (total > room && !live.empty()) {
        std::size_t i = rng.uniform_index(live.size());
        total -= live_costs[i];
        live.erase(live.begin() + static_cast<std::ptrdiff_t>(i));
        live_costs.erase(live_costs.begin() + static_cast<std::ptrdiff_t>(i));
      }
      return Context(std::move(live), tmpl, mode, tok);
    }
  }
  throw ContractViolation("bad DownsampleStrategy");
}

double context_log_probability(const Context& ctx, const EpisodeBuffer& buffer,
                               double p_keep) {
  if (!(p_keep >= 0.0 && p_keep <= 1.0)) {
    throw ContractViolation("p_keep must lie in [0, 1]");
  }
  const std::vector<Episode>& pool = buffer.episodes();
  const std::vector<Episode>& sub = ctx.entries();
  if (sub.size() > pool.size()) {
    throw ContractViolation("context is larger than its source buffer");
  }
  // Subsequence check by timestep; timesteps are strictly increasing on both
  // sides, so a single merge pass suffices.
  std::size_t j = 0;
  for (std::size_t i = 0; i < pool.size() && j < sub.size(); ++i) {
    if (pool[i].t == sub[j].t) ++j;
  }
  if (j != sub.size()) {
    throw ContractViolation("context is not a subsequence of the buffer");
  }

  const double in = static_cast<double>(sub.size());
  const double out = static_cast<double>(pool.size() - sub.size());
  const double neg_inf = -std::numeric_limits<double>::infinity();

  double log_p = 0.0;
  if (in > 0.0) {
    if (p_keep == 0.0) return neg_inf;
    log_p += in * std::log(p_keep);
  }
  if (out > 0.0) {
    if (p_keep == 1.0) return neg_inf;
    log_p += out * std::log1p(-p_keep);
  }
  return log_p;
}

double context_probability(const Context& ctx, const EpisodeBuffer& buffer,
                           double p_keep) {
  return std::exp(context_log_probability(ctx, buffer, p_keep));
}

ContextStore::ContextStore(std::size_t k, const PromptTemplate& tmpl,
                           PromptMode mode)
    : contexts_(k), tmpl_(tmpl), mode_(mode) {
  if (k == 0) throw ConfigError("context store needs at least one slot");
}

void ContextStore::expand(const Episode& episode, double p_keep, RngStream& rng,
                          const Tokenizer& tok) {
  if (!episode.reward.positive()) {
    throw ContractViolation("only positive-reward episodes expand the store");
  }
  for (Context& ctx : contexts_) {
    if (rng.bernoulli(p_keep)) ctx.append(episode, tmpl_, mode_, tok);
  }
}

SelectResult select_context(const ContextStore& store, SelectionStrategy strategy,
                            const EpisodeBuffer& buffer, double p_keep,
                            RngStream& rng) {
  const std::size_t k = store.k();
  if (strategy == SelectionStrategy::uniform) {
    return SelectResult{rng.uniform_index(k), false};
  }

  // Exact: weight each stored context by its probability under the Bernoulli
  // process, normalized over the store. Work in log space; a store where every
  // weight underflows to zero probability falls back to uniform.
  std::vector<double> log_w(k);
  double max_lw = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    log_w[i] = context_log_probability(store[i], buffer, p_keep);
    max_lw = std::max(max_lw, log_w[i]);
  }
  if (max_lw == -std::numeric_limits<double>::infinity()) {
    return SelectResult{rng.uniform_index(k), true};
  }

  double total = 0.0;
  std::vector<double> w(k);
  for (std::size_t i = 0; i < k; ++i) {
    w[i] = std::exp(log_w[i] - max_lw);
    total += w[i];
  }
  double target = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    acc += w[i];
    if (target < acc) return SelectResult{i, false};
  }
  return SelectResult{k - 1, false};
}

}  // namespace icrl
