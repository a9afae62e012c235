#include "icrl/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "icrl/errors.hpp"
#include "icrl/reward.hpp"

namespace icrl {

namespace {

using nlohmann::json;

double entropy_bits(const std::vector<std::size_t>& counts, std::size_t total) {
  if (total == 0) return 0.0;
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

}  // namespace

std::vector<RegretPoint> compute_regret(const std::vector<StepEvent>& steps) {
  std::vector<RegretPoint> out;
  out.reserve(steps.size());
  double cum = 0.0;
  for (const StepEvent& s : steps) {
    double instant = s.reward_true > 0 ? 0.0 : 1.0;
    cum += instant;
    out.push_back({s.t, instant, cum});
  }
  return out;
}

std::vector<AccuracyPoint> running_train_accuracy(const std::vector<StepEvent>& steps,
                                                  std::size_t window) {
  if (window == 0) throw ContractViolation("accuracy window must be positive");
  std::vector<AccuracyPoint> out;
  out.reserve(steps.size());
  double in_window = 0.0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    in_window += steps[i].reward_true > 0 ? 1.0 : 0.0;
    if (i >= window) {
      in_window -= steps[i - window].reward_true > 0 ? 1.0 : 0.0;
    }
    std::size_t denom = std::min(i + 1, window);
    out.push_back({steps[i].t, in_window / static_cast<double>(denom)});
  }
  return out;
}

double Confusion::accuracy() const {
  if (total == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) correct += counts[i][i];
  return static_cast<double>(correct) / static_cast<double>(total);
}

double Confusion::predicted_entropy() const {
  return entropy_bits(predicted_marginal, total);
}

double Confusion::true_entropy() const { return entropy_bits(true_marginal, total); }

Confusion confusion_matrix(const std::vector<std::string>& gold,
                           const std::vector<std::string>& pred,
                           const LabelSpace& labels) {
  if (gold.size() != pred.size()) {
    throw ContractViolation("confusion: gold and prediction counts differ");
  }
  const std::size_t n = labels.labels.size();
  Confusion c;
  c.labels = labels.labels;
  c.counts.assign(n, std::vector<std::size_t>(n, 0));
  c.predicted_marginal.assign(n, 0);
  c.true_marginal.assign(n, 0);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::size_t g = labels.index_of(gold[i]);
    std::size_t p = labels.index_of(pred[i]);
    ++c.counts[p][g];
    ++c.predicted_marginal[p];
    ++c.true_marginal[g];
    ++c.total;
  }
  return c;
}

Confusion train_confusion(const std::vector<StepEvent>& steps,
                          const DatasetIndex& index, const LabelSpace& labels) {
  std::vector<std::string> gold, pred;
  gold.reserve(steps.size());
  pred.reserve(steps.size());
  for (const StepEvent& s : steps) {
    gold.push_back(index.by_id(s.example_id).gold_label);
    pred.push_back(s.prediction);
  }
  return confusion_matrix(gold, pred, labels);
}

Confusion eval_confusion(const EvalEvent& eval, const std::vector<Example>& test,
                         const LabelSpace& labels) {
  if (eval.predictions.size() != test.size()) {
    throw ContractViolation("confusion: eval predictions do not cover the test set");
  }
  std::vector<std::string> gold;
  gold.reserve(test.size());
  for (const Example& ex : test) gold.push_back(ex.gold_label);
  return confusion_matrix(gold, eval.predictions, labels);
}

std::size_t PrefixTrie::longest_prefix(const std::vector<std::string>& seq) const {
  std::uint32_t node = 0;
  std::size_t depth = 0;
  for (const std::string& token : seq) {
    auto tid = token_ids_.find(token);
    if (tid == token_ids_.end()) break;
    const auto& children = nodes_[node].children;
    auto child = children.find(tid->second);
    if (child == children.end()) break;
    node = child->second;
    ++depth;
  }
  return depth;
}

void PrefixTrie::insert(const std::vector<std::string>& seq) {
  std::uint32_t node = 0;
  for (const std::string& token : seq) {
    auto [tid_it, _] =
        token_ids_.emplace(token, static_cast<std::uint32_t>(token_ids_.size()));
    auto& children = nodes_[node].children;
    auto child = children.find(tid_it->second);
    if (child != children.end()) {
      node = child->second;
      continue;
    }
    std::uint32_t next = static_cast<std::uint32_t>(nodes_.size());
    children.emplace(tid_it->second, next);
    nodes_.emplace_back();
    node = next;
  }
}

std::string reconstruct_step_prompt(const RunLog& log, std::size_t step_index,
                                    const DatasetIndex& index,
                                    const PromptTemplate& tmpl) {
  if (step_index >= log.steps.size()) {
    throw ContractViolation("step index out of range");
  }
  const PromptMode mode = prompt_mode_from_string(log.header.mode);
  const StepEvent& step = log.steps[step_index];

  // Context timesteps refer to earlier step events; rebuild their episodes
  // from what was logged there.
  std::vector<Episode> ctx;
  ctx.reserve(step.ctx.size());
  std::size_t cursor = 0;
  for (std::uint64_t ts : step.ctx) {
    while (cursor < log.steps.size() && log.steps[cursor].t < ts) ++cursor;
    if (cursor >= log.steps.size() || log.steps[cursor].t != ts) {
      throw IntegrityError("step t=" + std::to_string(step.t) +
                           " references unknown context timestep " +
                           std::to_string(ts));
    }
    const StepEvent& src = log.steps[cursor];
    Episode e;
    e.t = src.t;
    e.example = index.by_id(src.example_id);
    e.prediction = src.prediction;
    e.reward = RewardValue{src.reward_obs, src.reward_observed};
    ctx.push_back(std::move(e));
  }

  const Example& query = index.by_id(step.example_id);
  return render_flat_prompt(ctx, query, tmpl, mode);
}

TokenAccount account_tokens(const RunLog& log, const DatasetIndex& index,
                            const Tokenizer& tok, const PromptTemplate& tmpl) {
  TokenAccount acc;
  PrefixTrie trie;
  acc.per_step.reserve(log.steps.size());
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    const StepEvent& step = log.steps[i];
    const std::string flat = reconstruct_step_prompt(log, i, index, tmpl);
    if (prompt_hash(flat) != step.prompt_hash) {
      throw IntegrityError("prompt hash mismatch at t=" + std::to_string(step.t));
    }
    const std::vector<std::string> tokens = tok.tokens(flat);
    if (tokens.size() != step.prompt_tokens) {
      throw IntegrityError("prompt token count mismatch at t=" +
                           std::to_string(step.t) + ": log says " +
                           std::to_string(step.prompt_tokens) + ", rendered " +
                           std::to_string(tokens.size()));
    }
    StepTokens st;
    st.t = step.t;
    st.prompt_tokens = tokens.size();
    st.cached_prefix_tokens = trie.longest_prefix(tokens);
    st.processed_tokens = st.prompt_tokens - st.cached_prefix_tokens;
    trie.insert(tokens);

    acc.prompt_tokens_total += st.prompt_tokens;
    acc.cached_tokens_total += st.cached_prefix_tokens;
    acc.processed_tokens_total += st.processed_tokens;
    acc.completion_tokens_total += step.completion_tokens;
    acc.per_step.push_back(st);
  }
  return acc;
}

std::vector<ContextSlotSeries> per_context_stats(const std::vector<StepEvent>& steps,
                                                 std::size_t window) {
  if (window == 0) throw ContractViolation("stats window must be positive");
  bool any = false;
  std::size_t max_index = 0;
  for (const StepEvent& s : steps) {
    if (s.ctx_index.has_value()) {
      any = true;
      max_index = std::max(max_index, *s.ctx_index);
    }
  }
  if (!any) {
    throw ContractViolation("per-context stats need an approximate-scheme log");
  }

  std::vector<ContextSlotSeries> out(max_index + 1);
  for (std::size_t k = 0; k < out.size(); ++k) out[k].ctx_index = k;

  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::size_t lo = i + 1 > window ? i + 1 - window : 0;
    const double denom = static_cast<double>(i + 1 - lo);
    std::vector<std::size_t> hits(out.size(), 0);
    std::vector<double> reward(out.size(), 0.0);
    for (std::size_t j = lo; j <= i; ++j) {
      if (!steps[j].ctx_index.has_value()) continue;
      std::size_t k = *steps[j].ctx_index;
      ++hits[k];
      reward[k] += steps[j].reward_true > 0 ? 1.0 : 0.0;
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k].hit_rate.push_back(
          {steps[i].t, static_cast<double>(hits[k]) / denom});
      if (hits[k] > 0) {
        out[k].accuracy.push_back(
            {steps[i].t, reward[k] / static_cast<double>(hits[k])});
      }
    }
  }

  for (const StepEvent& s : steps) {
    if (!s.ctx_index.has_value()) continue;
    ContextSlotSeries& slot = out[*s.ctx_index];
    ++slot.uses;
    slot.mean_reward_true += s.reward_true > 0 ? 1.0 : 0.0;
  }
  for (ContextSlotSeries& slot : out) {
    if (slot.uses > 0) slot.mean_reward_true /= static_cast<double>(slot.uses);
  }
  return out;
}

RunSummary summarize(const RunLog& log, const TokenAccount& tokens) {
  RunSummary s;
  s.algorithm = log.header.algorithm;
  s.backend = log.header.backend;
  s.task = log.header.task;
  s.seed = log.header.seed;
  s.steps = log.steps.size();
  s.truncated = log.steps.size() < log.header.steps_planned;
  s.tokens = tokens;

  double correct = 0.0;
  for (const StepEvent& e : log.steps) {
    if (e.reward_true > 0) correct += 1.0;
    if (e.invalid) ++s.invalid_completions;
  }
  s.final_regret = static_cast<double>(log.steps.size()) - correct;
  s.mean_reward_true =
      log.steps.empty() ? 0.0 : correct / static_cast<double>(log.steps.size());

  for (const EvalEvent& e : log.evals) {
    s.eval_accuracy.push_back({e.t, e.accuracy});
    if (e.t == 0) s.zero_shot_accuracy = e.accuracy;
    s.final_accuracy = e.accuracy;
  }
  s.warning_count = log.warnings.size();
  for (const WarningEvent& w : log.warnings) {
    if (w.code == "window_saturated") s.window_saturated = true;
  }
  bool approximate = false;
  for (const StepEvent& e : log.steps) {
    if (e.ctx_index.has_value()) {
      approximate = true;
      break;
    }
  }
  if (approximate) {
    std::size_t window = log.header.train_window == 0 ? 256 : log.header.train_window;
    s.per_context = per_context_stats(log.steps, window);
  }
  return s;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw ContractViolation("double formatting failed");
  return std::string(buf, ptr);
}

namespace {

std::ofstream open_artifact(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open artifact for writing: " + path);
  return out;
}

}  // namespace

void write_summary_json(const std::string& path, const RunSummary& s) {
  json j;
  j["algorithm"] = s.algorithm;
  j["backend"] = s.backend;
  j["task"] = s.task;
  j["seed"] = s.seed;
  j["steps"] = s.steps;
  j["truncated"] = s.truncated;
  j["final_regret"] = s.final_regret;
  j["mean_reward_true"] = s.mean_reward_true;
  if (s.zero_shot_accuracy.has_value()) j["zero_shot_accuracy"] = *s.zero_shot_accuracy;
  if (s.final_accuracy.has_value()) j["final_accuracy"] = *s.final_accuracy;
  json evals = json::array();
  for (const AccuracyPoint& p : s.eval_accuracy) {
    evals.push_back({{"t", p.t}, {"accuracy", p.accuracy}});
  }
  j["eval_accuracy"] = std::move(evals);
  j["warning_count"] = s.warning_count;
  j["window_saturated"] = s.window_saturated;
  j["invalid_completions"] = s.invalid_completions;
  j["tokens_processed"] = s.tokens.processed_tokens_total;
  j["tokens"] = {{"prompt_total", s.tokens.prompt_tokens_total},
                 {"cached_total", s.tokens.cached_tokens_total},
                 {"processed_total", s.tokens.processed_tokens_total},
                 {"completion_total", s.tokens.completion_tokens_total},
                 {"cache_ratio", s.tokens.cache_ratio()}};
  if (!s.per_context.empty()) {
    json slots = json::array();
    for (const ContextSlotSeries& slot : s.per_context) {
      slots.push_back({{"ctx_index", slot.ctx_index},
                       {"uses", slot.uses},
                       {"mean_reward_true", slot.mean_reward_true}});
    }
    j["per_context"] = std::move(slots);
  }
  auto out = open_artifact(path);
  out << j.dump(2) << '\n';
}

void write_regret_csv(const std::string& path,
                      const std::vector<RegretPoint>& points) {
  auto out = open_artifact(path);
  out << "t,instant_regret,cumulative_regret\n";
  for (const RegretPoint& p : points) {
    out << p.t << ',' << format_double(p.instant) << ','
        << format_double(p.cumulative) << '\n';
  }
}

void write_accuracy_csv(const std::string& path,
                        const std::vector<AccuracyPoint>& points) {
  auto out = open_artifact(path);
  out << "t,accuracy\n";
  for (const AccuracyPoint& p : points) {
    out << p.t << ',' << format_double(p.accuracy) << '\n';
  }
}

}  // namespace icrl
