#include "icrl/runner.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "icrl/capacity.hpp"
#include "icrl/errors.hpp"
#include "icrl/metrics.hpp"

namespace icrl {

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "naive") return Algorithm::naive;
  if (s == "explorative") return Algorithm::explorative;
  if (s == "approximate") return Algorithm::approximate;
  if (s == "supervised_icl") return Algorithm::supervised_icl;
  throw ConfigError("unknown algorithm '" + s + "'");
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::naive: return "naive";
    case Algorithm::explorative: return "explorative";
    case Algorithm::approximate: return "approximate";
    case Algorithm::supervised_icl: return "supervised_icl";
  }
  return "?";
}

BufferAdmission admission_from_string(const std::string& s) {
  if (s == "positive_only") return BufferAdmission::positive_only;
  if (s == "all") return BufferAdmission::all;
  if (s == "negative_only") return BufferAdmission::negative_only;
  throw ConfigError("unknown buffer admission '" + s + "'");
}

std::string to_string(BufferAdmission a) {
  switch (a) {
    case BufferAdmission::positive_only: return "positive_only";
    case BufferAdmission::all: return "all";
    case BufferAdmission::negative_only: return "negative_only";
  }
  return "?";
}

PromptMode RunnerConfig::prompt_mode() const {
  if (algorithm == Algorithm::supervised_icl) return PromptMode::icl;
  if (reward_mode.kind == RewardKind::none) return PromptMode::icrl_no_feedback;
  return PromptMode::icrl;
}

BufferAdmission RunnerConfig::effective_admission() const {
  if (reward_mode.kind == RewardKind::positive_only_visible) {
    return BufferAdmission::positive_only;
  }
  if (reward_mode.kind == RewardKind::negative_only_visible) {
    return BufferAdmission::negative_only;
  }
  if (admission.has_value()) return *admission;
  return algorithm == Algorithm::naive ? BufferAdmission::all
                                       : BufferAdmission::positive_only;
}

void validate(const RunnerConfig& config) {
  std::vector<std::string> errors;
  if (!(config.p_keep >= 0.0 && config.p_keep <= 1.0)) {
    errors.push_back("p_keep must lie in [0, 1]");
  }
  if (config.algorithm == Algorithm::approximate && config.k == 0) {
    errors.push_back("K must be >= 1");
  }
  if (config.eval_every == 0) errors.push_back("eval_every must be >= 1");
  if (config.train_window == 0) errors.push_back("train_window must be >= 1");
  if (config.eval_concurrency == 0) {
    errors.push_back("eval_concurrency must be >= 1");
  }
  if (config.budget.window_tokens == 0) {
    errors.push_back("budget.window_tokens must be >= 1");
  }
  if (config.reward_mode.kind == RewardKind::noisy &&
      !(config.reward_mode.p_flip >= 0.0 && config.reward_mode.p_flip <= 1.0)) {
    errors.push_back("reward p_flip must lie in [0, 1]");
  }
  if (config.algorithm == Algorithm::approximate &&
      config.effective_admission() != BufferAdmission::positive_only) {
    errors.push_back(
        "approximate context expansion admits positive rewards only; admission '" +
        to_string(config.effective_admission()) + "' contradicts it");
  }
  if (config.reward_mode.kind == RewardKind::positive_only_visible &&
      config.admission.has_value() &&
      *config.admission != BufferAdmission::positive_only) {
    errors.push_back("positive_only_visible rewards force positive_only admission");
  }
  if (config.reward_mode.kind == RewardKind::negative_only_visible &&
      config.admission.has_value() &&
      *config.admission != BufferAdmission::negative_only) {
    errors.push_back("negative_only_visible rewards force negative_only admission");
  }
  if (!errors.empty()) {
    std::string all = "invalid run configuration:";
    for (const std::string& e : errors) all += "\n  - " + e;
    throw ConfigError(all);
  }
}

namespace {

// Window budget for one step: reserve covers the chrome measured from the
// actual pending query plus the configured headroom.
TokenBudget step_budget(const RunnerConfig& config, const Example& query,
                        PromptMode mode, const Tokenizer& tok) {
  TokenBudget b;
  b.window_tokens = config.budget.window_tokens;
  b.overhead_tokens = config.budget.overhead_tokens +
                      prompt_overhead_tokens(query, config.tmpl, mode, tok);
  return b;
}

bool admits(BufferAdmission admission, const RewardValue& reward) {
  switch (admission) {
    case BufferAdmission::positive_only: return reward.value > 0;
    case BufferAdmission::all: return true;
    case BufferAdmission::negative_only: return reward.value <= 0;
  }
  throw ContractViolation("bad BufferAdmission");
}

RunHeader make_header(const RunnerConfig& config, const RunInputs& inputs,
                      std::size_t steps_planned) {
  RunHeader h;
  h.algorithm = to_string(config.algorithm);
  h.backend = inputs.backend->name();
  h.dialect = to_string(config.tmpl.dialect);
  h.mode = to_string(config.prompt_mode());
  h.tokenizer = inputs.tokenizer->name();
  h.seed = config.seed;
  h.window_tokens = config.budget.window_tokens;
  h.overhead_tokens = config.budget.overhead_tokens;
  h.task = config.task.empty() ? inputs.labels.task_name : config.task;
  h.train_size = inputs.split.train.size();
  h.test_size = inputs.split.test.size();
  h.steps_planned = steps_planned;
  h.eval_every = config.eval_every;
  h.train_window = config.train_window;
  h.label_space = inputs.labels.labels;
  return h;
}

// Mirrors events into memory and (when a writer exists) onto disk.
struct Emitter {
  RunLog& log;
  RunLogWriter* writer;

  void step(const StepEvent& e) {
    log.steps.push_back(e);
    if (writer != nullptr) writer->append(e);
  }
  void eval(const EvalEvent& e) {
    log.evals.push_back(e);
    if (writer != nullptr) writer->append(e);
  }
  void warning(const WarningEvent& e) {
    log.warnings.push_back(e);
    if (writer != nullptr) writer->append(e);
  }
};

std::size_t completion_token_count(const PredictionResult& r, const Tokenizer& tok) {
  return r.completion_tokens != 0 ? r.completion_tokens : tok.count(r.raw_text);
}

void run_supervised_icl(const RunnerConfig& config, const RunInputs& inputs,
                        Emitter& emit, const SeedSequence& seeds) {
  const Tokenizer& tok = *inputs.tokenizer;
  const std::vector<Example>& train = inputs.split.train;
  CapacityEstimate cap = estimate_capacity(train, inputs.labels, tok, config.tmpl,
                                           PromptMode::icl, config.budget);
  std::size_t horizon = config.steps == 0 ? train.size() : config.steps;
  horizon = std::min({horizon, train.size(), cap.episodes});

  std::vector<Episode> ctx;
  ctx.reserve(horizon);
  for (std::uint64_t t = 0; t <= horizon; t += config.eval_every) {
    while (ctx.size() < t) {
      Episode e;
      e.t = ctx.size() + 1;
      e.example = train[ctx.size()];
      e.prediction = e.example.gold_label;
      e.reward = RewardValue{1, true};
      ctx.push_back(std::move(e));
    }
    emit.eval(evaluate_test(*inputs.backend, ctx, inputs.split.test, inputs.labels,
                            config.tmpl, PromptMode::icl, seeds, t,
                            config.eval_concurrency));
  }
}

}  // namespace

EvalEvent evaluate_test(PolicyBackend& backend, const std::vector<Episode>& ctx,
                        const std::vector<Example>& test, const LabelSpace& labels,
                        const PromptTemplate& tmpl, PromptMode mode,
                        const SeedSequence& seeds, std::uint64_t t,
                        std::size_t concurrency) {
  const std::size_t n = test.size();
  EvalEvent ev;
  ev.t = t;
  ev.predictions.assign(n, std::string());
  std::vector<char> completed(n, 0);
  std::vector<char> correct(n, 0);

  std::atomic<std::size_t> cursor{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto work = [&] {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= n) return;
      try {
        PredictionRequest req;
        req.transcript = render_prompt(ctx, test[i], tmpl, mode);
        req.answer_prefix = tmpl.answer_prefix;
        req.example = test[i];
        req.ctx = ctx;
        req.mode = mode;
        req.labels = &labels;
        req.step = t;
        req.eval_index = i;
        RngStream rng = seeds.stream(streams::kEvalPolicy, t, i);
        PredictionResult r = backend.predict(req, rng);
        if (r.invalid && r.label.empty()) continue;  // rejected -> missing
        ev.predictions[i] = r.label;
        completed[i] = 1;
        correct[i] = is_correct(test[i], r.label) ? 1 : 0;
      } catch (const TransportError&) {
        // endpoint trouble on one item: leave it missing, keep sweeping
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(concurrency, n));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::size_t done = 0, hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (completed[i]) {
      ++done;
      hits += correct[i];
    } else {
      ev.incomplete = true;
      ev.missing_ids.push_back(test[i].id);
    }
  }
  ev.accuracy = done == 0 ? 0.0
                          : static_cast<double>(hits) / static_cast<double>(done);
  return ev;
}

RunLog run_experiment(const RunnerConfig& config, const RunInputs& inputs,
                      RunLogWriter* writer) {
  validate(config);
  if (inputs.tokenizer == nullptr || inputs.backend == nullptr) {
    throw ContractViolation("run inputs need a tokenizer and a backend");
  }
  const Tokenizer& tok = *inputs.tokenizer;
  const PromptMode mode = config.prompt_mode();
  const SeedSequence seeds(config.seed);
  const std::vector<Example>& train = inputs.split.train;

  std::size_t steps = config.steps == 0 ? train.size() : config.steps;
  if (config.algorithm != Algorithm::supervised_icl && steps > train.size()) {
    throw ConfigError("run wants " + std::to_string(steps) +
                      " steps but the split holds " +
                      std::to_string(train.size()) + " training examples");
  }

  RunLog log;
  log.header = make_header(
      config, inputs,
      config.algorithm == Algorithm::supervised_icl ? 0 : steps);
  if (writer != nullptr) writer->begin(log.header);
  Emitter emit{log, writer};

  if (config.algorithm == Algorithm::supervised_icl) {
    run_supervised_icl(config, inputs, emit, seeds);
    return log;
  }

  RngStream ctx_rng = seeds.stream(streams::kContextBernoulli);
  RngStream select_rng = seeds.stream(streams::kContextSelection);
  RngStream down_rng = seeds.stream(streams::kDownsample);
  RngStream noise_rng = seeds.stream(streams::kRewardNoise);
  RngStream policy_rng = seeds.stream(streams::kPolicySampling);

  EpisodeBuffer buffer;
  std::optional<ContextStore> store;
  if (config.algorithm == Algorithm::approximate) {
    store.emplace(config.k, config.tmpl, mode);
  }
  const BufferAdmission admission = config.effective_admission();
  bool saturation_reported = false;

  emit.eval(evaluate_test(*inputs.backend, {}, inputs.split.test, inputs.labels,
                          config.tmpl, mode, seeds, 0, config.eval_concurrency));

  for (std::uint64_t t = 1; t <= steps; ++t) {
    const Example& example = train[t - 1];
    const TokenBudget budget = step_budget(config, example, mode, tok);

    Context ctx;
    std::optional<std::size_t> ctx_index;
    switch (config.algorithm) {
      case Algorithm::naive:
        ctx = build_naive_context(buffer, budget, tok, config.tmpl, mode);
        break;
      case Algorithm::explorative:
        ctx = build_explorative_context(buffer, config.p_keep, ctx_rng,
                                        config.tmpl, mode, tok);
        if (!ctx.fits(budget)) {
          ctx = downsample_context(ctx, budget, config.downsample, tok,
                                   config.tmpl, mode, down_rng);
        }
        break;
      case Algorithm::approximate: {
        SelectResult sel = select_context(*store, config.selection, buffer,
                                          config.p_keep, select_rng);
        ctx_index = sel.index;
        if (sel.exact_underflow) {
          emit.warning({t, "exact_underflow",
                        "all stored contexts at probability zero; picked "
                        "uniformly"});
        }
        ctx = (*store)[sel.index];
        if (!ctx.fits(budget)) {
          // The store keeps the full context; only this render is clipped.
          ctx = downsample_context(ctx, budget, DownsampleStrategy::end_biased,
                                   tok, config.tmpl, mode, down_rng);
          if (!saturation_reported) {
            emit.warning({t, "window_saturated",
                          "stored context " + std::to_string(sel.index) +
                              " exceeds the window; rendering its newest "
                              "fitting suffix"});
            saturation_reported = true;
          }
        }
        break;
      }
      case Algorithm::supervised_icl:
        throw ContractViolation("unreachable");
    }

    PredictionRequest req;
    req.transcript = render_prompt(ctx.entries(), example, config.tmpl, mode);
    req.answer_prefix = config.tmpl.answer_prefix;
    req.example = example;
    req.ctx = ctx.entries();
    req.mode = mode;
    req.labels = &inputs.labels;
    req.step = t;

    const std::string flat = render_flat(req.transcript, config.tmpl);
    PredictionResult pred = inputs.backend->predict(req, policy_rng);
    if (pred.invalid && pred.label.empty()) {
      throw Error("backend rejected the completion at t=" + std::to_string(t) +
                  ": '" + pred.raw_text + "'");
    }

    const int reward_true = is_correct(example, pred.label) ? 1 : 0;
    const RewardValue observed =
        evaluate_reward(example, pred.label, config.reward_mode, noise_rng);

    Episode ep;
    ep.t = t;
    ep.example = example;
    ep.prediction = pred.label;
    ep.reward = observed;

    const bool admitted = admits(admission, observed);
    if (admitted) {
      if (store.has_value()) {
        store->expand(ep, config.p_keep, ctx_rng, tok);
      }
      buffer.push(ep);
    }

    StepEvent se;
    se.t = t;
    se.example_id = example.id;
    se.ctx = ctx.timesteps();
    se.ctx_index = ctx_index;
    se.prompt_hash = prompt_hash(flat);
    se.prompt_tokens = tok.count(flat);
    se.prediction = pred.label;
    se.raw_text = pred.raw_text;
    se.completion_tokens = completion_token_count(pred, tok);
    se.reward_true = reward_true;
    se.reward_obs = observed.value;
    se.reward_observed = observed.observed;
    se.admitted = admitted;
    se.invalid = pred.invalid;
    se.resampled = pred.resampled;
    se.fallback_used = pred.fallback_used;
    emit.step(se);

    if (t % config.eval_every == 0) {
      emit.eval(evaluate_test(*inputs.backend, ctx.entries(), inputs.split.test,
                              inputs.labels, config.tmpl, mode, seeds, t,
                              config.eval_concurrency));
    }
  }
  return log;
}

namespace {

// Serves logged predictions while inside the stored range, delegating to the
// live backend beyond it (resume) or for missing eval slots.
class ReplayBackend final : public PolicyBackend {
 public:
  ReplayBackend(const RunLog& stored, std::shared_ptr<PolicyBackend> live)
      : stored_(stored), live_(std::move(live)) {}

  std::string name() const override { return live_->name(); }
  bool is_remote() const override { return live_->is_remote(); }

  PredictionResult predict(const PredictionRequest& req, RngStream& rng) override {
    if (req.eval_index.has_value()) {
      for (const EvalEvent& ev : stored_.evals) {
        if (ev.t != req.step) continue;
        if (*req.eval_index >= ev.predictions.size()) break;
        const std::string& pred = ev.predictions[*req.eval_index];
        if (pred.empty()) {
          // was missing in the original sweep; keep it missing
          throw TransportError("replay: prediction missing in stored log", 0, 0);
        }
        PredictionResult r;
        r.label = pred;
        r.raw_text = " " + pred;
        return r;
      }
      return live_->predict(req, rng);
    }
    if (req.step >= 1 && req.step <= stored_.steps.size()) {
      const StepEvent& se = stored_.steps[req.step - 1];
      if (se.t != req.step) {
        throw IntegrityError("stored log steps are not contiguous at t=" +
                             std::to_string(req.step));
      }
      PredictionResult r;
      r.label = se.prediction;
      r.raw_text = se.raw_text;
      r.completion_tokens = se.completion_tokens;
      r.invalid = se.invalid;
      r.resampled = se.resampled;
      r.fallback_used = se.fallback_used;
      return r;
    }
    return live_->predict(req, rng);
  }

 private:
  const RunLog& stored_;
  std::shared_ptr<PolicyBackend> live_;
};

template <typename Event>
void check_prefix(const std::vector<Event>& stored, const std::vector<Event>& fresh,
                  const char* what) {
  if (fresh.size() < stored.size()) {
    throw IntegrityError(std::string("replay regenerated fewer ") + what +
                         " events than the stored log");
  }
  for (std::size_t i = 0; i < stored.size(); ++i) {
    if (to_json_line(stored[i]) != to_json_line(fresh[i])) {
      throw IntegrityError(std::string("replay diverged from the stored log at ") +
                           what + " event " + std::to_string(i + 1));
    }
  }
}

}  // namespace

RunLog replay_experiment(const RunnerConfig& config, const RunInputs& inputs,
                         const RunLog& stored, RunLogWriter* writer) {
  RunInputs replay_inputs = inputs;
  if (inputs.backend->is_remote()) {
    replay_inputs.backend =
        std::make_shared<ReplayBackend>(stored, inputs.backend);
  }
  RunLog fresh = run_experiment(config, replay_inputs, writer);
  if (to_json_line(fresh.header) != to_json_line(stored.header)) {
    throw IntegrityError("replay header differs from the stored log");
  }
  check_prefix(stored.steps, fresh.steps, "step");
  check_prefix(stored.evals, fresh.evals, "eval");
  check_prefix(stored.warnings, fresh.warnings, "warning");
  return fresh;
}

}  // namespace icrl
