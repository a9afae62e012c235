#include "icrl/policy.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <set>
#include <thread>

#include <json.hpp>

#include "icrl/errors.hpp"

namespace icrl {

namespace {

using nlohmann::json;

const LabelSpace& labels_of(const PredictionRequest& req) {
  if (req.labels == nullptr) {
    throw ContractViolation("prediction request carries no label space");
  }
  if (req.labels->labels.empty()) {
    throw ContractViolation("prediction request carries an empty label space");
  }
  return *req.labels;
}

PredictionResult make_result(std::string label) {
  PredictionResult r;
  r.raw_text = " " + label;
  r.label = std::move(label);
  return r;
}

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  std::size_t b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// Completion text with surrounding whitespace and a leading answer prefix
// removed.
std::string clean_completion(const std::string& raw, const std::string& answer_prefix) {
  std::string_view sv = trim(raw);
  if (!answer_prefix.empty() && sv.substr(0, answer_prefix.size()) == answer_prefix) {
    sv = trim(sv.substr(answer_prefix.size()));
  }
  return std::string(sv);
}

std::set<std::string> word_set(const std::string& text) {
  std::set<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) words.insert(text.substr(i, j - i));
    i = j;
  }
  return words;
}

std::size_t overlap(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::size_t n = 0;
  for (const std::string& w : a) n += b.count(w);
  return n;
}

}  // namespace

PredictionResult OracleBackend::predict(const PredictionRequest& req, RngStream&) {
  const LabelSpace& labels = labels_of(req);
  if (!labels.contains(req.example.gold_label)) {
    throw ContractViolation("gold label '" + req.example.gold_label +
                            "' missing from label space");
  }
  return make_result(req.example.gold_label);
}

ConstantBackend::ConstantBackend(std::string label) : label_(std::move(label)) {
  if (label_.empty()) throw ConfigError("constant backend needs a label");
}

PredictionResult ConstantBackend::predict(const PredictionRequest& req, RngStream&) {
  const LabelSpace& labels = labels_of(req);
  if (!labels.contains(label_)) {
    throw ConfigError("constant backend label '" + label_ +
                      "' missing from label space");
  }
  return make_result(label_);
}

PredictionResult ParrotLastPositiveBackend::predict(const PredictionRequest& req,
                                                    RngStream& rng) {
  const LabelSpace& labels = labels_of(req);
  for (auto it = req.ctx.rbegin(); it != req.ctx.rend(); ++it) {
    if (it->reward.positive()) return make_result(shown_label(*it, req.mode));
  }
  return make_result(labels.labels[rng.uniform_index(labels.labels.size())]);
}

FrequencyLearnerBackend::FrequencyLearnerBackend(double epsilon) : epsilon_(epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw ConfigError("frequency learner epsilon must lie in [0, 1]");
  }
}

PredictionResult FrequencyLearnerBackend::predict(const PredictionRequest& req,
                                                  RngStream& rng) {
  const LabelSpace& labels = labels_of(req);
  const auto uniform_label = [&] {
    return make_result(labels.labels[rng.uniform_index(labels.labels.size())]);
  };
  if (rng.bernoulli(epsilon_)) return uniform_label();
  if (req.ctx.empty()) return uniform_label();

  const std::set<std::string> query_words = word_set(req.example.query);
  std::vector<std::size_t> scores;
  scores.reserve(req.ctx.size());
  std::size_t best = 0;
  for (const Episode& e : req.ctx) {
    scores.push_back(overlap(query_words, word_set(e.example.query)));
    best = std::max(best, scores.back());
  }
  if (best == 0) return uniform_label();

  // Most frequent shown label among the top-overlap episodes; map iteration
  // order makes ties land on the lexicographically first label.
  std::map<std::string, std::size_t> votes;
  for (std::size_t i = 0; i < req.ctx.size(); ++i) {
    if (scores[i] == best) ++votes[shown_label(req.ctx[i], req.mode)];
  }
  const std::string* winner = nullptr;
  std::size_t top = 0;
  for (const auto& [label, count] : votes) {
    if (count > top) {
      winner = &label;
      top = count;
    }
  }
  return make_result(*winner);
}

ScriptedBackend::ScriptedBackend(std::vector<std::string> train,
                                 std::vector<std::string> eval)
    : train_(std::move(train)), eval_(std::move(eval)) {}

PredictionResult ScriptedBackend::predict(const PredictionRequest& req, RngStream&) {
  if (req.eval_index.has_value()) {
    if (eval_.empty()) return make_result(req.example.gold_label);
    if (*req.eval_index >= eval_.size()) {
      throw ContractViolation("scripted backend: eval index out of range");
    }
    return make_result(eval_[*req.eval_index]);
  }
  if (req.step == 0 || req.step > train_.size()) {
    throw ContractViolation("scripted backend: train step out of range");
  }
  return make_result(train_[req.step - 1]);
}

InvalidCompletionPolicy invalid_policy_from_string(const std::string& s) {
  if (s == "resample_once") return InvalidCompletionPolicy::resample_once;
  if (s == "fallback") return InvalidCompletionPolicy::fallback;
  if (s == "reject") return InvalidCompletionPolicy::reject;
  throw ConfigError("unknown invalid-completion policy: '" + s + "'");
}

std::string to_string(InvalidCompletionPolicy p) {
  switch (p) {
    case InvalidCompletionPolicy::resample_once: return "resample_once";
    case InvalidCompletionPolicy::fallback: return "fallback";
    case InvalidCompletionPolicy::reject: return "reject";
  }
  throw ContractViolation("bad InvalidCompletionPolicy");
}

std::optional<std::string> map_completion(const std::string& raw,
                                          const std::string& answer_prefix,
                                          const LabelSpace& labels) {
  const std::string text = clean_completion(raw, answer_prefix);
  if (labels.contains(text)) return text;
  // Longest label that prefixes the cleaned text, to absorb trailing
  // punctuation or continuation the model tacked on.
  const std::string* best = nullptr;
  for (const std::string& label : labels.labels) {
    if (label.size() <= text.size() && text.compare(0, label.size(), label) == 0) {
      if (best == nullptr || label.size() > best->size()) best = &label;
    }
  }
  if (best != nullptr) return *best;
  return std::nullopt;
}

std::string fallback_label(const std::string& raw, const std::string& answer_prefix,
                           const LabelSpace& labels) {
  if (labels.labels.empty()) throw ContractViolation("empty label space");
  const std::string text = clean_completion(raw, answer_prefix);
  const std::string* best = &labels.labels.front();
  std::size_t best_len = 0;
  for (const std::string& label : labels.labels) {
    std::size_t n = 0;
    std::size_t lim = std::min(label.size(), text.size());
    while (n < lim && label[n] == text[n]) ++n;
    // Strict improvement keeps the lexicographically first winner since the
    // label list is sorted.
    if (n > best_len) {
      best = &label;
      best_len = n;
    }
  }
  return *best;
}

RemoteChatBackend::RemoteChatBackend(RemoteChatConfig config,
                                     std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  if (transport_ == nullptr) {
    throw ContractViolation("remote backend needs a transport");
  }
  if (config_.max_attempts < 1) {
    throw ConfigError("remote backend max_attempts must be at least 1");
  }
}

RemoteChatBackend::Completion RemoteChatBackend::complete_once(
    const PredictionRequest& req) {
  json payload;
  payload["model"] = config_.model;
  json messages = json::array();
  for (const ChatMessage& m : req.transcript.messages) {
    messages.push_back({{"role", to_wire(m.role)}, {"content", m.content}});
  }
  payload["messages"] = std::move(messages);
  payload["temperature"] = config_.temperature;
  payload["max_tokens"] = config_.max_tokens;
  if (config_.guided_choice) {
    payload["guided_choice"] = labels_of(req).labels;
  }
  const std::string body = payload.dump();

  HttpHeaders headers;
  if (!config_.api_key.empty()) {
    headers.emplace_back("Authorization", "Bearer " + config_.api_key);
  }

  HttpResponse res;
  int attempts = 0;
  for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
    if (attempt > 0 && config_.backoff_seconds > 0.0) {
      double wait = config_.backoff_seconds * static_cast<double>(1 << (attempt - 1));
      std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    }
    res = transport_->post_json("/v1/chat/completions", body, headers);
    ++attempts;
    const bool transient = res.status == 0 || res.status == 408 ||
                           res.status == 429 || res.status >= 500;
    if (!transient) break;
  }
  if (res.status != 200) {
    throw TransportError("chat completion failed after " + std::to_string(attempts) +
                             " attempt(s): status " + std::to_string(res.status) +
                             (res.status == 0 ? " (" + res.body + ")" : ""),
                         attempts, res.status);
  }

  json doc = json::parse(res.body, nullptr, false);
  if (doc.is_discarded()) {
    throw TransportError("chat completion returned invalid JSON", attempts,
                         res.status);
  }
  try {
    Completion out;
    out.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
    if (doc.contains("usage") && doc["usage"].contains("completion_tokens")) {
      out.completion_tokens = doc["usage"]["completion_tokens"].get<std::size_t>();
    }
    return out;
  } catch (const json::exception& e) {
    throw TransportError(std::string("chat completion response malformed: ") +
                             e.what(),
                         attempts, res.status);
  }
}

PredictionResult RemoteChatBackend::predict(const PredictionRequest& req,
                                            RngStream&) {
  const LabelSpace& labels = labels_of(req);
  PredictionResult result;

  Completion c = complete_once(req);
  result.raw_text = c.text;
  result.completion_tokens = c.completion_tokens;
  std::optional<std::string> label = map_completion(c.text, req.answer_prefix, labels);

  if (!label.has_value() &&
      config_.on_invalid == InvalidCompletionPolicy::resample_once) {
    result.resampled = true;
    c = complete_once(req);
    result.raw_text = c.text;
    result.completion_tokens = c.completion_tokens;
    label = map_completion(c.text, req.answer_prefix, labels);
  }

  if (!label.has_value()) {
    result.invalid = true;
    if (config_.on_invalid == InvalidCompletionPolicy::reject) {
      result.label.clear();
      return result;
    }
    result.fallback_used = true;
    result.label = fallback_label(result.raw_text, req.answer_prefix, labels);
    return result;
  }
  result.label = *label;
  return result;
}

}  // namespace icrl
