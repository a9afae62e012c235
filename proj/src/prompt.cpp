#include "icrl/prompt.hpp"

#include <array>
#include <cstdio>

#include "icrl/errors.hpp"
#include "icrl/rng.hpp"

namespace icrl {

namespace {

// Frozen so renders stay reproducible; the real chat template stamps the
// current date into the system header.
constexpr const char* kLlamaSystemPreamble =
    "Cutting Knowledge Date: December 2023\nToday Date: 26 Jul 2024\n\n";

struct DialectMarkup {
  std::string begin;
  std::string user_open, user_close;
  std::string assistant_open, assistant_close;
};

DialectMarkup markup_for(ChatDialect d) {
  switch (d) {
    case ChatDialect::llama:
      return {"<|begin_of_text|>",
              "<|start_header_id|>user<|end_header_id|>\n\n", "<|eot_id|>",
              "<|start_header_id|>assistant<|end_header_id|>\n\n", "<|eot_id|>"};
    case ChatDialect::phi:
      return {"", "<|user|>\n", "<|end|>\n", "<|assistant|>\n", "<|end|>\n"};
    case ChatDialect::plain:
      return {"", "", "\n", "", "\n"};
  }
  throw ContractViolation("unhandled dialect");
}

std::string system_block(const std::string& content, ChatDialect d) {
  switch (d) {
    case ChatDialect::llama:
      return "<|start_header_id|>system<|end_header_id|>\n\n" +
             std::string(kLlamaSystemPreamble) + content + "<|eot_id|>";
    case ChatDialect::phi:
      return "<|system|>\n" + content + "\n<|end|>\n";
    case ChatDialect::plain:
      return content + "\n\n";
  }
  throw ContractViolation("unhandled dialect");
}

std::string primer(const PromptTemplate& tmpl) {
  switch (tmpl.dialect) {
    case ChatDialect::llama:
      return "<|start_header_id|>assistant<|end_header_id|>\n\n" + tmpl.answer_prefix;
    case ChatDialect::phi:
      return "<|assistant|>\n" + tmpl.answer_prefix;
    case ChatDialect::plain:
      return tmpl.answer_prefix;
  }
  throw ContractViolation("unhandled dialect");
}

bool has_feedback(PromptMode mode) { return mode == PromptMode::icrl; }

}  // namespace

const std::string& shown_label(const Episode& e, PromptMode mode) {
  return mode == PromptMode::icl ? e.example.gold_label : e.prediction;
}

const char* to_wire(ChatRole role) {
  switch (role) {
    case ChatRole::system: return "system";
    case ChatRole::user: return "user";
    case ChatRole::assistant: return "assistant";
  }
  return "?";
}

ChatDialect dialect_from_string(const std::string& s) {
  if (s == "llama") return ChatDialect::llama;
  if (s == "phi") return ChatDialect::phi;
  if (s == "plain") return ChatDialect::plain;
  throw ConfigError("unknown chat dialect '" + s + "'");
}

std::string to_string(ChatDialect d) {
  switch (d) {
    case ChatDialect::llama: return "llama";
    case ChatDialect::phi: return "phi";
    case ChatDialect::plain: return "plain";
  }
  return "?";
}

PromptMode prompt_mode_from_string(const std::string& s) {
  if (s == "icl") return PromptMode::icl;
  if (s == "icrl") return PromptMode::icrl;
  if (s == "icrl_no_feedback") return PromptMode::icrl_no_feedback;
  throw ConfigError("unknown prompt mode '" + s + "'");
}

std::string to_string(PromptMode m) {
  switch (m) {
    case PromptMode::icl: return "icl";
    case PromptMode::icrl: return "icrl";
    case PromptMode::icrl_no_feedback: return "icrl_no_feedback";
  }
  return "?";
}

ChatTranscript render_prompt(const std::vector<Episode>& ctx, const Example& query,
                             const PromptTemplate& tmpl, PromptMode mode) {
  ChatTranscript out;
  out.messages.push_back({ChatRole::system, tmpl.system_text(mode)});

  std::string pending_feedback;
  for (const Episode& e : ctx) {
    if (mode == PromptMode::icrl && !e.reward.observed) {
      throw ContractViolation(
          "icrl render requires observed rewards (episode t=" +
          std::to_string(e.t) + ")");
    }
    std::string user = pending_feedback + tmpl.query_prefix + e.example.query;
    out.messages.push_back({ChatRole::user, std::move(user)});
    out.messages.push_back(
        {ChatRole::assistant, tmpl.answer_prefix + " " + shown_label(e, mode)});
    pending_feedback = has_feedback(mode)
                           ? verbalize_reward(e.prediction, e.reward) + "\n\n"
                           : "";
  }
  out.messages.push_back(
      {ChatRole::user, pending_feedback + tmpl.query_prefix + query.query});
  return out;
}

std::string render_flat(const ChatTranscript& transcript, const PromptTemplate& tmpl) {
  const DialectMarkup m = markup_for(tmpl.dialect);
  std::string flat = m.begin;
  for (const ChatMessage& msg : transcript.messages) {
    switch (msg.role) {
      case ChatRole::system:
        flat += system_block(msg.content, tmpl.dialect);
        break;
      case ChatRole::user:
        flat += m.user_open + msg.content + m.user_close;
        break;
      case ChatRole::assistant:
        flat += m.assistant_open + msg.content + m.assistant_close;
        break;
    }
  }
  flat += primer(tmpl);
  return flat;
}

std::string render_flat_prompt(const std::vector<Episode>& ctx, const Example& query,
                               const PromptTemplate& tmpl, PromptMode mode) {
  return render_flat(render_prompt(ctx, query, tmpl, mode), tmpl);
}

std::string episode_segment(const Episode& e, const PromptTemplate& tmpl,
                            PromptMode mode) {
  const DialectMarkup m = markup_for(tmpl.dialect);
  std::string seg = tmpl.query_prefix + e.example.query + m.user_close +
                    m.assistant_open + tmpl.answer_prefix + " " +
                    shown_label(e, mode) + m.assistant_close + m.user_open;
  if (has_feedback(mode)) {
    if (!e.reward.observed) {
      throw ContractViolation(
          "icrl segment requires an observed reward (episode t=" +
          std::to_string(e.t) + ")");
    }
    seg += verbalize_reward(e.prediction, e.reward) + "\n\n";
  }
  return seg;
}

std::size_t episode_token_cost(const Episode& e, const PromptTemplate& tmpl,
                               PromptMode mode, const Tokenizer& tok) {
  return tok.count(episode_segment(e, tmpl, mode));
}

std::size_t prompt_overhead_tokens(const Example& query, const PromptTemplate& tmpl,
                                   PromptMode mode, const Tokenizer& tok) {
  return tok.count(render_flat_prompt({}, query, tmpl, mode));
}

std::string prompt_hash(const std::string& flat) {
  std::uint64_t h = fnv1a64(flat);
  std::array<char, 17> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf.data(), 16);
}

}  // namespace icrl
