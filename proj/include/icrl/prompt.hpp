#pragma once

#include <string>
#include <vector>

#include "icrl/episode.hpp"
#include "icrl/tokenizer.hpp"

namespace icrl {

enum class ChatDialect { llama, phi, plain };

ChatDialect dialect_from_string(const std::string& s);
std::string to_string(ChatDialect d);

// How context episodes are framed in the prompt:
//   icl              gold labels, no feedback lines
//   icrl             model predictions with verbalized feedback
//   icrl_no_feedback model predictions, no feedback lines (reward-free arm,
//                    where episode rewards are never observed)
enum class PromptMode { icl, icrl, icrl_no_feedback };

PromptMode prompt_mode_from_string(const std::string& s);
std::string to_string(PromptMode m);

struct PromptTemplate {
  std::string system_icl =
      "You are an useful assistant. Answer the following questions.";
  std::string system_icrl =
      "You are an useful assistant. Answer the following questions. Feedback "
      "will indicate if you answered correctly. You must answer correctly, "
      "using previous feedback to make better predictions.";
  std::string query_prefix = "Query: ";
  std::string answer_prefix = "Intent:";
  ChatDialect dialect = ChatDialect::llama;

  const std::string& system_text(PromptMode mode) const {
    return mode == PromptMode::icl ? system_icl : system_icrl;
  }
};

enum class ChatRole { system, user, assistant };

// Role name as it appears on the chat-completions wire.
const char* to_wire(ChatRole role);

struct ChatMessage {
  ChatRole role;
  std::string content;
};

// Ordered chat messages: system first, then strictly alternating user /
// assistant, ending on the user turn that carries the pending query. The
// flat rendering appends the assistant header plus the answer prefix so the
// completion starts right after "Intent:".
struct ChatTranscript {
  std::vector<ChatMessage> messages;
};

// The label a context entry displays: the gold label under icl, the model's
// own prediction under the icrl modes.
const std::string& shown_label(const Episode& e, PromptMode mode);

// Builds the message list for a query given its context episodes.
// icrl mode throws ContractViolation if any episode reward is unobserved.
ChatTranscript render_prompt(const std::vector<Episode>& ctx, const Example& query,
                             const PromptTemplate& tmpl, PromptMode mode);

// Serializes a transcript into the exact byte sequence the model consumes,
// including chat markup and the trailing generation primer.
std::string render_flat(const ChatTranscript& transcript, const PromptTemplate& tmpl);

// render_flat(render_prompt(...)) in one step.
std::string render_flat_prompt(const std::vector<Episode>& ctx, const Example& query,
                               const PromptTemplate& tmpl, PromptMode mode);

// The window cost model splits a rendered prompt into a fixed chrome part
// plus one self-contained segment per context episode, in a way that exactly
// partitions the flat bytes:
//
//   flat = begin + system_block + user_open
//            + segment(e_1) + ... + segment(e_n)
//            + query_prefix + query + user_close + primer
//
// so token counts of segments add up to the full render for any tokenizer
// that is stable at whitespace boundaries (both bundled mocks are).
std::string episode_segment(const Episode& e, const PromptTemplate& tmpl,
                            PromptMode mode);

std::size_t episode_token_cost(const Episode& e, const PromptTemplate& tmpl,
                               PromptMode mode, const Tokenizer& tok);

// Token count of the zero-episode render for this query: everything in the
// window that is not an episode segment.
std::size_t prompt_overhead_tokens(const Example& query, const PromptTemplate& tmpl,
                                   PromptMode mode, const Tokenizer& tok);

// FNV-1a over the flat prompt bytes, as a 16-hex-digit string. Recorded per
// step so prompts can be verified bit-exactly on replay.
std::string prompt_hash(const std::string& flat);

}  // namespace icrl
