#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace icrl {

// Token counting / splitting abstraction. Budgeting, capacity estimation and
// KV-cache accounting only need count() and tokens(); real-model tokenizers
// can be plugged in behind this interface, the bundled implementations are
// desk-scale mocks.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::string name() const = 0;
  virtual std::vector<std::string> tokens(std::string_view text) const = 0;
  virtual std::size_t count(std::string_view text) const {
    return tokens(text).size();
  }
};

// One token per maximal whitespace-separated run.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::string name() const override { return "whitespace"; }
  std::vector<std::string> tokens(std::string_view text) const override;
  std::size_t count(std::string_view text) const override;
};

// One token per byte.
class ByteTokenizer final : public Tokenizer {
 public:
  std::string name() const override { return "byte"; }
  std::vector<std::string> tokens(std::string_view text) const override;
  std::size_t count(std::string_view text) const override { return text.size(); }
};

// Factory for the bundled tokenizers; throws ConfigError on unknown names.
std::shared_ptr<const Tokenizer> make_tokenizer(std::string_view name);

// Window budget for prompt construction. overhead_tokens is whatever part of
// the window is already spoken for outside the episode segments (system
// block, chat markup, the pending query, reserved headroom).
struct TokenBudget {
  std::size_t window_tokens = 0;
  std::size_t overhead_tokens = 0;

  std::size_t episode_room() const {
    return overhead_tokens >= window_tokens ? 0
                                            : window_tokens - overhead_tokens;
  }
};

}  // namespace icrl
