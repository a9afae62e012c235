#include "icrl/tokenizer.hpp"

#include <cctype>

#include "icrl/errors.hpp"

namespace icrl {

namespace {
inline bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}
}  // namespace

std::vector<std::string> WhitespaceTokenizer::tokens(std::string_view text) const {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::size_t WhitespaceTokenizer::count(std::string_view text) const {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

std::vector<std::string> ByteTokenizer::tokens(std::string_view text) const {
  std::vector<std::string> out;
  out.reserve(text.size());
  for (char c : text) out.emplace_back(1, c);
  return out;
}

std::shared_ptr<const Tokenizer> make_tokenizer(std::string_view name) {
  if (name == "whitespace") return std::make_shared<WhitespaceTokenizer>();
  if (name == "byte") return std::make_shared<ByteTokenizer>();
  throw ConfigError("unknown tokenizer '" + std::string(name) +
                    "' (bundled: whitespace, byte)");
}

}  // namespace icrl
