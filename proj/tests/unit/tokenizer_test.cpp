#include <doctest.h>

#include "icrl/errors.hpp"
#include "icrl/tokenizer.hpp"

using namespace icrl;

TEST_CASE("whitespace tokenizer splits on any whitespace run") {
  WhitespaceTokenizer tok;
  CHECK(tok.tokens("a b c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(tok.tokens("  a\t\tb\n\nc  ") == std::vector<std::string>{"a", "b", "c"});
  CHECK(tok.tokens("").empty());
  CHECK(tok.tokens("   \n\t").empty());
  CHECK(tok.tokens("one") == std::vector<std::string>{"one"});
}

TEST_CASE("whitespace count equals tokens().size()") {
  WhitespaceTokenizer tok;
  for (const char* s : {"", " ", "a", "a b", " a  b ", "x\ny\tz", "<|eot_id|>x y"}) {
    CHECK(tok.count(s) == tok.tokens(s).size());
  }
}

TEST_CASE("byte tokenizer emits one token per byte") {
  ByteTokenizer tok;
  CHECK(tok.count("hello") == 5);
  CHECK(tok.count("") == 0);
  auto toks = tok.tokens("ab");
  REQUIRE(toks.size() == 2);
  CHECK(toks[0] == "a");
  CHECK(toks[1] == "b");
  CHECK(tok.count("ab") == tok.tokens("ab").size());
}

TEST_CASE("factory resolves bundled names and rejects others") {
  CHECK(make_tokenizer("whitespace")->name() == "whitespace");
  CHECK(make_tokenizer("byte")->name() == "byte");
  CHECK_THROWS_AS((void)make_tokenizer("tiktoken"), ConfigError);
}

TEST_CASE("token budget leaves room for episodes") {
  TokenBudget b{100, 30};
  CHECK(b.episode_room() == 70);
  CHECK(TokenBudget{100, 100}.episode_room() == 0);
  CHECK(TokenBudget{100, 150}.episode_room() == 0);
  CHECK(TokenBudget{100, 0}.episode_room() == 100);
}
