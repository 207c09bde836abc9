#include <doctest.h>

#include <fstream>

#include "halo/error.hpp"
#include "halo/tokenizer.hpp"
#include "support.hpp"

using namespace halo;

TEST_SUITE("tokenizer") {

TEST_CASE("byte tokenizer is the identity on bytes") {
  ByteTokenizer t;
  const std::string text = "Question: caf\xC3\xA9?\n";
  const auto ids = t.encode(text);
  REQUIRE(ids.size() == text.size());
  CHECK(ids[0] == 'Q');
  CHECK(ids[13] == 0xC3);
  CHECK(t.decode(ids) == text);
  CHECK(t.token_text('A') == "A");
  CHECK(t.token_text(0x0A) == "<0x0A>");
  const TokenId bad[] = {256};
  CHECK_THROWS_AS(t.decode(bad), DataError);
}

TEST_CASE("vocab tokenizer uses greedy longest match") {
  VocabTokenizer t({{"a", 0}, {"ab", 1}, {"abc", 2}, {"b", 3}, {"c", 4}, {" ", 5}});
  CHECK(t.encode("abcab c") == TokenSequence{2, 1, 5, 4});
  CHECK(t.decode(TokenSequence{2, 1, 5, 4}) == "abcab c");
  CHECK(t.vocab_size() == 6);
  CHECK_THROWS_WITH_AS(t.encode("abd"), doctest::Contains("unknown token"), DataError);
}

TEST_CASE("vocab tokenizer rejects inconsistent vocabularies") {
  CHECK_THROWS_AS(VocabTokenizer({{"a", 0}, {"b", 0}}), ModelError);
  CHECK_THROWS_AS(VocabTokenizer({{"a", 0}, {"a", 1}}), ModelError);
  CHECK_THROWS_AS(VocabTokenizer({}), ModelError);
}

TEST_CASE("vocab tokenizer loads from JSON") {
  test::TempDir dir;
  {
    std::ofstream f(dir / "vocab.json");
    f << R"([["he", 0], ["llo", 1], ["h", 2], ["e", 3], ["l", 4], ["o", 5]])";
  }
  auto t = load_tokenizer(dir / "vocab.json");
  CHECK(t->encode("hello") == TokenSequence{0, 1});
  CHECK(load_tokenizer(std::nullopt)->vocab_size() == 256);
  CHECK_THROWS_AS(load_tokenizer(dir / "missing.json"), ModelError);
}

}  // TEST_SUITE
