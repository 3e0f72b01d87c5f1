#include <doctest.h>

#include <sstream>

#include "ragcap/common.hpp"
#include "ragcap/tokenizer.hpp"

using namespace ragcap;

TEST_CASE("split lowercases and separates punctuation") {
  const auto tokens = Tokenizer::split("A dog, runs!\n\nFast 2x");
  const std::vector<std::string> expected = {"a",    "dog", ",", "runs",
                                             "!",    "fast", "2x"};
  CHECK(tokens == expected);
}

TEST_CASE("vocabulary is sorted and reserved ids are stable") {
  const Tokenizer tok = Tokenizer::build({"b a", "c a"});
  CHECK(tok.vocab_size() == 4 + 3);
  CHECK(tok.token_text(Tokenizer::kPad) == "<pad>");
  CHECK(tok.token_text(Tokenizer::kBos) == "<bos>");
  CHECK(tok.token_text(Tokenizer::kEos) == "<eos>");
  CHECK(tok.token_text(Tokenizer::kUnk) == "<unk>");
  CHECK(tok.token_text(4) == "a");
  CHECK(tok.token_text(5) == "b");
  CHECK(tok.token_text(6) == "c");
}

TEST_CASE("encode/decode round-trip on canonical text") {
  const Tokenizer tok = Tokenizer::build({"a dog runs", "the cat sits"});
  const std::string canonical = "the dog sits";
  CHECK(tok.decode(tok.encode(canonical)) == canonical);
}

TEST_CASE("unknown words map to <unk>") {
  const Tokenizer tok = Tokenizer::build({"a dog"});
  const auto ids = tok.encode("a zebra");
  REQUIRE(ids.size() == 2);
  CHECK(ids[1] == Tokenizer::kUnk);
  CHECK(tok.decode(ids) == "a");  // reserved ids are dropped
}

TEST_CASE("tokenizer serialization round-trips") {
  const Tokenizer tok = Tokenizer::build({"a dog runs", "punct, here!"});
  std::stringstream buffer;
  tok.write(buffer);
  const Tokenizer loaded = Tokenizer::read(buffer);
  CHECK(loaded.vocab() == tok.vocab());
  CHECK(loaded.encode("a dog, runs!") == tok.encode("a dog, runs!"));
}
