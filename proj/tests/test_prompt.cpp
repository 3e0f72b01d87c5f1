#include <doctest.h>

#include <set>
#include <string>

#include "ragcap/common.hpp"
#include "ragcap/prompt.hpp"
#include "ragcap/rng.hpp"

using namespace ragcap;

TEST_CASE("template rendering is byte-exact") {
  CHECK(build_prompt({"a dog runs"}) ==
        "Similar images show\n\na dog runs.\n\nThis image shows");
  CHECK(build_prompt({"a", "b", "c", "d"}) ==
        "Similar images show\n\na\n\nb\n\nc\n\nd.\n\nThis image shows");
  CHECK(build_no_retrieval_prompt() == "This image shows");
}

TEST_CASE("captions appear contiguously and in order") {
  const std::vector<std::string> captions = {"first cap", "second cap",
                                             "third cap", "fourth cap"};
  const std::string prompt = build_prompt(captions);
  std::size_t pos = 0;
  for (const auto& caption : captions) {
    const std::size_t found = prompt.find(caption, pos);
    REQUIRE(found != std::string::npos);
    pos = found + caption.size();
  }
}

TEST_CASE("byte preservation and injectivity over random caption lists") {
  // Random caption lists from a small alphabet; none contain the "\n\n"
  // separator, so rendering must be injective and preserve caption bytes.
  SeededRng rng(101);
  const std::string alphabet = "abcxyz .,!";
  auto random_caption = [&]() {
    const std::size_t len = 1 + rng.uniform_int(12);
    std::string s;
    for (std::size_t i = 0; i < len; ++i) {
      s.push_back(alphabet[rng.uniform_int(alphabet.size())]);
    }
    return s;
  };

  std::set<std::string> rendered;
  std::set<std::vector<std::string>> inputs;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::string> captions;
    const std::size_t n = 1 + rng.uniform_int(4);
    for (std::size_t i = 0; i < n; ++i) {
      captions.push_back(random_caption());
    }
    const std::string prompt = build_prompt(captions);
    std::size_t pos = 0;
    for (const auto& caption : captions) {
      const std::size_t found = prompt.find(caption, pos);
      REQUIRE(found != std::string::npos);
      pos = found + caption.size();
    }
    if (inputs.insert(captions).second) {
      CHECK(rendered.insert(prompt).second);
    }
  }
}

TEST_CASE("training instance masks prompt positions") {
  const Tokenizer tok = Tokenizer::build(
      {"Similar images show This image shows", "a b c d e f g h i j"});

  // Prompt of 10 tokens, reference of 5 tokens -> 10 false then 6 true.
  const std::string prompt = "a b c d e f g h i j";
  const std::string reference = "a b c d e";
  const PromptInstance instance =
      make_training_instance(prompt, reference, tok, 64);
  REQUIRE(instance.tokens.size() == 16);
  REQUIRE(instance.loss_mask.size() == 16);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK_FALSE(instance.loss_mask[i]);
  }
  for (std::size_t i = 10; i < 16; ++i) {
    CHECK(instance.loss_mask[i]);
  }
  CHECK(instance.tokens.back() == Tokenizer::kEos);

  SUBCASE("sum of mask is M + 1") {
    int sum = 0;
    for (bool m : instance.loss_mask) {
      sum += m ? 1 : 0;
    }
    CHECK(sum == static_cast<int>(instance.reference_tokens.size()) + 1);
  }

  SUBCASE("reference tokens decode back to the reference") {
    CHECK(tok.decode(instance.reference_tokens) == reference);
  }

  SUBCASE("empty reference is rejected") {
    CHECK_THROWS_AS(make_training_instance(prompt, "", tok, 64), DataError);
  }

  SUBCASE("overflow is rejected for the pre-rendered variant") {
    CHECK_THROWS_AS(make_training_instance(prompt, reference, tok, 12),
                    DataError);
  }
}

TEST_CASE("over-long prompts drop captions from the last slot backward") {
  const Tokenizer tok = Tokenizer::build(
      {"Similar images show This image shows .", "w x y z ref"});

  // Each caption is 3 tokens; template overhead is 3 + 1 + 3 = 7 tokens;
  // reference is 1 token plus <eos>.
  const std::vector<std::string> captions = {"w w w", "x x x", "y y y",
                                             "z z z"};
  const std::string reference = "ref";

  // Full render: 7 + 12 + 2 = 21 tokens. Budget 18 forces dropping one.
  PromptInstance instance =
      make_training_instance(captions, reference, tok, 18);
  CHECK(instance.text == build_prompt({"w w w", "x x x", "y y y"}));

  // Budget 12 leaves one caption.
  instance = make_training_instance(captions, reference, tok, 12);
  CHECK(instance.text == build_prompt({"w w w"}));

  // Budget 8 drops retrieval entirely.
  instance = make_training_instance(captions, reference, tok, 8);
  CHECK(instance.text == build_no_retrieval_prompt());

  // The reference is never truncated; if it cannot fit, that is an error.
  CHECK_THROWS_AS(make_training_instance(captions, reference, tok, 3),
                  DataError);
}
