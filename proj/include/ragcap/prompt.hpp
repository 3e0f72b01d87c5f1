#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ragcap/tokenizer.hpp"

namespace ragcap {

// One training/inference sequence: rendered prompt, reference tokens and the
// per-position loss mask. tokens = prompt_tokens + reference_tokens + <eos>;
// loss_mask is false on every prompt position and true on the reference
// positions and the end token.
struct PromptInstance {
  std::string text;  // rendered prompt
  std::vector<int> prompt_tokens;
  std::vector<int> reference_tokens;  // without <eos>
  std::vector<int> tokens;
  std::vector<bool> loss_mask;
};

// Fixed task-demonstration template. For n >= 1 captions:
//   "Similar images show" \n\n <c1> \n\n ... \n\n <cn> "." \n\n "This image shows"
// Caption bytes are inserted untouched.
std::string build_prompt(const std::vector<std::string>& captions);

// The retrieval-free prompt used by the no-retrieval regime and ablations.
std::string build_no_retrieval_prompt();

// Builds an instance from an already-rendered prompt. Throws DataError if
// the reference is empty or prompt + reference + end token exceed
// max_context.
PromptInstance make_training_instance(const std::string& prompt,
                                      const std::string& reference,
                                      const Tokenizer& tokenizer,
                                      std::size_t max_context);

// Caption-aware variant: when the rendered sequence overflows max_context,
// whole captions are dropped from the last slot backward and the prompt
// re-rendered; with no captions left it falls back to the no-retrieval
// prompt. The reference is never truncated.
PromptInstance make_training_instance(const std::vector<std::string>& captions,
                                      const std::string& reference,
                                      const Tokenizer& tokenizer,
                                      std::size_t max_context);

}  // namespace ragcap
