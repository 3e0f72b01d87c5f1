#include "ragcap/prompt.hpp"

#include "ragcap/common.hpp"

namespace ragcap {

std::string build_prompt(const std::vector<std::string>& captions) {
  std::string out = "Similar images show";
  for (const auto& caption : captions) {
    out += "\n\n";
    out += caption;
  }
  out += ".\n\nThis image shows";
  return out;
}

std::string build_no_retrieval_prompt() { return "This image shows"; }

PromptInstance make_training_instance(const std::string& prompt,
                                      const std::string& reference,
                                      const Tokenizer& tokenizer,
                                      std::size_t max_context) {
  PromptInstance instance;
  instance.text = prompt;
  instance.prompt_tokens = tokenizer.encode(prompt);
  instance.reference_tokens = tokenizer.encode(reference);
  if (instance.reference_tokens.empty()) {
    throw DataError("reference is empty");
  }
  const std::size_t total =
      instance.prompt_tokens.size() + instance.reference_tokens.size() + 1;
  if (total > max_context) {
    throw DataError("instance exceeds max context");
  }
  instance.tokens = instance.prompt_tokens;
  instance.tokens.insert(instance.tokens.end(),
                         instance.reference_tokens.begin(),
                         instance.reference_tokens.end());
  instance.tokens.push_back(Tokenizer::kEos);
  instance.loss_mask.assign(instance.tokens.size(), false);
  for (std::size_t i = instance.prompt_tokens.size();
       i < instance.tokens.size(); ++i) {
    instance.loss_mask[i] = true;
  }
  return instance;
}

PromptInstance make_training_instance(const std::vector<std::string>& captions,
                                      const std::string& reference,
                                      const Tokenizer& tokenizer,
                                      std::size_t max_context) {
  const std::size_t reference_len = tokenizer.encode(reference).size();
  if (reference_len == 0) {
    throw DataError("reference is empty");
  }
  if (reference_len + 1 > max_context) {
    throw DataError("reference alone exceeds max context");
  }
  std::vector<std::string> kept = captions;
  while (true) {
    const std::string prompt =
        kept.empty() ? build_no_retrieval_prompt() : build_prompt(kept);
    const std::size_t total =
        tokenizer.encode(prompt).size() + reference_len + 1;
    if (total <= max_context) {
      return make_training_instance(prompt, reference, tokenizer, max_context);
    }
    if (kept.empty()) {
      throw DataError("instance exceeds max context even without retrieval");
    }
    kept.pop_back();
  }
}

}  // namespace ragcap
