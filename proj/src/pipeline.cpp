#include "ragcap/pipeline.hpp"

#include "ragcap/common.hpp"

namespace ragcap {

std::vector<std::string> retrieved_captions(const Datastore& store,
                                            const EmbeddingVector& image,
                                            int k, RetrievalLog* log,
                                            std::int64_t query_id) {
  const auto hits =
      store.retrieve(image, static_cast<std::size_t>(k), log, query_id);
  std::vector<std::string> captions;
  captions.reserve(hits.size());
  for (const auto& [record, score] : hits) {
    captions.push_back(record->text);
  }
  return captions;
}

PromptInstance build_instance(const CaptionExample& example,
                              const Datastore* store, const Tokenizer& tok,
                              int k, int max_context) {
  if (store != nullptr) {
    const auto captions = retrieved_captions(*store, example.image, k);
    return make_training_instance(captions, example.reference, tok,
                                  static_cast<std::size_t>(max_context));
  }
  return make_training_instance(build_no_retrieval_prompt(), example.reference,
                                tok, static_cast<std::size_t>(max_context));
}

CaptionOutput caption_image(const ModelParams& params, const Tokenizer& tok,
                            const Datastore* store,
                            const EmbeddingVector& image,
                            const CaptionOptions& options, RetrievalLog* log,
                            std::int64_t query_id) {
  if (!options.no_retrieval && store == nullptr) {
    throw DataError("caption requested with retrieval but no datastore");
  }

  std::string prompt;
  if (options.no_retrieval) {
    prompt = build_no_retrieval_prompt();
  } else {
    std::vector<std::string> captions =
        retrieved_captions(*store, image, options.k, log, query_id);
    // Drop captions from the last slot until prompt plus generation head-
    // room fit the context window.
    while (true) {
      prompt = captions.empty() ? build_no_retrieval_prompt()
                                : build_prompt(captions);
      const std::size_t need =
          tok.encode(prompt).size() + static_cast<std::size_t>(options.max_new);
      if (need <= static_cast<std::size_t>(params.config.max_context) ||
          captions.empty()) {
        break;
      }
      captions.pop_back();
    }
  }

  EncoderStates enc = encode_image(image, params);
  if (options.blank_image) {
    enc.states.setZero();
  }
  const std::vector<int> prompt_tokens = tok.encode(prompt);
  const std::vector<int> generated =
      beam_search(enc, prompt_tokens, params, options.beam, options.max_new);

  CaptionOutput out;
  out.prompt = prompt;
  out.caption = tok.decode(generated);  // reserved ids (incl. <eos>) dropped
  return out;
}

}  // namespace ragcap
