#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ragcap/datastore.hpp"
#include "ragcap/model.hpp"
#include "ragcap/prompt.hpp"

namespace ragcap {

// One supervised example: image embedding plus reference caption.
struct CaptionExample {
  EmbeddingVector image;
  std::string reference;
};

struct CaptionOptions {
  int k = 4;
  int beam = 3;
  int max_new = 24;
  bool no_retrieval = false;
  bool blank_image = false;
};

struct CaptionOutput {
  std::string caption;
  std::string prompt;
};

// Retrieved captions for an image, in hit order.
std::vector<std::string> retrieved_captions(const Datastore& store,
                                            const EmbeddingVector& image,
                                            int k, RetrievalLog* log = nullptr,
                                            std::int64_t query_id = -1);

// Builds the training instance for one example: retrieval-prompted when a
// store is given, "This image shows" otherwise. Applies the caption-drop
// overflow policy, reserving headroom tokens after the prompt.
PromptInstance build_instance(const CaptionExample& example,
                              const Datastore* store, const Tokenizer& tok,
                              int k, int max_context);

// Full decode path: retrieve, render the prompt, run beam search, detokenize.
CaptionOutput caption_image(const ModelParams& params, const Tokenizer& tok,
                            const Datastore* store,
                            const EmbeddingVector& image,
                            const CaptionOptions& options,
                            RetrievalLog* log = nullptr,
                            std::int64_t query_id = -1);

}  // namespace ragcap
