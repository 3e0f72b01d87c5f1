#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ragcap/datastore.hpp"
#include "ragcap/pipeline.hpp"

namespace ragcap {

// Topic-structured synthetic domain. Topic t is anchored at standard basis
// vector e_{anchor_offset + t}; images and caption embeddings are noisy
// copies of the anchor; caption text mixes the topic's vocabulary with the
// shared function words.
struct DomainSpec {
  std::string name;
  int n_topics = 4;
  std::vector<std::vector<std::string>> topic_vocab;
  std::vector<std::string> function_words = {"a", "the", "with", "near"};
  int embedding_dim = 16;
  double noise_std = 0.25;
  double caption_noise_std = -1.0;  // < 0: same as noise_std
  int n_examples = 100;
  std::uint64_t seed = 0;
  int anchor_offset = 0;
  int caption_min_tokens = 5;
  int caption_max_tokens = 9;

  double caption_noise() const {
    return caption_noise_std < 0.0 ? noise_std : caption_noise_std;
  }
  void validate() const;
};

struct SynthCorpus {
  std::vector<CaptionExample> examples;  // (image embedding, reference)
  std::vector<CaptionRecord> records;    // reference captions as store entries
  std::vector<int> topics;               // topic index per example
};

// Fully seeded generation; bit-identical for identical specs.
SynthCorpus generate(const DomainSpec& spec);

// Convenience constructor with synthesized per-topic vocabularies.
DomainSpec make_domain_spec(const std::string& name, int n_topics,
                            int words_per_topic, int embedding_dim,
                            double noise_std, int n_examples,
                            std::uint64_t seed, int anchor_offset = 0);

DomainSpec domain_spec_from_json_text(const std::string& text);
std::string domain_spec_to_json_text(const DomainSpec& spec);

struct DomainTransferImage {
  double fraction_store_a = 0.0;  // B-vocabulary share of content tokens
  double fraction_store_b = 0.0;
  std::string caption_store_a;
  std::string caption_store_b;
};

struct DomainTransferReport {
  std::vector<DomainTransferImage> images;
  double mean_fraction_a = 0.0;
  double mean_fraction_b = 0.0;
  double strict_increase_share = 0.0;
};

// Captions the B-domain evaluation images twice, with the training store A
// and after the swap to store B, and reports how much of the generated
// content vocabulary moves into B's topic vocabulary.
DomainTransferReport domain_transfer_experiment(
    const ModelParams& params, const Tokenizer& tokenizer,
    const Datastore& store_a, const Datastore& store_b,
    const std::vector<CaptionExample>& b_eval, const DomainSpec& spec_b,
    const CaptionOptions& options);

}  // namespace ragcap
