#include "ragcap/synth.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "ragcap/common.hpp"
#include "ragcap/rng.hpp"
#include "ragcap/vector_index.hpp"

namespace ragcap {

using ordered_json = nlohmann::ordered_json;

void DomainSpec::validate() const {
  if (name.empty()) {
    throw DataError("domain name is empty");
  }
  if (n_topics < 1 || n_examples < 1 || embedding_dim < 1) {
    throw DataError("invalid domain spec");
  }
  if (anchor_offset < 0 || anchor_offset + n_topics > embedding_dim) {
    throw DataError("embedding_dim too small for orthogonal topic anchors");
  }
  if (static_cast<int>(topic_vocab.size()) != n_topics) {
    throw DataError("topic_vocab must have one entry per topic");
  }
  std::set<std::string> seen;
  for (const auto& vocab : topic_vocab) {
    if (vocab.empty()) {
      throw DataError("empty topic vocabulary");
    }
    for (const auto& word : vocab) {
      if (!seen.insert(word).second) {
        throw DataError("topic vocabularies overlap on: " + word);
      }
    }
  }
  if (noise_std < 0.0) {
    throw DataError("noise_std must be non-negative");
  }
  if (caption_min_tokens < 1 || caption_max_tokens < caption_min_tokens) {
    throw DataError("bad caption length bounds");
  }
}

SynthCorpus generate(const DomainSpec& spec) {
  spec.validate();
  SeededRng rng(spec.seed);
  SynthCorpus corpus;
  corpus.examples.reserve(static_cast<std::size_t>(spec.n_examples));
  corpus.records.reserve(static_cast<std::size_t>(spec.n_examples));

  auto noisy_anchor = [&](int topic, double std) {
    EmbeddingVector v(static_cast<std::size_t>(spec.embedding_dim), 0.0);
    v[static_cast<std::size_t>(spec.anchor_offset + topic)] = 1.0;
    if (std > 0.0) {
      for (double& x : v) {
        x += std * rng.gaussian();
      }
    }
    return normalize(v);
  };

  for (int i = 0; i < spec.n_examples; ++i) {
    const int topic = i % spec.n_topics;  // round-robin keeps topics balanced
    const EmbeddingVector image = noisy_anchor(topic, spec.noise_std);

    const int span = spec.caption_max_tokens - spec.caption_min_tokens + 1;
    const int length =
        spec.caption_min_tokens +
        static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(span)));
    const auto& vocab = spec.topic_vocab[static_cast<std::size_t>(topic)];
    std::string caption;
    for (int j = 0; j < length; ++j) {
      // Every third slot is a function word; the rest carry topic content.
      const bool function_slot = (j % 3 == 0) && !spec.function_words.empty();
      const auto& pool = function_slot ? spec.function_words : vocab;
      const auto& word = pool[rng.uniform_int(pool.size())];
      if (!caption.empty()) caption.push_back(' ');
      caption += word;
    }

    CaptionExample example;
    example.image = image;
    example.reference = caption;
    corpus.examples.push_back(std::move(example));

    CaptionRecord record;
    record.id = i;
    record.text = caption;
    record.source = spec.name;
    record.embedding = noisy_anchor(topic, spec.caption_noise());
    corpus.records.push_back(std::move(record));
    corpus.topics.push_back(topic);
  }
  return corpus;
}

DomainSpec make_domain_spec(const std::string& name, int n_topics,
                            int words_per_topic, int embedding_dim,
                            double noise_std, int n_examples,
                            std::uint64_t seed, int anchor_offset) {
  DomainSpec spec;
  spec.name = name;
  spec.n_topics = n_topics;
  spec.embedding_dim = embedding_dim;
  spec.noise_std = noise_std;
  spec.n_examples = n_examples;
  spec.seed = seed;
  spec.anchor_offset = anchor_offset;
  spec.topic_vocab.resize(static_cast<std::size_t>(n_topics));
  for (int t = 0; t < n_topics; ++t) {
    for (int w = 0; w < words_per_topic; ++w) {
      spec.topic_vocab[static_cast<std::size_t>(t)].push_back(
          name + "t" + std::to_string(t) + "w" + std::to_string(w));
    }
  }
  return spec;
}

DomainSpec domain_spec_from_json_text(const std::string& text) {
  ordered_json parsed;
  try {
    parsed = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad domain spec: ") + e.what());
  }
  DomainSpec spec;
  spec.name = parsed.at("name").get<std::string>();
  spec.n_topics = parsed.at("n_topics").get<int>();
  spec.topic_vocab =
      parsed.at("topic_vocab").get<std::vector<std::vector<std::string>>>();
  if (parsed.contains("function_words")) {
    spec.function_words =
        parsed["function_words"].get<std::vector<std::string>>();
  }
  spec.embedding_dim = parsed.at("embedding_dim").get<int>();
  spec.noise_std = parsed.at("noise_std").get<double>();
  if (parsed.contains("caption_noise_std")) {
    spec.caption_noise_std = parsed["caption_noise_std"].get<double>();
  }
  spec.n_examples = parsed.at("n_examples").get<int>();
  spec.seed = parsed.at("seed").get<std::uint64_t>();
  if (parsed.contains("anchor_offset")) {
    spec.anchor_offset = parsed["anchor_offset"].get<int>();
  }
  if (parsed.contains("caption_min_tokens")) {
    spec.caption_min_tokens = parsed["caption_min_tokens"].get<int>();
  }
  if (parsed.contains("caption_max_tokens")) {
    spec.caption_max_tokens = parsed["caption_max_tokens"].get<int>();
  }
  spec.validate();
  return spec;
}

std::string domain_spec_to_json_text(const DomainSpec& spec) {
  ordered_json out;
  out["name"] = spec.name;
  out["n_topics"] = spec.n_topics;
  out["topic_vocab"] = spec.topic_vocab;
  out["function_words"] = spec.function_words;
  out["embedding_dim"] = spec.embedding_dim;
  out["noise_std"] = spec.noise_std;
  out["caption_noise_std"] = spec.caption_noise_std;
  out["n_examples"] = spec.n_examples;
  out["seed"] = spec.seed;
  out["anchor_offset"] = spec.anchor_offset;
  out["caption_min_tokens"] = spec.caption_min_tokens;
  out["caption_max_tokens"] = spec.caption_max_tokens;
  return out.dump(2) + "\n";
}

DomainTransferReport domain_transfer_experiment(
    const ModelParams& params, const Tokenizer& tokenizer,
    const Datastore& store_a, const Datastore& store_b,
    const std::vector<CaptionExample>& b_eval, const DomainSpec& spec_b,
    const CaptionOptions& options) {
  std::set<std::string> b_vocab;
  for (const auto& vocab : spec_b.topic_vocab) {
    b_vocab.insert(vocab.begin(), vocab.end());
  }
  const std::set<std::string> function_words(spec_b.function_words.begin(),
                                             spec_b.function_words.end());

  auto b_fraction = [&](const std::string& caption) {
    int content = 0;
    int from_b = 0;
    for (const auto& token : Tokenizer::split(caption)) {
      if (function_words.count(token) != 0) continue;
      ++content;
      if (b_vocab.count(token) != 0) ++from_b;
    }
    return content == 0 ? 0.0
                        : static_cast<double>(from_b) /
                              static_cast<double>(content);
  };

  DomainTransferReport report;
  int increased = 0;
  for (const auto& example : b_eval) {
    DomainTransferImage image;
    image.caption_store_a =
        caption_image(params, tokenizer, &store_a, example.image, options)
            .caption;
    image.caption_store_b =
        caption_image(params, tokenizer, &store_b, example.image, options)
            .caption;
    image.fraction_store_a = b_fraction(image.caption_store_a);
    image.fraction_store_b = b_fraction(image.caption_store_b);
    report.mean_fraction_a += image.fraction_store_a;
    report.mean_fraction_b += image.fraction_store_b;
    if (image.fraction_store_b > image.fraction_store_a) {
      ++increased;
    }
    report.images.push_back(std::move(image));
  }
  const double n = static_cast<double>(report.images.size());
  if (!report.images.empty()) {
    report.mean_fraction_a /= n;
    report.mean_fraction_b /= n;
    report.strict_increase_share = static_cast<double>(increased) / n;
  }
  return report;
}

}  // namespace ragcap
