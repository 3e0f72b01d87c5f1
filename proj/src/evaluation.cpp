#include "ragcap/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "ragcap/common.hpp"

namespace ragcap {

namespace {

constexpr int kMaxOrder = 4;

using NgramCounts = std::map<TokenSeq, double>;

NgramCounts ngram_counts(const TokenSeq& tokens, int order) {
  NgramCounts counts;
  if (static_cast<int>(tokens.size()) >= order) {
    for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
      TokenSeq gram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                    tokens.begin() + static_cast<std::ptrdiff_t>(i + order));
      counts[gram] += 1.0;
    }
  }
  return counts;
}

void check_corpus(const std::vector<TokenSeq>& hypotheses,
                  const std::vector<RefSet>& references) {
  if (hypotheses.empty()) {
    throw DataError("empty evaluation corpus");
  }
  if (hypotheses.size() != references.size()) {
    throw DataError("hypothesis / reference count mismatch");
  }
  for (const auto& refs : references) {
    if (refs.empty()) {
      throw DataError("example without references");
    }
  }
}

}  // namespace

BleuComponents bleu4_components(const std::vector<TokenSeq>& hypotheses,
                                const std::vector<RefSet>& references) {
  check_corpus(hypotheses, references);

  std::array<double, kMaxOrder> matched{};
  std::array<double, kMaxOrder> total{};
  double hyp_len = 0.0;
  double ref_len = 0.0;

  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const TokenSeq& hyp = hypotheses[i];
    hyp_len += static_cast<double>(hyp.size());

    // Effective reference length: closest to the hypothesis length, ties
    // resolved toward the shorter reference.
    double best_ref = static_cast<double>(references[i].front().size());
    for (const auto& ref : references[i]) {
      const double len = static_cast<double>(ref.size());
      const double d_new = std::abs(len - static_cast<double>(hyp.size()));
      const double d_old = std::abs(best_ref - static_cast<double>(hyp.size()));
      if (d_new < d_old || (d_new == d_old && len < best_ref)) {
        best_ref = len;
      }
    }
    ref_len += best_ref;

    for (int order = 1; order <= kMaxOrder; ++order) {
      const NgramCounts hyp_counts = ngram_counts(hyp, order);
      NgramCounts max_ref_counts;
      for (const auto& ref : references[i]) {
        for (const auto& [gram, count] : ngram_counts(ref, order)) {
          max_ref_counts[gram] = std::max(max_ref_counts[gram], count);
        }
      }
      for (const auto& [gram, count] : hyp_counts) {
        total[order - 1] += count;
        auto it = max_ref_counts.find(gram);
        if (it != max_ref_counts.end()) {
          matched[order - 1] += std::min(count, it->second);
        }
      }
    }
  }

  BleuComponents out;
  double log_sum = 0.0;
  bool zero = false;
  for (int order = 0; order < kMaxOrder; ++order) {
    const double p =
        total[order] > 0.0 ? matched[order] / total[order] : 0.0;
    out.precisions[static_cast<std::size_t>(order)] = p;
    if (p <= 0.0) {
      zero = true;
    } else {
      log_sum += std::log(p);
    }
  }
  out.brevity_penalty =
      hyp_len >= ref_len ? 1.0
                         : (hyp_len == 0.0 ? 0.0
                                           : std::exp(1.0 - ref_len / hyp_len));
  out.bleu = zero ? 0.0 : out.brevity_penalty * std::exp(log_sum / kMaxOrder);
  return out;
}

double bleu4(const std::vector<TokenSeq>& hypotheses,
             const std::vector<RefSet>& references) {
  return bleu4_components(hypotheses, references).bleu;
}

double cider(const std::vector<TokenSeq>& hypotheses,
             const std::vector<RefSet>& references) {
  check_corpus(hypotheses, references);
  const std::size_t n_examples = hypotheses.size();
  if (n_examples < 2) {
    throw DataError("CIDEr needs at least two examples for the IDF");
  }

  double score_sum = 0.0;
  for (int order = 1; order <= kMaxOrder; ++order) {
    // Document frequency over the reference sets: number of examples whose
    // references contain each n-gram.
    NgramCounts doc_freq;
    for (const auto& refs : references) {
      std::map<TokenSeq, bool> seen;
      for (const auto& ref : refs) {
        for (const auto& [gram, count] : ngram_counts(ref, order)) {
          seen[gram] = true;
        }
      }
      for (const auto& [gram, present] : seen) {
        doc_freq[gram] += 1.0;
      }
    }
    const double log_n = std::log(static_cast<double>(n_examples));
    auto idf = [&](const TokenSeq& gram) {
      auto it = doc_freq.find(gram);
      const double df = it == doc_freq.end() ? 0.0 : it->second;
      return log_n - std::log(std::max(1.0, df));
    };
    auto tfidf = [&](const TokenSeq& tokens) {
      NgramCounts vec = ngram_counts(tokens, order);
      double total = 0.0;
      for (const auto& [gram, count] : vec) {
        total += count;
      }
      for (auto& [gram, count] : vec) {
        count = count / total * idf(gram);
      }
      return vec;
    };

    for (std::size_t i = 0; i < n_examples; ++i) {
      const NgramCounts hyp_vec = tfidf(hypotheses[i]);
      double hyp_norm = 0.0;
      for (const auto& [gram, w] : hyp_vec) {
        hyp_norm += w * w;
      }
      hyp_norm = std::sqrt(hyp_norm);

      double example_score = 0.0;
      for (const auto& ref : references[i]) {
        const NgramCounts ref_vec = tfidf(ref);
        double ref_norm = 0.0;
        for (const auto& [gram, w] : ref_vec) {
          ref_norm += w * w;
        }
        ref_norm = std::sqrt(ref_norm);
        double dot = 0.0;
        for (const auto& [gram, w] : hyp_vec) {
          auto it = ref_vec.find(gram);
          if (it != ref_vec.end()) {
            dot += w * it->second;
          }
        }
        if (hyp_norm > 0.0 && ref_norm > 0.0) {
          example_score += dot / (hyp_norm * ref_norm);
        }
      }
      score_sum += example_score / static_cast<double>(references[i].size());
    }
  }
  return 10.0 * score_sum / (kMaxOrder * static_cast<double>(n_examples));
}

std::string retrieval_only_baseline(const Datastore& store,
                                    const EmbeddingVector& image_embedding) {
  return store.retrieve(image_embedding, 1).front().first->text;
}

std::vector<KSweepRow> sweep_k(const ModelParams& params,
                               const Tokenizer& tokenizer,
                               const Datastore& store,
                               const std::vector<CaptionExample>& val_set,
                               const std::vector<int>& k_values, int beam,
                               int max_new) {
  if (k_values.empty()) {
    throw DataError("empty k grid");
  }
  std::vector<KSweepRow> rows;
  for (int k : k_values) {
    if (k < 1) {
      throw DataError("k must be at least 1");
    }
    std::vector<TokenSeq> hyps;
    std::vector<RefSet> refs;
    CaptionOptions options;
    options.k = k;
    options.beam = beam;
    options.max_new = max_new;
    for (const auto& example : val_set) {
      const CaptionOutput out =
          caption_image(params, tokenizer, &store, example.image, options);
      hyps.push_back(tokenizer.encode(out.caption));
      refs.push_back({tokenizer.encode(example.reference)});
    }
    rows.push_back({k, cider(hyps, refs)});
  }
  return rows;
}

std::string eval_report_to_json_text(const EvalReport& report) {
  nlohmann::ordered_json out;
  out["bleu4"] = report.bleu4;
  out["cider"] = report.cider;
  out["n_examples"] = report.n_examples;
  nlohmann::ordered_json dist = nlohmann::ordered_json::object();
  for (const auto& [source, fraction] : report.source_distribution) {
    dist[source] = fraction;
  }
  out["source_distribution"] = dist;
  out["config_echo"] = report.config_echo;
  return out.dump(2) + "\n";
}

}  // namespace ragcap
