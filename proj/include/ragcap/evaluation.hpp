#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "ragcap/datastore.hpp"
#include "ragcap/pipeline.hpp"

namespace ragcap {

// Token sequences; both metrics care only about token identity.
using TokenSeq = std::vector<int>;
using RefSet = std::vector<TokenSeq>;

struct BleuComponents {
  std::array<double, 4> precisions{};  // clipped n-gram precisions
  double brevity_penalty = 1.0;
  double bleu = 0.0;
};

// Corpus-level BLEU with modified n-gram precision up to 4-grams, geometric
// mean and brevity penalty. No smoothing: any zero precision zeroes the
// score.
BleuComponents bleu4_components(const std::vector<TokenSeq>& hypotheses,
                                const std::vector<RefSet>& references);
double bleu4(const std::vector<TokenSeq>& hypotheses,
             const std::vector<RefSet>& references);

// CIDEr in the original formulation: mean over examples of the average
// TF-IDF-weighted n-gram cosine similarity (n = 1..4), scaled by 10. IDF is
// computed over the reference corpus of the evaluation set. Requires at
// least two distinct examples.
double cider(const std::vector<TokenSeq>& hypotheses,
             const std::vector<RefSet>& references);

// Nearest caption as the prediction: top-1 retrieved text, verbatim.
std::string retrieval_only_baseline(const Datastore& store,
                                    const EmbeddingVector& image_embedding);

struct KSweepRow {
  int k = 0;
  double metric = 0.0;  // CIDEr of the decoded validation set
};

// Evaluates a fixed model with prompts built from each k.
std::vector<KSweepRow> sweep_k(const ModelParams& params,
                               const Tokenizer& tokenizer,
                               const Datastore& store,
                               const std::vector<CaptionExample>& val_set,
                               const std::vector<int>& k_values, int beam = 3,
                               int max_new = 24);

struct EvalReport {
  double bleu4 = 0.0;
  double cider = 0.0;
  int n_examples = 0;
  std::map<std::string, double> source_distribution;
  std::string config_echo;  // free-form description of how scores were made
};

std::string eval_report_to_json_text(const EvalReport& report);

}  // namespace ragcap
