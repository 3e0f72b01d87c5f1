#include <algorithm>
#include <cmath>

#include "ragcap/common.hpp"
#include "ragcap/model.hpp"

namespace ragcap {

namespace {

struct Hypothesis {
  std::vector<int> generated;
  double score = 0.0;  // summed log-probabilities of the generated tokens
};

bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.generated < b.generated;
}

}  // namespace

std::vector<int> beam_search(const EncoderStates& enc,
                             const std::vector<int>& prompt_tokens,
                             const ModelParams& params, int beam,
                             int max_new) {
  if (beam < 1) {
    throw DataError("beam size must be at least 1");
  }
  if (prompt_tokens.empty()) {
    throw DataError("beam search requires a non-empty prompt");
  }
  if (max_new < 1) {
    return {};
  }
  const int vocab = params.config.vocab_size;
  // Generation may use the whole vocabulary except the control tokens that
  // never terminate or continue a caption.
  const auto banned = [](int tok) {
    return tok == Tokenizer::kPad || tok == Tokenizer::kBos ||
           tok == Tokenizer::kUnk;
  };

  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> finished;

  for (int step = 0; step < max_new && !live.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    candidates.reserve(live.size() * static_cast<std::size_t>(vocab));
    for (const Hypothesis& hyp : live) {
      std::vector<int> tokens = prompt_tokens;
      tokens.insert(tokens.end(), hyp.generated.begin(), hyp.generated.end());
      const Matrix logits = decoder_forward(tokens, &enc, params);
      const auto row = logits.row(logits.rows() - 1);
      const double max_logit = row.maxCoeff();
      const double lse =
          max_logit + std::log((row.array() - max_logit).exp().sum());
      for (int tok = 0; tok < vocab; ++tok) {
        if (banned(tok)) continue;
        Hypothesis next = hyp;
        next.generated.push_back(tok);
        next.score += row(tok) - lse;
        candidates.push_back(std::move(next));
      }
    }
    std::sort(candidates.begin(), candidates.end(), better);
    if (candidates.size() > static_cast<std::size_t>(beam)) {
      candidates.resize(static_cast<std::size_t>(beam));
    }
    live.clear();
    for (Hypothesis& hyp : candidates) {
      if (hyp.generated.back() == Tokenizer::kEos) {
        finished.push_back(std::move(hyp));
      } else {
        live.push_back(std::move(hyp));
      }
    }
  }
  // Hypotheses still alive at the step limit count as finished.
  for (Hypothesis& hyp : live) {
    finished.push_back(std::move(hyp));
  }
  if (finished.empty()) {
    return {};
  }
  std::sort(finished.begin(), finished.end(), better);
  return finished.front().generated;
}

}  // namespace ragcap
