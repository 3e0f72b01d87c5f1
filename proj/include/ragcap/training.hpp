#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ragcap/datastore.hpp"
#include "ragcap/model.hpp"
#include "ragcap/pipeline.hpp"

namespace ragcap {

struct TrainingConfig {
  double learning_rate = 1e-4;
  int batch_size = 16;
  int epochs = 10;
  std::uint64_t seed = 0;
  bool retrieval_enabled = true;
  bool blank_image = false;
  double weight_decay = 0.01;
  std::string selection_metric = "val_loss";  // or "cider"
  int k = 4;
  int beam = 3;
  int max_new = 24;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;  // per-token
  double val_loss = 0.0;    // per-token
  double val_metric = 0.0;  // value of the selection metric
  std::string checkpoint_ref;
};

struct TrainingLog {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
};

// Decoupled-weight-decay adaptive moment estimation over the
// cross-attention weights. The decay term is applied directly
// (theta -= weight_decay * theta), independent of the learning rate, so a
// zero learning rate leaves only the decay update.
class AdamW {
 public:
  AdamW(const ModelConfig& config, double learning_rate, double weight_decay,
        double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(std::vector<CrossAttentionWeights>& theta,
            const ThetaGradients& grads);

 private:
  double lr_, wd_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  ThetaGradients m_, v_;
};

// Optimizes the cross-attention weights on (image, retrieved-captions,
// reference) instances; frozen tensors are untouched. params.theta holds
// the best epoch's weights on return. Deterministic given config.seed.
TrainingLog train(ModelParams& params, const Tokenizer& tokenizer,
                  const Datastore* store,
                  const std::vector<CaptionExample>& train_set,
                  const std::vector<CaptionExample>& val_set,
                  const TrainingConfig& config);

// Mean per-token masked loss over a dataset with fixed weights.
double evaluate_loss(const ModelParams& params, const Tokenizer& tokenizer,
                     const Datastore* store,
                     const std::vector<CaptionExample>& examples,
                     const TrainingConfig& config);

struct AblationRow {
  int d = 0;
  double with_retrieval = 0.0;
  double without_retrieval = 0.0;
};

// Trains a retrieval-prompted and a "This image shows" model per grid value
// of d with identical seeds and budgets and reports the selection metric
// for both.
std::vector<AblationRow> ablation_compare(
    const std::vector<CaptionExample>& train_set,
    const std::vector<CaptionExample>& val_set, const Datastore& store,
    const Tokenizer& tokenizer, const std::vector<int>& d_grid,
    const ModelConfig& base_config, const TrainingConfig& config);

// Run-config file (JSON object whose keys match the TrainingConfig fields).
TrainingConfig training_config_from_json_text(const std::string& text);
std::string training_config_to_json_text(const TrainingConfig& config);

void save_training_log(const std::string& path, const TrainingLog& log);

}  // namespace ragcap
