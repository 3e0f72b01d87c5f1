#include "ragcap/training.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ragcap/common.hpp"
#include "ragcap/evaluation.hpp"
#include "ragcap/rng.hpp"

namespace ragcap {

using ordered_json = nlohmann::ordered_json;

void TrainingConfig::validate() const {
  if (learning_rate < 0.0 || batch_size < 1 || epochs < 1 || k < 1 ||
      beam < 1 || max_new < 1 || weight_decay < 0.0) {
    throw DataError("invalid training config");
  }
  if (selection_metric != "val_loss" && selection_metric != "cider") {
    throw DataError("unknown selection metric: " + selection_metric);
  }
}

AdamW::AdamW(const ModelConfig& config, double learning_rate,
             double weight_decay, double beta1, double beta2, double eps)
    : lr_(learning_rate),
      wd_(weight_decay),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      m_(zero_gradients(config)),
      v_(zero_gradients(config)) {}

void AdamW::step(std::vector<CrossAttentionWeights>& theta,
                 const ThetaGradients& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto update = [&](Matrix& w, Matrix& m, Matrix& v, const Matrix& g) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v.array().matrix() + (1.0 - beta2_) * g.array().square().matrix();
    const Matrix m_hat = m / bc1;
    const Matrix v_hat = v / bc2;
    w.array() -=
        lr_ * m_hat.array() / (v_hat.array().sqrt() + eps_) + wd_ * w.array();
  };
  for (std::size_t l = 0; l < theta.size(); ++l) {
    auto& layer = theta[l];
    auto& gm = m_.layers[l];
    auto& gv = v_.layers[l];
    const auto& gg = grads.layers[l];
    for (std::size_t head = 0; head < layer.w_q.size(); ++head) {
      update(layer.w_q[head], gm.w_q[head], gv.w_q[head], gg.w_q[head]);
      update(layer.w_k[head], gm.w_k[head], gv.w_k[head], gg.w_k[head]);
      update(layer.w_v[head], gm.w_v[head], gv.w_v[head], gg.w_v[head]);
    }
    update(layer.w_o, gm.w_o, gv.w_o, gg.w_o);
  }
}

namespace {

struct LossAccumulator {
  double total = 0.0;
  std::size_t tokens = 0;

  double per_token() const {
    return tokens == 0 ? 0.0 : total / static_cast<double>(tokens);
  }
};

std::size_t masked_count(const PromptInstance& instance) {
  std::size_t n = 0;
  for (bool m : instance.loss_mask) {
    if (m) ++n;
  }
  return n;
}

EncoderStates encode_for(const CaptionExample& example,
                         const ModelParams& params, bool blank_image) {
  EncoderStates enc = encode_image(example.image, params);
  if (blank_image) {
    enc.states.setZero();
  }
  return enc;
}

double cider_on_validation(const ModelParams& params, const Tokenizer& tok,
                           const Datastore* store,
                           const std::vector<CaptionExample>& val_set,
                           const TrainingConfig& config) {
  std::vector<std::vector<int>> hyps;
  std::vector<std::vector<std::vector<int>>> refs;
  CaptionOptions options;
  options.k = config.k;
  options.beam = config.beam;
  options.max_new = config.max_new;
  options.no_retrieval = !config.retrieval_enabled;
  options.blank_image = config.blank_image;
  for (const auto& example : val_set) {
    const CaptionOutput out =
        caption_image(params, tok, store, example.image, options);
    hyps.push_back(tok.encode(out.caption));
    refs.push_back({tok.encode(example.reference)});
  }
  return cider(hyps, refs);
}

}  // namespace

double evaluate_loss(const ModelParams& params, const Tokenizer& tokenizer,
                     const Datastore* store,
                     const std::vector<CaptionExample>& examples,
                     const TrainingConfig& config) {
  const Datastore* effective = config.retrieval_enabled ? store : nullptr;
  LossAccumulator acc;
  for (const auto& example : examples) {
    const PromptInstance instance = build_instance(
        example, effective, tokenizer, config.k, params.config.max_context);
    const EncoderStates enc =
        encode_for(example, params, config.blank_image);
    const Matrix logits = decoder_forward(instance.tokens, &enc, params);
    acc.total += caption_loss(logits, instance);
    acc.tokens += masked_count(instance);
  }
  return acc.per_token();
}

TrainingLog train(ModelParams& params, const Tokenizer& tokenizer,
                  const Datastore* store,
                  const std::vector<CaptionExample>& train_set,
                  const std::vector<CaptionExample>& val_set,
                  const TrainingConfig& config) {
  config.validate();
  if (train_set.empty()) {
    throw DataError("training set is empty");
  }
  if (config.retrieval_enabled && store == nullptr) {
    throw DataError("retrieval enabled but no datastore given");
  }
  const Datastore* effective = config.retrieval_enabled ? store : nullptr;

  AdamW optimizer(params.config, config.learning_rate, config.weight_decay);
  TrainingLog log;
  std::vector<CrossAttentionWeights> best_theta = params.theta;
  double best_score = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Per-epoch shuffle derived from the run seed.
    SeededRng shuffle_rng(config.seed + 0x5851f42d4c957f2dULL *
                                             static_cast<std::uint64_t>(epoch + 1));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);
    }

    LossAccumulator epoch_loss;
    std::size_t cursor = 0;
    while (cursor < order.size()) {
      const std::size_t batch_end =
          std::min(cursor + static_cast<std::size_t>(config.batch_size),
                   order.size());
      ThetaGradients batch_grads = zero_gradients(params.config);
      std::size_t batch_tokens = 0;
      for (std::size_t i = cursor; i < batch_end; ++i) {
        const CaptionExample& example = train_set[order[i]];
        const PromptInstance instance =
            build_instance(example, effective, tokenizer, config.k,
                           params.config.max_context);
        const EncoderStates enc =
            encode_for(example, params, config.blank_image);
        ThetaGradients grads;
        const double loss = loss_and_gradients(instance, enc, params, &grads);
        if (!std::isfinite(loss)) {
          throw NumericError("non-finite training loss at epoch " +
                             std::to_string(epoch + 1));
        }
        accumulate(batch_grads, grads);
        epoch_loss.total += loss;
        const std::size_t tokens = masked_count(instance);
        epoch_loss.tokens += tokens;
        batch_tokens += tokens;
      }
      // Objective: mean masked NLL per token within the batch.
      scale_gradients(batch_grads, 1.0 / static_cast<double>(batch_tokens));
      optimizer.step(params.theta, batch_grads);
      cursor = batch_end;
    }

    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.train_loss = epoch_loss.per_token();
    stats.val_loss = val_set.empty() ? 0.0
                                     : evaluate_loss(params, tokenizer, store,
                                                     val_set, config);
    if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.val_loss)) {
      throw NumericError("non-finite loss at epoch " +
                         std::to_string(epoch + 1));
    }
    double score;
    if (config.selection_metric == "cider" && !val_set.empty()) {
      stats.val_metric =
          cider_on_validation(params, tokenizer, effective, val_set, config);
      score = -stats.val_metric;  // higher CIDEr is better
    } else {
      stats.val_metric = stats.val_loss;
      score = val_set.empty() ? stats.train_loss : stats.val_loss;
    }
    if (score < best_score) {
      best_score = score;
      best_theta = params.theta;
      log.best_epoch = stats.epoch;
    }
    stats.checkpoint_ref = "epoch-" + std::to_string(stats.epoch);
    log.epochs.push_back(std::move(stats));
  }

  params.theta = std::move(best_theta);
  return log;
}

std::vector<AblationRow> ablation_compare(
    const std::vector<CaptionExample>& train_set,
    const std::vector<CaptionExample>& val_set, const Datastore& store,
    const Tokenizer& tokenizer, const std::vector<int>& d_grid,
    const ModelConfig& base_config, const TrainingConfig& config) {
  if (d_grid.empty()) {
    throw DataError("ablation grid is empty");
  }
  std::vector<AblationRow> rows;
  for (int d : d_grid) {
    ModelConfig cfg = base_config;
    cfg.d = d;
    AblationRow row;
    row.d = d;
    for (bool retrieval : {true, false}) {
      ModelParams params = init_params(cfg, config.seed);
      TrainingConfig tc = config;
      tc.retrieval_enabled = retrieval;
      TrainingLog log =
          train(params, tokenizer, &store, train_set, val_set, tc);
      double metric;
      if (tc.selection_metric == "cider") {
        metric = log.epochs[static_cast<std::size_t>(log.best_epoch - 1)]
                     .val_metric;
      } else {
        metric = log.epochs[static_cast<std::size_t>(log.best_epoch - 1)]
                     .val_loss;
      }
      (retrieval ? row.with_retrieval : row.without_retrieval) = metric;
    }
    rows.push_back(row);
  }
  return rows;
}

TrainingConfig training_config_from_json_text(const std::string& text) {
  ordered_json parsed;
  try {
    parsed = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad training config: ") + e.what());
  }
  TrainingConfig config;
  if (parsed.contains("learning_rate"))
    config.learning_rate = parsed["learning_rate"].get<double>();
  if (parsed.contains("batch_size"))
    config.batch_size = parsed["batch_size"].get<int>();
  if (parsed.contains("epochs")) config.epochs = parsed["epochs"].get<int>();
  if (parsed.contains("seed"))
    config.seed = parsed["seed"].get<std::uint64_t>();
  if (parsed.contains("retrieval_enabled"))
    config.retrieval_enabled = parsed["retrieval_enabled"].get<bool>();
  if (parsed.contains("blank_image"))
    config.blank_image = parsed["blank_image"].get<bool>();
  if (parsed.contains("weight_decay"))
    config.weight_decay = parsed["weight_decay"].get<double>();
  if (parsed.contains("selection_metric"))
    config.selection_metric = parsed["selection_metric"].get<std::string>();
  if (parsed.contains("k")) config.k = parsed["k"].get<int>();
  if (parsed.contains("beam")) config.beam = parsed["beam"].get<int>();
  if (parsed.contains("max_new")) config.max_new = parsed["max_new"].get<int>();
  config.validate();
  return config;
}

std::string training_config_to_json_text(const TrainingConfig& config) {
  ordered_json out;
  out["learning_rate"] = config.learning_rate;
  out["batch_size"] = config.batch_size;
  out["epochs"] = config.epochs;
  out["seed"] = config.seed;
  out["retrieval_enabled"] = config.retrieval_enabled;
  out["blank_image"] = config.blank_image;
  out["weight_decay"] = config.weight_decay;
  out["selection_metric"] = config.selection_metric;
  out["k"] = config.k;
  out["beam"] = config.beam;
  out["max_new"] = config.max_new;
  return out.dump(2);
}

void save_training_log(const std::string& path, const TrainingLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open for writing: " + path);
  }
  for (const auto& stats : log.epochs) {
    ordered_json line;
    line["epoch"] = stats.epoch;
    line["train_loss"] = stats.train_loss;
    line["val_loss"] = stats.val_loss;
    line["val_metric"] = stats.val_metric;
    line["checkpoint_ref"] = stats.checkpoint_ref;
    line["best"] = stats.epoch == log.best_epoch;
    out << line.dump() << "\n";
  }
}

}  // namespace ragcap
