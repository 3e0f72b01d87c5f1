#include <cmath>

#include "model_detail.hpp"
#include "ragcap/common.hpp"
#include "ragcap/model.hpp"

namespace ragcap {

namespace {

// Backward through y = norm(x) .* gain + bias given d_out = dL/dy.
Matrix layer_norm_backward(const Matrix& d_out, const Matrix& norm,
                           const Vector& rstd, const LayerNormParams& p) {
  const Eigen::Index n = d_out.rows();
  const Eigen::Index dim = d_out.cols();
  Matrix dx(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::ArrayXd dnorm =
        d_out.row(i).transpose().array() * p.gain.array();
    const Eigen::ArrayXd xhat = norm.row(i).transpose().array();
    const double m1 = dnorm.mean();
    const double m2 = (dnorm * xhat).mean();
    dx.row(i) = (rstd(i) * (dnorm - m1 - xhat * m2)).transpose();
  }
  return dx;
}

// Row-wise softmax backward: ds = a .* (da - sum(da .* a)).
Eigen::RowVectorXd softmax_backward_row(const Eigen::RowVectorXd& da,
                                        const Eigen::RowVectorXd& a) {
  const double inner = da.dot(a);
  return (a.array() * (da.array() - inner)).matrix();
}

// Reconstructs a layer-norm output from its cached normalized rows.
Matrix ln_output(const Matrix& norm, const LayerNormParams& p) {
  Matrix out = norm.array().rowwise() * p.gain.transpose().array();
  out.array().rowwise() += p.bias.transpose().array();
  return out;
}

}  // namespace

ThetaGradients backward(const PromptInstance& instance,
                        const EncoderStates& enc, const ModelParams& params,
                        const ForwardCache& cache, const Matrix& logits) {
  const ModelConfig& cfg = params.config;
  const Eigen::Index n = logits.rows();
  if (static_cast<std::size_t>(n) != instance.tokens.size()) {
    throw DataError("logits length does not match instance");
  }

  ThetaGradients grads = zero_gradients(cfg);

  // d(loss)/d(logits): softmax minus one-hot on rows that score a masked
  // target; zero elsewhere.
  Matrix d_logits = Matrix::Zero(n, cfg.vocab_size);
  for (std::size_t i = 1; i < instance.tokens.size(); ++i) {
    if (!instance.loss_mask[i]) continue;
    const Eigen::Index row = static_cast<Eigen::Index>(i - 1);
    const double max_logit = logits.row(row).maxCoeff();
    Eigen::RowVectorXd probs =
        (logits.row(row).array() - max_logit).exp();
    probs /= probs.sum();
    d_logits.row(row) = probs;
    d_logits(row, instance.tokens[i]) -= 1.0;
  }

  // Tied head: logits = lnf_out * E^T.
  Matrix dx = d_logits * params.token_embedding;  // n x d_model
  dx = layer_norm_backward(dx, cache.lnf_norm, cache.lnf_rstd,
                           params.ln_final);

  const Eigen::Index dm = cfg.d_model;
  const Eigen::Index dh = dm / cfg.n_heads;
  const double sa_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const double ca_scale = 1.0 / std::sqrt(static_cast<double>(cfg.d));

  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const FrozenLayer& layer = params.layers[static_cast<std::size_t>(l)];
    const CrossAttentionWeights& cross =
        params.theta[static_cast<std::size_t>(l)];
    CrossAttentionWeights& cross_grads =
        grads.layers[static_cast<std::size_t>(l)];
    const LayerCache& lc = cache.layers[static_cast<std::size_t>(l)];

    // FFN sublayer: x3 = x2 + gelu(ln3(x2) * W1) * W2.
    {
      const Matrix d_act = dx * layer.ffn_out.transpose();
      const Matrix d_pre = d_act.array() *
                           lc.ffn_pre.unaryExpr([](double z) {
                             return detail::gelu_activation_grad(z);
                           }).array();
      const Matrix d_ln3 = d_pre * layer.ffn_in.transpose();
      dx += layer_norm_backward(d_ln3, lc.ln3_norm, lc.ln3_rstd, layer.ln3);
    }

    // Cross-attention sublayer: x2 = x1 + MHA(ln2(x1), enc) * W_O.
    {
      const Matrix d_concat = dx * cross.w_o.transpose();  // n x h*d
      cross_grads.w_o += lc.cross.heads_concat.transpose() * dx;
      const Matrix ln2_out = ln_output(lc.ln2_norm, layer.ln2);
      Matrix d_ln2 = Matrix::Zero(n, dm);
      for (int head = 0; head < cfg.n_heads; ++head) {
        const std::size_t hidx = static_cast<std::size_t>(head);
        const Matrix d_head = d_concat.middleCols(head * cfg.d, cfg.d);
        const Matrix& attn = lc.cross.attn[hidx];  // n x P
        const Matrix& q = lc.cross.q[hidx];
        const Matrix& k = lc.cross.k[hidx];
        const Matrix& v = lc.cross.v[hidx];

        const Matrix d_attn = d_head * v.transpose();  // n x P
        Matrix d_scores(n, attn.cols());
        for (Eigen::Index i = 0; i < n; ++i) {
          d_scores.row(i) = softmax_backward_row(d_attn.row(i), attn.row(i));
        }
        const Matrix d_v = attn.transpose() * d_head;            // P x d
        const Matrix d_q = d_scores * k * ca_scale;              // n x d
        const Matrix d_k = d_scores.transpose() * q * ca_scale;  // P x d

        cross_grads.w_q[hidx] += ln2_out.transpose() * d_q;
        cross_grads.w_k[hidx] += enc.states.transpose() * d_k;
        cross_grads.w_v[hidx] += enc.states.transpose() * d_v;
        d_ln2 += d_q * cross.w_q[hidx].transpose();
      }
      dx += layer_norm_backward(d_ln2, lc.ln2_norm, lc.ln2_rstd, layer.ln2);
    }

    // Self-attention sublayer: x1 = x0 + SA(ln1(x0)) * W_proj.
    {
      const Matrix d_concat = dx * layer.attn_proj.transpose();  // n x dm
      Matrix d_qkv = Matrix::Zero(n, 3 * dm);
      for (int head = 0; head < cfg.n_heads; ++head) {
        const std::size_t hidx = static_cast<std::size_t>(head);
        const Matrix d_head = d_concat.middleCols(head * dh, dh);
        const Matrix& attn = lc.sa_attn[hidx];
        const Matrix& q = lc.sa_q[hidx];
        const Matrix& k = lc.sa_k[hidx];
        const Matrix& v = lc.sa_v[hidx];

        Matrix d_q = Matrix::Zero(n, dh);
        Matrix d_k = Matrix::Zero(n, dh);
        Matrix d_v = Matrix::Zero(n, dh);
        for (Eigen::Index i = 0; i < n; ++i) {
          Eigen::RowVectorXd d_attn_row = Eigen::RowVectorXd::Zero(i + 1);
          for (Eigen::Index j = 0; j <= i; ++j) {
            d_attn_row(j) = d_head.row(i).dot(v.row(j));
            d_v.row(j) += attn(i, j) * d_head.row(i);
          }
          const Eigen::RowVectorXd attn_row = attn.row(i).head(i + 1);
          const Eigen::RowVectorXd d_score =
              softmax_backward_row(d_attn_row, attn_row);
          for (Eigen::Index j = 0; j <= i; ++j) {
            d_q.row(i) += d_score(j) * k.row(j) * sa_scale;
            d_k.row(j) += d_score(j) * q.row(i) * sa_scale;
          }
        }
        d_qkv.middleCols(head * dh, dh) = d_q;
        d_qkv.middleCols(dm + head * dh, dh) = d_k;
        d_qkv.middleCols(2 * dm + head * dh, dh) = d_v;
      }
      const Matrix d_ln1 = d_qkv * layer.attn_qkv.transpose();
      dx += layer_norm_backward(d_ln1, lc.ln1_norm, lc.ln1_rstd, layer.ln1);
    }
  }
  return grads;
}

double loss_and_gradients(const PromptInstance& instance,
                          const EncoderStates& enc, const ModelParams& params,
                          ThetaGradients* grads) {
  ForwardCache cache;
  const Matrix logits = decoder_forward(instance.tokens, &enc, params, &cache);
  const double loss = caption_loss(logits, instance);
  if (grads != nullptr) {
    *grads = backward(instance, enc, params, cache, logits);
  }
  return loss;
}

}  // namespace ragcap
