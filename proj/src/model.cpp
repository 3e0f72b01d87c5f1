#include "ragcap/model.hpp"

#include <cmath>
#include <fstream>

#include "ragcap/common.hpp"
#include "ragcap/hash.hpp"
#include "ragcap/io.hpp"
#include "ragcap/rng.hpp"

namespace ragcap {

namespace {

constexpr double kLnEps = 1e-5;

// Initialization scales for the frozen backbone and the trainable
// cross-attention. The identity components in the self-attention value and
// output projections give the random decoder the prompt-reuse behavior of a
// pretrained one (see FrozenLayer).
constexpr double kEmbedStd = 0.5;
constexpr double kPosStd = 0.1;
constexpr double kValueIdentity = 0.7;
constexpr double kProjIdentity = 0.7;
constexpr double kFrozenNoise = 0.25;  // scaled by 1/sqrt(fan_in)
constexpr double kThetaStd = 0.02;
constexpr double kWOInitScale = 0.1;
constexpr std::uint64_t kThetaSeedSalt = 0x9e3779b97f4a7c15ULL;

void fill_gaussian(Matrix& m, SeededRng& rng, double std) {
  // Row-major fill order so the stream is independent of Eigen's storage.
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = rng.gaussian() * std;
    }
  }
}

double gelu(double z) { return 0.5 * z * (1.0 + std::erf(z * M_SQRT1_2)); }

double gelu_grad(double z) {
  const double cdf = 0.5 * (1.0 + std::erf(z * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * z * z) * 0.3989422804014326779;
  return cdf + z * pdf;
}

}  // namespace

void ModelConfig::validate() const {
  if (n_layers < 1 || n_heads < 1 || d < 1 || d_model < 1 || d_encoder < 1 ||
      vocab_size < 1 || max_context < 2 || n_patches < 1 || image_dim < 1) {
    throw DataError("invalid model config");
  }
  if (d_model % n_heads != 0) {
    throw DataError("d_model must be divisible by n_heads");
  }
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p;
  p.config = config;
  p.init_seed = seed;

  const int dm = config.d_model;
  const int denc = config.d_encoder;
  const int dff = config.ffn_dim();

  // The frozen stream never depends on d, so variants that differ only in
  // the cross-attention width share the same backbone.
  SeededRng frozen_rng(seed);

  p.token_embedding.resize(config.vocab_size, dm);
  fill_gaussian(p.token_embedding, frozen_rng, kEmbedStd);
  p.pos_embedding.resize(config.max_context, dm);
  fill_gaussian(p.pos_embedding, frozen_rng, kPosStd);

  p.patch_proj.resize(config.n_patches);
  for (auto& proj : p.patch_proj) {
    proj.resize(config.image_dim, denc);
    fill_gaussian(proj, frozen_rng, 1.0 / std::sqrt(config.image_dim));
  }

  p.layers.resize(config.n_layers);
  for (auto& layer : p.layers) {
    layer.attn_qkv.resize(dm, 3 * dm);
    fill_gaussian(layer.attn_qkv, frozen_rng, 1.0 / std::sqrt(dm));
    // Value block: identity plus small noise.
    for (int r = 0; r < dm; ++r) {
      for (int c = 0; c < dm; ++c) {
        layer.attn_qkv(r, 2 * dm + c) =
            (r == c ? kValueIdentity : 0.0) +
            frozen_rng.gaussian() * kFrozenNoise / std::sqrt(dm);
      }
    }
    layer.attn_proj.resize(dm, dm);
    for (int r = 0; r < dm; ++r) {
      for (int c = 0; c < dm; ++c) {
        layer.attn_proj(r, c) =
            (r == c ? kProjIdentity : 0.0) +
            frozen_rng.gaussian() * kFrozenNoise / std::sqrt(dm);
      }
    }
    for (LayerNormParams* ln : {&layer.ln1, &layer.ln2, &layer.ln3}) {
      ln->gain = Vector::Ones(dm);
      ln->bias = Vector::Zero(dm);
    }
    layer.ffn_in.resize(dm, dff);
    fill_gaussian(layer.ffn_in, frozen_rng, 1.0 / std::sqrt(dm));
    layer.ffn_out.resize(dff, dm);
    fill_gaussian(layer.ffn_out, frozen_rng, 0.5 / std::sqrt(dff));
  }
  p.ln_final.gain = Vector::Ones(dm);
  p.ln_final.bias = Vector::Zero(dm);

  SeededRng theta_rng(seed ^ kThetaSeedSalt);
  p.theta.resize(config.n_layers);
  for (auto& cross : p.theta) {
    cross.w_q.resize(config.n_heads);
    cross.w_k.resize(config.n_heads);
    cross.w_v.resize(config.n_heads);
    for (int head = 0; head < config.n_heads; ++head) {
      cross.w_q[head].resize(dm, config.d);
      fill_gaussian(cross.w_q[head], theta_rng, kThetaStd);
      cross.w_k[head].resize(denc, config.d);
      fill_gaussian(cross.w_k[head], theta_rng, kThetaStd);
      cross.w_v[head].resize(denc, config.d);
      fill_gaussian(cross.w_v[head], theta_rng, kThetaStd);
    }
    cross.w_o.resize(config.n_heads * config.d, dm);
    fill_gaussian(cross.w_o, theta_rng, kThetaStd * kWOInitScale);
  }
  return p;
}

EncoderStates encode_image(const EmbeddingVector& image_embedding,
                           const ModelParams& params) {
  const ModelConfig& cfg = params.config;
  if (static_cast<int>(image_embedding.size()) != cfg.image_dim) {
    throw DataError("image embedding dimension mismatch");
  }
  Eigen::RowVectorXd emb(cfg.image_dim);
  for (int i = 0; i < cfg.image_dim; ++i) {
    emb(i) = image_embedding[static_cast<std::size_t>(i)];
  }
  EncoderStates enc;
  enc.states.resize(cfg.n_patches, cfg.d_encoder);
  for (int patch = 0; patch < cfg.n_patches; ++patch) {
    enc.states.row(patch) = emb * params.patch_proj[patch];
  }
  return enc;
}

namespace {

// y = norm(x) .* gain + bias, row-wise. Saves the normalized rows and
// reciprocal stddev for the backward pass.
Matrix layer_norm(const Matrix& x, const LayerNormParams& p, Matrix* norm_out,
                  Vector* rstd_out) {
  const Eigen::Index n = x.rows();
  const Eigen::Index dim = x.cols();
  Matrix norm(n, dim);
  Vector rstd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    const double r = 1.0 / std::sqrt(var + kLnEps);
    norm.row(i) = (x.row(i).array() - mean) * r;
    rstd(i) = r;
  }
  Matrix out = norm.array().rowwise() * p.gain.transpose().array();
  out.array().rowwise() += p.bias.transpose().array();
  if (norm_out != nullptr) *norm_out = norm;
  if (rstd_out != nullptr) *rstd_out = std::move(rstd);
  return out;
}

// Causal multi-head self-attention with frozen weights. Scores and the
// weighted sums are computed row by row over the visible prefix only, so
// positions beyond t cannot perturb position t even at the bit level.
Matrix self_attention(const Matrix& x_norm, const FrozenLayer& layer,
                      int n_heads, LayerCache* cache) {
  const Eigen::Index n = x_norm.rows();
  const Eigen::Index dm = x_norm.cols();
  const Eigen::Index dh = dm / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const Matrix qkv = x_norm * layer.attn_qkv;  // n x 3*dm
  Matrix concat(n, dm);
  if (cache != nullptr) {
    cache->sa_q.resize(n_heads);
    cache->sa_k.resize(n_heads);
    cache->sa_v.resize(n_heads);
    cache->sa_attn.resize(n_heads);
  }
  for (int head = 0; head < n_heads; ++head) {
    const Matrix q = qkv.middleCols(head * dh, dh);
    const Matrix k = qkv.middleCols(dm + head * dh, dh);
    const Matrix v = qkv.middleCols(2 * dm + head * dh, dh);
    Matrix attn = Matrix::Zero(n, n);
    Matrix out(n, dh);
    for (Eigen::Index i = 0; i < n; ++i) {
      double max_score = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double s = q.row(i).dot(k.row(j)) * scale;
        attn(i, j) = s;
        max_score = std::max(max_score, s);
      }
      double denom = 0.0;
      for (Eigen::Index j = 0; j <= i; ++j) {
        attn(i, j) = std::exp(attn(i, j) - max_score);
        denom += attn(i, j);
      }
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(dh);
      for (Eigen::Index j = 0; j <= i; ++j) {
        attn(i, j) /= denom;
        acc += attn(i, j) * v.row(j);
      }
      out.row(i) = acc;
    }
    concat.middleCols(head * dh, dh) = out;
    if (cache != nullptr) {
      cache->sa_q[head] = q;
      cache->sa_k[head] = k;
      cache->sa_v[head] = v;
      cache->sa_attn[head] = std::move(attn);
    }
  }
  if (cache != nullptr) {
    cache->sa_concat = concat;
  }
  return concat * layer.attn_proj;
}

}  // namespace

Matrix cross_attention(const Matrix& decoder_states, const EncoderStates& enc,
                       const CrossAttentionWeights& weights,
                       CrossAttentionCache* cache) {
  const Eigen::Index n = decoder_states.rows();
  const int n_heads = static_cast<int>(weights.w_q.size());
  const Eigen::Index d = weights.w_q.front().cols();
  if (enc.states.cols() != weights.w_k.front().rows() ||
      decoder_states.cols() != weights.w_q.front().rows()) {
    throw DataError("cross-attention shape mismatch");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  Matrix concat(n, n_heads * d);
  if (cache != nullptr) {
    cache->q.resize(n_heads);
    cache->k.resize(n_heads);
    cache->v.resize(n_heads);
    cache->attn.resize(n_heads);
  }
  for (int head = 0; head < n_heads; ++head) {
    const Matrix q = decoder_states * weights.w_q[head];  // n x d
    const Matrix k = enc.states * weights.w_k[head];      // P x d
    const Matrix v = enc.states * weights.w_v[head];      // P x d
    Matrix scores = q * k.transpose() * scale;            // n x P
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
      const double max_score = scores.row(i).maxCoeff();
      scores.row(i) = (scores.row(i).array() - max_score).exp();
      scores.row(i) /= scores.row(i).sum();
    }
    concat.middleCols(head * d, d) = scores * v;
    if (cache != nullptr) {
      cache->q[head] = q;
      cache->k[head] = k;
      cache->v[head] = v;
      cache->attn[head] = scores;
    }
  }
  if (cache != nullptr) {
    cache->heads_concat = concat;
  }
  return concat * weights.w_o;
}

Matrix decoder_forward(const std::vector<int>& tokens,
                       const EncoderStates* enc, const ModelParams& params,
                       ForwardCache* cache) {
  const ModelConfig& cfg = params.config;
  const Eigen::Index n = static_cast<Eigen::Index>(tokens.size());
  if (n == 0) {
    throw DataError("empty token sequence");
  }
  if (n > cfg.max_context) {
    throw DataError("token sequence exceeds max context");
  }
  if (enc != nullptr && (enc->states.rows() != cfg.n_patches ||
                         enc->states.cols() != cfg.d_encoder)) {
    throw DataError("encoder state shape mismatch");
  }

  Matrix x(n, cfg.d_model);
  for (Eigen::Index t = 0; t < n; ++t) {
    const int tok = tokens[static_cast<std::size_t>(t)];
    if (tok < 0 || tok >= cfg.vocab_size) {
      throw DataError("unknown token id: " + std::to_string(tok));
    }
    x.row(t) = params.token_embedding.row(tok) + params.pos_embedding.row(t);
  }

  if (cache != nullptr) {
    cache->x0 = x;
    cache->layers.assign(static_cast<std::size_t>(cfg.n_layers), LayerCache{});
  }

  for (int l = 0; l < cfg.n_layers; ++l) {
    const FrozenLayer& layer = params.layers[static_cast<std::size_t>(l)];
    LayerCache* lc =
        cache != nullptr ? &cache->layers[static_cast<std::size_t>(l)] : nullptr;
    if (lc != nullptr) lc->x_in = x;

    Matrix norm;
    Vector rstd;
    Matrix ln1 = layer_norm(x, layer.ln1, &norm, &rstd);
    if (lc != nullptr) {
      lc->ln1_norm = std::move(norm);
      lc->ln1_rstd = std::move(rstd);
    }
    x += self_attention(ln1, layer, cfg.n_heads, lc);
    if (lc != nullptr) lc->x_after_attn = x;

    if (enc != nullptr) {
      Matrix ln2 = layer_norm(x, layer.ln2, &norm, &rstd);
      if (lc != nullptr) {
        lc->ln2_norm = std::move(norm);
        lc->ln2_rstd = std::move(rstd);
      }
      x += cross_attention(ln2, *enc,
                           params.theta[static_cast<std::size_t>(l)],
                           lc != nullptr ? &lc->cross : nullptr);
    }
    if (lc != nullptr) lc->x_after_cross = x;

    Matrix ln3 = layer_norm(x, layer.ln3, &norm, &rstd);
    if (lc != nullptr) {
      lc->ln3_norm = std::move(norm);
      lc->ln3_rstd = std::move(rstd);
    }
    Matrix pre = ln3 * layer.ffn_in;
    Matrix act = pre.unaryExpr([](double z) { return gelu(z); });
    if (lc != nullptr) {
      lc->ffn_pre = pre;
      lc->ffn_act = act;
    }
    x += act * layer.ffn_out;
  }

  Matrix norm;
  Vector rstd;
  Matrix lnf = layer_norm(x, params.ln_final, &norm, &rstd);
  if (cache != nullptr) {
    cache->lnf_norm = std::move(norm);
    cache->lnf_rstd = std::move(rstd);
  }
  // Output head tied to the token embedding.
  return lnf * params.token_embedding.transpose();
}

double caption_loss(const Matrix& logits, const PromptInstance& instance) {
  const std::size_t n = instance.tokens.size();
  if (static_cast<std::size_t>(logits.rows()) != n) {
    throw DataError("logits length does not match instance");
  }
  bool any = false;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!instance.loss_mask[i]) continue;
    if (i == 0) {
      throw DataError("loss mask set on the first position");
    }
    any = true;
    const auto row = logits.row(static_cast<Eigen::Index>(i - 1));
    const double max_logit = row.maxCoeff();
    const double lse =
        max_logit + std::log((row.array() - max_logit).exp().sum());
    loss += lse - row(instance.tokens[i]);
  }
  if (!any) {
    throw DataError("loss mask is all false");
  }
  return loss;
}

std::int64_t count_trainable_params(const ModelConfig& config) {
  config.validate();
  const std::int64_t L = config.n_layers;
  const std::int64_t h = config.n_heads;
  const std::int64_t d = config.d;
  return L * h * d * (2LL * config.d_encoder + 2LL * config.d_model);
}

std::int64_t theta_param_count(const ModelParams& params) {
  std::int64_t count = 0;
  for (const auto& cross : params.theta) {
    for (const auto& m : cross.w_q) count += m.size();
    for (const auto& m : cross.w_k) count += m.size();
    for (const auto& m : cross.w_v) count += m.size();
    count += cross.w_o.size();
  }
  return count;
}

ThetaGradients zero_gradients(const ModelConfig& config) {
  ThetaGradients g;
  g.layers.resize(static_cast<std::size_t>(config.n_layers));
  for (auto& cross : g.layers) {
    cross.w_q.assign(config.n_heads, Matrix::Zero(config.d_model, config.d));
    cross.w_k.assign(config.n_heads, Matrix::Zero(config.d_encoder, config.d));
    cross.w_v.assign(config.n_heads, Matrix::Zero(config.d_encoder, config.d));
    cross.w_o = Matrix::Zero(config.n_heads * config.d, config.d_model);
  }
  return g;
}

void accumulate(ThetaGradients& acc, const ThetaGradients& delta) {
  for (std::size_t l = 0; l < acc.layers.size(); ++l) {
    for (std::size_t head = 0; head < acc.layers[l].w_q.size(); ++head) {
      acc.layers[l].w_q[head] += delta.layers[l].w_q[head];
      acc.layers[l].w_k[head] += delta.layers[l].w_k[head];
      acc.layers[l].w_v[head] += delta.layers[l].w_v[head];
    }
    acc.layers[l].w_o += delta.layers[l].w_o;
  }
}

void scale_gradients(ThetaGradients& grads, double factor) {
  for (auto& cross : grads.layers) {
    for (auto& m : cross.w_q) m *= factor;
    for (auto& m : cross.w_k) m *= factor;
    for (auto& m : cross.w_v) m *= factor;
    cross.w_o *= factor;
  }
}

namespace {

void hash_matrix(Sha256& h, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      h.update_double(m(r, c));
    }
  }
}

void hash_vector(Sha256& h, const Vector& v) {
  h.update_doubles(v.data(), static_cast<std::size_t>(v.size()));
}

}  // namespace

std::string frozen_hash(const ModelParams& params) {
  Sha256 h;
  hash_matrix(h, params.token_embedding);
  hash_matrix(h, params.pos_embedding);
  for (const auto& proj : params.patch_proj) {
    hash_matrix(h, proj);
  }
  for (const auto& layer : params.layers) {
    hash_matrix(h, layer.attn_qkv);
    hash_matrix(h, layer.attn_proj);
    for (const LayerNormParams* ln : {&layer.ln1, &layer.ln2, &layer.ln3}) {
      hash_vector(h, ln->gain);
      hash_vector(h, ln->bias);
    }
    hash_matrix(h, layer.ffn_in);
    hash_matrix(h, layer.ffn_out);
  }
  hash_vector(h, params.ln_final.gain);
  hash_vector(h, params.ln_final.bias);
  return h.hex_digest();
}

namespace {

constexpr char kCheckpointMagic[9] = "RAGCAPCK";

void write_tensor(std::ostream& out, const std::string& name, const Matrix& m) {
  write_string(out, name);
  write_u64(out, static_cast<std::uint64_t>(m.rows()));
  write_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      write_f64(out, m(r, c));
    }
  }
}

Matrix read_tensor(std::istream& in, const std::string& expected_name) {
  const std::string name = read_string(in);
  if (name != expected_name) {
    throw DataError("checkpoint section mismatch: expected " + expected_name +
                    ", found " + name);
  }
  const std::uint64_t rows = read_u64(in);
  const std::uint64_t cols = read_u64(in);
  Matrix m(rows, cols);
  for (std::uint64_t r = 0; r < rows; ++r) {
    for (std::uint64_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          read_f64(in);
    }
  }
  return m;
}

void write_ln(std::ostream& out, const std::string& name,
              const LayerNormParams& ln) {
  write_tensor(out, name + "/gain", ln.gain);
  write_tensor(out, name + "/bias", ln.bias);
}

LayerNormParams read_ln(std::istream& in, const std::string& name) {
  LayerNormParams ln;
  ln.gain = read_tensor(in, name + "/gain");
  ln.bias = read_tensor(in, name + "/bias");
  return ln;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const Tokenizer& tokenizer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open for writing: " + path);
  }
  const ModelConfig& cfg = params.config;
  out.write(kCheckpointMagic, 8);
  write_u32(out, 1);
  for (int field : {cfg.n_layers, cfg.n_heads, cfg.d_model, cfg.d_encoder,
                    cfg.d, cfg.vocab_size, cfg.max_context, cfg.n_patches,
                    cfg.image_dim, cfg.d_ff}) {
    write_u32(out, static_cast<std::uint32_t>(field));
  }
  write_u64(out, params.init_seed);
  tokenizer.write(out);

  write_tensor(out, "token_embedding", params.token_embedding);
  write_tensor(out, "pos_embedding", params.pos_embedding);
  for (int patch = 0; patch < cfg.n_patches; ++patch) {
    write_tensor(out, "patch_proj/" + std::to_string(patch),
                 params.patch_proj[static_cast<std::size_t>(patch)]);
  }
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string prefix = "layer" + std::to_string(l);
    const FrozenLayer& layer = params.layers[static_cast<std::size_t>(l)];
    write_tensor(out, prefix + "/attn_qkv", layer.attn_qkv);
    write_tensor(out, prefix + "/attn_proj", layer.attn_proj);
    write_ln(out, prefix + "/ln1", layer.ln1);
    write_ln(out, prefix + "/ln2", layer.ln2);
    write_ln(out, prefix + "/ln3", layer.ln3);
    write_tensor(out, prefix + "/ffn_in", layer.ffn_in);
    write_tensor(out, prefix + "/ffn_out", layer.ffn_out);
  }
  write_ln(out, "ln_final", params.ln_final);
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string prefix = "theta" + std::to_string(l);
    const CrossAttentionWeights& cross =
        params.theta[static_cast<std::size_t>(l)];
    for (int head = 0; head < cfg.n_heads; ++head) {
      const std::string hp = prefix + "/head" + std::to_string(head);
      write_tensor(out, hp + "/w_q", cross.w_q[static_cast<std::size_t>(head)]);
      write_tensor(out, hp + "/w_k", cross.w_k[static_cast<std::size_t>(head)]);
      write_tensor(out, hp + "/w_v", cross.w_v[static_cast<std::size_t>(head)]);
    }
    write_tensor(out, prefix + "/w_o", cross.w_o);
  }
  if (!out) {
    throw DataError("write failed: " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open checkpoint: " + path);
  }
  expect_magic(in, kCheckpointMagic, path);
  if (read_u32(in) != 1) {
    throw DataError("unsupported checkpoint version in " + path);
  }
  ModelConfig cfg;
  cfg.n_layers = static_cast<int>(read_u32(in));
  cfg.n_heads = static_cast<int>(read_u32(in));
  cfg.d_model = static_cast<int>(read_u32(in));
  cfg.d_encoder = static_cast<int>(read_u32(in));
  cfg.d = static_cast<int>(read_u32(in));
  cfg.vocab_size = static_cast<int>(read_u32(in));
  cfg.max_context = static_cast<int>(read_u32(in));
  cfg.n_patches = static_cast<int>(read_u32(in));
  cfg.image_dim = static_cast<int>(read_u32(in));
  cfg.d_ff = static_cast<int>(read_u32(in));

  Checkpoint ck;
  ck.params.config = cfg;
  ck.params.init_seed = read_u64(in);
  ck.tokenizer = Tokenizer::read(in);

  ModelParams& p = ck.params;
  p.token_embedding = read_tensor(in, "token_embedding");
  p.pos_embedding = read_tensor(in, "pos_embedding");
  p.patch_proj.resize(static_cast<std::size_t>(cfg.n_patches));
  for (int patch = 0; patch < cfg.n_patches; ++patch) {
    p.patch_proj[static_cast<std::size_t>(patch)] =
        read_tensor(in, "patch_proj/" + std::to_string(patch));
  }
  p.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string prefix = "layer" + std::to_string(l);
    FrozenLayer& layer = p.layers[static_cast<std::size_t>(l)];
    layer.attn_qkv = read_tensor(in, prefix + "/attn_qkv");
    layer.attn_proj = read_tensor(in, prefix + "/attn_proj");
    layer.ln1 = read_ln(in, prefix + "/ln1");
    layer.ln2 = read_ln(in, prefix + "/ln2");
    layer.ln3 = read_ln(in, prefix + "/ln3");
    layer.ffn_in = read_tensor(in, prefix + "/ffn_in");
    layer.ffn_out = read_tensor(in, prefix + "/ffn_out");
  }
  p.ln_final = read_ln(in, "ln_final");
  p.theta.resize(static_cast<std::size_t>(cfg.n_layers));
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string prefix = "theta" + std::to_string(l);
    CrossAttentionWeights& cross = p.theta[static_cast<std::size_t>(l)];
    cross.w_q.resize(static_cast<std::size_t>(cfg.n_heads));
    cross.w_k.resize(static_cast<std::size_t>(cfg.n_heads));
    cross.w_v.resize(static_cast<std::size_t>(cfg.n_heads));
    for (int head = 0; head < cfg.n_heads; ++head) {
      const std::string hp = prefix + "/head" + std::to_string(head);
      cross.w_q[static_cast<std::size_t>(head)] = read_tensor(in, hp + "/w_q");
      cross.w_k[static_cast<std::size_t>(head)] = read_tensor(in, hp + "/w_k");
      cross.w_v[static_cast<std::size_t>(head)] = read_tensor(in, hp + "/w_v");
    }
    cross.w_o = read_tensor(in, prefix + "/w_o");
  }
  return ck;
}

namespace detail {
double gelu_activation(double z) { return gelu(z); }
double gelu_activation_grad(double z) { return gelu_grad(z); }
Matrix layer_norm_forward(const Matrix& x, const LayerNormParams& p,
                          Matrix* norm_out, Vector* rstd_out) {
  return layer_norm(x, p, norm_out, rstd_out);
}
}  // namespace detail

}  // namespace ragcap
