#include "crelab/tinylm/model.hpp"

#include "crelab/common/error.hpp"
#include "crelab/common/hash.hpp"
#include "crelab/common/rng.hpp"
#include "crelab/kernels/kernels.hpp"
#include "forward_pass.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace crelab::tinylm {

std::vector<Token> Tokenizer::encode(std::string_view text) {
  std::vector<Token> out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(static_cast<Token>(c));
  return out;
}

std::string Tokenizer::decode(std::span<const Token> tokens) {
  std::string out;
  out.reserve(tokens.size());
  for (Token t : tokens) {
    if (t >= 0 && t < 256) out.push_back(static_cast<char>(static_cast<unsigned char>(t)));
  }
  return out;
}

void ModelConfig::validate() const {
  if (n_layers < 2) throw ConfigError("n_layers must be >= 2");
  if (n_heads < 1 || d_head < 1 || d_model < 1) throw ConfigError("dimensions must be positive");
  if (n_heads * d_head != d_model) {
    throw ConfigError("n_heads * d_head (" + std::to_string(n_heads * d_head) +
                      ") must equal d_model (" + std::to_string(d_model) + ")");
  }
  if (vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
  if (max_seq_len < 1) throw ConfigError("max_seq_len must be >= 1");
}

std::span<const float> LayerTrace::q(int layer) const {
  if (layer < 1 || layer > n_layers()) {
    throw IndexError("layer " + std::to_string(layer) + " outside 1.." + std::to_string(n_layers()));
  }
  return early_exit_dists[static_cast<std::size_t>(layer - 1)];
}

std::span<const float> LayerTrace::hidden(int layer) const {
  if (layer < 1 || layer > static_cast<int>(hidden_states.size())) {
    throw IndexError("layer " + std::to_string(layer) + " out of range");
  }
  return hidden_states[static_cast<std::size_t>(layer - 1)];
}

Weights Weights::zeros(const ModelConfig& c) {
  const auto d = static_cast<std::size_t>(c.d_model);
  const auto ff = static_cast<std::size_t>(c.d_ff());
  const auto v = static_cast<std::size_t>(c.vocab_size);
  Weights w;
  w.tok_emb.assign(v * d, 0.0f);
  w.pos_emb.assign(static_cast<std::size_t>(c.max_seq_len) * d, 0.0f);
  w.layers.resize(static_cast<std::size_t>(c.n_layers));
  for (LayerWeights& l : w.layers) {
    l.ln1_gain.assign(d, 0.0f);
    l.ln1_bias.assign(d, 0.0f);
    l.w_qkv.assign(3 * d * d, 0.0f);
    l.b_qkv.assign(3 * d, 0.0f);
    l.w_out.assign(d * d, 0.0f);
    l.b_out.assign(d, 0.0f);
    l.ln2_gain.assign(d, 0.0f);
    l.ln2_bias.assign(d, 0.0f);
    l.w_up.assign(ff * d, 0.0f);
    l.b_up.assign(ff, 0.0f);
    l.w_down.assign(d * ff, 0.0f);
    l.b_down.assign(d, 0.0f);
  }
  w.lnf_gain.assign(d, 0.0f);
  w.lnf_bias.assign(d, 0.0f);
  w.unembed.assign(v * d, 0.0f);
  return w;
}

namespace {

template <class W, class Span>
std::vector<Span> collect(W& w) {
  std::vector<Span> out{Span(w.tok_emb), Span(w.pos_emb)};
  for (auto& l : w.layers) {
    for (auto* t : {&l.ln1_gain, &l.ln1_bias, &l.w_qkv, &l.b_qkv, &l.w_out, &l.b_out,
                    &l.ln2_gain, &l.ln2_bias, &l.w_up, &l.b_up, &l.w_down, &l.b_down}) {
      out.emplace_back(*t);
    }
  }
  out.emplace_back(w.lnf_gain);
  out.emplace_back(w.lnf_bias);
  out.emplace_back(w.unembed);
  return out;
}

}  // namespace

std::vector<std::span<float>> Weights::tensors() {
  return collect<Weights, std::span<float>>(*this);
}

std::vector<std::span<const float>> Weights::tensors() const {
  return collect<const Weights, std::span<const float>>(*this);
}

std::size_t Weights::parameter_count() const {
  std::size_t n = 0;
  for (auto t : tensors()) n += t.size();
  return n;
}

Model Model::init(const ModelConfig& config) {
  config.validate();
  Weights w = Weights::zeros(config);
  Rng rng(config.seed);
  auto fill_normal = [&rng](std::vector<float>& t, double stddev) {
    for (float& x : t) x = static_cast<float>(standard_normal(rng) * stddev);
  };
  const double residual_std = 0.02 / std::sqrt(2.0 * config.n_layers);
  fill_normal(w.tok_emb, 0.02);
  fill_normal(w.pos_emb, 0.01);
  for (LayerWeights& l : w.layers) {
    std::fill(l.ln1_gain.begin(), l.ln1_gain.end(), 1.0f);
    std::fill(l.ln2_gain.begin(), l.ln2_gain.end(), 1.0f);
    fill_normal(l.w_qkv, 0.02);
    fill_normal(l.w_out, residual_std);
    fill_normal(l.w_up, 0.02);
    fill_normal(l.w_down, residual_std);
  }
  std::fill(w.lnf_gain.begin(), w.lnf_gain.end(), 1.0f);
  fill_normal(w.unembed, 0.02);
  return Model(config, std::move(w));
}

Model::Model(ModelConfig config, Weights weights) : config_(config), weights_(std::move(weights)) {
  config_.validate();
  const Weights expected = Weights::zeros(config_);
  const auto want = expected.tensors();
  const auto have = std::as_const(weights_).tensors();
  if (want.size() != have.size()) throw ConfigError("weights do not match config (tensor count)");
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i].size() != have[i].size()) {
      throw ConfigError("weights do not match config (tensor " + std::to_string(i) + ")");
    }
  }
}

void softmax_inplace(std::span<float> values) {
  if (values.empty()) return;
  const float mx = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (float& v : values) {
    v = std::exp(v - mx);
    sum += v;
  }
  const double inv = 1.0 / sum;
  for (float& v : values) v = static_cast<float>(v * inv);
}

std::vector<float> Model::early_exit(std::span<const float> hidden, int layer) const {
  if (layer < 1 || layer > config_.n_layers) {
    throw IndexError("early_exit: layer " + std::to_string(layer) + " outside 1.." +
                     std::to_string(config_.n_layers));
  }
  const auto d = static_cast<std::size_t>(config_.d_model);
  if (hidden.size() != d) throw InputError("early_exit: hidden state has wrong dimension");
  std::vector<float> normed(d);
  detail::layer_norm_row(hidden, weights_.lnf_gain, weights_.lnf_bias, normed);
  std::vector<float> logits(static_cast<std::size_t>(config_.vocab_size));
  kernels::matvec(weights_.unembed, logits.size(), d, normed, logits);
  softmax_inplace(logits);
  return logits;
}

LayerTrace Model::forward(std::span<const Token> tokens) const {
  if (tokens.empty()) throw InputError("forward: empty input");
  if (tokens.size() > static_cast<std::size_t>(config_.max_seq_len)) {
    throw InputError("forward: input length " + std::to_string(tokens.size()) +
                     " exceeds max_seq_len " + std::to_string(config_.max_seq_len));
  }
  detail::ForwardPass pass;
  detail::run_forward(config_, weights_, tokens, pass);

  const auto d = static_cast<std::size_t>(config_.d_model);
  const auto dh = static_cast<std::size_t>(config_.d_head);
  const std::size_t last = tokens.size() - 1;
  LayerTrace trace;
  trace.step_index = last;
  for (int l = 0; l < config_.n_layers; ++l) {
    const detail::LayerCache& c = pass.layers[static_cast<std::size_t>(l)];
    const float* h = c.x_out.data() + last * d;
    trace.hidden_states.emplace_back(h, h + d);
    trace.early_exit_dists.push_back(early_exit(trace.hidden_states.back(), l + 1));
    std::vector<std::vector<float>> heads;
    for (int hd = 0; hd < config_.n_heads; ++hd) {
      const float* a = c.heads.data() + last * d + static_cast<std::size_t>(hd) * dh;
      heads.emplace_back(a, a + dh);
    }
    trace.head_activations.push_back(std::move(heads));
  }
  return trace;
}

std::uint64_t Model::checksum() const {
  std::uint64_t h = kFnvOffset;
  const std::int64_t block[] = {config_.n_layers, config_.n_heads,    config_.d_model,
                                config_.d_head,   config_.vocab_size, config_.max_seq_len,
                                static_cast<std::int64_t>(config_.seed)};
  h = fnv1a64(std::as_bytes(std::span(block)), h);
  for (auto t : weights_.tensors()) h = fnv1a64(std::as_bytes(t), h);
  return h;
}

std::string Model::id() const { return "tlm-" + to_hex(checksum()); }

namespace detail {

void layer_norm_row(std::span<const float> x, std::span<const float> gain,
                    std::span<const float> bias, std::span<float> out) {
  const std::size_t d = x.size();
  double mean = 0.0;
  for (float v : x) mean += v;
  mean /= static_cast<double>(d);
  double var = 0.0;
  for (float v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(d);
  const auto rstd = static_cast<float>(1.0 / std::sqrt(var + kLayerNormEps));
  const auto m = static_cast<float>(mean);
  for (std::size_t i = 0; i < d; ++i) out[i] = (x[i] - m) * rstd * gain[i] + bias[i];
}

void layer_norm(std::span<const float> x, std::span<const float> gain, std::span<const float> bias,
                std::size_t rows, std::size_t dim, NormCache& cache) {
  cache.out.resize(rows * dim);
  cache.xhat.resize(rows * dim);
  cache.rstd.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const float* xr = x.data() + r * dim;
    double mean = 0.0;
    for (std::size_t i = 0; i < dim; ++i) mean += xr[i];
    mean /= static_cast<double>(dim);
    double var = 0.0;
    for (std::size_t i = 0; i < dim; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<double>(dim);
    const auto rstd = static_cast<float>(1.0 / std::sqrt(var + kLayerNormEps));
    const auto m = static_cast<float>(mean);
    cache.rstd[r] = rstd;
    for (std::size_t i = 0; i < dim; ++i) {
      const float xh = (xr[i] - m) * rstd;
      cache.xhat[r * dim + i] = xh;
      cache.out[r * dim + i] = xh * gain[i] + bias[i];
    }
  }
}

namespace {
constexpr float kGeluC = 0.7978845608028654f;  // sqrt(2/pi)
constexpr float kGeluK = 0.044715f;
}  // namespace

float gelu(float u) {
  return 0.5f * u * (1.0f + std::tanh(kGeluC * (u + kGeluK * u * u * u)));
}

float gelu_grad(float u) {
  const float th = std::tanh(kGeluC * (u + kGeluK * u * u * u));
  return 0.5f * (1.0f + th) + 0.5f * u * (1.0f - th * th) * kGeluC * (1.0f + 3.0f * kGeluK * u * u);
}

void run_forward(const ModelConfig& config, const Weights& w, std::span<const Token> tokens,
                 ForwardPass& pass) {
  const std::size_t T = tokens.size();
  const auto d = static_cast<std::size_t>(config.d_model);
  const auto ff = static_cast<std::size_t>(config.d_ff());
  const auto H = static_cast<std::size_t>(config.n_heads);
  const auto dh = static_cast<std::size_t>(config.d_head);
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

  pass.length = T;
  pass.layers.resize(static_cast<std::size_t>(config.n_layers));

  std::vector<float> x(T * d);
  for (std::size_t t = 0; t < T; ++t) {
    const Token tok = tokens[t];
    if (tok < 0 || tok >= config.vocab_size) {
      throw InputError("token id " + std::to_string(tok) + " outside vocabulary");
    }
    const float* e = w.tok_emb.data() + static_cast<std::size_t>(tok) * d;
    const float* p = w.pos_emb.data() + t * d;
    for (std::size_t i = 0; i < d; ++i) x[t * d + i] = e[i] + p[i];
  }

  std::vector<float> scores(T);
  for (std::size_t l = 0; l < pass.layers.size(); ++l) {
    const LayerWeights& lw = w.layers[l];
    LayerCache& c = pass.layers[l];
    c.x_in = x;

    layer_norm(c.x_in, lw.ln1_gain, lw.ln1_bias, T, d, c.ln1);
    c.qkv.resize(T * 3 * d);
    for (std::size_t t = 0; t < T; ++t) {
      std::span<float> row(c.qkv.data() + t * 3 * d, 3 * d);
      kernels::matvec(lw.w_qkv, 3 * d, d, std::span(c.ln1.out).subspan(t * d, d), row);
      for (std::size_t i = 0; i < 3 * d; ++i) row[i] += lw.b_qkv[i];
    }

    c.probs.assign(H * T * T, 0.0f);
    c.heads.assign(T * d, 0.0f);
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t t = 0; t < T; ++t) {
        const float* q = c.qkv.data() + t * 3 * d + h * dh;
        for (std::size_t s = 0; s <= t; ++s) {
          const float* k = c.qkv.data() + s * 3 * d + d + h * dh;
          scores[s] = kernels::dot({q, dh}, {k, dh}) * scale;
        }
        softmax_inplace(std::span(scores.data(), t + 1));
        float* prow = c.probs.data() + (h * T + t) * T;
        std::span<float> out(c.heads.data() + t * d + h * dh, dh);
        for (std::size_t s = 0; s <= t; ++s) {
          prow[s] = scores[s];
          const float* v = c.qkv.data() + s * 3 * d + 2 * d + h * dh;
          kernels::axpy(scores[s], {v, dh}, out);
        }
      }
    }

    c.x_mid.resize(T * d);
    std::vector<float> tmp(std::max(d, ff));
    for (std::size_t t = 0; t < T; ++t) {
      kernels::matvec(lw.w_out, d, d, std::span(c.heads).subspan(t * d, d),
                      std::span(tmp.data(), d));
      for (std::size_t i = 0; i < d; ++i) {
        c.x_mid[t * d + i] = c.x_in[t * d + i] + tmp[i] + lw.b_out[i];
      }
    }

    layer_norm(c.x_mid, lw.ln2_gain, lw.ln2_bias, T, d, c.ln2);
    c.up.resize(T * ff);
    c.act.resize(T * ff);
    for (std::size_t t = 0; t < T; ++t) {
      std::span<float> up(c.up.data() + t * ff, ff);
      kernels::matvec(lw.w_up, ff, d, std::span(c.ln2.out).subspan(t * d, d), up);
      for (std::size_t i = 0; i < ff; ++i) {
        up[i] += lw.b_up[i];
        c.act[t * ff + i] = gelu(up[i]);
      }
    }

    c.x_out.resize(T * d);
    for (std::size_t t = 0; t < T; ++t) {
      kernels::matvec(lw.w_down, d, ff, std::span(c.act).subspan(t * ff, ff),
                      std::span(tmp.data(), d));
      for (std::size_t i = 0; i < d; ++i) {
        c.x_out[t * d + i] = c.x_mid[t * d + i] + tmp[i] + lw.b_down[i];
      }
    }
    x = c.x_out;
  }
}

}  // namespace detail

}  // namespace crelab::tinylm
