#include "crelab/tinylm/train.hpp"

#include "crelab/common/error.hpp"
#include "crelab/common/rng.hpp"
#include "crelab/kernels/kernels.hpp"
#include "forward_pass.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>

namespace crelab::tinylm {

namespace {

using detail::ForwardPass;
using detail::LayerCache;
using detail::NormCache;

void layer_norm_backward(std::span<const float> dy, const NormCache& c,
                         std::span<const float> gain, std::span<float> dgain,
                         std::span<float> dbias, std::span<float> dx, std::size_t rows,
                         std::size_t dim) {
  for (std::size_t r = 0; r < rows; ++r) {
    const float* dyr = dy.data() + r * dim;
    const float* xh = c.xhat.data() + r * dim;
    double m1 = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const float dxh = dyr[i] * gain[i];
      m1 += dxh;
      m2 += dxh * xh[i];
      dgain[i] += dyr[i] * xh[i];
      dbias[i] += dyr[i];
    }
    const auto mean1 = static_cast<float>(m1 / static_cast<double>(dim));
    const auto mean2 = static_cast<float>(m2 / static_cast<double>(dim));
    const float rstd = c.rstd[r];
    for (std::size_t i = 0; i < dim; ++i) {
      dx[r * dim + i] += rstd * (dyr[i] * gain[i] - mean1 - xh[i] * mean2);
    }
  }
}

// y[t] = W x[t] + b with W row-major (out x in). Accumulates dW, db, dx.
void linear_backward(std::span<const float> dy, std::span<const float> x,
                     std::span<const float> w, std::size_t rows, std::size_t out,
                     std::size_t in, std::span<float> dw, std::span<float> db,
                     std::span<float> dx) {
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t o = 0; o < out; ++o) db[o] += dy[t * out + o];
  }
  for (std::size_t o = 0; o < out; ++o) {
    std::span<float> dw_row = dw.subspan(o * in, in);
    for (std::size_t t = 0; t < rows; ++t) {
      const float g = dy[t * out + o];
      if (g != 0.0f) kernels::axpy(g, x.subspan(t * in, in), dw_row);
    }
  }
  for (std::size_t t = 0; t < rows; ++t) {
    kernels::matvec_t_acc(w, out, in, dy.subspan(t * out, out), dx.subspan(t * in, in));
  }
}

}  // namespace

double loss_and_gradient(const Model& model, std::span<const Token> window, Weights& g,
                         float grad_scale) {
  const ModelConfig& cfg = model.config();
  const Weights& w = model.weights();
  if (window.size() < 2) throw InputError("training window needs at least 2 tokens");
  const std::size_t T = window.size() - 1;
  if (T > static_cast<std::size_t>(cfg.max_seq_len)) throw InputError("window exceeds max_seq_len");
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto ff = static_cast<std::size_t>(cfg.d_ff());
  const auto V = static_cast<std::size_t>(cfg.vocab_size);
  const auto H = static_cast<std::size_t>(cfg.n_heads);
  const auto dh = static_cast<std::size_t>(cfg.d_head);
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

  const auto inputs = window.first(T);
  ForwardPass pass;
  detail::run_forward(cfg, w, inputs, pass);

  NormCache lnf;
  detail::layer_norm(pass.layers.back().x_out, w.lnf_gain, w.lnf_bias, T, d, lnf);

  double loss = 0.0;
  const float inv = grad_scale / static_cast<float>(T);
  std::vector<float> d_norm(T * d, 0.0f);
  std::vector<float> logits(V);
  for (std::size_t t = 0; t < T; ++t) {
    const auto normed = std::span<const float>(lnf.out).subspan(t * d, d);
    kernels::matvec(w.unembed, V, d, normed, logits);
    softmax_inplace(logits);
    const auto target = static_cast<std::size_t>(window[t + 1]);
    if (target >= V) throw InputError("target token outside vocabulary");
    loss -= std::log(std::max(static_cast<double>(logits[target]), 1e-30));
    for (std::size_t v = 0; v < V; ++v) {
      logits[v] = (logits[v] - (v == target ? 1.0f : 0.0f)) * inv;
      kernels::axpy(logits[v], normed, std::span(g.unembed).subspan(v * d, d));
    }
    kernels::matvec_t_acc(w.unembed, V, d, logits, std::span(d_norm).subspan(t * d, d));
  }

  std::vector<float> dx(T * d, 0.0f);
  layer_norm_backward(d_norm, lnf, w.lnf_gain, g.lnf_gain, g.lnf_bias, dx, T, d);

  std::vector<float> d_mid, d_act, d_up, d_ln(T * d), d_heads, d_qkv, d_in, dp(T);
  for (std::size_t li = pass.layers.size(); li-- > 0;) {
    const LayerCache& c = pass.layers[li];
    const LayerWeights& lw = w.layers[li];
    LayerWeights& lg = g.layers[li];

    // x_out = x_mid + W_down act + b_down
    d_mid = dx;
    d_act.assign(T * ff, 0.0f);
    linear_backward(dx, c.act, lw.w_down, T, d, ff, lg.w_down, lg.b_down, d_act);
    d_up.resize(T * ff);
    for (std::size_t i = 0; i < T * ff; ++i) d_up[i] = d_act[i] * detail::gelu_grad(c.up[i]);
    std::fill(d_ln.begin(), d_ln.end(), 0.0f);
    linear_backward(d_up, c.ln2.out, lw.w_up, T, ff, d, lg.w_up, lg.b_up, d_ln);
    layer_norm_backward(d_ln, c.ln2, lw.ln2_gain, lg.ln2_gain, lg.ln2_bias, d_mid, T, d);

    // x_mid = x_in + W_out heads + b_out
    d_in = d_mid;
    d_heads.assign(T * d, 0.0f);
    linear_backward(d_mid, c.heads, lw.w_out, T, d, d, lg.w_out, lg.b_out, d_heads);

    d_qkv.assign(T * 3 * d, 0.0f);
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t t = 0; t < T; ++t) {
        const std::span<const float> dout(d_heads.data() + t * d + h * dh, dh);
        const float* prow = c.probs.data() + (h * T + t) * T;
        double weighted = 0.0;
        for (std::size_t s = 0; s <= t; ++s) {
          const float* v = c.qkv.data() + s * 3 * d + 2 * d + h * dh;
          dp[s] = kernels::dot(dout, {v, dh});
          weighted += static_cast<double>(prow[s]) * dp[s];
          kernels::axpy(prow[s], dout, {d_qkv.data() + s * 3 * d + 2 * d + h * dh, dh});
        }
        const float* q = c.qkv.data() + t * 3 * d + h * dh;
        std::span<float> dq(d_qkv.data() + t * 3 * d + h * dh, dh);
        for (std::size_t s = 0; s <= t; ++s) {
          const float ds = prow[s] * (dp[s] - static_cast<float>(weighted)) * scale;
          if (ds == 0.0f) continue;
          const float* k = c.qkv.data() + s * 3 * d + d + h * dh;
          kernels::axpy(ds, {k, dh}, dq);
          kernels::axpy(ds, {q, dh}, {d_qkv.data() + s * 3 * d + d + h * dh, dh});
        }
      }
    }

    std::fill(d_ln.begin(), d_ln.end(), 0.0f);
    linear_backward(d_qkv, c.ln1.out, lw.w_qkv, T, 3 * d, d, lg.w_qkv, lg.b_qkv, d_ln);
    layer_norm_backward(d_ln, c.ln1, lw.ln1_gain, lg.ln1_gain, lg.ln1_bias, d_in, T, d);
    dx = d_in;
  }

  for (std::size_t t = 0; t < T; ++t) {
    const auto tok = static_cast<std::size_t>(inputs[t]);
    const auto row = std::span<const float>(dx).subspan(t * d, d);
    kernels::axpy(1.0f, row, std::span(g.tok_emb).subspan(tok * d, d));
    kernels::axpy(1.0f, row, std::span(g.pos_emb).subspan(t * d, d));
  }
  return loss / static_cast<double>(T);
}

std::vector<Token> join_corpus(const Corpus& corpus) {
  std::vector<Token> stream;
  for (const auto& seq : corpus) {
    stream.push_back(Tokenizer::kBos);
    stream.insert(stream.end(), seq.begin(), seq.end());
    stream.push_back(Tokenizer::kEos);
  }
  return stream;
}

Model train_toy(const Model& model, const Corpus& corpus, const TrainOptions& options,
                TrainLog* log) {
  if (corpus.empty()) throw InputError("train_toy: empty corpus");
  Model trained = model;
  if (options.steps == 0) return trained;

  const std::vector<Token> stream = join_corpus(corpus);
  for (Token t : stream) {
    if (t < 0 || t >= model.config().vocab_size) {
      throw InputError("train_toy: corpus token " + std::to_string(t) + " outside vocabulary");
    }
  }
  const std::size_t seq_len =
      std::max<std::size_t>(1, std::min(options.seq_len,
                                        static_cast<std::size_t>(model.config().max_seq_len)));
  const std::size_t window = std::min(seq_len + 1, stream.size());
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);

  Weights grad = Weights::zeros(model.config());
  Weights m1 = Weights::zeros(model.config());
  Weights m2 = Weights::zeros(model.config());
  constexpr float kBeta1 = 0.9f;
  constexpr float kBeta2 = 0.999f;
  constexpr float kEps = 1e-8f;

  Rng rng(options.seed);
  for (std::size_t step = 1; step <= options.steps; ++step) {
    for (auto t : grad.tensors()) std::fill(t.begin(), t.end(), 0.0f);
    double loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t start = uniform_index(rng, stream.size() - window + 1);
      loss += loss_and_gradient(trained, std::span(stream).subspan(start, window), grad,
                                1.0f / static_cast<float>(batch));
    }
    if (log) log->step_losses.push_back(static_cast<float>(loss / static_cast<double>(batch)));

    double norm_sq = 0.0;
    for (auto t : grad.tensors()) {
      for (float v : t) norm_sq += static_cast<double>(v) * v;
    }
    const double norm = std::sqrt(norm_sq);
    const float clip = (options.grad_clip > 0.0f && norm > options.grad_clip)
                           ? static_cast<float>(options.grad_clip / norm)
                           : 1.0f;

    const float bc1 = 1.0f - std::pow(kBeta1, static_cast<float>(step));
    const float bc2 = 1.0f - std::pow(kBeta2, static_cast<float>(step));
    auto params = trained.mutable_weights().tensors();
    auto grads = grad.tensors();
    auto first = m1.tensors();
    auto second = m2.tensors();
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (std::size_t j = 0; j < params[i].size(); ++j) {
        const float gj = grads[i][j] * clip;
        first[i][j] = kBeta1 * first[i][j] + (1.0f - kBeta1) * gj;
        second[i][j] = kBeta2 * second[i][j] + (1.0f - kBeta2) * gj * gj;
        const float mhat = first[i][j] / bc1;
        const float vhat = second[i][j] / bc2;
        params[i][j] -= options.learning_rate * mhat / (std::sqrt(vhat) + kEps);
      }
    }
  }
  return trained;
}

double mean_cross_entropy(const Model& model, const Corpus& corpus, std::size_t seq_len) {
  if (corpus.empty()) throw InputError("mean_cross_entropy: empty corpus");
  const std::vector<Token> stream = join_corpus(corpus);
  const std::size_t span_len =
      std::max<std::size_t>(1, std::min(seq_len, static_cast<std::size_t>(model.config().max_seq_len)));
  Weights scratch = Weights::zeros(model.config());
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start + 1 < stream.size(); start += span_len) {
    const std::size_t len = std::min(span_len + 1, stream.size() - start);
    if (len < 2) break;
    const double l = loss_and_gradient(model, std::span(stream).subspan(start, len), scratch, 0.0f);
    total += l * static_cast<double>(len - 1);
    count += len - 1;
  }
  return total / static_cast<double>(count);
}

Corpus synthetic_corpus(std::uint64_t seed, std::size_t lines) {
  static constexpr std::array<const char*, 16> kTechniques = {
      "for loop",    "while loop",     "recursion",        "binary search",
      "hash map",    "sorting",        "dynamic programming", "greedy",
      "two pointers", "prefix sum",    "stack",            "queue",
      "bfs",         "dfs",            "bit manipulation", "math"};
  static constexpr std::array<const char*, 6> kTemplates = {
      "use a {a} with {b}.",        "solve it by {a} and then {b}.",
      "we apply {a} over the array.", "try {a}, not {b}.",
      "{a} plus {b} gives the answer.", "first {a}, then {b} on each query."};
  Rng rng(seed);
  Corpus corpus;
  corpus.reserve(lines);
  for (std::size_t i = 0; i < lines; ++i) {
    std::string line = kTemplates[uniform_index(rng, kTemplates.size())];
    const std::string a = kTechniques[uniform_index(rng, kTechniques.size())];
    const std::string b = kTechniques[uniform_index(rng, kTechniques.size())];
    if (auto p = line.find("{a}"); p != std::string::npos) line.replace(p, 3, a);
    if (auto p = line.find("{b}"); p != std::string::npos) line.replace(p, 3, b);
    corpus.push_back(Tokenizer::encode(line));
  }
  return corpus;
}

}  // namespace crelab::tinylm
