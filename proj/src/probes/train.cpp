#include "crelab/probes/train.hpp"

#include "crelab/common/error.hpp"
#include "crelab/common/rng.hpp"
#include "crelab/kernels/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace crelab::probes {

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

HeadProbe fit_head(const ProbeDataset& ds, std::span<const std::size_t> train, int layer, int head,
                   const ProbeTrainOptions& opt) {
  const auto dh = static_cast<std::size_t>(ds.geometry.d_head);
  const std::size_t n = train.size();
  HeadProbe p;
  p.mean.assign(dh, 0.0f);
  p.inv_std.assign(dh, 1.0f);
  p.weights.assign(dh, 0.0f);

  std::vector<double> mean(dh, 0.0);
  std::vector<double> var(dh, 0.0);
  for (std::size_t i : train) {
    const auto a = ds.head(i, layer, head);
    for (std::size_t k = 0; k < dh; ++k) mean[k] += a[k];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t i : train) {
    const auto a = ds.head(i, layer, head);
    for (std::size_t k = 0; k < dh; ++k) var[k] += (a[k] - mean[k]) * (a[k] - mean[k]);
  }
  for (std::size_t k = 0; k < dh; ++k) {
    const double sd = std::sqrt(var[k] / static_cast<double>(n));
    p.mean[k] = static_cast<float>(mean[k]);
    p.inv_std[k] = sd > 1e-6 ? static_cast<float>(1.0 / sd) : 1.0f;
  }

  std::vector<float> x(n * dh);
  std::vector<float> y(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto a = ds.head(train[r], layer, head);
    for (std::size_t k = 0; k < dh; ++k) x[r * dh + k] = (a[k] - p.mean[k]) * p.inv_std[k];
    y[r] = static_cast<float>(ds.examples[train[r]].label);
  }

  std::vector<float> grad(dh);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t it = 0; it < opt.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0f);
    double grad_b = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const std::span<const float> row(x.data() + r * dh, dh);
      const double z = kernels::dot(p.weights, row) + p.bias;
      const double resid = sigmoid(z) - y[r];
      grad_b += resid;
      kernels::axpy(static_cast<float>(resid * inv_n), row, grad);
    }
    for (std::size_t k = 0; k < dh; ++k) {
      const double g = grad[k] + opt.l2 * p.weights[k];
      p.weights[k] -= static_cast<float>(opt.learning_rate * g);
    }
    p.bias -= static_cast<float>(opt.learning_rate * grad_b * inv_n);
  }
  return p;
}

double accuracy(const HeadProbe& p, const ProbeDataset& ds, std::span<const std::size_t> idx,
                int layer, int head) {
  if (idx.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i : idx) hits += p.predict(ds.head(i, layer, head)) == ds.examples[i].label;
  return static_cast<double>(hits) / static_cast<double>(idx.size());
}

}  // namespace

int HeadProbe::predict(std::span<const float> a) const {
  double z = bias;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    z += static_cast<double>(weights[k]) * ((a[k] - mean[k]) * inv_std[k]);
  }
  return z >= 0.0 ? 1 : 0;
}

const HeadProbe& HeadProbeSet::at(int layer, int head) const {
  return probes.at(static_cast<std::size_t>(layer) * static_cast<std::size_t>(geometry.n_heads) +
                   static_cast<std::size_t>(head));
}

ProbeSplit split_indices(std::size_t n, double train_fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  shuffle(std::span(order), rng);
  const auto n_train = std::min(
      n, static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(n))));
  ProbeSplit split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return split;
}

ProbeTraining train_head_probes(const ProbeDataset& dataset, std::uint64_t split_seed,
                                const ProbeTrainOptions& options, unsigned threads) {
  dataset.validate();
  if (dataset.examples.size() < 8) {
    throw DatasetError("probe training needs at least 8 examples, got " +
                       std::to_string(dataset.examples.size()));
  }
  ProbeTraining out;
  out.split = split_indices(dataset.examples.size(), options.train_fraction, split_seed);
  if (out.split.validation.empty()) throw DatasetError("validation split is empty");

  const int L = dataset.geometry.n_layers;
  const int H = dataset.geometry.n_heads;
  const auto total = static_cast<std::size_t>(L * H);
  out.probes.geometry = dataset.geometry;
  out.probes.source_model_id = dataset.source_model_id;
  out.probes.probes.resize(total);
  std::vector<double> flat(total);

  auto work = [&](std::size_t job) {
    const int layer = static_cast<int>(job) / H;
    const int head = static_cast<int>(job) % H;
    out.probes.probes[job] = fit_head(dataset, out.split.train, layer, head, options);
    flat[job] = accuracy(out.probes.probes[job], dataset, out.split.validation, layer, head);
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(total)));
  if (threads == 1) {
    for (std::size_t j = 0; j < total; ++j) work(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t j = next++; j < total; j = next++) work(j);
      });
    }
    for (auto& th : pool) th.join();
  }

  out.head_scores.assign(static_cast<std::size_t>(L), std::vector<double>(static_cast<std::size_t>(H)));
  for (std::size_t j = 0; j < total; ++j) {
    out.head_scores[j / static_cast<std::size_t>(H)][j % static_cast<std::size_t>(H)] = flat[j];
  }
  return out;
}

HeadScores score_probes(const HeadProbeSet& probes, const ProbeDataset& dataset,
                        std::span<const std::size_t> indices) {
  if (!(probes.geometry == dataset.geometry)) {
    throw DatasetError("probe geometry does not match dataset geometry");
  }
  std::vector<std::size_t> all;
  if (indices.empty()) {
    all.resize(dataset.examples.size());
    std::iota(all.begin(), all.end(), 0);
    indices = all;
  }
  const int L = dataset.geometry.n_layers;
  const int H = dataset.geometry.n_heads;
  HeadScores scores(static_cast<std::size_t>(L), std::vector<double>(static_cast<std::size_t>(H)));
  for (int l = 0; l < L; ++l) {
    for (int h = 0; h < H; ++h) {
      scores[static_cast<std::size_t>(l)][static_cast<std::size_t>(h)] =
          accuracy(probes.at(l, h), dataset, indices, l, h);
    }
  }
  return scores;
}

}  // namespace crelab::probes
