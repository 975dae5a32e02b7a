#include "crelab/probes/dataset.hpp"

#include "crelab/common/error.hpp"

#include <algorithm>
#include <cmath>

namespace crelab::probes {

ProbeGeometry geometry_of(const tinylm::ModelConfig& config) {
  return ProbeGeometry{config.n_layers, config.n_heads, config.d_head};
}

std::span<const float> ProbeDataset::head(std::size_t i, int layer, int h) const {
  const auto dh = static_cast<std::size_t>(geometry.d_head);
  const std::size_t offset =
      (static_cast<std::size_t>(layer) * static_cast<std::size_t>(geometry.n_heads) +
       static_cast<std::size_t>(h)) * dh;
  return std::span(examples[i].features).subspan(offset, dh);
}

void ProbeDataset::validate() const {
  if (examples.empty()) throw DatasetError("probe dataset is empty");
  if (geometry.n_layers < 1 || geometry.n_heads < 1 || geometry.d_head < 1) {
    throw DatasetError("probe dataset has no geometry");
  }
  bool has_pos = false;
  bool has_neg = false;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].features.size() != geometry.feature_size()) {
      throw DatasetError("example " + std::to_string(i) + " does not match the " +
                         std::to_string(geometry.n_layers) + "x" +
                         std::to_string(geometry.n_heads) + "x" +
                         std::to_string(geometry.d_head) + " activation geometry");
    }
    has_pos |= examples[i].label == 1;
    has_neg |= examples[i].label == 0;
  }
  if (!has_pos || !has_neg) throw DatasetError("probe dataset has a single label class");
}

std::size_t conditioning_length(std::size_t output_length, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw InputError("conditioning fraction must lie in [0, 1]");
  }
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(output_length)));
}

std::vector<int> median_split_labels(std::span<const double> scores) {
  if (scores.empty()) return {};
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  std::vector<int> labels;
  labels.reserve(n);
  for (double s : scores) labels.push_back(s > median ? 1 : 0);
  return labels;
}

std::vector<tinylm::Token> conditioning_context(const ProbeSource& source,
                                                const tinylm::ModelConfig& config,
                                                double fraction) {
  const std::size_t keep = conditioning_length(source.output.size(), fraction);
  std::vector<tinylm::Token> ctx;
  if (tinylm::Tokenizer::kBos < config.vocab_size) ctx.push_back(tinylm::Tokenizer::kBos);
  const auto prompt = tinylm::Tokenizer::encode(source.prompt);
  const auto output = tinylm::Tokenizer::encode(std::string_view(source.output).substr(0, keep));
  ctx.insert(ctx.end(), prompt.begin(), prompt.end());
  ctx.insert(ctx.end(), output.begin(), output.end());
  const auto limit = static_cast<std::size_t>(config.max_seq_len);
  if (ctx.size() > limit) ctx.erase(ctx.begin(), ctx.end() - static_cast<std::ptrdiff_t>(limit));
  return ctx;
}

ProbeDataset build_probe_dataset(std::span<const ProbeSource> sources, const tinylm::Model& model,
                                 double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw InputError("conditioning fraction must lie in [0, 1]");
  }
  std::vector<double> scores;
  scores.reserve(sources.size());
  for (const ProbeSource& s : sources) scores.push_back(s.divergent_score);
  const std::vector<int> labels = median_split_labels(scores);

  ProbeDataset ds;
  ds.geometry = geometry_of(model.config());
  ds.conditioning_fraction = fraction;
  ds.source_model_id = model.id();
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto ctx = conditioning_context(sources[i], model.config(), fraction);
    const tinylm::LayerTrace trace = model.forward(ctx);
    ProbeExample ex;
    ex.label = labels[i];
    ex.features.reserve(ds.geometry.feature_size());
    for (const auto& layer : trace.head_activations) {
      for (const auto& head : layer) ex.features.insert(ex.features.end(), head.begin(), head.end());
    }
    ds.examples.push_back(std::move(ex));
  }
  ds.validate();
  return ds;
}

}  // namespace crelab::probes
