#include "crelab/probes/report.hpp"

#include "crelab/common/error.hpp"
#include "crelab/common/keyvalue.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace crelab::probes {

namespace {
constexpr std::string_view kHeader = "crelab-probe-report 1";
}

std::vector<double> aggregate_to_layers(const HeadScores& head_scores) {
  if (head_scores.empty()) throw InputError("aggregate_to_layers: empty score matrix");
  std::vector<double> out;
  out.reserve(head_scores.size());
  for (const auto& row : head_scores) {
    if (row.empty()) throw InputError("aggregate_to_layers: layer with no heads");
    double sum = 0.0;
    for (double v : row) sum += v;
    out.push_back(sum / static_cast<double>(row.size()));
  }
  return out;
}

std::pair<std::vector<int>, std::vector<int>> select_layer_sets(std::span<const double> scores) {
  const int n = static_cast<int>(scores.size());
  const int k = std::min(kMaxLayerSetSize, n / 2);
  if (k < 1) {
    throw ConfigError("select_layer_sets needs at least 2 layers, got " + std::to_string(n));
  }
  std::vector<int> rank(static_cast<std::size_t>(n));
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&scores](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  std::vector<int> a;
  std::vector<int> b;
  for (int i = 0; i < k; ++i) a.push_back(rank[static_cast<std::size_t>(i)] + 1);
  for (int i = n - k; i < n; ++i) b.push_back(rank[static_cast<std::size_t>(i)] + 1);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {a, b};
}

ProbeReport make_report(const HeadScores& head_scores, const ProbeGeometry& geometry,
                        std::string source_model_id) {
  if (head_scores.size() != static_cast<std::size_t>(geometry.n_layers)) {
    throw InputError("head score rows do not match geometry");
  }
  ProbeReport r;
  r.geometry = geometry;
  r.source_model_id = std::move(source_model_id);
  r.head_scores = head_scores;
  r.layer_scores = aggregate_to_layers(head_scores);
  std::tie(r.set_A, r.set_B) = select_layer_sets(r.layer_scores);
  return r;
}

bool check_model_specificity(const ProbeReport& report, std::string_view model_id) {
  return report.source_model_id == model_id;
}

void apply_probe_report(const ProbeReport& report, std::string_view model_id,
                        decode::DecodeConfig& config) {
  if (!check_model_specificity(report, model_id)) {
    throw ConfigError("probe report was trained on " + report.source_model_id +
                      ", not on " + std::string(model_id));
  }
  config.set_A = report.set_A;
  config.set_B = report.set_B;
  config.probe_model_id = report.source_model_id;
}

std::string to_text(const ProbeReport& r) {
  std::ostringstream out;
  out << kHeader << '\n';
  out << "model_id " << r.source_model_id << '\n';
  out << "geometry " << r.geometry.n_layers << ' ' << r.geometry.n_heads << ' '
      << r.geometry.d_head << '\n';
  for (std::size_t l = 0; l < r.head_scores.size(); ++l) {
    for (std::size_t h = 0; h < r.head_scores[l].size(); ++h) {
      out << "head " << l + 1 << ' ' << h + 1 << ' ' << format_double(r.head_scores[l][h]) << '\n';
    }
  }
  out << "set_A " << format_int_list(r.set_A) << '\n';
  out << "set_B " << format_int_list(r.set_B) << '\n';
  return out.str();
}

ProbeReport parse_probe_report(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!trim(line).empty()) return true;
    }
    return false;
  };
  if (!next() || trim(line) != kHeader) {
    throw LoadError(line_no, "not a probe report (expected '" + std::string(kHeader) + "')");
  }
  ProbeReport r;
  bool have_geometry = false;
  std::size_t heads_seen = 0;
  while (next()) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "model_id") {
      ls >> r.source_model_id;
    } else if (tag == "geometry") {
      ls >> r.geometry.n_layers >> r.geometry.n_heads >> r.geometry.d_head;
      if (!ls || r.geometry.n_layers < 1 || r.geometry.n_heads < 1 || r.geometry.d_head < 1) {
        throw LoadError(line_no, "bad geometry line");
      }
      r.head_scores.assign(static_cast<std::size_t>(r.geometry.n_layers),
                           std::vector<double>(static_cast<std::size_t>(r.geometry.n_heads), -1.0));
      have_geometry = true;
    } else if (tag == "head") {
      if (!have_geometry) throw LoadError(line_no, "head line before geometry");
      int l = 0;
      int h = 0;
      std::string acc;
      ls >> l >> h >> acc;
      if (!ls || l < 1 || l > r.geometry.n_layers || h < 1 || h > r.geometry.n_heads) {
        throw LoadError(line_no, "bad head line");
      }
      double v = 0;
      try {
        v = parse_double(acc, "accuracy");
      } catch (const ConfigError&) {
        throw LoadError(line_no, "bad accuracy value '" + acc + "'");
      }
      if (v < 0.0 || v > 1.0) throw LoadError(line_no, "accuracy outside [0, 1]");
      double& slot = r.head_scores[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(h - 1)];
      if (slot >= 0.0) throw LoadError(line_no, "duplicate head entry");
      slot = v;
      ++heads_seen;
    } else if (tag == "set_A" || tag == "set_B") {
      std::string rest;
      std::getline(ls, rest);
      try {
        (tag == "set_A" ? r.set_A : r.set_B) = parse_int_list(rest, tag);
      } catch (const ConfigError& e) {
        throw LoadError(line_no, e.what());
      }
    } else {
      throw LoadError(line_no, "unknown entry '" + tag + "'");
    }
  }
  if (!have_geometry) throw LoadError(0, "probe report has no geometry");
  if (r.source_model_id.empty()) throw LoadError(0, "probe report has no model_id");
  if (heads_seen != static_cast<std::size_t>(r.geometry.n_layers * r.geometry.n_heads)) {
    throw LoadError(0, "probe report is missing head entries");
  }
  for (int a : r.set_A) {
    if (a < 1 || a > r.geometry.n_layers) throw LoadError(0, "set_A layer out of range");
    if (std::find(r.set_B.begin(), r.set_B.end(), a) != r.set_B.end()) {
      throw LoadError(0, "set_A and set_B overlap");
    }
  }
  for (int b : r.set_B) {
    if (b < 1 || b > r.geometry.n_layers) throw LoadError(0, "set_B layer out of range");
  }
  r.layer_scores = aggregate_to_layers(r.head_scores);
  return r;
}

void save_probe_report(const ProbeReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write probe report '" + path + "'");
  out << to_text(report);
  if (!out) throw IoError("failed writing probe report '" + path + "'");
}

ProbeReport load_probe_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open probe report '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_probe_report(ss.str());
}

}  // namespace crelab::probes
