#include "crelab/harness/emit.hpp"

#include "crelab/common/error.hpp"
#include "crelab/common/hash.hpp"
#include "crelab/harness/records.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace crelab::harness {

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << content;
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

std::string plot_file_name(metrics::MetricId metric) {
  return std::string("pct_") + metrics::to_string(metric) + ".dat";
}

std::string manifest_json(const EmitContext& ctx, const metrics::MetricReport& report,
                          const std::vector<metrics::GenerationRecord>& records) {
  if (!ctx.plan || !ctx.dataset) throw InternalError("emit context is incomplete");
  const ExperimentPlan& plan = *ctx.plan;
  nlohmann::ordered_json j;
  j["tool"] = "crelab";
  j["version"] = kToolVersion;
  j["config_hash"] = to_hex(config_hash(plan));
  j["dataset_hash"] = to_hex(ctx.dataset->content_hash);
  j["dataset_kind"] = to_string(ctx.dataset->kind);
  j["problems"] = ctx.dataset->problems.size();
  j["global_seed"] = plan.seed;
  j["decode_rng_seed"] = plan.decode.rng_seed;
  j["runs"] = plan.runs;
  j["methods"] = format_methods(plan.methods);
  j["states"] = plan.resolved_states();
  j["generator"] = plan.generator;
  j["judge"] = plan.judge;
  j["checker"] = plan.checker;
  if (!ctx.model_id.empty()) j["model_id"] = ctx.model_id;
  if (!ctx.probe_model_id.empty()) j["probe_model_id"] = ctx.probe_model_id;

  std::uint64_t seeds = kFnvOffset;
  std::size_t failed = 0;
  for (const auto& r : records) {
    seeds = hash_combine(seeds, r.seed);
    failed += !r.ok();
  }
  j["records"] = records.size();
  j["failed_records"] = failed;
  j["cell_seed_digest"] = to_hex(seeds);
  j["records_digest"] = to_hex(fnv1a64(records_to_jsonl(records)));

  nlohmann::ordered_json gaps = nlohmann::ordered_json::array();
  for (auto m : report.methods) {
    for (int s : report.states) {
      const auto it = report.coverage.find({m, s});
      if (it == report.coverage.end() || !it->second.complete()) {
        gaps.push_back(std::string(metrics::to_string(m)) + "@" + std::to_string(s));
      }
    }
  }
  j["coverage_gaps"] = gaps;
  j["diagnostics"] = {{"failed_records", report.diagnostics.failed_records},
                      {"unknown_verdicts", report.diagnostics.unknown_verdicts},
                      {"empty_technique_sets", report.diagnostics.empty_technique_sets},
                      {"too_short_for_dist_n", report.diagnostics.too_short_for_dist_n}};
  j["plan"] = to_text(plan);
  return j.dump(2) + "\n";
}

std::vector<std::string> emit_outputs(const EmitContext& ctx, const metrics::MetricReport& report,
                                      const std::vector<metrics::GenerationRecord>& records,
                                      const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw IoError("cannot create output directory '" + out_dir + "'");
  const fs::path dir(out_dir);
  std::vector<std::string> written;
  auto put = [&](const std::string& name, const std::string& content) {
    write_file(dir / name, content);
    written.push_back(name);
  };
  put("metrics.csv", metrics::to_csv(report));
  for (auto id : report.metrics) put(plot_file_name(id), metrics::plot_data(report, id));
  put("records.jsonl", records_to_jsonl(records));
  put("manifest.json", manifest_json(ctx, report, records));
  return written;
}

}  // namespace crelab::harness
