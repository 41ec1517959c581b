#include "harness/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace m2i2::harness {

namespace fs = std::filesystem;

double comm_efficiency(double perf, double baseline_perf, double frequency) {
  if (!(frequency > 0.0) || frequency > 1.0)
    throw std::invalid_argument("communication frequency must lie in (0, 1]");
  return (perf - baseline_perf) / frequency;
}

double final_performance(const std::vector<MetricsRecord>& records, std::size_t window) {
  if (records.empty()) throw std::invalid_argument("final_performance: no records");
  if (window == 0) throw std::invalid_argument("final_performance: window must be positive");
  const std::size_t k = std::min(window, records.size());
  double s = 0.0;
  for (std::size_t i = records.size() - k; i < records.size(); ++i) s += records[i].performance();
  return s / static_cast<double>(k);
}

SeedStats seed_stats(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("seed_stats: no values");
  SeedStats s;
  s.values = values;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  s.median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  for (double v : values) s.mean += v / static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stderr_ = std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
  }
  s.min = values.front();
  s.max = values.back();
  return s;
}

std::vector<double> final_performances(const std::vector<std::string>& run_dirs, std::size_t window) {
  std::vector<double> out;
  for (const auto& d : run_dirs) out.push_back(final_performance(read_metrics((fs::path(d) / "metrics.jsonl").string()), window));
  return out;
}

EfficiencyRow efficiency_from_runs(const std::string& label, const std::vector<std::string>& method_dirs,
                                   const std::vector<std::string>& baseline_dirs) {
  if (method_dirs.empty() || baseline_dirs.empty()) throw std::invalid_argument("efficiency needs method and baseline runs");
  EfficiencyRow row;
  row.label = label;
  row.performance = seed_stats(final_performances(method_dirs)).median;
  row.baseline = seed_stats(final_performances(baseline_dirs)).median;
  const auto recs = read_metrics((fs::path(method_dirs.front()) / "metrics.jsonl").string());
  row.frequency = recs.back().comm_frequency;
  row.efficiency = comm_efficiency(row.performance, row.baseline, row.frequency);
  return row;
}

std::string format_efficiency_table(const std::vector<EfficiencyRow>& rows) {
  std::ostringstream os;
  os << "method\tperformance\tbaseline\tfrequency\tefficiency\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s\t%.4f\t%.4f\t%.3f\t%.1f%%\n", r.label.c_str(), r.performance, r.baseline,
                  r.frequency, 100.0 * r.efficiency);
    os << buf;
  }
  return os.str();
}

const AblationCell& AblationReport::cell(const std::string& label) const {
  for (const auto& c : cells)
    if (c.label == label) return c;
  throw std::out_of_range("no ablation cell " + label);
}

std::string ablation_label(Variant v, double comm_rate, bool with_rate) {
  if (!with_rate) return to_string(v);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "@%.2f", comm_rate);
  return to_string(v) + buf;
}

std::string ablation_run_dir(const RunConfig& base, const std::string& label, std::uint64_t seed) {
  return (fs::path(resolve_run_dir(base)) / label / ("seed" + std::to_string(seed))).string();
}

bool finished_run(const RunConfig& config) {
  const fs::path dir = resolve_run_dir(config);
  if (!fs::exists(dir / "summary.json") || !fs::exists(dir / "config.txt") || !fs::exists(dir / "metrics.jsonl"))
    return false;
  return read_key_values_file((dir / "config.txt").string()) == to_key_values(config);
}

TrainResult train_or_reuse(const RunConfig& config, bool reuse, const TrainOptions& options) {
  if (!reuse || !finished_run(config)) return train(config, options);
  const fs::path dir = resolve_run_dir(config);
  TrainResult r;
  r.run_dir = dir.string();
  r.final_record = read_metrics((dir / "metrics.jsonl").string()).back();
  std::ifstream in(dir / "summary.json");
  nlohmann::json j;
  in >> j;
  r.parameter_count = j.value("parameter_count", std::size_t{0});
  r.wall_seconds = j.value("wall_seconds", 0.0);
  return r;
}

std::vector<PlannedCell> plan_ablation(const RunConfig& base, const AblateOptions& options) {
  if (options.variants.empty() || options.seeds.empty()) throw std::invalid_argument("ablate: nothing to run");
  std::vector<PlannedCell> plan;
  for (Variant v : options.variants) {
    std::vector<double> rates;
    const bool sweep = v == Variant::m2i2 && !options.comm_rates.empty();
    if (sweep) rates = options.comm_rates;
    else rates = {1.0 - base.learner.mask_ratio};
    for (double rate : rates) {
      if (rate <= 0.0 || rate > 1.0) throw std::invalid_argument("ablate: communication rate must lie in (0, 1]");
      PlannedCell cell;
      cell.variant = v;
      cell.comm_rate = v == Variant::qmix ? 0.0 : rate;
      cell.label = ablation_label(v, rate, sweep);
      for (std::uint64_t seed : options.seeds) {
        RunConfig c = base;
        c.variant = v;
        c.learner.mask_ratio = 1.0 - rate;
        c.seed = seed;
        c.name = base.name + "/" + cell.label + "/seed" + std::to_string(seed);
        c.output_dir = ablation_run_dir(base, cell.label, seed);
        cell.runs.push_back(std::move(c));
      }
      plan.push_back(std::move(cell));
    }
  }
  return plan;
}

AblationReport ablate(const RunConfig& base, const AblateOptions& options) {
  AblationReport report;
  report.root = resolve_run_dir(base);
  for (const PlannedCell& planned : plan_ablation(base, options)) {
    AblationCell cell;
    cell.label = planned.label;
    cell.variant = planned.variant;
    cell.comm_rate = planned.comm_rate;
    for (const RunConfig& c : planned.runs) {
      if (options.on_run_start) options.on_run_start(c.output_dir);
      train_or_reuse(c, options.reuse_existing);
      cell.run_dirs.push_back(c.output_dir);
    }
    cell.stats = seed_stats(final_performances(cell.run_dirs));
    report.cells.push_back(std::move(cell));
  }
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : report.cells)
    j.push_back({{"label", c.label},
                 {"variant", to_string(c.variant)},
                 {"comm_rate", c.comm_rate},
                 {"final_performance", c.stats.values},
                 {"median", c.stats.median},
                 {"mean", c.stats.mean},
                 {"stderr", c.stats.stderr_},
                 {"runs", c.run_dirs}});
  fs::create_directories(report.root);
  std::ofstream out((fs::path(report.root) / "ablation.json").string(), std::ios::trunc);
  out << j.dump(2) << "\n";
  return report;
}

}  // namespace m2i2::harness
