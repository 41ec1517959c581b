#pragma once

#include "harness/config.hpp"
#include "harness/metrics.hpp"
#include "harness/train.hpp"

#include <string>
#include <vector>

namespace m2i2::harness {

// (perf - baseline) / frequency; frequency must lie in (0, 1].
double comm_efficiency(double perf, double baseline_perf, double frequency);

// Mean test performance over the last `window` records.
double final_performance(const std::vector<MetricsRecord>& records, std::size_t window = 3);

struct SeedStats {
  std::vector<double> values;
  double median = 0.0;
  double mean = 0.0;
  double stderr_ = 0.0;
  double min = 0.0;
  double max = 0.0;
};
SeedStats seed_stats(std::vector<double> values);

// Final performance of every run directory (metrics.jsonl inside each).
std::vector<double> final_performances(const std::vector<std::string>& run_dirs, std::size_t window = 3);

struct EfficiencyRow {
  std::string label;
  double performance = 0.0;
  double baseline = 0.0;
  double frequency = 0.0;
  double efficiency = 0.0;
};

// Median final performance of the method runs against the median of the
// baseline runs, at the method's logged communication frequency.
EfficiencyRow efficiency_from_runs(const std::string& label, const std::vector<std::string>& method_dirs,
                                   const std::vector<std::string>& baseline_dirs);
std::string format_efficiency_table(const std::vector<EfficiencyRow>& rows);

struct AblateOptions {
  std::vector<Variant> variants{Variant::m2i2, Variant::m2i2_no_drn, Variant::m2i2_no_drn_no_inv, Variant::qmix};
  // Communication rates 1 - mask_ratio swept for the m2i2 variant; empty
  // keeps the base mask ratio.
  std::vector<double> comm_rates;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  // Reuse runs whose summary.json exists and whose stored config matches.
  bool reuse_existing = true;
  std::function<void(const std::string& run_dir)> on_run_start;
};

struct AblationCell {
  std::string label;  // variant, or variant@rate
  Variant variant = Variant::m2i2;
  double comm_rate = 0.0;
  std::vector<std::string> run_dirs;
  SeedStats stats;
};

struct AblationReport {
  std::string root;
  std::vector<AblationCell> cells;
  const AblationCell& cell(const std::string& label) const;
};

struct PlannedCell {
  std::string label;
  Variant variant = Variant::m2i2;
  double comm_rate = 0.0;
  std::vector<RunConfig> runs;  // one per seed
};

// The cells and run configurations ablate would train, without training.
std::vector<PlannedCell> plan_ablation(const RunConfig& base, const AblateOptions& options);

// Runs every (variant[, rate]) x seed combination under <base run dir>/<label>/seed<k>
// and writes ablation.json into the base run directory.
AblationReport ablate(const RunConfig& base, const AblateOptions& options);

// Run directory used by ablate for one cell and seed.
std::string ablation_run_dir(const RunConfig& base, const std::string& label, std::uint64_t seed);
std::string ablation_label(Variant v, double comm_rate, bool with_rate);

// A finished run with exactly this configuration exists in its run directory.
bool finished_run(const RunConfig& config);

// Trains unless a finished run with the same configuration already exists.
TrainResult train_or_reuse(const RunConfig& config, bool reuse, const TrainOptions& options = {});

}  // namespace m2i2::harness
