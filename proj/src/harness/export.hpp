#pragma once

#include "harness/config.hpp"

#include <string>
#include <vector>

namespace m2i2::harness {

struct ObsSegment {
  std::string name;
  Index start = 0;
  Index length = 0;
};

// Natural blocks of the observation encoding of each environment.
std::vector<ObsSegment> default_segments(const env::EnvConfig& config);
// "name:start:length,name:start:length,..."
std::vector<ObsSegment> parse_segments(const std::string& text);

struct ExportOptions {
  int episodes = 16;
  std::uint64_t seed = 12345;
  std::vector<ObsSegment> segments;  // empty: default_segments
  double early_fraction = 0.8;       // steps before this fraction of an episode are "early"
};

struct RetentionTable {
  Matrix kept;    // dims x 2 (early, late) agent-steps on which a dimension was kept
  std::vector<std::string> dim_segment;
  Matrix counts;  // dims x 2 agent-steps observed

  // kept / counts, 0 where nothing was observed
  Matrix frequencies() const;
};

// masks: per step, n x D 0/1; stage split by step index within one episode.
void accumulate_retention(RetentionTable& table, const std::vector<Matrix>& masks, Index steps, double early_fraction);

struct ExportResult {
  std::vector<std::string> files;
};

// Replays greedy episodes from <run_dir>/checkpoint.bin and writes into
// <run_dir>/export: mask_retention.csv, mask_retention_segments.csv,
// embeddings.csv, omega_agent<i>.csv and omega_agent<i>.svg.
ExportResult export_artifacts(const std::string& run_dir, const ExportOptions& options = {});

}  // namespace m2i2::harness
