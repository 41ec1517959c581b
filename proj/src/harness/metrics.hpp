#pragma once

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace m2i2::harness {

struct MetricsRecord {
  long env_steps = 0;
  long episodes = 0;
  long updates = 0;
  std::optional<double> test_win_rate;  // Hallway family only
  double test_mean_return = 0.0;
  double test_return_stderr = 0.0;
  double loss_total = 0.0;
  double loss_rl = 0.0;
  double loss_rc = 0.0;
  double loss_inv = 0.0;
  double epsilon = 0.0;
  double comm_frequency = 0.0;
  double wall_clock = 0.0;  // seconds since the run started

  // Win rate where available, mean return otherwise.
  double performance() const { return test_win_rate ? *test_win_rate : test_mean_return; }
};

nlohmann::json to_json(const MetricsRecord& r);
MetricsRecord record_from_json(const nlohmann::json& j);

void append_record(const std::string& path, const MetricsRecord& r);
std::vector<MetricsRecord> read_metrics(const std::string& path);

// Field-by-field equality excluding wall_clock.
bool same_metrics(const MetricsRecord& a, const MetricsRecord& b);

}  // namespace m2i2::harness
