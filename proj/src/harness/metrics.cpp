#include "harness/metrics.hpp"

#include <fstream>
#include <stdexcept>

namespace m2i2::harness {

namespace {
const char* const kFields[] = {"env_steps", "episodes",  "updates",  "test_win_rate", "test_mean_return",
                               "test_return_stderr", "loss_total", "loss_rl", "loss_rc", "loss_inv",
                               "epsilon",   "comm_frequency", "wall_clock"};
}

nlohmann::json to_json(const MetricsRecord& r) {
  nlohmann::json j;
  j["env_steps"] = r.env_steps;
  j["episodes"] = r.episodes;
  j["updates"] = r.updates;
  j["test_win_rate"] = r.test_win_rate ? nlohmann::json(*r.test_win_rate) : nlohmann::json(nullptr);
  j["test_mean_return"] = r.test_mean_return;
  j["test_return_stderr"] = r.test_return_stderr;
  j["loss_total"] = r.loss_total;
  j["loss_rl"] = r.loss_rl;
  j["loss_rc"] = r.loss_rc;
  j["loss_inv"] = r.loss_inv;
  j["epsilon"] = r.epsilon;
  j["comm_frequency"] = r.comm_frequency;
  j["wall_clock"] = r.wall_clock;
  return j;
}

MetricsRecord record_from_json(const nlohmann::json& j) {
  for (const char* f : kFields)
    if (!j.contains(f)) throw std::runtime_error(std::string("metrics record lacks field ") + f);
  MetricsRecord r;
  r.env_steps = j.at("env_steps").get<long>();
  r.episodes = j.at("episodes").get<long>();
  r.updates = j.at("updates").get<long>();
  if (!j.at("test_win_rate").is_null()) r.test_win_rate = j.at("test_win_rate").get<double>();
  r.test_mean_return = j.at("test_mean_return").get<double>();
  r.test_return_stderr = j.at("test_return_stderr").get<double>();
  r.loss_total = j.at("loss_total").get<double>();
  r.loss_rl = j.at("loss_rl").get<double>();
  r.loss_rc = j.at("loss_rc").get<double>();
  r.loss_inv = j.at("loss_inv").get<double>();
  r.epsilon = j.at("epsilon").get<double>();
  r.comm_frequency = j.at("comm_frequency").get<double>();
  r.wall_clock = j.at("wall_clock").get<double>();
  return r;
}

void append_record(const std::string& path, const MetricsRecord& r) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path);
  out << to_json(r).dump() << "\n";
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path);
}

std::vector<MetricsRecord> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read metrics " + path);
  std::vector<MetricsRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(record_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

bool same_metrics(const MetricsRecord& a, const MetricsRecord& b) {
  nlohmann::json ja = to_json(a), jb = to_json(b);
  ja.erase("wall_clock");
  jb.erase("wall_clock");
  return ja == jb;
}

}  // namespace m2i2::harness
