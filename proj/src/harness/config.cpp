#include "harness/config.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace m2i2::harness {

namespace {

using env::InvalidConfig;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

long to_long(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long x = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw InvalidConfig("config key " + key + ": expected an integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw InvalidConfig("config key " + key + ": expected a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidConfig("config key " + key + ": expected true/false, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  if (trim(v).empty()) return out;
  for (const auto& item : split(v, ',')) out.push_back(static_cast<int>(to_long(key, item)));
  return out;
}

std::string join_ints(const std::vector<int>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

// Shortest text that parses back to the same double.
std::string fmt_double(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::m2i2: return "m2i2";
    case Variant::m2i2_no_drn: return "m2i2_no_drn";
    case Variant::m2i2_no_drn_no_inv: return "m2i2_no_drn_no_inv";
    case Variant::qmix: return "qmix";
    case Variant::vdn_m2i2: return "vdn_m2i2";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::m2i2, Variant::m2i2_no_drn, Variant::m2i2_no_drn_no_inv, Variant::qmix, Variant::vdn_m2i2})
    if (to_string(v) == name) return v;
  throw InvalidConfig("unknown variant: " + name);
}

void apply_variant(Variant v, learner::LearnerConfig& c) {
  using learner::CommMode;
  c.mixer = models::MixerKind::qmix;
  c.use_reconstruction = true;
  c.use_inverse = true;
  c.meta_update = true;
  switch (v) {
    case Variant::m2i2: c.comm = CommMode::drn_topk; break;
    case Variant::vdn_m2i2:
      c.comm = CommMode::drn_topk;
      c.mixer = models::MixerKind::vdn;
      break;
    case Variant::m2i2_no_drn:
      c.comm = CommMode::random_mask;
      c.meta_update = false;
      break;
    case Variant::m2i2_no_drn_no_inv:
      c.comm = CommMode::random_mask;
      c.meta_update = false;
      c.use_inverse = false;
      break;
    case Variant::qmix:
      c.comm = CommMode::none;
      c.meta_update = false;
      c.use_reconstruction = false;
      c.use_inverse = false;
      break;
  }
}

learner::LearnerConfig RunConfig::effective_learner() const {
  learner::LearnerConfig c = learner;
  apply_variant(variant, c);
  return c;
}

void RunConfig::validate() const {
  effective_learner().validate();
  if (total_env_steps <= 0) throw InvalidConfig("run.total_env_steps must be positive");
  if (eval_interval <= 0) throw InvalidConfig("run.eval_interval must be positive");
  if (eval_episodes <= 0) throw InvalidConfig("run.eval_episodes must be positive");
  if (episodes_per_update <= 0) throw InvalidConfig("run.episodes_per_update must be positive");
  if (checkpoint_interval < 0) throw InvalidConfig("run.checkpoint_interval must be non-negative");
  if (name.empty()) throw InvalidConfig("run.name must not be empty");
  auto e = env::make_env(env);  // validates the environment config
  if (learner.exclusive_messages && e->spec().n_agents < 2)
    throw InvalidConfig("exclusive messages need at least two agents");
}

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidConfig("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw InvalidConfig("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

std::pair<std::string, std::string> parse_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || trim(text.substr(0, eq)).empty())
    throw InvalidConfig("expected key=value, got '" + text + "'");
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

void apply_key_values(RunConfig& c, const KeyValues& kv) {
  // Presets first so explicit keys override them.
  if (auto it = kv.find("env.preset"); it != kv.end()) {
    if (it->second == "medium") c.env.predator_prey = env::PredatorPreyConfig::medium();
    else if (it->second == "hard") c.env.predator_prey = env::PredatorPreyConfig::hard();
    else if (it->second == "hallwaygroup") c.env.hallway = env::HallwayConfig::group_default();
    else throw InvalidConfig("unknown env.preset: " + it->second);
  }
  auto& l = c.learner;
  auto& pp = c.env.predator_prey;
  for (const auto& [key, v] : kv) {
    if (key == "env.preset") continue;
    else if (key == "env.kind") c.env.kind = env::parse_env_kind(v);
    else if (key == "env.chain_lengths") c.env.hallway.chain_lengths = to_int_list(key, v);
    else if (key == "env.groups") {
      c.env.hallway.groups.clear();
      if (!v.empty())
        for (const auto& grp : split(v, ';')) c.env.hallway.groups.push_back(to_int_list(key, grp));
    }
    else if (key == "env.grid_size") pp.grid_size = static_cast<int>(to_long(key, v));
    else if (key == "env.n_predators") pp.n_predators = static_cast<int>(to_long(key, v));
    else if (key == "env.n_preys") pp.n_preys = static_cast<int>(to_long(key, v));
    else if (key == "env.view_radius") pp.view_radius = static_cast<int>(to_long(key, v));
    else if (key == "env.episode_limit") pp.episode_limit = static_cast<int>(to_long(key, v));
    else if (key == "env.preys_move") pp.preys_move = to_bool(key, v);
    else if (key == "run.variant") c.variant = parse_variant(v);
    else if (key == "run.total_env_steps") c.total_env_steps = to_long(key, v);
    else if (key == "run.eval_interval") c.eval_interval = to_long(key, v);
    else if (key == "run.eval_episodes") c.eval_episodes = static_cast<int>(to_long(key, v));
    else if (key == "run.checkpoint_interval") c.checkpoint_interval = to_long(key, v);
    else if (key == "run.episodes_per_update") c.episodes_per_update = static_cast<int>(to_long(key, v));
    else if (key == "run.seed") c.seed = static_cast<std::uint64_t>(to_long(key, v));
    else if (key == "run.name") c.name = v;
    else if (key == "run.output_dir") c.output_dir = v;
    else if (key == "learner.gamma") l.gamma = to_double(key, v);
    else if (key == "learner.beta") l.beta = to_double(key, v);
    else if (key == "learner.lr_theta") l.lr_theta = to_double(key, v);
    else if (key == "learner.lr_drn") l.lr_drn = to_double(key, v);
    else if (key == "learner.batch_size") l.batch_size = static_cast<int>(to_long(key, v));
    else if (key == "learner.buffer_capacity") l.buffer_capacity = static_cast<int>(to_long(key, v));
    else if (key == "learner.target_interval") l.target_interval = static_cast<int>(to_long(key, v));
    else if (key == "learner.epsilon_start") l.epsilon_start = to_double(key, v);
    else if (key == "learner.epsilon_finish") l.epsilon_finish = to_double(key, v);
    else if (key == "learner.epsilon_anneal") l.epsilon_anneal = static_cast<int>(to_long(key, v));
    else if (key == "learner.mask_ratio") l.mask_ratio = to_double(key, v);
    else if (key == "learner.grad_clip") l.grad_clip = to_double(key, v);
    else if (key == "learner.meta_fresh_batch") l.meta_fresh_batch = to_bool(key, v);
    else if (key == "learner.exclusive_messages") l.exclusive_messages = to_bool(key, v);
    else if (key == "learner.inverse_loss") {
      if (v == "squared_error") l.inverse_loss = learner::InverseLossKind::squared_error;
      else if (v == "cross_entropy") l.inverse_loss = learner::InverseLossKind::cross_entropy;
      else throw InvalidConfig("learner.inverse_loss must be squared_error or cross_entropy");
    }
    else throw InvalidConfig("unknown config key: " + key);
  }
}

RunConfig load_run_config(const std::string& path, const KeyValues& overrides) {
  RunConfig c;
  if (!path.empty()) apply_key_values(c, read_key_values_file(path));
  apply_key_values(c, overrides);
  c.validate();
  return c;
}

KeyValues to_key_values(const RunConfig& c) {
  const auto& l = c.learner;
  const auto& pp = c.env.predator_prey;
  KeyValues kv;
  kv["env.kind"] = env::to_string(c.env.kind);
  kv["env.chain_lengths"] = join_ints(c.env.hallway.chain_lengths);
  std::string groups;
  for (std::size_t i = 0; i < c.env.hallway.groups.size(); ++i)
    groups += (i ? ";" : "") + join_ints(c.env.hallway.groups[i]);
  kv["env.groups"] = groups;
  kv["env.grid_size"] = std::to_string(pp.grid_size);
  kv["env.n_predators"] = std::to_string(pp.n_predators);
  kv["env.n_preys"] = std::to_string(pp.n_preys);
  kv["env.view_radius"] = std::to_string(pp.view_radius);
  kv["env.episode_limit"] = std::to_string(pp.episode_limit);
  kv["env.preys_move"] = pp.preys_move ? "true" : "false";
  kv["run.variant"] = to_string(c.variant);
  kv["run.total_env_steps"] = std::to_string(c.total_env_steps);
  kv["run.eval_interval"] = std::to_string(c.eval_interval);
  kv["run.eval_episodes"] = std::to_string(c.eval_episodes);
  kv["run.checkpoint_interval"] = std::to_string(c.checkpoint_interval);
  kv["run.episodes_per_update"] = std::to_string(c.episodes_per_update);
  kv["run.seed"] = std::to_string(c.seed);
  kv["run.name"] = c.name;
  kv["run.output_dir"] = c.output_dir;
  kv["learner.gamma"] = fmt_double(l.gamma);
  kv["learner.beta"] = fmt_double(l.beta);
  kv["learner.lr_theta"] = fmt_double(l.lr_theta);
  kv["learner.lr_drn"] = fmt_double(l.lr_drn);
  kv["learner.batch_size"] = std::to_string(l.batch_size);
  kv["learner.buffer_capacity"] = std::to_string(l.buffer_capacity);
  kv["learner.target_interval"] = std::to_string(l.target_interval);
  kv["learner.epsilon_start"] = fmt_double(l.epsilon_start);
  kv["learner.epsilon_finish"] = fmt_double(l.epsilon_finish);
  kv["learner.epsilon_anneal"] = std::to_string(l.epsilon_anneal);
  kv["learner.mask_ratio"] = fmt_double(l.mask_ratio);
  kv["learner.grad_clip"] = fmt_double(l.grad_clip);
  kv["learner.meta_fresh_batch"] = l.meta_fresh_batch ? "true" : "false";
  kv["learner.exclusive_messages"] = l.exclusive_messages ? "true" : "false";
  kv["learner.inverse_loss"] =
      l.inverse_loss == learner::InverseLossKind::squared_error ? "squared_error" : "cross_entropy";
  return kv;
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string output_root() {
  const char* root = std::getenv("M2I2_OUTPUT_ROOT");
  return (root != nullptr && *root != '\0') ? std::string(root) : std::string("runs");
}

std::string resolve_run_dir(const RunConfig& config) {
  if (!config.output_dir.empty()) return config.output_dir;
  return (std::filesystem::path(output_root()) / config.name).string();
}

}  // namespace m2i2::harness
