#include "harness/train.hpp"

#include "comm/comm_layer.hpp"
#include "harness/rollout.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace m2i2::harness {

namespace fs = std::filesystem;

namespace {

double stderr_of(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1)) / std::sqrt(static_cast<double>(xs.size()));
}

learner::ModelDims dims_of(const env::EnvSpec& s) {
  return {s.n_agents, s.obs_dim, s.state_dim, s.n_actions};
}

// Environment seeds for training episodes and for evaluation points come
// from disjoint streams so that evaluation never perturbs training.
std::uint64_t train_env_seed(std::uint64_t seed, long episode) {
  return seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(episode);
}
std::uint64_t eval_seed(std::uint64_t seed, long env_steps) {
  return (seed + 0x5851F42D4C957F2DULL) * 0xD1B54A32D192ED03ULL + static_cast<std::uint64_t>(env_steps);
}

Checkpoint make_checkpoint(const RunConfig& config, learner::Learner& l, const TrainCounters& counters,
                           const Rng& run_rng) {
  Checkpoint c;
  c.config = to_key_values(config);
  c.dims = l.dims();
  c.counters = counters;
  c.updates = l.updates();
  c.online = l.params().online;
  c.target = l.params().target;
  c.theta_steps = l.theta_optimizer().steps();
  c.theta_m = l.theta_optimizer().first_moment();
  c.theta_v = l.theta_optimizer().second_moment();
  c.drn_steps = l.drn_optimizer().steps();
  c.drn_m = l.drn_optimizer().first_moment();
  c.drn_v = l.drn_optimizer().second_moment();
  c.learner_rng = rng_state(l.rng());
  c.run_rng = rng_state(run_rng);
  return c;
}

void write_summary(const std::string& path, const RunConfig& config, const TrainResult& r) {
  nlohmann::json j = to_json(r.final_record);
  j["variant"] = to_string(config.variant);
  j["env"] = env::to_string(config.env.kind);
  j["seed"] = config.seed;
  j["parameter_count"] = r.parameter_count;
  j["wall_seconds"] = r.wall_seconds;
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write " + path);
}

}  // namespace

double comm_frequency(const learner::LearnerConfig& config, Index obs_dim) {
  if (config.comm == learner::CommMode::none) return 0.0;
  return static_cast<double>(comm::kept_dims(obs_dim, config.mask_ratio)) / static_cast<double>(obs_dim);
}

EvalSummary evaluate_params(const env::EnvConfig& env_config, const ParamSet& params,
                            const learner::LearnerConfig& config, int episodes, std::uint64_t seed) {
  if (episodes <= 0) throw std::invalid_argument("evaluation needs at least one episode");
  auto environment = env::make_env(env_config);
  Rng rng(seed);
  std::vector<double> returns, wins;
  double length = 0.0;
  for (int i = 0; i < episodes; ++i) {
    RolloutResult r = run_episode(*environment, params, config, 0.0, seed + static_cast<std::uint64_t>(i), rng);
    returns.push_back(r.episode_return);
    wins.push_back(r.won ? 1.0 : 0.0);
    length += static_cast<double>(r.episode.length());
  }
  EvalSummary s;
  s.episodes = episodes;
  const double n = static_cast<double>(episodes);
  for (double x : returns) s.mean_return += x / n;
  s.return_stderr = stderr_of(returns, s.mean_return);
  s.mean_length = length / n;
  if (environment->reports_win_rate()) {
    double w = 0.0;
    for (double x : wins) w += x / n;
    s.win_rate = w;
    s.win_rate_stderr = stderr_of(wins, w);
  }
  return s;
}

RunConfig config_from_checkpoint(const Checkpoint& ckpt) {
  RunConfig c;
  apply_key_values(c, ckpt.config);
  c.validate();
  return c;
}

EvalSummary evaluate_checkpoint(const std::string& path, int episodes, std::uint64_t seed) {
  Checkpoint ckpt = load_checkpoint(path);
  RunConfig c = config_from_checkpoint(ckpt);
  auto environment = env::make_env(c.env);
  const auto dims = dims_of(environment->spec());
  if (dims.n_agents != ckpt.dims.n_agents || dims.obs_dim != ckpt.dims.obs_dim ||
      dims.state_dim != ckpt.dims.state_dim || dims.n_actions != ckpt.dims.n_actions)
    throw std::runtime_error("checkpoint does not match its environment");
  return evaluate_params(c.env, ckpt.online, c.effective_learner(), episodes, seed);
}

TrainResult train(const RunConfig& config, const TrainOptions& options) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const learner::LearnerConfig lc = config.effective_learner();
  auto environment = env::make_env(config.env);
  const env::EnvSpec spec = environment->spec();
  learner::Learner l(dims_of(spec), lc, config.seed);
  learner::ReplayBuffer buffer(static_cast<std::size_t>(lc.buffer_capacity));
  Rng run_rng(config.seed ^ 0xA0761D6478BD642FULL);
  TrainCounters counters;

  TrainResult result;
  result.run_dir = resolve_run_dir(config);
  fs::create_directories(result.run_dir);
  const std::string metrics_path = (fs::path(result.run_dir) / "metrics.jsonl").string();
  const std::string ckpt_path = (fs::path(result.run_dir) / "checkpoint.bin").string();

  if (options.resume) {
    Checkpoint c = load_checkpoint(ckpt_path);
    if (c.dims.n_agents != spec.n_agents || c.dims.obs_dim != spec.obs_dim)
      throw std::runtime_error("resume: checkpoint does not match the environment");
    l.mutable_params().online = c.online;
    l.mutable_params().target = c.target;
    l.theta_optimizer().restore(c.theta_steps, c.theta_m, c.theta_v);
    l.drn_optimizer().restore(c.drn_steps, c.drn_m, c.drn_v);
    l.set_updates(c.updates);
    restore_rng(l.rng(), c.learner_rng);
    restore_rng(run_rng, c.run_rng);
    counters = c.counters;
  } else {
    std::error_code ec;
    fs::remove(metrics_path, ec);
  }
  {
    std::ofstream cfg((fs::path(result.run_dir) / "config.txt").string(), std::ios::trunc);
    cfg << format_key_values(to_key_values(config));
  }

  const double freq = comm_frequency(lc, spec.obs_dim);
  double loss_sum[4] = {0, 0, 0, 0};
  long loss_count = 0;
  auto emit = [&]() {
    MetricsRecord r;
    r.env_steps = counters.env_steps;
    r.episodes = counters.episodes;
    r.updates = l.updates();
    EvalSummary e = evaluate_params(config.env, l.params().online, lc, config.eval_episodes,
                                    eval_seed(config.seed, counters.env_steps));
    r.test_win_rate = e.win_rate;
    r.test_mean_return = e.mean_return;
    r.test_return_stderr = e.return_stderr;
    if (loss_count > 0) {
      r.loss_total = loss_sum[0] / static_cast<double>(loss_count);
      r.loss_rl = loss_sum[1] / static_cast<double>(loss_count);
      r.loss_rc = loss_sum[2] / static_cast<double>(loss_count);
      r.loss_inv = loss_sum[3] / static_cast<double>(loss_count);
    }
    r.epsilon = learner::epsilon_at(lc, counters.env_steps);
    r.comm_frequency = freq;
    r.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    append_record(metrics_path, r);
    if (options.on_record) options.on_record(r);
    std::fill(std::begin(loss_sum), std::end(loss_sum), 0.0);
    loss_count = 0;
    return r;
  };
  auto save = [&]() { save_checkpoint(ckpt_path, make_checkpoint(config, l, counters, run_rng)); };

  MetricsRecord last;
  long last_record_step = -1;
  long next_ckpt = config.checkpoint_interval > 0 ? counters.env_steps + config.checkpoint_interval : -1;
  while (counters.env_steps < config.total_env_steps) {
    if (counters.env_steps >= counters.next_eval) {
      last = emit();
      last_record_step = counters.env_steps;
      counters.next_eval += config.eval_interval;
    }
    RolloutResult r = run_episode(*environment, l.params().online, lc, learner::epsilon_at(lc, counters.env_steps),
                                  train_env_seed(config.seed, counters.episodes), run_rng);
    counters.env_steps += r.episode.length();
    counters.episodes += 1;
    buffer.insert(std::move(r.episode));
    if (counters.episodes % config.episodes_per_update == 0 &&
        buffer.size() >= static_cast<std::size_t>(lc.batch_size)) {
      learner::EpisodeBatch batch = buffer.sample(static_cast<std::size_t>(lc.batch_size), spec.n_actions, l.rng());
      learner::UpdateStats st;
      try {
        if (lc.meta_fresh_batch && l.has_drn() && lc.meta_update) {
          learner::EpisodeBatch meta =
              buffer.sample(static_cast<std::size_t>(lc.batch_size), spec.n_actions, l.rng());
          st = l.update(batch, &meta);
        } else {
          st = l.update(batch);
        }
      } catch (const learner::NonFiniteError& e) {
        std::ofstream diag((fs::path(result.run_dir) / "error.txt").string(), std::ios::trunc);
        diag << "non-finite value at update " << l.updates() + 1 << ", env_steps " << counters.env_steps << ": "
             << e.what() << "\n";
        throw;
      }
      loss_sum[0] += st.loss.total;
      loss_sum[1] += st.loss.rl;
      loss_sum[2] += st.loss.rc;
      loss_sum[3] += st.loss.inv;
      ++loss_count;
    }
    if (next_ckpt > 0 && counters.env_steps >= next_ckpt) {
      save();
      next_ckpt += config.checkpoint_interval;
    }
  }
  if (last_record_step != counters.env_steps) last = emit();
  while (counters.next_eval <= counters.env_steps) counters.next_eval += config.eval_interval;
  save();
  result.final_record = last;
  result.parameter_count = parameter_count(l.params().online);
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_summary((fs::path(result.run_dir) / "summary.json").string(), config, result);
  return result;
}

}  // namespace m2i2::harness
