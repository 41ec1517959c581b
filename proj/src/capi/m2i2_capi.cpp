#include "m2i2/m2i2.h"

#include "env/env.hpp"
#include "harness/checkpoint.hpp"
#include "harness/config.hpp"
#include "harness/export.hpp"
#include "harness/plot.hpp"
#include "harness/report.hpp"
#include "harness/rollout.hpp"
#include "harness/train.hpp"
#include "learner/learner.hpp"
#include "models/agent_models.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <sstream>

using namespace m2i2;

struct m2i2_config {
  harness::RunConfig run;
};

struct m2i2_ablation {
  harness::AblationReport report;
  std::vector<std::string> variant_names;
};

struct m2i2_env {
  std::unique_ptr<env::Env> env;
};

struct m2i2_policy {
  harness::RunConfig run;
  learner::LearnerConfig learner;
  ParamSet params;
  env::EnvSpec spec;
  Rng rng;
  std::unique_ptr<harness::Controller> controller;
};

namespace {

thread_local std::string last_error;

m2i2_status fail(m2i2_status s, const std::string& message) {
  last_error = message;
  return s;
}

template <class F>
m2i2_status guarded(F&& f) {
  try {
    last_error.clear();
    return f();
  } catch (const env::InvalidConfig& e) {
    return fail(M2I2_ERR_INVALID_CONFIG, e.what());
  } catch (const ad::ShapeError& e) {
    return fail(M2I2_ERR_SHAPE, e.what());
  } catch (const learner::NonFiniteError& e) {
    return fail(M2I2_ERR_NON_FINITE, e.what());
  } catch (const env::EnvStateError& e) {
    return fail(M2I2_ERR_STATE, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(M2I2_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return fail(M2I2_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::length_error& e) {
    return fail(M2I2_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::logic_error& e) {
    return fail(M2I2_ERR_STATE, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(M2I2_ERR_IO, e.what());
  } catch (const std::runtime_error& e) {
    return fail(M2I2_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(M2I2_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(M2I2_ERR_INTERNAL, "unknown error");
  }
}

#define M2I2_REQUIRE(cond, what) \
  if (!(cond)) return fail(M2I2_ERR_INVALID_ARGUMENT, what)

m2i2_status put_string(const std::string& s, char* buf, size_t cap, size_t* len) {
  if (len != nullptr) *len = s.size();
  if (buf == nullptr || cap <= s.size())
    return fail(M2I2_ERR_BUFFER_TOO_SMALL, "buffer needs " + std::to_string(s.size() + 1) + " bytes");
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return M2I2_OK;
}

m2i2_record to_c(const harness::MetricsRecord& r) {
  m2i2_record c{};
  c.env_steps = r.env_steps;
  c.episodes = r.episodes;
  c.updates = r.updates;
  c.has_win_rate = r.test_win_rate.has_value() ? 1 : 0;
  c.test_win_rate = r.test_win_rate.value_or(std::nan(""));
  c.test_mean_return = r.test_mean_return;
  c.test_return_stderr = r.test_return_stderr;
  c.loss_total = r.loss_total;
  c.loss_rl = r.loss_rl;
  c.loss_rc = r.loss_rc;
  c.loss_inv = r.loss_inv;
  c.epsilon = r.epsilon;
  c.comm_frequency = r.comm_frequency;
  c.wall_clock = r.wall_clock;
  c.performance = r.performance();
  return c;
}

m2i2_env_spec to_c(const env::EnvSpec& s, bool win_rate) {
  return {s.n_agents, s.obs_dim, s.state_dim, s.n_actions, s.episode_limit, win_rate ? 1 : 0};
}

std::vector<std::string> dir_list(const char* const* dirs, size_t n) {
  std::vector<std::string> out;
  for (size_t i = 0; i < n; ++i) {
    if (dirs[i] == nullptr) throw std::invalid_argument("null run directory");
    out.emplace_back(dirs[i]);
  }
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

void write_obs(const std::vector<env::Vector>& obs, double* out, size_t len) {
  size_t k = 0;
  for (const auto& o : obs)
    for (Index j = 0; j < o.size(); ++j) {
      if (k >= len) throw std::invalid_argument("observation buffer too short");
      out[k++] = o(j);
    }
  if (k != len) throw std::invalid_argument("observation buffer has the wrong length");
}

void write_state(const env::Vector& s, double* out, size_t len) {
  if (out == nullptr) return;
  if (len != static_cast<size_t>(s.size())) throw std::invalid_argument("state buffer has the wrong length");
  for (Index j = 0; j < s.size(); ++j) out[j] = s(j);
}

}  // namespace

extern "C" {

const char* m2i2_version(void) { return "1.0.0"; }

const char* m2i2_status_string(m2i2_status status) {
  switch (status) {
    case M2I2_OK: return "ok";
    case M2I2_ERR_INVALID_ARGUMENT: return "invalid argument";
    case M2I2_ERR_INVALID_CONFIG: return "invalid configuration";
    case M2I2_ERR_IO: return "i/o or data error";
    case M2I2_ERR_NON_FINITE: return "non-finite value";
    case M2I2_ERR_STATE: return "invalid state";
    case M2I2_ERR_SHAPE: return "shape mismatch";
    case M2I2_ERR_BUFFER_TOO_SMALL: return "buffer too small";
    case M2I2_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* m2i2_last_error(void) { return last_error.c_str(); }

// ---- config ----

m2i2_status m2i2_config_create(m2i2_config** out) {
  return guarded([&] {
    M2I2_REQUIRE(out != nullptr, "out is null");
    *out = new m2i2_config{};
    return M2I2_OK;
  });
}

m2i2_status m2i2_config_load(const char* path, m2i2_config** out) {
  return guarded([&] {
    M2I2_REQUIRE(path != nullptr && out != nullptr, "path and out must be non-null");
    auto c = std::make_unique<m2i2_config>();
    c->run = harness::load_run_config(path);
    *out = c.release();
    return M2I2_OK;
  });
}

m2i2_status m2i2_config_clone(const m2i2_config* config, m2i2_config** out) {
  return guarded([&] {
    M2I2_REQUIRE(config != nullptr && out != nullptr, "config and out must be non-null");
    *out = new m2i2_config{*config};
    return M2I2_OK;
  });
}

void m2i2_config_destroy(m2i2_config* config) { delete config; }

m2i2_status m2i2_config_set(m2i2_config* config, const char* key, const char* value) {
  return guarded([&] {
    M2I2_REQUIRE(config != nullptr && key != nullptr && value != nullptr, "config, key and value must be non-null");
    harness::RunConfig next = config->run;
    harness::apply_key_values(next, {{key, value}});
    config->run = std::move(next);
    return M2I2_OK;
  });
}

m2i2_status m2i2_config_assign(m2i2_config* config, const char* assignment) {
  return guarded([&] {
    M2I2_REQUIRE(config != nullptr && assignment != nullptr, "config and assignment must be non-null");
    auto [k, v] = harness::parse_assignment(assignment);
    harness::RunConfig next = config->run;
    harness::apply_key_values(next, {{k, v}});
    config->run = std::move(next);
    return M2I2_OK;
  });
}

m2i2_status m2i2_config_get(const m2i2_config* config, const char* key, char* buf, size_t cap, size_t* len) {
  return guarded([&] {
    M2I2_REQUIRE(config != nullptr && key != nullptr, "config and key must be non-null");
    auto kv = harness::to_key_values(config->run);
    auto it = kv.find(key);
    if (it == kv.end()) return fail(M2I2_ERR_INVALID_CONFIG, std::string("unknown key: ") + key);
    return put_string(it->second, buf, cap, len);
  });
}

m2i2_status m2i2_config_format(const m2i2_config* config, char* buf, size_t cap, size_t* len) {
  return guarded([&] {
    M2I2_REQUIRE(config != nullptr, "config is null");
    return put_string(harness::format_key_values(harness::to_key_values(config->run)), buf, cap, len);
  });
}

m2i2_status m2i2_config_validate(const m2i2_config* config) {
  return guarded([&] {
    M2I2_REQUIRE(config != nullptr, "config is null");
    config->run.validate();
    return M2I2_OK;
  });
}

m2i2_status m2i2_config_run_dir(const m2i2_config* config, char* buf, size_t cap, size_t* len) {
  return guarded([&] {
    M2I2_REQUIRE(config != nullptr, "config is null");
    return put_string(harness::resolve_run_dir(config->run), buf, cap, len);
  });
}

// ---- training ----

m2i2_status m2i2_train(const m2i2_config* config, const m2i2_train_options* options, m2i2_train_result* out) {
  return guarded([&] {
    M2I2_REQUIRE(config != nullptr, "config is null");
    harness::TrainOptions opt;
    bool reuse = false;
    if (options != nullptr) {
      opt.resume = options->resume != 0;
      reuse = options->reuse_existing != 0;
      if (options->on_record != nullptr) {
        auto fn = options->on_record;
        void* user = options->user;
        opt.on_record = [fn, user](const harness::MetricsRecord& r) {
          const m2i2_record c = to_c(r);
          fn(&c, user);
        };
      }
    }
    M2I2_REQUIRE(!(opt.resume && reuse), "resume and reuse_existing are exclusive");
    harness::TrainResult r = harness::train_or_reuse(config->run, reuse, opt);
    if (out != nullptr) {
      out->final_record = to_c(r.final_record);
      out->parameter_count = r.parameter_count;
      out->wall_seconds = r.wall_seconds;
    }
    return M2I2_OK;
  });
}

// ---- evaluation and reporting ----

m2i2_status m2i2_evaluate_checkpoint(const char* checkpoint_path, int episodes, uint64_t seed,
                                     m2i2_eval_summary* out) {
  return guarded([&] {
    M2I2_REQUIRE(checkpoint_path != nullptr && out != nullptr, "checkpoint_path and out must be non-null");
    auto s = harness::evaluate_checkpoint(checkpoint_path, episodes, seed);
    out->episodes = s.episodes;
    out->has_win_rate = s.win_rate.has_value() ? 1 : 0;
    out->win_rate = s.win_rate.value_or(std::nan(""));
    out->win_rate_stderr = s.win_rate_stderr;
    out->mean_return = s.mean_return;
    out->return_stderr = s.return_stderr;
    out->mean_length = s.mean_length;
    out->performance = s.performance();
    return M2I2_OK;
  });
}

m2i2_status m2i2_comm_efficiency(double perf, double baseline, double frequency, double* out) {
  return guarded([&] {
    M2I2_REQUIRE(out != nullptr, "out is null");
    *out = harness::comm_efficiency(perf, baseline, frequency);
    return M2I2_OK;
  });
}

m2i2_status m2i2_final_performance(const char* run_dir, size_t window, double* out) {
  return guarded([&] {
    M2I2_REQUIRE(run_dir != nullptr && out != nullptr, "run_dir and out must be non-null");
    *out = harness::final_performances({run_dir}, window).front();
    return M2I2_OK;
  });
}

m2i2_status m2i2_efficiency_from_runs(const char* const* method_dirs, size_t n_method,
                                      const char* const* baseline_dirs, size_t n_baseline, m2i2_efficiency* out) {
  return guarded([&] {
    M2I2_REQUIRE(out != nullptr, "out is null");
    M2I2_REQUIRE((method_dirs != nullptr || n_method == 0) && (baseline_dirs != nullptr || n_baseline == 0),
                 "directory list is null");
    auto row = harness::efficiency_from_runs("", dir_list(method_dirs, n_method), dir_list(baseline_dirs, n_baseline));
    *out = {row.performance, row.baseline, row.frequency, row.efficiency};
    return M2I2_OK;
  });
}

// ---- ablation ----

m2i2_status m2i2_ablate(const m2i2_config* base, const m2i2_ablate_options* options, m2i2_ablation** out) {
  return guarded([&] {
    M2I2_REQUIRE(base != nullptr && out != nullptr, "base and out must be non-null");
    harness::AblateOptions opt;
    if (options != nullptr) {
      if (options->variants != nullptr) {
        opt.variants.clear();
        for (const auto& v : split_list(options->variants)) opt.variants.push_back(harness::parse_variant(v));
      }
      M2I2_REQUIRE(options->comm_rates != nullptr || options->n_comm_rates == 0, "comm_rates is null");
      opt.comm_rates.assign(options->comm_rates, options->comm_rates + options->n_comm_rates);
      if (options->seeds != nullptr) opt.seeds.assign(options->seeds, options->seeds + options->n_seeds);
      opt.reuse_existing = options->reuse_existing != 0;
      if (options->on_run_start != nullptr) {
        auto fn = options->on_run_start;
        void* user = options->user;
        opt.on_run_start = [fn, user](const std::string& dir) { fn(dir.c_str(), user); };
      }
    }
    auto a = std::make_unique<m2i2_ablation>();
    a->report = harness::ablate(base->run, opt);
    for (const auto& c : a->report.cells) a->variant_names.push_back(harness::to_string(c.variant));
    *out = a.release();
    return M2I2_OK;
  });
}

void m2i2_ablation_destroy(m2i2_ablation* ablation) { delete ablation; }

size_t m2i2_ablation_cell_count(const m2i2_ablation* ablation) {
  return ablation == nullptr ? 0 : ablation->report.cells.size();
}

m2i2_status m2i2_ablation_get_cell(const m2i2_ablation* ablation, size_t index, m2i2_ablation_cell* out) {
  return guarded([&] {
    M2I2_REQUIRE(ablation != nullptr && out != nullptr, "ablation and out must be non-null");
    M2I2_REQUIRE(index < ablation->report.cells.size(), "cell index out of range");
    const auto& c = ablation->report.cells[index];
    *out = {c.label.c_str(), ablation->variant_names[index].c_str(), c.comm_rate, c.run_dirs.size(),
            c.stats.median,  c.stats.mean,                           c.stats.stderr_, c.stats.min,
            c.stats.max};
    return M2I2_OK;
  });
}

m2i2_status m2i2_ablation_run_dir(const m2i2_ablation* ablation, size_t index, size_t run, char* buf, size_t cap,
                                  size_t* len) {
  return guarded([&] {
    M2I2_REQUIRE(ablation != nullptr, "ablation is null");
    M2I2_REQUIRE(index < ablation->report.cells.size(), "cell index out of range");
    const auto& dirs = ablation->report.cells[index].run_dirs;
    M2I2_REQUIRE(run < dirs.size(), "run index out of range");
    return put_string(dirs[run], buf, cap, len);
  });
}

// ---- artifacts ----

m2i2_status m2i2_export(const char* run_dir, int episodes, uint64_t seed, const char* segments,
                        double early_fraction, size_t* n_files) {
  return guarded([&] {
    M2I2_REQUIRE(run_dir != nullptr, "run_dir is null");
    M2I2_REQUIRE(early_fraction > 0.0 && early_fraction <= 1.0, "early_fraction must lie in (0, 1]");
    harness::ExportOptions opt;
    opt.episodes = episodes;
    opt.seed = seed;
    opt.early_fraction = early_fraction;
    if (segments != nullptr && *segments != '\0') opt.segments = harness::parse_segments(segments);
    auto r = harness::export_artifacts(run_dir, opt);
    if (n_files != nullptr) *n_files = r.files.size();
    return M2I2_OK;
  });
}

m2i2_status m2i2_plot(const char* const* run_dirs, size_t n_runs, const char* out_dir, size_t* n_files) {
  return guarded([&] {
    M2I2_REQUIRE(out_dir != nullptr, "out_dir is null");
    M2I2_REQUIRE(run_dirs != nullptr || n_runs == 0, "run_dirs is null");
    auto files = harness::plot_runs(dir_list(run_dirs, n_runs), out_dir);
    if (n_files != nullptr) *n_files = files.size();
    return M2I2_OK;
  });
}

// ---- environments ----

m2i2_status m2i2_env_create(const m2i2_config* config, m2i2_env** out) {
  return guarded([&] {
    M2I2_REQUIRE(config != nullptr && out != nullptr, "config and out must be non-null");
    auto e = std::make_unique<m2i2_env>();
    e->env = env::make_env(config->run.env);
    *out = e.release();
    return M2I2_OK;
  });
}

void m2i2_env_destroy(m2i2_env* env) { delete env; }

m2i2_status m2i2_env_get_spec(const m2i2_env* env, m2i2_env_spec* out) {
  return guarded([&] {
    M2I2_REQUIRE(env != nullptr && out != nullptr, "env and out must be non-null");
    *out = to_c(env->env->spec(), env->env->reports_win_rate());
    return M2I2_OK;
  });
}

m2i2_status m2i2_env_reset(m2i2_env* env, uint64_t seed, double* obs, size_t obs_len, double* state,
                           size_t state_len) {
  return guarded([&] {
    M2I2_REQUIRE(env != nullptr && obs != nullptr, "env and obs must be non-null");
    const auto& s = env->env->spec();
    M2I2_REQUIRE(obs_len == static_cast<size_t>(s.n_agents) * static_cast<size_t>(s.obs_dim),
                 "obs_len must be n_agents * obs_dim");
    auto r = env->env->reset(seed);
    write_obs(r.obs, obs, obs_len);
    write_state(r.state, state, state_len);
    return M2I2_OK;
  });
}

m2i2_status m2i2_env_step(m2i2_env* env, const int* actions, size_t n_actions, m2i2_step_result* out,
                          double* next_obs, size_t obs_len, double* next_state, size_t state_len) {
  return guarded([&] {
    M2I2_REQUIRE(env != nullptr && actions != nullptr && out != nullptr, "env, actions and out must be non-null");
    const auto& s = env->env->spec();
    M2I2_REQUIRE(next_obs == nullptr || obs_len == static_cast<size_t>(s.n_agents) * static_cast<size_t>(s.obs_dim),
                 "obs_len must be n_agents * obs_dim");
    auto r = env->env->step(std::vector<int>(actions, actions + n_actions));
    *out = {r.reward, r.terminated ? 1 : 0, r.truncated ? 1 : 0, r.won ? 1 : 0};
    if (next_obs != nullptr) write_obs(r.next_obs, next_obs, obs_len);
    write_state(r.next_state, next_state, state_len);
    return M2I2_OK;
  });
}

m2i2_status m2i2_env_avail_actions(const m2i2_env* env, int agent, unsigned char* avail, size_t len) {
  return guarded([&] {
    M2I2_REQUIRE(env != nullptr && avail != nullptr, "env and avail must be non-null");
    const auto& s = env->env->spec();
    M2I2_REQUIRE(agent >= 0 && agent < s.n_agents, "agent index out of range");
    M2I2_REQUIRE(len == static_cast<size_t>(s.n_actions), "len must be n_actions");
    auto a = env->env->avail_actions(agent);
    for (size_t i = 0; i < len; ++i) avail[i] = a[i] ? 1 : 0;
    return M2I2_OK;
  });
}

// ---- policies ----

m2i2_status m2i2_policy_load(const char* checkpoint_path, uint64_t seed, m2i2_policy** out) {
  return guarded([&] {
    M2I2_REQUIRE(checkpoint_path != nullptr && out != nullptr, "checkpoint_path and out must be non-null");
    auto ckpt = harness::load_checkpoint(checkpoint_path);
    auto p = std::make_unique<m2i2_policy>();
    p->run = harness::config_from_checkpoint(ckpt);
    p->learner = p->run.effective_learner();
    p->spec = env::make_env(p->run.env)->spec();
    if (p->spec.n_agents != ckpt.dims.n_agents || p->spec.obs_dim != ckpt.dims.obs_dim ||
        p->spec.n_actions != ckpt.dims.n_actions)
      return fail(M2I2_ERR_IO, "checkpoint does not match its environment");
    p->params = std::move(ckpt.online);
    p->rng.seed(seed);
    p->controller = std::make_unique<harness::Controller>(p->params, p->learner, p->spec.n_agents);
    *out = p.release();
    return M2I2_OK;
  });
}

void m2i2_policy_destroy(m2i2_policy* policy) { delete policy; }

m2i2_status m2i2_policy_get_spec(const m2i2_policy* policy, m2i2_env_spec* out) {
  return guarded([&] {
    M2I2_REQUIRE(policy != nullptr && out != nullptr, "policy and out must be non-null");
    *out = to_c(policy->spec, policy->run.env.kind != env::EnvKind::predator_prey);
    return M2I2_OK;
  });
}

m2i2_status m2i2_policy_reset(m2i2_policy* policy) {
  return guarded([&] {
    M2I2_REQUIRE(policy != nullptr, "policy is null");
    policy->controller->reset();
    return M2I2_OK;
  });
}

m2i2_status m2i2_policy_act(m2i2_policy* policy, const double* obs, size_t obs_len, const unsigned char* avail,
                            double epsilon, int* actions, size_t n_agents, double* q, size_t q_len) {
  return guarded([&] {
    M2I2_REQUIRE(policy != nullptr && obs != nullptr && actions != nullptr, "policy, obs and actions must be non-null");
    const auto n = static_cast<size_t>(policy->spec.n_agents);
    const auto d = static_cast<size_t>(policy->spec.obs_dim);
    const auto a = static_cast<size_t>(policy->spec.n_actions);
    M2I2_REQUIRE(obs_len == n * d, "obs_len must be n_agents * obs_dim");
    M2I2_REQUIRE(n_agents == n, "n_agents does not match the policy");
    M2I2_REQUIRE(q == nullptr || q_len == n * a, "q_len must be n_agents * n_actions");
    M2I2_REQUIRE(epsilon >= 0.0 && epsilon <= 1.0, "epsilon must lie in [0, 1]");
    Matrix o(static_cast<Index>(n), static_cast<Index>(d));
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < d; ++j) o(static_cast<Index>(i), static_cast<Index>(j)) = obs[i * d + j];
    auto step = policy->controller->step(o, policy->rng);
    for (size_t i = 0; i < n; ++i) {
      std::vector<bool> av(a, true);
      if (avail != nullptr)
        for (size_t k = 0; k < a; ++k) av[k] = avail[i * a + k] != 0;
      actions[i] = models::select_action(step.q.row(static_cast<Index>(i)).transpose(), av, epsilon, policy->rng);
      if (q != nullptr)
        for (size_t k = 0; k < a; ++k) q[i * a + k] = step.q(static_cast<Index>(i), static_cast<Index>(k));
    }
    return M2I2_OK;
  });
}

}  // extern "C"
