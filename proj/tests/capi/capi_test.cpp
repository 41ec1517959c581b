#include "m2i2/m2i2.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("m2i2_capi_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string get(const m2i2_config* c, const char* key) {
  size_t len = 0;
  EXPECT_EQ(m2i2_config_get(c, key, nullptr, 0, &len), M2I2_ERR_BUFFER_TOO_SMALL);
  std::string s(len + 1, '\0');
  EXPECT_EQ(m2i2_config_get(c, key, s.data(), s.size(), &len), M2I2_OK);
  s.resize(len);
  return s;
}

struct Config {
  m2i2_config* c = nullptr;
  Config() { EXPECT_EQ(m2i2_config_create(&c), M2I2_OK); }
  ~Config() { m2i2_config_destroy(c); }
  void set(const char* k, const std::string& v) { ASSERT_EQ(m2i2_config_set(c, k, v.c_str()), M2I2_OK) << m2i2_last_error(); }
};

void tiny(Config& cfg, const fs::path& dir, const char* variant = "m2i2") {
  cfg.set("env.chain_lengths", "2,3");
  cfg.set("run.variant", variant);
  cfg.set("run.total_env_steps", "300");
  cfg.set("run.eval_interval", "150");
  cfg.set("run.eval_episodes", "4");
  cfg.set("learner.batch_size", "4");
  cfg.set("learner.buffer_capacity", "50");
  cfg.set("learner.epsilon_anneal", "300");
  cfg.set("run.output_dir", dir.string());
}

TEST(CApi, VersionAndStatusStrings) {
  EXPECT_STRNE(m2i2_version(), "");
  EXPECT_STREQ(m2i2_status_string(M2I2_OK), "ok");
  EXPECT_STREQ(m2i2_status_string(M2I2_ERR_BUFFER_TOO_SMALL), "buffer too small");
  EXPECT_STREQ(m2i2_status_string(static_cast<m2i2_status>(1234)), "unknown status");
}

TEST(CApi, ConfigGetSetAndErrors) {
  Config cfg;
  EXPECT_EQ(get(cfg.c, "learner.beta"), "1");
  EXPECT_EQ(get(cfg.c, "learner.batch_size"), "32");
  cfg.set("learner.beta", "0.25");
  EXPECT_EQ(get(cfg.c, "learner.beta"), "0.25");
  EXPECT_EQ(m2i2_config_assign(cfg.c, "learner.mask_ratio=0.2"), M2I2_OK);
  EXPECT_EQ(get(cfg.c, "learner.mask_ratio"), "0.2");

  EXPECT_EQ(m2i2_config_set(cfg.c, "learner.bogus", "1"), M2I2_ERR_INVALID_CONFIG);
  EXPECT_NE(std::string(m2i2_last_error()).find("bogus"), std::string::npos);
  EXPECT_EQ(m2i2_config_set(cfg.c, "learner.beta", "nan-ish"), M2I2_ERR_INVALID_CONFIG);
  EXPECT_EQ(get(cfg.c, "learner.beta"), "0.25");  // failed sets leave the config untouched
  EXPECT_STREQ(m2i2_last_error(), "");
  EXPECT_EQ(m2i2_config_assign(cfg.c, "missing-equals"), M2I2_ERR_INVALID_CONFIG);
  EXPECT_EQ(m2i2_config_get(cfg.c, "nope", nullptr, 0, nullptr), M2I2_ERR_INVALID_CONFIG);
  EXPECT_EQ(m2i2_config_set(nullptr, "a", "b"), M2I2_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(m2i2_config_create(nullptr), M2I2_ERR_INVALID_ARGUMENT);

  char small[2];
  size_t len = 0;
  EXPECT_EQ(m2i2_config_get(cfg.c, "learner.beta", small, sizeof small, &len), M2I2_ERR_BUFFER_TOO_SMALL);
  EXPECT_EQ(len, 4u);

  cfg.set("learner.gamma", "1.5");
  EXPECT_EQ(m2i2_config_validate(cfg.c), M2I2_ERR_INVALID_ARGUMENT);
}

TEST(CApi, ConfigFormatLoadAndClone) {
  auto dir = scratch("cfg");
  Config cfg;
  cfg.set("run.seed", "17");
  cfg.set("env.kind", "predator_prey");
  size_t len = 0;
  m2i2_config_format(cfg.c, nullptr, 0, &len);
  std::string text(len + 1, '\0');
  ASSERT_EQ(m2i2_config_format(cfg.c, text.data(), text.size(), &len), M2I2_OK);
  text.resize(len);
  const auto path = dir / "c.txt";
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs(text.c_str(), f);
    std::fclose(f);
  }
  m2i2_config* loaded = nullptr;
  ASSERT_EQ(m2i2_config_load(path.c_str(), &loaded), M2I2_OK);
  EXPECT_EQ(get(loaded, "run.seed"), "17");
  EXPECT_EQ(get(loaded, "env.kind"), "predator_prey");
  m2i2_config* copy = nullptr;
  ASSERT_EQ(m2i2_config_clone(loaded, &copy), M2I2_OK);
  m2i2_config_set(loaded, "run.seed", "3");
  EXPECT_EQ(get(copy, "run.seed"), "17");
  m2i2_config_destroy(copy);
  m2i2_config_destroy(loaded);
  EXPECT_EQ(m2i2_config_load((dir / "absent.txt").c_str(), &loaded), M2I2_ERR_IO);
}

TEST(CApi, RunDirFollowsOutputRoot) {
  Config cfg;
  cfg.set("run.name", "exp");
  ::setenv("M2I2_OUTPUT_ROOT", "/tmp/capi_root", 1);
  char buf[256];
  size_t len = 0;
  ASSERT_EQ(m2i2_config_run_dir(cfg.c, buf, sizeof buf, &len), M2I2_OK);
  EXPECT_EQ(fs::path(buf), fs::path("/tmp/capi_root") / "exp");
  ::unsetenv("M2I2_OUTPUT_ROOT");
}

TEST(CApi, CommEfficiency) {
  double v = 0;
  ASSERT_EQ(m2i2_comm_efficiency(0.9936, 0.0, 0.6, &v), M2I2_OK);
  EXPECT_NEAR(v, 1.656, 1e-12);
  ASSERT_EQ(m2i2_comm_efficiency(0.7, 0.2, 1.0, &v), M2I2_OK);
  EXPECT_EQ(v, 0.7 - 0.2);
  EXPECT_EQ(m2i2_comm_efficiency(0.7, 0.2, 0.0, &v), M2I2_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(m2i2_comm_efficiency(0.7, 0.2, 0.5, nullptr), M2I2_ERR_INVALID_ARGUMENT);
}

TEST(CApi, EnvironmentScriptedEpisode) {
  Config cfg;
  m2i2_env* env = nullptr;
  ASSERT_EQ(m2i2_env_create(cfg.c, &env), M2I2_OK);
  m2i2_env_spec spec{};
  ASSERT_EQ(m2i2_env_get_spec(env, &spec), M2I2_OK);
  EXPECT_EQ(spec.n_agents, 4);
  EXPECT_EQ(spec.n_actions, 3);
  EXPECT_EQ(spec.reports_win_rate, 1);
  const size_t n = static_cast<size_t>(spec.n_agents), d = static_cast<size_t>(spec.obs_dim);
  std::vector<double> obs(n * d), state(static_cast<size_t>(spec.state_dim));
  EXPECT_EQ(m2i2_env_reset(env, 1, obs.data(), obs.size() - 1, nullptr, 0), M2I2_ERR_INVALID_ARGUMENT);
  ASSERT_EQ(m2i2_env_reset(env, 1, obs.data(), obs.size(), state.data(), state.size()), M2I2_OK);
  std::vector<unsigned char> avail(3);
  ASSERT_EQ(m2i2_env_avail_actions(env, 0, avail.data(), avail.size()), M2I2_OK);
  EXPECT_EQ(avail, (std::vector<unsigned char>{1, 1, 1}));
  // walk left, wait at 1, then step together; own position is the one-hot head of each observation
  m2i2_step_result r{};
  for (int t = 0; t < 10; ++t) {
    std::vector<int> a(n);
    for (size_t i = 0; i < n; ++i) {
      int pos = 0;
      while (obs[i * d + static_cast<size_t>(pos)] == 0.0) ++pos;
      a[i] = t + 1 < 10 ? (pos > 1 ? 1 : 0) : 1;
    }
    ASSERT_EQ(m2i2_env_step(env, a.data(), a.size(), &r, obs.data(), obs.size(), nullptr, 0), M2I2_OK);
    if (r.terminated) break;
  }
  EXPECT_EQ(r.won, 1);
  EXPECT_EQ(r.reward, 1.0);
  int a4[4] = {0, 0, 0, 0};
  EXPECT_EQ(m2i2_env_step(env, a4, 4, &r, nullptr, 0, nullptr, 0), M2I2_ERR_STATE);
  ASSERT_EQ(m2i2_env_reset(env, 2, obs.data(), obs.size(), nullptr, 0), M2I2_OK);
  EXPECT_EQ(m2i2_env_step(env, a4, 3, &r, nullptr, 0, nullptr, 0), M2I2_ERR_STATE);
  m2i2_env_destroy(env);

  cfg.set("env.chain_lengths", "");
  EXPECT_EQ(m2i2_env_create(cfg.c, &env), M2I2_ERR_INVALID_CONFIG);
}

void count_record(const m2i2_record* r, void* user) {
  auto* seen = static_cast<std::vector<m2i2_record>*>(user);
  seen->push_back(*r);
}

void count_run(const char*, void* user) { ++*static_cast<int*>(user); }

class CApiRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(scratch("runs"));
    Config cfg;
    tiny(cfg, *root_ / "m2i2");
    m2i2_train_options opt{0, 0, count_record, &records_};
    ASSERT_EQ(m2i2_train(cfg.c, &opt, &result_), M2I2_OK) << m2i2_last_error();
    Config q;
    tiny(q, *root_ / "qmix", "qmix");
    ASSERT_EQ(m2i2_train(q.c, nullptr, nullptr), M2I2_OK) << m2i2_last_error();
  }
  static void TearDownTestSuite() { delete root_; }
  static fs::path* root_;
  static std::vector<m2i2_record> records_;
  static m2i2_train_result result_;
};
fs::path* CApiRun::root_ = nullptr;
std::vector<m2i2_record> CApiRun::records_;
m2i2_train_result CApiRun::result_{};

TEST_F(CApiRun, TrainReportsRecords) {
  ASSERT_GE(records_.size(), 3u);
  EXPECT_EQ(records_.front().env_steps, 0);
  EXPECT_EQ(records_.back().env_steps, result_.final_record.env_steps);
  EXPECT_EQ(result_.final_record.has_win_rate, 1);
  EXPECT_NEAR(result_.final_record.comm_frequency, 4.0 / 6.0, 1e-15);  // Hallway(2,3): k = 4 of D = 6
  EXPECT_GT(result_.parameter_count, 0u);
  EXPECT_TRUE(fs::exists(*root_ / "m2i2" / "checkpoint.bin"));
}

TEST_F(CApiRun, ReuseSkipsIdenticalRun) {
  Config cfg;
  tiny(cfg, *root_ / "m2i2");
  std::vector<m2i2_record> seen;
  m2i2_train_options opt{0, 1, count_record, &seen};
  m2i2_train_result r{};
  ASSERT_EQ(m2i2_train(cfg.c, &opt, &r), M2I2_OK);
  EXPECT_TRUE(seen.empty());
  EXPECT_EQ(r.final_record.env_steps, result_.final_record.env_steps);
  EXPECT_EQ(r.final_record.test_mean_return, result_.final_record.test_mean_return);
  m2i2_train_options both{1, 1, nullptr, nullptr};
  EXPECT_EQ(m2i2_train(cfg.c, &both, nullptr), M2I2_ERR_INVALID_ARGUMENT);
}

// The policy handle driven through the env handle reproduces greedy evaluation.
TEST_F(CApiRun, PolicyMatchesEvaluation) {
  const std::string ckpt = (*root_ / "m2i2" / "checkpoint.bin").string();
  m2i2_eval_summary s{};
  ASSERT_EQ(m2i2_evaluate_checkpoint(ckpt.c_str(), 20, 100, &s), M2I2_OK) << m2i2_last_error();
  EXPECT_EQ(s.episodes, 20);

  m2i2_policy* pol = nullptr;
  ASSERT_EQ(m2i2_policy_load(ckpt.c_str(), 100, &pol), M2I2_OK) << m2i2_last_error();
  m2i2_env_spec spec{};
  m2i2_policy_get_spec(pol, &spec);
  Config cfg;
  cfg.set("env.chain_lengths", "2,3");
  m2i2_env* env = nullptr;
  ASSERT_EQ(m2i2_env_create(cfg.c, &env), M2I2_OK);
  const size_t n = static_cast<size_t>(spec.n_agents);
  std::vector<double> obs(n * static_cast<size_t>(spec.obs_dim)), q(n * static_cast<size_t>(spec.n_actions));
  double total = 0, wins = 0;
  for (int ep = 0; ep < 20; ++ep) {
    m2i2_policy_reset(pol);
    m2i2_env_reset(env, 100 + static_cast<uint64_t>(ep), obs.data(), obs.size(), nullptr, 0);
    m2i2_step_result r{};
    do {
      std::vector<int> a(n);
      ASSERT_EQ(m2i2_policy_act(pol, obs.data(), obs.size(), nullptr, 0.0, a.data(), n, q.data(), q.size()), M2I2_OK);
      for (size_t i = 0; i < n; ++i) {
        const auto best = std::max_element(q.begin() + static_cast<long>(i) * spec.n_actions,
                                           q.begin() + static_cast<long>(i + 1) * spec.n_actions);
        EXPECT_EQ(*best, q[i * static_cast<size_t>(spec.n_actions) + static_cast<size_t>(a[i])]);
      }
      ASSERT_EQ(m2i2_env_step(env, a.data(), n, &r, obs.data(), obs.size(), nullptr, 0), M2I2_OK);
      total += r.reward;
    } while (!r.terminated);
    wins += r.won;
  }
  EXPECT_NEAR(total / 20, s.mean_return, 1e-12);
  EXPECT_NEAR(wins / 20, s.win_rate, 1e-12);

  std::vector<int> a(n);
  EXPECT_EQ(m2i2_policy_act(pol, obs.data(), obs.size() - 1, nullptr, 0.0, a.data(), n, nullptr, 0),
            M2I2_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(m2i2_policy_act(pol, obs.data(), obs.size(), nullptr, 1.5, a.data(), n, nullptr, 0),
            M2I2_ERR_INVALID_ARGUMENT);
  // masked actions are never chosen, even when exploring
  std::vector<unsigned char> avail(n * 3, 0);
  for (size_t i = 0; i < n; ++i) avail[i * 3 + 2] = 1;
  for (int k = 0; k < 20; ++k) {
    ASSERT_EQ(m2i2_policy_act(pol, obs.data(), obs.size(), avail.data(), 1.0, a.data(), n, nullptr, 0), M2I2_OK);
    for (int x : a) EXPECT_EQ(x, 2);
  }
  m2i2_policy_destroy(pol);
  m2i2_env_destroy(env);
  EXPECT_EQ(m2i2_policy_load((*root_ / "none.bin").c_str(), 1, &pol), M2I2_ERR_IO);
  EXPECT_EQ(m2i2_evaluate_checkpoint(ckpt.c_str(), 0, 1, &s), M2I2_ERR_INVALID_ARGUMENT);
}

TEST_F(CApiRun, ReportingExportAndPlot) {
  const std::string m = (*root_ / "m2i2").string(), b = (*root_ / "qmix").string();
  double fp = -1;
  ASSERT_EQ(m2i2_final_performance(m.c_str(), 3, &fp), M2I2_OK);
  EXPECT_GE(fp, 0.0);
  EXPECT_LE(fp, 1.0);
  const char* md[] = {m.c_str()};
  const char* bd[] = {b.c_str()};
  m2i2_efficiency e{};
  ASSERT_EQ(m2i2_efficiency_from_runs(md, 1, bd, 1, &e), M2I2_OK) << m2i2_last_error();
  double bp = 0;
  m2i2_final_performance(b.c_str(), 3, &bp);
  EXPECT_EQ(e.performance, fp);
  EXPECT_EQ(e.baseline, bp);
  EXPECT_EQ(e.efficiency, (fp - bp) / e.frequency);
  EXPECT_EQ(m2i2_efficiency_from_runs(md, 1, nullptr, 0, &e), M2I2_ERR_INVALID_ARGUMENT);

  size_t files = 0;
  ASSERT_EQ(m2i2_export(m.c_str(), 2, 7, nullptr, 0.8, &files), M2I2_OK) << m2i2_last_error();
  EXPECT_GE(files, 5u);
  EXPECT_EQ(m2i2_export(m.c_str(), 2, 7, "bad", 0.8, &files), M2I2_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(m2i2_export(m.c_str(), 2, 7, "own:0:99", 0.8, &files), M2I2_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(m2i2_export((*root_ / "nothing").c_str(), 2, 7, nullptr, 0.8, &files), M2I2_ERR_IO);

  const char* runs[] = {m.c_str()};
  ASSERT_EQ(m2i2_plot(runs, 1, (*root_ / "plots").c_str(), &files), M2I2_OK) << m2i2_last_error();
  EXPECT_GE(files, 1u);
  EXPECT_EQ(m2i2_plot(nullptr, 0, (*root_ / "plots").c_str(), &files), M2I2_ERR_INVALID_ARGUMENT);
}

TEST(CApiAblate, GridOfCells) {
  auto root = scratch("ablate");
  Config cfg;
  tiny(cfg, root / "grid");
  cfg.set("run.total_env_steps", "120");
  cfg.set("run.eval_interval", "60");
  const uint64_t seeds[] = {1, 2};
  const double rates[] = {0.8, 0.4};
  int started = 0;
  m2i2_ablate_options opt{"m2i2,qmix", rates, 2, seeds, 2, 1, count_run, &started};
  m2i2_ablation* a = nullptr;
  ASSERT_EQ(m2i2_ablate(cfg.c, &opt, &a), M2I2_OK) << m2i2_last_error();
  EXPECT_EQ(started, 6);
  ASSERT_EQ(m2i2_ablation_cell_count(a), 3u);
  m2i2_ablation_cell c{};
  ASSERT_EQ(m2i2_ablation_get_cell(a, 0, &c), M2I2_OK);
  EXPECT_STREQ(c.variant, "m2i2");
  EXPECT_EQ(c.comm_rate, 0.8);
  EXPECT_EQ(c.runs, 2u);
  EXPECT_LE(c.min, c.median);
  EXPECT_LE(c.median, c.max);
  ASSERT_EQ(m2i2_ablation_get_cell(a, 2, &c), M2I2_OK);
  EXPECT_STREQ(c.variant, "qmix");
  EXPECT_EQ(m2i2_ablation_get_cell(a, 3, &c), M2I2_ERR_INVALID_ARGUMENT);
  char dir[512];
  ASSERT_EQ(m2i2_ablation_run_dir(a, 1, 1, dir, sizeof dir, nullptr), M2I2_OK);
  EXPECT_TRUE(fs::exists(fs::path(dir) / "metrics.jsonl"));
  EXPECT_TRUE(fs::exists(root / "grid" / "ablation.json"));
  m2i2_ablation_destroy(a);

  m2i2_ablate_options bad{"m2i2,unknown", nullptr, 0, seeds, 1, 1, nullptr, nullptr};
  EXPECT_EQ(m2i2_ablate(cfg.c, &bad, &a), M2I2_ERR_INVALID_CONFIG);
  m2i2_ablate_options badrate{"m2i2", rates, 2, seeds, 1, 1, nullptr, nullptr};
  const double zero[] = {0.0};
  badrate.comm_rates = zero;
  badrate.n_comm_rates = 1;
  EXPECT_EQ(m2i2_ablate(cfg.c, &badrate, &a), M2I2_ERR_INVALID_ARGUMENT);
}

}  // namespace
