#include "m2i2/m2i2.h"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Failure {
  m2i2_status status;
};

void check(m2i2_status s, const std::string& context) {
  if (s == M2I2_OK) return;
  std::cerr << "m2i2: " << context << ": " << m2i2_status_string(s);
  const std::string detail = m2i2_last_error();
  if (!detail.empty()) std::cerr << ": " << detail;
  std::cerr << "\n";
  throw Failure{s};
}

using ConfigPtr = std::unique_ptr<m2i2_config, decltype(&m2i2_config_destroy)>;

// --config then --set, later assignments win.
struct ConfigArgs {
  std::string file;
  std::vector<std::string> sets;

  void add(CLI::App* app) {
    app->add_option("-c,--config", file, "key = value configuration file")->check(CLI::ExistingFile);
    app->add_option("-s,--set", sets, "override a configuration key (key=value), repeatable");
  }

  ConfigPtr build() const {
    m2i2_config* c = nullptr;
    if (file.empty()) check(m2i2_config_create(&c), "create config");
    else check(m2i2_config_load(file.c_str(), &c), "load " + file);
    ConfigPtr p(c, &m2i2_config_destroy);
    for (const auto& s : sets) check(m2i2_config_assign(p.get(), s.c_str()), "--set " + s);
    return p;
  }
};

std::string read_string(const std::function<m2i2_status(char*, size_t, size_t*)>& f, const std::string& context) {
  size_t len = 0;
  m2i2_status s = f(nullptr, 0, &len);
  if (s != M2I2_ERR_BUFFER_TOO_SMALL) check(s, context);
  std::string out(len + 1, '\0');
  check(f(out.data(), out.size(), &len), context);
  out.resize(len);
  return out;
}

std::string run_dir_of(const m2i2_config* c) {
  return read_string([c](char* b, size_t n, size_t* l) { return m2i2_config_run_dir(c, b, n, l); }, "run dir");
}

void print_record(const m2i2_record* r, void*) {
  std::printf("steps %10lld  episodes %7lld  updates %7lld  ", static_cast<long long>(r->env_steps),
              static_cast<long long>(r->episodes), static_cast<long long>(r->updates));
  if (r->has_win_rate) std::printf("win %.3f  ", r->test_win_rate);
  std::printf("return %8.3f  loss %.4g (rl %.4g rc %.4g inv %.4g)  eps %.3f  t %.0fs\n", r->test_mean_return,
              r->loss_total, r->loss_rl, r->loss_rc, r->loss_inv, r->epsilon, r->wall_clock);
  std::fflush(stdout);
}

void print_started(const char* dir, void*) {
  std::printf("run %s\n", dir);
  std::fflush(stdout);
}

std::vector<const char*> c_strs(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

std::string percent(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * x);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train, evaluate and report on communicating multi-agent learners"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(m2i2_version()));

  // config
  ConfigArgs show_args;
  auto* show = app.add_subcommand("config", "Print the effective configuration");
  show_args.add(show);

  // train
  ConfigArgs train_args;
  bool resume = false, reuse = false, quiet = false;
  std::optional<std::string> name, out_dir, variant;
  std::optional<long long> steps;
  std::optional<unsigned long long> seed;
  auto* train = app.add_subcommand("train", "Train one run");
  train_args.add(train);
  train->add_option("--name", name, "run name under the output root");
  train->add_option("-o,--output-dir", out_dir, "explicit run directory");
  train->add_option("--variant", variant, "m2i2, m2i2_no_drn, m2i2_no_drn_no_inv, qmix or vdn_m2i2");
  train->add_option("--steps", steps, "total environment steps")->check(CLI::PositiveNumber);
  train->add_option("--seed", seed, "run seed");
  auto* resume_flag = train->add_flag("--resume", resume, "continue from the run's checkpoint");
  train->add_flag("--reuse", reuse, "skip if a finished run with the same configuration exists")->excludes(resume_flag);
  train->add_flag("-q,--quiet", quiet, "no per-evaluation lines");

  // eval
  std::string eval_ckpt, eval_run;
  int eval_episodes = 32;
  unsigned long long eval_seed = 12345;
  auto* eval = app.add_subcommand("eval", "Greedy evaluation of a checkpoint");
  auto* ck_opt = eval->add_option("--checkpoint", eval_ckpt, "checkpoint file");
  eval->add_option("--run", eval_run, "run directory (uses its checkpoint.bin)")->excludes(ck_opt);
  eval->add_option("-n,--episodes", eval_episodes, "episodes")->check(CLI::PositiveNumber);
  eval->add_option("--seed", eval_seed, "evaluation seed");

  // ablate
  ConfigArgs ablate_args;
  std::string variants = "m2i2,m2i2_no_drn,m2i2_no_drn_no_inv,qmix";
  std::vector<double> rates;
  std::vector<unsigned long long> seeds{1, 2, 3, 4, 5};
  bool fresh = false;
  auto* ablate = app.add_subcommand("ablate", "Variant and communication-rate grid over seeds");
  ablate_args.add(ablate);
  ablate->add_option("--variants", variants, "comma separated variants");
  ablate->add_option("--rates", rates, "communication rates swept for m2i2 (e.g. 0.8 0.6 0.4)")
      ->check(CLI::Range(0.0, 1.0));
  ablate->add_option("--seeds", seeds, "seeds");
  ablate->add_flag("--fresh", fresh, "retrain even if finished runs exist");

  // efficiency
  std::optional<double> perf, base_perf, freq;
  std::vector<std::string> method_runs, baseline_runs;
  std::string label = "method";
  auto* eff = app.add_subcommand("efficiency", "Communication efficiency: (performance - baseline) / frequency");
  auto* perf_opt = eff->add_option("--perf", perf, "method performance");
  eff->add_option("--baseline", base_perf, "baseline performance")->needs(perf_opt);
  eff->add_option("--frequency", freq, "communication frequency in (0, 1]")->needs(perf_opt);
  auto* mr = eff->add_option("--method-runs", method_runs, "run directories of the method")->excludes(perf_opt);
  eff->add_option("--baseline-runs", baseline_runs, "run directories of the baseline")->needs(mr);
  eff->add_option("--label", label, "row label");

  // export
  std::string export_run, segments;
  int export_episodes = 16;
  unsigned long long export_seed = 12345;
  double early = 0.8;
  auto* exp = app.add_subcommand("export", "Mask retention, embeddings and importance-weight heatmaps");
  exp->add_option("run", export_run, "run directory")->required();
  exp->add_option("-n,--episodes", export_episodes, "greedy episodes to replay")->check(CLI::PositiveNumber);
  exp->add_option("--seed", export_seed, "replay seed");
  exp->add_option("--segments", segments, "observation segments name:start:length,...");
  exp->add_option("--early-fraction", early, "share of each episode counted as early")->check(CLI::Range(0.0, 1.0));

  // plot
  std::vector<std::string> plot_runs;
  std::string plot_out = "plots";
  auto* plot = app.add_subcommand("plot", "Learning curves with min-max bands across seeds");
  plot->add_option("runs", plot_runs, "run directories")->required();
  plot->add_option("-o,--out", plot_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*show) {
      auto c = show_args.build();
      std::cout << read_string([&](char* b, size_t n, size_t* l) { return m2i2_config_format(c.get(), b, n, l); },
                               "format");
    } else if (*train) {
      auto c = train_args.build();
      if (name) check(m2i2_config_set(c.get(), "run.name", name->c_str()), "--name");
      if (out_dir) check(m2i2_config_set(c.get(), "run.output_dir", out_dir->c_str()), "--output-dir");
      if (variant) check(m2i2_config_set(c.get(), "run.variant", variant->c_str()), "--variant");
      if (steps) check(m2i2_config_set(c.get(), "run.total_env_steps", std::to_string(*steps).c_str()), "--steps");
      if (seed) check(m2i2_config_set(c.get(), "run.seed", std::to_string(*seed).c_str()), "--seed");
      check(m2i2_config_validate(c.get()), "config");
      const std::string dir = run_dir_of(c.get());
      std::printf("run directory %s\n", dir.c_str());
      m2i2_train_options opt{resume ? 1 : 0, reuse ? 1 : 0, quiet ? nullptr : print_record, nullptr};
      m2i2_train_result r{};
      check(m2i2_train(c.get(), &opt, &r), "train");
      std::printf("final performance %.4f at %lld steps, %llu parameters, %.1fs\n", r.final_record.performance,
                  static_cast<long long>(r.final_record.env_steps),
                  static_cast<unsigned long long>(r.parameter_count), r.wall_seconds);
    } else if (*eval) {
      std::string path = eval_ckpt;
      if (path.empty()) {
        if (eval_run.empty()) throw CLI::RequiredError("--checkpoint or --run");
        path = eval_run + "/checkpoint.bin";
      }
      m2i2_eval_summary s{};
      check(m2i2_evaluate_checkpoint(path.c_str(), eval_episodes, eval_seed, &s), "evaluate " + path);
      std::printf("episodes %d\n", s.episodes);
      if (s.has_win_rate) std::printf("win_rate %.4f +- %.4f\n", s.win_rate, s.win_rate_stderr);
      std::printf("mean_return %.4f +- %.4f\nmean_length %.2f\n", s.mean_return, s.return_stderr, s.mean_length);
    } else if (*ablate) {
      auto c = ablate_args.build();
      std::vector<uint64_t> sd(seeds.begin(), seeds.end());
      m2i2_ablate_options opt{variants.c_str(), rates.empty() ? nullptr : rates.data(), rates.size(), sd.data(),
                              sd.size(),        fresh ? 0 : 1,                          print_started, nullptr};
      m2i2_ablation* raw = nullptr;
      check(m2i2_ablate(c.get(), &opt, &raw), "ablate");
      std::unique_ptr<m2i2_ablation, decltype(&m2i2_ablation_destroy)> a(raw, &m2i2_ablation_destroy);
      std::printf("%-24s %6s %10s %10s %10s %10s %10s\n", "cell", "runs", "median", "mean", "stderr", "min", "max");
      for (size_t i = 0; i < m2i2_ablation_cell_count(a.get()); ++i) {
        m2i2_ablation_cell cell{};
        check(m2i2_ablation_get_cell(a.get(), i, &cell), "cell");
        std::printf("%-24s %6zu %10.4f %10.4f %10.4f %10.4f %10.4f\n", cell.label, cell.runs, cell.median, cell.mean,
                    cell.stderr_, cell.min, cell.max);
      }
    } else if (*eff) {
      m2i2_efficiency e{};
      if (perf) {
        if (!base_perf || !freq) throw CLI::RequiredError("--baseline and --frequency");
        e.performance = *perf;
        e.baseline = *base_perf;
        e.frequency = *freq;
        check(m2i2_comm_efficiency(*perf, *base_perf, *freq, &e.efficiency), "efficiency");
      } else {
        if (method_runs.empty() || baseline_runs.empty())
          throw CLI::RequiredError("--perf/--baseline/--frequency or --method-runs/--baseline-runs");
        auto m = c_strs(method_runs), b = c_strs(baseline_runs);
        check(m2i2_efficiency_from_runs(m.data(), m.size(), b.data(), b.size(), &e), "efficiency");
      }
      std::printf("%-16s %12s %12s %10s %12s\n", "label", "performance", "baseline", "frequency", "efficiency");
      std::printf("%-16s %12.4f %12.4f %10.4f %12s\n", label.c_str(), e.performance, e.baseline, e.frequency,
                  percent(e.efficiency).c_str());
      std::printf("efficiency %.17g\n", e.efficiency);
    } else if (*exp) {
      size_t n = 0;
      check(m2i2_export(export_run.c_str(), export_episodes, export_seed, segments.empty() ? nullptr : segments.c_str(),
                        early, &n),
            "export");
      std::printf("wrote %zu files to %s/export\n", n, export_run.c_str());
    } else if (*plot) {
      auto r = c_strs(plot_runs);
      size_t n = 0;
      check(m2i2_plot(r.data(), r.size(), plot_out.c_str(), &n), "plot");
      std::printf("wrote %zu files to %s\n", n, plot_out.c_str());
    }
  } catch (const Failure&) {
    return 1;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  }
  return 0;
}
