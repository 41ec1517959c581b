#include "harness/export.hpp"

#include "harness/checkpoint.hpp"
#include "harness/plot.hpp"
#include "harness/rollout.hpp"
#include "harness/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace m2i2::harness {

namespace fs = std::filesystem;

std::vector<ObsSegment> default_segments(const env::EnvConfig& config) {
  auto e = env::make_env(config);
  const Index n = e->spec().n_agents;
  const Index d = e->spec().obs_dim;
  if (config.kind == env::EnvKind::predator_prey) {
    const Index w = 2 * config.predator_prey.view_radius + 1;
    return {{"predators", 0, w * w}, {"preys", w * w, w * w}, {"own_position", 2 * w * w, 2}, {"agent_id", 2 * w * w + 2, n}};
  }
  return {{"position", 0, d - n}, {"agent_id", d - n, n}};
}

std::vector<ObsSegment> parse_segments(const std::string& text) {
  std::vector<ObsSegment> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto a = item.find(':');
    const auto b = item.find(':', a == std::string::npos ? a : a + 1);
    if (a == std::string::npos || b == std::string::npos || a == 0)
      throw std::invalid_argument("segment must be name:start:length, got '" + item + "'");
    ObsSegment s;
    s.name = item.substr(0, a);
    try {
      s.start = std::stol(item.substr(a + 1, b - a - 1));
      s.length = std::stol(item.substr(b + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument("segment bounds must be integers: '" + item + "'");
    }
    if (s.start < 0 || s.length <= 0) throw std::invalid_argument("segment bounds out of range: '" + item + "'");
    out.push_back(s);
  }
  return out;
}

void accumulate_retention(RetentionTable& table, const std::vector<Matrix>& masks, Index steps, double early_fraction) {
  if (masks.empty() || steps <= 0) return;
  const Index d = masks.front().cols();
  if (table.kept.size() == 0) {
    table.kept = Matrix::Zero(d, 2);
    table.counts = Matrix::Zero(d, 2);
  }
  const Index early_steps = static_cast<Index>(std::ceil(early_fraction * static_cast<double>(steps) - 1e-9));
  const Index use = std::min<Index>(steps, static_cast<Index>(masks.size()));
  for (Index t = 0; t < use; ++t) {
    const Matrix& m = masks[static_cast<std::size_t>(t)];
    const int stage = t < early_steps ? 0 : 1;
    for (Index j = 0; j < d; ++j) {
      table.kept(j, stage) += m.col(j).sum();
      table.counts(j, stage) += static_cast<double>(m.rows());
    }
  }
}

Matrix RetentionTable::frequencies() const {
  Matrix f = Matrix::Zero(kept.rows(), kept.cols());
  for (Index i = 0; i < f.size(); ++i) f.data()[i] = counts.data()[i] > 0 ? kept.data()[i] / counts.data()[i] : 0.0;
  return f;
}

ExportResult export_artifacts(const std::string& run_dir, const ExportOptions& options) {
  if (options.episodes <= 0) throw std::invalid_argument("export needs at least one episode");
  const std::string ckpt_path = (fs::path(run_dir) / "checkpoint.bin").string();
  if (!fs::exists(ckpt_path)) throw std::runtime_error("export: no checkpoint in " + run_dir);
  if (!fs::exists(fs::path(run_dir) / "metrics.jsonl")) throw std::runtime_error("export: no metrics in " + run_dir);
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  RunConfig config = config_from_checkpoint(ckpt);
  const learner::LearnerConfig lc = config.effective_learner();
  auto environment = env::make_env(config.env);
  const auto spec = environment->spec();
  std::vector<ObsSegment> segments = options.segments.empty() ? default_segments(config.env) : options.segments;
  for (const auto& s : segments)
    if (s.start + s.length > spec.obs_dim) throw std::invalid_argument("segment '" + s.name + "' exceeds obs_dim");

  const fs::path out_dir = fs::path(run_dir) / "export";
  fs::create_directories(out_dir);
  ExportResult result;
  auto path_of = [&](const std::string& name) {
    const std::string p = (out_dir / name).string();
    result.files.push_back(p);
    return p;
  };

  Rng rng(options.seed);
  RetentionTable table;
  std::ofstream emb(path_of("embeddings.csv"));
  emb << "t";
  for (Index k = 0; k < kZPerAgent * spec.n_agents; ++k) emb << ",z" << k;
  emb << "\n";
  emb.precision(9);
  std::vector<std::ofstream> omega;
  const bool has_omega = lc.comm == learner::CommMode::drn_topk;
  std::vector<std::vector<std::vector<double>>> first_episode_omega(static_cast<std::size_t>(spec.n_agents));
  if (has_omega) {
    for (int i = 0; i < spec.n_agents; ++i) {
      omega.emplace_back(path_of("omega_agent" + std::to_string(i) + ".csv"));
      omega.back() << "episode,t";
      for (int j = 0; j < spec.obs_dim; ++j) omega.back() << ",w" << j;
      omega.back() << "\n";
      omega.back().precision(9);
    }
  }
  for (int ep = 0; ep < options.episodes; ++ep) {
    EpisodeTrace trace;
    RolloutResult r = run_episode(*environment, ckpt.online, lc, 0.0, options.seed + static_cast<std::uint64_t>(ep), rng, &trace);
    const Index steps = r.episode.length();
    if (lc.comm != learner::CommMode::none) accumulate_retention(table, trace.masks, steps, options.early_fraction);
    for (std::size_t t = 0; t < trace.z.size(); ++t) {
      const Matrix& z = trace.z[t];
      for (Index row = 0; row < z.rows(); ++row) {
        emb << t;
        for (Index k = 0; k < z.cols(); ++k) emb << "," << z(row, k);
        emb << "\n";
      }
    }
    if (has_omega) {
      for (std::size_t t = 0; t < static_cast<std::size_t>(steps); ++t) {
        const Matrix& w = trace.weights[t];
        for (int i = 0; i < spec.n_agents; ++i) {
          auto& out = omega[static_cast<std::size_t>(i)];
          out << ep << "," << t;
          for (Index j = 0; j < w.cols(); ++j) out << "," << w(i, j);
          out << "\n";
          if (ep == 0) {
            std::vector<double> row(w.row(i).data(), w.row(i).data() + w.cols());
            first_episode_omega[static_cast<std::size_t>(i)].push_back(std::move(row));
          }
        }
      }
    }
  }
  if (has_omega) {
    for (int i = 0; i < spec.n_agents; ++i) {
      std::ofstream svg(path_of("omega_agent" + std::to_string(i) + ".svg"));
      svg << render_heatmap_svg("importance weights, agent " + std::to_string(i) + " (rows: steps)",
                                first_episode_omega[static_cast<std::size_t>(i)]);
    }
  }
  if (lc.comm != learner::CommMode::none && table.kept.size() > 0) {
    std::vector<std::string> seg_of(static_cast<std::size_t>(spec.obs_dim), "unassigned");
    for (const auto& s : segments)
      for (Index j = s.start; j < s.start + s.length; ++j) seg_of[static_cast<std::size_t>(j)] = s.name;
    std::ofstream per(path_of("mask_retention.csv"));
    per << "dimension,segment,early,late\n";
    per.precision(9);
    const Matrix freq = table.frequencies();
    for (Index j = 0; j < spec.obs_dim; ++j)
      per << j << "," << seg_of[static_cast<std::size_t>(j)] << "," << freq(j, 0) << "," << freq(j, 1) << "\n";
    std::ofstream seg(path_of("mask_retention_segments.csv"));
    seg << "segment,early,late\n";
    seg.precision(9);
    for (const auto& s : segments) {
      double kept[2] = {0, 0}, seen[2] = {0, 0};
      for (Index j = s.start; j < s.start + s.length; ++j)
        for (int st = 0; st < 2; ++st) {
          kept[st] += table.kept(j, st);
          seen[st] += table.counts(j, st);
        }
      seg << s.name << "," << (seen[0] > 0 ? kept[0] / seen[0] : 0.0) << "," << (seen[1] > 0 ? kept[1] / seen[1] : 0.0)
          << "\n";
    }
  }
  return result;
}

}  // namespace m2i2::harness
