#include "learner/learner.hpp"
#include "synth.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace m2i2;
using namespace m2i2::learner;

namespace {

double rel_error(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

ParamSet scaled(ParamSet p, double s) {
  for (auto& [k, v] : p) v *= s;
  return p;
}

bool same(const ParamSet& a, const ParamSet& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [k, v] : a) {
    auto it = b.find(k);
    if (it == b.end() || it->second.rows() != v.rows() || it->second.cols() != v.cols()) return false;
    if ((it->second.array() != v.array()).any()) return false;
  }
  return true;
}

// ---------------- replay and schedule ----------------

TEST(Replay, FifoEvictionAtCapacity) {
  Rng rng(1);
  ReplayBuffer buf(5000);
  for (int i = 0; i < 5001; ++i) {
    auto e = synth::episode(1, 2, 1, 2, 1, rng);
    e.rewards[0] = i;
    buf.insert(std::move(e));
  }
  EXPECT_EQ(buf.size(), 5000u);
  EXPECT_EQ(buf.total_inserted(), 5001u);
  EXPECT_EQ(buf.at(0).rewards[0], 1.0);
  EXPECT_EQ(buf.at(4999).rewards[0], 5000.0);
}

TEST(Replay, EvictsOldestEveryTime) {
  Rng rng(2);
  ReplayBuffer buf(7);
  for (int i = 0; i < 40; ++i) {
    auto e = synth::episode(1, 2, 1, 2, 1, rng);
    e.rewards[0] = i;
    buf.insert(std::move(e));
    EXPECT_EQ(buf.size(), std::min<std::size_t>(i + 1, 7));
    EXPECT_EQ(buf.at(0).rewards[0], std::max(0, i - 6));
  }
}

TEST(Replay, SampleDistinctEpisodes) {
  Rng rng(3);
  ReplayBuffer buf(100);
  for (int i = 0; i < 40; ++i) buf.insert(synth::episode(1, 2, 1, 2, 1, rng));
  for (int t = 0; t < 50; ++t) {
    auto idx = buf.sample_indices(32, rng);
    EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 32u);
  }
  EXPECT_EQ(buf.sample(32, 2, rng).episodes, 32);
}

TEST(Replay, SamplingUnderfilledFails) {
  Rng rng(4);
  ReplayBuffer buf(10);
  EXPECT_THROW(buf.sample(1, 2, rng), std::length_error);
  buf.insert(synth::episode(1, 2, 1, 2, 1, rng));
  EXPECT_THROW(buf.sample(2, 2, rng), std::length_error);
  EXPECT_THROW(ReplayBuffer(0), std::invalid_argument);
}

TEST(Replay, SamplingIsUniform) {
  Rng rng(5);
  ReplayBuffer buf(10);
  for (int i = 0; i < 10; ++i) buf.insert(synth::episode(1, 2, 1, 2, 1, rng));
  std::vector<int> counts(10, 0);
  const int draws = 20000;
  for (int t = 0; t < draws; ++t)
    for (auto i : buf.sample_indices(3, rng)) ++counts[i];
  double chi = 0;
  const double expect = draws * 3 / 10.0;
  for (int c : counts) chi += (c - expect) * (c - expect) / expect;
  EXPECT_LT(chi, 27.9);  // 9 dof, p = 0.001
}

TEST(Epsilon, Schedule) {
  LearnerConfig c;
  EXPECT_DOUBLE_EQ(epsilon_at(c, 0), 1.0);
  EXPECT_DOUBLE_EQ(epsilon_at(c, 50000), 0.05);
  EXPECT_NEAR(epsilon_at(c, 25000), 0.525, 1e-12);
  EXPECT_DOUBLE_EQ(epsilon_at(c, 10'000'000), 0.05);
  double prev = 2.0;
  for (long t = 0; t < 120000; t += 997) {
    const double e = epsilon_at(c, t);
    EXPECT_LE(e, prev);
    EXPECT_GE(e, 0.05);
    EXPECT_LE(e, 1.0);
    prev = e;
  }
  EXPECT_THROW(epsilon_at(c, -1), std::invalid_argument);
}

TEST(Config, Validation) {
  LearnerConfig c;
  EXPECT_NO_THROW(c.validate());
  auto bad = [](auto mutate) {
    LearnerConfig x;
    mutate(x);
    return x;
  };
  EXPECT_THROW(bad([](LearnerConfig& x) { x.gamma = 1.0; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](LearnerConfig& x) { x.gamma = -0.1; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](LearnerConfig& x) { x.beta = -1; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](LearnerConfig& x) { x.mask_ratio = 1.2; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](LearnerConfig& x) { x.buffer_capacity = 4; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](LearnerConfig& x) { x.grad_clip = 0; }).validate(), std::invalid_argument);
  EXPECT_NO_THROW(bad([](LearnerConfig& x) { x.lr_theta = 0; }).validate());
  EXPECT_NO_THROW(bad([](LearnerConfig& x) { x.mask_ratio = 1.0; }).validate());
}

// ---------------- individual losses ----------------

TEST(TdLoss, SingleTransition) {
  Matrix r(1, 1), term = Matrix::Zero(1, 1), next(1, 1);
  r << 1.0;
  next << 2.0;
  Matrix y = td_targets_from(r, term, next, 0.9);
  EXPECT_DOUBLE_EQ(y(0, 0), 2.8);
  Graph<Matrix> g;
  Var q = g.constant(Matrix::Constant(1, 1, 2.0));
  EXPECT_NEAR(g.primal(td_loss(g, q, y, Matrix::Ones(1, 1)))(0, 0), 0.64, 1e-12);
}

TEST(TdLoss, TerminalIgnoresGamma) {
  Matrix r(1, 2), term(1, 2), next(1, 2);
  r << 0.5, 1.0;
  term << 0.0, 1.0;
  next << 3.0, 100.0;
  for (double gamma : {0.0, 0.5, 0.99}) EXPECT_EQ(td_targets_from(r, term, next, gamma)(0, 1), 1.0);
}

TEST(TdLoss, ZeroGammaExactValues) {
  Matrix r(2, 2);
  r << 1, 2, 3, 4;
  Matrix y = td_targets_from(r, Matrix::Zero(2, 2), Matrix::Constant(2, 2, 7.0), 0.0);
  Graph<Matrix> g;
  Matrix col(4, 1);
  col << 1, 3, 2, 4;
  Matrix ycol(4, 1);
  ycol << y(0, 0), y(1, 0), y(0, 1), y(1, 1);
  EXPECT_EQ(g.primal(td_loss(g, g.constant(col), ycol, Matrix::Ones(4, 1)))(0, 0), 0.0);
}

TEST(TdLoss, MaskedMean) {
  Graph<Matrix> g;
  Matrix q(3, 1), y(3, 1), m(3, 1);
  q << 0, 0, 0;
  y << 1, 2, 50;
  m << 1, 1, 0;
  EXPECT_DOUBLE_EQ(g.primal(td_loss(g, g.constant(q), y, m))(0, 0), 2.5);
  EXPECT_THROW(td_loss(g, g.constant(q), y, Matrix::Zero(3, 1)), std::invalid_argument);
}

TEST(ReconstructionLoss, Examples) {
  Graph<Matrix> g;
  Matrix s(1, 2), pred(1, 2);
  s << 1, 1;
  pred << 3, 1;
  EXPECT_DOUBLE_EQ(g.primal(masked_mse(g, g.constant(pred), s, Matrix::Ones(1, 1)))(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(g.primal(masked_mse(g, g.constant(s), s, Matrix::Ones(1, 1)))(0, 0), 0.0);
  Rng rng(1);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 100; ++t) {
    Matrix a(3, 4), b(3, 4);
    for (Index i = 0; i < 12; ++i) {
      a.data()[i] = nd(rng);
      b.data()[i] = nd(rng);
    }
    EXPECT_GE(g.primal(masked_mse(g, g.constant(a), b, Matrix::Ones(3, 1)))(0, 0), 0.0);
  }
}

TEST(InverseLoss, Examples) {
  Graph<Matrix> g;
  Matrix p(1, 2), target(1, 2);
  p << 0.5, 0.5;
  target << 1, 0;
  EXPECT_DOUBLE_EQ(g.primal(masked_mse(g, g.constant(p), target, Matrix::Ones(1, 1)))(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(g.primal(masked_mse(g, g.constant(target), target, Matrix::Ones(1, 1)))(0, 0), 0.0);
  // bounded in [0, 1] for distributions against one-hots
  Rng rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 200; ++t) {
    Matrix d(4, 3), oh = Matrix::Zero(4, 3);
    for (Index r = 0; r < 4; ++r) {
      for (Index c = 0; c < 3; ++c) d(r, c) = u(rng);
      d.row(r) /= d.row(r).sum();
      oh(r, t % 3) = 1;
    }
    const double v = g.primal(masked_mse(g, g.constant(d), oh, Matrix::Ones(4, 1)))(0, 0);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(InverseLoss, CrossEntropySwitch) {
  Graph<Matrix> g;
  Matrix p(2, 2), oh(2, 2), m(2, 1);
  p << 0.25, 0.75, 0.5, 0.5;
  oh << 0, 1, 1, 0;
  m << 1, 1;
  EXPECT_NEAR(g.primal(masked_cross_entropy(g, g.constant(p), oh, m))(0, 0), -(std::log(0.75) + std::log(0.5)) / 2,
              1e-15);
}

// ---------------- combined loss on the real model ----------------

struct LossCase {
  ModelDims dims{2, 4, 3, 3};
  LearnerConfig cfg;
  Rng rng{7};
  ParamBundle bundle;
  std::vector<Episode> eps;
  LossCase() {
    cfg.beta = 0.7;
    bundle = init_bundle(dims, cfg, rng);
    eps = synth::episodes(3, dims.n_agents, dims.obs_dim, dims.state_dim, dims.n_actions, rng, 1, 4);
  }
};

TEST(CombinedLoss, TotalIsRlPlusBetaAux) {
  LossCase s;
  auto b = synth::batch(s.eps, 3);
  Matrix y = compute_td_targets(s.bundle, b, s.cfg, nullptr);
  auto v = evaluate_losses(s.bundle.online, b, y, s.cfg, nullptr);
  EXPECT_GT(v.rc, 0.0);
  EXPECT_GT(v.inv, 0.0);
  EXPECT_NEAR(v.total, v.rl + 0.7 * (v.rc + v.inv), 1e-14);
  s.cfg.beta = 0.0;
  auto z = evaluate_losses(s.bundle.online, b, y, s.cfg, nullptr);
  EXPECT_EQ(z.total, z.rl);
}

TEST(CombinedLoss, VariantsNonnegative) {
  for (int variant = 0; variant < 4; ++variant) {
    LossCase s;
    if (variant == 1) s.cfg.comm = CommMode::random_mask;
    if (variant == 2) s.cfg.comm = CommMode::none;
    if (variant == 3) s.cfg.exclusive_messages = true;
    s.bundle = init_bundle(s.dims, s.cfg, s.rng);
    auto b = synth::batch(s.eps, 3);
    std::vector<Matrix> masks;
    if (s.cfg.comm == CommMode::random_mask) masks = draw_random_masks(b, s.cfg.mask_ratio, s.rng);
    const auto* mp = masks.empty() ? nullptr : &masks;
    Matrix y = compute_td_targets(s.bundle, b, s.cfg, mp);
    auto v = evaluate_losses(s.bundle.online, b, y, s.cfg, mp);
    EXPECT_GE(v.rl, 0.0);
    EXPECT_GE(v.rc, 0.0);
    EXPECT_GE(v.inv, 0.0);
    EXPECT_TRUE(std::isfinite(v.total));
  }
}

// Appending padded steps leaves every loss component unchanged.
TEST(CombinedLoss, PaddingInvariance) {
  for (int variant = 0; variant < 3; ++variant) {
    LossCase s;
    if (variant == 1) s.cfg.exclusive_messages = true;
    if (variant == 2) s.cfg.inverse_loss = InverseLossKind::cross_entropy;
    s.bundle = init_bundle(s.dims, s.cfg, s.rng);
    s.bundle.target = scaled(s.bundle.target, 1.3);
    auto tight = synth::batch(s.eps, 3);
    auto padded = synth::batch(s.eps, 3, tight.max_len + 5);
    Matrix y = compute_td_targets(s.bundle, tight, s.cfg, nullptr);
    Matrix yp = compute_td_targets(s.bundle, padded, s.cfg, nullptr);
    for (Index b = 0; b < y.rows(); ++b)
      for (Index t = 0; t < y.cols(); ++t)
        if (tight.filled(b, t) > 0) EXPECT_NEAR(y(b, t), yp(b, t), 1e-12);
    auto a = evaluate_losses(s.bundle.online, tight, y, s.cfg, nullptr);
    auto p = evaluate_losses(s.bundle.online, padded, yp, s.cfg, nullptr);
    EXPECT_NEAR(a.total, p.total, 1e-12);
    EXPECT_NEAR(a.rl, p.rl, 1e-12);
    EXPECT_NEAR(a.rc, p.rc, 1e-12);
    EXPECT_NEAR(a.inv, p.inv, 1e-12);
  }
}

TEST(CombinedLoss, ThetaGradientMatchesFiniteDifferences) {
  LossCase s;
  auto b = synth::batch(s.eps, 3);
  Matrix y = compute_td_targets(s.bundle, b, s.cfg, nullptr);
  auto groups = theta_groups(s.cfg);
  ParamSet g = loss_gradient(s.bundle.online, groups, b, y, s.cfg, nullptr);
  EXPECT_EQ(g.count("drn/fc1.w"), 0u);
  std::vector<std::pair<std::string, Index>> coords;
  for (const auto& [k, v] : g)
    for (Index i = 0; i < v.size(); i += 1 + v.size() / 4) coords.emplace_back(k, i);
  Vector a(static_cast<Index>(coords.size())), n(static_cast<Index>(coords.size()));
  const double h = 1e-6;
  for (std::size_t c = 0; c < coords.size(); ++c) {
    const auto& [k, i] = coords[c];
    ParamSet p = s.bundle.online;
    p.at(k).data()[i] += h;
    const double up = evaluate_losses(p, b, y, s.cfg, nullptr).total;
    p.at(k).data()[i] -= 2 * h;
    const double dn = evaluate_losses(p, b, y, s.cfg, nullptr).total;
    n(static_cast<Index>(c)) = (up - dn) / (2 * h);
    a(static_cast<Index>(c)) = g.at(k).data()[i];
  }
  EXPECT_LT(rel_error(a, n), 1e-5);
}

// ---------------- trial weights and the meta-gradient ----------------

TEST(TrialParams, Examples) {
  ParamSet theta{{"t", Matrix::Constant(1, 1, 1.0)}};
  ParamSet grad{{"t", Matrix::Constant(1, 1, 0.5)}};
  EXPECT_DOUBLE_EQ(trial_params(theta, grad, 0.1).at("t")(0, 0), 0.95);
  EXPECT_EQ(trial_params(theta, grad, 0.0).at("t")(0, 0), 1.0);
  ParamSet toy{{"t", Matrix::Constant(1, 1, 2.0)}};
  ParamSet toy_grad{{"t", Matrix::Constant(1, 1, 2.0 - 1.0)}};  // d/dtheta 1/2 (theta - phi)^2
  EXPECT_DOUBLE_EQ(trial_params(toy, toy_grad, 0.1).at("t")(0, 0), 1.9);
  EXPECT_THROW(trial_params(toy, ParamSet{}, 0.1), std::out_of_range);
}

auto toy_loss = [](auto& g, const VarMap& v) {
  return g.scale(g.sum(g.square(g.sub(v.at("theta"), v.at("phi")))), 0.5);
};

TEST(MetaGradient, AnalyticToy) {
  ParamSet theta{{"theta", Matrix::Constant(1, 1, 2.0)}};
  ParamSet phi{{"phi", Matrix::Constant(1, 1, 1.0)}};
  ParamSet grad{{"theta", Matrix::Constant(1, 1, 1.0)}};
  auto m = lookahead_meta_gradient(theta, grad, phi, 0.1, toy_loss);
  EXPECT_NEAR(m.grad.at("phi")(0, 0), -0.81, 1e-8);
  EXPECT_NEAR(m.trial_loss, 0.5 * 0.9 * 0.9, 1e-15);
  // finite differences of the composed map
  auto composed = [](double p) {
    const double th = 2.0 - 0.1 * (2.0 - p);
    return 0.5 * (th - p) * (th - p);
  };
  EXPECT_NEAR((composed(1 + 1e-6) - composed(1 - 1e-6)) / 2e-6, -0.81, 1e-8);
}

TEST(MetaGradient, ZeroStepIsDirectGradient) {
  ParamSet theta{{"theta", Matrix::Constant(1, 1, 2.0)}};
  ParamSet phi{{"phi", Matrix::Constant(1, 1, 1.0)}};
  ParamSet grad{{"theta", Matrix::Constant(1, 1, 1.0)}};
  EXPECT_DOUBLE_EQ(lookahead_meta_gradient(theta, grad, phi, 0.0, toy_loss).grad.at("phi")(0, 0), -1.0);

  LossCase s;
  auto b = synth::batch(s.eps, 3);
  Matrix y = compute_td_targets(s.bundle, b, s.cfg, nullptr);
  ParamSet gt = loss_gradient(s.bundle.online, theta_groups(s.cfg), b, y, s.cfg, nullptr);
  auto m = meta_gradient(s.bundle.online, gt, 0.0, b, y, s.cfg);
  ParamSet direct = loss_gradient(s.bundle.online, {"drn"}, b, y, s.cfg, nullptr);
  for (const auto& [k, v] : direct) EXPECT_LE((m.grad.at(k) - v).cwiseAbs().maxCoeff(), 1e-12) << k;
}

struct Instance {
  ModelDims dims;
  LearnerConfig cfg;
  double step;
};

// Composed map phi -> L(theta - step * grad_theta L(theta, phi), phi) with
// fixed TD targets.
double composed_loss(const ParamSet& online, const EpisodeBatch& b, const Matrix& y, const Instance& in) {
  auto groups = theta_groups(in.cfg);
  ParamSet g = loss_gradient(online, groups, b, y, in.cfg, nullptr);
  ParamSet trial = online;
  overwrite(trial, trial_params(select_groups(online, groups), g, in.step));
  return evaluate_losses(trial, b, y, in.cfg, nullptr).total;
}

TEST(MetaGradient, MatchesFiniteDifferencesOnTinyInstances) {
  Rng rng(2024);
  std::uniform_real_distribution<double> u(0, 1);
  int checked = 0;
  for (int inst = 0; inst < 20; ++inst) {
    Instance in;
    in.dims = {1 + inst % 3, 2 + inst % 4, 1 + inst % 3, 2 + inst % 2};
    in.cfg.mask_ratio = std::vector<double>{0.0, 0.4, 0.6}[static_cast<std::size_t>(inst % 3)];
    in.cfg.beta = 0.2 + u(rng);
    in.cfg.gamma = 0.9;
    in.cfg.exclusive_messages = in.dims.n_agents > 1 && inst % 4 == 1;
    in.cfg.inverse_loss = inst % 5 == 2 ? InverseLossKind::cross_entropy : InverseLossKind::squared_error;
    in.step = 0.05 + 0.5 * u(rng);
    ParamBundle bundle = init_bundle(in.dims, in.cfg, rng);
    for (auto& [k, v] : bundle.online) v *= 1.5;
    bundle.target = scaled(bundle.target, 0.8);
    auto eps = synth::episodes(2, in.dims.n_agents, in.dims.obs_dim, in.dims.state_dim, in.dims.n_actions, rng, 1, 3);
    auto b = synth::batch(eps, in.dims.n_actions);
    Matrix y = compute_td_targets(bundle, b, in.cfg, nullptr);
    ParamSet gt = loss_gradient(bundle.online, theta_groups(in.cfg), b, y, in.cfg, nullptr);
    MetaGradient m = meta_gradient(bundle.online, gt, in.step, b, y, in.cfg);

    // 50 random phi coordinates
    std::vector<std::pair<std::string, Index>> all;
    for (const auto& [k, v] : select_group(bundle.online, "drn"))
      for (Index i = 0; i < v.size(); ++i) all.emplace_back(k, i);
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(50);
    Vector a(50), n(50);
    const double h = 1e-6;
    for (Index c = 0; c < 50; ++c) {
      const auto& [k, i] = all[static_cast<std::size_t>(c)];
      ParamSet p = bundle.online;
      p.at(k).data()[i] += h;
      const double up = composed_loss(p, b, y, in);
      p.at(k).data()[i] -= 2 * h;
      const double dn = composed_loss(p, b, y, in);
      n(c) = (up - dn) / (2 * h);
      a(c) = m.grad.at(k).data()[i];
    }
    EXPECT_LT(rel_error(a, n), 1e-4) << "instance " << inst;
    // The second-order path matters: dropping it breaks agreement.
    ParamSet moved = bundle.online;
    overwrite(moved, trial_params(select_groups(bundle.online, theta_groups(in.cfg)), gt, in.step));
    ParamSet direct = loss_gradient(moved, {"drn"}, b, y, in.cfg, nullptr);
    Vector d(50);
    for (Index c = 0; c < 50; ++c) {
      const auto& [k, i] = all[static_cast<std::size_t>(c)];
      d(c) = direct.at(k).data()[i];
    }
    if (rel_error(d, n) > 1e-3) ++checked;
  }
  EXPECT_GE(checked, 10);
}

// ---------------- learner updates ----------------

struct UpdateCase {
  ModelDims dims{3, 5, 4, 4};
  Rng rng{11};
  std::vector<Episode> eps;
  EpisodeBatch batch;
  UpdateCase() {
    eps = synth::episodes(4, dims.n_agents, dims.obs_dim, dims.state_dim, dims.n_actions, rng, 2, 5);
    batch = synth::batch(eps, dims.n_actions);
  }
};

TEST(Update, PartitionsThetaAndPhi) {
  UpdateCase r;
  LearnerConfig c;
  Learner full(r.dims, c, 5), regular(r.dims, c, 5), meta(r.dims, c, 5);
  const ParamBundle before = full.params();
  full.update(r.batch);
  regular.regular_update(r.batch);
  meta.meta_update_drn(r.batch);
  const auto theta = theta_groups(c);
  EXPECT_TRUE(same(select_groups(full.params().online, theta), select_groups(regular.params().online, theta)));
  EXPECT_TRUE(same(select_group(full.params().online, "drn"), select_group(meta.params().online, "drn")));
  EXPECT_TRUE(same(select_group(regular.params().online, "drn"), select_group(before.online, "drn")));
  EXPECT_TRUE(same(select_groups(meta.params().online, theta), select_groups(before.online, theta)));
  EXPECT_FALSE(same(select_group(full.params().online, "drn"), select_group(before.online, "drn")));
  EXPECT_TRUE(same(full.params().target, before.target));
}

TEST(Update, ZeroLearningRatesLeaveParamsUnchanged) {
  UpdateCase r;
  LearnerConfig c;
  c.lr_theta = 0;
  c.lr_drn = 0;
  Learner l(r.dims, c, 3);
  const ParamBundle before = l.params();
  auto st = l.update(r.batch);
  EXPECT_TRUE(st.meta_applied);
  EXPECT_TRUE(same(l.params().online, before.online));
}

TEST(Update, SmallStepDecreasesLoss) {
  UpdateCase r;
  LearnerConfig c;
  c.lr_theta = 1e-5;
  c.lr_drn = 0;
  Learner l(r.dims, c, 4);
  Matrix y = compute_td_targets(l.params(), r.batch, c, nullptr);
  const double before = evaluate_losses(l.params().online, r.batch, y, c, nullptr).total;
  l.update(r.batch);
  EXPECT_LT(evaluate_losses(l.params().online, r.batch, y, c, nullptr).total, before);
}

TEST(Update, MetaStepDecreasesLookaheadLoss) {
  UpdateCase r;
  LearnerConfig c;
  Learner l(r.dims, c, 6);
  Matrix y = compute_td_targets(l.params(), r.batch, c, nullptr);
  const ParamSet& on = l.params().online;
  ParamSet gt = loss_gradient(on, theta_groups(c), r.batch, y, c, nullptr);
  MetaGradient m = meta_gradient(on, gt, c.lr_theta, r.batch, y, c);
  Instance in{r.dims, c, c.lr_theta};
  ParamSet moved = on;
  overwrite(moved, axpy(select_group(on, "drn"), -1e-4 / global_norm(m.grad), m.grad));
  EXPECT_LT(composed_loss(moved, r.batch, y, in), composed_loss(on, r.batch, y, in));
}

TEST(Update, TargetsSyncEveryInterval) {
  UpdateCase r;
  LearnerConfig c;
  c.target_interval = 200;
  c.meta_update = false;
  Learner l(r.dims, c, 8);
  l.set_updates(198);
  const ParamBundle start = l.params();
  auto s199 = l.update(r.batch);
  EXPECT_EQ(s199.update, 199);
  EXPECT_FALSE(s199.targets_synced);
  EXPECT_TRUE(same(l.params().target, start.target));
  auto s200 = l.update(r.batch);
  EXPECT_TRUE(s200.targets_synced);
  EXPECT_TRUE(same(l.params().target, select_groups(l.params().online, target_groups(c))));
  const ParamBundle synced = l.params();
  l.sync_targets();
  EXPECT_TRUE(same(l.params().target, synced.target));
  l.update(r.batch);
  EXPECT_TRUE(same(l.params().target, synced.target));
}

TEST(Update, NonFiniteRaises) {
  UpdateCase r;
  LearnerConfig c;
  Learner l(r.dims, c, 9);
  l.mutable_params().online.at("mixer/hyper_b1.b")(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(l.update(r.batch), NonFiniteError);
  Learner l2(r.dims, c, 9);
  auto bad = r.batch;
  bad.rewards(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(l2.update(bad), NonFiniteError);
}

TEST(Update, RejectsMismatchedBatch) {
  UpdateCase r;
  Learner l(ModelDims{2, 5, 4, 4}, LearnerConfig{}, 1);
  EXPECT_THROW(l.update(r.batch), ad::ShapeError);
  EXPECT_THROW(Learner(ModelDims{0, 5, 4, 4}, LearnerConfig{}, 1), std::invalid_argument);
}

TEST(Update, GroupsPerVariant) {
  LearnerConfig c;
  auto has = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };
  EXPECT_FALSE(has(theta_groups(c), "drn"));
  EXPECT_TRUE(has(theta_groups(c), "encoder"));
  EXPECT_TRUE(has(theta_groups(c), "decoder"));
  c.use_reconstruction = false;
  c.use_inverse = false;
  EXPECT_FALSE(has(theta_groups(c), "decoder"));
  EXPECT_FALSE(has(theta_groups(c), "inverse"));
  LearnerConfig q;
  q.comm = CommMode::none;
  q.use_reconstruction = q.use_inverse = q.meta_update = false;
  Rng rng(1);
  auto b = init_bundle(ModelDims{2, 3, 2, 3}, q, rng);
  EXPECT_FALSE(has_group(b.online, "drn"));
  EXPECT_FALSE(has_group(b.online, "encoder"));
  EXPECT_TRUE(has_group(b.online, "policy"));
  EXPECT_TRUE(has_group(b.online, "mixer"));
  EXPECT_EQ(b.target.size(), select_groups(b.online, target_groups(q)).size());
}

TEST(Update, RandomMaskAndNoCommVariantsTrain) {
  for (auto mode : {CommMode::random_mask, CommMode::none}) {
    UpdateCase r;
    LearnerConfig c;
    c.comm = mode;
    c.lr_theta = 1e-3;
    Learner l(r.dims, c, 2);
    double first = 0, last = 0;
    for (int i = 0; i < 60; ++i) {
      auto s = l.update(r.batch);
      EXPECT_FALSE(s.meta_applied);
      if (i == 0) first = s.loss.total;
      last = s.loss.total;
    }
    EXPECT_LT(last, first);
  }
}

TEST(Update, ExclusiveMessagesAndFreshMetaBatch) {
  UpdateCase r;
  LearnerConfig c;
  c.exclusive_messages = true;
  c.meta_fresh_batch = true;
  Learner a(r.dims, c, 3), b(r.dims, c, 3);
  auto other = synth::batch(synth::episodes(4, 3, 5, 4, 4, r.rng, 1, 3), 4);
  a.update(r.batch, &other);
  b.update(r.batch, &r.batch);
  const auto theta = theta_groups(c);
  EXPECT_TRUE(same(select_groups(a.params().online, theta), select_groups(b.params().online, theta)));
  EXPECT_FALSE(same(select_group(a.params().online, "drn"), select_group(b.params().online, "drn")));
}

TEST(Update, DeterministicGivenSeed) {
  UpdateCase r;
  LearnerConfig c;
  c.comm = CommMode::random_mask;
  Learner a(r.dims, c, 42), b(r.dims, c, 42);
  for (int i = 0; i < 3; ++i) {
    a.update(r.batch);
    b.update(r.batch);
  }
  EXPECT_TRUE(same(a.params().online, b.params().online));
}

}  // namespace
