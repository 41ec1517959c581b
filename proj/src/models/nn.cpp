#include "models/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace m2i2 {

namespace {

Matrix uniform(Index r, Index c, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = dist(rng);
  return m;
}

const Var& lookup(const VarMap& p, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end()) throw std::out_of_range("missing parameter: " + key);
  return it->second;
}

}  // namespace

void init_linear(ParamSet& params, const std::string& name, Index in, Index out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  params[name + ".w"] = uniform(in, out, bound, rng);
  params[name + ".b"] = uniform(1, out, bound, rng);
}

void init_gru(ParamSet& params, const std::string& name, Index in, Index hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  params[name + ".wi"] = uniform(in, 3 * hidden, bound, rng);
  params[name + ".bi"] = uniform(1, 3 * hidden, bound, rng);
  params[name + ".wh"] = uniform(hidden, 3 * hidden, bound, rng);
  params[name + ".bh"] = uniform(1, 3 * hidden, bound, rng);
}

ParamSet select_group(const ParamSet& params, const std::string& group) {
  ParamSet out;
  const std::string prefix = group + "/";
  for (const auto& [k, v] : params)
    if (k.compare(0, prefix.size(), prefix) == 0) out.emplace(k, v);
  return out;
}

bool has_group(const ParamSet& params, const std::string& group) {
  const std::string prefix = group + "/";
  for (const auto& [k, v] : params)
    if (k.compare(0, prefix.size(), prefix) == 0) return true;
  return false;
}

std::size_t parameter_count(const ParamSet& params) {
  std::size_t n = 0;
  for (const auto& [k, v] : params) n += static_cast<std::size_t>(v.size());
  return n;
}

template <class M>
VarMap bind_params(Graph<M>& g, const ParamSet& params, bool trainable, const ParamSet* tangent) {
  VarMap out;
  for (const auto& [k, v] : params) {
    M value = ad::MatOps<M>::lift(v);
    if constexpr (std::is_same_v<M, DualMatrix>) {
      if (tangent != nullptr) {
        auto it = tangent->find(k);
        if (it != tangent->end()) value.d = it->second;
      }
    }
    out.emplace(k, trainable ? g.parameter(std::move(value)) : g.constant(std::move(value)));
  }
  return out;
}

template <class M>
Var linear(Graph<M>& g, const VarMap& p, const std::string& name, Var x) {
  return g.linear(x, lookup(p, name + ".w"), lookup(p, name + ".b"));
}

template <class M>
Var gru_cell(Graph<M>& g, const VarMap& p, const std::string& name, Var x, Var h) {
  const Index hidden = g.cols(h);
  Var gi = g.linear(x, lookup(p, name + ".wi"), lookup(p, name + ".bi"));
  Var gh = g.linear(h, lookup(p, name + ".wh"), lookup(p, name + ".bh"));
  Var r = g.sigmoid(g.add(g.slice_cols(gi, 0, hidden), g.slice_cols(gh, 0, hidden)));
  Var z = g.sigmoid(g.add(g.slice_cols(gi, hidden, hidden), g.slice_cols(gh, hidden, hidden)));
  Var n = g.tanh(g.add(g.slice_cols(gi, 2 * hidden, hidden), g.mul(r, g.slice_cols(gh, 2 * hidden, hidden))));
  // h' = (1 - z) * n + z * h
  return g.add(g.mul(g.one_minus(z), n), g.mul(z, h));
}

template VarMap bind_params<Matrix>(Graph<Matrix>&, const ParamSet&, bool, const ParamSet*);
template VarMap bind_params<DualMatrix>(Graph<DualMatrix>&, const ParamSet&, bool, const ParamSet*);
template Var linear<Matrix>(Graph<Matrix>&, const VarMap&, const std::string&, Var);
template Var linear<DualMatrix>(Graph<DualMatrix>&, const VarMap&, const std::string&, Var);
template Var gru_cell<Matrix>(Graph<Matrix>&, const VarMap&, const std::string&, Var, Var);
template Var gru_cell<DualMatrix>(Graph<DualMatrix>&, const VarMap&, const std::string&, Var, Var);

}  // namespace m2i2
