#pragma once

#include "autodiff/graph.hpp"

#include <map>
#include <random>
#include <string>

namespace m2i2 {

using ad::DualMatrix;
using ad::Graph;
using ad::Index;
using ad::Matrix;
using ad::Var;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

// Named parameter tensors. Names are qualified by group, e.g. "policy/fc1.w".
using ParamSet = std::map<std::string, Matrix>;
using VarMap = std::map<std::string, Var>;

inline constexpr Index kHidden = 32;
inline constexpr Index kKeyDim = 16;
inline constexpr Index kInverseHidden = 64;
inline constexpr Index kMixHidden = 32;
inline constexpr Index kZPerAgent = 8;

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weight and bias.
void init_linear(ParamSet& params, const std::string& name, Index in, Index out, Rng& rng);
// Gated recurrent cell with stacked gates (reset, update, candidate).
void init_gru(ParamSet& params, const std::string& name, Index in, Index hidden, Rng& rng);

ParamSet select_group(const ParamSet& params, const std::string& group);
bool has_group(const ParamSet& params, const std::string& group);
std::size_t parameter_count(const ParamSet& params);

// Registers every tensor of `params` in the graph. Trainable tensors become
// leaves; `tangent` (DualMatrix graphs only) seeds the directional derivative.
template <class M>
VarMap bind_params(Graph<M>& g, const ParamSet& params, bool trainable, const ParamSet* tangent = nullptr);

template <class M>
Var linear(Graph<M>& g, const VarMap& p, const std::string& name, Var x);

template <class M>
Var gru_cell(Graph<M>& g, const VarMap& p, const std::string& name, Var x, Var h);

}  // namespace m2i2
