// Copyright 2026 The qbm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

/// Truncated-rank beta-VQE: rho = sum_j q_j U|s_j><s_j|U^dagger over the R most
/// probable strings s_j of p_phi, with q the renormalized probabilities.
///
/// Because the states U|s_j> are orthonormal, the free energy reduces to
/// F = sum_j q_j (log q_j + <s_j|U^dagger H U|s_j>), and both gradients are
/// sums over the R support states.

#include "qbm/circuit.hpp"
#include "qbm/classical_dist.hpp"
#include "qbm/hamiltonian.hpp"
#include "qbm/linalg.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace qbm {

/// Adam moment estimates over the concatenated (theta, phi) vector.
struct AdamMoments {
  RealVector first;
  RealVector second;
  long steps = 0;
};

struct BetaVqeState {
  CircuitAnsatz circuit;
  ClassicalDistribution dist;
  int rank = 1;
  AdamMoments moments;

  void validate() const {
    if (rank < 1) throw std::invalid_argument("BetaVqeState: rank must be >= 1");
    if (circuit.num_qubits() != dist.num_qubits()) throw std::invalid_argument("BetaVqeState: circuit and distribution qubit counts differ");
    if (static_cast<std::uint64_t>(rank) > (std::uint64_t{1} << circuit.num_qubits())) throw std::invalid_argument("BetaVqeState: rank exceeds 2^n");
  }
  [[nodiscard]] int num_qubits() const { return circuit.num_qubits(); }
  [[nodiscard]] Eigen::Index num_params() const { return circuit.size() + dist.num_params(); }
};

enum class DistributionKind { Bernoulli, Autoregressive };

/// Fresh state: theta ~ N(0, theta_stddev), autoregressive weights ~ N(0, 0.01).
template <class Rng>
BetaVqeState make_beta_vqe_state(int n, int depth, int rank, Rng& rng, DistributionKind kind = DistributionKind::Autoregressive,
                                 double theta_stddev = 0.1) {
  BetaVqeState st;
  st.circuit = CircuitAnsatz::random(n, depth, rng, theta_stddev);
  if (kind == DistributionKind::Autoregressive)
    st.dist = AutoregressiveNet::random(n, rng);
  else
    st.dist = BernoulliProduct(n);
  st.rank = rank;
  st.validate();
  return st;
}

/// Everything one pass over the support produces.
struct VqeEvaluation {
  TopStates support;
  std::vector<double> energies;  // <s_j|U^dagger H U|s_j>, exact or shot-estimated
  double free_energy = 0.0;
  RealVector grad_theta;
  RealVector grad_phi;

  [[nodiscard]] double grad_max_norm() const {
    double g = 0.0;
    if (grad_theta.size() > 0) g = std::max(g, grad_theta.cwiseAbs().maxCoeff());
    if (grad_phi.size() > 0) g = std::max(g, grad_phi.cwiseAbs().maxCoeff());
    return g;
  }
};

namespace detail {
inline RealVector score_gradient(const BetaVqeState& st, const TopStates& support, const std::vector<double>& energies) {
  const std::size_t r = support.states.size();
  std::vector<double> f(r);
  double baseline = 0.0;
  for (std::size_t j = 0; j < r; ++j) {
    f[j] = std::log(support.probs[j]) + energies[j];
    baseline += support.probs[j] * f[j];
  }
  std::vector<RealVector> scores(r);
  RealVector mean_score = RealVector::Zero(st.dist.num_params());
  for (std::size_t j = 0; j < r; ++j) {
    scores[j] = st.dist.grad_log_prob_bits(support.states[j].value());
    mean_score += support.probs[j] * scores[j];
  }
  // grad log q_j = grad log p_j - sum_k q_k grad log p_k for the renormalized q.
  RealVector g = RealVector::Zero(st.dist.num_params());
  for (std::size_t j = 0; j < r; ++j) g += support.probs[j] * (f[j] - baseline) * (scores[j] - mean_score);
  return g;
}

inline double free_energy_from(const TopStates& support, const std::vector<double>& energies) {
  double fe = 0.0;
  for (std::size_t j = 0; j < support.states.size(); ++j) fe += support.probs[j] * (std::log(support.probs[j]) + energies[j]);
  return fe;
}
}  // namespace detail

/// Exact (statevector) evaluation; theta gradient by adjoint sweep.
inline VqeEvaluation evaluate_exact(const BetaVqeState& st, const HamiltonianAnsatz& h, bool with_gradients = true) {
  if (h.n != st.num_qubits()) throw std::invalid_argument("beta-VQE: Hamiltonian and state qubit counts differ");
  VqeEvaluation ev;
  ev.support = top_r_states(st.dist, st.rank);
  const std::size_t r = ev.support.states.size();
  ev.energies.resize(r);
  if (with_gradients) {
    const auto eg = energy_gradient_adjoint_batch(st.circuit, ev.support.states, ev.support.probs, h);
    ev.energies = eg.energies;
    ev.grad_theta = eg.grad;
  } else {
    const StateBatch phi = apply_circuit_batch(st.circuit, ev.support.states);
    StateBatch hphi;
    batch::apply_hamiltonian(h, phi, hphi);
    for (std::size_t j = 0; j < r; ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      ev.energies[j] = phi.col(col).dot(hphi.col(col)).real();
    }
  }
  ev.free_energy = detail::free_energy_from(ev.support, ev.energies);
  if (with_gradients) ev.grad_phi = detail::score_gradient(st, ev.support, ev.energies);
  return ev;
}

/// Shot-based evaluation: every expectation value from `shots` measurements
/// per Pauli term; theta gradient by the sampled shift rule.
template <class Rng>
VqeEvaluation evaluate_sampled(const BetaVqeState& st, const HamiltonianAnsatz& h, long shots, Rng& rng, bool with_gradients = true) {
  if (h.n != st.num_qubits()) throw std::invalid_argument("beta-VQE: Hamiltonian and state qubit counts differ");
  VqeEvaluation ev;
  ev.support = top_r_states(st.dist, st.rank);
  const std::size_t r = ev.support.states.size();
  ev.energies.resize(r);
  if (with_gradients) ev.grad_theta = RealVector::Zero(st.circuit.size());
  for (std::size_t j = 0; j < r; ++j) {
    ev.energies[j] = expval_sampled(st.circuit, ev.support.states[j], h, shots, rng);
    if (with_gradients) ev.grad_theta += ev.support.probs[j] * param_shift_grad_sampled(st.circuit, ev.support.states[j], h, shots, rng);
  }
  ev.free_energy = detail::free_energy_from(ev.support, ev.energies);
  if (with_gradients) ev.grad_phi = detail::score_gradient(st, ev.support, ev.energies);
  return ev;
}

inline DensityMatrix density_matrix(const BetaVqeState& st) {
  st.validate();
  const auto support = top_r_states(st.dist, st.rank);
  const StateBatch phi = apply_circuit_batch(st.circuit, support.states);
  ComplexMatrix weighted = phi;
  for (std::size_t j = 0; j < support.states.size(); ++j) weighted.col(static_cast<Eigen::Index>(j)) *= support.probs[j];
  return weighted * phi.adjoint();
}

inline double free_energy(const BetaVqeState& st, const HamiltonianAnsatz& h) { return evaluate_exact(st, h, false).free_energy; }

/// Sum_j q_j grad_theta <s_j|U^dagger H U|s_j>. With shots > 0 every
/// expectation comes from the sampled shift rule.
template <class Rng>
RealVector grad_theta(const BetaVqeState& st, const HamiltonianAnsatz& h, long shots, Rng& rng) {
  if (shots <= 0) {
    const auto support = top_r_states(st.dist, st.rank);
    RealVector g = RealVector::Zero(st.circuit.size());
    for (std::size_t j = 0; j < support.states.size(); ++j) g += support.probs[j] * param_shift_grad(st.circuit, support.states[j], h);
    return g;
  }
  return evaluate_sampled(st, h, shots, rng).grad_theta;
}

/// Score-function gradient with baseline b = sum_j q_j f(s_j).
template <class Rng>
RealVector grad_phi(const BetaVqeState& st, const HamiltonianAnsatz& h, long shots, Rng& rng) {
  if (shots <= 0) return evaluate_exact(st, h).grad_phi;
  return evaluate_sampled(st, h, shots, rng).grad_phi;
}

/// sum_j q_j <psi_j|H_r|psi_j> for every term r.
inline RealVector model_statistics_exact(const BetaVqeState& st, const HamiltonianAnsatz& h) {
  const auto support = top_r_states(st.dist, st.rank);
  RealVector stats = RealVector::Zero(static_cast<Eigen::Index>(h.size()));
  for (std::size_t j = 0; j < support.states.size(); ++j)
    stats += support.probs[j] * term_expectations(h, apply_circuit(st.circuit, support.states[j]));
  return stats;
}

template <class Rng>
RealVector model_statistics_sampled(const BetaVqeState& st, const HamiltonianAnsatz& h, long shots, Rng& rng) {
  const auto support = top_r_states(st.dist, st.rank);
  RealVector stats = RealVector::Zero(static_cast<Eigen::Index>(h.size()));
  for (std::size_t j = 0; j < support.states.size(); ++j)
    stats += support.probs[j] * sample_term_expectations(h, apply_circuit(st.circuit, support.states[j]), shots, rng);
  return stats;
}

// ---------------------------------------------------------------------------
// Inner loop

struct InnerLoopConfig {
  double grad_tolerance = 1e-3;  // on the joint max-norm
  int max_iters = 2000;
  double step_size = 0.01;       // theta
  double phi_step_size = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  long shots = 0;                // 0 = exact statevector
  std::uint64_t seed = 0;
  bool reset_moments = false;    // discard Adam moments carried by a warm start
  bool keep_trace = false;

  void validate() const {
    if (max_iters < 1) throw std::invalid_argument("InnerLoopConfig: max_iters must be >= 1");
    if (!(grad_tolerance > 0.0)) throw std::invalid_argument("InnerLoopConfig: grad_tolerance must be > 0");
    if (shots < 0) throw std::invalid_argument("InnerLoopConfig: shots must be >= 0");
  }
};

struct InnerLoopReport {
  int iterations = 0;  // parameter updates applied
  double initial_free_energy = 0.0;
  double final_free_energy = 0.0;
  double final_grad_norm = 0.0;
  bool converged = false;
  std::vector<double> free_energy_trace;
  std::vector<double> grad_norm_trace;
};

namespace detail {
inline void adam_step(BetaVqeState& st, const VqeEvaluation& ev, const InnerLoopConfig& cfg) {
  const Eigen::Index nt = st.circuit.size();
  const Eigen::Index np = st.dist.num_params();
  AdamMoments& mo = st.moments;
  if (mo.first.size() != nt + np) {
    mo.first = RealVector::Zero(nt + np);
    mo.second = RealVector::Zero(nt + np);
    mo.steps = 0;
  }
  RealVector g(nt + np);
  g << ev.grad_theta, ev.grad_phi;
  ++mo.steps;
  mo.first = cfg.beta1 * mo.first + (1.0 - cfg.beta1) * g;
  mo.second = cfg.beta2 * mo.second + (1.0 - cfg.beta2) * g.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(mo.steps));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(mo.steps));
  const RealVector step = (mo.first / c1).array() / ((mo.second / c2).array().sqrt() + cfg.adam_epsilon);
  RealVector theta = st.circuit.theta() - cfg.step_size * step.head(nt);
  st.circuit.set_theta(std::move(theta));
  st.dist.set_params(st.dist.params() - cfg.phi_step_size * step.tail(np));
}
}  // namespace detail

/// Joint Adam descent on (theta, phi) until the gradient max-norm drops to
/// the tolerance or max_iters updates have been applied. In exact mode the
/// lowest-free-energy iterate seen is returned; with shots the last one is.
inline std::pair<BetaVqeState, InnerLoopReport> inner_loop(BetaVqeState state, const HamiltonianAnsatz& h, const InnerLoopConfig& cfg) {
  cfg.validate();
  state.validate();
  if (cfg.reset_moments) state.moments = {};
  std::mt19937_64 rng(cfg.seed);
  auto eval = [&](const BetaVqeState& st) { return cfg.shots > 0 ? evaluate_sampled(st, h, cfg.shots, rng) : evaluate_exact(st, h); };

  InnerLoopReport rep;
  VqeEvaluation ev = eval(state);
  rep.initial_free_energy = ev.free_energy;
  BetaVqeState best = state;
  double best_fe = ev.free_energy;
  double best_gn = ev.grad_max_norm();

  for (;;) {
    const double gn = ev.grad_max_norm();
    if (cfg.keep_trace) {
      rep.free_energy_trace.push_back(ev.free_energy);
      rep.grad_norm_trace.push_back(gn);
    }
    if (cfg.shots == 0 && ev.free_energy < best_fe) {
      best = state;
      best_fe = ev.free_energy;
      best_gn = gn;
    }
    if (gn <= cfg.grad_tolerance) {
      rep.converged = true;
      if (ev.free_energy <= best_fe + 1e-8) {
        best = state;
        best_fe = ev.free_energy;
        best_gn = gn;
      }
      break;
    }
    if (rep.iterations >= cfg.max_iters) break;
    detail::adam_step(state, ev, cfg);
    ++rep.iterations;
    ev = eval(state);
  }
  if (cfg.shots > 0) {
    best = std::move(state);
    best_fe = ev.free_energy;
    best_gn = ev.grad_max_norm();
  } else {
    best.moments = state.moments;
  }
  rep.final_free_energy = best_fe;
  rep.final_grad_norm = best_gn;
  return {std::move(best), rep};
}

// ---------------------------------------------------------------------------
// Checkpointing

inline nlohmann::json to_json(const BetaVqeState& st) {
  const RealVector& t = st.circuit.theta();
  nlohmann::json j = {{"n", st.num_qubits()},
                      {"depth", st.circuit.depth()},
                      {"rank", st.rank},
                      {"theta", std::vector<double>(t.data(), t.data() + t.size())},
                      {"dist", to_json(st.dist)}};
  if (st.moments.steps > 0) {
    const auto& m = st.moments;
    j["adam"] = {{"steps", m.steps},
                 {"first", std::vector<double>(m.first.data(), m.first.data() + m.first.size())},
                 {"second", std::vector<double>(m.second.data(), m.second.data() + m.second.size())}};
  }
  return j;
}

inline BetaVqeState beta_vqe_state_from_json(const nlohmann::json& j) {
  BetaVqeState st;
  const auto theta = j.at("theta").get<std::vector<double>>();
  st.circuit = CircuitAnsatz(j.at("n").get<int>(), j.at("depth").get<int>(),
                             Eigen::Map<const RealVector>(theta.data(), static_cast<Eigen::Index>(theta.size())));
  st.dist = distribution_from_json(j.at("dist"));
  st.rank = j.at("rank").get<int>();
  if (j.contains("adam")) {
    const auto& a = j.at("adam");
    const auto f = a.at("first").get<std::vector<double>>();
    const auto s = a.at("second").get<std::vector<double>>();
    st.moments.steps = a.at("steps").get<long>();
    st.moments.first = Eigen::Map<const RealVector>(f.data(), static_cast<Eigen::Index>(f.size()));
    st.moments.second = Eigen::Map<const RealVector>(s.data(), static_cast<Eigen::Index>(s.size()));
  }
  st.validate();
  return st;
}

}  // namespace qbm
