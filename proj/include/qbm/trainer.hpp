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

/// QBM training: descent on S(eta || sigma_w) with sigma_w = exp(-H_w) / Z.
///
/// dS/dw_r = Tr(H_r eta) - Tr(H_r sigma_w). The model statistics come from
/// one of three sources: the exact Gibbs state, a warm-started truncated-rank
/// beta-VQE fit (the nested loop), or the exact ground state of H_w.

#include "qbm/betavqe.hpp"
#include "qbm/gibbs.hpp"
#include "qbm/hamiltonian.hpp"
#include "qbm/linalg.hpp"
#include "qbm/metrics.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace qbm {

inline constexpr double kInfiniteEntropy = std::numeric_limits<double>::infinity();

/// Tr(rho log rho) with 0 log 0 = 0.
inline double neg_entropy(const DensityMatrix& rho) {
  const auto eig = hermitian_eig(rho);
  double s = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
    const double p = eig.eigenvalues(i);
    if (p > kLogSupportCutoff) s += p * std::log(p);
  }
  return s;
}

/// S(eta || sigma) = Tr(eta log eta) - Tr(eta log sigma). Returns +infinity
/// when eta has weight (> 1e-10) outside the support of sigma.
inline double relative_entropy(const DensityMatrix& eta, const DensityMatrix& sigma) {
  if (eta.rows() != sigma.rows() || eta.cols() != sigma.cols()) throw std::invalid_argument("relative_entropy: dimension mismatch");
  const auto eig = hermitian_eig(sigma);
  double cross = 0.0;  // Tr(eta log sigma)
  for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
    const auto v = eig.eigenvectors.col(i);
    const double weight = v.dot(eta * v).real();
    const double lam = eig.eigenvalues(i);
    if (lam <= kLogSupportCutoff) {
      if (weight > 1e-10) return kInfiniteEntropy;
      continue;
    }
    cross += weight * std::log(lam);
  }
  return std::max(neg_entropy(eta) - cross, 0.0);
}

/// Tr(H_r eta) per term.
inline RealVector target_statistics(const DensityMatrix& eta, const HamiltonianAnsatz& h) {
  if (eta.rows() != (Eigen::Index{1} << h.n)) throw std::invalid_argument("target_statistics: dimension mismatch");
  return term_traces(h, eta);
}

/// Shot estimate of Tr(H_r eta): the +-1 outcome of measuring Pauli H_r has
/// P(+1) = (1 + Tr(H_r eta)) / 2, drawn `shots` times per term.
template <class Rng>
RealVector target_statistics_sampled(const DensityMatrix& eta, const HamiltonianAnsatz& h, long shots, Rng& rng) {
  const RealVector exact = target_statistics(eta, h);
  RealVector out(exact.size());
  for (Eigen::Index r = 0; r < exact.size(); ++r)
    out(r) = h.terms[static_cast<std::size_t>(r)].is_identity() ? 1.0 : sample_pauli_mean(std::clamp(0.5 * (1.0 + exact(r)), 0.0, 1.0), shots, rng);
  return out;
}

inline RealVector qbm_gradient(const RealVector& target_stats, const RealVector& model_stats) {
  if (target_stats.size() != model_stats.size()) throw std::invalid_argument("qbm_gradient: length mismatch");
  return target_stats - model_stats;
}

/// Mean absolute componentwise difference.
inline double gradient_error(const RealVector& approx, const RealVector& exact) {
  if (approx.size() != exact.size()) throw std::invalid_argument("gradient_error: length mismatch");
  if (approx.size() == 0) return 0.0;
  return (approx - exact).cwiseAbs().mean();
}

/// Fidelity against a fixed target, with sqrt(eta) computed once.
class FidelityOracle {
 public:
  explicit FidelityOracle(const DensityMatrix& eta) : eta_(eta) {
    const auto eig = hermitian_eig(eta);
    const Eigen::Index d = eta.rows();
    if (eig.eigenvalues(d - 1) > 1.0 - 1e-10) {
      pure_ = eig.eigenvectors.col(d - 1);
    } else {
      sqrt_eta_ = apply_spectral(eig, [](double x) { return std::sqrt(std::max(x, 0.0)); });
    }
  }

  [[nodiscard]] double operator()(const DensityMatrix& rho) const {
    if (pure_) return pure_state_fidelity(*pure_, rho);
    const ComplexMatrix inner = sqrt_eta_ * rho * sqrt_eta_;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(0.5 * (inner + inner.adjoint()), Eigen::EigenvaluesOnly);
    double tr = 0.0;
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) tr += std::sqrt(std::max(solver.eigenvalues()(i), 0.0));
    return std::clamp(tr * tr, 0.0, 1.0);
  }

  [[nodiscard]] const DensityMatrix& target() const { return eta_; }

 private:
  DensityMatrix eta_;
  std::optional<StateVector> pure_;
  ComplexMatrix sqrt_eta_;
};

// ---------------------------------------------------------------------------

enum class StatisticsSource { ExactGibbs, BetaVqe, Rank1GroundState };

inline std::string to_string(StatisticsSource s) {
  switch (s) {
    case StatisticsSource::ExactGibbs: return "exact-gibbs";
    case StatisticsSource::BetaVqe: return "beta-vqe";
    case StatisticsSource::Rank1GroundState: return "rank1-ground-state";
  }
  return "?";
}

inline StatisticsSource parse_statistics_source(const std::string& s) {
  if (s == "exact-gibbs") return StatisticsSource::ExactGibbs;
  if (s == "beta-vqe") return StatisticsSource::BetaVqe;
  if (s == "rank1-ground-state") return StatisticsSource::Rank1GroundState;
  throw std::invalid_argument("unknown statistics source '" + s + "'");
}

/// Which objective drives the learning-rate rule.
enum class LrSignal {
  Auto,       // exact S for the exact-Gibbs source, the surrogate otherwise
  Exact,      // S(eta || sigma_w) from the Gibbs oracle
  Surrogate,  // Tr(eta log eta) + Tr(eta H_w) - F(rho*)
};

struct OuterLoopConfig {
  int max_iters = 500;
  double momentum = 0.5;
  double learning_rate = 0.05;
  double lr_increase = 1.01;
  double lr_decrease = 0.5;
  bool adaptive_lr = true;
  LrSignal lr_signal = LrSignal::Auto;
  double grad_tolerance = 1e-4;  // on the max-norm
  StatisticsSource source = StatisticsSource::BetaVqe;
  InnerLoopConfig inner;
  long shots = 0;                // data and model statistics; 0 = exact
  std::uint64_t seed = 0;
  int oracle_max_qubits = 10;    // exact S, gradient error and fidelities up to this size
  int spectral_gap_count = 0;    // record the first k gaps of H_w per iteration
  bool record_wall_time = false;
  std::string checkpoint_path;   // rewritten after every iteration when set

  void validate() const {
    if (max_iters < 0) throw std::invalid_argument("OuterLoopConfig: max_iters must be >= 0");
    if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("OuterLoopConfig: momentum must lie in [0, 1)");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("OuterLoopConfig: learning_rate must be > 0");
    if (shots < 0) throw std::invalid_argument("OuterLoopConfig: shots must be >= 0");
    inner.validate();
  }
};

struct TraceRow {
  int iteration = 0;
  double relative_entropy = NAN;  // exact S(eta || sigma_w) when the oracle runs
  double surrogate = NAN;         // free-energy surrogate (beta-VQE source)
  double objective = NAN;         // the value the learning-rate rule saw
  double grad_norm = 0.0;         // max-norm of the gradient used
  double grad_error = NAN;        // vs the exact Gibbs gradient
  double exact_grad_norm = NAN;   // mean |exact gradient|
  double fidelity = NAN;          // F(eta, sigma_w)
  double gs_fidelity = NAN;       // F(eta, ground state of H_w)
  double vqe_fidelity = NAN;      // F(eta, rho_theta_phi)
  int inner_iters = 0;
  bool inner_converged = true;
  double learning_rate = 0.0;
  double wall_ms = 0.0;
  std::vector<double> gaps;
};

struct TrainTrace {
  std::vector<TraceRow> rows;
  long long statistic_estimations = 0;  // sum over outer iterations of inner_iters * R * n_theta
  bool converged = false;
};

struct OuterLoopState {
  HamiltonianAnsatz model;
  RealVector velocity;
  double learning_rate = 0.0;
  int iteration = 0;
  double previous_objective = NAN;  // learning-rate rule reference
  std::optional<BetaVqeState> vqe;
};

struct TrainResult {
  HamiltonianAnsatz model;
  std::optional<BetaVqeState> vqe;
  TrainTrace trace;
  RealVector velocity;
  double learning_rate = 0.0;
};

inline std::uint64_t child_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline nlohmann::json checkpoint_json(const OuterLoopState& st, const OuterLoopConfig& cfg) {
  nlohmann::json j = {{"iteration", st.iteration},
                      {"learning_rate", st.learning_rate},
                      {"previous_objective", std::isnan(st.previous_objective) ? nlohmann::json(nullptr) : nlohmann::json(st.previous_objective)},
                      {"velocity", std::vector<double>(st.velocity.data(), st.velocity.data() + st.velocity.size())},
                      {"hamiltonian", to_json(st.model)},
                      {"rng", {{"seed", cfg.seed}, {"stream", st.iteration}}}};
  if (st.vqe) j["beta_vqe"] = to_json(*st.vqe);
  return j;
}

inline OuterLoopState outer_state_from_checkpoint(const nlohmann::json& j) {
  OuterLoopState st;
  st.iteration = j.at("iteration").get<int>();
  st.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("previous_objective") && !j.at("previous_objective").is_null()) st.previous_objective = j.at("previous_objective").get<double>();
  const auto v = j.at("velocity").get<std::vector<double>>();
  st.velocity = Eigen::Map<const RealVector>(v.data(), static_cast<Eigen::Index>(v.size()));
  st.model = hamiltonian_from_json(j.at("hamiltonian"));
  if (j.contains("beta_vqe")) st.vqe = beta_vqe_state_from_json(j.at("beta_vqe"));
  return st;
}

/// Runs (or resumes) the outer loop from `state`. For the beta-VQE source
/// `state.vqe` must hold the initial (or warm-start) ansatz.
inline TrainResult outer_loop(const DensityMatrix& target, OuterLoopState state, const OuterLoopConfig& cfg) {
  cfg.validate();
  HamiltonianAnsatz& model = state.model;
  const int n = model.n;
  const Eigen::Index num_terms = static_cast<Eigen::Index>(model.size());
  if (target.rows() != (Eigen::Index{1} << n)) throw std::invalid_argument("outer_loop: target dimension does not match the Hamiltonian");
  if (cfg.source == StatisticsSource::BetaVqe) {
    if (!state.vqe) throw std::invalid_argument("outer_loop: beta-VQE source needs an initial beta-VQE state");
    if (state.vqe->num_qubits() != n) throw std::invalid_argument("outer_loop: beta-VQE state has the wrong qubit count");
  }
  if (state.velocity.size() != num_terms) state.velocity = RealVector::Zero(num_terms);
  if (!(state.learning_rate > 0.0)) state.learning_rate = cfg.learning_rate;

  const bool oracle = n <= cfg.oracle_max_qubits;
  const RealVector exact_target_stats = target_statistics(target, model);
  std::mt19937_64 data_rng(child_seed(cfg.seed, 0xDA7A));
  // Data statistics are measured once.
  const RealVector target_stats = cfg.shots > 0 ? target_statistics_sampled(target, model, cfg.shots, data_rng) : exact_target_stats;
  const double target_neg_entropy = neg_entropy(target);
  std::optional<FidelityOracle> fid;
  if (oracle) fid.emplace(target);

  const LrSignal signal = cfg.lr_signal != LrSignal::Auto
                              ? cfg.lr_signal
                              : (cfg.source != StatisticsSource::ExactGibbs || !oracle ? LrSignal::Surrogate : LrSignal::Exact);
  if (signal == LrSignal::Exact && !oracle) throw std::invalid_argument("outer_loop: exact learning-rate signal needs the Gibbs oracle");

  TrainResult result;
  double& previous_objective = state.previous_objective;
  const int start = state.iteration;
  for (int it = start; it < start + cfg.max_iters; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    TraceRow row;
    row.iteration = it;

    // Exact spectral data of H_w whenever any consumer needs it.
    const bool need_spectrum = oracle || cfg.source != StatisticsSource::BetaVqe || cfg.spectral_gap_count > 0;
    std::optional<ThermalState> thermal;
    if (need_spectrum) thermal = thermal_state(dense_matrix(model), 1.0);

    RealVector model_stats;
    std::mt19937_64 stats_rng(child_seed(cfg.seed, static_cast<std::uint64_t>(2 * it + 1)));
    switch (cfg.source) {
      case StatisticsSource::ExactGibbs: model_stats = term_traces(model, thermal->rho); break;
      case StatisticsSource::Rank1GroundState:
        model_stats = term_expectations(model, thermal->spectrum.eigenvectors.col(0));
        // The ground state is the rank-one free-energy minimiser, F = E_0.
        row.surrogate = target_neg_entropy + target_stats.dot(model.weights) - thermal->spectrum.eigenvalues(0);
        break;
      case StatisticsSource::BetaVqe: {
        InnerLoopConfig icfg = cfg.inner;
        icfg.seed = child_seed(cfg.seed, static_cast<std::uint64_t>(2 * it + 2));
        auto [vqe, report] = inner_loop(std::move(*state.vqe), model, icfg);
        state.vqe = std::move(vqe);
        row.inner_iters = report.iterations;
        row.inner_converged = report.converged;
        result.trace.statistic_estimations +=
            static_cast<long long>(report.iterations) * state.vqe->rank * static_cast<long long>(state.vqe->circuit.size());
        model_stats = cfg.shots > 0 ? model_statistics_sampled(*state.vqe, model, cfg.shots, stats_rng) : model_statistics_exact(*state.vqe, model);
        row.surrogate = target_neg_entropy + target_stats.dot(model.weights) - report.final_free_energy;
        if (oracle) row.vqe_fidelity = (*fid)(density_matrix(*state.vqe));
        break;
      }
    }

    const RealVector grad = qbm_gradient(target_stats, model_stats);
    row.grad_norm = grad.cwiseAbs().maxCoeff();
    if (oracle) {
      row.relative_entropy = std::max(target_neg_entropy + exact_target_stats.dot(model.weights) + thermal->log_partition, 0.0);
      const RealVector exact_grad = qbm_gradient(exact_target_stats, term_traces(model, thermal->rho));
      row.grad_error = gradient_error(grad, exact_grad);
      row.exact_grad_norm = exact_grad.cwiseAbs().mean();
      row.fidelity = (*fid)(thermal->rho);
      row.gs_fidelity = ground_state_fidelity_report(thermal->spectrum, target).value;
    }
    if (cfg.spectral_gap_count > 0) row.gaps = spectral_gaps(thermal->spectrum.eigenvalues, std::min<int>(cfg.spectral_gap_count, static_cast<int>(thermal->spectrum.eigenvalues.size()) - 1));
    row.objective = signal == LrSignal::Exact ? row.relative_entropy : row.surrogate;
    if (std::isnan(row.objective) && signal == LrSignal::Surrogate && cfg.source != StatisticsSource::BetaVqe) row.objective = row.relative_entropy;
    // An unconverged inner loop biases the surrogate by its free-energy gap;
    // the learning rate is then left alone rather than adapted on that bias.
    if (signal == LrSignal::Surrogate && cfg.source == StatisticsSource::BetaVqe && !row.inner_converged) row.objective = NAN;

    const bool done = row.grad_norm <= cfg.grad_tolerance;
    if (!done) {
      if (cfg.adaptive_lr && !std::isnan(previous_objective) && !std::isnan(row.objective))
        state.learning_rate *= row.objective < previous_objective ? cfg.lr_increase : cfg.lr_decrease;
      state.velocity = cfg.momentum * state.velocity - state.learning_rate * grad;
      model.weights += state.velocity;
    }
    previous_objective = row.objective;
    row.learning_rate = state.learning_rate;
    if (cfg.record_wall_time) row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.trace.rows.push_back(std::move(row));
    state.iteration = it + 1;

    if (!cfg.checkpoint_path.empty()) {
      std::ofstream out(cfg.checkpoint_path);
      out << checkpoint_json(state, cfg).dump(1) << '\n';
    }
    if (done) {
      result.trace.converged = true;
      break;
    }
  }
  result.model = std::move(state.model);
  result.vqe = std::move(state.vqe);
  result.velocity = std::move(state.velocity);
  result.learning_rate = state.learning_rate;
  return result;
}

/// Fresh run: zero velocity, initial learning rate from the config.
inline TrainResult outer_loop(const DensityMatrix& target, const HamiltonianAnsatz& ansatz, const OuterLoopConfig& cfg,
                              std::optional<BetaVqeState> initial_vqe = std::nullopt) {
  OuterLoopState st;
  st.model = ansatz;
  st.learning_rate = cfg.learning_rate;
  st.vqe = std::move(initial_vqe);
  return outer_loop(target, std::move(st), cfg);
}

// ---------------------------------------------------------------------------
// CSV output

namespace detail {
inline std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}
}  // namespace detail

/// iteration,S_or_surrogate,grad_norm,grad_error,fidelity,gs_fidelity,inner_iters,lr,wall_ms
inline void write_trace_csv(std::ostream& out, const TrainTrace& trace) {
  using detail::fmt_num;
  out << "iteration,S_or_surrogate,grad_norm,grad_error,fidelity,gs_fidelity,inner_iters,lr,wall_ms\n";
  for (const auto& r : trace.rows) {
    const double s = std::isnan(r.relative_entropy) ? r.surrogate : r.relative_entropy;
    out << r.iteration << ',' << fmt_num(s) << ',' << fmt_num(r.grad_norm) << ',' << fmt_num(r.grad_error) << ',' << fmt_num(r.fidelity)
        << ',' << fmt_num(r.gs_fidelity) << ',' << r.inner_iters << ',' << fmt_num(r.learning_rate) << ',' << fmt_num(r.wall_ms) << '\n';
  }
}

}  // namespace qbm
