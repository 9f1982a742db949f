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

#include "qbm/linalg.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace qbm {

/// H_w = sum_r w_r H_r over a fixed, ordered list of Pauli terms.
///
/// Term order defines the meaning of weight and gradient indices. For the
/// QBM ansatz it is: X_i, Z_i for each qubit i in order, then for each pair
/// i < j in lexicographic order the triple X_iX_j, Y_iY_j, Z_iZ_j.
struct HamiltonianAnsatz {
  int n = 0;
  std::vector<PauliString> terms;
  RealVector weights;

  [[nodiscard]] std::size_t size() const { return terms.size(); }
};

inline HamiltonianAnsatz build_qbm_ansatz(int n) {
  if (n < 2) throw std::invalid_argument("build_qbm_ansatz: need n >= 2 qubits");
  HamiltonianAnsatz h;
  h.n = n;
  for (int i = 0; i < n; ++i) {
    h.terms.emplace_back(n, std::map<int, Axis>{{i, Axis::X}});
    h.terms.emplace_back(n, std::map<int, Axis>{{i, Axis::Z}});
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (Axis a : {Axis::X, Axis::Y, Axis::Z}) h.terms.emplace_back(n, std::map<int, Axis>{{i, a}, {j, a}});
  h.weights = RealVector::Zero(static_cast<Eigen::Index>(h.terms.size()));
  return h;
}

/// Open-chain XXZ model: sum_i J (X_i X_{i+1} + Y_i Y_{i+1}) + delta Z_i Z_{i+1}.
inline HamiltonianAnsatz build_xxz(int n, double j, double delta) {
  if (n < 2) throw std::invalid_argument("build_xxz: need n >= 2 qubits");
  HamiltonianAnsatz h;
  h.n = n;
  std::vector<double> w;
  for (int i = 0; i + 1 < n; ++i) {
    for (Axis a : {Axis::X, Axis::Y, Axis::Z}) {
      h.terms.emplace_back(n, std::map<int, Axis>{{i, a}, {i + 1, a}});
      w.push_back(a == Axis::Z ? delta : j);
    }
  }
  h.weights = Eigen::Map<RealVector>(w.data(), static_cast<Eigen::Index>(w.size()));
  return h;
}

/// Draws every weight i.i.d. from N(0, 1/sqrt(n)).
template <class Rng>
HamiltonianAnsatz init_weights(HamiltonianAnsatz ansatz, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(ansatz.n)));
  for (Eigen::Index r = 0; r < ansatz.weights.size(); ++r) ansatz.weights(r) = normal(rng);
  return ansatz;
}

inline ComplexMatrix dense_matrix(const HamiltonianAnsatz& h) {
  if (h.weights.size() != static_cast<Eigen::Index>(h.terms.size()))
    throw std::invalid_argument("dense_matrix: weight count does not match term count");
  const Eigen::Index dim = Eigen::Index{1} << h.n;
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  for (std::size_t r = 0; r < h.terms.size(); ++r) {
    const double w = h.weights(static_cast<Eigen::Index>(r));
    if (w == 0.0) continue;
    const PauliString& p = h.terms[r];
    for (Eigen::Index b = 0; b < dim; ++b) {
      const auto ub = static_cast<std::uint32_t>(b);
      m(ub ^ p.flip_mask(), b) += w * p.phase(ub);
    }
  }
  return m;
}

/// out = H_w psi, term by term.
inline void apply_hamiltonian(const HamiltonianAnsatz& h, const StateVector& psi, StateVector& out) {
  out = StateVector::Zero(psi.size());
  const auto dim = static_cast<std::uint32_t>(psi.size());
  for (std::size_t r = 0; r < h.terms.size(); ++r) {
    const double w = h.weights(static_cast<Eigen::Index>(r));
    if (w == 0.0) continue;
    const PauliString& p = h.terms[r];
    const std::uint32_t flip = p.flip_mask();
    for (std::uint32_t b = 0; b < dim; ++b) out(b ^ flip) += w * p.phase(b) * psi(b);
  }
}

/// Per-term expectations <psi|H_r|psi>.
inline RealVector term_expectations(const HamiltonianAnsatz& h, const StateVector& psi) {
  RealVector e(static_cast<Eigen::Index>(h.terms.size()));
  for (std::size_t r = 0; r < h.terms.size(); ++r) e(static_cast<Eigen::Index>(r)) = pauli_expectation(h.terms[r], psi);
  return e;
}

/// Per-term traces Tr(H_r rho).
inline RealVector term_traces(const HamiltonianAnsatz& h, const ComplexMatrix& rho) {
  RealVector e(static_cast<Eigen::Index>(h.terms.size()));
  for (std::size_t r = 0; r < h.terms.size(); ++r) e(static_cast<Eigen::Index>(r)) = pauli_trace(h.terms[r], rho).real();
  return e;
}

// JSON layout: {"n": 2, "terms": [[[0, "X"]], [[0, "Z"], [1, "Z"]]], "weights": [...]}
inline nlohmann::json to_json(const HamiltonianAnsatz& h) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : h.terms) {
    nlohmann::json factors = nlohmann::json::array();
    for (const auto& [q, a] : t.factors()) factors.push_back({q, std::string(1, axis_char(a))});
    terms.push_back(std::move(factors));
  }
  return {{"n", h.n}, {"terms", std::move(terms)}, {"weights", std::vector<double>(h.weights.data(), h.weights.data() + h.weights.size())}};
}

inline HamiltonianAnsatz hamiltonian_from_json(const nlohmann::json& j) {
  HamiltonianAnsatz h;
  h.n = j.at("n").get<int>();
  for (const auto& t : j.at("terms")) {
    std::map<int, Axis> factors;
    for (const auto& f : t) factors.emplace(f.at(0).get<int>(), parse_axis(f.at(1).get<std::string>()));
    h.terms.emplace_back(h.n, std::move(factors));
  }
  const auto w = j.at("weights").get<std::vector<double>>();
  if (w.size() != h.terms.size()) throw std::invalid_argument("hamiltonian_from_json: weight count does not match term count");
  h.weights = Eigen::Map<const RealVector>(w.data(), static_cast<Eigen::Index>(w.size()));
  return h;
}

}  // namespace qbm
