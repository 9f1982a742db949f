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

#include "qbm/gibbs.hpp"
#include "qbm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace qbm {

/// Uhlmann-Jozsa fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2, clipped to [0, 1].
inline double fidelity(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("fidelity: dimension mismatch");
  if (!is_valid_density_matrix(a) || !is_valid_density_matrix(b)) throw std::invalid_argument("fidelity: argument is not a valid density matrix");
  const ComplexMatrix sa = matrix_sqrt_psd(a);
  const ComplexMatrix inner = sa * b * sa;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(0.5 * (inner + inner.adjoint()), Eigen::EigenvaluesOnly);
  double tr = 0.0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) tr += std::sqrt(std::max(solver.eigenvalues()(i), 0.0));
  return std::clamp(tr * tr, 0.0, 1.0);
}

/// <psi|b|psi>, the fidelity of a pure state against b.
inline double pure_state_fidelity(const StateVector& psi, const DensityMatrix& b) {
  return std::clamp(psi.dot(b * psi).real(), 0.0, 1.0);
}

struct GroundStateFidelity {
  double value = 0.0;
  int degeneracy = 1;      // ground-space dimension
  bool degenerate = false;
};

/// Fidelity between eta and the ground state of H. A degenerate ground space
/// (levels within `degeneracy_tol`) is represented by its normalized projector.
inline GroundStateFidelity ground_state_fidelity_report(const SpectralDecomposition& eig, const DensityMatrix& eta,
                                                        double degeneracy_tol = 1e-9) {
  GroundStateFidelity out;
  const RealVector& ev = eig.eigenvalues;
  while (out.degeneracy < ev.size() && ev(out.degeneracy) - ev(0) <= degeneracy_tol) ++out.degeneracy;
  out.degenerate = out.degeneracy > 1;
  if (!out.degenerate) {
    out.value = pure_state_fidelity(eig.eigenvectors.col(0), eta);
  } else {
    const ComplexMatrix basis = eig.eigenvectors.leftCols(out.degeneracy);
    const DensityMatrix proj = basis * basis.adjoint() / static_cast<double>(out.degeneracy);
    out.value = fidelity(proj, eta);
  }
  return out;
}

inline GroundStateFidelity ground_state_fidelity_report(const ComplexMatrix& h, const DensityMatrix& eta) {
  return ground_state_fidelity_report(hermitian_eig(h), eta);
}

inline double ground_state_fidelity(const ComplexMatrix& h, const DensityMatrix& eta) { return ground_state_fidelity_report(h, eta).value; }

/// Fidelities of the states a training run leaves behind against the target.
struct FidelityReport {
  double beta_vqe = 0.0;  // F(eta, rho_theta_phi)
  double qbm = 0.0;       // F(eta, sigma_w)
  double ground = 0.0;    // F(eta, psi_w^0)
  bool ground_degenerate = false;
  std::optional<double> ceiling;  // F(eta, exact rank-R truncation of eta)
};

}  // namespace qbm
