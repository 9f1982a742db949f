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

/// Exact thermal-state oracle: Gibbs states, spectral gaps and fixed-rank
/// truncations, all by full diagonalization.

#include "qbm/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace qbm {

/// Gibbs state together with the spectral data it was built from.
struct ThermalState {
  DensityMatrix rho;
  SpectralDecomposition spectrum;  // of H
  double log_partition = 0.0;      // log Tr exp(-beta H)
};

inline ThermalState thermal_state(const ComplexMatrix& h, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("gibbs_state: beta must be positive");
  ThermalState out;
  out.spectrum = hermitian_eig(h);
  const RealVector& ev = out.spectrum.eigenvalues;
  const double e0 = ev(0);
  // Shifted by the ground energy so the largest exponent is exp(0).
  RealVector boltz = (-beta * (ev.array() - e0)).exp();
  const double z = boltz.sum();
  boltz /= z;
  out.rho = out.spectrum.eigenvectors * boltz.asDiagonal() * out.spectrum.eigenvectors.adjoint();
  out.log_partition = std::log(z) - beta * e0;
  return out;
}

inline DensityMatrix gibbs_state(const ComplexMatrix& h, double beta) { return thermal_state(h, beta).rho; }

/// log Tr exp(-beta H).
inline double log_partition_function(const ComplexMatrix& h, double beta) { return thermal_state(h, beta).log_partition; }

inline double expectation(const ComplexMatrix& op, const DensityMatrix& rho) {
  if (op.rows() != rho.rows() || op.cols() != rho.cols()) throw std::invalid_argument("expectation: dimension mismatch");
  // Tr(op rho) = sum_ij op_ij rho_ji
  return (op.cwiseProduct(rho.transpose())).sum().real();
}

struct RankTruncation {
  DensityMatrix rho;
  bool degenerate_cut = false;  // eigenvalue R-1 and R tie within 1e-12
};

/// Projects rho onto its R largest-eigenvalue eigenvectors and renormalizes.
inline RankTruncation exact_rank_truncation_report(const DensityMatrix& rho, int rank) {
  const Eigen::Index dim = rho.rows();
  if (rank < 1 || rank > dim) throw std::invalid_argument("exact_rank_truncation: rank out of range");
  const auto eig = hermitian_eig(rho);
  const RealVector& ev = eig.eigenvalues;
  RankTruncation out;
  out.rho = ComplexMatrix::Zero(dim, dim);
  double total = 0.0;
  // Ascending order, so the top R are the last R columns; ties resolve by solver order.
  for (Eigen::Index k = dim - rank; k < dim; ++k) {
    const double lam = std::max(ev(k), 0.0);
    out.rho += lam * eig.eigenvectors.col(k) * eig.eigenvectors.col(k).adjoint();
    total += lam;
  }
  if (!(total > 0.0)) throw std::domain_error("exact_rank_truncation: retained spectrum has zero weight");
  out.rho /= total;
  if (rank < dim) out.degenerate_cut = std::abs(ev(dim - rank) - ev(dim - rank - 1)) <= 1e-12;
  return out;
}

inline DensityMatrix exact_rank_truncation(const DensityMatrix& rho, int rank) { return exact_rank_truncation_report(rho, rank).rho; }

/// lambda_{i+1} - lambda_i for i = 0..k-1 in ascending order.
inline std::vector<double> spectral_gaps(const RealVector& ascending_eigenvalues, int k) {
  if (k < 1) throw std::invalid_argument("spectral_gaps: k must be >= 1");
  if (k >= ascending_eigenvalues.size()) throw std::invalid_argument("spectral_gaps: k must be smaller than the dimension");
  std::vector<double> gaps(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) gaps[static_cast<std::size_t>(i)] = std::max(0.0, ascending_eigenvalues(i + 1) - ascending_eigenvalues(i));
  return gaps;
}

inline std::vector<double> spectral_gaps(const ComplexMatrix& h, int k) {
  if (k >= h.rows()) throw std::invalid_argument("spectral_gaps: k must be smaller than the dimension");
  return spectral_gaps(hermitian_eig(h).eigenvalues, k);
}

}  // namespace qbm
