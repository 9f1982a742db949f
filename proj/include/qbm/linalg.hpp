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

/// Dense complex linear algebra for n-qubit states and operators.
///
/// Bit-order convention used everywhere in the library: qubit 0 is the
/// leftmost tensor factor, i.e. the most significant bit of a basis-state
/// index. The bitstring "01" therefore denotes basis index 1.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qbm {

using cx = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
/// Density matrices share the dense layout; validity is checked by
/// `check_density_matrix` rather than encoded in the type.
using DensityMatrix = ComplexMatrix;

inline constexpr double kHermitianTol = 1e-10;
inline constexpr double kPsdClipTol = 1e-10;
inline constexpr double kLogSupportCutoff = 1e-12;

inline constexpr bool is_power_of_two(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

/// Number of qubits for a Hilbert-space dimension; throws unless dim = 2^n, n >= 1.
inline int qubits_for_dim(Eigen::Index dim) {
  if (dim < 2 || !is_power_of_two(static_cast<std::size_t>(dim)))
    throw std::invalid_argument("dimension " + std::to_string(dim) + " is not 2^n with n >= 1");
  return std::countr_zero(static_cast<std::size_t>(dim));
}

// ---------------------------------------------------------------------------
// Bitstrings

/// A computational basis state of n qubits.
class Bitstring {
 public:
  Bitstring() = default;
  Bitstring(int n, std::uint32_t value) : n_(n), value_(value) {
    if (n < 0 || n > 30) throw std::invalid_argument("Bitstring: qubit count out of range");
    if (n < 32 && (value >> n) != 0) throw std::invalid_argument("Bitstring: value has bits beyond n");
  }

  static Bitstring parse(std::string_view text) {
    std::uint32_t v = 0;
    for (char c : text) {
      if (c != '0' && c != '1') throw std::invalid_argument("Bitstring: invalid character in '" + std::string(text) + "'");
      v = (v << 1) | static_cast<std::uint32_t>(c == '1');
    }
    return Bitstring(static_cast<int>(text.size()), v);
  }

  [[nodiscard]] int size() const { return n_; }
  [[nodiscard]] std::uint32_t value() const { return value_; }
  [[nodiscard]] int bit(int qubit) const { return static_cast<int>((value_ >> (n_ - 1 - qubit)) & 1U); }

  [[nodiscard]] std::string to_string() const {
    std::string s(static_cast<std::size_t>(n_), '0');
    for (int q = 0; q < n_; ++q) s[static_cast<std::size_t>(q)] = bit(q) ? '1' : '0';
    return s;
  }

  friend bool operator==(const Bitstring&, const Bitstring&) = default;
  friend auto operator<=>(const Bitstring&, const Bitstring&) = default;

 private:
  int n_ = 0;
  std::uint32_t value_ = 0;
};

/// Mask selecting qubit q in an n-qubit basis index.
inline constexpr std::uint32_t qubit_mask(int n, int qubit) { return 1U << (n - 1 - qubit); }

inline StateVector basis_state(const Bitstring& s) {
  StateVector v = StateVector::Zero(Eigen::Index{1} << s.size());
  v(s.value()) = 1.0;
  return v;
}

// ---------------------------------------------------------------------------
// Pauli strings

enum class Axis { X, Y, Z };

inline char axis_char(Axis a) { return a == Axis::X ? 'X' : (a == Axis::Y ? 'Y' : 'Z'); }

inline Axis parse_axis(std::string_view s) {
  if (s == "X" || s == "x") return Axis::X;
  if (s == "Y" || s == "y") return Axis::Y;
  if (s == "Z" || s == "z") return Axis::Z;
  throw std::invalid_argument("unknown Pauli axis '" + std::string(s) + "'");
}

/// Tensor product of single-qubit Paulis; unlisted qubits carry the identity.
///
/// Acts on a basis state as P|b> = i^{#Y} (-1)^{popcount(b & zy_mask)} |b ^ xy_mask>.
class PauliString {
 public:
  PauliString() = default;
  PauliString(int n, std::map<int, Axis> factors) : n_(n), factors_(std::move(factors)) {
    if (n < 1) throw std::invalid_argument("PauliString: qubit count must be >= 1");
    for (const auto& [q, a] : factors_) {
      if (q < 0 || q >= n) throw std::out_of_range("PauliString: qubit index " + std::to_string(q) + " out of range");
      const std::uint32_t m = qubit_mask(n, q);
      if (a != Axis::Z) flip_mask_ |= m;
      if (a != Axis::X) sign_mask_ |= m;
      if (a == Axis::Y) ++num_y_;
    }
  }

  [[nodiscard]] int num_qubits() const { return n_; }
  [[nodiscard]] const std::map<int, Axis>& factors() const { return factors_; }
  [[nodiscard]] bool is_identity() const { return factors_.empty(); }
  [[nodiscard]] std::uint32_t flip_mask() const { return flip_mask_; }
  [[nodiscard]] std::uint32_t sign_mask() const { return sign_mask_; }

  /// Phase picked up by basis state b: P|b> = phase(b) |b ^ flip_mask>.
  [[nodiscard]] cx phase(std::uint32_t b) const {
    static constexpr cx kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    const cx base = kIPow[num_y_ & 3];
    return (std::popcount(b & sign_mask_) & 1) ? -base : base;
  }

  [[nodiscard]] std::string to_string() const {
    if (factors_.empty()) return "I";
    std::string s;
    for (const auto& [q, a] : factors_) {
      if (!s.empty()) s += ' ';
      s += axis_char(a);
      s += std::to_string(q);
    }
    return s;
  }

  friend bool operator==(const PauliString& a, const PauliString& b) { return a.n_ == b.n_ && a.factors_ == b.factors_; }

 private:
  int n_ = 0;
  std::map<int, Axis> factors_;
  std::uint32_t flip_mask_ = 0;
  std::uint32_t sign_mask_ = 0;
  int num_y_ = 0;
};

inline ComplexMatrix pauli_matrix(const PauliString& p) {
  const Eigen::Index dim = Eigen::Index{1} << p.num_qubits();
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  for (Eigen::Index b = 0; b < dim; ++b) {
    const auto ub = static_cast<std::uint32_t>(b);
    m(ub ^ p.flip_mask(), b) = p.phase(ub);
  }
  return m;
}

/// out = P * psi without materializing P.
inline void apply_pauli(const PauliString& p, const StateVector& psi, StateVector& out) {
  const auto dim = static_cast<std::uint32_t>(psi.size());
  out.resize(psi.size());
  const std::uint32_t flip = p.flip_mask();
  for (std::uint32_t b = 0; b < dim; ++b) out(b ^ flip) = p.phase(b) * psi(b);
}

/// <psi|P|psi>, real for Hermitian P.
inline double pauli_expectation(const PauliString& p, const StateVector& psi) {
  const auto dim = static_cast<std::uint32_t>(psi.size());
  const std::uint32_t flip = p.flip_mask();
  cx acc = 0.0;
  for (std::uint32_t b = 0; b < dim; ++b) acc += std::conj(psi(b ^ flip)) * p.phase(b) * psi(b);
  return acc.real();
}

/// Tr(P * m) in O(dim).
inline cx pauli_trace(const PauliString& p, const ComplexMatrix& m) {
  const auto dim = static_cast<std::uint32_t>(m.rows());
  const std::uint32_t flip = p.flip_mask();
  cx acc = 0.0;
  for (std::uint32_t c = 0; c < dim; ++c) acc += p.phase(c) * m(c, c ^ flip);
  return acc;
}

// ---------------------------------------------------------------------------
// Hermitian spectral calculus

inline double hermiticity_error(const ComplexMatrix& m) {
  if (m.rows() != m.cols()) return INFINITY;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline bool is_hermitian(const ComplexMatrix& m, double tol = kHermitianTol) { return hermiticity_error(m) <= tol; }

struct SpectralDecomposition {
  RealVector eigenvalues;      // ascending
  ComplexMatrix eigenvectors;  // columns, unitary
};

inline SpectralDecomposition hermitian_eig(const ComplexMatrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("hermitian_eig: matrix is not square");
  if (!is_hermitian(m)) throw std::invalid_argument("hermitian_eig: matrix is not Hermitian");
  // Symmetrize so round-off asymmetry does not leak into the solver.
  const ComplexMatrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h);
  if (solver.info() != Eigen::Success) throw std::runtime_error("hermitian_eig: eigensolver failed to converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

/// V diag(f(lambda)) V^dagger.
template <class F>
ComplexMatrix apply_spectral(const SpectralDecomposition& eig, F&& f) {
  RealVector fl(eig.eigenvalues.size());
  for (Eigen::Index i = 0; i < fl.size(); ++i) fl(i) = f(eig.eigenvalues(i));
  return eig.eigenvectors * fl.asDiagonal() * eig.eigenvectors.adjoint();
}

template <class F>
ComplexMatrix matrix_fn_hermitian(const ComplexMatrix& m, F&& f) {
  return apply_spectral(hermitian_eig(m), std::forward<F>(f));
}

inline ComplexMatrix matrix_exp_hermitian(const ComplexMatrix& m) {
  return matrix_fn_hermitian(m, [](double x) { return std::exp(x); });
}

namespace detail {
inline double clip_psd(double x, const char* what) {
  if (x < -kPsdClipTol) throw std::domain_error(std::string(what) + ": matrix is not positive semidefinite");
  return x < 0.0 ? 0.0 : x;
}
// Convention 0 log 0 = 0: eigenvalues below the support cutoff map to 0.
inline double safe_log(double x) { return x < kLogSupportCutoff ? 0.0 : std::log(x); }
}  // namespace detail

inline ComplexMatrix matrix_sqrt_psd(const ComplexMatrix& m) {
  return matrix_fn_hermitian(m, [](double x) { return std::sqrt(detail::clip_psd(x, "matrix_sqrt_psd")); });
}

inline ComplexMatrix matrix_log_psd(const ComplexMatrix& m) {
  return matrix_fn_hermitian(m, [](double x) { return detail::safe_log(detail::clip_psd(x, "matrix_log_psd")); });
}

// ---------------------------------------------------------------------------
// Density-matrix checks

struct DensityCheck {
  double trace_error = 0.0;      // |Tr(rho) - 1|
  double hermiticity_error = 0.0;
  double min_eigenvalue = 0.0;
  int numerical_rank = 0;        // eigenvalues above rank_tol
};

inline DensityCheck check_density_matrix(const ComplexMatrix& rho, double rank_tol = 1e-10) {
  DensityCheck c;
  c.trace_error = std::abs(rho.trace() - cx(1.0, 0.0));
  c.hermiticity_error = hermiticity_error(rho);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
  const RealVector& ev = solver.eigenvalues();
  c.min_eigenvalue = ev.minCoeff();
  for (Eigen::Index i = 0; i < ev.size(); ++i) c.numerical_rank += ev(i) > rank_tol ? 1 : 0;
  return c;
}

inline bool is_valid_density_matrix(const ComplexMatrix& rho, double tol = 1e-8) {
  if (rho.rows() != rho.cols() || rho.rows() == 0) return false;
  const auto c = check_density_matrix(rho);
  return c.trace_error <= tol && c.hermiticity_error <= tol && c.min_eigenvalue >= -tol;
}

inline double purity(const ComplexMatrix& rho) { return (rho * rho).trace().real(); }

}  // namespace qbm
