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

/// Checkerboard SU(4) circuit ansatz and its statevector simulation.
///
/// Rotations are R_z(t) = exp(-i t Z / 2) and R_y(t) = exp(-i t Y / 2), so
/// every angle obeys the +-pi/2 parameter-shift rule.

#include "qbm/hamiltonian.hpp"
#include "qbm/linalg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace qbm {

inline constexpr int kParamsPerBlock = 15;

enum class GateKind { RZ, RY, CNOT };

struct GateSpec {
  GateKind kind = GateKind::RZ;
  int q0 = 0;      // rotation target, or CNOT control
  int q1 = -1;     // CNOT target
  int param = -1;  // index into theta; -1 for CNOT
};

/// One SU(4) block on (a, b), parameters offset..offset+14 in gate order.
inline std::vector<GateSpec> su4_block(int a, int b, int offset = 0) {
  auto rz = [](int q, int p) { return GateSpec{GateKind::RZ, q, -1, p}; };
  auto ry = [](int q, int p) { return GateSpec{GateKind::RY, q, -1, p}; };
  auto cnot = [](int c, int t) { return GateSpec{GateKind::CNOT, c, t, -1}; };
  const int o = offset;
  return {
      rz(a, o + 0),  rz(b, o + 1),  ry(a, o + 2),  ry(b, o + 3),  rz(a, o + 4),  rz(b, o + 5),
      cnot(a, b),    rz(a, o + 6),  ry(b, o + 7),  cnot(b, a),    ry(b, o + 8),  cnot(a, b),
      rz(a, o + 9),  rz(b, o + 10), ry(a, o + 11), ry(b, o + 12), rz(a, o + 13), rz(b, o + 14),
  };
}

/// Pairs of one checkerboard layer: sublayer A (0,1),(2,3),... then
/// sublayer B (1,2),(3,4),...,(n-1,0). Every layer has the same layout.
inline std::vector<std::pair<int, int>> layer_layout(int n, int /*layer*/ = 0) {
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("layer_layout: qubit count must be even and >= 2");
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; i += 2) pairs.emplace_back(i, i + 1);
  for (int i = 1; i < n; i += 2) pairs.emplace_back(i, (i + 1) % n);
  return pairs;
}

// ---------------------------------------------------------------------------
// In-place gate kernels

inline void apply_rz(StateVector& psi, int n, int q, double angle) {
  const std::uint32_t m = qubit_mask(n, q);
  const cx lo = std::polar(1.0, -0.5 * angle);
  const cx hi = std::polar(1.0, 0.5 * angle);
  const auto dim = static_cast<std::uint32_t>(psi.size());
  for (std::uint32_t b = 0; b < dim; ++b) psi(b) *= (b & m) ? hi : lo;
}

inline void apply_ry(StateVector& psi, int n, int q, double angle) {
  const std::uint32_t m = qubit_mask(n, q);
  const double c = std::cos(0.5 * angle);
  const double s = std::sin(0.5 * angle);
  const auto dim = static_cast<std::uint32_t>(psi.size());
  for (std::uint32_t b = 0; b < dim; ++b) {
    if (b & m) continue;
    const cx a0 = psi(b);
    const cx a1 = psi(b | m);
    psi(b) = c * a0 - s * a1;
    psi(b | m) = s * a0 + c * a1;
  }
}

inline void apply_cnot(StateVector& psi, int n, int control, int target) {
  const std::uint32_t mc = qubit_mask(n, control);
  const std::uint32_t mt = qubit_mask(n, target);
  const auto dim = static_cast<std::uint32_t>(psi.size());
  for (std::uint32_t b = 0; b < dim; ++b)
    if ((b & mc) && !(b & mt)) std::swap(psi(b), psi(b | mt));
}

inline void apply_hadamard(StateVector& psi, int n, int q) {
  const std::uint32_t m = qubit_mask(n, q);
  const double r = std::numbers::sqrt2 / 2.0;
  const auto dim = static_cast<std::uint32_t>(psi.size());
  for (std::uint32_t b = 0; b < dim; ++b) {
    if (b & m) continue;
    const cx a0 = psi(b);
    const cx a1 = psi(b | m);
    psi(b) = r * (a0 + a1);
    psi(b | m) = r * (a0 - a1);
  }
}

/// S^dagger = diag(1, -i).
inline void apply_sdg(StateVector& psi, int n, int q) {
  const std::uint32_t m = qubit_mask(n, q);
  const auto dim = static_cast<std::uint32_t>(psi.size());
  for (std::uint32_t b = 0; b < dim; ++b)
    if (b & m) psi(b) *= cx(0.0, -1.0);
}

inline void apply_gate(StateVector& psi, int n, const GateSpec& g, std::span<const double> theta, bool inverse = false) {
  switch (g.kind) {
    case GateKind::RZ: apply_rz(psi, n, g.q0, inverse ? -theta[static_cast<std::size_t>(g.param)] : theta[static_cast<std::size_t>(g.param)]); break;
    case GateKind::RY: apply_ry(psi, n, g.q0, inverse ? -theta[static_cast<std::size_t>(g.param)] : theta[static_cast<std::size_t>(g.param)]); break;
    case GateKind::CNOT: apply_cnot(psi, n, g.q0, g.q1); break;
  }
}

inline void apply_gates(StateVector& psi, int n, std::span<const GateSpec> gates, std::span<const double> theta) {
  for (const auto& g : gates) apply_gate(psi, n, g, theta);
}

/// Applies the inverse of `gates`: reversed order, negated angles.
inline void apply_gates_inverse(StateVector& psi, int n, std::span<const GateSpec> gates, std::span<const double> theta) {
  for (auto it = gates.rbegin(); it != gates.rend(); ++it) apply_gate(psi, n, *it, theta, true);
}

/// 4x4 unitary of a single SU(4) block acting on qubits (0, 1) of a pair.
inline ComplexMatrix su4_block_unitary(std::span<const double> params) {
  if (params.size() != kParamsPerBlock) throw std::invalid_argument("su4_block: expected exactly 15 parameters");
  const auto gates = su4_block(0, 1);
  ComplexMatrix u(4, 4);
  for (int col = 0; col < 4; ++col) {
    StateVector v = StateVector::Unit(4, col);
    apply_gates(v, 2, gates, params);
    u.col(col) = v;
  }
  return u;
}

// ---------------------------------------------------------------------------

/// U_theta: `depth` repetitions of a checkerboard layer of SU(4) blocks with
/// periodic boundary. Parameter block k of layer l starts at 15 (l n + k).
class CircuitAnsatz {
 public:
  CircuitAnsatz() = default;
  CircuitAnsatz(int n, int depth) : CircuitAnsatz(n, depth, RealVector::Zero(num_params(n, depth))) {}
  CircuitAnsatz(int n, int depth, RealVector theta) : n_(n), depth_(depth), theta_(std::move(theta)) {
    if (n < 2 || n % 2 != 0) throw std::invalid_argument("CircuitAnsatz: qubit count must be even and >= 2");
    if (depth < 0) throw std::invalid_argument("CircuitAnsatz: depth must be >= 0");
    if (theta_.size() != num_params(n, depth))
      throw std::invalid_argument("CircuitAnsatz: expected " + std::to_string(num_params(n, depth)) + " parameters");
    const auto pairs = layer_layout(n);
    int offset = 0;
    for (int l = 0; l < depth; ++l)
      for (const auto& [a, b] : pairs) {
        const auto block = su4_block(a, b, offset);
        gates_.insert(gates_.end(), block.begin(), block.end());
        blocks_.emplace_back(a, b);
        offset += kParamsPerBlock;
      }
  }

  static Eigen::Index num_params(int n, int depth) { return Eigen::Index{kParamsPerBlock} * depth * n; }

  template <class Rng>
  static CircuitAnsatz random(int n, int depth, Rng& rng, double stddev) {
    std::normal_distribution<double> normal(0.0, stddev);
    RealVector t(num_params(n, depth));
    for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = normal(rng);
    return {n, depth, std::move(t)};
  }

  [[nodiscard]] int num_qubits() const { return n_; }
  [[nodiscard]] int depth() const { return depth_; }
  [[nodiscard]] Eigen::Index size() const { return theta_.size(); }
  [[nodiscard]] const RealVector& theta() const { return theta_; }
  [[nodiscard]] std::span<const double> theta_span() const { return {theta_.data(), static_cast<std::size_t>(theta_.size())}; }
  [[nodiscard]] const std::vector<GateSpec>& gates() const { return gates_; }
  /// Qubit pair of every SU(4) block in application order; block k owns
  /// parameters [15k, 15k + 15).
  [[nodiscard]] const std::vector<std::pair<int, int>>& blocks() const { return blocks_; }

  void set_theta(RealVector theta) {
    if (theta.size() != theta_.size()) throw std::invalid_argument("CircuitAnsatz::set_theta: size mismatch");
    theta_ = std::move(theta);
  }

  [[nodiscard]] CircuitAnsatz with_theta(RealVector theta) const {
    CircuitAnsatz c = *this;
    c.set_theta(std::move(theta));
    return c;
  }

 private:
  int n_ = 0;
  int depth_ = 0;
  RealVector theta_;
  std::vector<GateSpec> gates_;
  std::vector<std::pair<int, int>> blocks_;
};

inline StateVector apply_circuit(const CircuitAnsatz& c, const Bitstring& s) {
  if (s.size() != c.num_qubits()) throw std::invalid_argument("apply_circuit: bitstring length does not match qubit count");
  StateVector psi = basis_state(s);
  apply_gates(psi, c.num_qubits(), c.gates(), c.theta_span());
  return psi;
}

inline double energy(const HamiltonianAnsatz& h, const StateVector& psi) {
  double e = 0.0;
  for (std::size_t r = 0; r < h.terms.size(); ++r) {
    const double w = h.weights(static_cast<Eigen::Index>(r));
    if (w != 0.0) e += w * pauli_expectation(h.terms[r], psi);
  }
  return e;
}

/// <s|U^dagger H U|s>.
inline double expval(const CircuitAnsatz& c, const Bitstring& s, const HamiltonianAnsatz& h) {
  if (h.n != c.num_qubits()) throw std::invalid_argument("expval: Hamiltonian and circuit qubit counts differ");
  return energy(h, apply_circuit(c, s));
}

/// d/dtheta_k <s|U^dagger H U|s> via the two-point shift rule.
inline RealVector param_shift_grad(const CircuitAnsatz& c, const Bitstring& s, const HamiltonianAnsatz& h) {
  RealVector grad(c.size());
  RealVector shifted = c.theta();
  CircuitAnsatz probe = c;
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    const double t = shifted(k);
    shifted(k) = t + std::numbers::pi / 2;
    probe.set_theta(shifted);
    const double plus = expval(probe, s, h);
    shifted(k) = t - std::numbers::pi / 2;
    probe.set_theta(shifted);
    const double minus = expval(probe, s, h);
    shifted(k) = t;
    grad(k) = 0.5 * (plus - minus);
  }
  return grad;
}

struct EnergyAndGradient {
  double energy = 0.0;
  RealVector grad;
  StateVector state;  // U|s>
};

// ---------------------------------------------------------------------------
// Batched simulation: many input states at once, one per column of a
// row-major matrix, so every gate becomes a few contiguous row operations.

using StateBatch = Eigen::Matrix<cx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mat4 = Eigen::Matrix<cx, 4, 4>;

namespace batch {

/// Single gate of a block as a 4x4 matrix on local qubits (0 = high bit).
inline Mat4 local_gate_matrix(const GateSpec& g, std::span<const double> theta) {
  Mat4 m = Mat4::Zero();
  if (g.kind == GateKind::CNOT) {
    for (int x = 0; x < 4; ++x) {
      const int control_bit = (x >> (1 - g.q0)) & 1;
      const int y = control_bit ? x ^ (1 << (1 - g.q1)) : x;
      m(y, x) = 1.0;
    }
    return m;
  }
  const double angle = theta[static_cast<std::size_t>(g.param)];
  Eigen::Matrix2cd u;
  if (g.kind == GateKind::RZ) {
    u << std::polar(1.0, -0.5 * angle), 0.0, 0.0, std::polar(1.0, 0.5 * angle);
  } else {
    const double c = std::cos(0.5 * angle);
    const double s = std::sin(0.5 * angle);
    u << c, -s, s, c;
  }
  const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
  const Eigen::Matrix2cd& hi = g.q0 == 0 ? u : id;
  const Eigen::Matrix2cd& lo = g.q0 == 0 ? id : u;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = hi(r >> 1, c >> 1) * lo(r & 1, c & 1);
  return m;
}

inline Mat4 local_generator(const GateSpec& g) {
  Mat4 m = Mat4::Zero();
  for (int x = 0; x < 4; ++x) {
    const int bit = (x >> (1 - g.q0)) & 1;
    if (g.kind == GateKind::RZ) {
      m(x, x) = bit ? -1.0 : 1.0;
    } else {
      m(x ^ (1 << (1 - g.q0)), x) = bit ? cx(0.0, -1.0) : cx(0.0, 1.0);
    }
  }
  return m;
}

/// Gate matrices of block k in application order.
inline std::vector<Mat4> block_gate_matrices(int block, std::span<const double> theta) {
  const auto gates = su4_block(0, 1, block * kParamsPerBlock);
  std::vector<Mat4> out;
  out.reserve(gates.size());
  for (const auto& g : gates) out.push_back(local_gate_matrix(g, theta));
  return out;
}

inline Mat4 block_unitary(int block, std::span<const double> theta) {
  Mat4 u = Mat4::Identity();
  for (const auto& g : block_gate_matrices(block, theta)) u = g * u;
  return u;
}

/// Visit every 4-row group of the pair (a, b), rows ordered |ab> = 00, 01, 10, 11.
template <class F>
void for_each_quad(std::uint32_t dim, int n, int a, int b, F&& f) {
  const std::uint32_t ma = qubit_mask(n, a);
  const std::uint32_t mb = qubit_mask(n, b);
  for (std::uint32_t base = 0; base < dim; ++base) {
    if (base & (ma | mb)) continue;
    const std::uint32_t rows[4] = {base, base | mb, base | ma, base | ma | mb};
    f(rows);
  }
}

namespace detail {
// Plain complex product; std::complex operator* carries NaN/Inf recovery
// branches that dominate these tight loops.
inline cx mul(cx a, cx b) { return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()}; }
inline cx mul_conj(cx a, cx b) { return {a.real() * b.real() + a.imag() * b.imag(), a.imag() * b.real() - a.real() * b.imag()}; }
}  // namespace detail

inline void apply_two_qubit(StateBatch& m, int n, int a, int b, const Mat4& u) {
  const Eigen::Index cols = m.cols();
  cx* data = m.data();
  for_each_quad(static_cast<std::uint32_t>(m.rows()), n, a, b, [&](const std::uint32_t* rows) {
    cx* r[4];
    for (int k = 0; k < 4; ++k) r[k] = data + static_cast<Eigen::Index>(rows[k]) * cols;
    for (Eigen::Index j = 0; j < cols; ++j) {
      const cx x[4] = {r[0][j], r[1][j], r[2][j], r[3][j]};
      for (int k = 0; k < 4; ++k)
        r[k][j] = detail::mul(u(k, 0), x[0]) + detail::mul(u(k, 1), x[1]) + detail::mul(u(k, 2), x[2]) + detail::mul(u(k, 3), x[3]);
    }
  });
}

/// C(x, y) = sum over the rest of the register and all columns of phi[x] conj(lambda[y]).
inline Mat4 reduced_cross(const StateBatch& phi, const StateBatch& lambda, int n, int a, int b) {
  Mat4 c = Mat4::Zero();
  const Eigen::Index cols = phi.cols();
  for_each_quad(static_cast<std::uint32_t>(phi.rows()), n, a, b, [&](const std::uint32_t* rows) {
    const cx* p[4];
    const cx* l[4];
    for (int k = 0; k < 4; ++k) {
      p[k] = phi.data() + static_cast<Eigen::Index>(rows[k]) * cols;
      l[k] = lambda.data() + static_cast<Eigen::Index>(rows[k]) * cols;
    }
    for (Eigen::Index j = 0; j < cols; ++j)
      for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y) c(x, y) += detail::mul_conj(p[x][j], l[y][j]);
  });
  return c;
}

inline void apply_hamiltonian(const HamiltonianAnsatz& h, const StateBatch& psi, StateBatch& out) {
  out = StateBatch::Zero(psi.rows(), psi.cols());
  const auto dim = static_cast<std::uint32_t>(psi.rows());
  for (std::size_t r = 0; r < h.terms.size(); ++r) {
    const double w = h.weights(static_cast<Eigen::Index>(r));
    if (w == 0.0) continue;
    const PauliString& p = h.terms[r];
    const std::uint32_t flip = p.flip_mask();
    for (std::uint32_t b = 0; b < dim; ++b) out.row(b ^ flip) += (w * p.phase(b)) * psi.row(b);
  }
}

}  // namespace batch

/// Columns U|s_j> for every input string.
inline StateBatch apply_circuit_batch(const CircuitAnsatz& c, std::span<const Bitstring> inputs) {
  const Eigen::Index dim = Eigen::Index{1} << c.num_qubits();
  StateBatch m = StateBatch::Zero(dim, static_cast<Eigen::Index>(inputs.size()));
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    if (inputs[j].size() != c.num_qubits()) throw std::invalid_argument("apply_circuit: bitstring length does not match qubit count");
    m(inputs[j].value(), static_cast<Eigen::Index>(j)) = 1.0;
  }
  const auto& blocks = c.blocks();
  for (std::size_t k = 0; k < blocks.size(); ++k)
    batch::apply_two_qubit(m, c.num_qubits(), blocks[k].first, blocks[k].second, batch::block_unitary(static_cast<int>(k), c.theta_span()));
  return m;
}

struct BatchEnergyGradient {
  std::vector<double> energies;  // per input
  RealVector grad;               // of sum_j weight_j * energy_j
  StateBatch states;             // U|s_j> as columns
};

/// Energies of every U|s_j> and the theta-gradient of sum_j weight_j E_j, by
/// one forward pass and one reverse sweep over the batch.
inline BatchEnergyGradient energy_gradient_adjoint_batch(const CircuitAnsatz& c, std::span<const Bitstring> inputs,
                                                         std::span<const double> weights, const HamiltonianAnsatz& h) {
  if (weights.size() != inputs.size()) throw std::invalid_argument("energy_gradient_adjoint_batch: one weight per input required");
  const int n = c.num_qubits();
  BatchEnergyGradient out;
  out.states = apply_circuit_batch(c, inputs);
  StateBatch phi = out.states;
  StateBatch lambda;
  batch::apply_hamiltonian(h, phi, lambda);
  const Eigen::Index cols = phi.cols();
  out.energies.resize(static_cast<std::size_t>(cols));
  for (Eigen::Index j = 0; j < cols; ++j) {
    out.energies[static_cast<std::size_t>(j)] = phi.col(j).dot(lambda.col(j)).real();
    lambda.col(j) *= weights[static_cast<std::size_t>(j)];
  }
  out.grad = RealVector::Zero(c.size());
  // Reverse sweep block by block. Within a block every gate derivative
  // reduces to a 4x4 trace against the cross matrix of the block input and
  // the adjoint state at the block output.
  const auto theta = c.theta_span();
  const auto& blocks = c.blocks();
  const auto local = su4_block(0, 1);
  constexpr std::size_t kGates = 18;
  std::array<Mat4, kGates + 1> suffix;
  for (std::size_t k = blocks.size(); k-- > 0;) {
    const auto [a, b] = blocks[k];
    const auto mats = batch::block_gate_matrices(static_cast<int>(k), theta);
    suffix[kGates] = Mat4::Identity();
    for (std::size_t g = kGates; g-- > 0;) suffix[g] = suffix[g + 1] * mats[g];
    const Mat4 u = suffix[0];
    batch::apply_two_qubit(phi, n, a, b, u.adjoint());
    const Mat4 cross = batch::reduced_cross(phi, lambda, n, a, b);
    Mat4 prefix = Mat4::Identity();
    for (std::size_t g = 0; g < kGates; ++g) {
      prefix = mats[g] * prefix;
      if (local[g].kind == GateKind::CNOT) continue;
      const cx z = (suffix[g + 1] * batch::local_generator(local[g]) * prefix * cross).trace();
      out.grad(static_cast<Eigen::Index>(k) * kParamsPerBlock + local[g].param) = z.imag();
    }
    batch::apply_two_qubit(lambda, n, a, b, u.adjoint());
  }
  return out;
}

/// Energy of U|s> and its full theta-gradient by one reverse sweep. Agrees
/// with `param_shift_grad` to round-off at the cost of ~3 circuit passes.
inline EnergyAndGradient energy_gradient_adjoint(const CircuitAnsatz& c, const Bitstring& s, const HamiltonianAnsatz& h) {
  const std::array<Bitstring, 1> input{s};
  const std::array<double, 1> weight{1.0};
  auto eg = energy_gradient_adjoint_batch(c, input, weight, h);
  return {eg.energies.front(), std::move(eg.grad), eg.states.col(0)};
}

// ---------------------------------------------------------------------------
// Finite-shot estimation

/// Probability of the +1 outcome when measuring Pauli `p` on `psi`: the state
/// is rotated into the eigenbasis of p and the +1 outcomes are the basis states
/// with even parity on the support of p.
inline double plus_outcome_probability(const PauliString& p, const StateVector& psi) {
  StateVector rotated = psi;
  const int n = p.num_qubits();
  std::uint32_t support = 0;
  for (const auto& [q, a] : p.factors()) {
    support |= qubit_mask(n, q);
    if (a == Axis::X) {
      apply_hadamard(rotated, n, q);
    } else if (a == Axis::Y) {
      apply_sdg(rotated, n, q);
      apply_hadamard(rotated, n, q);
    }
  }
  double plus = 0.0;
  for (Eigen::Index b = 0; b < rotated.size(); ++b)
    if ((std::popcount(static_cast<std::uint32_t>(b) & support) & 1) == 0) plus += std::norm(rotated(b));
  return std::clamp(plus, 0.0, 1.0);
}

/// Mean of `shots` +-1 outcomes with P(+1) = plus_probability. The number of
/// +1 outcomes among i.i.d. shots is binomial, so it is drawn in one step.
template <class Rng>
double sample_pauli_mean(double plus_probability, long shots, Rng& rng) {
  if (shots < 1) throw std::invalid_argument("shot count must be >= 1");
  std::binomial_distribution<long> binom(shots, plus_probability);
  const long k = binom(rng);
  return static_cast<double>(2 * k - shots) / static_cast<double>(shots);
}

/// Per-term shot estimates of <psi|H_r|psi>; identity terms are exact.
template <class Rng>
RealVector sample_term_expectations(const HamiltonianAnsatz& h, const StateVector& psi, long shots, Rng& rng) {
  RealVector e(static_cast<Eigen::Index>(h.terms.size()));
  for (std::size_t r = 0; r < h.terms.size(); ++r) {
    const auto& p = h.terms[r];
    e(static_cast<Eigen::Index>(r)) = p.is_identity() ? 1.0 : sample_pauli_mean(plus_outcome_probability(p, psi), shots, rng);
  }
  return e;
}

template <class Rng>
double sample_energy(const HamiltonianAnsatz& h, const StateVector& psi, long shots, Rng& rng) {
  if (shots < 1) throw std::invalid_argument("expval_sampled: shot count must be >= 1");
  double e = 0.0;
  for (std::size_t r = 0; r < h.terms.size(); ++r) {
    const double w = h.weights(static_cast<Eigen::Index>(r));
    if (w == 0.0) continue;
    const auto& p = h.terms[r];
    e += w * (p.is_identity() ? 1.0 : sample_pauli_mean(plus_outcome_probability(p, psi), shots, rng));
  }
  return e;
}

/// Unbiased M-shot estimate of <s|U^dagger H U|s>, M shots per Pauli term.
template <class Rng>
double expval_sampled(const CircuitAnsatz& c, const Bitstring& s, const HamiltonianAnsatz& h, long shots, Rng& rng) {
  if (shots < 1) throw std::invalid_argument("expval_sampled: shot count must be >= 1");
  return sample_energy(h, apply_circuit(c, s), shots, rng);
}

/// Shift-rule gradient with every expectation value estimated from shots.
template <class Rng>
RealVector param_shift_grad_sampled(const CircuitAnsatz& c, const Bitstring& s, const HamiltonianAnsatz& h, long shots, Rng& rng) {
  RealVector grad(c.size());
  RealVector shifted = c.theta();
  CircuitAnsatz probe = c;
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    const double t = shifted(k);
    shifted(k) = t + std::numbers::pi / 2;
    probe.set_theta(shifted);
    const double plus = expval_sampled(probe, s, h, shots, rng);
    shifted(k) = t - std::numbers::pi / 2;
    probe.set_theta(shifted);
    const double minus = expval_sampled(probe, s, h, shots, rng);
    shifted(k) = t;
    grad(k) = 0.5 * (plus - minus);
  }
  return grad;
}

}  // namespace qbm
