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

#include <catch2/catch_amalgamated.hpp>

#include "qbm/circuit.hpp"
#include "qbm/hamiltonian.hpp"
#include "test_util.hpp"

#include <numbers>
#include <random>

using namespace qbm;
using Catch::Approx;

namespace {

ComplexMatrix rz2(double t) {
  ComplexMatrix m = ComplexMatrix::Zero(2, 2);
  m(0, 0) = std::polar(1.0, -t / 2);
  m(1, 1) = std::polar(1.0, t / 2);
  return m;
}

ComplexMatrix ry2(double t) {
  ComplexMatrix m(2, 2);
  m << std::cos(t / 2), -std::sin(t / 2), std::sin(t / 2), std::cos(t / 2);
  return m;
}

// Dense 2^n operator of one gate, built from Kronecker factors.
ComplexMatrix dense_gate(int n, const GateSpec& g, const RealVector& theta) {
  const Eigen::Index dim = Eigen::Index{1} << n;
  if (g.kind == GateKind::CNOT) {
    ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
    for (Eigen::Index b = 0; b < dim; ++b) {
      const int c = static_cast<int>((b >> (n - 1 - g.q0)) & 1);
      const Eigen::Index out = c ? b ^ (Eigen::Index{1} << (n - 1 - g.q1)) : b;
      m(out, b) = 1.0;
    }
    return m;
  }
  const ComplexMatrix u = g.kind == GateKind::RZ ? rz2(theta(g.param)) : ry2(theta(g.param));
  ComplexMatrix m = ComplexMatrix::Identity(1, 1);
  for (int q = 0; q < n; ++q) m = testing::kron(m, q == g.q0 ? u : ComplexMatrix::Identity(2, 2));
  return m;
}

ComplexMatrix dense_circuit(const CircuitAnsatz& c) {
  const int n = c.num_qubits();
  ComplexMatrix u = ComplexMatrix::Identity(Eigen::Index{1} << n, Eigen::Index{1} << n);
  for (const auto& g : c.gates()) u = dense_gate(n, g, c.theta()) * u;
  return u;
}

ComplexMatrix swap4() {
  ComplexMatrix s = ComplexMatrix::Zero(4, 4);
  s(0, 0) = s(3, 3) = 1.0;
  s(1, 2) = s(2, 1) = 1.0;
  return s;
}

}  // namespace

TEST_CASE("all-zero SU(4) block is a SWAP", "[circuit]") {
  const std::vector<double> zeros(kParamsPerBlock, 0.0);
  CHECK((su4_block_unitary(zeros) - swap4()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("SU(4) block equals the gate-by-gate matrix product", "[circuit]") {
  std::vector<double> params(kParamsPerBlock, 0.0);
  params[9] = std::numbers::pi;
  const auto gates = su4_block(0, 1);
  RealVector t = Eigen::Map<RealVector>(params.data(), kParamsPerBlock);
  ComplexMatrix oracle = ComplexMatrix::Identity(4, 4);
  for (const auto& g : gates) oracle = dense_gate(2, g, t) * oracle;
  CHECK((su4_block_unitary(params) - oracle).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(gates.size() == 18);
}

TEST_CASE("random SU(4) blocks are unitary", "[circuit][property]") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> p(kParamsPerBlock);
    for (auto& x : p) x = g(rng);
    const ComplexMatrix u = su4_block_unitary(p);
    CHECK((u.adjoint() * u - ComplexMatrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
  }
  CHECK_THROWS_AS(su4_block_unitary(std::vector<double>(14, 0.0)), std::invalid_argument);
}

TEST_CASE("checkerboard layout", "[circuit]") {
  using P = std::vector<std::pair<int, int>>;
  CHECK(layer_layout(4) == P{{0, 1}, {2, 3}, {1, 2}, {3, 0}});
  CHECK(layer_layout(2) == P{{0, 1}, {1, 0}});
  CHECK(layer_layout(6).size() == 6);
  CHECK(CircuitAnsatz::num_params(6, 1) == 90);
  CHECK_THROWS_AS(layer_layout(3), std::invalid_argument);
  CHECK_THROWS_AS(CircuitAnsatz(5, 1), std::invalid_argument);
  CHECK_THROWS_AS(CircuitAnsatz(4, -1), std::invalid_argument);
}

TEST_CASE("zero-angle circuit permutes basis states through the SWAP network", "[circuit]") {
  const CircuitAnsatz c(4, 1);
  // (0,1),(2,3) turn 0101 into 1010; (1,2),(3,0) turn that back into 0101.
  const StateVector psi = apply_circuit(c, Bitstring::parse("0101"));
  CHECK(std::abs(psi(Bitstring::parse("0101").value()) - cx(1.0, 0.0)) < 1e-14);
  const StateVector phi = apply_circuit(c, Bitstring::parse("0011"));
  // 0011 -> 0011 -> 0101 -> 1100
  CHECK(std::abs(phi(Bitstring::parse("1100").value()) - cx(1.0, 0.0)) < 1e-14);
}

TEST_CASE("apply_circuit matches a dense matrix composition", "[circuit]") {
  std::mt19937_64 rng(2);
  for (int n : {2, 4}) {
    const auto c = CircuitAnsatz::random(n, n == 2 ? 1 : 2, rng, 1.0);
    const ComplexMatrix u = dense_circuit(c);
    for (std::uint32_t v = 0; v < (1U << n); ++v) {
      const StateVector psi = apply_circuit(c, Bitstring(n, v));
      CHECK((psi - u.col(v)).norm() < 1e-12);
      CHECK(psi.norm() == Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("batched simulation agrees with the single-state path", "[circuit]") {
  std::mt19937_64 rng(3);
  const auto c = CircuitAnsatz::random(6, 3, rng, 0.8);
  std::vector<Bitstring> inputs = {Bitstring(6, 0), Bitstring(6, 17), Bitstring(6, 42), Bitstring(6, 63)};
  const StateBatch batch = apply_circuit_batch(c, inputs);
  for (std::size_t j = 0; j < inputs.size(); ++j) CHECK((batch.col(static_cast<Eigen::Index>(j)) - apply_circuit(c, inputs[j])).norm() < 1e-12);
}

TEST_CASE("expval", "[circuit]") {
  HamiltonianAnsatz h = build_qbm_ansatz(2);
  h.weights(1) = 0.8;  // Z_0
  CHECK(expval(CircuitAnsatz(2, 0), Bitstring(2, 0), h) == Approx(0.8));

  std::mt19937_64 rng(4);
  const auto hr = init_weights(build_qbm_ansatz(4), rng);
  const double bound = hr.weights.cwiseAbs().sum();
  for (int trial = 0; trial < 5; ++trial) {
    const auto c = CircuitAnsatz::random(4, 2, rng, 1.0);
    const Bitstring s(4, static_cast<std::uint32_t>(trial * 3));
    const StateVector col = dense_circuit(c).col(s.value());
    const double oracle = col.dot(dense_matrix(hr) * col).real();
    CHECK(expval(c, s, hr) == Approx(oracle).margin(1e-9));
    CHECK(std::abs(expval(c, s, hr)) <= bound);
  }
}

TEST_CASE("shift-rule gradient matches central finite differences", "[circuit][property]") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 3; ++trial) {
    const auto h = init_weights(build_qbm_ansatz(4), rng);
    const auto c = CircuitAnsatz::random(4, 2, rng, 1.0);
    const Bitstring s(4, static_cast<std::uint32_t>(5 * trial + 1));
    const RealVector g = param_shift_grad(c, s, h);
    const RealVector adj = energy_gradient_adjoint(c, s, h).grad;
    auto f = [&](const RealVector& t) { return expval(c.with_theta(t), s, h); };
    for (Eigen::Index k = 0; k < c.size(); ++k) {
      CHECK(std::abs(g(k) - testing::central_difference(f, c.theta(), k, 1e-5)) < 1e-6);
      CHECK(std::abs(g(k) - adj(k)) < 1e-10);
    }
  }
}

TEST_CASE("gradient special cases", "[circuit]") {
  std::mt19937_64 rng(6);
  const auto c = CircuitAnsatz::random(4, 2, rng, 1.0);
  CHECK(param_shift_grad(c, Bitstring(4, 3), build_qbm_ansatz(4)).isZero());
  // The first two gates are Z rotations on a basis state: a global phase.
  const auto h = init_weights(build_qbm_ansatz(4), rng);
  const RealVector g = param_shift_grad(c, Bitstring(4, 9), h);
  CHECK(std::abs(g(0)) < 1e-12);
  CHECK(std::abs(g(1)) < 1e-12);
}

TEST_CASE("sampled expectation converges to the exact value", "[circuit]") {
  std::mt19937_64 rng(7);
  const auto c = CircuitAnsatz::random(4, 1, rng, 1.0);
  const auto h4 = init_weights(build_qbm_ansatz(4), rng);
  const Bitstring s(4, 6);
  const long m = 1000000;
  const double bound = 3.0 / std::sqrt(static_cast<double>(m)) * h4.weights.cwiseAbs().sum();
  CHECK(std::abs(expval_sampled(c, s, h4, m, rng) - expval(c, s, h4)) < bound);
}

TEST_CASE("eigenstate measurements have zero variance", "[circuit]") {
  std::mt19937_64 rng(8);
  HamiltonianAnsatz h = build_qbm_ansatz(2);
  h.weights(1) = 1.3;   // Z_0
  h.weights(6) = -0.4;  // Z_0 Z_1
  const CircuitAnsatz c(2, 0);
  for (int rep = 0; rep < 5; ++rep) CHECK(expval_sampled(c, Bitstring(2, 1), h, 7, rng) == Approx(1.3 * 1 - 0.4 * -1));
}

TEST_CASE("shot noise standard deviation halves when shots quadruple", "[circuit]") {
  std::mt19937_64 rng(9);
  const auto h = init_weights(build_qbm_ansatz(4), rng);
  const auto c = CircuitAnsatz::random(4, 2, rng, 1.0);
  const Bitstring s(4, 10);
  const double exact = expval(c, s, h);
  auto spread = [&](long m) {
    double acc = 0.0;
    const int reps = 400;
    for (int i = 0; i < reps; ++i) {
      const double d = expval_sampled(c, s, h, m, rng) - exact;
      acc += d * d;
    }
    return std::sqrt(acc / reps);
  };
  const double ratio = spread(1000) / spread(4000);
  CHECK(ratio == Approx(2.0).epsilon(0.3));
}

TEST_CASE("plus-outcome probability matches the projector oracle", "[circuit]") {
  std::mt19937_64 rng(10);
  const StateVector psi = testing::random_state(8, rng);
  const PauliString p(3, {{0, Axis::Y}, {2, Axis::X}});
  const ComplexMatrix pm = testing::kron_paulis("YIX");
  const ComplexMatrix proj = 0.5 * (ComplexMatrix::Identity(8, 8) + pm);
  CHECK(plus_outcome_probability(p, psi) == Approx(psi.dot(proj * psi).real()).margin(1e-12));
}
