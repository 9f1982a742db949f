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

#include "qbm/hamiltonian.hpp"
#include "test_util.hpp"

#include <random>

using namespace qbm;
using Catch::Approx;

namespace {

std::string spell(const PauliString& p) {
  std::string s(static_cast<std::size_t>(p.num_qubits()), 'I');
  for (const auto& [q, a] : p.factors()) s[static_cast<std::size_t>(q)] = axis_char(a);
  return s;
}

}  // namespace

TEST_CASE("QBM ansatz term counts", "[hamiltonian]") {
  CHECK(build_qbm_ansatz(2).size() == 7);
  CHECK(build_qbm_ansatz(4).size() == 26);
  CHECK(build_qbm_ansatz(8).size() == 100);
  CHECK_THROWS_AS(build_qbm_ansatz(1), std::invalid_argument);
}

TEST_CASE("QBM ansatz term order is canonical and stable", "[hamiltonian]") {
  const auto h = build_qbm_ansatz(3);
  const std::vector<std::string> expected = {"XII", "ZII", "IXI", "IZI", "IIX", "IIZ", "XXI", "YYI", "ZZI",
                                             "XIX", "YIY", "ZIZ", "IXX", "IYY", "IZZ"};
  REQUIRE(h.size() == expected.size());
  for (std::size_t r = 0; r < expected.size(); ++r) CHECK(spell(h.terms[r]) == expected[r]);
  const auto again = build_qbm_ansatz(3);
  for (std::size_t r = 0; r < h.size(); ++r) CHECK(spell(again.terms[r]) == spell(h.terms[r]));
  CHECK(h.weights.isZero());
}

TEST_CASE("XXZ model", "[hamiltonian]") {
  const auto h = build_xxz(2, -1.0, -0.5);
  REQUIRE(h.size() == 3);
  CHECK(h.weights(0) == -1.0);
  CHECK(h.weights(1) == -1.0);
  CHECK(h.weights(2) == -0.5);
  CHECK(build_xxz(5, 1.0, 1.0).size() == 12);

  const ComplexMatrix zz = dense_matrix(build_xxz(2, 0.0, 1.0));
  ComplexMatrix expected = ComplexMatrix::Zero(4, 4);
  expected.diagonal() << 1, -1, -1, 1;
  CHECK(zz.isApprox(expected));
}

TEST_CASE("init_weights draws N(0, 1/sqrt(n))", "[hamiltonian]") {
  std::mt19937_64 rng(2024);
  const auto base = build_qbm_ansatz(4);
  double sum = 0.0;
  double sumsq = 0.0;
  long count = 0;
  while (count < 100000) {
    const auto h = init_weights(base, rng);
    for (Eigen::Index r = 0; r < h.weights.size(); ++r) {
      sum += h.weights(r);
      sumsq += h.weights(r) * h.weights(r);
      ++count;
    }
  }
  const double mean = sum / static_cast<double>(count);
  const double sd = std::sqrt(sumsq / static_cast<double>(count) - mean * mean);
  CHECK(sd == Approx(0.5).margin(0.01));

  std::mt19937_64 a(1);
  std::mt19937_64 b(1);
  CHECK(init_weights(base, a).weights == init_weights(base, b).weights);
}

TEST_CASE("dense_matrix matches a term-by-term Kronecker sum", "[hamiltonian]") {
  CHECK(dense_matrix(build_qbm_ansatz(2)).isZero());

  HamiltonianAnsatz single;
  single.n = 1;
  single.terms.emplace_back(1, std::map<int, Axis>{{0, Axis::Z}});
  single.weights = RealVector::Constant(1, 2.0);
  ComplexMatrix d = ComplexMatrix::Zero(2, 2);
  d(0, 0) = 2.0;
  d(1, 1) = -2.0;
  CHECK(dense_matrix(single).isApprox(d));

  std::mt19937_64 rng(17);
  const auto h = init_weights(build_qbm_ansatz(3), rng);
  ComplexMatrix oracle = ComplexMatrix::Zero(8, 8);
  for (std::size_t r = 0; r < h.size(); ++r) oracle += h.weights(static_cast<Eigen::Index>(r)) * testing::kron_paulis(spell(h.terms[r]));
  CHECK((dense_matrix(h) - oracle).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("dense_matrix is Hermitian and linear in the weights", "[hamiltonian][property]") {
  std::mt19937_64 rng(23);
  const auto base = build_qbm_ansatz(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = init_weights(base, rng);
    const auto b = init_weights(base, rng);
    auto sum = base;
    sum.weights = a.weights + b.weights;
    CHECK(hermiticity_error(dense_matrix(a)) < 1e-12);
    CHECK((dense_matrix(sum) - dense_matrix(a) - dense_matrix(b)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("apply_hamiltonian and per-term statistics agree with the dense matrix", "[hamiltonian]") {
  std::mt19937_64 rng(29);
  const auto h = init_weights(build_qbm_ansatz(3), rng);
  const ComplexMatrix m = dense_matrix(h);
  const StateVector psi = testing::random_state(8, rng);
  StateVector out;
  apply_hamiltonian(h, psi, out);
  CHECK((out - m * psi).norm() < 1e-12);
  CHECK(term_expectations(h, psi).dot(h.weights) == Approx(psi.dot(m * psi).real()).margin(1e-12));
  const ComplexMatrix rho = testing::random_density(8, rng);
  CHECK(term_traces(h, rho).dot(h.weights) == Approx((m * rho).trace().real()).margin(1e-12));
}

TEST_CASE("Hamiltonian JSON round trip", "[hamiltonian]") {
  std::mt19937_64 rng(31);
  const auto h = init_weights(build_qbm_ansatz(3), rng);
  const auto back = hamiltonian_from_json(nlohmann::json::parse(to_json(h).dump()));
  REQUIRE(back.size() == h.size());
  CHECK(back.weights == h.weights);
  for (std::size_t r = 0; r < h.size(); ++r) CHECK(spell(back.terms[r]) == spell(h.terms[r]));
}
