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

#include "qbm/gibbs.hpp"
#include "qbm/hamiltonian.hpp"
#include "qbm/metrics.hpp"
#include "test_util.hpp"

#include <random>

using namespace qbm;
using Catch::Approx;

TEST_CASE("fidelity on simple pairs", "[metrics]") {
  std::mt19937_64 rng(1);
  const DensityMatrix rho = testing::random_density(4, rng);
  CHECK(fidelity(rho, rho) == Approx(1.0).epsilon(1e-10));

  DensityMatrix zero = DensityMatrix::Zero(2, 2);
  zero(0, 0) = 1.0;
  DensityMatrix one = DensityMatrix::Zero(2, 2);
  one(1, 1) = 1.0;
  CHECK(fidelity(zero, one) == Approx(0.0).margin(1e-12));
  CHECK(fidelity(zero, ComplexMatrix::Identity(2, 2) / 2.0) == Approx(0.5).epsilon(1e-12));
}

TEST_CASE("fidelity rejects invalid inputs", "[metrics]") {
  CHECK_THROWS_AS(fidelity(ComplexMatrix::Identity(2, 2), ComplexMatrix::Identity(2, 2) / 2.0), std::invalid_argument);
  CHECK_THROWS_AS(fidelity(ComplexMatrix::Identity(2, 2) / 2.0, ComplexMatrix::Identity(4, 4) / 4.0), std::invalid_argument);
}

TEST_CASE("fidelity is symmetric, bounded and reduces for pure states", "[metrics][property]") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const DensityMatrix a = testing::random_density(8, rng);
    const DensityMatrix b = testing::random_density(8, rng);
    const double f = fidelity(a, b);
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
    CHECK(f == Approx(fidelity(b, a)).margin(1e-8));

    const StateVector psi = testing::random_state(8, rng);
    const DensityMatrix pure = psi * psi.adjoint();
    CHECK(fidelity(pure, b) == Approx(psi.dot(b * psi).real()).margin(1e-9));
    CHECK(pure_state_fidelity(psi, b) == Approx(psi.dot(b * psi).real()).margin(1e-12));
  }
}

TEST_CASE("fidelity to the rank-R truncation is non-decreasing in R", "[metrics][property]") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 3; ++trial) {
    const DensityMatrix rho = testing::random_density(8, rng);
    double previous = 0.0;
    for (int r = 1; r <= 8; ++r) {
      const double f = fidelity(rho, exact_rank_truncation(rho, r));
      CHECK(f >= previous - 1e-12);
      previous = f;
    }
    CHECK(previous == Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("ground-state fidelity", "[metrics]") {
  DensityMatrix one = DensityMatrix::Zero(2, 2);
  one(1, 1) = 1.0;
  const auto z = ground_state_fidelity_report(testing::pauli2('Z'), one);
  CHECK(z.value == Approx(1.0));
  CHECK_FALSE(z.degenerate);

  std::mt19937_64 rng(4);
  const auto h = init_weights(build_qbm_ansatz(3), rng);
  const ComplexMatrix hm = dense_matrix(h);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(hm);
  const StateVector g = solver.eigenvectors().col(0);
  CHECK(ground_state_fidelity(hm, g * g.adjoint()) == Approx(1.0).epsilon(1e-10));
  const DensityMatrix eta = testing::random_density(8, rng);
  CHECK(ground_state_fidelity(hm, eta) == Approx(g.dot(eta * g).real()).margin(1e-9));
}

TEST_CASE("degenerate ground spaces use the normalized projector", "[metrics]") {
  // -Z_0 Z_1 has ground space span{|00>, |11>}.
  const ComplexMatrix h = -testing::kron_paulis("ZZ");
  DensityMatrix eta = DensityMatrix::Zero(4, 4);
  eta(0, 0) = eta(3, 3) = 0.5;
  const auto report = ground_state_fidelity_report(h, eta);
  CHECK(report.degenerate);
  CHECK(report.degeneracy == 2);
  CHECK(report.value == Approx(1.0).epsilon(1e-10));
}
