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

#include "qbm/data_io.hpp"
#include "qbm/metrics.hpp"
#include "test_util.hpp"

#include <random>
#include <sstream>

using namespace qbm;
using Catch::Approx;

namespace {

BitstringDataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_dataset(in);
}

// Pairwise <z_i z_j> with z = 1 - 2s.
double zz(const RealVector& p, int n, int i, int j) {
  double c = 0.0;
  for (Eigen::Index v = 0; v < p.size(); ++v) {
    const double zi = ((v >> (n - 1 - i)) & 1) ? -1.0 : 1.0;
    const double zj = ((v >> (n - 1 - j)) & 1) ? -1.0 : 1.0;
    c += p(v) * zi * zj;
  }
  return c;
}

}  // namespace

TEST_CASE("dataset parsing", "[data]") {
  const auto ds = parse("01\n01\n10\n");
  CHECK(ds.n == 2);
  const RealVector p = ds.empirical_distribution();
  CHECK(p(1) == Approx(2.0 / 3.0));
  CHECK(p(2) == Approx(1.0 / 3.0));
  CHECK(p.sum() == Approx(1.0));

  const auto commented = parse("# header\n  \n0110  \n# trailing comment\n1001\r\n");
  CHECK(commented.samples.size() == 2);
  CHECK(commented.samples[1].to_string() == "1001");
}

TEST_CASE("dataset parse errors carry line numbers", "[data]") {
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(parse("# only comments\n"), ParseError);
  try {
    parse("01\n0x\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  try {
    parse("01\n\n011\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS(load_dataset("/nonexistent/path/data.txt"));
}

TEST_CASE("write then parse round trip", "[data]") {
  const auto ds = parse("101\n011\n");
  std::ostringstream out;
  write_dataset(out, ds);
  CHECK(parse(out.str()).samples == ds.samples);
}

TEST_CASE("pure-state embedding", "[data]") {
  const DensityMatrix single = embed_pure_state(parse("10\n10\n"));
  CHECK(std::abs(single(2, 2) - 1.0) < 1e-15);
  CHECK(std::abs(single.sum() - 1.0) < 1e-15);

  const DensityMatrix plus = embed_pure_state(RealVector::Constant(8, 1.0 / 8));
  CHECK((plus - ComplexMatrix::Constant(8, 8, 1.0 / 8)).cwiseAbs().maxCoeff() < 1e-15);

  const DensityMatrix eta = embed_pure_state(parse("01\n01\n10\n"));
  CHECK(eta(1, 2).real() == Approx(std::sqrt(2.0 / 9.0)).epsilon(1e-14));
}

TEST_CASE("embedding is rank one with the data on its diagonal", "[data][property]") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    const auto ds = synth_spike_data(4, 500, rng, 1.0);
    const RealVector p = ds.empirical_distribution();
    const DensityMatrix eta = embed_pure_state(ds);
    const auto eig = hermitian_eig(eta);
    CHECK(eig.eigenvalues(14) < 1e-12);
    CHECK((eta.diagonal().real() - p).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(eta.trace().real() - 1.0) < 1e-12);
  }
}

TEST_CASE("synthetic spike data", "[data]") {
  std::mt19937_64 a(2);
  std::mt19937_64 b(2);
  CHECK(synth_spike_data(4, 100, a, 1.0).samples == synth_spike_data(4, 100, b, 1.0).samples);

  // corr = 0: every marginal is Bernoulli(1/2), within a 3 sigma band.
  std::mt19937_64 rng(3);
  const int count = 10000;
  const auto flat = synth_spike_data(4, count, rng, 0.0);
  for (int i = 0; i < 4; ++i) {
    double ones = 0.0;
    for (const auto& s : flat.samples) ones += s.bit(i);
    CHECK(std::abs(ones / count - 0.5) < 3.0 * 0.5 / std::sqrt(count));
  }

  // corr = 2: empirical correlations track the enumerated model.
  std::mt19937_64 model_rng(4);
  const ClassicalIsing model = random_ising(4, 2.0, model_rng);
  std::mt19937_64 draw_rng(5);
  const auto ds = sample_dataset(4, model.distribution(), count, draw_rng);
  const RealVector p_emp = ds.empirical_distribution();
  const RealVector p_model = model.distribution();
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) CHECK(std::abs(zz(p_emp, 4, i, j) - zz(p_model, 4, i, j)) < 0.05);

  CHECK_THROWS_AS(synth_spike_data(1, 10, rng, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(synth_spike_data(4, 0, rng, 1.0), std::invalid_argument);
}

TEST_CASE("stronger couplings give lower-entropy data", "[data][property]") {
  double previous = 1e9;
  for (double corr : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    std::mt19937_64 rng(6);
    const double h = shannon_entropy(synth_spike_data(6, 20000, rng, corr).empirical_distribution());
    CHECK(h < previous);
    previous = h;
  }
}

TEST_CASE("quantum targets", "[data]") {
  const DensityMatrix hot = make_quantum_target(4, -1.0, -0.5, 1e-6);
  CHECK(fidelity(hot, ComplexMatrix::Identity(16, 16) / 16.0) > 0.999);

  const DensityMatrix t2 = make_quantum_target(2, -1.0, -0.5, 1.0);
  const ComplexMatrix h = -1.0 * (testing::kron_paulis("XX") + testing::kron_paulis("YY")) - 0.5 * testing::kron_paulis("ZZ");
  const ComplexMatrix e = testing::expm_series(-h);
  CHECK((t2 - e / e.trace()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(make_quantum_target(2, 1.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("KL divergence", "[data]") {
  const RealVector p = (RealVector(2) << 1.0, 0.0).finished();
  const RealVector q = (RealVector(2) << 0.5, 0.5).finished();
  CHECK(kl_divergence(q, q) == 0.0);
  CHECK(kl_divergence(p, q) == Approx(std::log(2.0)));
  CHECK(std::isinf(kl_divergence(q, p)));

  // Compensated summation oracle on a random pair.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  RealVector a(8), b(8);
  for (int i = 0; i < 8; ++i) {
    a(i) = u(rng);
    b(i) = u(rng);
  }
  a /= a.sum();
  b /= b.sum();
  long double acc = 0.0L;
  for (int i = 0; i < 8; ++i) acc += static_cast<long double>(a(i)) * std::log(static_cast<long double>(a(i)) / static_cast<long double>(b(i)));
  CHECK(kl_divergence(a, b) == Approx(static_cast<double>(acc)).epsilon(1e-13));
}
