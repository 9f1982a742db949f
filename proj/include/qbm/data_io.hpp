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

/// Classical bitstring datasets and target density matrices.
///
/// Dataset text format: UTF-8, one bitstring of '0'/'1' per line. Lines whose
/// first non-blank character is '#' are comments; blank lines and trailing
/// whitespace are ignored. Every bitstring must have the same length.

#include "qbm/gibbs.hpp"
#include "qbm/hamiltonian.hpp"
#include "qbm/linalg.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qbm {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, int line) : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  [[nodiscard]] int line() const { return line_; }

 private:
  int line_;
};

struct BitstringDataset {
  int n = 0;
  std::vector<Bitstring> samples;

  /// Empirical p(s) over all 2^n basis values.
  [[nodiscard]] RealVector empirical_distribution() const {
    if (samples.empty()) throw std::invalid_argument("empirical_distribution: empty dataset");
    RealVector p = RealVector::Zero(Eigen::Index{1} << n);
    for (const auto& s : samples) p(s.value()) += 1.0;
    return p / static_cast<double>(samples.size());
  }
};

inline BitstringDataset parse_dataset(std::istream& in) {
  BitstringDataset ds;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string bits = line.substr(first, last - first + 1);
    for (char c : bits)
      if (c != '0' && c != '1') throw ParseError("invalid character '" + std::string(1, c) + "' in bitstring", lineno);
    if (ds.samples.empty()) {
      if (bits.size() > 30) throw ParseError("bitstring longer than 30 bits", lineno);
      ds.n = static_cast<int>(bits.size());
    } else if (static_cast<int>(bits.size()) != ds.n) {
      throw ParseError("bitstring length " + std::to_string(bits.size()) + " differs from " + std::to_string(ds.n), lineno);
    }
    ds.samples.push_back(Bitstring::parse(bits));
  }
  if (ds.samples.empty()) throw ParseError("dataset contains no bitstrings", lineno);
  return ds;
}

inline BitstringDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  return parse_dataset(in);
}

inline void write_dataset(std::ostream& out, const BitstringDataset& ds) {
  for (const auto& s : ds.samples) out << s.to_string() << '\n';
}

/// |psi><psi| with psi = sum_s sqrt(p(s)) |s>.
inline DensityMatrix embed_pure_state(const RealVector& p) {
  const StateVector psi = p.cwiseMax(0.0).cwiseSqrt().cast<cx>();
  return psi * psi.adjoint();
}

inline DensityMatrix embed_pure_state(const BitstringDataset& ds) { return embed_pure_state(ds.empirical_distribution()); }

/// Energy E(s) = -sum_i h_i z_i - sum_{i<j} J_ij z_i z_j with z = 1 - 2 s.
struct ClassicalIsing {
  int n = 0;
  RealVector fields;
  Eigen::MatrixXd couplings;  // upper triangle used

  [[nodiscard]] double energy(std::uint32_t bits) const {
    RealVector z(n);
    for (int i = 0; i < n; ++i) z(i) = ((bits >> (n - 1 - i)) & 1U) ? -1.0 : 1.0;
    double e = -fields.dot(z);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) e -= couplings(i, j) * z(i) * z(j);
    return e;
  }

  /// Exact Boltzmann distribution by enumeration.
  [[nodiscard]] RealVector distribution() const {
    RealVector e(Eigen::Index{1} << n);
    for (Eigen::Index v = 0; v < e.size(); ++v) e(v) = energy(static_cast<std::uint32_t>(v));
    RealVector p = (-(e.array() - e.minCoeff())).exp();
    return p / p.sum();
  }
};

/// Silence bias of the synthetic fields; keeps firing sparse as in spike data.
inline constexpr double kSpikeFieldBias = 3.0;

/// Random pairwise Ising model scaled by `corr`: couplings ~ corr N(0, 1) and
/// fields ~ corr (kSpikeFieldBias + N(0, 1/4)), favouring the silent bit 0.
/// The unscaled draws do not depend on corr, so one seed gives one energy
/// landscape at a family of inverse temperatures.
template <class Rng>
ClassicalIsing random_ising(int n, double corr, Rng& rng) {
  ClassicalIsing m;
  m.n = n;
  m.fields = RealVector::Zero(n);
  m.couplings = Eigen::MatrixXd::Zero(n, n);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < n; ++i) m.fields(i) = corr * (kSpikeFieldBias + 0.5 * normal(rng));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) m.couplings(i, j) = corr * normal(rng);
  return m;
}

/// Exact i.i.d. draws from a distribution over basis values.
template <class Rng>
BitstringDataset sample_dataset(int n, const RealVector& p, int count, Rng& rng) {
  std::discrete_distribution<std::uint32_t> pick(p.data(), p.data() + p.size());
  BitstringDataset ds;
  ds.n = n;
  ds.samples.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) ds.samples.emplace_back(n, pick(rng));
  return ds;
}

/// Correlated binary "spike" data: N exact samples from a random Ising model.
template <class Rng>
BitstringDataset synth_spike_data(int n, int count, Rng& rng, double corr) {
  if (n < 2) throw std::invalid_argument("synth_spike_data: need n >= 2");
  if (count < 1) throw std::invalid_argument("synth_spike_data: need at least one sample");
  const ClassicalIsing model = random_ising(n, corr, rng);
  return sample_dataset(n, model.distribution(), count, rng);
}

/// Gibbs state of the open-chain XXZ model.
inline DensityMatrix make_quantum_target(int n, double j, double delta, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("make_quantum_target: beta must be positive");
  return gibbs_state(dense_matrix(build_xxz(n, j, delta)), beta);
}

/// sum_s p log(p / q); +infinity when p has mass where q has none.
inline double kl_divergence(const RealVector& p, const RealVector& q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: length mismatch");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) <= 0.0) continue;
    if (q(i) <= 0.0) return std::numeric_limits<double>::infinity();
    kl += p(i) * std::log(p(i) / q(i));
  }
  return std::max(kl, 0.0);
}

inline double shannon_entropy(const RealVector& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p(i) > 0.0) h -= p(i) * std::log(p(i));
  return h;
}

}  // namespace qbm
