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

/// Parameterized distributions p_phi(s) over n-bit strings.
///
/// Both models are autoregressive: p(s) = prod_i p(s_i | s_<i), with the
/// conditional for position i given by a logit. For the Bernoulli product the
/// logit ignores the prefix. The shared factorization is what makes the exact
/// top-R search in `top_r_states` work for either model.

#include "qbm/linalg.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <concepts>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

namespace qbm {

namespace detail {
/// log(1 + e^x) without overflow.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
/// log p(bit | logit) = log sigmoid(+-logit).
inline double log_bernoulli(int bit, double logit) { return bit ? -softplus(-logit) : -softplus(logit); }
}  // namespace detail

/// Site-independent Bernoulli model with p(s_i = 1) = sigmoid(logit_i).
class BernoulliProduct {
 public:
  BernoulliProduct() = default;
  explicit BernoulliProduct(int n) : n_(n), logits_(RealVector::Zero(n)) {
    if (n < 1) throw std::invalid_argument("BernoulliProduct: n must be >= 1");
  }
  BernoulliProduct(int n, RealVector logits) : n_(n), logits_(std::move(logits)) {
    if (logits_.size() != n) throw std::invalid_argument("BernoulliProduct: expected one logit per site");
  }
  static BernoulliProduct from_probabilities(const std::vector<double>& p) {
    RealVector l(static_cast<Eigen::Index>(p.size()));
    for (std::size_t i = 0; i < p.size(); ++i) l(static_cast<Eigen::Index>(i)) = std::log(p[i]) - std::log1p(-p[i]);
    return {static_cast<int>(p.size()), std::move(l)};
  }

  [[nodiscard]] int num_qubits() const { return n_; }
  [[nodiscard]] Eigen::Index num_params() const { return n_; }
  [[nodiscard]] const RealVector& params() const { return logits_; }
  void set_params(const RealVector& p) {
    if (p.size() != n_) throw std::invalid_argument("BernoulliProduct::set_params: size mismatch");
    logits_ = p;
  }

  /// Logits of all n conditionals given `bits`.
  [[nodiscard]] RealVector conditional_logits(std::uint32_t /*bits*/) const { return logits_; }

  /// d log p(s) / d logits.
  [[nodiscard]] RealVector grad_log_prob_bits(std::uint32_t bits) const {
    RealVector g(n_);
    for (int i = 0; i < n_; ++i) {
      const int bit = static_cast<int>((bits >> (n_ - 1 - i)) & 1U);
      g(i) = bit - detail::sigmoid(logits_(i));
    }
    return g;
  }

 private:
  int n_ = 0;
  RealVector logits_;
};

/// Masked autoregressive network with one tanh hidden layer and logistic
/// conditionals. Hidden unit k has degree m_k in [1, n-1]; input j feeds unit
/// k iff j < m_k, and output i reads unit k iff m_k <= i (0-based positions),
/// so output i depends only on bits < i.
///
/// Parameter layout: W (hidden x n, row-major), c (hidden), V (n x hidden,
/// row-major), b (n). Masked entries stay at zero and receive zero gradient.
class AutoregressiveNet {
 public:
  static constexpr int kDefaultHidden = 50;

  AutoregressiveNet() = default;
  explicit AutoregressiveNet(int n, int hidden = kDefaultHidden)
      : n_(n),
        h_(hidden),
        w_(Eigen::MatrixXd::Zero(hidden, n)),
        c_(RealVector::Zero(hidden)),
        v_(Eigen::MatrixXd::Zero(n, hidden)),
        b_(RealVector::Zero(n)),
        mask_w_(Eigen::MatrixXd::Zero(hidden, n)),
        mask_v_(Eigen::MatrixXd::Zero(n, hidden)) {
    if (n < 1) throw std::invalid_argument("AutoregressiveNet: n must be >= 1");
    if (hidden < 1) throw std::invalid_argument("AutoregressiveNet: hidden width must be >= 1");
    if (n > 1) {
      for (int k = 0; k < hidden; ++k) {
        const int degree = k % (n - 1) + 1;
        for (int j = 0; j < n; ++j) mask_w_(k, j) = j < degree ? 1.0 : 0.0;
        for (int i = 0; i < n; ++i) mask_v_(i, k) = degree <= i ? 1.0 : 0.0;
      }
    }
  }

  /// Weights N(0, stddev), biases zero.
  template <class Rng>
  static AutoregressiveNet random(int n, Rng& rng, double stddev = 0.01, int hidden = kDefaultHidden) {
    AutoregressiveNet net(n, hidden);
    std::normal_distribution<double> normal(0.0, stddev);
    for (int k = 0; k < hidden; ++k)
      for (int j = 0; j < n; ++j) net.w_(k, j) = normal(rng) * net.mask_w_(k, j);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < hidden; ++k) net.v_(i, k) = normal(rng) * net.mask_v_(i, k);
    return net;
  }

  [[nodiscard]] int num_qubits() const { return n_; }
  [[nodiscard]] int hidden() const { return h_; }
  [[nodiscard]] Eigen::Index num_params() const { return Eigen::Index{2} * h_ * n_ + h_ + n_; }

  [[nodiscard]] RealVector params() const {
    RealVector p(num_params());
    Eigen::Index o = 0;
    for (int k = 0; k < h_; ++k)
      for (int j = 0; j < n_; ++j) p(o++) = w_(k, j);
    for (int k = 0; k < h_; ++k) p(o++) = c_(k);
    for (int i = 0; i < n_; ++i)
      for (int k = 0; k < h_; ++k) p(o++) = v_(i, k);
    for (int i = 0; i < n_; ++i) p(o++) = b_(i);
    return p;
  }

  void set_params(const RealVector& p) {
    if (p.size() != num_params()) throw std::invalid_argument("AutoregressiveNet::set_params: size mismatch");
    Eigen::Index o = 0;
    for (int k = 0; k < h_; ++k)
      for (int j = 0; j < n_; ++j) w_(k, j) = p(o++) * mask_w_(k, j);
    for (int k = 0; k < h_; ++k) c_(k) = p(o++);
    for (int i = 0; i < n_; ++i)
      for (int k = 0; k < h_; ++k) v_(i, k) = p(o++) * mask_v_(i, k);
    for (int i = 0; i < n_; ++i) b_(i) = p(o++);
  }

  [[nodiscard]] const Eigen::MatrixXd& input_mask() const { return mask_w_; }
  [[nodiscard]] const Eigen::MatrixXd& output_mask() const { return mask_v_; }

  [[nodiscard]] RealVector conditional_logits(std::uint32_t bits) const {
    const RealVector x = bits_to_vector(bits);
    const RealVector hid = (c_ + w_ * x).array().tanh();
    return b_ + v_ * hid;
  }

  [[nodiscard]] RealVector grad_log_prob_bits(std::uint32_t bits) const {
    const RealVector x = bits_to_vector(bits);
    const RealVector hid = (c_ + w_ * x).array().tanh();
    const RealVector logits = b_ + v_ * hid;
    RealVector delta(n_);  // d log p / d logit_i
    for (int i = 0; i < n_; ++i) delta(i) = x(i) - detail::sigmoid(logits(i));
    const RealVector dhid = v_.transpose() * delta;
    const RealVector dpre = dhid.array() * (1.0 - hid.array().square());

    RealVector g(num_params());
    Eigen::Index o = 0;
    for (int k = 0; k < h_; ++k)
      for (int j = 0; j < n_; ++j) g(o++) = dpre(k) * x(j) * mask_w_(k, j);
    for (int k = 0; k < h_; ++k) g(o++) = dpre(k);
    for (int i = 0; i < n_; ++i)
      for (int k = 0; k < h_; ++k) g(o++) = delta(i) * hid(k) * mask_v_(i, k);
    for (int i = 0; i < n_; ++i) g(o++) = delta(i);
    return g;
  }

 private:
  [[nodiscard]] RealVector bits_to_vector(std::uint32_t bits) const {
    RealVector x(n_);
    for (int i = 0; i < n_; ++i) x(i) = static_cast<double>((bits >> (n_ - 1 - i)) & 1U);
    return x;
  }

  int n_ = 0;
  int h_ = 0;
  Eigen::MatrixXd w_;
  RealVector c_;
  Eigen::MatrixXd v_;
  RealVector b_;
  Eigen::MatrixXd mask_w_;
  Eigen::MatrixXd mask_v_;
};

template <class D>
concept AutoregressiveModel = requires(const D& d, std::uint32_t bits) {
  { d.num_qubits() } -> std::convertible_to<int>;
  { d.conditional_logits(bits) } -> std::convertible_to<RealVector>;
  { d.grad_log_prob_bits(bits) } -> std::convertible_to<RealVector>;
};

/// Runtime-selected p_phi.
class ClassicalDistribution {
 public:
  using Model = std::variant<BernoulliProduct, AutoregressiveNet>;

  ClassicalDistribution() = default;
  ClassicalDistribution(BernoulliProduct m) : model_(std::move(m)) {}     // NOLINT(google-explicit-constructor)
  ClassicalDistribution(AutoregressiveNet m) : model_(std::move(m)) {}    // NOLINT(google-explicit-constructor)

  [[nodiscard]] const Model& model() const { return model_; }
  [[nodiscard]] bool is_autoregressive() const { return std::holds_alternative<AutoregressiveNet>(model_); }
  [[nodiscard]] std::string kind() const { return is_autoregressive() ? "autoregressive" : "bernoulli"; }

  [[nodiscard]] int num_qubits() const {
    return std::visit([](const auto& m) { return m.num_qubits(); }, model_);
  }
  [[nodiscard]] Eigen::Index num_params() const {
    return std::visit([](const auto& m) { return m.num_params(); }, model_);
  }
  [[nodiscard]] RealVector params() const {
    return std::visit([](const auto& m) -> RealVector { return m.params(); }, model_);
  }
  void set_params(const RealVector& p) {
    std::visit([&](auto& m) { m.set_params(p); }, model_);
  }
  [[nodiscard]] RealVector conditional_logits(std::uint32_t bits) const {
    return std::visit([&](const auto& m) { return m.conditional_logits(bits); }, model_);
  }
  [[nodiscard]] RealVector grad_log_prob_bits(std::uint32_t bits) const {
    return std::visit([&](const auto& m) { return m.grad_log_prob_bits(bits); }, model_);
  }

 private:
  Model model_;
};

// ---------------------------------------------------------------------------
// Operations shared by every autoregressive model

template <AutoregressiveModel D>
double log_prob(const D& dist, const Bitstring& s) {
  if (s.size() != dist.num_qubits()) throw std::invalid_argument("log_prob: bitstring length does not match model");
  const RealVector logits = dist.conditional_logits(s.value());
  double lp = 0.0;
  for (int i = 0; i < s.size(); ++i) lp += detail::log_bernoulli(s.bit(i), logits(i));
  return lp;
}

template <AutoregressiveModel D>
RealVector grad_log_prob(const D& dist, const Bitstring& s) {
  if (s.size() != dist.num_qubits()) throw std::invalid_argument("grad_log_prob: bitstring length does not match model");
  return dist.grad_log_prob_bits(s.value());
}

/// Ancestral sampling, one bit at a time.
template <AutoregressiveModel D, class Rng>
std::vector<Bitstring> sample(const D& dist, Rng& rng, std::size_t count) {
  const int n = dist.num_qubits();
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<Bitstring> out;
  out.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    std::uint32_t bits = 0;
    for (int i = 0; i < n; ++i) {
      const double p1 = detail::sigmoid(dist.conditional_logits(bits)(i));
      if (uniform(rng) < p1) bits |= qubit_mask(n, i);
    }
    out.emplace_back(n, bits);
  }
  return out;
}

/// Full distribution over all 2^n states, indexed by basis value.
template <AutoregressiveModel D>
RealVector enumerate_probabilities(const D& dist) {
  const int n = dist.num_qubits();
  RealVector p(Eigen::Index{1} << n);
  for (Eigen::Index v = 0; v < p.size(); ++v) p(v) = std::exp(log_prob(dist, Bitstring(n, static_cast<std::uint32_t>(v))));
  return p;
}

struct TopStates {
  std::vector<Bitstring> states;
  std::vector<double> log_probs;  // unnormalized log p_phi(s)
  std::vector<double> probs;      // renormalized over the R states
};

/// The R most probable states, by best-first search over the prefix tree.
///
/// A prefix's log-probability bounds every completion from above, and the
/// smallest completion value is prefix << (n - len), so the key
/// (log p desc, smallest completion asc) never improves going down the tree.
/// Complete strings are therefore popped in exact (probability desc, value asc)
/// order.
template <AutoregressiveModel D>
TopStates top_r_states(const D& dist, int rank) {
  const int n = dist.num_qubits();
  if (rank < 1 || static_cast<std::uint64_t>(rank) > (std::uint64_t{1} << n)) throw std::invalid_argument("top_r_states: rank out of range");
  struct Node {
    double lp;
    std::uint32_t min_completion;
    int len;
    std::uint32_t bits;  // prefix bits placed at their final positions
  };
  auto worse = [](const Node& a, const Node& b) {
    return std::tie(b.lp, a.min_completion, b.len) > std::tie(a.lp, b.min_completion, a.len);
  };
  std::priority_queue<Node, std::vector<Node>, decltype(worse)> frontier(worse);
  frontier.push({0.0, 0U, 0, 0U});
  TopStates out;
  while (static_cast<int>(out.states.size()) < rank) {
    const Node node = frontier.top();
    frontier.pop();
    if (node.len == n) {
      out.states.emplace_back(n, node.bits);
      out.log_probs.push_back(node.lp);
      continue;
    }
    const double logit = dist.conditional_logits(node.bits)(node.len);
    const std::uint32_t m = qubit_mask(n, node.len);
    frontier.push({node.lp + detail::log_bernoulli(0, logit), node.bits, node.len + 1, node.bits});
    frontier.push({node.lp + detail::log_bernoulli(1, logit), node.bits | m, node.len + 1, node.bits | m});
  }
  double max_lp = out.log_probs.front();
  double z = 0.0;
  for (double lp : out.log_probs) z += std::exp(lp - max_lp);
  for (double lp : out.log_probs) out.probs.push_back(std::exp(lp - max_lp) / z);
  return out;
}

// ---------------------------------------------------------------------------
// JSON checkpointing

inline nlohmann::json to_json(const ClassicalDistribution& d) {
  const RealVector p = d.params();
  nlohmann::json j = {{"kind", d.kind()}, {"n", d.num_qubits()}, {"params", std::vector<double>(p.data(), p.data() + p.size())}};
  if (const auto* net = std::get_if<AutoregressiveNet>(&d.model())) j["hidden"] = net->hidden();
  return j;
}

inline ClassicalDistribution distribution_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  const int n = j.at("n").get<int>();
  const auto p = j.at("params").get<std::vector<double>>();
  const RealVector params = Eigen::Map<const RealVector>(p.data(), static_cast<Eigen::Index>(p.size()));
  if (kind == "bernoulli") return BernoulliProduct(n, params);
  if (kind == "autoregressive") {
    AutoregressiveNet net(n, j.value("hidden", AutoregressiveNet::kDefaultHidden));
    net.set_params(params);
    return net;
  }
  throw std::invalid_argument("unknown distribution kind '" + kind + "'");
}

}  // namespace qbm
