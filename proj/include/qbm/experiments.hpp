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

/// Seeded experiment runners behind the command-line tool.
///
/// Every runner is a pure function of its ExperimentConfig: all randomness is
/// derived from the config seed, sweep points get their own child seeds, and
/// no wall-clock data reaches the CSV files unless asked for. Each runner
/// writes into `out_dir` and returns the numbers it wrote.

#include "qbm/betavqe.hpp"
#include "qbm/data_io.hpp"
#include "qbm/gibbs.hpp"
#include "qbm/hamiltonian.hpp"
#include "qbm/metrics.hpp"
#include "qbm/trainer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace qbm {

/// Raised for malformed or incomplete experiment configurations.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ExperimentKind { TrainClassical, TrainQuantum, RankSweep, SizeSweep, DepthSweep, ShotsRun, Rank1Failure, ExactBaseline };

inline const std::vector<std::pair<ExperimentKind, std::string>>& experiment_kind_names() {
  static const std::vector<std::pair<ExperimentKind, std::string>> names = {
      {ExperimentKind::TrainClassical, "train-classical"}, {ExperimentKind::TrainQuantum, "train-quantum"},
      {ExperimentKind::RankSweep, "rank-sweep"},           {ExperimentKind::SizeSweep, "size-sweep"},
      {ExperimentKind::DepthSweep, "depth-sweep"},         {ExperimentKind::ShotsRun, "shots-run"},
      {ExperimentKind::Rank1Failure, "rank1-failure"},     {ExperimentKind::ExactBaseline, "exact-baseline"}};
  return names;
}

inline std::string to_string(ExperimentKind k) {
  for (const auto& [kind, name] : experiment_kind_names())
    if (kind == k) return name;
  return "?";
}

inline ExperimentKind parse_experiment_kind(const std::string& s) {
  for (const auto& [kind, name] : experiment_kind_names())
    if (name == s) return kind;
  throw ValidationError("kind: unknown experiment '" + s + "'");
}

struct TargetSpec {
  enum class Type { None, Dataset, Synthetic, Xxz };
  Type type = Type::None;
  std::string dataset;  // Dataset
  int n = 0;            // Synthetic, Xxz
  int samples = 5000;   // Synthetic
  double corr = 1.0;    // Synthetic
  double j = -1.0;      // Xxz
  double delta = -0.5;  // Xxz
  double beta = 1.0;    // Xxz
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::TrainClassical;
  std::uint64_t seed = 1;
  TargetSpec target;
  int depth = -1;  // -1: equal to n
  int rank = 2;
  long shots = 0;
  std::vector<int> ranks;
  std::vector<int> depths;
  std::vector<int> sizes;
  std::vector<long> shots_list;
  std::vector<std::uint64_t> seeds;
  OuterLoopConfig outer;
  bool outer_lr_given = false;
  double theta_init_std = 0.01;
  int restarts = 1;  // depth sweep: independent fits per depth, lowest free energy kept
  DistributionKind distribution = DistributionKind::Autoregressive;
  long shots_inner_max_iters = 200;  // inner cap when every statistic is shot-based
  int gap_count = 4;
  double gap_threshold = 0.1;  // in units of 1/beta
  double spike_factor = 3.0;
  int spike_window = 10;
  int plateau_window = 20;
  int threads = 1;
  std::string out_dir = "out";
};

// ---------------------------------------------------------------------------
// JSON schema

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError(where + ": expected a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw ValidationError((where.empty() ? key : where + "." + key) + ": unknown field");
}

template <class T>
void read(const nlohmann::json& j, const char* key, const std::string& where, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError((where.empty() ? std::string(key) : where + "." + key) + ": wrong type");
  }
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  using K = ExperimentKind;
  using T = TargetSpec::Type;
  const bool classical = c.target.type == T::Dataset || c.target.type == T::Synthetic;
  switch (c.kind) {
    case K::TrainClassical:
    case K::ExactBaseline:
    case K::ShotsRun:
    case K::Rank1Failure:
      if (c.target.type == T::None) throw ValidationError("target.dataset: required (or target.synthetic)");
      if (c.kind == K::TrainClassical && !classical) throw ValidationError("target: train-classical needs target.dataset or target.synthetic");
      if (c.kind == K::Rank1Failure && c.target.type != T::Synthetic) throw ValidationError("target.synthetic: rank1-failure draws one synthetic target per seed");
      break;
    case K::TrainQuantum:
    case K::DepthSweep:
      if (c.target.type != T::Xxz) throw ValidationError("target.xxz: required for " + to_string(c.kind));
      break;
    case K::RankSweep:
      if (c.target.type == T::None) throw ValidationError("target: required");
      if (c.ranks.empty()) throw ValidationError("ranks: required for rank-sweep");
      break;
    case K::SizeSweep:
      if (c.target.type != T::Synthetic) throw ValidationError("target.synthetic: required for size-sweep");
      if (c.sizes.empty()) throw ValidationError("sizes: required for size-sweep");
      break;
  }
  if (c.kind == K::DepthSweep && c.depths.empty()) throw ValidationError("depths: required for depth-sweep");
  if (c.target.type == T::Synthetic || c.target.type == T::Xxz) {
    if (c.kind != K::SizeSweep && (c.target.n < 2 || c.target.n > 12)) throw ValidationError("target.n: must lie in [2, 12]");
    if (c.target.n % 2 != 0 && c.kind != K::SizeSweep) throw ValidationError("target.n: the circuit ansatz needs an even qubit count");
  }
  if (c.target.type == T::Dataset && !std::filesystem::is_regular_file(c.target.dataset))
    throw ValidationError("target.dataset: no such file '" + c.target.dataset + "'");
  if (c.target.type == T::Synthetic && c.target.samples < 1) throw ValidationError("target.synthetic.samples: must be >= 1");
  if (c.target.type == T::Xxz && !(c.target.beta > 0.0)) throw ValidationError("target.xxz.beta: must be > 0");
  if (c.rank < 1) throw ValidationError("rank: must be >= 1");
  if (c.shots < 0) throw ValidationError("shots: must be >= 0");
  if (c.kind == K::ShotsRun && c.shots == 0 && c.shots_list.empty()) throw ValidationError("shots: required (> 0) for shots-run");
  for (int r : c.ranks)
    if (r < 1) throw ValidationError("ranks: entries must be >= 1");
  for (int d : c.depths)
    if (d < 0) throw ValidationError("depths: entries must be >= 0");
  for (int n : c.sizes)
    if (n < 2 || n > 12 || n % 2 != 0) throw ValidationError("sizes: entries must be even and in [2, 12]");
  for (long m : c.shots_list)
    if (m < 1) throw ValidationError("shots_list: entries must be >= 1");
  if (c.threads < 1) throw ValidationError("threads: must be >= 1");
  if (c.gap_count < 1) throw ValidationError("spectral_gaps.count: must be >= 1");
  if (c.plateau_window < 1) throw ValidationError("plateau_window: must be >= 1");
  if (c.restarts < 1) throw ValidationError("init.restarts: must be >= 1");
  try {
    c.outer.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("outer/inner: ") + e.what());
  }
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json target;
  switch (c.target.type) {
    case TargetSpec::Type::None: break;
    case TargetSpec::Type::Dataset: target = {{"dataset", c.target.dataset}}; break;
    case TargetSpec::Type::Synthetic:
      target = {{"synthetic", {{"n", c.target.n}, {"samples", c.target.samples}, {"corr", c.target.corr}}}};
      break;
    case TargetSpec::Type::Xxz:
      target = {{"xxz", {{"n", c.target.n}, {"J", c.target.j}, {"delta", c.target.delta}, {"beta", c.target.beta}}}};
      break;
  }
  const auto& o = c.outer;
  const auto& i = o.inner;
  return {{"kind", to_string(c.kind)},
          {"seed", c.seed},
          {"target", target},
          {"depth", c.depth},
          {"rank", c.rank},
          {"shots", c.shots},
          {"ranks", c.ranks},
          {"depths", c.depths},
          {"sizes", c.sizes},
          {"shots_list", c.shots_list},
          {"seeds", c.seeds},
          {"outer",
           {{"max_iters", o.max_iters},
            {"momentum", o.momentum},
            {"learning_rate", o.learning_rate},
            {"lr_increase", o.lr_increase},
            {"lr_decrease", o.lr_decrease},
            {"adaptive_lr", o.adaptive_lr},
            {"grad_tolerance", o.grad_tolerance},
            {"oracle_max_qubits", o.oracle_max_qubits},
            {"record_wall_time", o.record_wall_time}}},
          {"inner",
           {{"grad_tolerance", i.grad_tolerance},
            {"max_iters", i.max_iters},
            {"step_size", i.step_size},
            {"phi_step_size", i.phi_step_size},
            {"beta1", i.beta1},
            {"beta2", i.beta2},
            {"shots_max_iters", c.shots_inner_max_iters}}},
          {"init", {{"theta_std", c.theta_init_std}, {"restarts", c.restarts}, {"distribution", c.distribution == DistributionKind::Autoregressive ? "autoregressive" : "bernoulli"}}},
          {"spectral_gaps", {{"count", c.gap_count}, {"threshold", c.gap_threshold}, {"spike_factor", c.spike_factor}, {"spike_window", c.spike_window}}},
          {"plateau_window", c.plateau_window}};
}

/// Parses the JSON schema written by `to_json`. `kind` comes from the
/// subcommand; a "kind" field in the document must agree with it.
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentKind kind) {
  using detail::read;
  detail::reject_unknown(j, "", {"kind", "seed", "target", "depth", "rank", "shots", "ranks", "depths", "sizes", "shots_list", "seeds", "outer",
                                 "inner", "init", "spectral_gaps", "plateau_window", "threads", "out_dir"});
  ExperimentConfig c;
  c.kind = kind;
  if (j.contains("kind")) {
    std::string k;
    read(j, "kind", "", k);
    if (parse_experiment_kind(k) != kind) throw ValidationError("kind: config is for '" + k + "' but the subcommand is '" + to_string(kind) + "'");
  }
  read(j, "seed", "", c.seed);
  read(j, "depth", "", c.depth);
  read(j, "rank", "", c.rank);
  read(j, "shots", "", c.shots);
  read(j, "ranks", "", c.ranks);
  read(j, "depths", "", c.depths);
  read(j, "sizes", "", c.sizes);
  read(j, "shots_list", "", c.shots_list);
  read(j, "seeds", "", c.seeds);
  read(j, "plateau_window", "", c.plateau_window);
  read(j, "threads", "", c.threads);
  read(j, "out_dir", "", c.out_dir);

  if (j.contains("target") && !j.at("target").is_null()) {
    const auto& t = j.at("target");
    detail::reject_unknown(t, "target", {"dataset", "synthetic", "xxz"});
    if (t.size() != 1) throw ValidationError("target: give exactly one of dataset, synthetic, xxz");
    if (t.contains("dataset")) {
      c.target.type = TargetSpec::Type::Dataset;
      read(t, "dataset", "target", c.target.dataset);
      if (c.target.dataset.empty()) throw ValidationError("target.dataset: empty path");
    } else if (t.contains("synthetic")) {
      const auto& s = t.at("synthetic");
      detail::reject_unknown(s, "target.synthetic", {"n", "samples", "corr"});
      c.target.type = TargetSpec::Type::Synthetic;
      read(s, "n", "target.synthetic", c.target.n);
      read(s, "samples", "target.synthetic", c.target.samples);
      read(s, "corr", "target.synthetic", c.target.corr);
    } else {
      const auto& x = t.at("xxz");
      detail::reject_unknown(x, "target.xxz", {"n", "J", "delta", "beta"});
      c.target.type = TargetSpec::Type::Xxz;
      read(x, "n", "target.xxz", c.target.n);
      read(x, "J", "target.xxz", c.target.j);
      read(x, "delta", "target.xxz", c.target.delta);
      read(x, "beta", "target.xxz", c.target.beta);
    }
  }

  // Learning-rate default depends on the target family.
  c.outer.learning_rate = c.target.type == TargetSpec::Type::Xxz ? 0.01 : 0.05;
  if (j.contains("outer")) {
    const auto& o = j.at("outer");
    detail::reject_unknown(o, "outer", {"max_iters", "momentum", "learning_rate", "lr_increase", "lr_decrease", "adaptive_lr", "grad_tolerance",
                                        "oracle_max_qubits", "record_wall_time"});
    read(o, "max_iters", "outer", c.outer.max_iters);
    read(o, "momentum", "outer", c.outer.momentum);
    c.outer_lr_given = o.contains("learning_rate");
    read(o, "learning_rate", "outer", c.outer.learning_rate);
    read(o, "lr_increase", "outer", c.outer.lr_increase);
    read(o, "lr_decrease", "outer", c.outer.lr_decrease);
    read(o, "adaptive_lr", "outer", c.outer.adaptive_lr);
    read(o, "grad_tolerance", "outer", c.outer.grad_tolerance);
    read(o, "oracle_max_qubits", "outer", c.outer.oracle_max_qubits);
    read(o, "record_wall_time", "outer", c.outer.record_wall_time);
  }
  if (j.contains("inner")) {
    const auto& i = j.at("inner");
    detail::reject_unknown(i, "inner", {"grad_tolerance", "max_iters", "step_size", "phi_step_size", "beta1", "beta2", "shots_max_iters"});
    auto& ic = c.outer.inner;
    read(i, "grad_tolerance", "inner", ic.grad_tolerance);
    read(i, "max_iters", "inner", ic.max_iters);
    read(i, "step_size", "inner", ic.step_size);
    read(i, "phi_step_size", "inner", ic.phi_step_size);
    read(i, "beta1", "inner", ic.beta1);
    read(i, "beta2", "inner", ic.beta2);
    read(i, "shots_max_iters", "inner", c.shots_inner_max_iters);
  }
  if (j.contains("init")) {
    const auto& i = j.at("init");
    detail::reject_unknown(i, "init", {"theta_std", "distribution", "restarts"});
    read(i, "theta_std", "init", c.theta_init_std);
    read(i, "restarts", "init", c.restarts);
    std::string dist = "autoregressive";
    read(i, "distribution", "init", dist);
    if (dist == "autoregressive")
      c.distribution = DistributionKind::Autoregressive;
    else if (dist == "bernoulli")
      c.distribution = DistributionKind::Bernoulli;
    else
      throw ValidationError("init.distribution: expected 'autoregressive' or 'bernoulli'");
  }
  if (j.contains("spectral_gaps")) {
    const auto& g = j.at("spectral_gaps");
    detail::reject_unknown(g, "spectral_gaps", {"count", "threshold", "spike_factor", "spike_window"});
    read(g, "count", "spectral_gaps", c.gap_count);
    read(g, "threshold", "spectral_gaps", c.gap_threshold);
    read(g, "spike_factor", "spectral_gaps", c.spike_factor);
    read(g, "spike_window", "spectral_gaps", c.spike_window);
  }
  validate(c);
  return c;
}

/// FNV-1a over the canonical (key-sorted) JSON echo.
inline std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return detail::hex64(h);
}

// ---------------------------------------------------------------------------
// Shared plumbing

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) { write_file(path, j.dump(2) + "\n"); }

/// Runs independent jobs on up to `threads` workers; results keep job order.
template <class R>
std::vector<R> run_jobs(const std::vector<std::function<R()>>& jobs, int threads) {
  std::vector<std::optional<R>> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  auto work = [&](std::size_t i) {
    try {
      results[i] = jobs[i]();
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (threads <= 1 || jobs.size() <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(threads), jobs.size());
    for (std::size_t t = 0; t < count; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) work(i);
      });
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<R> out;
  out.reserve(results.size());
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

inline std::string csv_num(double v) { return fmt_num(v); }

}  // namespace detail

/// Target density matrix for a spec. Synthetic data is drawn from a child
/// stream of `seed`, so every sweep point with the same seed sees the same data.
inline DensityMatrix build_target(const TargetSpec& t, int n, std::uint64_t seed) {
  switch (t.type) {
    case TargetSpec::Type::Dataset: {
      const auto ds = load_dataset(t.dataset);
      if (ds.n % 2 != 0) throw ValidationError("target.dataset: bitstring length must be even for the circuit ansatz");
      return embed_pure_state(ds);
    }
    case TargetSpec::Type::Synthetic: {
      std::mt19937_64 rng(child_seed(seed, 0x5EED));
      return embed_pure_state(synth_spike_data(n, t.samples, rng, t.corr));
    }
    case TargetSpec::Type::Xxz: return make_quantum_target(n, t.j, t.delta, t.beta);
    case TargetSpec::Type::None: break;
  }
  throw ValidationError("target: missing");
}

inline int target_qubits(const ExperimentConfig& c) {
  if (c.target.type == TargetSpec::Type::Dataset) return load_dataset(c.target.dataset).n;
  return c.target.n;
}

/// One complete training run and the numbers reported for it.
struct TrainingRun {
  TrainResult result;
  FidelityReport fidelity;
  double final_relative_entropy = NAN;
  int n = 0;
  int depth = 0;
  int rank = 0;
  long shots = 0;
};

struct TrainingSpec {
  int n = 0;
  int depth = 0;
  int rank = 2;
  long shots = 0;
  StatisticsSource source = StatisticsSource::BetaVqe;
  std::uint64_t seed = 1;
  int gap_count = 0;
};

/// Trains on `target`. Initial weights and the initial beta-VQE state come
/// from fixed child streams of the seed, so runs that differ only in the
/// statistics source or rank start from the same point.
inline TrainingRun run_training(const ExperimentConfig& cfg, const DensityMatrix& target, const TrainingSpec& spec,
                                const std::filesystem::path& out_dir) {
  std::mt19937_64 weight_rng(child_seed(spec.seed, 0x3E16));
  std::mt19937_64 vqe_rng(child_seed(spec.seed, 0xB7A));
  const HamiltonianAnsatz ansatz = init_weights(build_qbm_ansatz(spec.n), weight_rng);
  std::optional<BetaVqeState> vqe;
  if (spec.source == StatisticsSource::BetaVqe) vqe = make_beta_vqe_state(spec.n, spec.depth, spec.rank, vqe_rng, cfg.distribution, cfg.theta_init_std);

  OuterLoopConfig oc = cfg.outer;
  oc.source = spec.source;
  oc.seed = spec.seed;
  oc.shots = spec.shots;
  oc.inner.shots = spec.shots;
  if (spec.shots > 0) oc.inner.max_iters = std::min(oc.inner.max_iters, static_cast<int>(cfg.shots_inner_max_iters));
  oc.spectral_gap_count = spec.gap_count;
  std::filesystem::create_directories(out_dir / "checkpoints");
  oc.checkpoint_path = (out_dir / "checkpoints" / "checkpoint.json").string();

  TrainingRun run;
  run.n = spec.n;
  run.depth = spec.depth;
  run.rank = spec.rank;
  run.shots = spec.shots;
  run.result = outer_loop(target, ansatz, oc, vqe);

  const ThermalState th = thermal_state(dense_matrix(run.result.model), 1.0);
  const FidelityOracle fid(target);
  run.fidelity.qbm = fid(th.rho);
  const auto gs = ground_state_fidelity_report(th.spectrum, target);
  run.fidelity.ground = gs.value;
  run.fidelity.ground_degenerate = gs.degenerate;
  if (run.result.vqe) run.fidelity.beta_vqe = fid(density_matrix(*run.result.vqe));
  const int dim = static_cast<int>(target.rows());
  run.fidelity.ceiling = fid(exact_rank_truncation(target, std::min(spec.rank, dim)));
  run.final_relative_entropy = std::max(neg_entropy(target) + target_statistics(target, run.result.model).dot(run.result.model.weights) + th.log_partition, 0.0);

  std::ostringstream csv;
  write_trace_csv(csv, run.result.trace);
  detail::write_file(out_dir / "trace.csv", csv.str());
  nlohmann::json fj = {{"config_hash", config_hash(cfg)},
                       {"seed", spec.seed},
                       {"n", spec.n},
                       {"depth", spec.depth},
                       {"rank", spec.rank},
                       {"shots", spec.shots},
                       {"source", to_string(spec.source)},
                       {"fidelity_beta_vqe", run.result.vqe ? nlohmann::json(run.fidelity.beta_vqe) : nlohmann::json(nullptr)},
                       {"fidelity_qbm", run.fidelity.qbm},
                       {"fidelity_ground", run.fidelity.ground},
                       {"ground_degenerate", run.fidelity.ground_degenerate},
                       {"fidelity_ceiling", *run.fidelity.ceiling},
                       {"final_relative_entropy", run.final_relative_entropy},
                       {"iterations", run.result.trace.rows.size()},
                       {"converged", run.result.trace.converged},
                       {"statistic_estimations", run.result.trace.statistic_estimations}};
  detail::write_json_file(out_dir / "fidelity.json", fj);
  return run;
}

inline void write_config_echo(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  nlohmann::json j = to_json(cfg);
  j["config_hash"] = config_hash(cfg);
  detail::write_json_file(out_dir / "config-echo.json", j);
}

inline int resolved_depth(const ExperimentConfig& cfg, int n) { return cfg.depth >= 0 ? cfg.depth : n; }

// ---------------------------------------------------------------------------
// Runners

/// train-classical, train-quantum, exact-baseline.
inline TrainingRun run_train(const ExperimentConfig& cfg) {
  validate(cfg);
  const std::filesystem::path out(cfg.out_dir);
  write_config_echo(cfg, out);
  const int n = target_qubits(cfg);
  const DensityMatrix target = build_target(cfg.target, n, cfg.seed);
  TrainingSpec spec;
  spec.n = n;
  spec.depth = resolved_depth(cfg, n);
  spec.rank = cfg.rank;
  spec.shots = cfg.shots;
  spec.seed = cfg.seed;
  spec.source = cfg.kind == ExperimentKind::ExactBaseline ? StatisticsSource::ExactGibbs : StatisticsSource::BetaVqe;
  return run_training(cfg, target, spec, out);
}

struct RankSweepRow {
  int rank = 0;
  FidelityReport fidelity;
  double final_relative_entropy = NAN;
};

/// One nested-loop training per rank; table rank_sweep.csv.
inline std::vector<RankSweepRow> run_rank_sweep(const ExperimentConfig& cfg) {
  validate(cfg);
  const std::filesystem::path out(cfg.out_dir);
  write_config_echo(cfg, out);
  const int n = target_qubits(cfg);
  const DensityMatrix target = build_target(cfg.target, n, cfg.seed);
  std::vector<std::function<RankSweepRow()>> jobs;
  for (int r : cfg.ranks) {
    if (r > (1 << n)) throw ValidationError("ranks: entry " + std::to_string(r) + " exceeds 2^n");
    jobs.emplace_back([&, r] {
      TrainingSpec spec{n, resolved_depth(cfg, n), r, cfg.shots, StatisticsSource::BetaVqe, cfg.seed, 0};
      const auto run = run_training(cfg, target, spec, out / ("R" + std::to_string(r)));
      return RankSweepRow{r, run.fidelity, run.final_relative_entropy};
    });
  }
  auto rows = detail::run_jobs(jobs, cfg.threads);
  std::ostringstream csv;
  csv << "config_hash,seed,R,F_betavqe,F_qbm,F_ground,F_ceiling,S_final\n";
  for (const auto& r : rows)
    csv << config_hash(cfg) << ',' << cfg.seed << ',' << r.rank << ',' << detail::csv_num(r.fidelity.beta_vqe) << ',' << detail::csv_num(r.fidelity.qbm)
        << ',' << detail::csv_num(r.fidelity.ground) << ',' << detail::csv_num(*r.fidelity.ceiling) << ',' << detail::csv_num(r.final_relative_entropy) << '\n';
  detail::write_file(out / "rank_sweep.csv", csv.str());
  return rows;
}

struct SizeSweepRow {
  int n = 0;
  int depth = 0;
  int rank = 0;
  FidelityReport nested;
  FidelityReport exact;
  double s_nested = NAN;
  double s_exact = NAN;
};

/// Per size n: nested loop with d = n and R = max(1, n / 2), plus the
/// exact-gradient baseline from the same initial weights.
inline std::vector<SizeSweepRow> run_size_sweep(const ExperimentConfig& cfg) {
  validate(cfg);
  const std::filesystem::path out(cfg.out_dir);
  write_config_echo(cfg, out);
  std::vector<std::function<SizeSweepRow()>> jobs;
  for (int n : cfg.sizes) {
    jobs.emplace_back([&, n] {
      const DensityMatrix target = build_target(cfg.target, n, cfg.seed);
      const int depth = resolved_depth(cfg, n);
      const int rank = std::max(1, n / 2);
      const auto dir = out / ("n" + std::to_string(n));
      const auto nested = run_training(cfg, target, {n, depth, rank, 0, StatisticsSource::BetaVqe, cfg.seed, 0}, dir / "nested");
      const auto exact = run_training(cfg, target, {n, depth, rank, 0, StatisticsSource::ExactGibbs, cfg.seed, 0}, dir / "exact");
      return SizeSweepRow{n, depth, rank, nested.fidelity, exact.fidelity, nested.final_relative_entropy, exact.final_relative_entropy};
    });
  }
  auto rows = detail::run_jobs(jobs, cfg.threads);
  std::ostringstream csv;
  csv << "config_hash,seed,n,d,R,F_ground_nested,F_ground_exact,F_ground_gap,F_qbm_nested,F_qbm_exact,S_nested,S_exact\n";
  for (const auto& r : rows)
    csv << config_hash(cfg) << ',' << cfg.seed << ',' << r.n << ',' << r.depth << ',' << r.rank << ',' << detail::csv_num(r.nested.ground) << ','
        << detail::csv_num(r.exact.ground) << ',' << detail::csv_num(std::abs(r.nested.ground - r.exact.ground)) << ','
        << detail::csv_num(r.nested.qbm) << ',' << detail::csv_num(r.exact.qbm) << ',' << detail::csv_num(r.s_nested) << ','
        << detail::csv_num(r.s_exact) << '\n';
  detail::write_file(out / "size_sweep.csv", csv.str());
  return rows;
}

struct DepthSweepRow {
  int depth = 0;
  double fidelity = 0.0;
  double free_energy = 0.0;
  double min_free_energy = 0.0;  // -log Z
  int iterations = 0;
  bool converged = false;
};

/// Inner-loop-only fits of the fixed XXZ Gibbs state, one per depth.
/// beta is folded into the Hamiltonian, so the fit targets exp(-beta H) / Z.
inline std::vector<DepthSweepRow> run_depth_sweep(const ExperimentConfig& cfg) {
  validate(cfg);
  const std::filesystem::path out(cfg.out_dir);
  write_config_echo(cfg, out);
  const int n = cfg.target.n;
  HamiltonianAnsatz h = build_xxz(n, cfg.target.j, cfg.target.delta);
  h.weights *= cfg.target.beta;
  const ThermalState th = thermal_state(dense_matrix(h), 1.0);
  const FidelityOracle fid(th.rho);
  const int rank = cfg.kind == ExperimentKind::DepthSweep && cfg.ranks.size() == 1 ? cfg.ranks.front() : (1 << n);
  std::vector<std::function<DepthSweepRow()>> jobs;
  for (int d : cfg.depths) {
    jobs.emplace_back([&, d] {
      InnerLoopConfig ic = cfg.outer.inner;
      ic.seed = child_seed(cfg.seed, 2);
      ic.shots = 0;
      std::optional<std::pair<BetaVqeState, InnerLoopReport>> best;
      for (int k = 0; k < cfg.restarts; ++k) {
        std::mt19937_64 rng(k == 0 ? child_seed(cfg.seed, 0xB7A) : child_seed(child_seed(cfg.seed, 0xB7A), static_cast<std::uint64_t>(k)));
        auto fit = inner_loop(make_beta_vqe_state(n, d, rank, rng, cfg.distribution, cfg.theta_init_std), h, ic);
        if (!best || fit.second.final_free_energy < best->second.final_free_energy) best = std::move(fit);
      }
      const auto& [fit, rep] = *best;
      return DepthSweepRow{d, fid(density_matrix(fit)), rep.final_free_energy, -th.log_partition, rep.iterations, rep.converged};
    });
  }
  auto rows = detail::run_jobs(jobs, cfg.threads);
  std::ostringstream csv;
  csv << "config_hash,seed,d,R,fidelity,free_energy,min_free_energy,inner_iters,converged\n";
  for (const auto& r : rows)
    csv << config_hash(cfg) << ',' << cfg.seed << ',' << r.depth << ',' << rank << ',' << detail::csv_num(r.fidelity) << ',' << detail::csv_num(r.free_energy)
        << ',' << detail::csv_num(r.min_free_energy) << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << '\n';
  detail::write_file(out / "depth_sweep.csv", csv.str());
  return rows;
}

struct ShotsRow {
  long shots = 0;
  FidelityReport fidelity;
  double plateau_grad_error = NAN;  // mean gradient error over the last window
  double predicted = NAN;           // 1 / sqrt(M)
  double final_relative_entropy = NAN;
  std::vector<TraceRow> trace;
};

/// Nested loop with every statistic shot-estimated, one run per shot count.
inline std::vector<ShotsRow> run_shots(const ExperimentConfig& cfg) {
  validate(cfg);
  const std::filesystem::path out(cfg.out_dir);
  write_config_echo(cfg, out);
  const int n = target_qubits(cfg);
  const DensityMatrix target = build_target(cfg.target, n, cfg.seed);
  std::vector<long> list = cfg.shots_list;
  if (list.empty()) list.push_back(cfg.shots);
  std::vector<std::function<ShotsRow()>> jobs;
  for (long m : list) {
    jobs.emplace_back([&, m] {
      const auto run = run_training(cfg, target, {n, resolved_depth(cfg, n), cfg.rank, m, StatisticsSource::BetaVqe, cfg.seed, 0},
                                    list.size() == 1 ? out : out / ("M" + std::to_string(m)));
      ShotsRow row;
      row.shots = m;
      row.fidelity = run.fidelity;
      row.final_relative_entropy = run.final_relative_entropy;
      row.predicted = 1.0 / std::sqrt(static_cast<double>(m));
      const auto& rows = run.result.trace.rows;
      const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(cfg.plateau_window), rows.size());
      double acc = 0.0;
      for (std::size_t i = rows.size() - w; i < rows.size(); ++i) acc += rows[i].grad_error;
      row.plateau_grad_error = w > 0 ? acc / static_cast<double>(w) : NAN;
      row.trace = rows;
      return row;
    });
  }
  auto rows = detail::run_jobs(jobs, cfg.threads);
  std::ostringstream csv;
  csv << "config_hash,seed,M,F_qbm,F_ground,F_betavqe,S_final,plateau_grad_error,inv_sqrt_M\n";
  for (const auto& r : rows)
    csv << config_hash(cfg) << ',' << cfg.seed << ',' << r.shots << ',' << detail::csv_num(r.fidelity.qbm) << ',' << detail::csv_num(r.fidelity.ground) << ','
        << detail::csv_num(r.fidelity.beta_vqe) << ',' << detail::csv_num(r.final_relative_entropy) << ',' << detail::csv_num(r.plateau_grad_error) << ','
        << detail::csv_num(r.predicted) << '\n';
  detail::write_file(out / "shots.csv", csv.str());
  return rows;
}

/// Spike events: runs of consecutive iterations whose gradient norm exceeds
/// `factor` times the median of the preceding `window` iterations, each
/// reported at its largest gradient norm.
inline std::vector<int> detect_spikes(const std::vector<double>& grad_norms, double factor, int window) {
  std::vector<int> spikes;
  int run_peak = -1;
  for (std::size_t i = 1; i < grad_norms.size(); ++i) {
    const std::size_t lo = i > static_cast<std::size_t>(window) ? i - static_cast<std::size_t>(window) : 0;
    std::vector<double> past(grad_norms.begin() + static_cast<std::ptrdiff_t>(lo), grad_norms.begin() + static_cast<std::ptrdiff_t>(i));
    std::nth_element(past.begin(), past.begin() + static_cast<std::ptrdiff_t>(past.size() / 2), past.end());
    if (grad_norms[i] > factor * past[past.size() / 2]) {
      if (run_peak < 0 || grad_norms[i] > grad_norms[static_cast<std::size_t>(run_peak)]) run_peak = static_cast<int>(i);
    } else if (run_peak >= 0) {
      spikes.push_back(run_peak);
      run_peak = -1;
    }
  }
  if (run_peak >= 0) spikes.push_back(run_peak);
  return spikes;
}

/// Local minima of the ground-state gap that fall below `threshold`.
inline std::vector<int> gap_minima(const std::vector<double>& gap0, double threshold) {
  std::vector<int> out;
  for (std::size_t i = 0; i < gap0.size(); ++i) {
    const bool left = i == 0 || gap0[i] <= gap0[i - 1];
    const bool right = i + 1 == gap0.size() || gap0[i] <= gap0[i + 1];
    if (left && right && gap0[i] < threshold) out.push_back(static_cast<int>(i));
  }
  return out;
}

/// Spikes with a gap minimum within +-radius iterations.
inline int coinciding_spikes(const std::vector<int>& spikes, const std::vector<int>& minima, int radius = 2) {
  int hits = 0;
  for (int s : spikes)
    if (std::any_of(minima.begin(), minima.end(), [&](int m) { return std::abs(m - s) <= radius; })) ++hits;
  return hits;
}

struct Rank1Row {
  std::uint64_t seed = 0;
  double s_rank1 = NAN;
  double s_nested = NAN;
  bool stalled = false;
  int spikes = 0;
  int coinciding = 0;
  double min_gap_rank1 = NAN;
  double min_gap_nested = NAN;
};

/// Paired runs per seed: rank-one ground-state statistics against the R = 2
/// nested loop on the same synthetic target and initial weights.
inline std::vector<Rank1Row> run_rank1_failure(const ExperimentConfig& cfg) {
  validate(cfg);
  const std::filesystem::path out(cfg.out_dir);
  write_config_echo(cfg, out);
  const int n = cfg.target.n;
  std::vector<std::uint64_t> seeds = cfg.seeds;
  if (seeds.empty())
    for (std::uint64_t s = 0; s < 10; ++s) seeds.push_back(cfg.seed + s);
  std::vector<std::function<Rank1Row()>> jobs;
  for (std::uint64_t seed : seeds) {
    jobs.emplace_back([&, seed] {
      const DensityMatrix target = build_target(cfg.target, n, seed);
      const int depth = resolved_depth(cfg, n);
      const auto dir = out / ("seed" + std::to_string(seed));
      const auto r1 = run_training(cfg, target, {n, depth, 1, 0, StatisticsSource::Rank1GroundState, seed, cfg.gap_count}, dir / "rank1");
      const auto nested = run_training(cfg, target, {n, depth, 2, 0, StatisticsSource::BetaVqe, seed, cfg.gap_count}, dir / "nested");

      Rank1Row row;
      row.seed = seed;
      row.s_rank1 = r1.final_relative_entropy;
      row.s_nested = nested.final_relative_entropy;
      row.stalled = row.s_rank1 > row.s_nested + 0.1;
      std::vector<double> gn;
      std::vector<double> gap0;
      std::ostringstream gaps;
      gaps << "iteration,grad_norm,gap0,level_crossing,spike\n";
      for (const auto& t : r1.result.trace.rows) {
        gn.push_back(t.grad_norm);
        gap0.push_back(t.gaps.empty() ? NAN : t.gaps.front());
      }
      const auto spikes = detect_spikes(gn, cfg.spike_factor, cfg.spike_window);
      const auto minima = gap_minima(gap0, cfg.gap_threshold);
      row.spikes = static_cast<int>(spikes.size());
      row.coinciding = coinciding_spikes(spikes, minima);
      row.min_gap_rank1 = gap0.empty() ? NAN : *std::min_element(gap0.begin(), gap0.end());
      for (std::size_t i = 0; i < gn.size(); ++i) {
        gaps << i << ',' << detail::csv_num(gn[i]) << ',' << detail::csv_num(gap0[i]) << ','
             << (std::find(minima.begin(), minima.end(), static_cast<int>(i)) != minima.end() ? 1 : 0) << ','
             << (std::find(spikes.begin(), spikes.end(), static_cast<int>(i)) != spikes.end() ? 1 : 0);
        gaps << '\n';
      }
      detail::write_file(dir / "rank1" / "gaps.csv", gaps.str());
      double min_nested = INFINITY;
      for (const auto& t : nested.result.trace.rows)
        if (!t.gaps.empty()) min_nested = std::min(min_nested, t.gaps.front());
      row.min_gap_nested = min_nested;
      return row;
    });
  }
  auto rows = detail::run_jobs(jobs, cfg.threads);
  std::ostringstream csv;
  csv << "config_hash,seed,S_rank1,S_nested,stalled,spikes,spikes_at_gap_minima,min_gap_rank1,min_gap_nested\n";
  for (const auto& r : rows)
    csv << config_hash(cfg) << ',' << r.seed << ',' << detail::csv_num(r.s_rank1) << ',' << detail::csv_num(r.s_nested) << ',' << (r.stalled ? 1 : 0) << ','
        << r.spikes << ',' << r.coinciding << ',' << detail::csv_num(r.min_gap_rank1) << ',' << detail::csv_num(r.min_gap_nested) << '\n';
  detail::write_file(out / "rank1_failure.csv", csv.str());
  return rows;
}

/// Dispatches on cfg.kind.
inline void run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.kind) {
    case ExperimentKind::TrainClassical:
    case ExperimentKind::TrainQuantum:
    case ExperimentKind::ExactBaseline: run_train(cfg); return;
    case ExperimentKind::RankSweep: run_rank_sweep(cfg); return;
    case ExperimentKind::SizeSweep: run_size_sweep(cfg); return;
    case ExperimentKind::DepthSweep: run_depth_sweep(cfg); return;
    case ExperimentKind::ShotsRun: run_shots(cfg); return;
    case ExperimentKind::Rank1Failure: run_rank1_failure(cfg); return;
  }
}

}  // namespace qbm
