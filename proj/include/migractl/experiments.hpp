#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "migractl/control_plan.hpp"
#include "migractl/dynamics.hpp"
#include "migractl/strategies.hpp"

namespace migractl {

/// SplitMix64 finaliser; used to derive independent sub-seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed of trial `trial` for ensembles of `n` agents under `master`.
std::uint64_t trial_seed(std::uint64_t master, std::uint64_t n, std::uint64_t trial);

/// mt19937_64 with a platform-independent mapping to doubles.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double exponential() { return -std::log1p(-uniform01()); }

 private:
  std::mt19937_64 engine_;
};

/// N i.i.d. draws on [-1, 1], redrawn until the mean exceeds 1e-12, sorted in
/// descending order.
Vector sample_initial(Eigen::Index n, Rng& rng);
Vector sample_initial(Eigen::Index n, std::uint64_t seed);

/// Worker count: explicit value, else MIGRACTL_THREADS, else all cores.
unsigned resolve_threads(std::optional<unsigned> requested = {});

/// Runs body(i) for i in [0, count) on `threads` workers.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

struct TrialRecord {
  double delta = 0.0;
  double full_value = 0.0;        // V_fc
  double inactivation_value = 0.0;  // V^δ
  double ratio = 0.0;             // variance part / mean part at t = 0
  bool inactivated = false;

  double relative_improvement() const { return (full_value - inactivation_value) / full_value; }
};

struct ExperimentConfig {
  std::vector<int> agents{5, 10, 20, 50};
  std::vector<double> horizons{3, 4, 5, 6, 7};
  int trials = 1000;
  std::uint64_t seed = 42;
  int grid = kDefaultScanGrid;
  std::optional<unsigned> threads;
};

/// One (N, T) cell. Relative improvements are averaged over the trials that
/// showed inactivation; the unconditional average is kept alongside.
struct ExperimentReport {
  int n_agents = 0;
  double horizon = 0.0;
  int trials = 0;
  std::uint64_t seed = 0;
  int grid = kDefaultScanGrid;
  double delta_threshold = 0.0;
  int inactivation_count = 0;
  double inactivation_fraction = 0.0;
  double inactivation_stderr = 0.0;
  std::optional<double> mean_relative_improvement;
  std::optional<double> improvement_stderr;
  double mean_relative_improvement_all = 0.0;
  double min_relative_improvement = 0.0;
  std::vector<TrialRecord> per_trial;
};

/// Scans the inactivation time for `trials` random initial states per cell.
std::vector<ExperimentReport> run_experiment_grid(const ExperimentConfig& config);

/// Inactivation frequency per cell.
std::vector<ExperimentReport> table1_experiment(const ExperimentConfig& config);

/// Relative improvement of V^δ over V_fc per cell.
std::vector<ExperimentReport> table2_experiment(const ExperimentConfig& config);

struct RatioSample {
  double ratio = 0.0;
  double delta = 0.0;
};

std::vector<RatioSample> ratio_study(int n, double horizon, int trials, std::uint64_t seed,
                                     int grid = kDefaultScanGrid, std::optional<unsigned> threads = {});

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct OracleCandidate {
  std::string name;
  double value = 0.0;
};

struct OracleResult {
  double best_value = 0.0;
  ControlPlan best_plan;
  std::string best_name;
  // Best of the raw random draws.
  std::optional<double> best_random_value;
  // Best after pattern-search refinement of the top draws, same family.
  std::optional<double> best_search_value;
  std::vector<OracleCandidate> analytic;
};

/// Best V(T) over `samples` random piecewise-constant controls on `pieces`
/// equal intervals (each alpha uniform on {alpha in [0,1]^N, sum <= M}), a
/// pattern-search refinement of the best few draws inside the same family, and
/// the analytic strategies. Works on the canonically ordered state.
OracleResult brute_force_oracle(const Vector& xi0, double budget, double horizon, int pieces, int samples,
                                std::uint64_t seed, double h = kDefaultStep);

/// Uniform draw on {alpha in [0,1]^N, sum alpha <= budget}.
Vector sample_admissible(Eigen::Index n, double budget, Rng& rng);

/// Uniform draw on {alpha in [0,1]^N, sum alpha = 1}.
Vector sample_full_strength(Eigen::Index n, Rng& rng);

/// Random piecewise-constant plan on `pieces` equal intervals.
ControlPlan random_plan(Eigen::Index n, double budget, double horizon, int pieces, Rng& rng,
                        bool full_strength = false);

/// Trapezoidal quadrature of the sampled V(t).
double integral_cost_eval(const Trajectory& traj);

}  // namespace migractl
