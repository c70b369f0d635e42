#include "migractl/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <thread>

#include "migractl/errors.hpp"

namespace migractl {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t trial_seed(std::uint64_t master, std::uint64_t n, std::uint64_t trial) {
  return splitmix64(splitmix64(splitmix64(master) ^ n) ^ trial);
}

Vector sample_initial(Eigen::Index n, Rng& rng) {
  Vector xi(n);
  do {
    for (Eigen::Index i = 0; i < n; ++i) xi(i) = rng.uniform(-1.0, 1.0);
  } while (!(xi.mean() > kDegenerateMeanTol));
  std::sort(xi.data(), xi.data() + n, std::greater<>());
  return xi;
}

Vector sample_initial(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_initial(n, rng);
}

unsigned resolve_threads(std::optional<unsigned> requested) {
  if (requested && *requested > 0) return *requested;
  if (const char* env = std::getenv("MIGRACTL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i = next++; i < count && !failed; i = next++) {
      try {
        body(i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

TrialRecord run_trial(int n, double horizon, std::uint64_t seed, int grid) {
  const Vector xi = sample_initial(n, seed);
  const InactivationScan scan = inactivation_scan(xi, horizon, grid);
  const auto m = migration_functional(xi);
  TrialRecord r;
  r.delta = scan.delta;
  r.full_value = scan.full_value;
  r.inactivation_value = scan.value;
  r.ratio = m.variance_part / m.mean_part;
  r.inactivated = is_inactivation(scan, horizon);
  return r;
}

void summarise(ExperimentReport& rep) {
  const double trials = static_cast<double>(rep.per_trial.size());
  std::vector<double> gains;
  double sum_all = 0.0;
  double min_all = std::numeric_limits<double>::infinity();
  for (const TrialRecord& r : rep.per_trial) {
    const double g = r.relative_improvement();
    sum_all += g;
    min_all = std::min(min_all, g);
    if (r.inactivated) gains.push_back(g);
  }
  rep.inactivation_count = static_cast<int>(gains.size());
  const double p = trials > 0 ? rep.inactivation_count / trials : 0.0;
  rep.inactivation_fraction = p;
  rep.inactivation_stderr = trials > 0 ? std::sqrt(p * (1.0 - p) / trials) : 0.0;
  rep.mean_relative_improvement_all = trials > 0 ? sum_all / trials : 0.0;
  rep.min_relative_improvement = trials > 0 ? min_all : 0.0;
  if (!gains.empty()) {
    const double k = static_cast<double>(gains.size());
    const double mean = std::accumulate(gains.begin(), gains.end(), 0.0) / k;
    double ss = 0.0;
    for (double g : gains) ss += (g - mean) * (g - mean);
    rep.mean_relative_improvement = mean;
    rep.improvement_stderr = gains.size() > 1 ? std::sqrt(ss / (k - 1.0) / k) : 0.0;
  }
}

}  // namespace

// Draws depend on (seed, N, trial) only, so every horizon of a row sees the
// same initial states.
std::vector<ExperimentReport> run_experiment_grid(const ExperimentConfig& config) {
  if (config.trials < 1) throw FormatError("trials must be at least 1");
  for (int n : config.agents)
    if (n < 2) throw FormatError("ensembles need at least two agents");
  for (double T : config.horizons)
    if (!(T > 0.0)) throw FormatError("horizons must be positive");

  std::vector<ExperimentReport> cells;
  for (int n : config.agents) {
    for (double T : config.horizons) {
      ExperimentReport rep;
      rep.n_agents = n;
      rep.horizon = T;
      rep.trials = config.trials;
      rep.seed = config.seed;
      rep.grid = config.grid;
      rep.delta_threshold = 1e-3 * T;
      rep.per_trial.resize(static_cast<std::size_t>(config.trials));
      cells.push_back(std::move(rep));
    }
  }
  const std::size_t per_cell = static_cast<std::size_t>(config.trials);
  parallel_for(cells.size() * per_cell, resolve_threads(config.threads), [&](std::size_t task) {
    ExperimentReport& cell = cells[task / per_cell];
    const std::size_t trial = task % per_cell;
    cell.per_trial[trial] = run_trial(cell.n_agents, cell.horizon,
                                      trial_seed(config.seed, static_cast<std::uint64_t>(cell.n_agents), trial),
                                      config.grid);
  });
  for (ExperimentReport& cell : cells) summarise(cell);
  return cells;
}

std::vector<ExperimentReport> table1_experiment(const ExperimentConfig& config) { return run_experiment_grid(config); }

std::vector<ExperimentReport> table2_experiment(const ExperimentConfig& config) { return run_experiment_grid(config); }

std::vector<RatioSample> ratio_study(int n, double horizon, int trials, std::uint64_t seed, int grid,
                                     std::optional<unsigned> threads) {
  ExperimentConfig config;
  config.agents = {n};
  config.horizons = {horizon};
  config.trials = trials;
  config.seed = seed;
  config.grid = grid;
  config.threads = threads;
  const auto cells = run_experiment_grid(config);
  std::vector<RatioSample> out;
  out.reserve(cells.front().per_trial.size());
  for (const TrialRecord& r : cells.front().per_trial) out.push_back({r.ratio, r.delta});
  return out;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw FormatError("spearman needs two equal samples of size >= 2");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

Vector sample_full_strength(Eigen::Index n, Rng& rng) {
  Vector e(n);
  for (Eigen::Index i = 0; i < n; ++i) e(i) = rng.exponential();
  return e / e.sum();
}

Vector sample_admissible(Eigen::Index n, double budget, Rng& rng) {
  if (!(budget > 0.0)) throw BudgetOutOfRange("control budget must be positive");
  Vector alpha(n);
  if (budget >= static_cast<double>(n)) {
    for (Eigen::Index i = 0; i < n; ++i) alpha(i) = rng.uniform01();
    return alpha;
  }
  // Dirichlet(1, ..., 1) on n + 1 coordinates is uniform on the scaled simplex;
  // rejecting draws outside the unit box keeps the law uniform on the set.
  for (;;) {
    double slack = rng.exponential();
    for (Eigen::Index i = 0; i < n; ++i) alpha(i) = rng.exponential();
    const double total = alpha.sum() + slack;
    alpha *= budget / total;
    if (alpha.maxCoeff() <= 1.0) return alpha;
  }
}

ControlPlan random_plan(Eigen::Index n, double budget, double horizon, int pieces, Rng& rng, bool full_strength) {
  if (pieces < 1) throw FormatError("pieces must be at least 1");
  PlanBuilder builder(budget, horizon);
  for (int k = 1; k <= pieces; ++k) {
    const double until = k == pieces ? horizon : horizon * k / pieces;
    builder.hold(until, full_strength ? sample_full_strength(n, rng) : sample_admissible(n, budget, rng));
  }
  return std::move(builder).build();
}

namespace {

double final_value(const Vector& xi0, const ControlPlan& plan, double h) {
  if (!plan.has_feedback()) {
    const Vector xT = closed_form_piecewise(xi0, plan)(plan.horizon());
    return migration_functional(xT).total;
  }
  return simulate(xi0, plan, h).final_value();
}

// Piecewise-constant controls on equal intervals, one column per piece.
double grid_value(const Vector& xi0, const Matrix& alphas, double horizon) {
  const double dt = horizon / static_cast<double>(alphas.cols());
  Vector xi = xi0;
  for (Eigen::Index p = 0; p < alphas.cols(); ++p) xi = propagate_constant(xi, alphas.col(p), dt);
  return migration_functional(xi).total;
}

ControlPlan grid_plan(const Matrix& alphas, double budget, double horizon) {
  PlanBuilder builder(budget, horizon);
  const auto k = alphas.cols();
  for (Eigen::Index p = 0; p < k; ++p)
    builder.hold(p + 1 == k ? horizon : horizon * static_cast<double>(p + 1) / static_cast<double>(k), alphas.col(p));
  return std::move(builder).build();
}

// Compass search with single-coordinate moves and budget-preserving pair
// moves; the step halves whenever a full sweep fails to improve.
double refine_grid(const Vector& xi0, Matrix& alphas, double budget, double horizon) {
  const Eigen::Index n = alphas.rows();
  double best = grid_value(xi0, alphas, horizon);
  auto try_move = [&](Eigen::Index p, Eigen::Index i, double di, Eigen::Index j, double dj) {
    Vector col = alphas.col(p);
    col(i) += di;
    if (j >= 0) col(j) += dj;
    if (col.minCoeff() < 0.0 || col.maxCoeff() > 1.0 || col.sum() > budget) return false;
    const Vector saved = alphas.col(p);
    alphas.col(p) = col;
    const double v = grid_value(xi0, alphas, horizon);
    if (v < best) {
      best = v;
      return true;
    }
    alphas.col(p) = saved;
    return false;
  };
  for (double step = 0.25; step > 1e-9; step *= 0.5) {
    for (int sweep = 0; sweep < 200; ++sweep) {
      bool improved = false;
      for (Eigen::Index p = 0; p < alphas.cols(); ++p) {
        for (Eigen::Index i = 0; i < n; ++i) {
          improved |= try_move(p, i, step, -1, 0.0) || try_move(p, i, -step, -1, 0.0);
          for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) improved |= try_move(p, i, step, j, -step);
        }
      }
      if (!improved) break;
    }
  }
  return best;
}

constexpr int kRefinedDraws = 3;

}  // namespace

OracleResult brute_force_oracle(const Vector& xi0_in, double budget, double horizon, int pieces, int samples,
                                std::uint64_t seed, double h) {
  if (pieces < 1) throw FormatError("pieces must be at least 1");
  if (samples < 0) throw FormatError("samples must be non-negative");
  if (!(horizon > 0.0)) throw FormatError("horizon must be positive");
  const Eigen::Index n = xi0_in.size();
  if (!(budget > 0.0) || budget > static_cast<double>(n)) throw BudgetOutOfRange("budget must lie in (0, N]");

  Vector xi0 = xi0_in;
  std::sort(xi0.data(), xi0.data() + n, std::greater<>());
  if (!(xi0.mean() > 0.0)) throw NonPositiveMean("oracle needs a positive mean");

  OracleResult result{std::numeric_limits<double>::infinity(), ControlPlan::constant(budget, horizon, Vector::Zero(n)),
                      "", std::nullopt, std::nullopt, {}};
  auto consider = [&](std::string name, const ControlPlan& plan) {
    const double v = final_value(xi0, plan, h);
    result.analytic.push_back({name, v});
    if (v < result.best_value) {
      result.best_value = v;
      result.best_plan = plan;
      result.best_name = std::move(name);
    }
  };

  consider("zero", ControlPlan::constant(budget, horizon, Vector::Zero(n)));
  if (n == 2 && budget <= 2.0) consider("two_agent", two_agent_plan(Eigen::Vector2d(xi0(0), xi0(1)), budget, horizon).plan);
  const double staged_budget = std::min(budget, 1.0);
  consider("staged", full_control_plan(xi0, horizon, staged_budget).plan);
  if (budget >= 1.0) {
    const InactivationScan scan = inactivation_scan(xi0, horizon);
    consider("inactivation", inactivation_plan(xi0, horizon, scan.delta));
  }
  consider("instantaneous", std::move(PlanBuilder(budget, horizon).feedback(horizon, Rule::instantaneous)).build());

  Rng rng(seed);
  // (value, draw) of the best few draws, ascending.
  std::vector<std::pair<double, Matrix>> top;
  Matrix draw(n, pieces);
  for (int s = 0; s < samples; ++s) {
    for (int p = 0; p < pieces; ++p) draw.col(p) = sample_admissible(n, budget, rng);
    const double v = grid_value(xi0, draw, horizon);
    if (top.size() < kRefinedDraws || v < top.back().first) {
      if (top.size() == kRefinedDraws) top.pop_back();
      top.emplace_back(v, draw);
      std::sort(top.begin(), top.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    }
  }
  if (top.empty()) return result;

  result.best_random_value = top.front().first;
  if (top.front().first < result.best_value) {
    result.best_value = top.front().first;
    result.best_plan = grid_plan(top.front().second, budget, horizon);
    result.best_name = "random";
  }
  for (auto& [value, alphas] : top) {
    const double v = refine_grid(xi0, alphas, budget, horizon);
    if (!result.best_search_value || v < *result.best_search_value) result.best_search_value = v;
    if (v < result.best_value) {
      result.best_value = v;
      result.best_plan = grid_plan(alphas, budget, horizon);
      result.best_name = "search";
    }
  }
  return result;
}

double integral_cost_eval(const Trajectory& traj) {
  double total = 0.0;
  for (std::size_t k = 1; k < traj.t.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    total += 0.5 * (traj.t[k] - traj.t[k - 1]) * (traj.V(i) + traj.V(i - 1));
  }
  return total;
}

}  // namespace migractl
