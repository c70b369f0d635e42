// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>

#include "migractl/costate.hpp"
#include "migractl/dynamics.hpp"
#include "migractl/experiments.hpp"
#include "migractl/strategies.hpp"

using namespace migractl;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Linear interpolation of the first sign change of f along the samples.
double first_crossing(const Trajectory& traj, const std::function<double(Eigen::Index)>& f) {
  for (Eigen::Index k = 1; k < traj.samples(); ++k) {
    const double a = f(k - 1), b = f(k);
    if (a > 0.0 && b <= 0.0) {
      const auto t0 = traj.t[static_cast<std::size_t>(k - 1)], t1 = traj.t[static_cast<std::size_t>(k)];
      return t0 + (t1 - t0) * a / (a - b);
    }
  }
  return NAN;
}

Vector random_state(Rng& rng, Eigen::Index n) { return sample_initial(n, rng); }

// 1. Closed form against RK4.
Outcome criterion1() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  Rng rng(1);
  double worst = 0.0;
  for (Eigen::Index n : {2, 5, 10}) {
    for (int rep = 0; rep < 3; ++rep) {
      const Vector xi0 = random_state(rng, n);
      const double budget = rng.uniform(0.05, static_cast<double>(n));
      const ControlPlan plan = ControlPlan::constant(budget, 5.0, sample_admissible(n, budget, rng));
      const Trajectory traj = simulate(xi0, plan, 1e-4);
      const auto exact = closed_form_piecewise(xi0, plan);
      for (Eigen::Index k = 0; k < traj.samples(); ++k)
        worst = std::max(worst, (traj.xi.col(k) - exact(traj.t[static_cast<std::size_t>(k)])).cwiseAbs().maxCoeff());
    }
  }
  const double elapsed = seconds_since(start);
  o.require(worst < 1e-8, fmt("max deviation %.3g >= 1e-8", worst));
  o.require(elapsed < 10.0, fmt("runtime %.2fs >= 10s", elapsed));
  o.detail = fmt("max|RK4 - closed form| = %.3g, %.2fs", worst, elapsed) + (o.pass ? "" : " | " + o.detail);
  return o;
}

// 2. Two-agent switching times.
Outcome criterion2() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  const double expected = 2.0 * std::log(1.5);
  const Trajectory a = simulate(Vector(Eigen::Vector2d(1.5, 0.5)), ControlPlan::constant(1.0, 2.0, Eigen::Vector2d(1, 0)), 1e-4);
  const double meet = first_crossing(a, [&](Eigen::Index k) { return a.xi(0, k) - a.xi(1, k); });
  const Trajectory b = simulate(Vector(Eigen::Vector2d(3.0, -1.0)), ControlPlan::constant(1.0, 2.0, Eigen::Vector2d(1, 0)), 1e-4);
  const double zero = first_crossing(b, [&](Eigen::Index k) { return -b.xi(1, k); });
  const double elapsed = seconds_since(start);
  o.require(std::abs(meet - expected) <= 1e-5, fmt("xi1 = xi2 at %.8f", meet));
  o.require(std::abs(zero - expected) <= 1e-5, fmt("xi2 = 0 at %.8f", zero));
  o.require(elapsed < 1.0, fmt("runtime %.2fs", elapsed));
  o.detail = fmt("meet %.8f, xi2=0 %.8f, 2ln1.5 = %.8f", meet, zero, expected) + (o.pass ? "" : " | " + o.detail);
  return o;
}

// 3. Regime exhaustiveness and optimality against the oracle.
Outcome criterion3() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  Rng rng(3);
  std::map<TwoAgentCase, std::vector<std::tuple<Eigen::Vector2d, double, double>>> by_case;
  int unclassified = 0;
  for (int k = 0; k < 10000; ++k) {
    Eigen::Vector2d xi;
    do {
      xi = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
      if (k % 20 == 0) xi(1) = xi(0);
    } while (xi.mean() <= 1e-3);
    if (xi(0) < xi(1)) std::swap(xi(0), xi(1));
    double M;
    switch (k % 4) {
      case 0: M = 1.0; break;
      case 1: M = 2.0; break;
      case 2: M = rng.uniform(0.05, 1.0); break;
      default: M = rng.uniform(1.0, 2.0); break;
    }
    const double T = rng.uniform(0.05, 6.0);
    try {
      const TwoAgentPlan p = two_agent_plan(xi, M, T);
      by_case[p.regime.case_id].emplace_back(xi, M, T);
    } catch (const std::exception&) {
      ++unclassified;
    }
  }
  o.require(unclassified == 0, std::to_string(unclassified) + " unclassified");
  const std::vector<TwoAgentCase> all = {
      TwoAgentCase::equal_start,  TwoAgentCase::M_le_1_long, TwoAgentCase::M_le_1_short, TwoAgentCase::M2_both_positive,
      TwoAgentCase::M2_long,      TwoAgentCase::M2_short,    TwoAgentCase::M12_T_lt_t0,  TwoAgentCase::M12_t0_t1,
      TwoAgentCase::M12_t1_t2,    TwoAgentCase::M12_T_ge_t2};
  double worst_gap = -INFINITY;
  for (TwoAgentCase c : all) {
    const auto it = by_case.find(c);
    if (it == by_case.end()) {
      o.require(false, std::string("no instance of ") + std::string(to_string(c)));
      continue;
    }
    // The first random instance of each regime.
    const auto& [xi, M, T] = it->second.front();
    const TwoAgentPlan p = two_agent_plan(xi, M, T);
    const double v = migration_functional(closed_form_piecewise(Vector(xi), p.plan)(T)).total;
    const OracleResult oracle = brute_force_oracle(Vector(xi), M, T, 6, 10000, 11);
    const double family = std::min(*oracle.best_random_value, *oracle.best_search_value);
    worst_gap = std::max(worst_gap, v - family);
    o.require(v <= family + 1e-3, std::string(to_string(c)) + fmt(" plan %.6g > oracle %.6g", v, family));
  }
  const double elapsed = seconds_since(start);
  o.require(elapsed < 300.0, fmt("runtime %.1fs", elapsed));
  o.detail = std::to_string(by_case.size()) + "/10 regimes hit, " + fmt("max(plan - oracle) = %.3g, %.1fs", worst_gap, elapsed) +
             (o.pass ? "" : " | " + o.detail);
  return o;
}

// 4. Staged plan merge times and terminal consensus.
Outcome criterion4() {
  Outcome o;
  const Vector xi0 = Eigen::Vector3d(1.5, 1.0, 0.5);
  const double t2 = 1.5 * std::log(4.0 / 3.0), t3 = 1.5 * std::log(2.0);

  // Merge times observed under the feedback rule that splits the budget over
  // the block merged with the leader.
  const double T = 3.0;
  const ControlPlan feedback = std::move(PlanBuilder(1.0, T).feedback(T, Rule::equal_split_merged)).build();
  const Trajectory traj = simulate(xi0, feedback, 1e-3);
  std::vector<double> merges;
  Eigen::Index size = 1;
  for (Eigen::Index k = 0; k < traj.samples(); ++k) {
    const Eigen::Index s = (traj.alpha.col(k).array() > 0.0).count();
    if (s > size) merges.push_back(traj.t[static_cast<std::size_t>(k)]);
    size = std::max(size, s);
  }
  o.require(merges.size() == 2, std::to_string(merges.size()) + " merges detected");
  if (merges.size() == 2) {
    o.require(std::abs(merges[0] - t2) <= 1e-4, fmt("t2 detected %.8f", merges[0]));
    o.require(std::abs(merges[1] - t3) <= 1e-4, fmt("t3 detected %.8f", merges[1]));
  }

  const Trajectory staged = simulate(xi0, full_control_plan(xi0, T).plan, 1e-3);
  const Vector xT = staged.final_state();
  const double spread = (xT.array() - xT.mean()).abs().maxCoeff();
  const double mean_err = std::abs(xT.mean() - xi0.mean() * std::exp(-T / 3.0));
  o.require(spread < 1e-6, fmt("max|xi - xibar| = %.3g", spread));
  o.require(mean_err <= 1e-8, fmt("xibar(T) error %.3g", mean_err));
  o.detail = (merges.size() == 2 ? fmt("merges %.6f, %.6f", merges[0], merges[1]) : std::string("merges missing")) +
             fmt(", spread %.2g, mean err %.2g", spread, mean_err) + (o.pass ? "" : " | " + o.detail);
  return o;
}

// 5. Inactivation scan.
Outcome criterion5() {
  Outcome o;
  Rng rng(5);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Vector xi0 = random_state(rng, 2 + k % 8);
    const double T = rng.uniform(0.5, 8.0);
    const double simulated = simulate(xi0, full_control_plan(xi0, T).plan, 1e-3).final_value();
    worst = std::max(worst, std::abs(inactivation_value(xi0, T, 0.0) - simulated));
  }
  o.require(worst <= 1e-6, fmt("V^0 vs simulated staged plan %.3g", worst));

  // Mean 0.02, standard deviation about 1.
  const Vector xi0 = (Vector(5) << 2.02, -0.45, -0.47, -0.49, -0.51).finished();
  const double T = 3.0;
  const InactivationScan s = inactivation_scan(xi0, T);
  o.require(s.delta > 0.0, "scan returned delta = 0");
  const Trajectory traj = simulate(xi0, inactivation_plan(xi0, T, s.delta), 1e-3);
  const Costate c = integrate_costate_final(traj);
  double before = -INFINITY, after = INFINITY;
  for (Eigen::Index k = 1; k + 1 < traj.samples(); ++k) {
    const double t = traj.t[static_cast<std::size_t>(k)];
    if (t < s.delta) before = std::max(before, c.lambda(0, k));
    if (t > s.delta) after = std::min(after, c.lambda(0, k));
  }
  o.require(before < 1e-4, fmt("lambda_1 reaches %.3g before delta", before));
  o.require(after > -1e-4, fmt("lambda_1 reaches %.3g after delta", after));
  o.detail = fmt("|V^0 - V_sim| <= %.2g; delta = %.6f; max lambda_1 on (0,delta) = %.3g", worst, s.delta, before) +
             fmt(", min lambda_1 on (delta,T) = %.3g", after) + (o.pass ? "" : " | " + o.detail);
  return o;
}

const ExperimentReport& cell(const std::vector<ExperimentReport>& cells, int n, double T) {
  for (const auto& c : cells)
    if (c.n_agents == n && c.horizon == T) return c;
  throw std::logic_error("missing cell");
}

// 6 and 7 share one run of the full grid.
std::vector<ExperimentReport> table_grid(double& elapsed) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentConfig config;  // N in {5, 10, 20, 50}, T in {3, ..., 7}, 1000 trials
  config.seed = 42;
  auto cells = run_experiment_grid(config);
  elapsed = seconds_since(start);
  return cells;
}

Outcome criterion6(const std::vector<ExperimentReport>& cells, double elapsed) {
  Outcome o;
  std::string detail;
  const std::vector<std::pair<double, double>> paper = {{3.0, 0.016}, {4.0, 0.018}, {5.0, 0.010}};
  for (const auto& [T, p0] : paper) {
    const ExperimentReport& c = cell(cells, 5, T);
    const double se = std::sqrt(p0 * (1.0 - p0) / c.trials);
    const double z = (c.inactivation_fraction - p0) / se;
    o.require(std::abs(z) <= 3.0, fmt("N=5 T=%g: %.2f%% (z = %.2f)", T, 100 * c.inactivation_fraction, z));
    detail += fmt("N=5 T=%g %.1f%% ", T, 100 * c.inactivation_fraction) + fmt("(z %+.2f); ", z);
  }
  double worst_small = 0.0;
  for (const auto& c : cells)
    if ((c.n_agents == 20 && c.horizon == 3.0) || c.horizon == 7.0) {
      worst_small = std::max(worst_small, c.inactivation_fraction);
      o.require(c.inactivation_fraction <= 0.005, fmt("N=%g T=%g: %.2f%%", c.n_agents, c.horizon, 100 * c.inactivation_fraction));
    }
  o.require(elapsed < 600.0, fmt("runtime %.1fs", elapsed));
  o.detail = detail + fmt("max over N=20,T=3 and T=7 cells %.1f%%; grid %.1fs", 100 * worst_small, elapsed) +
             (o.pass ? "" : " | " + o.detail);
  return o;
}

Outcome criterion7(const std::vector<ExperimentReport>& cells) {
  Outcome o;
  const ExperimentReport& c = cell(cells, 5, 5.0);
  const double paper = 0.0091;
  const double mean = c.mean_relative_improvement.value_or(NAN);
  o.require(mean >= paper / 2 && mean <= paper * 2, fmt("N=5 T=5 improvement %.3f%%", 100 * mean));
  double worst = INFINITY;
  for (const auto& x : cells) worst = std::min(worst, x.min_relative_improvement);
  o.require(worst >= -1e-9, fmt("negative improvement %.3g", worst));
  o.detail = fmt("N=5 T=5 mean over inactivation trials %.3f%% (unconditional %.4f%%)", 100 * mean,
                 100 * c.mean_relative_improvement_all) +
             fmt(", min improvement %.3g", worst) + (o.pass ? "" : " | " + o.detail);
  return o;
}

// 8. Integral-cost optimality.
Outcome criterion8() {
  Outcome o;
  Rng rng(8);
  double worst_margin = INFINITY;
  for (Eigen::Index n : {2, 3, 4}) {
    const Vector xi0 = random_state(rng, n);
    const double T = 3.0;
    const ControlPlan rule = std::move(PlanBuilder(1.0, T).feedback(T, Rule::integral_argmax)).build();
    const Trajectory traj = simulate(xi0, rule, 1e-3);
    const double best = integral_cost_eval(traj);
    Eigen::Index last = 0;
    for (Eigen::Index k = 0; k < traj.samples(); ++k) {
      o.require(std::abs(traj.alpha.col(k).sum() - 1.0) <= 1e-12, "sum(alpha) != 1");
      const Eigen::Index size = (traj.alpha.col(k).array() > 0.0).count();
      o.require(size >= last, "|J(t)| decreased");
      last = size;
    }
    for (bool full : {true, false}) {
      for (int s = 0; s < 1000; ++s) {
        const ControlPlan other = random_plan(n, 1.0, T, 6, rng, full);
        const double v = integral_cost_eval(simulate(xi0, other, 1e-3));
        worst_margin = std::min(worst_margin, v - best);
      }
    }
  }
  o.require(worst_margin >= -1e-4, fmt("a random control beats the rule by %.3g", -worst_margin));
  o.detail = fmt("min(random - rule) = %.3g over 6000 controls", worst_margin) + (o.pass ? "" : " | " + o.detail);
  return o;
}

// 9. PMP consistency.
Outcome criterion9() {
  Outcome o;
  Rng rng(9);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const Vector xi0 = random_state(rng, 2 + k % 6);
    const double T = staged_switch_times(xi0).back() + rng.uniform(0.0, 2.0);
    const Trajectory traj = simulate(xi0, full_control_plan(xi0, T).plan, 1e-3);
    worst = std::max(worst, check_pmp_consistency(traj, integrate_costate_final(traj)).max_violation);
  }
  double worst_int = 0.0;
  for (int k = 0; k < 10; ++k) {
    const Vector xi0 = random_state(rng, 2 + k % 4);
    const ControlPlan rule = std::move(PlanBuilder(1.0, 4.0).feedback(4.0, Rule::integral_argmax)).build();
    const Trajectory traj = simulate(xi0, rule, 1e-3);
    worst_int = std::max(worst_int, check_pmp_consistency(traj, integrate_costate_integral(traj)).max_violation);
  }
  o.require(worst < 1e-6, fmt("staged plan violation %.3g", worst));
  o.require(worst_int < 1e-6, fmt("integral rule violation %.3g", worst_int));

  // Control placed on the agent with the most negative covector.
  const Vector xi0 = Eigen::Vector3d(1.0, 0.4, -0.5);
  const Trajectory bad = simulate(xi0, ControlPlan::constant(1.0, 4.0, Eigen::Vector3d(0, 0, 1)), 1e-3);
  const PmpReport rep = check_pmp_consistency(bad, integrate_costate_final(bad));
  o.require(!rep.consistent(), "wrong control not detected");
  o.detail = fmt("staged %.3g, integral %.3g, wrong control flagged with %.3g", worst, worst_int, rep.max_violation) +
             (o.pass ? "" : " | " + o.detail);
  return o;
}

// 10. Invariants on randomized full-model trajectories.
Outcome criterion10() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  Rng rng(10);
  double w_err = 0.0, e_err = 0.0, decomposition = 0.0, mean_low = INFINITY, mean_high = -INFINITY, sign = INFINITY;
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index n = 2 + trial % 6, d = 1 + trial % 3;
    Matrix x(d, n), v(d, n);
    Vector target(d);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x(i) = rng.uniform(-1, 1);
      v(i) = rng.uniform(-1, 1);
    }
    for (Eigen::Index i = 0; i < d; ++i) target(i) = rng.uniform(-0.5, 0.5);
    const Ensemble ens(x, v, target);
    const double budget = rng.uniform(0.1, static_cast<double>(n));
    const ControlPlan plan = random_plan(n, budget, 2.0, 4, rng);
    const Trajectory traj = simulate_full(ens, plan, 1e-2);
    const double mean0 = traj.xi.col(0).mean();
    std::vector<bool> nonneg(static_cast<std::size_t>(n), false);
    for (Eigen::Index k = 0; k < traj.samples(); ++k) {
      const auto s = static_cast<std::size_t>(k);
      const double t = traj.t[s];
      w_err = std::max(w_err, (traj.residuals[s] - std::exp(-t) * traj.residuals.front()).cwiseAbs().maxCoeff());
      e_err = std::max(e_err, (traj.directions[s] - traj.directions.front()).cwiseAbs().maxCoeff());
      const auto m = migration_functional(traj.xi.col(k));
      decomposition = std::max(decomposition, std::abs(m.total - m.mean_part - m.variance_part));
      const double mean = traj.xi.col(k).mean();
      mean_low = std::min(mean_low, mean - mean0 * std::exp(-budget * t / static_cast<double>(n)));
      mean_high = std::max(mean_high, mean - mean0);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (nonneg[static_cast<std::size_t>(i)]) sign = std::min(sign, traj.xi(i, k));
        if (traj.xi(i, k) >= 0.0) nonneg[static_cast<std::size_t>(i)] = true;
      }
    }
  }
  const double elapsed = seconds_since(start);
  o.require(mean_low >= -1e-8, fmt("xibar below its lower bound by %.3g", -mean_low));
  o.require(mean_high <= 1e-8, fmt("xibar above its initial value by %.3g", mean_high));
  o.require(sign >= -1e-8, fmt("non-negative xi_i went to %.3g", sign));
  o.require(w_err <= 1e-6, fmt("residual decay error %.3g", w_err));
  o.require(e_err <= 1e-8, fmt("direction drift %.3g", e_err));
  o.require(decomposition <= 1e-12, fmt("decomposition error %.3g", decomposition));
  o.require(elapsed < 60.0, fmt("runtime %.1fs", elapsed));
  o.detail = fmt("residual %.2g, direction %.2g, decomposition %.2g", w_err, e_err, decomposition) +
             fmt(", positivity margin %.2g, %.1fs", std::min({mean_low, -mean_high, sign}), elapsed) +
             (o.pass ? "" : " | " + o.detail);
  return o;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& run) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "closed form vs integrator", criterion1);
  report(2, "two-agent switching times", criterion2);
  report(3, "regime exhaustiveness", criterion3);
  report(4, "staged plan", criterion4);
  report(5, "inactivation scan", criterion5);
  double grid_seconds = 0.0;
  std::vector<ExperimentReport> cells;
  try {
    cells = table_grid(grid_seconds);
  } catch (const std::exception& e) {
    std::printf("table grid failed: %s\n", e.what());
  }
  report(6, "table 1 reproduction", [&] { return criterion6(cells, grid_seconds); });
  report(7, "table 2 reproduction", [&] { return criterion7(cells); });
  report(8, "integral-cost optimality", criterion8);
  report(9, "PMP consistency", criterion9);
  report(10, "invariant suite", criterion10);
  return failures == 0 ? 0 : 1;
}
