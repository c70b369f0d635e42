#include "migractl/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "migractl/dynamics.hpp"
#include "migractl/numerics.hpp"

namespace migractl {
namespace {

constexpr double kBudgetEps = 1e-12;

double two_agent_value(const Eigen::Vector2d& xi0, double leader, double horizon, double tstar) {
  const Vector start = propagate_constant(Vector(xi0), Vector::Zero(2), tstar);
  const Vector end = propagate_constant(start, Eigen::Vector2d(leader, 0.0), horizon - tstar);
  return 0.5 * end.squaredNorm();
}

}  // namespace

std::string_view to_string(TwoAgentCase c) {
  switch (c) {
    case TwoAgentCase::equal_start: return "equal_start";
    case TwoAgentCase::M_le_1_long: return "M_le_1_long";
    case TwoAgentCase::M_le_1_short: return "M_le_1_short";
    case TwoAgentCase::M2_both_positive: return "M2_both_positive";
    case TwoAgentCase::M2_long: return "M2_long";
    case TwoAgentCase::M2_short: return "M2_short";
    case TwoAgentCase::M12_T_lt_t0: return "M12_T_lt_t0";
    case TwoAgentCase::M12_t0_t1: return "M12_t0_t1";
    case TwoAgentCase::M12_t1_t2: return "M12_t1_t2";
    case TwoAgentCase::M12_T_ge_t2: return "M12_T_ge_t2";
  }
  return "equal_start";
}

double inactivation_quartic(const Eigen::Vector2d& xi0, double xibar0, double horizon, double x) {
  const double edge = std::exp(0.5 * horizon);
  const double lift = xibar0 * (x * x - 1.0);
  const double lead = xi0(0) + lift;
  const double follow = xi0(1) + lift + 2.0 * xibar0 * x * (edge - x);
  return std::exp(-2.0 * horizon) * (lead * lead + follow * follow);
}

InactivationTime inactivation_time_quartic(const Eigen::Vector2d& xi0, double xibar0, double horizon) {
  if (!(xibar0 > 0.0)) throw NonPositiveMean("mean projected velocity must be positive");
  const double edge = std::exp(0.5 * horizon);
  auto quartic = [&](double x) { return inactivation_quartic(xi0, xibar0, horizon, x); };

  // d/dX of the quartic, divided by 4 xibar0 e^{-2T}.
  std::vector<double> candidates{1.0, edge};
  const std::vector<double> roots = real_cubic_roots(2.0 * xibar0, -3.0 * xibar0 * edge,
                                                     2.0 * xibar0 * edge * edge + (xi0(0) - xi0(1)),
                                                     edge * (xi0(1) - xibar0));
  if (roots.empty()) {
    constexpr int kGrid = 10000;
    double best_x = 1.0;
    double best_f = quartic(1.0);
    const double dx = (edge - 1.0) / kGrid;
    for (int k = 1; k <= kGrid; ++k) {
      const double f = quartic(1.0 + dx * k);
      if (f < best_f) {
        best_f = f;
        best_x = 1.0 + dx * k;
      }
    }
    candidates.push_back(golden_section_minimize(quartic, std::max(1.0, best_x - dx), std::min(edge, best_x + dx), 1e-13));
  } else {
    for (double r : roots)
      if (r > 1.0 && r < edge) candidates.push_back(r);
  }

  InactivationTime out;
  double best = quartic(1.0);
  for (double x : candidates) {
    const double f = quartic(x);
    if (f < best) {
      best = f;
      out.x = x;
    }
  }
  out.tstar = 2.0 * std::log(out.x);
  out.value = 0.5 * best;
  return out;
}

InactivationTime inactivation_time_search(const Eigen::Vector2d& xi0, double leader, double horizon) {
  if (!(xi0.mean() > 0.0)) throw NonPositiveMean("mean projected velocity must be positive");
  auto value = [&](double t) { return two_agent_value(xi0, leader, horizon, t); };
  constexpr int kGrid = 2000;
  const double dt = horizon / kGrid;
  int best_k = 0;
  double best = value(0.0);
  for (int k = 1; k <= kGrid; ++k) {
    const double v = value(dt * k);
    if (v < best) {
      best = v;
      best_k = k;
    }
  }
  InactivationTime out;
  out.tstar = dt * best_k;
  const double refined = golden_section_minimize(value, dt * std::max(0, best_k - 1),
                                                 std::min(horizon, dt * (best_k + 1)), 1e-12);
  if (value(refined) < best) out.tstar = refined;
  out.value = value(out.tstar);
  out.x = std::exp(0.5 * out.tstar);
  return out;
}

TwoAgentPlan two_agent_plan(const Eigen::Vector2d& xi0, double budget, double horizon) {
  if (!(budget > 0.0) || budget > 2.0 + kBudgetEps) {
    std::ostringstream os;
    os << "two-agent budget must lie in (0, 2], got " << budget;
    throw BudgetOutOfRange(os.str());
  }
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  const bool swapped = xi0(0) < xi0(1);
  const Eigen::Vector2d x = swapped ? Eigen::Vector2d(xi0(1), xi0(0)) : xi0;
  const double mean = x.mean();
  if (!(mean > 0.0)) {
    std::ostringstream os;
    os << "mean projected velocity must be positive (got " << mean << ")";
    throw NonPositiveMean(os.str());
  }

  auto control = [&](double lead, double follow) {
    Vector a(2);
    if (swapped) a << follow, lead;
    else a << lead, follow;
    return a;
  };

  TwoAgentRegime regime;
  regime.budget = budget;
  PlanBuilder plan(budget, horizon);
  const double M = budget;

  auto inactivate_then = [&](double leader, TwoAgentCase id) {
    const InactivationTime it = std::abs(leader - 1.0) <= kBudgetEps
                                    ? inactivation_time_quartic(x, mean, horizon)
                                    : inactivation_time_search(x, leader, horizon);
    regime.case_id = id;
    regime.tstar = it.tstar;
    plan.hold(it.tstar, control(0.0, 0.0)).hold(horizon, control(leader, 0.0));
  };

  if (x(0) - x(1) <= 1e-12 * std::max(1.0, std::abs(x(0)))) {
    regime.case_id = TwoAgentCase::equal_start;
    plan.hold(horizon, control(M / 2, M / 2));
  } else if (M <= 1.0 + kBudgetEps) {
    const double t0 = 2.0 / (2.0 - M) * std::log1p((2.0 - M) / (2.0 * M) * (x(0) - x(1)) / mean);
    regime.t0 = t0;
    if (horizon >= t0) {
      regime.case_id = TwoAgentCase::M_le_1_long;
      plan.hold(t0, control(M, 0.0)).hold(horizon, control(M / 2, M / 2));
    } else {
      inactivate_then(std::min(M, 1.0), TwoAgentCase::M_le_1_short);
    }
  } else if (M >= 2.0 - kBudgetEps) {
    if (x(1) > 0.0) {
      regime.case_id = TwoAgentCase::M2_both_positive;
      plan.hold(horizon, control(1.0, 1.0));
    } else {
      const double t0 = 2.0 * std::log(x(0) / (2.0 * mean));
      regime.t0 = t0;
      if (horizon >= t0) {
        regime.case_id = TwoAgentCase::M2_long;
        plan.hold(t0, control(1.0, 0.0)).hold(horizon, control(1.0, 1.0));
      } else {
        inactivate_then(1.0, TwoAgentCase::M2_short);
      }
    }
  } else {
    const double stretch = 2.0 / (2.0 - M);
    const double t2 = stretch * std::log(x(0) / mean);
    regime.t2 = t2;
    const bool follower_positive = x(1) > 0.0;
    double t0 = 0.0;
    double t1 = 0.0;
    if (!follower_positive) {
      t0 = 2.0 * std::log(x(0) / (2.0 * mean));
      t1 = stretch * std::log(x(0) / (2.0 * mean));
      regime.t0 = t0;
      regime.t1 = t1;
    }
    if (!follower_positive && horizon < t0) {
      inactivate_then(1.0, TwoAgentCase::M12_T_lt_t0);
    } else if (!follower_positive && horizon <= t1) {
      // Constant follower share that brings xi_2 to zero exactly at T.
      regime.case_id = TwoAgentCase::M12_t0_t1;
      plan.hold(horizon, control(1.0, std::clamp(1.0 - t0 / horizon, 0.0, M - 1.0)));
    } else if (horizon < t2) {
      regime.case_id = TwoAgentCase::M12_t1_t2;
      plan.hold(horizon, control(1.0, M - 1.0));
    } else {
      regime.case_id = TwoAgentCase::M12_T_ge_t2;
      plan.hold(t2, control(1.0, M - 1.0)).hold(horizon, control(M / 2, M / 2));
    }
  }
  return TwoAgentPlan{regime, std::move(plan).build()};
}

}  // namespace migractl
