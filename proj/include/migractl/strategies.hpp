#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "migractl/control_plan.hpp"
#include "migractl/feedback.hpp"

namespace migractl {

// ---------------------------------------------------------------------------
// Two agents, budget M in (0, 2]

enum class TwoAgentCase {
  equal_start,
  M_le_1_long,
  M_le_1_short,
  M2_both_positive,
  M2_long,
  M2_short,
  M12_T_lt_t0,
  M12_t0_t1,
  M12_t1_t2,
  M12_T_ge_t2,
};

std::string_view to_string(TwoAgentCase c);

struct TwoAgentRegime {
  double budget = 1.0;
  TwoAgentCase case_id = TwoAgentCase::equal_start;
  std::optional<double> t0;
  std::optional<double> t1;
  std::optional<double> t2;
  std::optional<double> tstar;
};

struct TwoAgentPlan {
  TwoAgentRegime regime;
  ControlPlan plan;
};

/// Classifies (xi0, M, T) and emits one optimal plan for the final cost.
/// Throws NonPositiveMean or BudgetOutOfRange.
TwoAgentPlan two_agent_plan(const Eigen::Vector2d& xi0, double budget, double horizon);

struct InactivationTime {
  double tstar = 0.0;
  double value = 0.0;  // V(T) = (xi_1^2 + xi_2^2) / 2 at the minimiser
  double x = 1.0;      // exp(tstar / 2)
};

/// Minimises V(T) over the switch time t* of the plan (0,0) on [0,t*), (1,0)
/// after, through the stationary points of the quartic in X = exp(t*/2).
InactivationTime inactivation_time_quartic(const Eigen::Vector2d& xi0, double xibar0, double horizon);

/// Same minimisation for a leader share `leader` in (0, 1], by scan and
/// golden-section refinement of the closed-form cost.
InactivationTime inactivation_time_search(const Eigen::Vector2d& xi0, double leader, double horizon);

/// The quartic e^{-2T}[(ξ1 + ξ̄(X²-1))² + (ξ2 + ξ̄(X²-1) + 2ξ̄X(e^{T/2}-X))²].
double inactivation_quartic(const Eigen::Vector2d& xi0, double xibar0, double horizon, double x);

// ---------------------------------------------------------------------------
// N agents, budget M <= 1

/// Times t_1 = 0 <= t_2 <= ... <= t_N at which agent l joins the merged leading
/// block under the staged plan with total control `budget`. xi0 must be sorted
/// in descending order. Throws NonPositiveMean.
std::vector<double> staged_switch_times(const Vector& xi0, double budget = 1.0);

struct StagedPlan {
  std::vector<double> switch_times;
  // Size of the controlled leading block on each piece of `plan`.
  std::vector<Eigen::Index> block_sizes;
  ControlPlan plan;
};

/// Staged full-control plan: alpha = budget/k on the first k agents on
/// [t_k, t_{k+1}), then an equal split over everyone after t_N.
StagedPlan full_control_plan(const Vector& xi0, double horizon, double budget = 1.0);

/// V^δ(T): free evolution on [0, δ], then the staged plan from ξ(δ) for the
/// remaining time, evaluated in closed form. Budget 1.
double inactivation_value(const Vector& xi0, double horizon, double delta);

/// Projected state at T under the same strategy.
Vector inactivation_final_state(const Vector& xi0, double horizon, double delta);

/// Zero control on [0, δ) followed by the staged plan built from ξ(δ).
ControlPlan inactivation_plan(const Vector& xi0, double horizon, double delta);

struct InactivationScan {
  double delta = 0.0;
  double value = 0.0;       // V^δ(T)
  double full_value = 0.0;  // V^0(T)
};

inline constexpr int kDefaultScanGrid = 512;

/// Minimises V^δ(T) over δ ∈ [0, T] on a uniform grid, then refines the best
/// bracket by golden-section search to 1e-8.
InactivationScan inactivation_scan(const Vector& xi0, double horizon, int grid = kDefaultScanGrid);

/// Whether a scan result counts as an inactivation case (δ > 1e-3 T).
bool is_inactivation(const InactivationScan& scan, double horizon);

}  // namespace migractl
