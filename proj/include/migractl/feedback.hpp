#pragma once

#include "migractl/control_plan.hpp"

namespace migractl {

/// Control that minimises dV/dt under sum(alpha) <= M: the budget goes to the
/// agents with the largest positive projection, the marginal share being split
/// evenly over its tie block. Accepts xi in any order.
/// Throws NonPositiveMean if mean(xi) <= 0.
Vector instantaneous_control(const Vector& xi, double budget, double tie_tol = kMergeTol);

/// Full-strength control split evenly over J = {i : xi_i >= max xi - merge_tol}.
Vector integral_cost_control(const Vector& xi, double merge_tol = kMergeTol);

/// Same selection as `integral_cost_control` with total `budget` (capped so
/// each alpha_i <= 1).
Vector equal_split_merged(const Vector& xi, double budget, double merge_tol = kMergeTol);

/// dV/dt = -2V + (2/N) xibar sum (1 - alpha_i) xi_i.
double migration_rate(const Vector& xi, const Vector& alpha);

}  // namespace migractl
