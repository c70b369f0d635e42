#pragma once

#include <string_view>
#include <vector>

#include "migractl/dynamics.hpp"

namespace migractl {

enum class CostKind { final_cost, integral_cost };

std::string_view to_string(CostKind kind);
CostKind cost_kind_from_string(std::string_view name);

/// Adjoint samples on the forward grid; lambda.col(k) belongs to t[k].
struct Costate {
  CostKind kind = CostKind::final_cost;
  std::vector<double> t;
  Matrix lambda;
};

/// Backward RK4 of  dλ_i/dt = (1/N) Σ α_j λ_j − λ̄ + λ_i  from λ(T) = (2/N) ξ(T),
/// reusing the forward grid and its held controls.
Costate integrate_costate_final(const Trajectory& traj);

/// Backward RK4 of  dλ_i/dt = λ_i − (1/N) Σ (1 − α_j) λ_j − 2 ξ_i  from λ(T) = 0.
/// Midpoint states are reconstructed exactly from the held control.
Costate integrate_costate_integral(const Trajectory& traj);

Costate integrate_costate(const Trajectory& traj, CostKind kind);

struct PmpReport {
  double max_violation = 0.0;
  double worst_time = 0.0;
  Eigen::Index worst_sample = 0;
  Eigen::Index samples = 0;
  double tolerance = 1e-6;
  bool consistent() const { return max_violation < tolerance; }
};

/// Largest Σ β_i λ_i over 0 <= β_i <= 1, Σ β_i <= budget.
double max_pairing(const Vector& lambda, double budget);

/// Checks at every sample that the applied control minimises −ξ̄ Σ α_i λ_i over
/// the admissible set; reports the worst gap H(α) − min H.
PmpReport check_pmp_consistency(const Trajectory& traj, const Costate& costate, double tolerance = 1e-6);

}  // namespace migractl
