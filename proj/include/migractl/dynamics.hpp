#pragma once

#include <optional>
#include <vector>

#include "migractl/control_plan.hpp"
#include "migractl/core_model.hpp"

namespace migractl {

inline constexpr double kDefaultStep = 1e-3;

/// Right-hand side of the projected system: -xi_i + (1 - alpha_i) xibar.
template <typename DerivedX, typename DerivedA>
Vector projected_rhs(const Eigen::MatrixBase<DerivedX>& xi, const Eigen::MatrixBase<DerivedA>& alpha) {
  const double mean = xi.mean();
  return -xi + ((1.0 - alpha.array()) * mean).matrix();
}

/// One classical RK4 step of the full model with alpha frozen over the step.
/// `budget` defaults to N (only the box constraint then binds).
Ensemble step_full(const Ensemble& ensemble, const Vector& alpha, double h, std::optional<double> budget = {});

/// One classical RK4 step of the projected system.
Vector step_projected(const Vector& xi, const Vector& alpha, double h, std::optional<double> budget = {});

/// Exact solution of the projected system after time `tau` under constant alpha.
Vector propagate_constant(const Vector& xi, const Vector& alpha, double tau);

/// Sampled solution. Column k of `xi`/`alpha` belongs to t[k]; alpha[:,k] is the
/// control held on [t[k], t[k+1]) and the last column repeats the final control.
struct Trajectory {
  double budget = 1.0;
  std::vector<double> t;
  Matrix xi;
  Matrix alpha;
  Vector V;
  // Present only for full-model simulations.
  std::vector<Matrix> velocities;
  std::vector<Vector> directions;
  std::vector<Matrix> residuals;
  // True when merge events shortened some steps.
  bool refined = false;

  Eigen::Index agents() const { return xi.rows(); }
  Eigen::Index samples() const { return xi.cols(); }
  double horizon() const { return t.empty() ? 0.0 : t.back(); }
  Vector final_state() const { return xi.col(xi.cols() - 1); }
  double final_value() const { return V(V.size() - 1); }
};

struct SimulationOptions {
  double h = kDefaultStep;
  double merge_tol = kMergeTol;
  // Shorten steps so feedback-rule merges land on grid points.
  bool locate_merges = true;
};

/// RK4 integration of the projected system along `plan`. Every piece boundary
/// is a grid point; feedback rules are evaluated at each step start.
/// Throws InadmissibleControl or NonFiniteState.
Trajectory simulate(const ProjectedState& initial, const ControlPlan& plan, const SimulationOptions& options = {});

Trajectory simulate(const Vector& xi0, const ControlPlan& plan, double h = kDefaultStep);

/// RK4 integration of the full (x, v) model; feedback rules read the projected
/// velocities at each step start. Records projections at every sample.
Trajectory simulate_full(const Ensemble& initial, const ControlPlan& plan, double h = kDefaultStep);

/// Exact evaluator of the projected system under a plan made only of constant
/// pieces. Throws UnsupportedSchedule on feedback pieces.
class PiecewiseClosedForm {
 public:
  PiecewiseClosedForm(const Vector& xi0, const ControlPlan& plan);

  Vector operator()(double t) const;

 private:
  std::vector<double> starts_;
  std::vector<Vector> alphas_;
  std::vector<Vector> states_;  // state at each piece start
};

PiecewiseClosedForm closed_form_piecewise(const Vector& xi0, const ControlPlan& plan);

}  // namespace migractl
