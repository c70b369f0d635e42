#include "migractl/dynamics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace migractl {
namespace {

double effective_budget(std::optional<double> budget, Eigen::Index n) {
  return budget ? *budget : static_cast<double>(n);
}

// Integral of exp(c s) over [0, tau].
double exp_integral(double c, double tau) {
  if (c == 0.0) return tau;
  return std::expm1(c * tau) / c;
}

void check_finite(const Vector& xi, double t) {
  if (xi.allFinite()) return;
  std::ostringstream os;
  os << "projected state became non-finite at t = " << t;
  throw NonFiniteState(os.str());
}

// Earliest time in (0, limit) at which an agent with more control catches up
// with one below it; `limit` if none.
double first_merge_time(const Vector& xi, const Vector& alpha, double limit, double merge_tol) {
  const Eigen::Index n = xi.size();
  const double mean = xi.mean();
  if (!(mean > 0.0)) return limit;
  const double c = 1.0 - alpha.sum() / static_cast<double>(n);
  double best = limit;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double gap = xi(i) - xi(j);
      const double pull = alpha(i) - alpha(j);
      if (gap <= merge_tol || pull <= 0.0) continue;
      const double target = gap / (pull * mean);
      const double tau = c == 0.0 ? target : std::log1p(c * target) / c;
      if (tau < best) best = tau;
    }
  }
  return best;
}

// Replace clusters of (numerically) coincident values by their mean.
void snap_clusters(Vector& xi, double tol) {
  const Permutation order = descending_order(xi);
  std::size_t k = 0;
  while (k < order.size()) {
    std::size_t end = k + 1;
    while (end < order.size() &&
           xi(order[end - 1]) - xi(order[end]) <= tol * std::max(1.0, std::abs(xi(order[end]))))
      ++end;
    if (end - k > 1) {
      double sum = 0.0;
      for (std::size_t m = k; m < end; ++m) sum += xi(order[m]);
      const double mean = sum / static_cast<double>(end - k);
      for (std::size_t m = k; m < end; ++m) xi(order[m]) = mean;
    }
    k = end;
  }
}

struct Recorder {
  std::vector<double> t;
  std::vector<Vector> xi;
  std::vector<Vector> alpha;

  void push(double time, const Vector& state, const Vector& control) {
    t.push_back(time);
    xi.push_back(state);
    alpha.push_back(control);
  }

  Trajectory finish(double budget) {
    Trajectory traj;
    traj.budget = budget;
    const auto k = static_cast<Eigen::Index>(t.size());
    const Eigen::Index n = xi.front().size();
    traj.xi.resize(n, k);
    traj.alpha.resize(n, k);
    traj.V.resize(k);
    for (Eigen::Index s = 0; s < k; ++s) {
      traj.xi.col(s) = xi[static_cast<std::size_t>(s)];
      traj.alpha.col(s) = alpha[static_cast<std::size_t>(s)];
      traj.V(s) = migration_functional(traj.xi.col(s)).total;
    }
    traj.t = std::move(t);
    return traj;
  }
};

// A remainder within 1e-6 h of a full step is taken in one go, so rounding in
// the accumulated time never produces a sliver step.
double step_length(double t, double end, double h) {
  const double remaining = end - t;
  return remaining <= h * (1.0 + 1e-6) ? remaining : h;
}

}  // namespace

Ensemble step_full(const Ensemble& ensemble, const Vector& alpha, double h, std::optional<double> budget) {
  if (!(h > 0.0)) throw std::invalid_argument("step size must be positive");
  if (alpha.size() != ensemble.size()) throw std::invalid_argument("control size does not match N");
  check_admissible(alpha, effective_budget(budget, ensemble.size()));

  const Vector& target = ensemble.target();
  const Eigen::RowVectorXd keep = (1.0 - alpha.array()).matrix().transpose();
  auto accel = [&](const Matrix& v) -> Matrix {
    const Matrix rel = v.colwise() - target;
    const Vector mean = rel.rowwise().mean();
    return -rel + mean * keep;
  };

  const Matrix& v0 = ensemble.velocities();
  const Matrix kv1 = accel(v0);
  const Matrix v1 = v0 + 0.5 * h * kv1;
  const Matrix kv2 = accel(v1);
  const Matrix v2 = v0 + 0.5 * h * kv2;
  const Matrix kv3 = accel(v2);
  const Matrix v3 = v0 + h * kv3;
  const Matrix kv4 = accel(v3);

  Matrix v = v0 + (h / 6.0) * (kv1 + 2.0 * kv2 + 2.0 * kv3 + kv4);
  Matrix x = ensemble.positions() + (h / 6.0) * (v0 + 2.0 * v1 + 2.0 * v2 + v3);
  return Ensemble(std::move(x), std::move(v), target);
}

Vector step_projected(const Vector& xi, const Vector& alpha, double h, std::optional<double> budget) {
  if (!(h > 0.0)) throw std::invalid_argument("step size must be positive");
  if (alpha.size() != xi.size()) throw std::invalid_argument("control size does not match N");
  check_admissible(alpha, effective_budget(budget, xi.size()));
  const Vector k1 = projected_rhs(xi, alpha);
  const Vector k2 = projected_rhs(xi + 0.5 * h * k1, alpha);
  const Vector k3 = projected_rhs(xi + 0.5 * h * k2, alpha);
  const Vector k4 = projected_rhs(xi + h * k3, alpha);
  return xi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vector propagate_constant(const Vector& xi, const Vector& alpha, double tau) {
  const auto n = static_cast<double>(xi.size());
  const double mean = xi.mean();
  const double c = 1.0 - alpha.sum() / n;
  const double integral = exp_integral(c, tau);
  return std::exp(-tau) * (xi + ((1.0 - alpha.array()) * (mean * integral)).matrix());
}

Trajectory simulate(const ProjectedState& initial, const ControlPlan& plan, const SimulationOptions& options) {
  if (!(options.h > 0.0)) throw std::invalid_argument("step size must be positive");
  const double budget = plan.budget();
  Vector xi = initial.xi;
  check_finite(xi, 0.0);

  Recorder rec;
  bool refined = false;
  double t = 0.0;
  Vector alpha;
  for (const PlanPiece& piece : plan.pieces()) {
    while (t < piece.t1) {
      double h = step_length(t, piece.t1, options.h);
      alpha = plan.control(piece, xi, options.merge_tol);
      check_admissible(alpha, budget);
      rec.push(t, xi, alpha);

      bool merged = false;
      if (piece.is_feedback() && options.locate_merges) {
        const double tau = first_merge_time(xi, alpha, h, options.merge_tol);
        if (tau < h) {
          h = std::max(tau, std::numeric_limits<double>::min());
          merged = true;
          refined = true;
        }
      }
      xi = step_projected(xi, alpha, h, budget);
      if (merged) snap_clusters(xi, 1e-9);
      t = (h == piece.t1 - t) ? piece.t1 : t + h;
      check_finite(xi, t);
    }
  }
  alpha = plan.control(plan.pieces().back(), xi, options.merge_tol);
  rec.push(plan.horizon(), xi, alpha);
  Trajectory traj = rec.finish(budget);
  traj.refined = refined;
  return traj;
}

Trajectory simulate(const Vector& xi0, const ControlPlan& plan, double h) {
  SimulationOptions options;
  options.h = h;
  return simulate(ProjectedState::from_xi(xi0), plan, options);
}

Trajectory simulate_full(const Ensemble& initial, const ControlPlan& plan, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("step size must be positive");
  const double budget = plan.budget();
  Ensemble state = initial;
  Recorder rec;
  std::vector<Matrix> velocities;
  std::vector<Vector> directions;
  std::vector<Matrix> residuals;
  auto record = [&](double t, const Vector& alpha) {
    const ProjectedState p = project(state);
    rec.push(t, p.xi, alpha);
    velocities.push_back(state.velocities());
    directions.push_back(p.e);
    residuals.push_back(p.w);
  };

  double t = 0.0;
  for (const PlanPiece& piece : plan.pieces()) {
    while (t < piece.t1) {
      const double h_step = step_length(t, piece.t1, h);
      const Vector alpha = plan.control(piece, project(state).xi);
      record(t, alpha);
      state = step_full(state, alpha, h_step, budget);
      t = (h_step == piece.t1 - t) ? piece.t1 : t + h_step;
      if (!state.velocities().allFinite()) throw NonFiniteState("velocities became non-finite");
    }
  }
  record(plan.horizon(), plan.control(plan.pieces().back(), project(state).xi));
  Trajectory traj = rec.finish(budget);
  traj.velocities = std::move(velocities);
  traj.directions = std::move(directions);
  traj.residuals = std::move(residuals);
  return traj;
}

PiecewiseClosedForm::PiecewiseClosedForm(const Vector& xi0, const ControlPlan& plan) {
  Vector state = xi0;
  for (const PlanPiece& piece : plan.pieces()) {
    if (piece.is_feedback())
      throw UnsupportedSchedule("closed form needs constant pieces, got rule '" +
                                std::string(to_string(piece.rule)) + "'");
    if (piece.alpha.size() != xi0.size()) throw std::invalid_argument("control size does not match N");
    starts_.push_back(piece.t0);
    alphas_.push_back(piece.alpha);
    states_.push_back(state);
    state = propagate_constant(state, piece.alpha, piece.t1 - piece.t0);
  }
}

Vector PiecewiseClosedForm::operator()(double t) const {
  std::size_t k = 0;
  while (k + 1 < starts_.size() && t >= starts_[k + 1]) ++k;
  return propagate_constant(states_[k], alphas_[k], t - starts_[k]);
}

PiecewiseClosedForm closed_form_piecewise(const Vector& xi0, const ControlPlan& plan) {
  return PiecewiseClosedForm(xi0, plan);
}

}  // namespace migractl
