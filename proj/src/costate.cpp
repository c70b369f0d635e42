#include "migractl/costate.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

namespace migractl {
namespace {

using Rhs = std::function<Vector(const Vector& lambda, const Vector& xi)>;

Costate integrate_backward(const Trajectory& traj, CostKind kind, Vector terminal, bool needs_state) {
  const Eigen::Index n = traj.agents();
  const Eigen::Index k = traj.samples();
  if (k < 2) throw std::invalid_argument("trajectory needs at least two samples");

  Costate out;
  out.kind = kind;
  out.t = traj.t;
  out.lambda.resize(n, k);
  out.lambda.col(k - 1) = std::move(terminal);

  const auto nd = static_cast<double>(n);
  for (Eigen::Index s = k - 2; s >= 0; --s) {
    const Vector alpha = traj.alpha.col(s);
    const double h = traj.t[static_cast<std::size_t>(s + 1)] - traj.t[static_cast<std::size_t>(s)];
    auto rhs = [&](const Vector& lambda, const Vector& xi) -> Vector {
      if (kind == CostKind::final_cost)
        return lambda.array() + (alpha.dot(lambda) / nd - lambda.mean());
      return lambda.array() - (1.0 - alpha.array()).matrix().dot(lambda) / nd - 2.0 * xi.array();
    };
    const Vector xi_end = traj.xi.col(s + 1);
    const Vector xi_start = traj.xi.col(s);
    const Vector xi_mid = needs_state ? propagate_constant(xi_start, alpha, 0.5 * h) : xi_start;

    // Integrate from t[s+1] down to t[s] with step -h.
    const Vector& l0 = out.lambda.col(s + 1);
    const Vector k1 = rhs(l0, xi_end);
    const Vector k2 = rhs(l0 - 0.5 * h * k1, xi_mid);
    const Vector k3 = rhs(l0 - 0.5 * h * k2, xi_mid);
    const Vector k4 = rhs(l0 - h * k3, xi_start);
    out.lambda.col(s) = l0 - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return out;
}

}  // namespace

std::string_view to_string(CostKind kind) { return kind == CostKind::final_cost ? "final" : "integral"; }

CostKind cost_kind_from_string(std::string_view name) {
  if (name == "final") return CostKind::final_cost;
  if (name == "integral") return CostKind::integral_cost;
  throw FormatError("unknown cost kind '" + std::string(name) + "'");
}

Costate integrate_costate_final(const Trajectory& traj) {
  const Vector terminal = (2.0 / static_cast<double>(traj.agents())) * traj.final_state();
  return integrate_backward(traj, CostKind::final_cost, terminal, false);
}

Costate integrate_costate_integral(const Trajectory& traj) {
  return integrate_backward(traj, CostKind::integral_cost, Vector::Zero(traj.agents()), true);
}

Costate integrate_costate(const Trajectory& traj, CostKind kind) {
  return kind == CostKind::final_cost ? integrate_costate_final(traj) : integrate_costate_integral(traj);
}

double max_pairing(const Vector& lambda, double budget) {
  std::vector<double> sorted(lambda.data(), lambda.data() + lambda.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double left = budget;
  double total = 0.0;
  for (double l : sorted) {
    if (l <= 0.0 || left <= 0.0) break;
    const double share = std::min(1.0, left);
    total += share * l;
    left -= share;
  }
  return total;
}

PmpReport check_pmp_consistency(const Trajectory& traj, const Costate& costate, double tolerance) {
  if (costate.lambda.cols() != traj.samples() || costate.lambda.rows() != traj.agents())
    throw std::invalid_argument("costate and trajectory grids do not match");
  PmpReport report;
  report.tolerance = tolerance;
  report.samples = traj.samples();
  for (Eigen::Index s = 0; s < traj.samples(); ++s) {
    const double mean = traj.xi.col(s).mean();
    const Vector lambda = costate.lambda.col(s);
    const double applied = -mean * traj.alpha.col(s).dot(lambda);
    const double best = -mean * max_pairing(lambda, traj.budget);
    const double gap = applied - best;
    if (gap > report.max_violation) {
      report.max_violation = gap;
      report.worst_sample = s;
      report.worst_time = traj.t[static_cast<std::size_t>(s)];
    }
  }
  return report;
}

}  // namespace migractl
