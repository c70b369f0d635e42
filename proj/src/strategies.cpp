#include "migractl/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "migractl/dynamics.hpp"
#include "migractl/numerics.hpp"

namespace migractl {
namespace {

void require_positive_mean(const Vector& xi) {
  const double mean = xi.mean();
  if (mean > 0.0) return;
  std::ostringstream os;
  os << "mean projected velocity must be positive (got " << mean << ")";
  throw NonPositiveMean(os.str());
}

void require_sorted(const Vector& xi) {
  for (Eigen::Index i = 0; i + 1 < xi.size(); ++i)
    if (xi(i) < xi(i + 1)) throw std::invalid_argument("projected velocities must be sorted in descending order");
}

Vector leading_block(Eigen::Index n, Eigen::Index k, double share) {
  Vector a = Vector::Zero(n);
  a.head(k).setConstant(share);
  return a;
}

}  // namespace

// ---------------------------------------------------------------------------
// Feedback laws

Vector instantaneous_control(const Vector& xi, double budget, double tie_tol) {
  require_positive_mean(xi);
  if (!(budget > 0.0)) throw BudgetOutOfRange("control budget must be positive");
  const Eigen::Index n = xi.size();
  const Permutation perm = descending_order(xi);
  Vector sorted(n);
  for (Eigen::Index k = 0; k < n; ++k) sorted(k) = xi(perm[static_cast<std::size_t>(k)]);

  const auto positive = static_cast<Eigen::Index>((sorted.array() > 0.0).count());
  Vector alpha = Vector::Zero(n);
  if (static_cast<double>(positive) <= budget + 1e-12) {
    alpha.head(positive).setOnes();
  } else {
    // Marginal agent is the ceil(M)-th; its tie block shares what is left.
    const auto marginal = static_cast<Eigen::Index>(std::ceil(budget - 1e-12)) - 1;
    const double pivot = sorted(marginal);
    Eigen::Index above = 0;
    Eigen::Index block = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (std::abs(sorted(k) - pivot) <= tie_tol) {
        ++block;
      } else if (k < marginal) {
        alpha(k) = 1.0;
        ++above;
      }
    }
    const double share = (budget - static_cast<double>(above)) / static_cast<double>(block);
    for (Eigen::Index k = 0; k < n; ++k)
      if (std::abs(sorted(k) - pivot) <= tie_tol) alpha(k) = share;
  }
  return unpermute(alpha, perm);
}

Vector equal_split_merged(const Vector& xi, double budget, double merge_tol) {
  require_positive_mean(xi);
  const double top = xi.maxCoeff();
  const auto members = (xi.array() >= top - merge_tol);
  const double share = std::min(1.0, budget / static_cast<double>(members.count()));
  return members.select(Vector::Constant(xi.size(), share), Vector::Zero(xi.size()));
}

Vector integral_cost_control(const Vector& xi, double merge_tol) { return equal_split_merged(xi, 1.0, merge_tol); }

double migration_rate(const Vector& xi, const Vector& alpha) {
  const auto n = static_cast<double>(xi.size());
  return -2.0 * migration_functional(xi).total +
         (2.0 / n) * xi.mean() * (1.0 - alpha.array()).matrix().dot(xi);
}

// ---------------------------------------------------------------------------
// Staged full-control plan

std::vector<double> staged_switch_times(const Vector& xi0, double budget) {
  require_positive_mean(xi0);
  require_sorted(xi0);
  if (!(budget > 0.0) || budget > 1.0) throw BudgetOutOfRange("staged plan needs a budget in (0, 1]");
  const Eigen::Index n = xi0.size();
  const double mean = xi0.mean();
  const double c = 1.0 - budget / static_cast<double>(n);
  std::vector<double> times{0.0};
  for (Eigen::Index l = 2; l <= n; ++l) {
    const double gap = partial_mean(xi0, l - 1) - xi0(l - 1);
    const double reach = static_cast<double>(l - 1) * gap / (budget * mean);
    const double t = c == 0.0 ? reach : std::log1p(c * reach) / c;
    times.push_back(std::max(times.back(), t));
  }
  return times;
}

StagedPlan full_control_plan(const Vector& xi0, double horizon, double budget) {
  const std::vector<double> times = staged_switch_times(xi0, budget);
  const Eigen::Index n = xi0.size();
  PlanBuilder builder(budget, horizon);
  std::vector<Eigen::Index> blocks;
  for (Eigen::Index k = 1; k < n; ++k) {
    const double before = builder.cursor();
    builder.hold(times[static_cast<std::size_t>(k)], leading_block(n, k, budget / static_cast<double>(k)));
    if (builder.cursor() > before) blocks.push_back(k);
  }
  const double before = builder.cursor();
  builder.hold(horizon, Vector::Constant(n, budget / static_cast<double>(n)));
  if (builder.cursor() > before) blocks.push_back(n);
  return StagedPlan{times, std::move(blocks), std::move(builder).build()};
}

// ---------------------------------------------------------------------------
// Inactivation

Vector inactivation_final_state(const Vector& xi0, double horizon, double delta) {
  require_positive_mean(xi0);
  require_sorted(xi0);
  const Eigen::Index n = xi0.size();
  const double mean = xi0.mean();
  delta = std::clamp(delta, 0.0, horizon);

  // Free evolution keeps the mean and contracts towards it.
  const Vector start = std::exp(-delta) * (xi0.array() + mean * std::expm1(delta)).matrix();
  const double rest = horizon - delta;
  const std::vector<double> times = staged_switch_times(start, 1.0);
  Eigen::Index merged = 1;
  while (merged < n && times[static_cast<std::size_t>(merged)] <= rest) ++merged;

  const double c = 1.0 - 1.0 / static_cast<double>(n);
  const double growth = c == 0.0 ? rest : std::expm1(c * rest) / c;
  const double decay = std::exp(-rest);
  Vector out(n);
  const double lm = static_cast<double>(merged);
  out.head(merged).setConstant(decay * (partial_mean(start, merged) + (lm - 1.0) / lm * mean * growth));
  out.tail(n - merged) = decay * (start.tail(n - merged).array() + mean * growth).matrix();
  return out;
}

double inactivation_value(const Vector& xi0, double horizon, double delta) {
  return migration_functional(inactivation_final_state(xi0, horizon, delta)).total;
}

ControlPlan inactivation_plan(const Vector& xi0, double horizon, double delta) {
  require_positive_mean(xi0);
  require_sorted(xi0);
  const Eigen::Index n = xi0.size();
  delta = std::clamp(delta, 0.0, horizon);
  PlanBuilder builder(1.0, horizon);
  builder.hold(delta, Vector::Zero(n));
  if (delta < horizon) {
    const Vector start = propagate_constant(xi0, Vector::Zero(n), delta);
    const StagedPlan staged = full_control_plan(start, horizon - delta, 1.0);
    for (const PlanPiece& p : staged.plan.pieces()) builder.hold(delta + p.t1, p.alpha);
  }
  return std::move(builder).build();
}

InactivationScan inactivation_scan(const Vector& xi0, double horizon, int grid) {
  if (grid < 2) throw std::invalid_argument("scan grid needs at least two points");
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  auto value = [&](double delta) { return inactivation_value(xi0, horizon, delta); };

  const double spacing = horizon / static_cast<double>(grid - 1);
  InactivationScan best;
  best.full_value = value(0.0);
  best.value = best.full_value;
  int best_k = 0;
  for (int k = 1; k < grid; ++k) {
    const double v = value(spacing * k);
    if (v < best.value) {
      best.value = v;
      best_k = k;
    }
  }
  best.delta = spacing * best_k;

  const double lo = spacing * std::max(0, best_k - 1);
  const double hi = std::min(horizon, spacing * (best_k + 1));
  const double refined = golden_section_minimize(value, lo, hi, 1e-8);
  const double refined_value = value(refined);
  if (refined_value < best.value) {
    best.value = refined_value;
    best.delta = refined;
  }
  return best;
}

bool is_inactivation(const InactivationScan& scan, double horizon) { return scan.delta > 1e-3 * horizon; }

}  // namespace migractl
