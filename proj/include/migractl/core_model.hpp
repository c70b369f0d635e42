#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <utility>
#include <vector>

#include "migractl/errors.hpp"

namespace migractl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Threshold on |mean velocity - target| below which the system is treated as
/// uncontrollable.
inline constexpr double kDegenerateMeanTol = 1e-12;

/// Slack allowed on the budget constraint sum(alpha) <= M.
inline constexpr double kBudgetSlack = 1e-9;

/// Positions and velocities of N agents in R^d plus the target velocity.
/// Agents are stored column-wise: positions.col(i) is x_i.
class Ensemble {
 public:
  Ensemble(Matrix positions, Matrix velocities, Vector target);

  Eigen::Index dim() const { return velocities_.rows(); }
  Eigen::Index size() const { return velocities_.cols(); }

  const Matrix& positions() const { return positions_; }
  const Matrix& velocities() const { return velocities_; }
  const Vector& target() const { return target_; }

  Vector mean_velocity() const { return velocities_.rowwise().mean(); }

 private:
  Matrix positions_;
  Matrix velocities_;
  Vector target_;
};

/// Scalar projections of v_i - V on the invariant direction e together with
/// the orthogonal residuals. A state built from scalars alone has empty `e`
/// and `w`.
struct ProjectedState {
  Vector xi;
  double xibar = 0.0;
  Vector e;
  Matrix w;  // dim x N

  static ProjectedState from_xi(Vector xi);
  bool has_geometry() const { return e.size() > 0; }
};

/// Throws DegenerateMean when |v̄ - V| <= kDegenerateMeanTol.
ProjectedState project(const Ensemble& ensemble);

/// Inverse of `project`: v_i = V + xi_i e + w_i.
Matrix reconstruct_velocities(const ProjectedState& state, const Vector& target);

template <typename Scalar>
struct MigrationValue {
  Scalar total;
  Scalar mean_part;
  Scalar variance_part;
};

/// (1/N) sum xi_i^2 split into xibar^2 and the empirical variance.
template <typename Derived>
MigrationValue<typename Derived::Scalar> migration_functional(const Eigen::MatrixBase<Derived>& xi) {
  using Scalar = typename Derived::Scalar;
  const Scalar mean = xi.mean();
  return {xi.squaredNorm() / Scalar(xi.size()), mean * mean,
          (xi.array() - mean).square().mean()};
}

/// Partial mean (1/l) sum_{i<l} xi_i over the leading block.
template <typename Derived>
typename Derived::Scalar partial_mean(const Eigen::MatrixBase<Derived>& xi, Eigen::Index l) {
  return xi.head(l).mean();
}

/// Permutation with perm[k] = original index of the agent in sorted slot k.
using Permutation = std::vector<Eigen::Index>;

/// Stable descending sort of xi; w columns follow their agents.
std::pair<ProjectedState, Permutation> canonical_order(const ProjectedState& state);

/// Stable descending order of a scalar sequence.
Permutation descending_order(const Vector& xi);

/// Maps a control defined in sorted order back to original agent indices.
Vector unpermute(const Vector& sorted_values, const Permutation& perm);

/// Throws InadmissibleControl unless 0 <= alpha_i <= 1 and sum <= budget + slack.
void check_admissible(const Vector& alpha, double budget);

bool is_admissible(const Vector& alpha, double budget) noexcept;

}  // namespace migractl
