#include "migractl/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace migractl {

Ensemble::Ensemble(Matrix positions, Matrix velocities, Vector target)
    : positions_(std::move(positions)), velocities_(std::move(velocities)), target_(std::move(target)) {
  if (velocities_.cols() < 1 || velocities_.rows() < 1)
    throw std::invalid_argument("ensemble needs at least one agent in at least one dimension");
  if (positions_.rows() != velocities_.rows() || positions_.cols() != velocities_.cols())
    throw std::invalid_argument("positions and velocities must have the same shape");
  if (target_.size() != velocities_.rows())
    throw std::invalid_argument("target velocity has the wrong dimension");
}

ProjectedState ProjectedState::from_xi(Vector xi) {
  ProjectedState s;
  s.xibar = xi.size() > 0 ? xi.mean() : 0.0;
  s.xi = std::move(xi);
  return s;
}

ProjectedState project(const Ensemble& ensemble) {
  const Matrix rel = ensemble.velocities().colwise() - ensemble.target();
  const Vector mean = rel.rowwise().mean();
  const double norm = mean.norm();
  if (!(norm > kDegenerateMeanTol)) {
    std::ostringstream os;
    os << "mean velocity equals the target (|v̄ - V| = " << norm << ")";
    throw DegenerateMean(os.str());
  }
  ProjectedState s;
  s.e = mean / norm;
  s.xi = rel.transpose() * s.e;
  s.w = rel - s.e * s.xi.transpose();
  s.xibar = s.xi.mean();
  return s;
}

Matrix reconstruct_velocities(const ProjectedState& state, const Vector& target) {
  Matrix v = state.e * state.xi.transpose() + state.w;
  v.colwise() += target;
  return v;
}

Permutation descending_order(const Vector& xi) {
  Permutation perm(static_cast<std::size_t>(xi.size()));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::stable_sort(perm.begin(), perm.end(), [&](Eigen::Index a, Eigen::Index b) { return xi(a) > xi(b); });
  return perm;
}

std::pair<ProjectedState, Permutation> canonical_order(const ProjectedState& state) {
  Permutation perm = descending_order(state.xi);
  ProjectedState sorted;
  sorted.xibar = state.xibar;
  sorted.e = state.e;
  sorted.xi.resize(state.xi.size());
  if (state.has_geometry()) sorted.w.resize(state.w.rows(), state.w.cols());
  for (std::size_t k = 0; k < perm.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    sorted.xi(i) = state.xi(perm[k]);
    if (state.has_geometry()) sorted.w.col(i) = state.w.col(perm[k]);
  }
  return {std::move(sorted), std::move(perm)};
}

Vector unpermute(const Vector& sorted_values, const Permutation& perm) {
  Vector out(sorted_values.size());
  for (std::size_t k = 0; k < perm.size(); ++k) out(perm[k]) = sorted_values(static_cast<Eigen::Index>(k));
  return out;
}

bool is_admissible(const Vector& alpha, double budget) noexcept {
  if (!alpha.allFinite()) return false;
  if ((alpha.array() < 0.0).any() || (alpha.array() > 1.0).any()) return false;
  return alpha.sum() <= budget + kBudgetSlack;
}

void check_admissible(const Vector& alpha, double budget) {
  if (is_admissible(alpha, budget)) return;
  std::ostringstream os;
  os << "control (" << alpha.transpose() << ") violates 0 <= alpha_i <= 1, sum <= " << budget;
  throw InadmissibleControl(os.str());
}

}  // namespace migractl
