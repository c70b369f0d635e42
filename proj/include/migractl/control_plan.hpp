#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "migractl/core_model.hpp"

namespace migractl {

/// Default tolerance for treating two projected velocities as merged.
inline constexpr double kMergeTol = 1e-7;

enum class Rule {
  constant,            // fixed alpha on the whole piece
  instantaneous,       // greedy decrease of dV/dt under the plan budget
  integral_argmax,     // equal split over argmax(xi), total 1
  equal_split_merged,  // equal split of the plan budget over the block merged with the leader
};

std::string_view to_string(Rule rule);
Rule rule_from_string(std::string_view name);

struct PlanPiece {
  double t0 = 0.0;
  double t1 = 0.0;
  Rule rule = Rule::constant;
  Vector alpha;  // only for Rule::constant

  bool is_feedback() const { return rule != Rule::constant; }
};

/// Piecewise description of alpha(t) on [0, horizon].
class ControlPlan {
 public:
  ControlPlan(double budget, double horizon, std::vector<PlanPiece> pieces);

  double budget() const { return budget_; }
  double horizon() const { return horizon_; }
  const std::vector<PlanPiece>& pieces() const { return pieces_; }

  /// Piece whose interval [t0, t1) contains t; the last piece owns t = horizon.
  const PlanPiece& piece_at(double t) const;

  /// Control on `piece` for the current projected velocities.
  Vector control(const PlanPiece& piece, const Vector& xi, double merge_tol = kMergeTol) const;

  bool has_feedback() const;

  static ControlPlan constant(double budget, double horizon, Vector alpha);

 private:
  double budget_;
  double horizon_;
  std::vector<PlanPiece> pieces_;
};

/// Builder that drops zero-length pieces and clips at the horizon.
class PlanBuilder {
 public:
  PlanBuilder(double budget, double horizon) : budget_(budget), horizon_(horizon) {}

  PlanBuilder& hold(double until, Vector alpha);
  PlanBuilder& feedback(double until, Rule rule);
  ControlPlan build() &&;

  double cursor() const { return cursor_; }

 private:
  double budget_;
  double horizon_;
  double cursor_ = 0.0;
  std::vector<PlanPiece> pieces_;
};

}  // namespace migractl
