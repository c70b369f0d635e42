#include "migractl/control_plan.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "migractl/feedback.hpp"

namespace migractl {
namespace {

constexpr double kTilingTol = 1e-9;

bool close(double a, double b) { return std::abs(a - b) <= kTilingTol * std::max(1.0, std::abs(b)); }

}  // namespace

std::string_view to_string(Rule rule) {
  switch (rule) {
    case Rule::constant: return "constant";
    case Rule::instantaneous: return "instantaneous";
    case Rule::integral_argmax: return "integral_argmax";
    case Rule::equal_split_merged: return "equal_split_merged";
  }
  return "constant";
}

Rule rule_from_string(std::string_view name) {
  for (Rule r : {Rule::constant, Rule::instantaneous, Rule::integral_argmax, Rule::equal_split_merged})
    if (to_string(r) == name) return r;
  throw FormatError("unknown control rule '" + std::string(name) + "'");
}

ControlPlan::ControlPlan(double budget, double horizon, std::vector<PlanPiece> pieces)
    : budget_(budget), horizon_(horizon), pieces_(std::move(pieces)) {
  if (!(budget_ > 0.0)) throw BudgetOutOfRange("control budget must be positive");
  if (!(horizon_ > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (pieces_.empty()) throw std::invalid_argument("control plan has no pieces");
  if (!close(pieces_.front().t0, 0.0)) throw std::invalid_argument("control plan must start at t = 0");
  if (!close(pieces_.back().t1, horizon_)) throw std::invalid_argument("control plan must end at the horizon");
  pieces_.front().t0 = 0.0;
  pieces_.back().t1 = horizon_;
  Eigen::Index n = -1;
  for (std::size_t k = 0; k < pieces_.size(); ++k) {
    const PlanPiece& p = pieces_[k];
    if (!(p.t1 > p.t0)) throw std::invalid_argument("control plan piece has non-positive length");
    if (k + 1 < pieces_.size() && !close(p.t1, pieces_[k + 1].t0))
      throw std::invalid_argument("control plan pieces leave a gap or overlap");
    if (p.rule == Rule::constant) {
      if (n >= 0 && p.alpha.size() != n) throw std::invalid_argument("control plan pieces disagree on N");
      n = p.alpha.size();
      check_admissible(p.alpha, budget_);
    }
  }
}

const PlanPiece& ControlPlan::piece_at(double t) const {
  for (const PlanPiece& p : pieces_)
    if (t < p.t1) return p;
  return pieces_.back();
}

Vector ControlPlan::control(const PlanPiece& piece, const Vector& xi, double merge_tol) const {
  switch (piece.rule) {
    case Rule::constant:
      if (piece.alpha.size() != xi.size())
        throw std::invalid_argument("constant control size does not match the number of agents");
      return piece.alpha;
    case Rule::instantaneous: return instantaneous_control(xi, budget_, merge_tol);
    case Rule::integral_argmax: return integral_cost_control(xi, merge_tol);
    case Rule::equal_split_merged: return equal_split_merged(xi, budget_, merge_tol);
  }
  return piece.alpha;
}

bool ControlPlan::has_feedback() const {
  for (const PlanPiece& p : pieces_)
    if (p.is_feedback()) return true;
  return false;
}

ControlPlan ControlPlan::constant(double budget, double horizon, Vector alpha) {
  return ControlPlan(budget, horizon, {PlanPiece{0.0, horizon, Rule::constant, std::move(alpha)}});
}

PlanBuilder& PlanBuilder::hold(double until, Vector alpha) {
  until = std::min(until, horizon_);
  if (until > cursor_) {
    pieces_.push_back({cursor_, until, Rule::constant, std::move(alpha)});
    cursor_ = until;
  }
  return *this;
}

PlanBuilder& PlanBuilder::feedback(double until, Rule rule) {
  until = std::min(until, horizon_);
  if (until > cursor_) {
    pieces_.push_back({cursor_, until, rule, Vector()});
    cursor_ = until;
  }
  return *this;
}

ControlPlan PlanBuilder::build() && { return ControlPlan(budget_, horizon_, std::move(pieces_)); }

}  // namespace migractl
