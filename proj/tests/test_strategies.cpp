#include <doctest.h>

#include <cmath>

#include "migractl/costate.hpp"
#include "migractl/dynamics.hpp"
#include "migractl/experiments.hpp"
#include "migractl/strategies.hpp"

using namespace migractl;

namespace {

double closed_form_value(const Vector& xi0, const ControlPlan& plan) {
  return migration_functional(closed_form_piecewise(xi0, plan)(plan.horizon())).total;
}

}  // namespace

TEST_CASE("instantaneous control: worked examples") {
  CHECK(instantaneous_control(Eigen::Vector3d(1, -0.2, -0.2), 1.0).isApprox(Eigen::Vector3d(1, 0, 0)));
  CHECK(instantaneous_control(Eigen::Vector3d(2, 1, -1), 1.0).isApprox(Eigen::Vector3d(1, 0, 0)));
  CHECK(instantaneous_control(Eigen::Vector3d(2, 2, -1), 1.0).isApprox(Eigen::Vector3d(0.5, 0.5, 0)));
  CHECK(instantaneous_control(Eigen::Vector3d(2, 1, 1), 2.0).isApprox(Eigen::Vector3d(1, 0.5, 0.5)));
  CHECK(instantaneous_control(Eigen::Vector3d(2, 1, -1), 2.5).isApprox(Eigen::Vector3d(1, 1, 0)));
  CHECK(instantaneous_control(Eigen::Vector3d(-1, 2, 1), 1.5).isApprox(Eigen::Vector3d(0, 1, 0.5)));
  CHECK_THROWS_AS(instantaneous_control(Eigen::Vector2d(1, -1), 1.0), NonPositiveMean);
}

TEST_CASE("instantaneous control minimises dV/dt") {
  Rng rng(101);
  for (int s = 0; s < 1000; ++s) {
    const Eigen::Index n = 2 + s % 5;
    const Vector xi = sample_initial(n, rng);
    const double budget = rng.uniform(0.1, static_cast<double>(n));
    const Vector best = instantaneous_control(xi, budget);
    REQUIRE(is_admissible(best, budget));
    const double rate = migration_rate(xi, best);
    for (int k = 0; k < 1000; ++k) {
      const double other = migration_rate(xi, sample_admissible(n, budget, rng));
      if (!(rate <= other + 1e-9)) {
        FAIL_CHECK("beaten: " << rate << " > " << other);
        break;
      }
    }
  }
}

TEST_CASE("migration rate closed form") {
  const Vector xi = Eigen::Vector3d(1.0, 0.5, -0.3);
  const Vector alpha = Eigen::Vector3d(0.6, 0.2, 0.0);
  const double h = 1e-6;
  const double numeric = (migration_functional(propagate_constant(xi, alpha, h)).total -
                          migration_functional(propagate_constant(xi, alpha, -h)).total) /
                         (2 * h);
  CHECK(migration_rate(xi, alpha) == doctest::Approx(numeric).epsilon(1e-8));
}

TEST_CASE("integral-cost rule") {
  CHECK(integral_cost_control(Eigen::Vector3d(2, 1, 1)).isApprox(Eigen::Vector3d(1, 0, 0)));
  CHECK(integral_cost_control(Vector::Constant(3, 0.4)).isApprox(Vector::Constant(3, 1.0 / 3)));
  CHECK(integral_cost_control(Eigen::Vector3d(1, 1 - 5e-8, 0.2)).isApprox(Eigen::Vector3d(0.5, 0.5, 0)));
  CHECK_THROWS_AS(integral_cost_control(Eigen::Vector2d(-1, 0.5)), NonPositiveMean);
}

TEST_CASE("integral-cost rule keeps merged agents merged") {
  Rng rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 2 + trial % 4;
    const Vector xi0 = sample_initial(n, rng);
    const double T = staged_switch_times(xi0).back() + 1.0;
    const ControlPlan plan = std::move(PlanBuilder(1.0, T).feedback(T, Rule::integral_argmax)).build();
    const Trajectory traj = simulate(xi0, plan, 1e-3);
    Eigen::Index last_size = 0;
    for (Eigen::Index k = 0; k < traj.samples(); ++k) {
      const Vector xi = traj.xi.col(k);
      const Vector alpha = traj.alpha.col(k);
      CHECK(std::abs(alpha.sum() - 1.0) < 1e-12);
      const Eigen::Index size = (alpha.array() > 0.0).count();
      CHECK(size >= last_size);
      last_size = size;
      double lo = INFINITY, hi = -INFINITY;
      for (Eigen::Index i = 0; i < n; ++i)
        if (alpha(i) > 0.0) {
          lo = std::min(lo, xi(i));
          hi = std::max(hi, xi(i));
        }
      CHECK(hi - lo <= kMergeTol);
    }
    CHECK(last_size == n);
  }
}

TEST_CASE("staged switch times") {
  const auto t = staged_switch_times(Eigen::Vector3d(1.5, 1.0, 0.5));
  REQUIRE(t.size() == 3);
  CHECK(t[0] == 0.0);
  CHECK(t[1] == doctest::Approx(0.43152310867767137).epsilon(1e-14));
  CHECK(t[2] == doctest::Approx(1.0397207708399179).epsilon(1e-14));

  for (double v : staged_switch_times(Vector::Constant(5, 0.3))) CHECK(v == 0.0);

  const auto two = staged_switch_times(Eigen::Vector2d(0.9, 0.1));
  CHECK(two[1] == doctest::Approx(2.0 * std::log(0.9 / 0.5)));

  CHECK_THROWS_AS(staged_switch_times(Eigen::Vector2d(0.5, -0.5)), NonPositiveMean);
}

TEST_CASE("staged switch times are non-decreasing") {
  Rng rng(6);
  for (int k = 0; k < 500; ++k) {
    const auto t = staged_switch_times(sample_initial(2 + k % 20, rng), rng.uniform(0.1, 1.0));
    for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] >= t[i - 1]);
  }
}

TEST_CASE("staged plan merges the ensemble") {
  const Vector xi0 = Eigen::Vector3d(1.5, 1.0, 0.5);
  const StagedPlan sp = full_control_plan(xi0, 3.0);
  for (std::size_t k = 1; k < sp.block_sizes.size(); ++k) CHECK(sp.block_sizes[k] >= sp.block_sizes[k - 1]);
  for (const PlanPiece& p : sp.plan.pieces()) CHECK(p.alpha.sum() == doctest::Approx(1.0));
  const Trajectory traj = simulate(xi0, sp.plan, 1e-3);
  const Vector xT = traj.final_state();
  CHECK((xT.array() - xT.mean()).abs().maxCoeff() < 1e-6);
  CHECK(std::abs(xT.mean() - std::exp(-3.0 / 3.0)) < 1e-8);
}

TEST_CASE("staged plan before the last stage leaves followers free") {
  const Vector xi0 = (Vector(4) << 1.2, 0.8, 0.1, -0.5).finished();
  const auto t = staged_switch_times(xi0);
  const double T = 0.5 * (t[1] + t[2]);
  const StagedPlan sp = full_control_plan(xi0, T);
  const PlanPiece& last = sp.plan.pieces().back();
  CHECK(last.alpha.isApprox(Eigen::Vector4d(0.5, 0.5, 0, 0)));
  const Vector xT = closed_form_piecewise(xi0, sp.plan)(T);
  CHECK(std::abs(xT(0) - xT(1)) < 1e-12);
  // Followers: uncontrolled relative to a mean decaying at rate 1/N.
  const double mean0 = xi0.mean();
  for (Eigen::Index j = 2; j < 4; ++j) {
    const double expected = std::exp(-T) * (xi0(j) + 4.0 / 3.0 * mean0 * std::expm1(0.75 * T));
    CHECK(std::abs(xT(j) - expected) < 1e-12);
  }
}

TEST_CASE("single agent: full control") {
  const StagedPlan sp = full_control_plan(Vector::Constant(1, 0.7), 2.0);
  CHECK(sp.plan.pieces().front().alpha(0) == 1.0);
  CHECK(closed_form_piecewise(Vector::Constant(1, 0.7), sp.plan)(2.0)(0) == doctest::Approx(0.7 * std::exp(-2.0)));
}

TEST_CASE("staged plan is not beaten by random full-strength controls") {
  Rng rng(17);
  for (int inst = 0; inst < 4; ++inst) {
    const Eigen::Index n = 2 + inst % 3;
    const Vector xi0 = sample_initial(n, rng);
    const auto t = staged_switch_times(xi0);
    const double T = t.back() + 0.3 + inst * 0.5;
    const double v = closed_form_value(xi0, full_control_plan(xi0, T).plan);
    for (int s = 0; s < 10000; ++s) {
      const double other = closed_form_value(xi0, random_plan(n, 1.0, T, 4, rng, true));
      if (!(v <= other + 1e-6)) {
        FAIL_CHECK("beaten: " << v << " > " << other);
        break;
      }
    }
  }
}

TEST_CASE("inactivation value at delta = 0 is the staged plan") {
  Rng rng(19);
  for (int k = 0; k < 10; ++k) {
    const Vector xi0 = sample_initial(2 + k % 6, rng);
    const double T = rng.uniform(0.5, 6.0);
    const double simulated = simulate(xi0, full_control_plan(xi0, T).plan, 1e-3).final_value();
    CHECK(std::abs(inactivation_value(xi0, T, 0.0) - simulated) < 1e-6);
  }
}

TEST_CASE("inactivation value matches the simulated inactivation plan") {
  Rng rng(23);
  for (int k = 0; k < 10; ++k) {
    const Vector xi0 = sample_initial(2 + k % 6, rng);
    const double T = rng.uniform(0.5, 6.0);
    const double delta = rng.uniform(0.0, T);
    const ControlPlan plan = inactivation_plan(xi0, T, delta);
    const Trajectory traj = simulate(xi0, plan, 1e-3);
    CHECK(std::abs(inactivation_value(xi0, T, delta) - traj.final_value()) < 1e-8);
    CHECK((inactivation_final_state(xi0, T, delta) - traj.final_state()).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("scan: long horizons need no inactivation") {
  Rng rng(29);
  for (int k = 0; k < 20; ++k) {
    const Vector xi0 = sample_initial(5, rng);
    const double T = staged_switch_times(xi0).back() + 0.1;
    const InactivationScan s = inactivation_scan(xi0, T);
    CHECK_FALSE(is_inactivation(s, T));
    CHECK(s.value <= s.full_value);
  }
}

TEST_CASE("scan: large variance relative to the mean leads to inactivation") {
  const Vector xi0 = (Vector(5) << 2.02, -0.45, -0.47, -0.49, -0.51).finished();
  const InactivationScan s = inactivation_scan(xi0, 3.0);
  CHECK(is_inactivation(s, 3.0));
  CHECK(s.value < s.full_value);
  CHECK(s.full_value == doctest::Approx(inactivation_value(xi0, 3.0, 0.0)));

  // Zero control then full strength; the leading covector changes sign at delta.
  const Trajectory traj = simulate(xi0, inactivation_plan(xi0, 3.0, s.delta), 1e-3);
  const Costate c = integrate_costate_final(traj);
  for (Eigen::Index k = 0; k < traj.samples(); ++k) {
    const double t = traj.t[static_cast<std::size_t>(k)];
    if (t < s.delta) CHECK(traj.alpha.col(k).sum() == 0.0);
    if (t > 0.0 && t < s.delta) CHECK(c.lambda(0, k) < 1e-4);
    if (t > s.delta && t < 3.0) CHECK(c.lambda(0, k) > -1e-4);
  }
}

TEST_CASE("scan rejects a non-positive mean") {
  CHECK_THROWS_AS(inactivation_scan(Eigen::Vector2d(0.5, -0.5), 1.0), NonPositiveMean);
}
