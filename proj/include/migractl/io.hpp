#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "migractl/control_plan.hpp"
#include "migractl/core_model.hpp"
#include "migractl/costate.hpp"
#include "migractl/dynamics.hpp"
#include "migractl/experiments.hpp"
#include "migractl/strategies.hpp"

namespace migractl {

/// printf("%.17g"); enough digits to round-trip any double.
std::string format_double(double x);

// Header: t,xi_1..xi_N,alpha_1..alpha_N,V
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
/// Restores t, xi, alpha and V. The budget is not stored; callers set it.
Trajectory read_trajectory_csv(std::istream& in);

std::string plan_to_json(const ControlPlan& plan, int indent = 2);
ControlPlan plan_from_json(const std::string& text);

/// Either a projected row (`xi_1..xi_N`) or one row per agent with `x_1..x_d`
/// and `v_1..v_d` columns; the header decides.
struct InitialCondition {
  std::optional<Ensemble> ensemble;
  ProjectedState projected;
};
InitialCondition read_initial_csv(std::istream& in, const std::optional<Vector>& target = {});
void write_projected_initial_csv(std::ostream& out, const Vector& xi);

/// One row per (N, T) cell; percentages are in percent.
void write_report_csv(std::ostream& out, const std::vector<ExperimentReport>& cells);
/// Inverse of write_report_csv; per-trial records are left empty.
std::vector<ExperimentReport> read_report_csv(std::istream& in);
/// One row per trial of every cell.
void write_trials_csv(std::ostream& out, const std::vector<ExperimentReport>& cells);
std::string report_to_json(const std::vector<ExperimentReport>& cells, bool include_trials = false, int indent = 2);

std::string regime_to_json(const TwoAgentPlan& plan, int indent = 2);
std::string pmp_report_to_json(const PmpReport& report, CostKind kind, int indent = 2);
std::string oracle_to_json(const OracleResult& result, int indent = 2);

}  // namespace migractl
