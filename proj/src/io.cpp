#include "migractl/io.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "migractl/errors.hpp"

namespace migractl {

using nlohmann::json;

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw FormatError("not a number: '" + s + "'");
  }
  if (used != s.size()) throw FormatError("not a number: '" + s + "'");
  return v;
}

// Header plus data rows; blank lines are skipped.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Table read_table(std::istream& in) {
  Table table;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split_row(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) throw FormatError("row width differs from header width");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c));
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw FormatError("missing CSV header");
  return table;
}

// Columns named `<prefix>1`, `<prefix>2`, ... in order.
std::vector<std::size_t> indexed_columns(const std::vector<std::string>& header, const std::string& prefix) {
  std::vector<std::size_t> cols;
  for (std::size_t k = 1;; ++k) {
    const std::string name = prefix + std::to_string(k);
    std::size_t found = header.size();
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) found = c;
    if (found == header.size()) break;
    cols.push_back(found);
  }
  return cols;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == name) return c;
  throw FormatError("missing column '" + name + "'");
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json optional_number(const std::optional<double>& x) { return x ? number_or_null(*x) : json(nullptr); }

json vector_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

json plan_json(const ControlPlan& plan) {
  json pieces = json::array();
  for (const PlanPiece& p : plan.pieces()) {
    json piece{{"t0", p.t0}, {"t1", p.t1}, {"rule", std::string(to_string(p.rule))}};
    if (!p.is_feedback()) piece["alpha"] = vector_json(p.alpha);
    pieces.push_back(std::move(piece));
  }
  return json{{"budget", plan.budget()}, {"horizon", plan.horizon()}, {"pieces", std::move(pieces)}};
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const Eigen::Index n = traj.agents();
  out << "t";
  for (Eigen::Index i = 1; i <= n; ++i) out << ",xi_" << i;
  for (Eigen::Index i = 1; i <= n; ++i) out << ",alpha_" << i;
  out << ",V\n";
  for (Eigen::Index k = 0; k < traj.samples(); ++k) {
    out << format_double(traj.t[static_cast<std::size_t>(k)]);
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_double(traj.xi(i, k));
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_double(traj.alpha(i, k));
    out << ',' << format_double(traj.V(k)) << '\n';
  }
}

Trajectory read_trajectory_csv(std::istream& in) {
  const Table table = read_table(in);
  const std::size_t tcol = column(table.header, "t");
  const std::size_t vcol = column(table.header, "V");
  const auto xi_cols = indexed_columns(table.header, "xi_");
  const auto alpha_cols = indexed_columns(table.header, "alpha_");
  if (xi_cols.empty() || xi_cols.size() != alpha_cols.size())
    throw FormatError("trajectory needs matching xi_* and alpha_* columns");
  if (table.rows.empty()) throw FormatError("trajectory has no samples");

  const auto n = static_cast<Eigen::Index>(xi_cols.size());
  const auto k = static_cast<Eigen::Index>(table.rows.size());
  Trajectory traj;
  traj.xi.resize(n, k);
  traj.alpha.resize(n, k);
  traj.V.resize(k);
  for (Eigen::Index s = 0; s < k; ++s) {
    const auto& row = table.rows[static_cast<std::size_t>(s)];
    traj.t.push_back(row[tcol]);
    for (Eigen::Index i = 0; i < n; ++i) {
      traj.xi(i, s) = row[xi_cols[static_cast<std::size_t>(i)]];
      traj.alpha(i, s) = row[alpha_cols[static_cast<std::size_t>(i)]];
    }
    traj.V(s) = row[vcol];
  }
  for (std::size_t s = 1; s < traj.t.size(); ++s)
    if (!(traj.t[s] > traj.t[s - 1])) throw FormatError("trajectory times must increase");
  return traj;
}

std::string plan_to_json(const ControlPlan& plan, int indent) { return plan_json(plan).dump(indent); }

ControlPlan plan_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    std::vector<PlanPiece> pieces;
    for (const json& p : j.at("pieces")) {
      PlanPiece piece;
      piece.t0 = p.at("t0").get<double>();
      piece.t1 = p.at("t1").get<double>();
      piece.rule = rule_from_string(p.value("rule", std::string("constant")));
      if (!piece.is_feedback()) {
        const auto values = p.at("alpha").get<std::vector<double>>();
        piece.alpha = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
      }
      pieces.push_back(std::move(piece));
    }
    return ControlPlan(j.at("budget").get<double>(), j.at("horizon").get<double>(), std::move(pieces));
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad plan JSON: ") + e.what());
  }
}

InitialCondition read_initial_csv(std::istream& in, const std::optional<Vector>& target) {
  const Table table = read_table(in);
  if (table.rows.empty()) throw FormatError("initial condition has no rows");

  const auto xi_cols = indexed_columns(table.header, "xi_");
  if (!xi_cols.empty()) {
    if (table.rows.size() != 1) throw FormatError("projected initial condition must be a single row");
    Vector xi(static_cast<Eigen::Index>(xi_cols.size()));
    for (std::size_t i = 0; i < xi_cols.size(); ++i) xi(static_cast<Eigen::Index>(i)) = table.rows[0][xi_cols[i]];
    return {std::nullopt, ProjectedState::from_xi(std::move(xi))};
  }

  const auto x_cols = indexed_columns(table.header, "x_");
  const auto v_cols = indexed_columns(table.header, "v_");
  if (v_cols.empty() || x_cols.size() != v_cols.size())
    throw FormatError("expected xi_* columns or matching x_*/v_* columns");
  const auto d = static_cast<Eigen::Index>(v_cols.size());
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  Matrix x(d, n), v(d, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto& row = table.rows[static_cast<std::size_t>(a)];
    for (Eigen::Index c = 0; c < d; ++c) {
      x(c, a) = row[x_cols[static_cast<std::size_t>(c)]];
      v(c, a) = row[v_cols[static_cast<std::size_t>(c)]];
    }
  }
  const Vector tgt = target ? *target : Vector::Zero(d);
  if (tgt.size() != d) throw FormatError("target dimension differs from the velocity columns");
  Ensemble ensemble(std::move(x), std::move(v), tgt);
  ProjectedState projected = project(ensemble);
  return {std::move(ensemble), std::move(projected)};
}

void write_projected_initial_csv(std::ostream& out, const Vector& xi) {
  for (Eigen::Index i = 0; i < xi.size(); ++i) out << (i ? "," : "") << "xi_" << i + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < xi.size(); ++i) out << (i ? "," : "") << format_double(xi(i));
  out << '\n';
}

namespace {

constexpr const char* kReportHeader =
    "n_agents,horizon,trials,seed,grid,delta_threshold,inactivation_count,inactivation_pct,"
    "inactivation_stderr_pct,mean_rel_improvement_pct,improvement_stderr_pct,"
    "mean_rel_improvement_all_pct,min_rel_improvement_pct";

std::string pct_or_nan(const std::optional<double>& x) { return x ? format_double(100.0 * *x) : "nan"; }

}  // namespace

void write_report_csv(std::ostream& out, const std::vector<ExperimentReport>& cells) {
  out << kReportHeader << '\n';
  for (const ExperimentReport& c : cells) {
    out << c.n_agents << ',' << format_double(c.horizon) << ',' << c.trials << ',' << c.seed << ',' << c.grid << ','
        << format_double(c.delta_threshold) << ',' << c.inactivation_count << ','
        << format_double(100.0 * c.inactivation_fraction) << ',' << format_double(100.0 * c.inactivation_stderr)
        << ',' << pct_or_nan(c.mean_relative_improvement) << ',' << pct_or_nan(c.improvement_stderr) << ','
        << format_double(100.0 * c.mean_relative_improvement_all) << ','
        << format_double(100.0 * c.min_relative_improvement) << '\n';
  }
}

std::vector<ExperimentReport> read_report_csv(std::istream& in) {
  const Table table = read_table(in);
  const auto& h = table.header;
  std::vector<ExperimentReport> cells;
  for (const auto& row : table.rows) {
    auto get = [&](const char* name) { return row[column(h, name)]; };
    auto opt = [&](const char* name) -> std::optional<double> {
      const double v = get(name);
      return std::isnan(v) ? std::nullopt : std::optional<double>(v / 100.0);
    };
    ExperimentReport c;
    c.n_agents = static_cast<int>(get("n_agents"));
    c.horizon = get("horizon");
    c.trials = static_cast<int>(get("trials"));
    c.seed = static_cast<std::uint64_t>(get("seed"));
    c.grid = static_cast<int>(get("grid"));
    c.delta_threshold = get("delta_threshold");
    c.inactivation_count = static_cast<int>(get("inactivation_count"));
    c.inactivation_fraction = get("inactivation_pct") / 100.0;
    c.inactivation_stderr = get("inactivation_stderr_pct") / 100.0;
    c.mean_relative_improvement = opt("mean_rel_improvement_pct");
    c.improvement_stderr = opt("improvement_stderr_pct");
    c.mean_relative_improvement_all = get("mean_rel_improvement_all_pct") / 100.0;
    c.min_relative_improvement = get("min_rel_improvement_pct") / 100.0;
    cells.push_back(std::move(c));
  }
  return cells;
}

void write_trials_csv(std::ostream& out, const std::vector<ExperimentReport>& cells) {
  out << "n_agents,horizon,trial,delta,V_fc,V_delta,R,inactivated\n";
  for (const ExperimentReport& c : cells) {
    for (std::size_t k = 0; k < c.per_trial.size(); ++k) {
      const TrialRecord& r = c.per_trial[k];
      out << c.n_agents << ',' << format_double(c.horizon) << ',' << k << ',' << format_double(r.delta) << ','
          << format_double(r.full_value) << ',' << format_double(r.inactivation_value) << ','
          << format_double(r.ratio) << ',' << (r.inactivated ? 1 : 0) << '\n';
    }
  }
}

std::string report_to_json(const std::vector<ExperimentReport>& cells, bool include_trials, int indent) {
  json arr = json::array();
  for (const ExperimentReport& c : cells) {
    json cell{{"n_agents", c.n_agents},
              {"horizon", c.horizon},
              {"trials", c.trials},
              {"seed", c.seed},
              {"grid", c.grid},
              {"delta_threshold", c.delta_threshold},
              {"inactivation_count", c.inactivation_count},
              {"inactivation_fraction", c.inactivation_fraction},
              {"inactivation_stderr", c.inactivation_stderr},
              {"mean_relative_improvement", optional_number(c.mean_relative_improvement)},
              {"improvement_stderr", optional_number(c.improvement_stderr)},
              {"mean_relative_improvement_all", c.mean_relative_improvement_all},
              {"min_relative_improvement", c.min_relative_improvement}};
    if (include_trials) {
      json trials = json::array();
      for (const TrialRecord& r : c.per_trial)
        trials.push_back({{"delta", r.delta},
                          {"V_fc", r.full_value},
                          {"V_delta", r.inactivation_value},
                          {"R", number_or_null(r.ratio)},
                          {"inactivated", r.inactivated}});
      cell["per_trial"] = std::move(trials);
    }
    arr.push_back(std::move(cell));
  }
  return json{{"cells", std::move(arr)}}.dump(indent);
}

std::string regime_to_json(const TwoAgentPlan& plan, int indent) {
  const TwoAgentRegime& r = plan.regime;
  return json{{"budget", r.budget},
              {"case", std::string(to_string(r.case_id))},
              {"t0", optional_number(r.t0)},
              {"t1", optional_number(r.t1)},
              {"t2", optional_number(r.t2)},
              {"tstar", optional_number(r.tstar)},
              {"plan", plan_json(plan.plan)}}
      .dump(indent);
}

std::string pmp_report_to_json(const PmpReport& report, CostKind kind, int indent) {
  return json{{"cost", std::string(to_string(kind))},
              {"max_violation", report.max_violation},
              {"worst_time", report.worst_time},
              {"worst_sample", report.worst_sample},
              {"samples", report.samples},
              {"tolerance", report.tolerance},
              {"consistent", report.consistent()}}
      .dump(indent);
}

std::string oracle_to_json(const OracleResult& result, int indent) {
  json analytic = json::array();
  for (const OracleCandidate& c : result.analytic) analytic.push_back({{"name", c.name}, {"value", c.value}});
  return json{{"best_value", result.best_value},
              {"best_name", result.best_name},
              {"best_random_value", optional_number(result.best_random_value)},
              {"best_search_value", optional_number(result.best_search_value)},
              {"analytic", std::move(analytic)},
              {"best_plan", plan_json(result.best_plan)}}
      .dump(indent);
}

}  // namespace migractl
