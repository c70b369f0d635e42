#include "migractl/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "migractl/costate.hpp"
#include "migractl/errors.hpp"
#include "migractl/experiments.hpp"
#include "migractl/io.hpp"
#include "migractl/strategies.hpp"

namespace migractl::cli {
namespace {

using nlohmann::json;

// Bad input files and malformed values; mapped to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to `path`, or to `out` when the path is empty or "-".
void emit(const std::string& path, std::ostream& out, const std::string& text) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream file(path);
  if (!file) throw UsageError("cannot write '" + path + "'");
  file << text;
}

Vector parse_vector(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    try {
      values.push_back(std::stod(item, &used));
    } catch (const std::exception&) {
      throw UsageError("bad number '" + item + "'");
    }
    if (used != item.size()) throw UsageError("bad number '" + item + "'");
  }
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

struct InitOptions {
  std::string source = "random";
  int n = 5;
  int dim = 2;
  std::uint64_t seed = 42;
  std::string target;
};

void add_init_options(CLI::App* cmd, InitOptions& init, bool with_dim) {
  cmd->add_option("--init", init.source, "random | file:PATH")->capture_default_str();
  cmd->add_option("--n", init.n, "agents for random initial data")->capture_default_str()->check(CLI::Range(2, 1000000));
  if (with_dim)
    cmd->add_option("--dim", init.dim, "velocity dimension for random initial data")
        ->capture_default_str()
        ->check(CLI::Range(1, 1000000));
  cmd->add_option("--seed", init.seed, "random seed")->capture_default_str();
  cmd->add_option("--target", init.target, "target velocity, comma separated (default 0)");
}

InitialCondition load_init(const InitOptions& init, bool full_random) {
  std::optional<Vector> target;
  if (!init.target.empty()) target = parse_vector(init.target);
  if (init.source.rfind("file:", 0) == 0) {
    std::istringstream in(read_file(init.source.substr(5)));
    return read_initial_csv(in, target);
  }
  if (init.source != "random") throw UsageError("--init must be 'random' or 'file:PATH'");
  if (!full_random) return {std::nullopt, ProjectedState::from_xi(sample_initial(init.n, init.seed))};

  Rng rng(init.seed);
  const Vector tgt = target ? *target : Vector::Zero(init.dim);
  if (tgt.size() != init.dim) throw UsageError("--target dimension differs from --dim");
  Matrix x(init.dim, init.n), v(init.dim, init.n);
  for (int a = 0; a < init.n; ++a)
    for (int c = 0; c < init.dim; ++c) {
      x(c, a) = rng.uniform(-1.0, 1.0);
      v(c, a) = tgt(c) + rng.uniform(-1.0, 1.0);
    }
  Ensemble ensemble(std::move(x), std::move(v), tgt);
  ProjectedState projected = project(ensemble);
  return {std::move(ensemble), std::move(projected)};
}

// Strategies are built in descending order of xi; map constant pieces back.
ControlPlan to_agent_order(const ControlPlan& sorted, const Permutation& perm) {
  std::vector<PlanPiece> pieces = sorted.pieces();
  for (PlanPiece& p : pieces)
    if (!p.is_feedback()) p.alpha = unpermute(p.alpha, perm);
  return ControlPlan(sorted.budget(), sorted.horizon(), std::move(pieces));
}

Vector sorted_xi(const ProjectedState& state, Permutation* perm = nullptr) {
  Permutation order = descending_order(state.xi);
  Vector xi(state.xi.size());
  for (std::size_t k = 0; k < order.size(); ++k) xi(static_cast<Eigen::Index>(k)) = state.xi(order[k]);
  if (perm) *perm = std::move(order);
  return xi;
}

ControlPlan build_strategy(const std::string& strategy, const ProjectedState& state, double budget, double horizon,
                           int grid) {
  const Eigen::Index n = state.xi.size();
  if (strategy.rfind("plan:", 0) == 0) {
    ControlPlan plan = plan_from_json(read_file(strategy.substr(5)));
    for (const PlanPiece& p : plan.pieces())
      if (!p.is_feedback() && p.alpha.size() != n) throw UsageError("plan size differs from the ensemble size");
    return plan;
  }
  if (strategy == "zero") return ControlPlan::constant(budget, horizon, Vector::Zero(n));
  if (strategy == "instant") return std::move(PlanBuilder(budget, horizon).feedback(horizon, Rule::instantaneous)).build();
  if (strategy == "integral") {
    if (budget < 1.0) throw BudgetOutOfRange("the integral-cost rule needs a budget of at least 1");
    return std::move(PlanBuilder(budget, horizon).feedback(horizon, Rule::integral_argmax)).build();
  }
  Permutation perm;
  const Vector xi = sorted_xi(state, &perm);
  if (strategy == "full") return to_agent_order(full_control_plan(xi, horizon, std::min(budget, 1.0)).plan, perm);
  if (strategy == "inactivation") {
    if (budget < 1.0) throw BudgetOutOfRange("the inactivation strategy needs a budget of at least 1");
    const InactivationScan scan = inactivation_scan(xi, horizon, grid);
    return to_agent_order(inactivation_plan(xi, horizon, scan.delta), perm);
  }
  throw UsageError("unknown strategy '" + strategy + "'");
}

std::vector<int> parse_ints(const std::string& text) {
  std::vector<int> values;
  for (const double v : parse_vector(text)) {
    if (v != std::floor(v) || v < 2) throw UsageError("agent counts must be integers >= 2");
    values.push_back(static_cast<int>(v));
  }
  return values;
}

std::vector<double> parse_reals(const std::string& text) {
  const Vector v = parse_vector(text);
  return {v.data(), v.data() + v.size()};
}

std::string with_newline(std::string s) { return s + "\n"; }

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optimal migration control of alignment ensembles", "migractl"};
  app.require_subcommand(1);

  // simulate
  InitOptions sim_init;
  double sim_budget = 1.0, sim_horizon = 5.0, sim_dt = kDefaultStep;
  std::string sim_strategy = "full", sim_out;
  int sim_grid = kDefaultScanGrid;
  auto* sim = app.add_subcommand("simulate", "integrate a strategy and write the trajectory CSV");
  add_init_options(sim, sim_init, true);
  sim->add_option("--m", sim_budget, "control budget")->capture_default_str();
  sim->add_option("--horizon", sim_horizon, "final time T")->capture_default_str();
  sim->add_option("--dt", sim_dt, "RK4 step")->capture_default_str();
  sim->add_option("--strategy", sim_strategy, "zero | instant | full | inactivation | integral | plan:FILE")
      ->capture_default_str();
  sim->add_option("--grid", sim_grid, "inactivation scan grid")->capture_default_str();
  sim->add_option("--out", sim_out, "output CSV (default stdout)");

  // plan2
  double p2_xi1 = 0.0, p2_xi2 = 0.0, p2_budget = 1.0, p2_horizon = 1.0;
  auto* plan2 = app.add_subcommand("plan2", "two-agent regime and optimal plan");
  plan2->add_option("--xi1", p2_xi1)->required();
  plan2->add_option("--xi2", p2_xi2)->required();
  plan2->add_option("--m", p2_budget)->capture_default_str();
  plan2->add_option("--horizon", p2_horizon)->required();

  // stages
  InitOptions st_init;
  double st_budget = 1.0;
  std::optional<double> st_horizon;
  auto* stages = app.add_subcommand("stages", "switch times of the staged full-control plan");
  add_init_options(stages, st_init, false);
  stages->add_option("--m", st_budget, "control budget, at most 1")->capture_default_str();
  stages->add_option("--horizon", st_horizon, "also emit the plan on [0, T]");

  // scan-delta
  InitOptions sc_init;
  double sc_horizon = 5.0;
  int sc_grid = kDefaultScanGrid;
  auto* scan = app.add_subcommand("scan-delta", "optimal inactivation time");
  add_init_options(scan, sc_init, false);
  scan->add_option("--horizon", sc_horizon)->capture_default_str();
  scan->add_option("--grid", sc_grid)->capture_default_str()->check(CLI::Range(1, 100000000));

  // pmp-check
  std::string pmp_traj, pmp_cost = "final";
  std::optional<double> pmp_budget;
  double pmp_tol = 1e-6;
  auto* pmp = app.add_subcommand("pmp-check", "costate consistency of a stored trajectory");
  pmp->add_option("--traj", pmp_traj, "trajectory CSV")->required();
  pmp->add_option("--cost", pmp_cost, "final | integral")->capture_default_str();
  pmp->add_option("--m", pmp_budget, "control budget (default: largest applied total, at least 1)");
  pmp->add_option("--tol", pmp_tol)->capture_default_str();

  // table1 / table2
  struct TableArgs {
    std::string agents = "5,10,20,50", horizons = "3,4,5,6,7", out, json_out, trials_out;
    int trials = 1000, grid = kDefaultScanGrid;
    std::uint64_t seed = 42;
    unsigned threads = 0;
  };
  TableArgs t1, t2;
  auto add_table = [&](const char* name, const char* help, TableArgs& a) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->add_option("--agents", a.agents)->capture_default_str();
    cmd->add_option("--horizons", a.horizons)->capture_default_str();
    cmd->add_option("--trials", a.trials)->capture_default_str()->check(CLI::Range(1, 100000000));
    cmd->add_option("--seed", a.seed)->capture_default_str();
    cmd->add_option("--grid", a.grid)->capture_default_str()->check(CLI::Range(1, 100000000));
    cmd->add_option("--threads", a.threads, "workers (0: MIGRACTL_THREADS or all cores)")->capture_default_str();
    cmd->add_option("--out", a.out, "cell CSV (default stdout)");
    cmd->add_option("--json", a.json_out, "cell JSON with metadata");
    cmd->add_option("--trials-out", a.trials_out, "per-trial CSV");
    return cmd;
  };
  auto* table1 = add_table("table1", "inactivation frequency per (N, T)", t1);
  auto* table2 = add_table("table2", "relative improvement of inactivation per (N, T)", t2);

  // ratio
  int r_n = 5, r_trials = 1000, r_grid = kDefaultScanGrid;
  double r_horizon = 3.0;
  std::uint64_t r_seed = 42;
  unsigned r_threads = 0;
  std::string r_out;
  auto* ratio = app.add_subcommand("ratio", "per-trial (R, delta) pairs");
  ratio->add_option("--n", r_n)->capture_default_str()->check(CLI::Range(2, 1000000));
  ratio->add_option("--horizon", r_horizon)->capture_default_str();
  ratio->add_option("--trials", r_trials)->capture_default_str()->check(CLI::Range(1, 100000000));
  ratio->add_option("--seed", r_seed)->capture_default_str();
  ratio->add_option("--grid", r_grid)->capture_default_str()->check(CLI::Range(1, 100000000));
  ratio->add_option("--threads", r_threads)->capture_default_str();
  ratio->add_option("--out", r_out);

  // oracle
  InitOptions or_init;
  double or_budget = 1.0, or_horizon = 3.0, or_dt = kDefaultStep;
  int or_pieces = 6, or_samples = 10000;
  std::uint64_t or_seed = 42;
  auto* oracle = app.add_subcommand("oracle", "best final value over random piecewise-constant controls");
  add_init_options(oracle, or_init, false);
  oracle->add_option("--m", or_budget)->capture_default_str();
  oracle->add_option("--horizon", or_horizon)->capture_default_str();
  oracle->add_option("--pieces", or_pieces)->capture_default_str()->check(CLI::Range(1, 64));
  oracle->add_option("--samples", or_samples)->capture_default_str()->check(CLI::Range(0, 1000000000));
  oracle->add_option("--oracle-seed", or_seed, "seed of the random controls")->capture_default_str();
  oracle->add_option("--dt", or_dt, "step for feedback candidates")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) {
      if (!(sim_dt > 0.0) || !(sim_horizon > 0.0)) throw UsageError("--dt and --horizon must be positive");
      const InitialCondition init = load_init(sim_init, true);
      const ControlPlan plan = build_strategy(sim_strategy, init.projected, sim_budget, sim_horizon, sim_grid);
      const Trajectory traj = init.ensemble ? simulate_full(*init.ensemble, plan, sim_dt)
                                            : simulate(init.projected, plan, SimulationOptions{sim_dt});
      std::ostringstream csv;
      write_trajectory_csv(csv, traj);
      emit(sim_out, out, csv.str());
    } else if (*plan2) {
      out << with_newline(regime_to_json(two_agent_plan(Eigen::Vector2d(p2_xi1, p2_xi2), p2_budget, p2_horizon)));
    } else if (*stages) {
      const Vector xi = sorted_xi(load_init(st_init, false).projected);
      if (!(st_budget > 0.0) || st_budget > 1.0) throw BudgetOutOfRange("--m must lie in (0, 1]");
      json j{{"budget", st_budget}, {"switch_times", staged_switch_times(xi, st_budget)}};
      if (st_horizon) j["plan"] = json::parse(plan_to_json(full_control_plan(xi, *st_horizon, st_budget).plan));
      out << j.dump(2) << '\n';
    } else if (*scan) {
      const Vector xi = sorted_xi(load_init(sc_init, false).projected);
      const InactivationScan s = inactivation_scan(xi, sc_horizon, sc_grid);
      out << json{{"delta", s.delta},
                  {"V_delta", s.value},
                  {"V_fc", s.full_value},
                  {"inactivation", is_inactivation(s, sc_horizon)},
                  {"horizon", sc_horizon},
                  {"grid", sc_grid}}
                 .dump(2)
          << '\n';
    } else if (*pmp) {
      std::istringstream in(read_file(pmp_traj));
      Trajectory traj = read_trajectory_csv(in);
      if (pmp_budget) {
        traj.budget = *pmp_budget;
      } else {
        traj.budget = std::max(1.0, traj.alpha.colwise().sum().maxCoeff());
      }
      const CostKind kind = cost_kind_from_string(pmp_cost);
      const Costate costate = integrate_costate(traj, kind);
      out << with_newline(pmp_report_to_json(check_pmp_consistency(traj, costate, pmp_tol), kind));
    } else if (*table1 || *table2) {
      const TableArgs& a = *table1 ? t1 : t2;
      ExperimentConfig config;
      config.agents = parse_ints(a.agents);
      config.horizons = parse_reals(a.horizons);
      config.trials = a.trials;
      config.seed = a.seed;
      config.grid = a.grid;
      if (a.threads > 0) config.threads = a.threads;
      const auto cells = *table1 ? table1_experiment(config) : table2_experiment(config);
      std::ostringstream csv;
      write_report_csv(csv, cells);
      emit(a.out, out, csv.str());
      if (!a.json_out.empty()) emit(a.json_out, out, with_newline(report_to_json(cells, false)));
      if (!a.trials_out.empty()) {
        std::ostringstream trials;
        write_trials_csv(trials, cells);
        emit(a.trials_out, out, trials.str());
      }
    } else if (*ratio) {
      const auto samples =
          ratio_study(r_n, r_horizon, r_trials, r_seed, r_grid, r_threads > 0 ? std::optional(r_threads) : std::nullopt);
      std::ostringstream csv;
      csv << "trial,R,delta\n";
      for (std::size_t k = 0; k < samples.size(); ++k)
        csv << k << ',' << format_double(samples[k].ratio) << ',' << format_double(samples[k].delta) << '\n';
      emit(r_out, out, csv.str());
    } else if (*oracle) {
      const Vector xi = load_init(or_init, false).projected.xi;
      out << with_newline(oracle_to_json(brute_force_oracle(xi, or_budget, or_horizon, or_pieces, or_samples, or_seed, or_dt)));
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    err << e.name() << ": " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << e.name() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace migractl::cli
