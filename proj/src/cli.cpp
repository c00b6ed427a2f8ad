#include "diverge/cli.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "diverge/atomic_file.hpp"
#include "diverge/calibration.hpp"
#include "diverge/equilibrium.hpp"
#include "diverge/io.hpp"
#include "diverge/social.hpp"
#include "diverge/stackelberg.hpp"

namespace diverge::cli {

namespace {

const char* yes_no(bool b) { return b ? "yes" : "no"; }

std::string flow_text(const FlowVector& x) {
  return "(" + format_number(x.xs(Exit::One)) + ", " + format_number(x.xb(Exit::One)) + ", " +
         format_number(x.xs(Exit::Two)) + ", " + format_number(x.xb(Exit::Two)) + ")";
}

void write_output(const std::string& path, const std::string& content) {
  try {
    write_file_atomic(path, content);
  } catch (const std::runtime_error& e) {
    throw IoError(e.what());
  }
}

void require_no_offsets(const Scenario& s, const char* command) {
  if (!s.offsets.is_zero())
    throw ValidationError(std::string(command) + " does not accept scenario offsets");
}

struct EqArgs {
  std::string scenario;
  bool oracle = false;
  double oracle_step = 1e-3;
  std::string out;
};

int run_eq(const EqArgs& a, std::ostream& out) {
  const Scenario s = load_scenario(a.scenario);
  const EquilibriumResult eq = solve_equilibrium(s.demand, s.costs, s.offsets, s.solver);
  const UniquenessReport u = check_uniqueness_conditions(s.costs);
  const auto& k = eq.costs;

  out << "x = " << flow_text(eq.flow) << "\n";
  out << "costs: j1s=" << format_number(k.steadfast[0]) << " j1b=" << format_number(k.bypass[0])
      << " j2s=" << format_number(k.steadfast[1]) << " j2b=" << format_number(k.bypass[1]) << "\n";
  out << "residual: " << format_number(eq.residual) << "\n";
  out << "iterations: " << eq.iterations << "\n";
  out << "converged: " << yes_no(eq.converged) << "\n";
  out << "unique_certified: " << yes_no(eq.unique_certified) << " (ct>=cc: "
      << yes_no(u.ct_ge_cc[0]) << "/" << yes_no(u.ct_ge_cc[1]) << ", detour margin: "
      << yes_no(u.gamma_margin[0]) << "/" << yes_no(u.gamma_margin[1]) << ")\n";

  if (a.oracle) {
    const OracleResult o = grid_oracle(s.demand, s.costs, s.offsets, a.oracle_step);
    double diff = 0.0;
    if (!o.candidates.empty()) {
      diff = INFINITY;
      for (const auto& c : o.candidates) {
        double d = 0.0;
        const auto p = c.as_array(), q = eq.flow.as_array();
        for (int i = 0; i < 4; ++i) d = std::max(d, std::abs(p[i] - q[i]));
        diff = std::min(diff, d);
      }
    }
    out << "oracle: clusters=" << o.candidates.size() << " survivors=" << o.survivors;
    switch (o.status) {
      case OracleStatus::Found:
        out << " nearest=" << format_number(diff) << " agree=" << yes_no(diff <= 2.0 * a.oracle_step);
        break;
      case OracleStatus::EmptyMisconfigured:
        out << " status=empty (threshold too tight for the grid step)";
        break;
      case OracleStatus::EmptyUncertified:
        out << " status=empty (uniqueness conditions fail)";
        break;
    }
    out << "\n";
  }

  if (!a.out.empty()) write_output(a.out, equilibrium_csv_header() + equilibrium_csv_row(s.demand, eq));
  return eq.converged ? kOk : kNotConverged;
}

struct CalibrateArgs {
  std::string data;
  bool symmetric = false;
  std::string export_milp;
  std::string out;
  CalibOptions opts;
};

int run_calibrate(CalibrateArgs a, std::ostream& out, std::ostream& err) {
  const ObservationSet obs = parse_observations_csv(read_file(a.data));
  a.opts.symmetric = a.symmetric;
  if (!a.export_milp.empty()) {
    try {
      const MilpSummary m = export_milp(obs, a.opts, a.export_milp);
      out << "milp: binaries=" << m.binaries << " big_m_rows=" << m.big_m_rows << " -> "
          << a.export_milp << "\n";
    } catch (const std::runtime_error& e) {
      if (dynamic_cast<const ValidationError*>(&e) == nullptr) throw IoError(e.what());
      throw;
    }
  }
  const CalibrationResult r = calibrate(obs, a.opts);
  const auto& c = r.params;
  out << "observations: " << obs.size() << "\n";
  out << "violations: " << r.violations << " of " << r.per_constraint.size() << "\n";
  out << "hinge: " << format_number(r.hinge) << "\n";
  for (Exit e : kExits) {
    out << "exit" << number(e) << ": ct=" << format_number(c[e].ct) << " cc=" << format_number(c[e].cc)
        << " gamma=" << format_number(c[e].gamma) << "\n";
  }
  for (const auto& d : r.diagnostics) err << "calibrate: " << d << "\n";
  write_output(a.out, calibration_json(r));
  return kOk;
}

struct SocialArgs {
  std::string scenario;
  double grid = 1e-3;
  int f1_points = 0;
  std::string out;
};

int run_social(const SocialArgs& a, std::ostream& out) {
  const Scenario s = load_scenario(a.scenario);
  require_no_offsets(s, "social");
  const SocialResult r = minimize_social_cost(s.demand, s.costs, a.grid, s.solver);
  out << "optimum x = " << flow_text(r.flow) << "\n";
  out << "optimum cost: " << format_number(r.cost) << "\n";
  out << "equilibrium x = " << flow_text(r.equilibrium_flow) << "\n";
  out << "equilibrium cost: " << format_number(r.equilibrium_cost) << "\n";
  out << "ratio: " << format_number(r.ratio) << "\n";

  if (!a.out.empty()) {
    std::string csv = social_csv_header();
    if (a.f1_points >= 2) {
      for (int k = 0; k < a.f1_points; ++k) {
        const double f1 = static_cast<double>(k) / (a.f1_points - 1);
        const DemandConfig d = DemandConfig::from_f1(f1, s.demand.total);
        csv += social_csv_row(f1, minimize_social_cost(d, s.costs, a.grid, s.solver));
      }
    } else {
      csv += social_csv_row(s.demand.f1, r);
    }
    write_output(a.out, csv);
  }
  return kOk;
}

struct SweepArgs {
  std::string scenario;
  double alpha = 0.0;
  int steps = 101;
  std::string out;
};

int run_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  const Scenario s = load_scenario(a.scenario);
  require_no_offsets(s, "sweep");
  const auto rows = sweep_beta(s.demand, s.costs, a.alpha, a.steps, s.solver);
  const BetaOptimum best = optimal_beta(rows, s.demand, s.costs, a.alpha, s.solver);
  const auto threshold = bypass_threshold(rows);
  const auto failed = std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return !r.converged; });

  out << "alpha: " << format_number(a.alpha) << "\n";
  out << "bypass_threshold: " << (threshold ? format_number(*threshold) : std::string("none")) << "\n";
  out << "optimal_beta: " << format_number(best.beta) << "\n";
  out << "optimal_cost: " << format_number(best.cost) << "\n";
  out << "endpoint_costs: beta=0 " << format_number(rows.front().social_cost) << ", beta=1 "
      << format_number(rows.back().social_cost) << "\n";
  write_output(a.out, sweep_csv(rows));
  if (failed > 0) {
    err << "sweep: " << failed << " rows did not converge\n";
    return kNotConverged;
  }
  return kOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lane choice at a two-exit traffic diverge", "diverge"};
  app.require_subcommand(1);

  EqArgs eq;
  auto* eq_cmd = app.add_subcommand("eq", "Solve the Wardrop equilibrium of a scenario");
  eq_cmd->add_option("--scenario", eq.scenario, "Scenario JSON file")->required();
  eq_cmd->add_flag("--oracle", eq.oracle, "Cross-check with the brute-force grid oracle");
  eq_cmd->add_option("--oracle-step", eq.oracle_step, "Oracle grid step")->check(CLI::Range(1e-6, 1e-2));
  eq_cmd->add_option("--out", eq.out, "Equilibrium CSV output");

  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Fit cost coefficients to observed flows");
  cal_cmd->add_option("--data", cal.data, "Observation CSV")->required();
  cal_cmd->add_flag("--symmetric", cal.symmetric, "Tie exit 1 and exit 2 coefficients");
  cal_cmd->add_option("--export-milp", cal.export_milp, "Write the big-M MILP in LP format");
  cal_cmd->add_option("--out", cal.out, "Fitted scenario fragment (JSON)")->required();
  cal_cmd->add_option("--eps", cal.opts.eps, "Strictness margin");
  cal_cmd->add_option("--big-m", cal.opts.big_m, "Big-M constant for the export");
  cal_cmd->add_option("--starts", cal.opts.starts, "Multi-start count");
  cal_cmd->add_option("--iters", cal.opts.max_iters, "Pattern-search polls per start");
  cal_cmd->add_option("--seed", cal.opts.seed, "Seed for polling directions");

  SocialArgs soc;
  auto* soc_cmd = app.add_subcommand("social", "Social optimum versus equilibrium");
  soc_cmd->add_option("--scenario", soc.scenario, "Scenario JSON file")->required();
  soc_cmd->add_option("--grid", soc.grid, "Grid step of the global scan")->check(CLI::Range(1e-5, 1e-2));
  soc_cmd->add_option("--f1-points", soc.f1_points,
                      "Also sweep f1 over this many evenly spaced values in [0, 1] (CSV only)");
  soc_cmd->add_option("--out", soc.out, "Social CSV output");

  SweepArgs sw;
  auto* sw_cmd = app.add_subcommand("sweep", "Sweep the commanded steadfast share beta");
  sw_cmd->add_option("--scenario", sw.scenario, "Scenario JSON file")->required();
  sw_cmd->add_option("--alpha", sw.alpha, "Autonomous share of exit-1 demand")->required()->check(CLI::Range(0.0, 1.0));
  sw_cmd->add_option("--steps", sw.steps, "Number of beta values")->check(CLI::Range(2, 1000000));
  sw_cmd->add_option("--out", sw.out, "Sweep CSV output")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (*eq_cmd) return run_eq(eq, out);
    if (*cal_cmd) return run_calibrate(cal, out, err);
    if (*soc_cmd) return run_social(soc, out);
    if (*sw_cmd) return run_sweep(sw, out, err);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace diverge::cli
