// Acceptance suite: one PASS/FAIL line per check, nonzero exit if any fail.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "diverge/calibration.hpp"
#include "diverge/cli.hpp"
#include "diverge/io.hpp"
#include "diverge/social.hpp"
#include "diverge/stackelberg.hpp"
#include "support/fixtures.hpp"
#include "support/lp_reader.hpp"

using namespace diverge;

namespace {

int failures = 0;

void report(const std::string& id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("%s  %-4s %s [%s]\n", ok ? "PASS" : "FAIL", id.c_str(), what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds(const std::function<void()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const CostParams kPaper = fixtures::paper_costs();

void analytic_equilibria() {
  struct Case {
    DemandConfig d;
    FlowVector expected;
  };
  const double r = fixtures::smaller_root(-4.7, 2.7);
  const Case cases[] = {{DemandConfig::make(0.5, 0.5), FlowVector::of(0.5, 0.0, 0.5, 0.0)},
                        {DemandConfig::make(1.0, 0.0), FlowVector::of(r, 1.0 - r, 0.0, 0.0)}};
  for (const auto& c : cases) {
    EquilibriumResult eq;
    double best = 1e9;
    for (int k = 0; k < 20; ++k) best = std::min(best, seconds([&] { eq = solve_equilibrium(c.d, kPaper); }));
    const double diff = fixtures::max_abs_diff(eq.flow, c.expected);
    report("1", diff <= 1e-6 && best < 1e-3, "analytic equilibrium at f1=" + format_number(c.d.f1),
           "max diff " + fmt("%.2e", diff) + ", " + fmt("%.3f", best * 1e3) + " ms");
  }
}

void oracle_equivalence() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int single = 0, agree = 0;
  double worst_diff = 0.0, worst_res = 0.0;
  const double t = seconds([&] {
    for (int n = 0; n < 100; ++n) {
      const auto c = fixtures::random_certified(rng);
      const auto d = DemandConfig::from_f1(u(rng));
      const auto eq = solve_equilibrium(d, c);
      const auto o = grid_oracle(d, c, {}, 1e-3);
      worst_res = std::max(worst_res, eq.residual);
      if (o.candidates.size() == 1) {
        ++single;
        const double diff = fixtures::max_abs_diff(o.candidates.front(), eq.flow);
        worst_diff = std::max(worst_diff, diff);
        agree += diff <= 2e-3;
      }
    }
  });
  report("2", single == 100 && agree == 100 && worst_res <= 1e-8 && t < 30.0,
         "oracle finds one cluster agreeing with the solver (100 instances)",
         std::to_string(single) + " single, " + std::to_string(agree) + " agree, max diff " +
             fmt("%.2e", worst_diff) + ", max residual " + fmt("%.1e", worst_res) + ", " + fmt("%.1f", t) + " s");
}

void slope_bounds() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double lo = 1e9, hi = -1e9;
  int samples = 0;
  for (int n = 0; n < 100; ++n) {
    const auto c = fixtures::random_certified(rng);
    const auto d = DemandConfig::from_f1(0.05 + 0.9 * u(rng));
    for (Exit i : kExits) {
      const double rj = i == Exit::One ? d.f2 : d.f1;
      for (int k = 0; k < 20; ++k) {
        const double h = 1e-6;
        const double y = h + (rj - 2 * h) * u(rng);
        const auto a = best_response(i, y - h, d, c), b = best_response(i, y + h, d, c);
        if (a.which != ResponseCase::Interior || b.which != ResponseCase::Interior) continue;
        const double s = (b.steadfast - a.steadfast) / (2 * h);
        lo = std::min(lo, s);
        hi = std::max(hi, s);
        ++samples;
      }
    }
  }
  report("3", samples > 0 && lo >= -1e-8 && hi <= 1.0 + 1e-8, "best-response slopes within [0, 1]",
         std::to_string(samples) + " samples, range [" + fmt("%.6f", lo) + ", " + fmt("%.6f", hi) + "]");
}

void low_demand() {
  double worst = 0.0;
  for (double f1 : {0.1, 0.2, 0.3, 0.4, 0.5})
    worst = std::max(worst, solve_equilibrium(DemandConfig::from_f1(f1), kPaper).flow.xb(Exit::One));
  report("4", worst <= 1e-6, "no exit-1 bypass for f1 <= 0.5", "max x1b " + fmt("%.2e", worst));
}

void calibration_round_trip() {
  const auto obs = fixtures::synthetic_observations(kPaper);
  CalibrationResult r;
  const double t = seconds([&] { r = calibrate(obs); });
  double diff = 0.0;
  for (const auto& o : obs) diff = std::max(diff, fixtures::max_abs_diff(solve_equilibrium(o.demand(), r.params).flow, o.flow));
  std::ostringstream fit;
  fit << "C1=(" << format_number(r.params.exits[0].ct) << "," << format_number(r.params.exits[0].cc) << ","
      << format_number(r.params.exits[0].gamma) << ") C2=(" << format_number(r.params.exits[1].ct) << ","
      << format_number(r.params.exits[1].cc) << "," << format_number(r.params.exits[1].gamma) << ")";
  report("5", r.violations == 0 && diff <= 5e-3 && t < 60.0, "calibration round trip",
         std::to_string(r.violations) + " violations, max flow diff " + fmt("%.2e", diff) + ", " + fit.str() +
             ", " + fmt("%.2f", t) + " s");
}

void milp_consistency() {
  const auto obs = fixtures::synthetic_observations(kPaper);
  CalibOptions o;
  o.eps = 1e-6;
  o.big_m = 1e6;
  std::ostringstream lp_text;
  write_milp(lp_text, obs, o);
  const auto model = lp::read(lp_text.str());
  const auto v = violation_count(kPaper, obs, o.eps);
  std::map<std::string, double> point = {{"ct1", 1.0}, {"ct2", 1.0}, {"cc1", 1.0},
                                         {"cc2", 1.0}, {"D1", 2.7},  {"D2", 2.7}};
  for (std::size_t n = 0; n < v.per_constraint.size(); ++n) {
    point["z_" + std::string(n % 2 == 0 ? "s" : "b") + "_" + std::to_string(n / 4 + 1) + "_" +
          std::to_string(static_cast<int>(n % 4) / 2 + 1)] = v.per_constraint[n] > o.eps ? 1.0 : 0.0;
  }
  int big_m = 0, held = 0;
  for (const auto& row : model.rows) {
    if (row.name.rfind("on_", 0) != 0 && row.name.rfind("off_", 0) != 0) continue;
    ++big_m;
    held += row.satisfied(point, 0.0);
  }
  report("6", big_m == 160 && held == big_m, "exported big-M rows hold at the truth",
         std::to_string(held) + "/" + std::to_string(big_m) + " rows satisfied");
}

void social_dominance() {
  int ok = 0, total = 0;
  double worst = -1e9;
  for (int k = 1; k <= 19; ++k) {
    const auto r = minimize_social_cost(DemandConfig::from_f1(0.05 * k), kPaper, 1e-3);
    worst = std::max(worst, r.cost - r.equilibrium_cost);
    ok += r.cost <= r.equilibrium_cost + 1e-9;
    ++total;
  }
  report("7", ok == total, "social optimum never above the equilibrium cost",
         std::to_string(ok) + "/" + std::to_string(total) + ", max (opt - eq) " + fmt("%.2e", worst));
  const auto r = minimize_social_cost(DemandConfig::make(0.65, 0.35), kPaper, 1e-3);
  report("7", r.flow.xb(Exit::One) < 0.095378, "optimal bypass below the equilibrium at F={0.65,0.35}",
         "optimal x1b " + format_number(r.flow.xb(Exit::One)) + " vs equilibrium 0.095378");
  bool any = false;
  for (double f1 : {0.55, 0.65, 0.75, 0.85, 0.95})
    any = any || minimize_social_cost(DemandConfig::from_f1(f1), kPaper, 1e-3).flow.xb(Exit::One) > 1e-4;
  report("7", any, "some optimum keeps bypass traffic (f1 in 0.55..0.95)", any ? "found" : "none");
}

void stackelberg() {
  const auto d = DemandConfig::make(0.65, 0.35);
  struct Case {
    double alpha, threshold, beta_lo, beta_hi;
  };
  for (const Case& c : {Case{0.25, 0.4, 0.45, 0.75}, Case{0.5, 0.7, 0.7, 1.0}}) {
    std::vector<SweepRow> rows;
    BetaOptimum best;
    const double t = seconds([&] {
      rows = sweep_beta(d, kPaper, c.alpha, 101);
      best = optimal_beta(rows, d, kPaper, c.alpha);
    });
    const std::string a = "alpha=" + format_number(c.alpha);
    const auto th = bypass_threshold(rows);
    report("8", th && std::abs(*th - c.threshold) <= 0.1 && t < 10.0, a + " bypass threshold near " + format_number(c.threshold),
           "threshold " + (th ? format_number(*th) : std::string("none")) + ", " + fmt("%.2f", t) + " s");
    report("8", best.beta >= c.beta_lo && best.beta <= c.beta_hi,
           a + " optimal beta in [" + format_number(c.beta_lo) + ", " + format_number(c.beta_hi) + "]",
           "beta* " + format_number(best.beta));
    const double j0 = rows.front().social_cost, j1 = rows.back().social_cost;
    report("8", best.cost < j0 && best.cost < j1, a + " optimum strictly better than both endpoints",
           "J(beta*) " + fmt("%.12g", best.cost) + ", J(0) " + fmt("%.12g", j0) + ", J(1) " + fmt("%.12g", j1));
  }
}

void invariants() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  int mono_bad = 0;
  for (int n = 0; n < 1000; ++n) {
    const auto c = fixtures::random_any(rng);
    std::array<double, 4> lo{}, hi{};
    for (int k = 0; k < 4; ++k) {
      lo[k] = u(rng);
      hi[k] = lo[k] + u(rng);
    }
    OccupancyOffsets off;
    off.steadfast = {0.1 * u(rng), 0.1 * u(rng)};
    off.bypass = {0.1 * u(rng), 0.1 * u(rng)};
    const auto x = FlowVector::from_array(lo), y = FlowVector::from_array(hi);
    for (Exit i : kExits) {
      mono_bad += steadfast_cost(i, x, kPaper, off) > steadfast_cost(i, y, kPaper, off);
      mono_bad += bypass_cost(i, x, c, off) > bypass_cost(i, y, c, off);
      mono_bad += steadfast_cost(i, x, c, off) > steadfast_cost(i, y, c, off);
    }
  }
  report("9", mono_bad == 0, "elementwise monotonicity (1000 pairs)", std::to_string(mono_bad) + " violations");

  double scale_diff = 0.0;
  for (int n = 0; n < 50; ++n) {
    const auto c = fixtures::random_certified(rng);
    const auto d = DemandConfig::from_f1(u(rng));
    const auto base = solve_equilibrium(d, c).flow;
    for (double lambda : {0.5, 3.0, 10.0})
      scale_diff = std::max(scale_diff, fixtures::max_abs_diff(solve_equilibrium(d, c.scaled(lambda)).flow, base));
  }
  report("9", scale_diff <= 1e-9, "equilibria invariant under coefficient scaling",
         "max diff " + fmt("%.2e", scale_diff));

  bool identical = true;
  for (double f1 : {0.2, 0.65, 0.9}) {
    const auto d = DemandConfig::from_f1(f1);
    const auto base = solve_equilibrium(d, kPaper);
    const auto ind = induced_equilibrium(d, kPaper, command_plan(0.0, 0.5, d));
    identical = identical && base.flow.as_array() == ind.flow.as_array() && base.residual == ind.residual;
  }
  report("9", identical, "zero command reproduces the base equilibrium bitwise", identical ? "identical" : "differs");

  double worst = 0.0;
  const double h = 1e-6;
  for (int n = 0; n < 200; ++n) {
    const auto c = fixtures::random_any(rng);
    const std::array<double, 4> b{0.1 + u(rng), 0.1 + u(rng), 0.1 + u(rng), 0.1 + u(rng)};
    const auto g = social_cost_gradient(FlowVector::from_array(b), c);
    for (int k = 0; k < 4; ++k) {
      auto up = b, dn = b;
      up[k] += h;
      dn[k] -= h;
      const auto xu = FlowVector::from_array(up), xd = FlowVector::from_array(dn);
      const double fd = (social_cost(xu, c) - social_cost(xd, c)) / (2 * h);
      worst = std::max(worst, std::abs(fd - g[k]) / std::max(1.0, std::abs(g[k])));
      for (Exit i : kExits) {
        const auto p = cost_partials(i, FlowVector::from_array(b), c);
        const double fs = (steadfast_cost(i, xu, c) - steadfast_cost(i, xd, c)) / (2 * h);
        const double fb = (bypass_cost(i, xu, c) - bypass_cost(i, xd, c)) / (2 * h);
        worst = std::max(worst, std::abs(fs - p.steadfast[k]) / std::max(1.0, std::abs(p.steadfast[k])));
        worst = std::max(worst, std::abs(fb - p.bypass[k]) / std::max(1.0, std::abs(p.bypass[k])));
      }
    }
  }
  report("9", worst <= 1e-6, "gradients match central differences", "max relative error " + fmt("%.2e", worst));
}

void determinism() {
  const auto dir = std::filesystem::temp_directory_path() / "diverge_acceptance";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto scen = (dir / "paper.json").string();
  std::ofstream(scen) << R"({"demand": {"f1": 0.65, "f2": 0.35},
 "costs": {"exit1": {"ct": 1, "cc": 1, "gamma": 2.7}, "exit2": {"ct": 1, "cc": 1, "gamma": 2.7}}})";
  const auto data = (dir / "obs.csv").string();
  std::ofstream(data) << observations_csv(fixtures::synthetic_observations(kPaper));

  const std::vector<std::vector<std::string>> commands = {
      {"eq", "--scenario", scen, "--oracle", "--out"},
      {"social", "--scenario", scen, "--f1-points", "5", "--out"},
      {"sweep", "--scenario", scen, "--alpha", "0.25", "--out"},
      {"calibrate", "--data", data, "--export-milp", (dir / "cal.lp").string(), "--out"},
  };
  for (const auto& cmd : commands) {
    std::string files[2], streams[2];
    int codes[2];
    for (int rep = 0; rep < 2; ++rep) {
      auto args = cmd;
      const auto out = (dir / ("out" + std::to_string(rep))).string();
      args.push_back(out);
      std::ostringstream o, e;
      codes[rep] = cli::run_command(args, o, e);
      files[rep] = read_file(out);
      streams[rep] = o.str() + e.str();
      if (cmd[0] == "calibrate") files[rep] += read_file(dir / "cal.lp");
    }
    const bool same = files[0] == files[1] && streams[0] == streams[1] && codes[0] == codes[1];
    report("10", same && codes[0] == 0, "byte-identical repeated `" + cmd[0] + "`",
           std::to_string(files[0].size()) + " bytes, exit " + std::to_string(codes[0]));
  }
  std::filesystem::remove_all(dir);
}

}  // namespace

int main() {
  analytic_equilibria();
  oracle_equivalence();
  slope_bounds();
  low_demand();
  calibration_round_trip();
  milp_consistency();
  social_dominance();
  stackelberg();
  invariants();
  determinism();
  std::printf("%d check(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
