#include "diverge/stackelberg.hpp"

#include <algorithm>
#include <cmath>

#include "diverge/social.hpp"

namespace diverge {

OccupancyOffsets CommandPlan::offsets() const {
  OccupancyOffsets o;
  o.steadfast[index(Exit::One)] = z;
  o.bypass[index(Exit::One)] = w;
  return o;
}

CommandPlan command_plan(double alpha, double beta, const DemandConfig& demand) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("beta must lie in [0, 1]");
  demand.validate();
  const double autonomous = alpha * demand.f1;
  return CommandPlan{alpha, beta, (1.0 - beta) * autonomous, beta * autonomous};
}

EquilibriumResult induced_equilibrium(const DemandConfig& demand, const CostParams& c,
                                      const CommandPlan& plan, const SolverOptions& opts) {
  return solve_equilibrium(demand, c, plan.offsets(), opts);
}

std::vector<SweepRow> sweep_beta(const DemandConfig& demand, const CostParams& c, double alpha,
                                 int steps, const SolverOptions& opts) {
  if (steps < 2) throw ValidationError("sweep needs at least 2 steps");
  std::vector<SweepRow> rows;
  rows.reserve(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    const double beta = static_cast<double>(k) / static_cast<double>(steps - 1);
    SweepRow row;
    row.beta = beta;
    row.plan = command_plan(alpha, beta, demand);
    const EquilibriumResult eq = induced_equilibrium(demand, c, row.plan, opts);
    row.flow = eq.flow;
    row.social_cost = social_cost(eq.flow, c, row.plan.offsets());
    row.residual = eq.residual;
    row.converged = eq.converged;
    rows.push_back(row);
  }
  return rows;
}

std::optional<double> bypass_threshold(const std::vector<SweepRow>& rows) {
  for (const auto& row : rows) {
    if (row.flow.xb(Exit::One) > kBypassEmergence) return row.beta;
  }
  return std::nullopt;
}

namespace {

bool cost_tie(double a, double b) {
  return std::abs(a - b) <= kCostTieTolerance * std::max({1.0, std::abs(a), std::abs(b)});
}

// Strict improvement beyond the tie band.
bool lower(double a, double b) { return a < b && !cost_tie(a, b); }

}  // namespace

BetaOptimum optimal_beta(const std::vector<SweepRow>& rows, const DemandConfig& demand,
                         const CostParams& c, double alpha, const SolverOptions& opts) {
  if (rows.size() < 2) throw ValidationError("sweep needs at least 2 steps");
  std::size_t arg = 0;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (lower(rows[k].social_cost, rows[arg].social_cost)) arg = k;
  }
  BetaOptimum best{rows[arg].beta, rows[arg].social_cost};

  auto cost_at = [&](double beta) {
    const CommandPlan plan = command_plan(alpha, std::clamp(beta, 0.0, 1.0), demand);
    return social_cost(induced_equilibrium(demand, c, plan, opts).flow, c, plan.offsets());
  };

  // Golden section on the bracket, preferring the left point on ties so a flat
  // floor resolves to its smallest beta.
  double a = rows[arg == 0 ? 0 : arg - 1].beta;
  double b = rows[std::min(arg + 1, rows.size() - 1)].beta;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = cost_at(x1), f2 = cost_at(x2);
  while (b - a > 1e-9) {
    if (!lower(f2, f1)) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = cost_at(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = cost_at(x2);
    }
  }
  const double refined = 0.5 * (a + b);
  const double refined_cost = cost_at(refined);
  if (lower(refined_cost, best.cost) || (cost_tie(refined_cost, best.cost) && refined < best.beta)) {
    best = {refined, refined_cost};
  }
  return best;
}

BetaOptimum optimal_beta(const DemandConfig& demand, const CostParams& c, double alpha, int steps,
                         const SolverOptions& opts) {
  return optimal_beta(sweep_beta(demand, c, alpha, steps, opts), demand, c, alpha, opts);
}

}  // namespace diverge
