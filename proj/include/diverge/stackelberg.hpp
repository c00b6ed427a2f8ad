#pragma once

// Mixed autonomy at the diverge: a share alpha of the exit-1 demand is
// autonomous and follows commands, a share beta of those vehicles is told to
// stay steadfast and the rest to bypass. Regular vehicles re-equilibrate
// around the commanded flows.

#include <optional>
#include <vector>

#include "diverge/equilibrium.hpp"
#include "diverge/model.hpp"

namespace diverge {

struct CommandPlan {
  double alpha = 0.0;
  double beta = 0.0;
  double w = 0.0;  ///< commanded bypass, fraction of total demand
  double z = 0.0;  ///< commanded steadfast, fraction of total demand

  /// Exit-1 offsets (steadfast z, bypass w); exit 2 carries none.
  OccupancyOffsets offsets() const;
};

/// Throws ValidationError for alpha or beta outside [0, 1].
CommandPlan command_plan(double alpha, double beta, const DemandConfig& demand);

EquilibriumResult induced_equilibrium(const DemandConfig& demand, const CostParams& c,
                                      const CommandPlan& plan, const SolverOptions& opts = {});

struct SweepRow {
  double beta = 0.0;
  CommandPlan plan;
  FlowVector flow;  ///< non-commanded flows
  double social_cost = 0.0;
  double residual = 0.0;
  bool converged = false;
};

/// Induced equilibria at beta = k / (steps - 1), k = 0 .. steps - 1.
std::vector<SweepRow> sweep_beta(const DemandConfig& demand, const CostParams& c, double alpha,
                                 int steps, const SolverOptions& opts = {});

/// Bypass level above which exit-1 regular vehicles count as bypassing.
inline constexpr double kBypassEmergence = 1e-6;

/// First beta whose induced exit-1 bypass exceeds kBypassEmergence.
std::optional<double> bypass_threshold(const std::vector<SweepRow>& rows);

struct BetaOptimum {
  double beta = 0.0;
  double cost = 0.0;
};

/// Two social costs closer than this (relative) are treated as a tie and the
/// smaller beta wins.
inline constexpr double kCostTieTolerance = 1e-12;

/// Argmin of the induced social cost over the sweep grid, refined by a
/// golden-section search on the bracketing grid interval.
BetaOptimum optimal_beta(const DemandConfig& demand, const CostParams& c, double alpha, int steps,
                         const SolverOptions& opts = {});

/// Same as above, reusing rows already produced by sweep_beta.
BetaOptimum optimal_beta(const std::vector<SweepRow>& rows, const DemandConfig& demand,
                         const CostParams& c, double alpha, const SolverOptions& opts = {});

}  // namespace diverge
