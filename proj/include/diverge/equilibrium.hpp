#pragma once

// Wardrop equilibria of the diverge model.
//
// With flow conservation substituted, each exit has a single free variable,
// its steadfast fraction. An equilibrium is a fixed point of the composed
// best responses B_1(B_2(.)), where B_i projects the root of the exit-i cost
// gap onto [0, residual_i].

#include <vector>

#include "diverge/model.hpp"

namespace diverge {

struct SolverOptions {
  double tol = 1e-10;         ///< fixed-point step and residual tolerance
  int max_iters = 10000;
  double bisect_tol = 1e-12;  ///< best-response bracket width

  void validate() const;
};

struct ExitCosts {
  std::array<double, 2> steadfast{};
  std::array<double, 2> bypass{};

  static ExitCosts at(const FlowVector& x, const CostParams& c, const OccupancyOffsets& offsets);
};

struct EquilibriumResult {
  FlowVector flow;
  ExitCosts costs;
  double residual = 0.0;  ///< verify_wardrop at flow
  int iterations = 0;
  bool unique_certified = false;
  bool converged = false;
};

enum class ResponseCase {
  Interior,       ///< gap root inside (0, residual)
  AllBypass,      ///< gap(0) >= 0, respond with 0 steadfast
  AllSteadfast,   ///< gap(residual) <= 0, respond with the whole residual
};

struct BestResponse {
  double steadfast = 0.0;
  ResponseCase which = ResponseCase::Interior;
  /// True when ct_i >= cc_i guarantees a monotone gap.
  bool certified = true;
  /// Only meaningful when !certified: slope samples at the endpoints and the
  /// midpoint were all nonnegative.
  bool monotone_sampled = true;
};

/// Exit-i steadfast fraction that equalizes (or best orders) its two costs
/// while exit j holds `opposing_steadfast`. Throws ValidationError when the
/// opposing value lies outside [0, residual_j].
BestResponse best_response(Exit i, double opposing_steadfast, const DemandConfig& demand,
                           const CostParams& c, const OccupancyOffsets& offsets = {},
                           double bisect_tol = SolverOptions{}.bisect_tol);

/// Flow with the given steadfast fractions and bypass = residual - steadfast.
FlowVector flow_from_steadfast(double x1s, double x2s, const DemandConfig& demand,
                               const OccupancyOffsets& offsets);

/// Gauss-Seidel best-response iteration from the all-steadfast point.
EquilibriumResult solve_equilibrium(const DemandConfig& demand, const CostParams& c,
                                    const OccupancyOffsets& offsets = {},
                                    const SolverOptions& opts = {});

/// Largest positive part of xs_i * gap_i and -xb_i * gap_i over both exits.
/// Throws ValidationError when x is infeasible.
double verify_wardrop(const FlowVector& x, const DemandConfig& demand, const CostParams& c,
                      const OccupancyOffsets& offsets = {});

enum class OracleStatus {
  Found,
  /// Nothing survived although uniqueness conditions hold: the acceptance
  /// threshold is too tight for the grid step.
  EmptyMisconfigured,
  /// Nothing survived and uniqueness conditions fail.
  EmptyUncertified,
};

struct OracleResult {
  std::vector<FlowVector> candidates;
  OracleStatus status = OracleStatus::Found;
  std::size_t survivors = 0;
};

/// Brute-force scan of the steadfast plane at step h (0 < h <= 0.01).
/// Points with residual <= 10 * max(C) * h are clustered (merge radius 3h,
/// Chebyshev) and each cluster's best point is polished by one best-response
/// pass.
OracleResult grid_oracle(const DemandConfig& demand, const CostParams& c,
                         const OccupancyOffsets& offsets, double h);

/// solve_equilibrium, falling back to the grid oracle when the iteration
/// does not converge. The fallback keeps the lowest-residual candidate.
EquilibriumResult solve_with_fallback(const DemandConfig& demand, const CostParams& c,
                                      const OccupancyOffsets& offsets = {},
                                      const SolverOptions& opts = {}, double oracle_step = 1e-3);

}  // namespace diverge
