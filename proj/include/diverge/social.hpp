#pragma once

#include "diverge/equilibrium.hpp"
#include "diverge/model.hpp"

namespace diverge {

/// Flow-weighted total cost. With offsets, commanded vehicles are counted in
/// the stream weights as well as in the costs. Throws ValidationError on a
/// negative flow component.
double social_cost(const FlowVector& x, const CostParams& c, const OccupancyOffsets& offsets = {});

/// As above, also rejecting flows that do not conserve the residual demand.
double social_cost(const FlowVector& x, const DemandConfig& demand, const CostParams& c,
                   const OccupancyOffsets& offsets = {});

/// Gradient of social_cost with respect to the four independent flow
/// components (x1s, x1b, x2s, x2b).
FlowGradient social_cost_gradient(const FlowVector& x, const CostParams& c,
                                  const OccupancyOffsets& offsets = {});

struct SocialResult {
  FlowVector flow;
  double cost = 0.0;
  FlowVector equilibrium_flow;
  double equilibrium_cost = 0.0;
  double ratio = 1.0;  ///< equilibrium_cost / cost
};

/// Global minimum of the social cost over feasible flows: grid scan at
/// `grid` (0 < grid <= 0.01) seeded with the equilibrium and all-steadfast
/// points, then coordinate descent with golden-section line searches.
SocialResult minimize_social_cost(const DemandConfig& demand, const CostParams& c, double grid,
                                  const SolverOptions& opts = {});

}  // namespace diverge
