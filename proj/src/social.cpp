#include "diverge/social.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace diverge {

double social_cost(const FlowVector& x, const CostParams& c, const OccupancyOffsets& offsets) {
  for (double v : x.as_array()) {
    if (!(v >= 0.0)) throw ValidationError("social cost needs a nonnegative flow");
  }
  const FlowVector weight = add_offsets(x, offsets);
  double total = 0.0;
  for (Exit i : kExits) {
    total += weight.xs(i) * steadfast_cost(i, x, c, offsets);
    total += weight.xb(i) * bypass_cost(i, x, c, offsets);
  }
  return total;
}

double social_cost(const FlowVector& x, const DemandConfig& demand, const CostParams& c,
                   const OccupancyOffsets& offsets) {
  if (auto v = validate_flow(x, demand, offsets)) throw ValidationError(v->describe());
  return social_cost(x, c, offsets);
}

FlowGradient social_cost_gradient(const FlowVector& x, const CostParams& c,
                                  const OccupancyOffsets& offsets) {
  const FlowVector weight = add_offsets(x, offsets);
  FlowGradient g{};
  for (Exit i : kExits) {
    const CostPartials p = cost_partials(i, x, c, offsets);
    const int s = 2 * index(i);
    const int b = s + 1;
    for (int k = 0; k < 4; ++k) g[k] += weight.xs(i) * p.steadfast[k] + weight.xb(i) * p.bypass[k];
    g[s] += steadfast_cost(i, x, c, offsets);
    g[b] += bypass_cost(i, x, c, offsets);
  }
  return g;
}

namespace {

struct Candidate {
  double x1s, x2s, cost;
};

// Lexicographic (cost, x1s, x2s) ordering makes the argmin unique.
bool better(const Candidate& a, const Candidate& b) {
  return std::tie(a.cost, a.x1s, a.x2s) < std::tie(b.cost, b.x1s, b.x2s);
}

template <typename F>
double golden_section(F&& f, double a, double b, double width) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > width) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

SocialResult minimize_social_cost(const DemandConfig& demand, const CostParams& c, double grid,
                                  const SolverOptions& opts) {
  demand.validate();
  c.validate();
  if (!(grid > 0.0 && grid <= 0.01)) throw ValidationError("social grid step must lie in (0, 0.01]");
  const double f1 = demand.f1;
  const double f2 = demand.f2;
  auto objective = [&](double x1s, double x2s) {
    return social_cost(FlowVector::of(x1s, f1 - x1s, x2s, f2 - x2s), c);
  };
  auto evaluate = [&](double x1s, double x2s) {
    const double v = objective(x1s, x2s);
    if (!std::isfinite(v)) throw std::runtime_error("social cost is not finite");
    return Candidate{x1s, x2s, v};
  };

  const EquilibriumResult eq = solve_equilibrium(demand, c, {}, opts);

  Candidate best = evaluate(f1, f2);
  if (auto e = evaluate(eq.flow.xs(Exit::One), eq.flow.xs(Exit::Two)); better(e, best)) best = e;

  const auto n1 = static_cast<long>(std::floor(f1 / grid + 1e-9));
  const auto n2 = static_cast<long>(std::floor(f2 / grid + 1e-9));
  for (long a = 0; a <= n1 + 1; ++a) {
    const double x1s = std::min(static_cast<double>(a) * grid, f1);
    for (long b = 0; b <= n2 + 1; ++b) {
      const double x2s = std::min(static_cast<double>(b) * grid, f2);
      if (auto cand = evaluate(x1s, x2s); better(cand, best)) best = cand;
    }
  }

  // Coordinate descent, each line search confined to a few grid cells around
  // the incumbent so a one-dimensional cubic stays unimodal on the bracket.
  constexpr double kWidth = 1e-10;
  for (int sweep = 0; sweep < 200; ++sweep) {
    const double before = best.cost;
    {
      const double lo = std::max(0.0, best.x1s - 2.0 * grid);
      const double hi = std::min(f1, best.x1s + 2.0 * grid);
      const double x = golden_section([&](double v) { return objective(v, best.x2s); }, lo, hi, kWidth);
      if (auto cand = evaluate(x, best.x2s); cand.cost < best.cost) best = cand;
    }
    {
      const double lo = std::max(0.0, best.x2s - 2.0 * grid);
      const double hi = std::min(f2, best.x2s + 2.0 * grid);
      const double x = golden_section([&](double v) { return objective(best.x1s, v); }, lo, hi, kWidth);
      if (auto cand = evaluate(best.x1s, x); cand.cost < best.cost) best = cand;
    }
    if (!(best.cost < before)) break;
  }

  SocialResult out;
  out.flow = FlowVector::of(best.x1s, f1 - best.x1s, best.x2s, f2 - best.x2s);
  out.cost = best.cost;
  out.equilibrium_flow = eq.flow;
  out.equilibrium_cost = social_cost(eq.flow, c);
  out.ratio = out.cost > 0.0 ? out.equilibrium_cost / out.cost : 1.0;
  return out;
}

}  // namespace diverge
