#include "diverge/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace diverge {

namespace {

// Residual demands of both exits; tiny negative values from rounding clamp
// to zero, anything larger is an infeasible command plan.
std::array<double, 2> residuals(const DemandConfig& demand, const OccupancyOffsets& offsets) {
  std::array<double, 2> r{};
  for (Exit e : kExits) {
    const double v = residual_demand(e, demand, offsets);
    if (v < -kModelTol)
      throw ValidationError("offsets exceed the demand of exit " + std::to_string(number(e)));
    r[index(e)] = std::max(v, 0.0);
  }
  return r;
}

FlowVector flow_with(Exit i, double xs_i, double xs_j, const std::array<double, 2>& r) {
  const Exit j = other(i);
  FlowVector x;
  x.steadfast[index(i)] = xs_i;
  x.bypass[index(i)] = r[index(i)] - xs_i;
  x.steadfast[index(j)] = xs_j;
  x.bypass[index(j)] = r[index(j)] - xs_j;
  return x;
}

double wardrop_residual_unchecked(const FlowVector& x, const CostParams& c,
                                  const OccupancyOffsets& offsets) {
  double worst = 0.0;
  for (Exit i : kExits) {
    const double gap = cost_gap(i, x, c, offsets);
    worst = std::max({worst, x.xs(i) * gap, -x.xb(i) * gap});
  }
  return worst;
}

}  // namespace

void SolverOptions::validate() const {
  if (!(tol > 0.0)) throw ValidationError("solver.tol must be > 0");
  if (max_iters < 1) throw ValidationError("solver.max_iters must be >= 1");
  if (!(bisect_tol > 0.0)) throw ValidationError("solver.bisect_tol must be > 0");
}

ExitCosts ExitCosts::at(const FlowVector& x, const CostParams& c, const OccupancyOffsets& offsets) {
  ExitCosts k;
  for (Exit e : kExits) {
    k.steadfast[index(e)] = steadfast_cost(e, x, c, offsets);
    k.bypass[index(e)] = bypass_cost(e, x, c, offsets);
  }
  return k;
}

FlowVector flow_from_steadfast(double x1s, double x2s, const DemandConfig& demand,
                               const OccupancyOffsets& offsets) {
  return flow_with(Exit::One, x1s, x2s, residuals(demand, offsets));
}

BestResponse best_response(Exit i, double opposing_steadfast, const DemandConfig& demand,
                           const CostParams& c, const OccupancyOffsets& offsets,
                           double bisect_tol) {
  const auto r = residuals(demand, offsets);
  const Exit j = other(i);
  const double r_i = r[index(i)];
  const double r_j = r[index(j)];
  if (!(opposing_steadfast >= -kModelTol && opposing_steadfast <= r_j + kModelTol)) {
    throw ValidationError("opposing steadfast fraction outside [0, residual] of exit " +
                          std::to_string(number(j)));
  }
  const double xjs = std::clamp(opposing_steadfast, 0.0, r_j);
  auto gap = [&](double xs_i) { return cost_gap(i, flow_with(i, xs_i, xjs, r), c, offsets); };

  BestResponse out;
  out.certified = c[i].ct >= c[i].cc;

  const double g0 = gap(0.0);
  if (g0 >= 0.0) {
    out.steadfast = 0.0;
    out.which = ResponseCase::AllBypass;
    return out;
  }
  const double g1 = gap(r_i);
  if (g1 <= 0.0) {
    out.steadfast = r_i;
    out.which = ResponseCase::AllSteadfast;
    return out;
  }

  if (!out.certified) {
    const double h = 1e-6 * r_i;
    const double mid = 0.5 * r_i;
    const bool ok = gap(h) >= g0 && gap(r_i) >= gap(r_i - h) && gap(mid + h) >= gap(mid - h);
    out.monotone_sampled = ok;
  }

  // Invariant: gap(lo) < 0 < gap(hi).
  double lo = 0.0, hi = r_i, glo = g0, ghi = g1;
  while (hi - lo > bisect_tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double gm = gap(mid);
    if (gm == 0.0) {
      lo = hi = mid;
      glo = ghi = 0.0;
      break;
    }
    if (gm < 0.0) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
      ghi = gm;
    }
  }
  // One secant step inside the final bracket; the gap is a quadratic, so on a
  // bracket this narrow it is linear to machine precision.
  double root = lo;
  if (hi > lo) root = std::clamp(lo - glo * (hi - lo) / (ghi - glo), lo, hi);
  out.steadfast = root;
  out.which = ResponseCase::Interior;
  return out;
}

double verify_wardrop(const FlowVector& x, const DemandConfig& demand, const CostParams& c,
                      const OccupancyOffsets& offsets) {
  if (auto v = validate_flow(x, demand, offsets)) throw ValidationError(v->describe());
  return wardrop_residual_unchecked(x, c, offsets);
}

EquilibriumResult solve_equilibrium(const DemandConfig& demand, const CostParams& c,
                                    const OccupancyOffsets& offsets, const SolverOptions& opts) {
  demand.validate();
  c.validate();
  offsets.validate();
  opts.validate();
  const auto r = residuals(demand, offsets);

  double x1 = r[0];
  double x2 = r[1];
  EquilibriumResult out;
  for (int it = 1; it <= opts.max_iters; ++it) {
    const double n1 = best_response(Exit::One, x2, demand, c, offsets, opts.bisect_tol).steadfast;
    const double n2 = best_response(Exit::Two, n1, demand, c, offsets, opts.bisect_tol).steadfast;
    const double step = std::max(std::abs(n1 - x1), std::abs(n2 - x2));
    x1 = n1;
    x2 = n2;
    out.iterations = it;
    if (step < opts.tol &&
        wardrop_residual_unchecked(flow_with(Exit::One, x1, x2, r), c, offsets) <= opts.tol) {
      out.converged = true;
      break;
    }
  }
  out.flow = flow_with(Exit::One, x1, x2, r);
  out.costs = ExitCosts::at(out.flow, c, offsets);
  out.residual = verify_wardrop(out.flow, demand, c, offsets);
  out.unique_certified = check_uniqueness_conditions(c).all_hold;
  return out;
}

namespace {

std::vector<double> axis(double r, double h) {
  std::vector<double> v;
  const auto n = static_cast<long>(std::floor(r / h + 1e-9));
  v.reserve(static_cast<std::size_t>(n) + 2);
  for (long k = 0; k <= n; ++k) v.push_back(std::min(static_cast<double>(k) * h, r));
  if (r - v.back() > 1e-12) v.push_back(r);
  return v;
}

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Smaller index wins so cluster order follows row-major scan order.
    if (b < a) std::swap(a, b);
    parent[b] = a;
  }
};

}  // namespace

OracleResult grid_oracle(const DemandConfig& demand, const CostParams& c,
                         const OccupancyOffsets& offsets, double h) {
  demand.validate();
  c.validate();
  offsets.validate();
  if (!(h > 0.0 && h <= 0.01)) throw ValidationError("oracle grid step must lie in (0, 0.01]");
  const auto r = residuals(demand, offsets);
  const auto ax1 = axis(r[0], h);
  const auto ax2 = axis(r[1], h);
  const double threshold = 10.0 * c.max_component() * h;

  struct Survivor {
    long i1, i2;
    double residual;
  };
  std::vector<Survivor> survivors;
  for (std::size_t a = 0; a < ax1.size(); ++a) {
    for (std::size_t b = 0; b < ax2.size(); ++b) {
      const double res = wardrop_residual_unchecked(flow_with(Exit::One, ax1[a], ax2[b], r), c, offsets);
      if (res <= threshold) survivors.push_back({static_cast<long>(a), static_cast<long>(b), res});
    }
  }

  OracleResult out;
  out.survivors = survivors.size();
  if (survivors.empty()) {
    out.status = check_uniqueness_conditions(c).all_hold ? OracleStatus::EmptyMisconfigured
                                                         : OracleStatus::EmptyUncertified;
    return out;
  }

  constexpr long kMergeRadius = 3;
  const long stride = static_cast<long>(ax2.size()) + 2 * kMergeRadius + 1;
  auto key = [stride](long i1, long i2) { return i1 * stride + i2; };
  std::unordered_map<long, std::size_t> where;
  where.reserve(survivors.size() * 2);
  for (std::size_t k = 0; k < survivors.size(); ++k) where[key(survivors[k].i1, survivors[k].i2)] = k;

  DisjointSets sets(survivors.size());
  for (std::size_t k = 0; k < survivors.size(); ++k) {
    for (long d1 = 0; d1 <= kMergeRadius; ++d1) {
      for (long d2 = -kMergeRadius; d2 <= kMergeRadius; ++d2) {
        if (d1 == 0 && d2 <= 0) continue;
        auto it = where.find(key(survivors[k].i1 + d1, survivors[k].i2 + d2));
        if (it != where.end()) sets.unite(k, it->second);
      }
    }
  }

  // Best (lowest residual, first in scan order) member per cluster.
  std::vector<std::size_t> roots;
  std::unordered_map<std::size_t, std::size_t> best;
  for (std::size_t k = 0; k < survivors.size(); ++k) {
    const std::size_t root = sets.find(k);
    auto [it, inserted] = best.try_emplace(root, k);
    if (inserted) {
      roots.push_back(root);
    } else if (survivors[k].residual < survivors[it->second].residual) {
      it->second = k;
    }
  }
  std::sort(roots.begin(), roots.end());

  for (std::size_t root : roots) {
    const auto& s = survivors[best[root]];
    const double x2 = ax2[static_cast<std::size_t>(s.i2)];
    const double p1 = best_response(Exit::One, x2, demand, c, offsets).steadfast;
    const double p2 = best_response(Exit::Two, p1, demand, c, offsets).steadfast;
    out.candidates.push_back(flow_with(Exit::One, p1, p2, r));
  }
  out.status = OracleStatus::Found;
  return out;
}

namespace {

// Zooms a brute-force window around (x1, x2) until the window step drops
// below 1e-10. Returns the lowest-residual point seen.
std::array<double, 2> zoom(std::array<double, 2> x, double h, const std::array<double, 2>& r,
                           const CostParams& c, const OccupancyOffsets& offsets) {
  constexpr int kCells = 50;
  auto res = [&](double a, double b) {
    return wardrop_residual_unchecked(flow_with(Exit::One, a, b, r), c, offsets);
  };
  double best = res(x[0], x[1]);
  while (h > 1e-10 && best > 0.0) {
    const double step = h / 10.0;
    const std::array<double, 2> centre = x;
    for (int a = -kCells; a <= kCells; ++a) {
      const double x1 = std::clamp(centre[0] + a * step, 0.0, r[0]);
      for (int b = -kCells; b <= kCells; ++b) {
        const double x2 = std::clamp(centre[1] + b * step, 0.0, r[1]);
        const double v = res(x1, x2);
        if (v < best) {
          best = v;
          x = {x1, x2};
        }
      }
    }
    h = step;
  }
  return x;
}

}  // namespace

EquilibriumResult solve_with_fallback(const DemandConfig& demand, const CostParams& c,
                                      const OccupancyOffsets& offsets, const SolverOptions& opts,
                                      double oracle_step) {
  EquilibriumResult base = solve_equilibrium(demand, c, offsets, opts);
  if (base.converged) return base;

  const auto r = residuals(demand, offsets);
  const OracleResult oracle = grid_oracle(demand, c, offsets, oracle_step);
  EquilibriumResult out = base;
  for (const FlowVector& cand : oracle.candidates) {
    const auto x = zoom({cand.xs(Exit::One), cand.xs(Exit::Two)}, oracle_step, r, c, offsets);
    const FlowVector flow = flow_with(Exit::One, x[0], x[1], r);
    const double res = wardrop_residual_unchecked(flow, c, offsets);
    if (res < out.residual) {
      out.flow = flow;
      out.residual = res;
    }
  }
  out.costs = ExitCosts::at(out.flow, c, offsets);
  out.converged = out.residual <= opts.tol;
  return out;
}

}  // namespace diverge
