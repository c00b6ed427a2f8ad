#include "diverge/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace diverge {

namespace {

std::string fmt_exit(const char* what, Exit e) {
  return std::string(what) + " (exit " + std::to_string(number(e)) + ")";
}

void require_finite(double v, const std::string& name) {
  if (!std::isfinite(v)) throw ValidationError(name + " must be finite");
}

}  // namespace

DemandConfig DemandConfig::make(double f1, double f2, std::optional<double> total) {
  DemandConfig d{f1, f2, total};
  d.validate();
  return d;
}

DemandConfig DemandConfig::from_f1(double f1, std::optional<double> total) {
  return make(f1, 1.0 - f1, total);
}

void DemandConfig::validate() const {
  require_finite(f1, "demand.f1");
  require_finite(f2, "demand.f2");
  if (f1 < 0.0) throw ValidationError("demand.f1 must be >= 0");
  if (f2 < 0.0) throw ValidationError("demand.f2 must be >= 0");
  if (std::abs(f1 + f2 - 1.0) > kModelTol)
    throw ValidationError("demand fractions must satisfy f1 + f2 = 1");
  if (total) {
    require_finite(*total, "demand.d");
    if (*total < 0.0) throw ValidationError("demand.d must be >= 0");
  }
}

CostParams CostParams::symmetric(double ct, double cc, double gamma) {
  return make({ct, cc, gamma}, {ct, cc, gamma});
}

CostParams CostParams::make(const ExitCoefficients& exit1, const ExitCoefficients& exit2) {
  CostParams c{{exit1, exit2}};
  c.validate();
  return c;
}

CostParams CostParams::scaled(double lambda) const {
  CostParams c = *this;
  for (auto& e : c.exits) {
    e.ct *= lambda;
    e.cc *= lambda;
  }
  return c;
}

double CostParams::max_component() const {
  double m = 0.0;
  for (const auto& e : exits) m = std::max({m, e.ct, e.cc, e.gamma});
  return m;
}

void CostParams::validate() const {
  for (Exit e : kExits) {
    const auto& k = (*this)[e];
    require_finite(k.ct, fmt_exit("ct", e));
    require_finite(k.cc, fmt_exit("cc", e));
    require_finite(k.gamma, fmt_exit("gamma", e));
    if (!(k.ct > 0.0)) throw ValidationError(fmt_exit("ct", e) + " must be > 0");
    if (!(k.cc > 0.0)) throw ValidationError(fmt_exit("cc", e) + " must be > 0");
    if (!(k.gamma >= 1.0)) throw ValidationError(fmt_exit("gamma", e) + " must be >= 1");
  }
}

void OccupancyOffsets::validate() const {
  for (Exit e : kExits) {
    require_finite(os(e), fmt_exit("steadfast offset", e));
    require_finite(ob(e), fmt_exit("bypass offset", e));
    if (os(e) < 0.0) throw ValidationError(fmt_exit("steadfast offset", e) + " must be >= 0");
    if (ob(e) < 0.0) throw ValidationError(fmt_exit("bypass offset", e) + " must be >= 0");
  }
}

double residual_demand(Exit e, const DemandConfig& demand, const OccupancyOffsets& offsets) {
  return demand.fraction(e) - offsets.os(e) - offsets.ob(e);
}

FlowVector add_offsets(const FlowVector& x, const OccupancyOffsets& offsets) {
  FlowVector y = x;
  for (int k = 0; k < 2; ++k) {
    y.steadfast[k] += offsets.steadfast[k];
    y.bypass[k] += offsets.bypass[k];
  }
  return y;
}

std::string FlowViolation::describe() const {
  char buf[160];
  if (kind == Kind::Negative) {
    std::snprintf(buf, sizeof buf, "exit %d: negative flow component %.9g", number(exit), magnitude);
  } else {
    std::snprintf(buf, sizeof buf, "exit %d: flow conservation violated, excess %.9g", number(exit),
                  magnitude);
  }
  return buf;
}

std::optional<FlowViolation> validate_flow(const FlowVector& x, const DemandConfig& demand,
                                           const OccupancyOffsets& offsets, double tol) {
  for (Exit e : kExits) {
    if (x.xs(e) < 0.0 || !std::isfinite(x.xs(e)))
      return FlowViolation{e, FlowViolation::Kind::Negative, x.xs(e)};
    if (x.xb(e) < 0.0 || !std::isfinite(x.xb(e)))
      return FlowViolation{e, FlowViolation::Kind::Negative, x.xb(e)};
  }
  for (Exit e : kExits) {
    const double excess = x.xs(e) + x.xb(e) - residual_demand(e, demand, offsets);
    if (std::abs(excess) > tol) return FlowViolation{e, FlowViolation::Kind::Conservation, excess};
  }
  return std::nullopt;
}

double steadfast_cost(Exit i, const FlowVector& x, const CostParams& c,
                      const OccupancyOffsets& offsets) {
  const Exit j = other(i);
  const double xs_i = x.xs(i) + offsets.os(i);
  const double xb_i = x.xb(i) + offsets.ob(i);
  const double xb_j = x.xb(j) + offsets.ob(j);
  const double lane_load = xs_i + xb_j;
  return c[i].ct * lane_load + c[i].cc * xb_i * lane_load;
}

double bypass_cost(Exit i, const FlowVector& x, const CostParams& c,
                   const OccupancyOffsets& offsets) {
  const Exit j = other(i);
  const double xb_i = x.xb(i) + offsets.ob(i);
  const double xs_j = x.xs(j) + offsets.os(j);
  const double xb_j = x.xb(j) + offsets.ob(j);
  return c[j].ct * (xs_j + c[i].gamma * xb_i) + c[j].cc * xb_j * (xs_j + xb_i);
}

double cost_gap(Exit i, const FlowVector& x, const CostParams& c, const OccupancyOffsets& offsets) {
  return steadfast_cost(i, x, c, offsets) - bypass_cost(i, x, c, offsets);
}

CostPartials cost_partials(Exit i, const FlowVector& x, const CostParams& c,
                           const OccupancyOffsets& offsets) {
  const Exit j = other(i);
  const FlowVector y = add_offsets(x, offsets);
  const double xs_i = y.xs(i), xb_i = y.xb(i), xs_j = y.xs(j), xb_j = y.xb(j);
  const auto& ci = c[i];
  const auto& cj = c[j];

  // Positions in (x1s, x1b, x2s, x2b).
  const int s_i = 2 * index(i), b_i = s_i + 1, s_j = 2 * index(j), b_j = s_j + 1;

  CostPartials p;
  p.steadfast[s_i] = ci.ct + ci.cc * xb_i;
  p.steadfast[b_i] = ci.cc * (xs_i + xb_j);
  p.steadfast[s_j] = 0.0;
  p.steadfast[b_j] = ci.ct + ci.cc * xb_i;

  p.bypass[s_i] = 0.0;
  p.bypass[b_i] = cj.ct * ci.gamma + cj.cc * xb_j;
  p.bypass[s_j] = cj.ct + cj.cc * xb_j;
  p.bypass[b_j] = cj.cc * (xs_j + xb_i);
  return p;
}

UniquenessReport check_uniqueness_conditions(const CostParams& c) {
  UniquenessReport r;
  for (Exit i : kExits) {
    const Exit j = other(i);
    r.ct_ge_cc[index(i)] = c[i].ct >= c[i].cc;
    r.gamma_margin[index(i)] = (c[i].gamma - 1.0) * c[j].ct >= c[i].cc;
  }
  r.all_hold = r.ct_ge_cc[0] && r.ct_ge_cc[1] && r.gamma_margin[0] && r.gamma_margin[1];
  return r;
}

}  // namespace diverge
