#pragma once

#include <cmath>
#include <random>

#include "diverge/calibration.hpp"
#include "diverge/equilibrium.hpp"
#include "diverge/model.hpp"

namespace fixtures {

/// Calibrated coefficients reported for the symmetric diverge.
inline diverge::CostParams paper_costs() { return diverge::CostParams::symmetric(1.0, 1.0, 2.7); }

/// Smaller root of x^2 + b x + c = 0, evaluated without bisection.
inline double smaller_root(double b, double c) { return (-b - std::sqrt(b * b - 4.0 * c)) / 2.0; }

/// Random coefficients satisfying both uniqueness conditions.
inline diverge::CostParams random_certified(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  diverge::CostParams c;
  for (auto& e : c.exits) {
    e.ct = 0.5 + 2.5 * u(rng);
    e.cc = (0.1 + 0.9 * u(rng)) * e.ct;
  }
  for (diverge::Exit i : diverge::kExits) {
    const auto j = diverge::other(i);
    c[i].gamma = 1.0 + c[i].cc / c[j].ct + 2.0 * u(rng);
  }
  return c;
}

/// Random coefficients with no structural guarantees beyond the invariants.
inline diverge::CostParams random_any(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  diverge::CostParams c;
  for (auto& e : c.exits) {
    e.ct = 0.2 + 3.0 * u(rng);
    e.cc = 0.2 + 3.0 * u(rng);
    e.gamma = 1.0 + 3.0 * u(rng);
  }
  return c;
}

/// Equilibrium observations at f1 = 0.05, ..., 0.95 (20 points).
inline diverge::ObservationSet synthetic_observations(const diverge::CostParams& c) {
  diverge::ObservationSet obs;
  for (int k = 0; k < 20; ++k) {
    const double f1 = 0.05 + 0.9 * k / 19.0;
    const auto d = diverge::DemandConfig::from_f1(f1);
    obs.push_back({f1, diverge::solve_equilibrium(d, c).flow, std::nullopt});
  }
  return obs;
}

inline double max_abs_diff(const diverge::FlowVector& a, const diverge::FlowVector& b) {
  double m = 0.0;
  const auto p = a.as_array(), q = b.as_array();
  for (int k = 0; k < 4; ++k) m = std::max(m, std::abs(p[k] - q[k]));
  return m;
}

}  // namespace fixtures
