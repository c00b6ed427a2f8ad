#include <doctest.h>

#include <random>

#include "diverge/equilibrium.hpp"
#include "support/fixtures.hpp"

using namespace diverge;
using doctest::Approx;

// With C = (1, 1, 2.7), exit 2 all steadfast and x1b = f1 - x1s, the exit-1
// gap is a concave quadratic in x1s; the equilibrium is its smaller root.

TEST_CASE("paper equilibria against closed-form roots") {
  const auto c = fixtures::paper_costs();
  {
    // gap = -x^2 + 4.35 x - 2.105
    const double x = fixtures::smaller_root(-4.35, 2.105);
    const auto r = solve_equilibrium(DemandConfig::make(0.65, 0.35), c);
    CHECK(r.converged);
    CHECK(r.unique_certified);
    CHECK(fixtures::max_abs_diff(r.flow, FlowVector::of(x, 0.65 - x, 0.35, 0.0)) <= 1e-9);
    CHECK(r.flow.xs(Exit::One) == Approx(0.5546219577).epsilon(1e-9));
    CHECK(r.residual <= 1e-10);
  }
  {
    // gap = -x^2 + 4.7 x - 2.7
    const double x = fixtures::smaller_root(-4.7, 2.7);
    const auto r = solve_equilibrium(DemandConfig::make(1.0, 0.0), c);
    CHECK(fixtures::max_abs_diff(r.flow, FlowVector::of(x, 1.0 - x, 0.0, 0.0)) <= 1e-9);
    CHECK(x == Approx(0.66997024).epsilon(1e-8));
  }
  {
    const auto r = solve_equilibrium(DemandConfig::make(0.5, 0.5), c);
    CHECK(fixtures::max_abs_diff(r.flow, FlowVector::of(0.5, 0.0, 0.5, 0.0)) <= 1e-9);
  }
}

TEST_CASE("best response cases") {
  const auto c = fixtures::paper_costs();
  const auto d = DemandConfig::make(0.65, 0.35);
  const auto a = best_response(Exit::One, 0.35, d, c);
  CHECK(a.which == ResponseCase::Interior);
  CHECK(a.steadfast == Approx(fixtures::smaller_root(-4.35, 2.105)).epsilon(1e-11));

  // gap at x1s = 0.3: 0.3 - 0.7 < 0, so all steadfast
  const auto d2 = DemandConfig::make(0.3, 0.7);
  const auto b = best_response(Exit::One, 0.7, d2, c);
  CHECK(b.which == ResponseCase::AllSteadfast);
  CHECK(b.steadfast == 0.3);

  CHECK_THROWS_AS(best_response(Exit::One, 0.5, d, c), ValidationError);
  CHECK_THROWS_AS(best_response(Exit::One, -0.1, d, c), ValidationError);

  // bypass everything when steadfast is dear even at zero: exit 2 crowded
  const auto e = best_response(Exit::One, 0.0, DemandConfig::make(0.5, 0.5), CostParams::symmetric(1.0, 1.0, 1.0));
  CHECK(e.which == ResponseCase::AllBypass);
  CHECK(e.steadfast == 0.0);
}

TEST_CASE("uncertified best response is flagged") {
  const auto c = CostParams::make({1.0, 2.0, 4.0}, {1.0, 1.0, 4.0});
  const auto r = best_response(Exit::One, 0.3, DemandConfig::make(0.7, 0.3), c);
  CHECK_FALSE(r.certified);
}

TEST_CASE("verify_wardrop") {
  const auto c = fixtures::paper_costs();
  const auto d = DemandConfig::make(0.65, 0.35);
  // gap_1 = 0.65 - 0.35 = 0.3, product 0.65 * 0.3; exit 2 products are <= 0
  CHECK(verify_wardrop(FlowVector::of(0.65, 0.0, 0.35, 0.0), d, c) == Approx(0.195).epsilon(1e-12));
  CHECK(verify_wardrop(FlowVector::of(0.5, 0.0, 0.5, 0.0), DemandConfig::make(0.5, 0.5), c) == 0.0);
  CHECK_THROWS_AS(verify_wardrop(FlowVector::of(0.6, 0.0, 0.35, 0.0), d, c), ValidationError);
}

TEST_CASE("gap is nondecreasing in own steadfast flow") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 50; ++n) {
    const auto c = fixtures::random_certified(rng);
    const auto d = DemandConfig::from_f1(u(rng));
    for (int k = 0; k < 100; ++k) {
      const double x2s = u(rng) * d.f2;
      const double x1s = u(rng) * d.f1;
      const double h = 1e-7;
      const auto at = [&](double v) {
        return cost_gap(Exit::One, flow_from_steadfast(v, x2s, d, {}), c);
      };
      CHECK(at(x1s + h) - at(x1s) >= -1e-12);
    }
  }
}

TEST_CASE("best-response slopes lie in [0, 1]") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int interior = 0;
  for (int n = 0; n < 100; ++n) {
    const auto c = fixtures::random_certified(rng);
    const auto d = DemandConfig::from_f1(0.05 + 0.9 * u(rng));
    for (Exit i : kExits) {
      const double rj = i == Exit::One ? d.f2 : d.f1;
      for (int k = 0; k < 10; ++k) {
        const double h = 1e-6;
        const double y = h + (rj - 2 * h) * u(rng);
        const auto lo = best_response(i, y - h, d, c), hi = best_response(i, y + h, d, c);
        if (lo.which != ResponseCase::Interior || hi.which != ResponseCase::Interior) continue;
        ++interior;
        const double slope = (hi.steadfast - lo.steadfast) / (2 * h);
        CHECK(slope >= -1e-8);
        CHECK(slope <= 1.0 + 1e-8);
      }
    }
  }
  CHECK(interior > 100);
}

TEST_CASE("oracle agrees with the solver on certified instances") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 20; ++n) {
    const auto c = fixtures::random_certified(rng);
    const auto d = DemandConfig::from_f1(u(rng));
    const auto eq = solve_equilibrium(d, c);
    CHECK(eq.converged);
    CHECK(eq.residual <= 1e-8);
    const auto o = grid_oracle(d, c, {}, 1e-3);
    REQUIRE(o.status == OracleStatus::Found);
    CHECK(o.candidates.size() == 1);
    CHECK(fixtures::max_abs_diff(o.candidates.front(), eq.flow) <= 2e-3);
  }
}

TEST_CASE("oracle finds an equilibrium without the uniqueness conditions") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 10; ++n) {
    const auto c = CostParams::make({1.0, 3.0, 1.0 + u(rng)}, {1.0, 3.0, 1.0 + u(rng)});
    const auto d = DemandConfig::from_f1(u(rng));
    const auto o = grid_oracle(d, c, {}, 2e-3);
    CHECK(o.candidates.size() >= 1);
    const auto r = solve_with_fallback(d, c);
    CHECK(r.residual <= 1e-6);
  }
}

TEST_CASE("oracle rejects bad steps") {
  const auto d = DemandConfig::make(0.5, 0.5);
  CHECK_THROWS_AS(grid_oracle(d, fixtures::paper_costs(), {}, 0.0), ValidationError);
  CHECK_THROWS_AS(grid_oracle(d, fixtures::paper_costs(), {}, 0.02), ValidationError);
}

TEST_CASE("equilibria are invariant under coefficient scaling") {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 30; ++n) {
    const auto c = fixtures::random_certified(rng);
    const auto d = DemandConfig::from_f1(u(rng));
    const auto base = solve_equilibrium(d, c).flow;
    for (double lambda : {0.5, 3.0, 10.0}) {
      const auto s = solve_equilibrium(d, c.scaled(lambda));
      CHECK(s.converged);
      CHECK(fixtures::max_abs_diff(s.flow, base) <= 1e-9);
    }
  }
}

TEST_CASE("solver output is feasible and reproducible") {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 50; ++n) {
    const auto c = fixtures::random_certified(rng);
    const auto d = DemandConfig::from_f1(u(rng));
    const auto a = solve_equilibrium(d, c), b = solve_equilibrium(d, c);
    CHECK_FALSE(validate_flow(a.flow, d).has_value());
    CHECK(a.flow.as_array() == b.flow.as_array());
    CHECK(a.iterations == b.iterations);
  }
}

TEST_CASE("solver options are validated") {
  SolverOptions o;
  o.max_iters = 0;
  CHECK_THROWS_AS(o.validate(), ValidationError);
  o = {};
  o.tol = -1.0;
  CHECK_THROWS_AS(solve_equilibrium(DemandConfig::make(0.5, 0.5), fixtures::paper_costs(), {}, o), ValidationError);
}
