#pragma once

// Macroscopic cost model of a two-exit traffic diverge.
//
// Every vehicle heading to exit i either picks the exit-i lane far upstream
// ("steadfast", flow xs_i) or travels in the other exit's lane and changes
// lanes right at the diverge ("bypass", flow xb_i). All flows are fractions
// of the total demand.

#include <array>
#include <optional>
#include <stdexcept>
#include <string>

namespace diverge {

/// Tolerance used for demand normalization and flow conservation.
inline constexpr double kModelTol = 1e-9;

/// Raised when a value violates one of the model invariants.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Exit : int { One = 0, Two = 1 };

inline constexpr std::array<Exit, 2> kExits{Exit::One, Exit::Two};

constexpr int index(Exit e) { return static_cast<int>(e); }
constexpr Exit other(Exit e) { return e == Exit::One ? Exit::Two : Exit::One; }
/// 1-based exit number, as used in file formats and diagnostics.
constexpr int number(Exit e) { return index(e) + 1; }

struct DemandConfig {
  double f1 = 0.0;
  double f2 = 0.0;
  /// Total demand in veh/h. Metadata only, never enters a cost.
  std::optional<double> total;

  /// Validating constructor; throws ValidationError.
  static DemandConfig make(double f1, double f2, std::optional<double> total = std::nullopt);
  /// {f1, 1 - f1}.
  static DemandConfig from_f1(double f1, std::optional<double> total = std::nullopt);

  double fraction(Exit e) const { return e == Exit::One ? f1 : f2; }
  void validate() const;
};

struct ExitCoefficients {
  double ct = 1.0;     ///< traversal coefficient
  double cc = 1.0;     ///< cross-effect (lane-change interference) coefficient
  double gamma = 1.0;  ///< bypass detour multiplier

  friend bool operator==(const ExitCoefficients&, const ExitCoefficients&) = default;
};

struct CostParams {
  std::array<ExitCoefficients, 2> exits{};

  static CostParams symmetric(double ct, double cc, double gamma);
  static CostParams make(const ExitCoefficients& exit1, const ExitCoefficients& exit2);

  const ExitCoefficients& operator[](Exit e) const { return exits[index(e)]; }
  ExitCoefficients& operator[](Exit e) { return exits[index(e)]; }

  /// Multiplies the cost coefficients ct and cc by lambda. gamma is a ratio
  /// between path lengths and is left unchanged, so every cost scales by lambda.
  CostParams scaled(double lambda) const;
  double max_component() const;
  void validate() const;

  friend bool operator==(const CostParams&, const CostParams&) = default;
};

struct FlowVector {
  std::array<double, 2> steadfast{};
  std::array<double, 2> bypass{};

  static FlowVector of(double x1s, double x1b, double x2s, double x2b) {
    return FlowVector{{x1s, x2s}, {x1b, x2b}};
  }

  double xs(Exit e) const { return steadfast[index(e)]; }
  double xb(Exit e) const { return bypass[index(e)]; }

  /// Component order (x1s, x1b, x2s, x2b).
  std::array<double, 4> as_array() const { return {steadfast[0], bypass[0], steadfast[1], bypass[1]}; }
  static FlowVector from_array(const std::array<double, 4>& a) { return of(a[0], a[1], a[2], a[3]); }

  friend bool operator==(const FlowVector&, const FlowVector&) = default;
};

/// Fixed occupancy added to each stream before costs are evaluated. Models
/// commanded vehicles whose lane choice is not part of the equilibrium.
struct OccupancyOffsets {
  std::array<double, 2> steadfast{};
  std::array<double, 2> bypass{};

  double os(Exit e) const { return steadfast[index(e)]; }
  double ob(Exit e) const { return bypass[index(e)]; }
  bool is_zero() const {
    return steadfast[0] == 0.0 && steadfast[1] == 0.0 && bypass[0] == 0.0 && bypass[1] == 0.0;
  }
  void validate() const;

  friend bool operator==(const OccupancyOffsets&, const OccupancyOffsets&) = default;
};

/// Demand of exit e left for the equilibrating (non-commanded) vehicles.
double residual_demand(Exit e, const DemandConfig& demand, const OccupancyOffsets& offsets);

/// x with the offsets folded into the matching streams.
FlowVector add_offsets(const FlowVector& x, const OccupancyOffsets& offsets);

struct FlowViolation {
  enum class Kind { Negative, Conservation };
  Exit exit = Exit::One;
  Kind kind = Kind::Conservation;
  /// Signed excess for conservation (xs + xb - residual), the negative
  /// component for nonnegativity.
  double magnitude = 0.0;

  std::string describe() const;
};

/// Nonnegativity and conservation check; nullopt means feasible.
std::optional<FlowViolation> validate_flow(const FlowVector& x, const DemandConfig& demand,
                                           const OccupancyOffsets& offsets = {},
                                           double tol = kModelTol);

/// Cost per unit flow of the steadfast vehicles of exit i.
double steadfast_cost(Exit i, const FlowVector& x, const CostParams& c,
                      const OccupancyOffsets& offsets = {});
/// Cost per unit flow of the vehicles that bypass to exit i.
double bypass_cost(Exit i, const FlowVector& x, const CostParams& c,
                   const OccupancyOffsets& offsets = {});
/// steadfast_cost - bypass_cost. Positive means bypassing is cheaper.
double cost_gap(Exit i, const FlowVector& x, const CostParams& c,
                const OccupancyOffsets& offsets = {});

/// Partial derivatives of a cost with respect to (x1s, x1b, x2s, x2b).
using FlowGradient = std::array<double, 4>;

struct CostPartials {
  FlowGradient steadfast{};
  FlowGradient bypass{};
};

CostPartials cost_partials(Exit i, const FlowVector& x, const CostParams& c,
                           const OccupancyOffsets& offsets = {});

struct UniquenessReport {
  std::array<bool, 2> ct_ge_cc{};      ///< ct_i >= cc_i
  std::array<bool, 2> gamma_margin{};  ///< (gamma_i - 1) * ct_j >= cc_i
  bool all_hold = false;
};

/// Sufficient conditions for a unique equilibrium. Non-strict, no tolerance.
UniquenessReport check_uniqueness_conditions(const CostParams& c);

}  // namespace diverge
