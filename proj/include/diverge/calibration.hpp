#pragma once

// Fitting cost coefficients to measured lane-choice splits.
//
// Each observation contributes four Wardrop products per data point
// (xs_i * gap_i and -xb_i * gap_i for both exits). A product above eps is a
// violated equilibrium condition. Calibration minimizes the number of
// violated conditions over a box of coefficients. For fixed coefficients the
// big-M binaries of the equivalent MILP are fully determined, so the count is
// exactly the MILP objective.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "diverge/model.hpp"

namespace diverge {

/// Conservation tolerance for measured flows.
inline constexpr double kObservationTol = 1e-6;

struct Observation {
  double f1 = 0.0;
  FlowVector flow;
  std::optional<double> total;

  DemandConfig demand() const;
  void validate() const;
};

using ObservationSet = std::vector<Observation>;

struct ViolationReport {
  int count = 0;
  double hinge = 0.0;  ///< sum of positive products
  /// Four entries per observation, ordered (exit 1 steadfast, exit 1 bypass,
  /// exit 2 steadfast, exit 2 bypass).
  std::vector<double> per_constraint;
};

ViolationReport violation_count(const CostParams& c, const ObservationSet& obs, double eps);

struct SearchBox {
  double ct_lo = 1.0, ct_hi = 100.0;
  double cc_lo = 1.0, cc_hi = 100.0;
  double gamma_lo = 1.0, gamma_hi = 20.0;
};

struct CalibOptions {
  double eps = 1e-6;
  double big_m = 1e6;
  bool symmetric = false;
  int starts = 64;          ///< low-discrepancy starting points
  int max_iters = 500;      ///< pattern-search polls per start
  double initial_step = 1.0;
  double min_step = 1e-4;
  int rotations = 4;        ///< random orthonormal bases polled after the axes
  SearchBox box;
  std::uint64_t seed = 0x5eed;  ///< polling directions
  /// Extra starting points, searched in addition to the generated ones.
  std::vector<CostParams> seeds;
  /// Also start from a least-squares fit of the observations whose exits use
  /// both streams.
  bool least_squares_start = true;

  void validate() const;
};

struct CalibrationResult {
  CostParams params;
  int violations = 0;
  double hinge = 0.0;
  std::vector<double> per_constraint;
  bool symmetric = false;
  int starts = 0;             ///< starts actually searched
  int budget_exhausted = 0;   ///< starts stopped by max_iters rather than min_step
  std::vector<std::string> diagnostics;
};

/// Throws ValidationError on an empty or invalid observation set.
CalibrationResult calibrate(const ObservationSet& obs, const CalibOptions& opts = {});

/// Coefficients of gap_i as a linear form in (ct1, ct2, cc1, cc2, D1, D2),
/// where D_i = gamma_i * ct_j.
std::array<double, 6> gap_coefficients(const FlowVector& x, Exit i);

struct MilpSummary {
  int binaries = 0;
  int big_m_rows = 0;
  int detour_rows = 0;  ///< D_i >= ct_j
  int lower_bound_rows = 0;
  int symmetry_rows = 0;
};

/// Writes the calibration MILP in CPLEX LP format.
MilpSummary write_milp(std::ostream& out, const ObservationSet& obs, const CalibOptions& opts);

/// Writes the MILP to `path` and a recovery note to `path` + ".recover".
/// Both files are replaced atomically. Throws std::runtime_error naming the
/// path on I/O failure.
MilpSummary export_milp(const ObservationSet& obs, const CalibOptions& opts,
                        const std::filesystem::path& path);

}  // namespace diverge
