#pragma once

// Scenario documents and CSV files exchanged by the command-line tool.
//
// A scenario is a JSON object:
//
//   {
//     "demand":  {"f1": 0.65, "f2": 0.35, "d": 3000},
//     "costs":   {"exit1": {"ct": 1, "cc": 1, "gamma": 2.7},
//                 "exit2": {"ct": 1, "cc": 1, "gamma": 2.7}},
//     "offsets": {"exit1": {"steadfast": 0, "bypass": 0},
//                 "exit2": {"steadfast": 0, "bypass": 0}},
//     "solver":  {"tol": 1e-10, "max_iters": 10000, "bisect_tol": 1e-12}
//   }
//
// "demand.d", "offsets" and "solver" (and each key inside them) are optional.
// Unknown keys are rejected.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "diverge/calibration.hpp"
#include "diverge/equilibrium.hpp"
#include "diverge/model.hpp"
#include "diverge/social.hpp"
#include "diverge/stackelberg.hpp"

namespace diverge {

/// Malformed document (syntax, types, unknown keys).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Scenario {
  DemandConfig demand;
  CostParams costs;
  OccupancyOffsets offsets;
  SolverOptions solver;
};

/// Throws ParseError for malformed input and ValidationError for invariant
/// breaches; both name the offending key.
Scenario parse_scenario(std::string_view text);

std::string read_file(const std::filesystem::path& path);
Scenario load_scenario(const std::filesystem::path& path);

/// Fixed 9-significant-digit rendering used by every output file.
std::string format_number(double v);

/// Header `f1,x1s,x1b,x2s,x2b[,d]`.
ObservationSet parse_observations_csv(std::string_view text);
std::string observations_csv(const ObservationSet& obs);

/// Header `f1,x1s,x1b,x2s,x2b,j1s,j1b,j2s,j2b,residual`.
std::string equilibrium_csv_header();
std::string equilibrium_csv_row(const DemandConfig& demand, const EquilibriumResult& eq);

/// Header `beta,x1s,x1b,x2s,x2b,w,z,j_soc,residual,converged`.
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Header `f1,eq_x1s,eq_x1b,eq_x2s,eq_x2b,opt_x1s,opt_x1b,opt_x2s,opt_x2b,eq_cost,opt_cost,ratio`.
std::string social_csv_header();
std::string social_csv_row(double f1, const SocialResult& r);

/// Fitted coefficients as a scenario "costs" fragment plus fit diagnostics.
std::string calibration_json(const CalibrationResult& r);

}  // namespace diverge
