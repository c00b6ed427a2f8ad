#include "diverge/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>
#include <tuple>

#include <Eigen/Dense>

#include "diverge/atomic_file.hpp"

namespace diverge {

DemandConfig Observation::demand() const { return DemandConfig{f1, 1.0 - f1, total}; }

void Observation::validate() const {
  if (!(f1 >= 0.0 && f1 <= 1.0)) throw ValidationError("observation f1 must lie in [0, 1]");
  if (auto v = validate_flow(flow, demand(), {}, kObservationTol))
    throw ValidationError("observation with f1=" + std::to_string(f1) + ": " + v->describe());
}

ViolationReport violation_count(const CostParams& c, const ObservationSet& obs, double eps) {
  ViolationReport r;
  r.per_constraint.reserve(obs.size() * 4);
  for (const auto& o : obs) {
    for (Exit i : kExits) {
      const double gap = cost_gap(i, o.flow, c);
      for (double product : {o.flow.xs(i) * gap, -o.flow.xb(i) * gap}) {
        r.per_constraint.push_back(product);
        if (product > eps) ++r.count;
        if (product > 0.0) r.hinge += product;
      }
    }
  }
  return r;
}

void CalibOptions::validate() const {
  if (!(eps > 0.0)) throw ValidationError("calibration eps must be > 0");
  if (!(big_m > 0.0)) throw ValidationError("calibration big M must be > 0");
  if (starts < 0) throw ValidationError("calibration start count must be >= 0");
  if (max_iters < 1) throw ValidationError("calibration iteration budget must be >= 1");
  if (!(initial_step > 0.0 && min_step > 0.0 && min_step <= initial_step))
    throw ValidationError("calibration steps must satisfy 0 < min_step <= initial_step");
  const auto& b = box;
  if (!(1.0 <= b.ct_lo && b.ct_lo <= b.ct_hi && 1.0 <= b.cc_lo && b.cc_lo <= b.cc_hi &&
        1.0 <= b.gamma_lo && b.gamma_lo <= b.gamma_hi))
    throw ValidationError("calibration box must have lower bounds >= 1 and lo <= hi");
}

namespace {

struct Score {
  int count = 0;
  double hinge = 0.0;
};

bool operator<(const Score& a, const Score& b) {
  return std::tie(a.count, a.hinge) < std::tie(b.count, b.hinge);
}

// Search coordinates: (ct, cc, gamma) when symmetric, otherwise
// (ct1, ct2, cc1, cc2, gamma1, gamma2).
class Parameterization {
 public:
  explicit Parameterization(const CalibOptions& opts) : symmetric_(opts.symmetric) {
    const auto& b = opts.box;
    if (symmetric_) {
      lo_ = {b.ct_lo, b.cc_lo, b.gamma_lo};
      hi_ = {b.ct_hi, b.cc_hi, b.gamma_hi};
    } else {
      lo_ = {b.ct_lo, b.ct_lo, b.cc_lo, b.cc_lo, b.gamma_lo, b.gamma_lo};
      hi_ = {b.ct_hi, b.ct_hi, b.cc_hi, b.cc_hi, b.gamma_hi, b.gamma_hi};
    }
  }

  std::size_t dim() const { return lo_.size(); }
  double lo(std::size_t d) const { return lo_[d]; }
  double hi(std::size_t d) const { return hi_[d]; }

  CostParams params(const std::vector<double>& p) const {
    CostParams c;
    if (symmetric_) {
      c.exits[0] = c.exits[1] = ExitCoefficients{p[0], p[1], p[2]};
    } else {
      c.exits[0] = ExitCoefficients{p[0], p[2], p[4]};
      c.exits[1] = ExitCoefficients{p[1], p[3], p[5]};
    }
    return c;
  }

  std::vector<double> point(const CostParams& c) const {
    std::vector<double> p;
    if (symmetric_) {
      // A seed that is not symmetric is averaged onto the tie.
      p = {0.5 * (c.exits[0].ct + c.exits[1].ct), 0.5 * (c.exits[0].cc + c.exits[1].cc),
           0.5 * (c.exits[0].gamma + c.exits[1].gamma)};
    } else {
      p = {c.exits[0].ct, c.exits[1].ct, c.exits[0].cc, c.exits[1].cc, c.exits[0].gamma,
           c.exits[1].gamma};
    }
    clamp(p);
    return p;
  }

  void clamp(std::vector<double>& p) const {
    for (std::size_t d = 0; d < p.size(); ++d) p[d] = std::clamp(p[d], lo_[d], hi_[d]);
  }

 private:
  bool symmetric_;
  std::vector<double> lo_, hi_;
};

double radical_inverse(unsigned long k, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (k > 0) {
    r += static_cast<double>(k % base) * f;
    k /= base;
    f *= inv;
  }
  return r;
}

struct SearchOutcome {
  std::vector<double> point;
  Score score;
  bool budget_exhausted = false;
};

enum class Phase {
  /// Sum of squared positive products. Smooth, so the mesh can follow the
  /// narrow valley towards the zero set of the equilibrium conditions.
  Surrogate,
  /// (violation count, hinge) in lexicographic order.
  Count,
};

// Compass search with a mesh that halves on failure, plus Hooke-Jeeves style
// pattern moves along each successful displacement.
// Each poll tries the coordinate directions first, then a few orthonormal
// bases drawn at random: the valleys of the violation landscape are not axis
// aligned and coordinate polling alone stalls on their walls.
class PatternSearch {
 public:
  PatternSearch(const Parameterization& param, const ObservationSet& obs, const CalibOptions& opts,
                std::mt19937_64& rng)
      : param_(param), obs_(obs), opts_(opts), rng_(rng) {}

  Score score(const std::vector<double>& p, Phase phase) const {
    const auto r = violation_count(param_.params(p), obs_, opts_.eps);
    if (phase == Phase::Count) return {r.count, r.hinge};
    double sq = 0.0;
    for (double v : r.per_constraint) {
      if (v > 0.0) sq += v * v;
    }
    return {0, sq};
  }

  SearchOutcome run(std::vector<double> p, Phase phase) {
    param_.clamp(p);
    Score best = score(p, phase);
    double step = opts_.initial_step;
    int polls = 0;
    const std::size_t n = param_.dim();
    while (step >= opts_.min_step) {
      if (polls >= opts_.max_iters) return {p, best, true};
      ++polls;
      if (best.count == 0 && best.hinge == 0.0) break;

      auto directions = coordinate_directions(n);
      for (int r = 0; r < opts_.rotations; ++r) {
        auto rotated = random_basis(n);
        directions.insert(directions.end(), rotated.begin(), rotated.end());
      }

      bool improved = false;
      for (const auto& d : directions) {
        std::vector<double> q = p;
        for (std::size_t k = 0; k < n; ++k) q[k] += step * d[k];
        param_.clamp(q);
        if (q == p) continue;
        const Score s = score(q, phase);
        if (s < best) {
          // Pattern move: keep doubling the successful displacement while it
          // pays off.
          std::vector<double> delta(n);
          for (std::size_t k = 0; k < n; ++k) delta[k] = q[k] - p[k];
          p = std::move(q);
          best = s;
          for (int grow = 0; grow < 30; ++grow) {
            std::vector<double> r = p;
            for (std::size_t k = 0; k < n; ++k) r[k] += delta[k];
            param_.clamp(r);
            if (r == p) break;
            const Score sr = score(r, phase);
            if (!(sr < best)) break;
            for (std::size_t k = 0; k < n; ++k) delta[k] = 2.0 * (r[k] - p[k]);
            p = std::move(r);
            best = sr;
          }
          improved = true;
          break;
        }
      }
      if (!improved) step *= 0.5;
    }
    return {p, best, false};
  }

 private:
  static std::vector<std::vector<double>> coordinate_directions(std::size_t n) {
    std::vector<std::vector<double>> dirs;
    for (std::size_t k = 0; k < n; ++k) {
      for (double sign : {1.0, -1.0}) {
        std::vector<double> d(n, 0.0);
        d[k] = sign;
        dirs.push_back(std::move(d));
      }
    }
    return dirs;
  }

  // Gram-Schmidt on uniform draws; std::normal_distribution is avoided since
  // its output is not specified across standard libraries.
  std::vector<std::vector<double>> random_basis(std::size_t n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::vector<double>> basis;
    while (basis.size() < n) {
      std::vector<double> v(n);
      for (auto& x : v) x = u(rng_);
      for (const auto& b : basis) {
        double dot = 0.0;
        for (std::size_t k = 0; k < n; ++k) dot += v[k] * b[k];
        for (std::size_t k = 0; k < n; ++k) v[k] -= dot * b[k];
      }
      double norm = 0.0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
      if (norm < 1e-3) continue;
      for (auto& x : v) x /= norm;
      basis.push_back(v);
    }
    std::vector<std::vector<double>> dirs;
    for (auto& b : basis) {
      std::vector<double> neg = b;
      for (auto& x : neg) x = -x;
      dirs.push_back(std::move(b));
      dirs.push_back(std::move(neg));
    }
    return dirs;
  }

  const Parameterization& param_;
  const ObservationSet& obs_;
  const CalibOptions& opts_;
  std::mt19937_64& rng_;
};

// Equilibrium data with both streams of an exit in use pin that exit's gap
// to zero. With ct1 fixed to 1 the gaps are linear in the remaining
// coefficients (using D_i = gamma_i * ct_j), so weighted least squares over
// those rows gives a starting point close to the zero-violation set.
std::optional<CostParams> least_squares_start(const ObservationSet& obs, bool symmetric) {
  const int unknowns = symmetric ? 2 : 5;
  std::vector<std::array<double, 6>> rows;
  for (const auto& o : obs) {
    for (Exit i : kExits) {
      const double weight = std::sqrt(std::max(0.0, o.flow.xs(i) * o.flow.xb(i)));
      if (weight < 1e-6) continue;
      auto a = gap_coefficients(o.flow, i);
      for (auto& v : a) v *= weight;
      rows.push_back(a);
    }
  }
  if (static_cast<int>(rows.size()) < unknowns) return std::nullopt;

  Eigen::MatrixXd a(rows.size(), unknowns);
  Eigen::VectorXd rhs(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& g = rows[r];
    if (symmetric) {
      rhs(r) = -(g[0] + g[1]);
      a(r, 0) = g[2] + g[3];
      a(r, 1) = g[4] + g[5];
    } else {
      rhs(r) = -g[0];
      for (int k = 0; k < 5; ++k) a(r, k) = g[k + 1];
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < unknowns) return std::nullopt;
  const Eigen::VectorXd u = qr.solve(rhs);

  CostParams c;
  if (symmetric) {
    c.exits[0] = c.exits[1] = ExitCoefficients{1.0, u(0), u(1)};
  } else {
    // u = (ct2, cc1, cc2, D1, D2)
    c.exits[0] = ExitCoefficients{1.0, u(1), u(3) / u(0)};
    c.exits[1] = ExitCoefficients{u(0), u(2), u(4)};
  }
  for (const auto& e : c.exits) {
    if (!(e.ct > 0.0 && e.cc > 0.0 && std::isfinite(e.gamma))) return std::nullopt;
  }
  // Rescale so the smallest cost coefficient is exactly 1; gamma is a ratio
  // and is clamped into the box by the caller.
  double smallest = c.exits[0].ct;
  for (const auto& e : c.exits) smallest = std::min({smallest, e.ct, e.cc});
  return c.scaled(1.0 / smallest);
}

// Cost coefficients can be scaled down until one of them reaches 1 without
// increasing any positive product, so the violation count cannot grow.
CostParams normalize_scale(const CostParams& c, const SearchBox& box) {
  double smallest = c.exits[0].ct;
  for (const auto& e : c.exits) smallest = std::min({smallest, e.ct, e.cc});
  if (!(smallest > 1.0)) return c;
  const double lambda = 1.0 / smallest;
  CostParams scaled = c.scaled(lambda);
  for (const auto& e : scaled.exits) {
    if (e.ct < box.ct_lo || e.cc < box.cc_lo) return c;
  }
  return scaled;
}

}  // namespace

CalibrationResult calibrate(const ObservationSet& obs, const CalibOptions& opts) {
  if (obs.empty()) throw ValidationError("calibration needs at least one observation");
  for (const auto& o : obs) o.validate();
  opts.validate();

  const Parameterization param(opts);
  std::mt19937_64 rng(opts.seed);
  PatternSearch search(param, obs, opts, rng);

  std::vector<std::vector<double>> starts;
  for (const auto& s : opts.seeds) starts.push_back(param.point(s));
  if (opts.least_squares_start) {
    if (auto ls = least_squares_start(obs, opts.symmetric)) starts.push_back(param.point(*ls));
  }
  static constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13};
  for (int k = 1; k <= opts.starts; ++k) {
    std::vector<double> p(param.dim());
    for (std::size_t d = 0; d < p.size(); ++d) {
      const double u = radical_inverse(static_cast<unsigned long>(k), kPrimes[d]);
      p[d] = param.lo(d) + u * (param.hi(d) - param.lo(d));
    }
    starts.push_back(std::move(p));
  }

  CalibrationResult out;
  out.symmetric = opts.symmetric;
  std::optional<SearchOutcome> best;
  auto consider = [&best](SearchOutcome r) {
    const bool wins = !best || r.score < best->score ||
                      (!(best->score < r.score) && r.point < best->point);
    if (wins) best = std::move(r);
  };
  for (const auto& start : starts) {
    ++out.starts;
    // The start itself competes, so a seed is never lost to a worse descent.
    consider({start, search.score(start, Phase::Count), false});
    const SearchOutcome warm = search.run(start, Phase::Surrogate);
    SearchOutcome polished = search.run(warm.point, Phase::Count);
    if (warm.budget_exhausted || polished.budget_exhausted) ++out.budget_exhausted;
    consider(std::move(polished));
    if (best->score.count == 0 && best->score.hinge == 0.0) break;
  }

  out.params = normalize_scale(param.params(best->point), opts.box);
  const ViolationReport report = violation_count(out.params, obs, opts.eps);
  out.violations = report.count;
  out.hinge = report.hinge;
  out.per_constraint = report.per_constraint;

  if (out.violations > 0) {
    out.diagnostics.push_back("best point still violates " + std::to_string(out.violations) + " of " +
                              std::to_string(report.per_constraint.size()) + " conditions");
  }
  if (out.budget_exhausted > 0) {
    out.diagnostics.push_back(std::to_string(out.budget_exhausted) + " of " +
                              std::to_string(out.starts) +
                              " starts hit the iteration budget before the mesh converged");
  }
  return out;
}

std::array<double, 6> gap_coefficients(const FlowVector& x, Exit i) {
  // Variable order (ct1, ct2, cc1, cc2, D1, D2).
  const Exit j = other(i);
  const double xs_i = x.xs(i), xb_i = x.xb(i), xs_j = x.xs(j), xb_j = x.xb(j);
  std::array<double, 6> a{};
  a[0 + index(i)] += xs_i + xb_j;
  a[2 + index(i)] += xb_i * (xs_i + xb_j);
  a[0 + index(j)] -= xs_j;
  a[4 + index(i)] -= xb_i;
  a[2 + index(j)] -= xb_j * (xs_j + xb_i);
  return a;
}

namespace {

constexpr const char* kVarNames[6] = {"ct1", "ct2", "cc1", "cc2", "D1", "D2"};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string linear_form(const std::array<double, 6>& a, double sign) {
  std::string s;
  for (int k = 0; k < 6; ++k) {
    const double v = sign * a[k];
    if (v == 0.0) continue;
    s += (v < 0.0 ? " - " : " + ");
    s += num(std::abs(v));
    s += ' ';
    s += kVarNames[k];
  }
  return s.empty() ? " 0 ct1" : s;
}

}  // namespace

MilpSummary write_milp(std::ostream& out, const ObservationSet& obs, const CalibOptions& opts) {
  if (obs.empty()) throw ValidationError("MILP export needs at least one observation");
  for (const auto& o : obs) o.validate();
  opts.validate();

  MilpSummary summary;
  const std::string m = num(opts.big_m);
  const std::string eps = num(opts.eps);
  const std::string m_minus_eps = num(opts.big_m - opts.eps);

  out << "\\ Diverge cost calibration, " << obs.size() << " observations\n";
  out << "\\ D1 = gamma1 * ct2, D2 = gamma2 * ct1\n";
  out << "\\ z = 1 marks a violated equilibrium condition (product > eps)\n";
  out << "Minimize\n obj:";
  bool first = true;
  for (std::size_t k = 1; k <= obs.size(); ++k) {
    for (int i = 1; i <= 2; ++i) {
      for (const char* kind : {"s", "b"}) {
        out << (first ? " " : " + ") << "z_" << kind << '_' << k << '_' << i;
        first = false;
      }
    }
  }
  out << "\nSubject To\n";

  for (std::size_t k = 0; k < obs.size(); ++k) {
    const FlowVector& x = obs[k].flow;
    for (Exit i : kExits) {
      const auto gap = gap_coefficients(x, i);
      const struct {
        const char* kind;
        double weight;
      } products[] = {{"s", x.xs(i)}, {"b", -x.xb(i)}};
      for (const auto& p : products) {
        std::array<double, 6> a{};
        for (int v = 0; v < 6; ++v) a[v] = p.weight * gap[v];
        const std::string z = std::string("z_") + p.kind + '_' + std::to_string(k + 1) + '_' +
                              std::to_string(number(i));
        // z = 0 forces product <= eps, z = 1 forces product >= eps.
        out << ' ' << "on_" << z << ':' << linear_form(a, 1.0) << " - " << m << ' ' << z
            << " <= " << eps << '\n';
        out << ' ' << "off_" << z << ':' << linear_form(a, -1.0) << " + " << m << ' ' << z
            << " <= " << m_minus_eps << '\n';
        summary.big_m_rows += 2;
        ++summary.binaries;
      }
    }
  }

  out << " detour_1: D1 - ct2 >= 0\n";
  out << " detour_2: D2 - ct1 >= 0\n";
  summary.detour_rows = 2;
  for (const char* v : kVarNames) {
    out << " lb_" << v << ": " << v << " >= 1\n";
    ++summary.lower_bound_rows;
  }
  if (opts.symmetric) {
    out << " sym_ct: ct1 - ct2 = 0\n";
    out << " sym_cc: cc1 - cc2 = 0\n";
    out << " sym_D: D1 - D2 = 0\n";
    summary.symmetry_rows = 3;
  }

  out << "Binaries\n";
  for (std::size_t k = 1; k <= obs.size(); ++k) {
    for (int i = 1; i <= 2; ++i) out << " z_s_" << k << '_' << i << " z_b_" << k << '_' << i << '\n';
  }
  out << "End\n";
  return summary;
}

MilpSummary export_milp(const ObservationSet& obs, const CalibOptions& opts,
                        const std::filesystem::path& path) {
  std::ostringstream lp;
  const MilpSummary summary = write_milp(lp, obs, opts);
  std::ostringstream note;
  note << "# Recover detour multipliers from a solution of " << path.filename().string() << "\n";
  note << "gamma1 = D1 / ct2\n";
  note << "gamma2 = D2 / ct1\n";
  note << "binaries = " << summary.binaries << "\n";
  note << "eps = " << num(opts.eps) << "\n";
  note << "big_m = " << num(opts.big_m) << "\n";
  write_file_atomic(path, lp.str());
  std::filesystem::path sidecar = path;
  sidecar += ".recover";
  write_file_atomic(sidecar, note.str());
  return summary;
}

}  // namespace diverge
