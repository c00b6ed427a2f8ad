#include "diverge/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

namespace diverge {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ParseError("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

const json& object_at(const json& obj, const char* key, const std::string& where) {
  const std::string path = where.empty() ? key : where + "." + key;
  if (!obj.contains(key)) throw ParseError("missing key '" + path + "'");
  const json& v = obj.at(key);
  if (!v.is_object()) throw ParseError("'" + path + "' must be an object");
  return v;
}

double number_at(const json& obj, const char* key, const std::string& where) {
  const std::string path = where + "." + key;
  if (!obj.contains(key)) throw ParseError("missing key '" + path + "'");
  const json& v = obj.at(key);
  if (!v.is_number()) throw ParseError("'" + path + "' must be a number");
  return v.get<double>();
}

std::optional<double> optional_number(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) return std::nullopt;
  return number_at(obj, key, where);
}

// Rethrows a ValidationError with the scenario key prefixed.
template <typename F>
void validated(const char* key, F&& check) {
  try {
    check();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(key) + ": " + e.what());
  }
}

ExitCoefficients parse_exit_costs(const json& costs, const char* exit) {
  const std::string where = std::string("costs.") + exit;
  const json& e = object_at(costs, exit, "costs");
  reject_unknown(e, where, {"ct", "cc", "gamma"});
  return {number_at(e, "ct", where), number_at(e, "cc", where), number_at(e, "gamma", where)};
}

}  // namespace

Scenario parse_scenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed scenario document: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("scenario document must be a JSON object");
  reject_unknown(doc, "", {"demand", "costs", "offsets", "solver"});

  Scenario s;
  const json& demand = object_at(doc, "demand", "");
  reject_unknown(demand, "demand", {"f1", "f2", "d"});
  s.demand.f1 = number_at(demand, "f1", "demand");
  s.demand.f2 = number_at(demand, "f2", "demand");
  s.demand.total = optional_number(demand, "d", "demand");

  const json& costs = object_at(doc, "costs", "");
  reject_unknown(costs, "costs", {"exit1", "exit2"});
  s.costs.exits[0] = parse_exit_costs(costs, "exit1");
  s.costs.exits[1] = parse_exit_costs(costs, "exit2");

  if (doc.contains("offsets")) {
    const json& offsets = object_at(doc, "offsets", "");
    reject_unknown(offsets, "offsets", {"exit1", "exit2"});
    for (Exit e : kExits) {
      const std::string name = "exit" + std::to_string(number(e));
      if (!offsets.contains(name)) continue;
      const std::string where = "offsets." + name;
      const json& o = object_at(offsets, name.c_str(), "offsets");
      reject_unknown(o, where, {"steadfast", "bypass"});
      s.offsets.steadfast[index(e)] = optional_number(o, "steadfast", where).value_or(0.0);
      s.offsets.bypass[index(e)] = optional_number(o, "bypass", where).value_or(0.0);
    }
  }

  if (doc.contains("solver")) {
    const json& solver = object_at(doc, "solver", "");
    reject_unknown(solver, "solver", {"tol", "max_iters", "bisect_tol"});
    s.solver.tol = optional_number(solver, "tol", "solver").value_or(s.solver.tol);
    s.solver.bisect_tol = optional_number(solver, "bisect_tol", "solver").value_or(s.solver.bisect_tol);
    if (solver.contains("max_iters")) {
      const json& v = solver.at("max_iters");
      if (!v.is_number_integer()) throw ParseError("'solver.max_iters' must be an integer");
      s.solver.max_iters = v.get<int>();
    }
  }

  validated("demand", [&] { s.demand.validate(); });
  validated("costs", [&] { s.costs.validate(); });
  validated("offsets", [&] {
    s.offsets.validate();
    for (Exit e : kExits) {
      if (residual_demand(e, s.demand, s.offsets) < -kModelTol)
        throw ValidationError("offsets exceed the demand of exit " + std::to_string(number(e)));
    }
  });
  validated("solver", [&] { s.solver.validate(); });
  return s;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed for " + path.string());
  return ss.str();
}

Scenario load_scenario(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_scenario(text);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string format_number(double v) {
  if (v == 0.0) return "0";  // also folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

namespace {

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& field, std::size_t line_no) {
  const char* begin = field.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (field.empty() || end != begin + field.size() || errno == ERANGE || !std::isfinite(v))
    throw ParseError("line " + std::to_string(line_no) + ": '" + field + "' is not a number");
  return v;
}

std::string join_row(std::initializer_list<double> values) {
  std::string s;
  bool first = true;
  for (double v : values) {
    if (!first) s += ',';
    s += format_number(v);
    first = false;
  }
  return s;
}

}  // namespace

ObservationSet parse_observations_csv(std::string_view text) {
  ObservationSet obs;
  std::size_t line_no = 0;
  bool with_total = false;
  bool header_seen = false;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    if (!header_seen) {
      if (line == "f1,x1s,x1b,x2s,x2b") {
        with_total = false;
      } else if (line == "f1,x1s,x1b,x2s,x2b,d") {
        with_total = true;
      } else {
        throw ParseError("line " + std::to_string(line_no) +
                         ": expected header 'f1,x1s,x1b,x2s,x2b[,d]'");
      }
      header_seen = true;
      continue;
    }

    const auto fields = split(line, ',');
    const std::size_t expected = with_total ? 6 : 5;
    if (fields.size() != expected)
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(expected) +
                       " fields, found " + std::to_string(fields.size()));
    Observation o;
    o.f1 = parse_double(fields[0], line_no);
    o.flow = FlowVector::of(parse_double(fields[1], line_no), parse_double(fields[2], line_no),
                            parse_double(fields[3], line_no), parse_double(fields[4], line_no));
    if (with_total) o.total = parse_double(fields[5], line_no);
    try {
      o.validate();
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
    obs.push_back(o);
  }
  if (!header_seen) throw ParseError("observation file is empty");
  return obs;
}

std::string observations_csv(const ObservationSet& obs) {
  bool with_total = !obs.empty();
  for (const auto& o : obs) with_total = with_total && o.total.has_value();
  std::string s = with_total ? "f1,x1s,x1b,x2s,x2b,d\n" : "f1,x1s,x1b,x2s,x2b\n";
  for (const auto& o : obs) {
    s += join_row({o.f1, o.flow.xs(Exit::One), o.flow.xb(Exit::One), o.flow.xs(Exit::Two),
                   o.flow.xb(Exit::Two)});
    if (with_total) s += ',' + format_number(*o.total);
    s += '\n';
  }
  return s;
}

std::string equilibrium_csv_header() { return "f1,x1s,x1b,x2s,x2b,j1s,j1b,j2s,j2b,residual\n"; }

std::string equilibrium_csv_row(const DemandConfig& demand, const EquilibriumResult& eq) {
  const auto& x = eq.flow;
  const auto& k = eq.costs;
  return join_row({demand.f1, x.xs(Exit::One), x.xb(Exit::One), x.xs(Exit::Two), x.xb(Exit::Two),
                   k.steadfast[0], k.bypass[0], k.steadfast[1], k.bypass[1], eq.residual}) +
         "\n";
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string s = "beta,x1s,x1b,x2s,x2b,w,z,j_soc,residual,converged\n";
  for (const auto& r : rows) {
    const auto& x = r.flow;
    s += join_row({r.beta, x.xs(Exit::One), x.xb(Exit::One), x.xs(Exit::Two), x.xb(Exit::Two),
                   r.plan.w, r.plan.z, r.social_cost, r.residual});
    s += r.converged ? ",1\n" : ",0\n";
  }
  return s;
}

std::string social_csv_header() {
  return "f1,eq_x1s,eq_x1b,eq_x2s,eq_x2b,opt_x1s,opt_x1b,opt_x2s,opt_x2b,eq_cost,opt_cost,ratio\n";
}

std::string social_csv_row(double f1, const SocialResult& r) {
  const auto& e = r.equilibrium_flow;
  const auto& o = r.flow;
  return join_row({f1, e.xs(Exit::One), e.xb(Exit::One), e.xs(Exit::Two), e.xb(Exit::Two),
                   o.xs(Exit::One), o.xb(Exit::One), o.xs(Exit::Two), o.xb(Exit::Two),
                   r.equilibrium_cost, r.cost, r.ratio}) +
         "\n";
}

std::string calibration_json(const CalibrationResult& r) {
  // Written by hand so numbers keep the fixed 9-digit rendering.
  auto exit_block = [&](Exit e) {
    const auto& k = r.params[e];
    return "{\"ct\": " + format_number(k.ct) + ", \"cc\": " + format_number(k.cc) +
           ", \"gamma\": " + format_number(k.gamma) + "}";
  };
  std::string s = "{\n";
  s += "  \"costs\": {\n";
  s += "    \"exit1\": " + exit_block(Exit::One) + ",\n";
  s += "    \"exit2\": " + exit_block(Exit::Two) + "\n";
  s += "  },\n";
  s += "  \"calibration\": {\n";
  s += "    \"violations\": " + std::to_string(r.violations) + ",\n";
  s += "    \"conditions\": " + std::to_string(r.per_constraint.size()) + ",\n";
  s += "    \"hinge\": " + format_number(r.hinge) + ",\n";
  s += std::string("    \"symmetric\": ") + (r.symmetric ? "true" : "false") + ",\n";
  s += "    \"starts\": " + std::to_string(r.starts) + ",\n";
  s += "    \"diagnostics\": [";
  for (std::size_t k = 0; k < r.diagnostics.size(); ++k) {
    s += (k == 0 ? "" : ", ") + json(r.diagnostics[k]).dump();
  }
  s += "]\n";
  s += "  }\n";
  s += "}\n";
  return s;
}

}  // namespace diverge
