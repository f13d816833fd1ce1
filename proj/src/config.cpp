#include "mivkoz/config.hpp"

#include <fstream>
#include <sstream>

#include "mivkoz/errors.hpp"

namespace mivkoz {

using nlohmann::json;

ObjectReader::ObjectReader(const json& object, std::string context)
    : json_(object), context_(std::move(context)) {
  if (!json_.is_object()) throw ConfigError(context_ + ": expected a JSON object");
}

bool ObjectReader::has(const std::string& key) const { return json_.contains(key); }

const json& ObjectReader::get(const std::string& key) {
  auto it = json_.find(key);
  if (it == json_.end()) throw ConfigError(context_ + ": missing key '" + key + "'");
  used_.insert(key);
  return *it;
}

double ObjectReader::quantity(const std::string& key, Quantity kind) {
  const json& v = get(key);
  if (!v.is_string()) {
    throw ConfigError(context_ + "." + key + ": expected a string with a unit, e.g. \"" +
                      format_quantity(kind == Quantity::Concentration ? 1e17 : 1.0, kind) +
                      "\"");
  }
  try {
    return parse_quantity(v.get<std::string>(), kind);
  } catch (const ConfigError& e) {
    throw ConfigError(context_ + "." + key + ": " + e.what());
  }
}

double ObjectReader::quantity_or(const std::string& key, Quantity kind, double fallback) {
  return has(key) ? quantity(key, kind) : fallback;
}

double ObjectReader::number_or(const std::string& key, double fallback) {
  if (!has(key)) return fallback;
  const json& v = get(key);
  if (!v.is_number()) throw ConfigError(context_ + "." + key + ": expected a number");
  return v.get<double>();
}

int ObjectReader::integer_or(const std::string& key, int fallback) {
  if (!has(key)) return fallback;
  const json& v = get(key);
  if (!v.is_number_integer()) throw ConfigError(context_ + "." + key + ": expected an integer");
  return v.get<int>();
}

bool ObjectReader::boolean_or(const std::string& key, bool fallback) {
  if (!has(key)) return fallback;
  const json& v = get(key);
  if (!v.is_boolean()) throw ConfigError(context_ + "." + key + ": expected true or false");
  return v.get<bool>();
}

std::string ObjectReader::string(const std::string& key) {
  const json& v = get(key);
  if (!v.is_string()) throw ConfigError(context_ + "." + key + ": expected a string");
  return v.get<std::string>();
}

std::string ObjectReader::string_or(const std::string& key, const std::string& fallback) {
  return has(key) ? string(key) : fallback;
}

const json* ObjectReader::object(const std::string& key) {
  if (!has(key)) return nullptr;
  const json& v = get(key);
  if (!v.is_object()) throw ConfigError(context_ + "." + key + ": expected an object");
  return &v;
}

const json& ObjectReader::array(const std::string& key) {
  const json& v = get(key);
  if (!v.is_array()) throw ConfigError(context_ + "." + key + ": expected an array");
  return v;
}

void ObjectReader::finish() const {
  for (auto it = json_.begin(); it != json_.end(); ++it) {
    if (!used_.count(it.key())) {
      throw ConfigError(context_ + ": unknown key '" + it.key() + "'");
    }
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

ProcessCorner parse_corner(const json& j, const ProcessCorner& base) {
  ObjectReader r(j, "corner");
  ProcessCorner c = base;
  c.t_miv = r.quantity_or("t_miv", Quantity::Length, c.t_miv);
  c.t_ox = r.quantity_or("t_ox", Quantity::Length, c.t_ox);
  c.h_sub = r.quantity_or("h_sub", Quantity::Length, c.h_sub);
  c.n_sub = r.quantity_or("n_sub", Quantity::Concentration, c.n_sub);
  c.n_src = r.quantity_or("n_src", Quantity::Concentration, c.n_src);
  r.finish();
  return c;
}

PlacementScenario parse_scenario(const json& j, const PlacementScenario& base) {
  ObjectReader r(j, "scenario");
  PlacementScenario s = base;
  const std::string orient =
      r.string_or("orientation", s.orientation == Orientation::Vertical ? "vertical" : "horizontal");
  if (orient == "vertical") {
    s.orientation = Orientation::Vertical;
  } else if (orient == "horizontal") {
    s.orientation = Orientation::Horizontal;
  } else {
    throw ConfigError("scenario.orientation must be 'vertical' or 'horizontal'");
  }
  s.d_sep = r.quantity_or("d_sep", Quantity::Length, s.d_sep);
  s.d_offset = r.quantity_or("d_offset", Quantity::Length, s.d_offset);
  const std::string order = r.string_or(
      "terminal_order",
      s.terminal_order == TerminalOrder::SourceNearMiv ? "source_near_miv" : "drain_near_miv");
  if (order == "source_near_miv") {
    s.terminal_order = TerminalOrder::SourceNearMiv;
  } else if (order == "drain_near_miv") {
    s.terminal_order = TerminalOrder::DrainNearMiv;
  } else {
    throw ConfigError("scenario.terminal_order must be 'source_near_miv' or 'drain_near_miv'");
  }
  s.miv_present = r.boolean_or("miv_present", s.miv_present);
  r.finish();
  return s;
}

namespace {

DeviceGeometry parse_geometry(const json& j) {
  ObjectReader r(j, "geometry");
  DeviceGeometry g;
  auto len = [&](const char* key, double& field) {
    field = r.quantity_or(key, Quantity::Length, field);
  };
  len("channel_length", g.channel_length);
  len("width", g.width);
  len("src_length", g.src_length);
  len("src_depth", g.src_depth);
  len("gate_oxide_thickness", g.gate_oxide_thickness);
  len("guard_ring_thickness", g.guard_ring_thickness);
  len("guard_ring_depth", g.guard_ring_depth);
  len("miv_pitch", g.miv_pitch);
  len("guard_ring_gap", g.guard_ring_gap);
  len("gate_extension", g.gate_extension);
  len("domain_margin", g.domain_margin);
  g.guard_ring_doping_factor = r.number_or("guard_ring_doping_factor", g.guard_ring_doping_factor);
  g.guard_ring_doping_cap =
      r.quantity_or("guard_ring_doping_cap", Quantity::Concentration, g.guard_ring_doping_cap);
  g.gate_workfunction = r.quantity_or("gate_workfunction", Quantity::Energy, g.gate_workfunction);
  g.miv_workfunction = r.quantity_or("miv_workfunction", Quantity::Energy, g.miv_workfunction);
  g.contact_fraction = r.number_or("contact_fraction", g.contact_fraction);
  r.finish();
  return g;
}

RefinementPolicy parse_mesh(const json& j) {
  ObjectReader r(j, "mesh");
  RefinementPolicy m;
  m.dimension = r.integer_or("dimension", m.dimension);
  if (m.dimension != 2 && m.dimension != 3) throw ConfigError("mesh.dimension must be 2 or 3");
  m.min_spacing = r.quantity_or("min_spacing", Quantity::Length, m.min_spacing);
  m.refine_distance = r.quantity_or("refine_distance", Quantity::Length, m.refine_distance);
  m.max_spacing = r.quantity_or("max_spacing", Quantity::Length, m.max_spacing);
  m.growth = r.number_or("growth", m.growth);
  const int budget = r.integer_or("cell_budget", static_cast<int>(m.cell_budget));
  if (budget < 1) throw ConfigError("mesh.cell_budget must be positive");
  m.cell_budget = static_cast<std::size_t>(budget);
  m.sheet_depth = r.quantity_or("sheet_depth", Quantity::Length, m.sheet_depth);
  r.finish();
  return m;
}

SolverOptions parse_solver(const json& j) {
  ObjectReader r(j, "solver");
  SolverOptions o;
  o.gummel_tolerance = r.quantity_or("gummel_tolerance", Quantity::Voltage, o.gummel_tolerance);
  o.max_iterations = r.integer_or("max_iterations", o.max_iterations);
  o.damping = r.quantity_or("damping", Quantity::Voltage, o.damping);
  const std::string stats = r.string_or("statistics", "boltzmann");
  if (stats == "boltzmann") {
    o.statistics = Statistics::Boltzmann;
  } else if (stats == "fermi_dirac") {
    o.statistics = Statistics::FermiDiracApprox;
  } else {
    throw ConfigError("solver.statistics must be 'boltzmann' or 'fermi_dirac'");
  }
  o.linear_tolerance = r.number_or("linear_tolerance", o.linear_tolerance);
  const std::string linear = r.string_or("linear_solver", "direct");
  if (linear == "direct") {
    o.linear_solver = LinearSolver::Direct;
  } else if (linear == "iterative") {
    o.linear_solver = LinearSolver::Iterative;
  } else {
    throw ConfigError("solver.linear_solver must be 'direct' or 'iterative'");
  }
  o.mu_n = r.quantity_or("mu_n", Quantity::Mobility, o.mu_n);
  o.mu_p = r.quantity_or("mu_p", Quantity::Mobility, o.mu_p);
  o.doping_dependent_mobility =
      r.boolean_or("doping_dependent_mobility", o.doping_dependent_mobility);
  o.srh.tau_n = r.quantity_or("tau_n", Quantity::Time, o.srh.tau_n);
  o.srh.tau_p = r.quantity_or("tau_p", Quantity::Time, o.srh.tau_p);
  o.ramp_step = r.quantity_or("ramp_step", Quantity::Voltage, o.ramp_step);
  o.min_ramp_step = r.quantity_or("min_ramp_step", Quantity::Voltage, o.min_ramp_step);
  r.finish();
  o.validate();
  return o;
}

}  // namespace

void RunConfig::validate() const {
  validate_corner(corner, limits);
  setup.solver.validate();
  build_layout(setup.geometry, corner, scenario);
  if (scenario.miv_present) build_layout(setup.geometry, corner, scenario.without_miv());
  if (workers < 1) throw ConfigError("workers must be at least 1");
}

RunConfig parse_config(const json& j) {
  ObjectReader r(j, "config");
  RunConfig c;
  if (const json* s = r.object("corner")) c.corner = parse_corner(*s);
  if (const json* s = r.object("scenario")) c.scenario = parse_scenario(*s);
  if (const json* s = r.object("geometry")) c.setup.geometry = parse_geometry(*s);
  if (const json* s = r.object("mesh")) c.setup.mesh = parse_mesh(*s);
  if (const json* s = r.object("solver")) c.setup.solver = parse_solver(*s);
  if (const json* s = r.object("bias")) {
    ObjectReader b(*s, "bias");
    c.setup.v_miv = b.quantity_or("v_miv", Quantity::Voltage, c.setup.v_miv);
    c.setup.v_sub = b.quantity_or("v_sub", Quantity::Voltage, c.setup.v_sub);
    b.finish();
    validate_bias({0.0, 0.0, c.setup.v_sub, c.setup.v_miv});
  }
  c.limits_name = r.string_or("limits", c.limits_name);
  if (c.limits_name == "table_one") {
    c.limits = CornerLimits::table_one();
  } else if (c.limits_name == "koz_study") {
    c.limits = CornerLimits::koz_study();
  } else {
    throw ConfigError("limits must be 'table_one' or 'koz_study'");
  }
  c.workers = r.integer_or("workers", c.workers);
  r.finish();
  c.hash = hex64(fnv1a(j.dump()));
  return c;
}

RunConfig load_config(const std::string& path) { return parse_config(read_json_file(path)); }

}  // namespace mivkoz
