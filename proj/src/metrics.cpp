#include "mivkoz/metrics.hpp"

#include <cmath>
#include <sstream>

#include "mivkoz/errors.hpp"
#include "mivkoz/units.hpp"

namespace mivkoz {

namespace {

const IVPoint& require_point(const IVCurve& curve, double v_gs) {
  const IVPoint* p = curve.find_vgs(v_gs);
  if (p == nullptr || std::abs(p->bias.v_ds - 1.0) > 1e-12) {
    throw MissingPointError("I-V curve has no point at v_gs = " + format_double(v_gs) +
                            " V, v_ds = 1 V");
  }
  if (!p->converged) {
    throw MissingPointError("I-V point at v_gs = " + format_double(v_gs) + " V did not converge");
  }
  return *p;
}

}  // namespace

DeviceMetrics extract_metrics(const IVCurve& id_vg, const ProcessCorner& corner,
                              const PlacementScenario& scenario, const DeviceGeometry& geometry) {
  const IVPoint& leak = require_point(id_vg, 0.0);
  const IVPoint& on = require_point(id_vg, 1.0);
  return {on.i_d, leak.i_d, corner, scenario, geometry};
}

RatioReport compare(const DeviceMetrics& baseline, const DeviceMetrics& with_miv) {
  if (!(baseline.corner == with_miv.corner)) {
    throw MismatchError("baseline and MIV runs use different process corners");
  }
  if (!(baseline.geometry == with_miv.geometry)) {
    throw MismatchError("baseline and MIV runs use different device geometry");
  }
  if (baseline.scenario.miv_present || !with_miv.scenario.miv_present) {
    throw MismatchError("compare expects a baseline without MIV and a run with MIV");
  }
  if (!(baseline.i_d_max > 0.0) || !(baseline.i_d_leak > 0.0)) {
    throw MismatchError("baseline currents must be positive to form ratios");
  }
  return {with_miv.i_d_max / baseline.i_d_max, with_miv.i_d_leak / baseline.i_d_leak, baseline,
          with_miv};
}

std::string SimulationSetup::hash() const {
  std::ostringstream os;
  const auto& g = geometry;
  for (double v : {g.channel_length, g.width, g.src_length, g.src_depth, g.gate_oxide_thickness,
                   g.guard_ring_thickness, g.guard_ring_depth, g.miv_pitch, g.guard_ring_gap,
                   g.guard_ring_doping_factor, g.guard_ring_doping_cap, g.gate_workfunction,
                   g.miv_workfunction, g.contact_fraction, g.domain_margin, g.gate_extension}) {
    os << format_double(v) << ';';
  }
  os << mesh.dimension << ';' << format_double(mesh.min_spacing) << ';'
     << format_double(mesh.refine_distance) << ';' << format_double(mesh.max_spacing) << ';'
     << format_double(mesh.growth) << ';' << mesh.cell_budget << ';'
     << format_double(mesh.sheet_depth) << ';' << solver.serialize() << ';'
     << format_double(v_miv) << ';' << format_double(v_sub);
  return hex64(fnv1a(os.str()));
}

DeviceMetrics simulate_metrics(const SimulationSetup& setup, const ProcessCorner& corner,
                               const PlacementScenario& scenario) {
  const DeviceLayout layout = build_layout(setup.geometry, corner, scenario);
  const TensorMesh mesh = generate_mesh(layout, setup.mesh);
  DeviceSolver solver(mesh, assign_doping(layout, mesh), setup.solver);
  const SolutionState eq = solver.equilibrium();
  BiasPoint base;
  base.v_miv = scenario.miv_present ? setup.v_miv : 0.0;
  base.v_sub = setup.v_sub;
  const IVCurve curve = id_vg_sweep(solver, eq, 1.0, {0.0, 1.0}, base);
  if (curve.failure) throw ConvergenceError(*curve.failure);
  return extract_metrics(curve, corner, scenario, setup.geometry);
}

nlohmann::json to_json(const ProcessCorner& c) {
  return {{"t_miv", format_quantity(c.t_miv, Quantity::Length)},
          {"t_ox", format_quantity(c.t_ox, Quantity::Length)},
          {"h_sub", format_quantity(c.h_sub, Quantity::Length)},
          {"n_sub", format_quantity(c.n_sub, Quantity::Concentration)},
          {"n_src", format_quantity(c.n_src, Quantity::Concentration)}};
}

nlohmann::json to_json(const PlacementScenario& s) {
  return {{"orientation", s.orientation == Orientation::Vertical ? "vertical" : "horizontal"},
          {"d_sep", format_quantity(s.d_sep, Quantity::Length)},
          {"d_offset", format_quantity(s.d_offset, Quantity::Length)},
          {"terminal_order",
           s.terminal_order == TerminalOrder::SourceNearMiv ? "source_near_miv" : "drain_near_miv"},
          {"miv_present", s.miv_present}};
}

nlohmann::json to_json(const DeviceMetrics& m) {
  return {{"i_d_max_a", m.i_d_max},
          {"i_d_leak_a", m.i_d_leak},
          {"corner", to_json(m.corner)},
          {"scenario", to_json(m.scenario)}};
}

nlohmann::json to_json(const RatioReport& r) {
  return {{"max_ratio", r.max_ratio},
          {"leak_ratio", r.leak_ratio},
          {"baseline", to_json(r.baseline)},
          {"with_miv", to_json(r.with_miv)}};
}

}  // namespace mivkoz
