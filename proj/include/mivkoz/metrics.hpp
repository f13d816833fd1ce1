#pragma once

#include <json.hpp>

#include "mivkoz/mesh.hpp"
#include "mivkoz/process_model.hpp"
#include "mivkoz/solver.hpp"

namespace mivkoz {

/// Drain currents at (v_gs, v_ds) = (1 V, 1 V) and (0 V, 1 V).
struct DeviceMetrics {
  double i_d_max = 0.0;   ///< A
  double i_d_leak = 0.0;  ///< A
  ProcessCorner corner;
  PlacementScenario scenario;
  DeviceGeometry geometry;
};

/// With-MIV currents relative to the same-corner device without an MIV.
struct RatioReport {
  double max_ratio = 0.0;
  double leak_ratio = 0.0;
  DeviceMetrics baseline;
  DeviceMetrics with_miv;
};

/// Reads the v_gs = 0 and v_gs = 1 points of a curve taken at v_ds = 1.
/// Throws MissingPointError when either is absent or unconverged.
DeviceMetrics extract_metrics(const IVCurve& id_vg, const ProcessCorner& corner,
                              const PlacementScenario& scenario,
                              const DeviceGeometry& geometry = {});

/// Throws MismatchError unless corner and geometry agree, the baseline has
/// no MIV and the other run has one.
RatioReport compare(const DeviceMetrics& baseline, const DeviceMetrics& with_miv);

/// Everything besides the corner and the placement that a device run needs.
struct SimulationSetup {
  DeviceGeometry geometry;
  RefinementPolicy mesh;
  SolverOptions solver;
  double v_miv = 1.0;
  double v_sub = 0.0;

  /// Hash over geometry, mesh policy, solver options and bias knobs.
  std::string hash() const;
};

/// Builds, meshes and solves one device and extracts its two metrics.
/// Throws ConvergenceError when either bias point fails.
DeviceMetrics simulate_metrics(const SimulationSetup& setup, const ProcessCorner& corner,
                               const PlacementScenario& scenario);

nlohmann::json to_json(const ProcessCorner& c);
nlohmann::json to_json(const PlacementScenario& s);
nlohmann::json to_json(const DeviceMetrics& m);
nlohmann::json to_json(const RatioReport& r);

}  // namespace mivkoz
