#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mivkoz/metrics.hpp"
#include "mivkoz/units.hpp"

namespace mivkoz {

enum class SweepParam { DSep, DOffset, TMiv, TOx, HSub, NSub, NSrc };

/// Accepts dsep, doffset, tmiv, tox, hsub, nsub, nsrc; ConfigError otherwise.
SweepParam parse_sweep_param(std::string_view name);
std::string_view to_string(SweepParam p);
Quantity quantity_of(SweepParam p);

struct SweepPlan {
  SweepParam param = SweepParam::DSep;
  std::vector<double> values;
  ProcessCorner corner;
  PlacementScenario scenario;
  DeviceGeometry geometry;  ///< used for layout checks and baseline cache keys
  int workers = 1;
  bool with_baseline = true;  ///< report ratios against the no-MIV device
  CornerLimits limits = CornerLimits::table_one();

  ProcessCorner corner_at(double value) const;
  PlacementScenario scenario_at(double value) const;
  /// Throws ConfigError/RangeError/GeometryError for unusable plans.
  void validate() const;
};

using Outcome = std::variant<DeviceMetrics, RatioReport>;

struct SweepEntry {
  double value = 0.0;
  std::optional<Outcome> outcome;  ///< empty when the point failed
  std::string error;
};

struct SweepResult {
  SweepParam param = SweepParam::DSep;
  std::vector<SweepEntry> entries;  ///< plan order
  std::vector<std::pair<double, std::string>> failures;

  std::size_t succeeded() const;
};

using MetricsSimulator =
    std::function<DeviceMetrics(const ProcessCorner&, const PlacementScenario&)>;

/// Runs every point, concurrently when plan.workers > 1. No-MIV baselines
/// are computed once per distinct baseline layout and shared. A failing
/// point is recorded and the sweep continues.
SweepResult run_sweep(const SweepPlan& plan, const MetricsSimulator& simulate);

/// Worker count after applying the MIVKOZ_WORKERS override; at least 1.
int resolve_workers(int requested);

/// Columns: <param>_<unit>,i_d_max_a,i_d_leak_a,max_ratio,leak_ratio,converged
void write_sweep_csv(std::ostream& os, const SweepResult& result);

nlohmann::json to_json(const SweepResult& result, const SweepPlan& plan,
                       const std::string& options_hash);

}  // namespace mivkoz
