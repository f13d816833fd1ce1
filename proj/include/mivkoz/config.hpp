#pragma once

#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "mivkoz/metrics.hpp"
#include "mivkoz/units.hpp"

namespace mivkoz {

/// Strict reader for one JSON object. Every key must be consumed; `finish`
/// reports leftovers as ConfigError so typos never pass silently.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& object, std::string context);

  bool has(const std::string& key) const;
  double quantity(const std::string& key, Quantity kind);
  double quantity_or(const std::string& key, Quantity kind, double fallback);
  double number_or(const std::string& key, double fallback);
  int integer_or(const std::string& key, int fallback);
  bool boolean_or(const std::string& key, bool fallback);
  std::string string(const std::string& key);
  std::string string_or(const std::string& key, const std::string& fallback);
  /// Sub-object, or nullptr when absent. Throws if present but not an object.
  const nlohmann::json* object(const std::string& key);
  const nlohmann::json& array(const std::string& key);
  const std::string& context() const { return context_; }

  void finish() const;

 private:
  const nlohmann::json& get(const std::string& key);
  const nlohmann::json& json_;
  std::string context_;
  std::set<std::string> used_;
};

/// Parses a file into JSON; ConfigError on I/O or syntax errors.
nlohmann::json read_json_file(const std::string& path);

ProcessCorner parse_corner(const nlohmann::json& j, const ProcessCorner& base = {});
PlacementScenario parse_scenario(const nlohmann::json& j, const PlacementScenario& base = {});

/// Everything a command needs besides its flags. Sections (all optional):
/// corner, scenario, geometry, mesh, solver, bias, limits, workers.
struct RunConfig {
  ProcessCorner corner;
  PlacementScenario scenario;
  SimulationSetup setup;
  CornerLimits limits = CornerLimits::table_one();
  std::string limits_name = "table_one";
  int workers = 1;
  std::string hash;  ///< of the canonical JSON text

  /// Range and geometry checks; RangeError/GeometryError/ConfigError.
  void validate() const;
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

}  // namespace mivkoz
