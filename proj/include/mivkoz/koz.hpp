#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mivkoz/metrics.hpp"

namespace mivkoz {

/// Scan parameters of the keep-out rule: the smallest d_sep on the grid
/// start, start + step, ..., max whose leakage ratio is below threshold.
struct KozScan {
  double threshold = 10.0;
  double step = 50.0;   ///< nm
  double start = 50.0;  ///< nm
  double max = 500.0;   ///< nm

  void validate() const;
};

/// Ratio of a vertical, center-aligned MIV placement at a given d_sep.
using RatioSimulator = std::function<RatioReport(const PlacementScenario&)>;

/// Scans upward and stops at the first passing spacing.
/// Throws NotFoundError when `max` still fails.
double extract_koz(const ProcessCorner& corner, const RatioSimulator& simulate,
                   const KozScan& scan = {});

/// Simulator for extract_koz backed by the device solver. The no-MIV
/// baseline is computed on first use and reused for every d_sep.
RatioSimulator device_ratio_simulator(const SimulationSetup& setup, const ProcessCorner& corner);

struct KozRule {
  double n_src = 0.0;  ///< cm^-3
  double n_sub = 0.0;  ///< cm^-3
  double h_sub = 0.0;  ///< nm
  double koz = 0.0;    ///< nm
  bool possibly_saturated = false;  ///< equals the scan maximum; may not have passed
  bool operator==(const KozRule&) const = default;
};

enum class KozSource { Simulated, PaperTableIII };

struct KozTable {
  std::vector<KozRule> rules;
  KozScan scan;
  KozSource source = KozSource::Simulated;
  std::string options_hash;  ///< Simulated tables only

  /// Positive step multiples and one rule per key; ConfigError otherwise.
  void validate() const;
  bool operator==(const KozTable& o) const {
    return rules == o.rules && scan.threshold == o.scan.threshold && scan.step == o.scan.step &&
           scan.start == o.scan.start && scan.max == o.scan.max && source == o.source &&
           options_hash == o.options_hash;
  }
};

/// The published 8 x 4 keep-out table (32 rules).
KozTable paper_table();

/// Exact key, or the largest koz among rules inside the bracketing cell
/// of the query on each axis (doping axes compared in log10). Throws
/// OutOfDomainError outside the convex hull of the stored keys.
double lookup_koz(const KozTable& table, const ProcessCorner& corner);

nlohmann::json to_json(const KozTable& table);
KozTable koz_table_from_json(const nlohmann::json& j);

struct MivInstance {
  std::string id;
  double x = 0.0;  ///< center, nm
  double y = 0.0;
  double t_miv = 50.0;
  double t_ox = 1.0;
  std::string domain;  ///< voltage domain label, informational
};

/// Active-region rectangle. (x, y) is its lower-left corner; `width` runs
/// along y for Vertical and along x for Horizontal.
struct TransistorInstance {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  double width = 32.0;
  double length = 78.0;  ///< source + channel + drain
  Orientation orientation = Orientation::Vertical;
  std::string corner;  ///< key into Floorplan::corners
};

struct Rect {
  double x0, y0, x1, y1;
};

/// Edge-to-edge Euclidean distance; 0 for touching or overlapping.
double rect_distance(const Rect& a, const Rect& b);

struct Floorplan {
  std::map<std::string, ProcessCorner> corners;
  std::vector<MivInstance> mivs;
  std::vector<TransistorInstance> transistors;

  /// Unique ids, known corner names, positive sizes; ConfigError otherwise.
  void validate() const;
};

/// Footprint including the liner, matching the d_sep convention.
Rect footprint(const MivInstance& m);
Rect footprint(const TransistorInstance& t);

struct Violation {
  std::string miv_id;
  std::string transistor_id;
  double spacing = 0.0;   ///< nm
  double required = 0.0;  ///< nm
  bool operator==(const Violation&) const = default;
};

/// All (MIV, transistor) pairs closer than the transistor's keep-out
/// value, sorted by (miv id, transistor id). Uses a uniform grid so only
/// nearby pairs are measured. OutOfDomainError names the transistor whose
/// corner the table cannot resolve.
std::vector<Violation> check_floorplan(const Floorplan& fp, const KozTable& table);

struct PitchViolation {
  std::string first;
  std::string second;
  double pitch = 0.0;     ///< center-to-center, nm
  double required = 0.0;
  bool operator==(const PitchViolation&) const = default;
};

/// Optional MIV-to-MIV pitch rule; pairs ordered by id.
std::vector<PitchViolation> check_miv_pitch(const Floorplan& fp, double min_pitch = 100.0);

Floorplan floorplan_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Floorplan& fp);
nlohmann::json to_json(const std::vector<Violation>& violations);
void write_violations_text(std::ostream& os, const std::vector<Violation>& violations);

}  // namespace mivkoz
