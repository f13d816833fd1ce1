#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mivkoz {

/// One point of the process space studied for MIV keep-out zones.
/// Lengths in nm, concentrations in cm^-3.
struct ProcessCorner {
  double t_miv = 50.0;  ///< MIV metal core thickness
  double t_ox = 1.0;    ///< MIV liner thickness
  double h_sub = 100.0; ///< substrate layer height
  double n_sub = 1e17;  ///< substrate acceptor doping
  double n_src = 1e19;  ///< source/drain donor peak doping

  static ProcessCorner nominal() { return {}; }

  /// Depth spread of the source/drain Gaussian so that the donor profile
  /// crosses n_sub exactly at `junction_depth`.
  double gaussian_sigma(double junction_depth) const;

  bool operator==(const ProcessCorner&) const = default;
};

/// Lexicographic order on (t_miv, t_ox, h_sub, n_sub, n_src).
bool corner_less(const ProcessCorner& a, const ProcessCorner& b);

struct Interval {
  double lo;
  double hi;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Legal parameter intervals. `table_one()` is the published process
/// range; `koz_study()` widens n_sub to cover the keep-out table corners
/// (which use substrate dopings up to 1e19).
struct CornerLimits {
  Interval t_miv{20.0, 100.0};
  Interval t_ox{0.25, 2.0};
  Interval h_sub{20.0, 150.0};
  Interval n_sub{1e15, 5e17};
  Interval n_src{1e18, 1e21};

  static CornerLimits table_one() { return {}; }
  static CornerLimits koz_study();
};

/// Returns `corner` unchanged when every field is in range and a junction
/// exists (n_src > n_sub); throws RangeError otherwise.
ProcessCorner validate_corner(const ProcessCorner& corner,
                              const CornerLimits& limits = CornerLimits::table_one());

/// Transistor and layout dimensions. The first block is the published
/// device; the second block holds layout knobs the device description
/// leaves open.
struct DeviceGeometry {
  double channel_length = 14.0;
  double width = 32.0;
  double src_length = 32.0;
  double src_depth = 7.0;
  double gate_oxide_thickness = 1.0;
  double guard_ring_thickness = 7.0;
  double guard_ring_depth = 10.0;
  double miv_pitch = 100.0;

  double guard_ring_gap = 10.0;            ///< active edge to guard bar, nm
  double guard_ring_doping_factor = 100.0; ///< p+ level relative to n_sub
  double guard_ring_doping_cap = 1e20;
  double gate_workfunction = 4.6;          ///< eV
  double miv_workfunction = 4.65;          ///< eV (Cu)
  double contact_fraction = 0.5;           ///< outer share of S/D under the ohmic contact
  double gate_extension = 8.0;             ///< gate overhang past each side of the width, nm;
                                           ///< without it the ungated flanks leak microamps
  double domain_margin = 150.0;            ///< substrate kept around all features, nm

  double active_length() const { return 2.0 * src_length + channel_length; }
  double channel_center_x() const { return src_length + 0.5 * channel_length; }

  bool operator==(const DeviceGeometry&) const = default;
};

/// Throws GeometryError on non-positive lengths or src_depth >= h_sub.
void validate_geometry(const DeviceGeometry& geometry, const ProcessCorner& corner);

enum class Orientation { Vertical, Horizontal };
enum class TerminalOrder { SourceNearMiv, DrainNearMiv };

/// Where the MIV sits relative to the transistor. d_sep is the clear
/// distance from the liner's outer edge to the nearest active-region edge.
/// Vertical: the MIV faces the long side of the active region and
/// d_offset shifts it along the source-drain axis. Horizontal: the MIV
/// sits beyond the source or drain end, centered on the channel.
struct PlacementScenario {
  Orientation orientation = Orientation::Vertical;
  double d_sep = 50.0;
  double d_offset = 0.0;
  TerminalOrder terminal_order = TerminalOrder::SourceNearMiv;
  bool miv_present = true;

  PlacementScenario without_miv() const {
    PlacementScenario s = *this;
    s.miv_present = false;
    return s;
  }
  bool operator==(const PlacementScenario&) const = default;
};

struct BiasPoint {
  double v_gs = 0.0;
  double v_ds = 0.0;
  double v_sub = 0.0;
  double v_miv = 1.0;
  bool operator==(const BiasPoint&) const = default;
};

/// Throws RangeError when any terminal magnitude exceeds 2 V.
void validate_bias(const BiasPoint& bias);

using Point3 = std::array<double, 3>;

/// Axis-aligned box, [lo, hi] per axis (x, y, z), nm. z grows downward
/// from the top silicon surface at z = 0.
struct Box3 {
  Point3 lo{};
  Point3 hi{};

  double extent(int axis) const { return hi[axis] - lo[axis]; }
  double volume() const { return extent(0) * extent(1) * extent(2); }
  bool contains(const Point3& p) const;
  /// True when the interiors overlap (touching faces do not count).
  bool overlaps(const Box3& other) const;
  bool operator==(const Box3&) const = default;
};

enum class Region { Substrate, Channel, Source, Drain, GuardRing, MivLiner, MivMetal };
enum class Material { Silicon, Oxide, Metal };

Material material_of(Region region);
std::string_view to_string(Region region);

/// Net doping description attached to a layout box.
struct DopingProfile {
  enum class Kind { None, Uniform, GaussianDonor };
  Kind kind = Kind::None;
  double donor = 0.0;     ///< uniform donor level, or Gaussian peak at z = 0
  double acceptor = 0.0;  ///< uniform acceptor background
  double sigma = 0.0;     ///< Gaussian depth spread, nm

  double donor_at(double depth_nm) const;
  double net_at(double depth_nm) const { return donor_at(depth_nm) - acceptor; }

  static DopingProfile none() { return {}; }
  static DopingProfile uniform_acceptor(double na) { return {Kind::Uniform, 0.0, na, 0.0}; }
  static DopingProfile uniform_donor(double nd) { return {Kind::Uniform, nd, 0.0, 0.0}; }
  static DopingProfile gaussian_donor(double peak, double sigma, double background) {
    return {Kind::GaussianDonor, peak, background, sigma};
  }
  bool operator==(const DopingProfile&) const = default;
};

struct LayoutBox {
  Box3 box;
  Region region;
  DopingProfile doping;
  bool operator==(const LayoutBox&) const = default;
};

enum class ContactKind {
  Ohmic,     ///< carrier-exchanging, charge-neutral Dirichlet values
  Insulated  ///< potential only, through an optional insulator layer
};

enum class ContactSurface {
  Top,       ///< patch on the z = 0 surface (x/y extent of `patch`)
  MetalBody  ///< every face of the metal box `patch`
};

struct ContactSpec {
  std::string name;
  ContactKind kind = ContactKind::Ohmic;
  ContactSurface surface = ContactSurface::Top;
  Box3 patch;
  double workfunction = 0.0;            ///< eV, Insulated only
  double insulator_thickness = 0.0;     ///< nm; 0 pins the potential at the face
  double insulator_permittivity = 3.9;  ///< relative
  bool operator==(const ContactSpec&) const = default;
};

/// Box-level description of one transistor plus (optionally) one MIV.
struct DeviceLayout {
  Box3 bounds;
  std::vector<LayoutBox> boxes;  ///< disjoint; together they tile `bounds`
  std::vector<ContactSpec> contacts;
  ProcessCorner corner;
  DeviceGeometry geometry;
  PlacementScenario scenario;

  /// Box containing `p`; ties on shared faces resolve to the first box.
  const LayoutBox* box_at(const Point3& p) const;
  const ContactSpec* contact(std::string_view name) const;
  std::size_t count(Region region) const;

  /// Canonical text form; identical layouts produce identical bytes.
  std::string serialize() const;
  std::uint64_t fingerprint() const;
};

/// Emits the box-level layout for one placement scenario. Throws
/// GeometryError when the MIV liner would touch or overlap any active or
/// guard-ring box.
DeviceLayout build_layout(const DeviceGeometry& geometry, const ProcessCorner& corner,
                          const PlacementScenario& scenario);

/// Per-parameter value lists for a corner sweep. When `n_sub_ratios` is
/// non-empty, n_sub is derived per n_src as n_src / ratio and `n_sub` is
/// ignored (the paired layout of the keep-out table).
struct CornerAxes {
  std::vector<double> t_miv{50.0};
  std::vector<double> t_ox{1.0};
  std::vector<double> h_sub{100.0};
  std::vector<double> n_sub{1e17};
  std::vector<double> n_src{1e19};
  std::vector<double> n_sub_ratios;
};

/// Cartesian product in lexicographic order with duplicates removed.
std::vector<ProcessCorner> enumerate_corners(
    const CornerAxes& axes, const CornerLimits& limits = CornerLimits::table_one());

}  // namespace mivkoz
