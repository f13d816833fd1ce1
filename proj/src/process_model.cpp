#include "mivkoz/process_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

#include "mivkoz/errors.hpp"
#include "mivkoz/units.hpp"

namespace mivkoz {

RangeError::RangeError(std::string field, double value, double lo, double hi,
                       const std::string& detail)
    : Error(field + " = " + format_double(value) + " outside [" + format_double(lo) + ", " +
            format_double(hi) + "]" + (detail.empty() ? "" : "; " + detail)),
      field_(std::move(field)) {}

double ProcessCorner::gaussian_sigma(double junction_depth) const {
  return junction_depth / std::sqrt(std::log(n_src / n_sub));
}

bool corner_less(const ProcessCorner& a, const ProcessCorner& b) {
  return std::tie(a.t_miv, a.t_ox, a.h_sub, a.n_sub, a.n_src) <
         std::tie(b.t_miv, b.t_ox, b.h_sub, b.n_sub, b.n_src);
}

CornerLimits CornerLimits::koz_study() {
  CornerLimits l;
  l.n_sub = {1e15, 1e19};
  return l;
}

ProcessCorner validate_corner(const ProcessCorner& c, const CornerLimits& limits) {
  const std::string junction =
      c.n_src > c.n_sub ? std::string{} : std::string("also n_src must exceed n_sub");
  struct Field {
    const char* name;
    double value;
    Interval range;
  };
  const Field fields[] = {{"t_miv", c.t_miv, limits.t_miv},
                          {"t_ox", c.t_ox, limits.t_ox},
                          {"h_sub", c.h_sub, limits.h_sub},
                          {"n_sub", c.n_sub, limits.n_sub},
                          {"n_src", c.n_src, limits.n_src}};
  for (const auto& f : fields) {
    if (!std::isfinite(f.value) || !f.range.contains(f.value)) {
      throw RangeError(f.name, f.value, f.range.lo, f.range.hi, junction);
    }
  }
  if (!junction.empty()) {
    throw RangeError("n_src", c.n_src, c.n_sub, limits.n_src.hi,
                     "n_src must exceed n_sub (" + format_double(c.n_sub) + ")");
  }
  return c;
}

void validate_geometry(const DeviceGeometry& g, const ProcessCorner& corner) {
  const std::pair<const char*, double> lengths[] = {
      {"channel_length", g.channel_length},
      {"width", g.width},
      {"src_length", g.src_length},
      {"src_depth", g.src_depth},
      {"gate_oxide_thickness", g.gate_oxide_thickness},
      {"guard_ring_thickness", g.guard_ring_thickness},
      {"guard_ring_depth", g.guard_ring_depth},
      {"miv_pitch", g.miv_pitch},
      {"guard_ring_gap", g.guard_ring_gap},
      {"domain_margin", g.domain_margin}};
  for (const auto& [name, value] : lengths) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw GeometryError(std::string(name) + " must be strictly positive");
    }
  }
  if (!(g.src_depth < corner.h_sub)) {
    throw GeometryError("src_depth (" + format_double(g.src_depth) +
                        " nm) must be below h_sub (" + format_double(corner.h_sub) + " nm)");
  }
  if (!(g.guard_ring_depth < corner.h_sub)) {
    throw GeometryError("guard_ring_depth must be below h_sub");
  }
  if (!(g.contact_fraction > 0.0 && g.contact_fraction <= 1.0)) {
    throw GeometryError("contact_fraction must lie in (0, 1]");
  }
  if (!(g.gate_extension >= 0.0) || !(g.gate_extension < g.guard_ring_gap)) {
    throw GeometryError("gate_extension must lie in [0, guard_ring_gap)");
  }
  if (!(g.guard_ring_doping_factor > 0.0 && g.guard_ring_doping_cap > 0.0)) {
    throw GeometryError("guard ring doping must be positive");
  }
}

void validate_bias(const BiasPoint& b) {
  const std::pair<const char*, double> terms[] = {
      {"v_gs", b.v_gs}, {"v_ds", b.v_ds}, {"v_sub", b.v_sub}, {"v_miv", b.v_miv}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v) || std::abs(v) > 2.0) throw RangeError(name, v, -2.0, 2.0);
  }
}

bool Box3::contains(const Point3& p) const {
  for (int a = 0; a < 3; ++a) {
    if (p[a] < lo[a] || p[a] > hi[a]) return false;
  }
  return true;
}

bool Box3::overlaps(const Box3& o) const {
  for (int a = 0; a < 3; ++a) {
    if (!(lo[a] < o.hi[a] && o.lo[a] < hi[a])) return false;
  }
  return true;
}

Material material_of(Region r) {
  switch (r) {
    case Region::MivLiner: return Material::Oxide;
    case Region::MivMetal: return Material::Metal;
    default: return Material::Silicon;
  }
}

std::string_view to_string(Region r) {
  switch (r) {
    case Region::Substrate: return "substrate";
    case Region::Channel: return "channel";
    case Region::Source: return "source";
    case Region::Drain: return "drain";
    case Region::GuardRing: return "guard_ring";
    case Region::MivLiner: return "miv_liner";
    case Region::MivMetal: return "miv_metal";
  }
  return "?";
}

double DopingProfile::donor_at(double depth) const {
  switch (kind) {
    case Kind::None: return 0.0;
    case Kind::Uniform: return donor;
    case Kind::GaussianDonor: {
      const double u = depth / sigma;
      return donor * std::exp(-u * u);
    }
  }
  return 0.0;
}

const LayoutBox* DeviceLayout::box_at(const Point3& p) const {
  for (const auto& b : boxes) {
    if (b.box.contains(p)) return &b;
  }
  return nullptr;
}

const ContactSpec* DeviceLayout::contact(std::string_view name) const {
  for (const auto& c : contacts) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::size_t DeviceLayout::count(Region region) const {
  return static_cast<std::size_t>(
      std::count_if(boxes.begin(), boxes.end(), [&](const LayoutBox& b) { return b.region == region; }));
}

namespace {

void write_box(std::ostream& os, const Box3& b) {
  for (int a = 0; a < 3; ++a) os << ' ' << format_double(b.lo[a]) << ' ' << format_double(b.hi[a]);
}

}  // namespace

std::string DeviceLayout::serialize() const {
  std::ostringstream os;
  os << "bounds";
  write_box(os, bounds);
  os << '\n';
  for (const auto& b : boxes) {
    os << "box " << to_string(b.region);
    write_box(os, b.box);
    os << " doping " << static_cast<int>(b.doping.kind) << ' ' << format_double(b.doping.donor)
       << ' ' << format_double(b.doping.acceptor) << ' ' << format_double(b.doping.sigma) << '\n';
  }
  for (const auto& c : contacts) {
    os << "contact " << c.name << ' ' << static_cast<int>(c.kind) << ' '
       << static_cast<int>(c.surface);
    write_box(os, c.patch);
    os << ' ' << format_double(c.workfunction) << ' ' << format_double(c.insulator_thickness)
       << ' ' << format_double(c.insulator_permittivity) << '\n';
  }
  return os.str();
}

std::uint64_t DeviceLayout::fingerprint() const { return fnv1a(serialize()); }

namespace {

std::vector<double> unique_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Tiles the part of `bounds` not covered by `features` with boxes: the
// elementary grid spanned by every feature edge, merged into runs along x.
std::vector<Box3> complement_boxes(const Box3& bounds, const std::vector<LayoutBox>& features) {
  std::array<std::vector<double>, 3> lines;
  for (int a = 0; a < 3; ++a) {
    lines[a] = {bounds.lo[a], bounds.hi[a]};
    for (const auto& f : features) {
      lines[a].push_back(std::clamp(f.box.lo[a], bounds.lo[a], bounds.hi[a]));
      lines[a].push_back(std::clamp(f.box.hi[a], bounds.lo[a], bounds.hi[a]));
    }
    lines[a] = unique_sorted(lines[a]);
  }
  std::vector<Box3> out;
  for (std::size_t k = 0; k + 1 < lines[2].size(); ++k) {
    for (std::size_t j = 0; j + 1 < lines[1].size(); ++j) {
      std::optional<Box3> run;
      for (std::size_t i = 0; i + 1 < lines[0].size(); ++i) {
        const Box3 cell{{lines[0][i], lines[1][j], lines[2][k]},
                        {lines[0][i + 1], lines[1][j + 1], lines[2][k + 1]}};
        const bool covered = std::any_of(features.begin(), features.end(),
                                         [&](const LayoutBox& f) { return f.box.overlaps(cell); });
        if (covered) {
          if (run) out.push_back(*run);
          run.reset();
        } else if (run) {
          run->hi[0] = cell.hi[0];
        } else {
          run = cell;
        }
      }
      if (run) out.push_back(*run);
    }
  }
  return out;
}

}  // namespace

DeviceLayout build_layout(const DeviceGeometry& g, const ProcessCorner& corner,
                          const PlacementScenario& scenario) {
  validate_geometry(g, corner);
  if (!(corner.n_src > corner.n_sub) || !(corner.n_sub > 0.0)) {
    throw RangeError("n_src", corner.n_src, corner.n_sub, 1e21, "n_src must exceed n_sub");
  }
  if (!(corner.t_miv > 0.0) || !(corner.t_ox > 0.0)) {
    throw GeometryError("t_miv and t_ox must be strictly positive");
  }
  if (!std::isfinite(scenario.d_sep) || !std::isfinite(scenario.d_offset)) {
    throw GeometryError("placement distances must be finite");
  }

  const double L = g.active_length();
  const double W = g.width;
  const double xc = g.channel_center_x();
  const double yc = 0.5 * W;
  const double H = corner.h_sub;
  const double ds = g.src_depth;
  const double miv_outer = corner.t_miv + 2.0 * corner.t_ox;

  DeviceLayout layout;
  layout.corner = corner;
  layout.geometry = g;
  layout.scenario = scenario;

  std::vector<LayoutBox> features;
  const double sigma = corner.gaussian_sigma(ds);
  const auto sd_doping = DopingProfile::gaussian_donor(corner.n_src, sigma, corner.n_sub);
  const auto sub_doping = DopingProfile::uniform_acceptor(corner.n_sub);
  features.push_back({Box3{{0.0, 0.0, 0.0}, {g.src_length, W, ds}}, Region::Source, sd_doping});
  features.push_back({Box3{{g.src_length, 0.0, 0.0}, {g.src_length + g.channel_length, W, ds}},
                      Region::Channel, sub_doping});
  features.push_back({Box3{{g.src_length + g.channel_length, 0.0, 0.0}, {L, W, ds}}, Region::Drain,
                      sd_doping});
  const double guard_hi = -g.guard_ring_gap;
  const double guard_lo = guard_hi - g.guard_ring_thickness;
  const double guard_na =
      std::min(g.guard_ring_doping_factor * corner.n_sub, g.guard_ring_doping_cap);
  features.push_back({Box3{{0.0, guard_lo, 0.0}, {L, guard_hi, g.guard_ring_depth}},
                      Region::GuardRing, DopingProfile::uniform_acceptor(guard_na)});

  // MIV footprint (liner outer square) in the x-y plane.
  double mx0 = 0.0, my0 = 0.0;
  if (scenario.orientation == Orientation::Vertical) {
    mx0 = xc + scenario.d_offset - 0.5 * miv_outer;
    my0 = W + scenario.d_sep;
  } else {
    my0 = yc - 0.5 * miv_outer;
    mx0 = scenario.terminal_order == TerminalOrder::SourceNearMiv ? -scenario.d_sep - miv_outer
                                                                   : L + scenario.d_sep;
  }
  const Box3 miv_box{{mx0, my0, 0.0}, {mx0 + miv_outer, my0 + miv_outer, H}};

  if (scenario.miv_present) {
    if (!(scenario.d_sep > 0.0)) {
      throw GeometryError("d_sep = " + format_double(scenario.d_sep) +
                          " nm places the MIV liner on the active region");
    }
    for (const auto& f : features) {
      if (f.box.overlaps(miv_box)) {
        throw GeometryError("MIV with liner intersects the " + std::string(to_string(f.region)) +
                            " box");
      }
    }
  }

  // Bounds: symmetric in x about the channel center so that mirrored
  // placements produce mirrored layouts. The MIV footprint is enclosed even
  // without the MIV: at n_sub = 1e16 the drain depletion reaches the domain
  // edge, and a smaller baseline domain nearly doubles its leakage.
  const double half_x =
      std::max({0.5 * L, std::abs(miv_box.lo[0] - xc), std::abs(miv_box.hi[0] - xc)});
  const double y_lo = std::min(guard_lo, miv_box.lo[1]);
  const double y_hi = std::max(W, miv_box.hi[1]);
  const double m = g.domain_margin;
  layout.bounds = Box3{{xc - half_x - m, y_lo - m, 0.0}, {xc + half_x + m, y_hi + m, H}};

  if (scenario.miv_present) {
    const double t = corner.t_ox;
    const Box3& b = miv_box;
    const auto none = DopingProfile::none();
    features.push_back({Box3{{b.lo[0], b.lo[1], 0.0}, {b.lo[0] + t, b.hi[1], H}}, Region::MivLiner, none});
    features.push_back({Box3{{b.hi[0] - t, b.lo[1], 0.0}, {b.hi[0], b.hi[1], H}}, Region::MivLiner, none});
    features.push_back(
        {Box3{{b.lo[0] + t, b.lo[1], 0.0}, {b.hi[0] - t, b.lo[1] + t, H}}, Region::MivLiner, none});
    features.push_back(
        {Box3{{b.lo[0] + t, b.hi[1] - t, 0.0}, {b.hi[0] - t, b.hi[1], H}}, Region::MivLiner, none});
    features.push_back(
        {Box3{{b.lo[0] + t, b.lo[1] + t, 0.0}, {b.hi[0] - t, b.hi[1] - t, H}}, Region::MivMetal, none});
  }

  layout.boxes = features;
  for (const auto& box : complement_boxes(layout.bounds, features)) {
    layout.boxes.push_back({box, Region::Substrate, sub_doping});
  }

  const double contact_len = g.contact_fraction * g.src_length;
  layout.contacts.push_back({"source", ContactKind::Ohmic, ContactSurface::Top,
                             Box3{{0.0, 0.0, 0.0}, {contact_len, W, 0.0}}});
  layout.contacts.push_back({"drain", ContactKind::Ohmic, ContactSurface::Top,
                             Box3{{L - contact_len, 0.0, 0.0}, {L, W, 0.0}}});
  layout.contacts.push_back({"gate", ContactKind::Insulated, ContactSurface::Top,
                             Box3{{g.src_length, -g.gate_extension, 0.0},
                                  {g.src_length + g.channel_length, W + g.gate_extension, 0.0}},
                             g.gate_workfunction, g.gate_oxide_thickness, 3.9});
  layout.contacts.push_back({"substrate", ContactKind::Ohmic, ContactSurface::Top,
                             Box3{{0.0, guard_lo, 0.0}, {L, guard_hi, 0.0}}});
  if (scenario.miv_present) {
    const double t = corner.t_ox;
    layout.contacts.push_back(
        {"miv", ContactKind::Insulated, ContactSurface::MetalBody,
         Box3{{miv_box.lo[0] + t, miv_box.lo[1] + t, 0.0}, {miv_box.hi[0] - t, miv_box.hi[1] - t, H}},
         g.miv_workfunction, 0.0, 3.9});
  }
  return layout;
}

std::vector<ProcessCorner> enumerate_corners(const CornerAxes& axes, const CornerLimits& limits) {
  const bool paired = !axes.n_sub_ratios.empty();
  if (axes.t_miv.empty() || axes.t_ox.empty() || axes.h_sub.empty() || axes.n_src.empty() ||
      (!paired && axes.n_sub.empty())) {
    throw ConfigError("every corner axis needs at least one value");
  }
  auto less = [](const ProcessCorner& a, const ProcessCorner& b) { return corner_less(a, b); };
  std::set<ProcessCorner, decltype(less)> unique(less);
  for (double tm : axes.t_miv)
    for (double to : axes.t_ox)
      for (double hs : axes.h_sub)
        for (double ns : axes.n_src) {
          std::vector<double> subs;
          if (paired) {
            for (double r : axes.n_sub_ratios) subs.push_back(ns / r);
          } else {
            subs = axes.n_sub;
          }
          for (double nb : subs) {
            unique.insert(validate_corner(ProcessCorner{tm, to, hs, nb, ns}, limits));
          }
        }
  return {unique.begin(), unique.end()};
}

}  // namespace mivkoz
