#include "mivkoz/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "mivkoz/errors.hpp"
#include "mivkoz/units.hpp"

namespace mivkoz {

namespace {

constexpr double kNm2 = 1e-14;  // nm^2 -> cm^2
constexpr double kNm = 1e-7;    // nm -> cm

struct SizeSource {
  double pos;
  double h0;
  double plateau;
};

class SizeField {
 public:
  SizeField(double h_max, double growth) : h_max_(h_max), slope_(growth - 1.0) {}
  void add(SizeSource s) { sources_.push_back(s); }
  double operator()(double x) const {
    double h = h_max_;
    for (const auto& s : sources_) {
      const double d = std::max(0.0, std::abs(x - s.pos) - s.plateau);
      h = std::min(h, s.h0 + slope_ * d);
    }
    return h;
  }

 private:
  double h_max_;
  double slope_;
  std::vector<SizeSource> sources_;
};

// Places points in (a, b] so that the integral of 1/h between neighbours
// is equal; returns the interior points followed by b.
void fill_segment(double a, double b, const SizeField& h, double fine, std::vector<double>& out) {
  const double len = b - a;
  const auto samples = static_cast<std::size_t>(std::max(64.0, std::ceil(len / fine)));
  std::vector<double> cum(samples + 1, 0.0);
  double prev = 1.0 / h(a);
  for (std::size_t s = 1; s <= samples; ++s) {
    const double x = a + len * static_cast<double>(s) / static_cast<double>(samples);
    const double cur = 1.0 / h(x);
    cum[s] = cum[s - 1] + 0.5 * (prev + cur) * len / static_cast<double>(samples);
    prev = cur;
  }
  const double total = cum.back();
  const auto cells = static_cast<std::size_t>(std::max(1.0, std::ceil(total - 1e-6)));
  std::size_t s = 0;
  for (std::size_t k = 1; k < cells; ++k) {
    const double target = total * static_cast<double>(k) / static_cast<double>(cells);
    while (cum[s + 1] < target) ++s;
    const double t = (target - cum[s]) / (cum[s + 1] - cum[s]);
    out.push_back(a + len * (static_cast<double>(s) + t) / static_cast<double>(samples));
  }
  out.push_back(b);
}

}  // namespace

std::vector<double> generate_axis(double lo, double hi, std::vector<double> required,
                                  const std::vector<double>& critical,
                                  const RefinementPolicy& policy) {
  if (!(hi > lo)) throw GeometryError("empty mesh axis");
  required.push_back(lo);
  required.push_back(hi);
  std::sort(required.begin(), required.end());
  std::vector<double> req;
  const double merge = 1e-9 * (hi - lo);
  for (double r : required) {
    if (r < lo || r > hi) continue;
    if (req.empty() || r - req.back() > merge) req.push_back(r);
  }
  req.back() = hi;

  SizeField field(policy.max_spacing, policy.growth);
  for (double c : critical) {
    if (c >= lo && c <= hi) {
      field.add({c, policy.min_spacing, policy.refine_distance + policy.min_spacing});
    }
  }
  const double fine = 0.1 * std::min(policy.min_spacing, policy.max_spacing);

  std::vector<double> pts;
  for (int pass = 0; pass < 60; ++pass) {
    pts.assign(1, req.front());
    std::vector<std::size_t> at_required{0};
    for (std::size_t s = 0; s + 1 < req.size(); ++s) {
      fill_segment(req[s], req[s + 1], field, fine, pts);
      at_required.push_back(pts.size() - 1);
    }
    // Feed back spacings that rounding compressed below the field so the
    // neighbouring segments grade away from them.
    bool changed = false;
    for (std::size_t r = 0; r < at_required.size(); ++r) {
      const std::size_t i = at_required[r];
      double s = std::numeric_limits<double>::infinity();
      if (i > 0) s = std::min(s, pts[i] - pts[i - 1]);
      if (i + 1 < pts.size()) s = std::min(s, pts[i + 1] - pts[i]);
      if (s < 0.98 * field(pts[i])) {
        field.add({pts[i], s, 0.0});
        changed = true;
      }
    }
    if (!changed) break;
  }
  return pts;
}

TensorMesh::TensorMesh(std::vector<std::vector<double>> axes, double transverse)
    : axes_(std::move(axes)), transverse_(transverse) {
  if (axes_.empty() || axes_.size() > 3) throw GeometryError("mesh dimension must be 1, 2 or 3");
  std::size_t n = 1;
  for (std::size_t a = 0; a < axes_.size(); ++a) {
    const auto& ax = axes_[a];
    if (ax.size() < 2) throw GeometryError("mesh axis needs at least two lines");
    for (std::size_t i = 1; i < ax.size(); ++i) {
      if (!(ax[i] > ax[i - 1])) throw GeometryError("mesh coordinates must strictly increase");
    }
    shape_[a] = ax.size() - 1;
    n *= shape_[a];
  }
  regions_.assign(n, Region::Substrate);
  boxes_.assign(n, -1);
}

std::array<std::size_t, 3> TensorMesh::unindex(std::size_t cell) const {
  return {cell % shape_[0], (cell / shape_[0]) % shape_[1], cell / (shape_[0] * shape_[1])};
}

Point3 TensorMesh::center(std::size_t cell) const {
  const auto ijk = unindex(cell);
  Point3 p{0.0, 0.0, 0.0};
  for (int a = 0; a < dimension(); ++a) {
    p[a] = 0.5 * (axes_[a][ijk[a]] + axes_[a][ijk[a] + 1]);
  }
  return p;
}

double TensorMesh::width(std::size_t cell, int axis) const {
  const auto ijk = unindex(cell);
  return axes_[axis][ijk[axis] + 1] - axes_[axis][ijk[axis]];
}

double TensorMesh::volume(std::size_t cell) const {
  double v = transverse_;
  for (int a = 0; a < dimension(); ++a) v *= width(cell, a);
  return v * 1e-21;
}

double TensorMesh::total_volume() const {
  double v = transverse_;
  for (const auto& ax : axes_) v *= ax.back() - ax.front();
  return v * 1e-21;
}

std::vector<MeshEdge> TensorMesh::edges() const {
  std::vector<MeshEdge> out;
  const std::size_t n = cell_count();
  std::size_t stride = 1;
  for (int a = 0; a < dimension(); ++a) {
    for (std::size_t c = 0; c < n; ++c) {
      const auto ijk = unindex(c);
      if (ijk[a] + 1 >= shape_[a]) continue;
      const std::size_t d = c + stride;
      if (material(c) == Material::Metal || material(d) == Material::Metal) continue;
      double area = transverse_;
      for (int b = 0; b < dimension(); ++b) {
        if (b != a) area *= width(c, b);
      }
      const double dist = 0.5 * (width(c, a) + width(d, a));
      // widths are nm and transverse is nm^(3-d), so area is nm^2 throughout
      out.push_back({static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(d), area * kNm2,
                     dist * kNm, 0.5 * width(c, a) / dist});
    }
    stride *= shape_[a];
  }
  return out;
}

const MeshContact* TensorMesh::contact(const std::string& name) const {
  for (const auto& c : contacts_) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

int TensorMesh::contact_index(const std::string& name) const {
  for (std::size_t i = 0; i < contacts_.size(); ++i) {
    if (contacts_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

void TensorMesh::add_end_contact(MeshContact contact, int axis, bool high) {
  const std::size_t n = cell_count();
  for (std::size_t c = 0; c < n; ++c) {
    const auto ijk = unindex(c);
    if (ijk[axis] != (high ? shape_[axis] - 1 : 0)) continue;
    if (material(c) == Material::Metal) continue;
    double area = transverse_;
    for (int b = 0; b < dimension(); ++b) {
      if (b != axis) area *= width(c, b);
    }
    contact.faces.push_back(
        {static_cast<std::uint32_t>(c), area * kNm2, 0.5 * width(c, axis) * kNm});
  }
  contacts_.push_back(std::move(contact));
}

namespace {

bool is_refined_region(Region r) {
  return r == Region::Source || r == Region::Drain || r == Region::MivLiner;
}

}  // namespace

TensorMesh generate_mesh(const DeviceLayout& layout, const RefinementPolicy& policy) {
  const int dim = policy.dimension;
  if (dim != 2 && dim != 3) throw GeometryError("layout meshes are 2D or 3D");
  if (!(policy.min_spacing > 0.0) || !(policy.max_spacing >= policy.min_spacing) ||
      !(policy.growth > 1.0) || policy.growth > 1.3 || !(policy.refine_distance >= 0.0)) {
    throw GeometryError("invalid refinement policy");
  }
  const double sheet = policy.sheet_depth > 0.0 ? policy.sheet_depth : layout.geometry.src_depth;

  std::vector<std::vector<double>> axes;
  std::size_t cells = 1;
  for (int a = 0; a < dim; ++a) {
    const double lo = layout.bounds.lo[a];
    const double hi = layout.bounds.hi[a];
    std::vector<double> required;
    std::vector<double> critical;
    for (const auto& b : layout.boxes) {
      required.push_back(b.box.lo[a]);
      required.push_back(b.box.hi[a]);
      if (is_refined_region(b.region)) {
        for (double v : {b.box.lo[a], b.box.hi[a]}) {
          if (v > lo && v < hi) critical.push_back(v);
        }
      }
    }
    for (const auto& c : layout.contacts) {
      if (c.surface == ContactSurface::Top && a == 2) continue;
      required.push_back(c.patch.lo[a]);
      required.push_back(c.patch.hi[a]);
    }
    if (a == 2) critical.push_back(lo);  // gate interface
    axes.push_back(generate_axis(lo, hi, required, critical, policy));
    cells *= axes.back().size() - 1;
    if (cells > policy.cell_budget) {
      throw BudgetError("mesh needs more than " + std::to_string(policy.cell_budget) +
                        " cells to honour the spacing policy");
    }
  }

  TensorMesh mesh(std::move(axes), dim == 2 ? sheet : 1.0);
  if (dim == 2) mesh.set_sheet_depth(sheet);
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
    const Point3 p = mesh.center(c);
    const LayoutBox* box = nullptr;
    for (std::size_t b = 0; b < layout.boxes.size(); ++b) {
      if (layout.boxes[b].box.contains(p)) {
        box = &layout.boxes[b];
        mesh.set_layout_box(c, static_cast<std::int32_t>(b));
        break;
      }
    }
    if (box == nullptr) throw GeometryError("layout boxes do not cover the mesh");
    mesh.set_region(c, box->region);
  }

  const auto shape = mesh.shape();
  for (const auto& spec : layout.contacts) {
    MeshContact mc{spec.name, spec.kind, spec.workfunction, spec.insulator_thickness,
                   spec.insulator_permittivity, {}};
    if (spec.surface == ContactSurface::Top) {
      for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
        if (dim == 3 && mesh.unindex(c)[2] != 0) continue;
        const Point3 p = mesh.center(c);
        if (p[0] < spec.patch.lo[0] || p[0] > spec.patch.hi[0] || p[1] < spec.patch.lo[1] ||
            p[1] > spec.patch.hi[1]) {
          continue;
        }
        if (mesh.material(c) != Material::Silicon) continue;
        const double area = mesh.width(c, 0) * mesh.width(c, 1) * kNm2;
        const double dist = 0.5 * (dim == 3 ? mesh.width(c, 2) : sheet) * kNm;
        mc.faces.push_back({static_cast<std::uint32_t>(c), area, dist});
      }
    } else {
      std::size_t stride = 1;
      for (int a = 0; a < dim; ++a) {
        for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
          const auto ijk = mesh.unindex(c);
          if (ijk[a] + 1 >= shape[a]) continue;
          const std::size_t d = c + stride;
          const bool cm = mesh.material(c) == Material::Metal;
          const bool dm = mesh.material(d) == Material::Metal;
          if (cm == dm) continue;
          const std::size_t metal = cm ? c : d;
          const std::size_t other = cm ? d : c;
          if (!spec.patch.contains(mesh.center(metal))) continue;
          double area = mesh.transverse();
          for (int b = 0; b < dim; ++b) {
            if (b != a) area *= mesh.width(other, b);
          }
          mc.faces.push_back({static_cast<std::uint32_t>(other), area * kNm2,
                              0.5 * mesh.width(other, a) * kNm});
        }
        stride *= shape[a];
      }
    }
    if (mc.faces.empty()) throw GeometryError("contact '" + spec.name + "' covers no mesh faces");
    std::sort(mc.faces.begin(), mc.faces.end(),
              [](const ContactFace& x, const ContactFace& y) { return x.cell < y.cell; });
    mesh.add_contact(std::move(mc));
  }
  return mesh;
}

DopingField assign_doping(const DeviceLayout& layout, const TensorMesh& mesh) {
  DopingField f;
  f.net.assign(mesh.cell_count(), 0.0);
  f.total.assign(mesh.cell_count(), 0.0);
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
    if (mesh.material(c) != Material::Silicon) continue;
    const auto b = mesh.layout_box(c);
    if (b < 0) continue;
    const auto& prof = layout.boxes[static_cast<std::size_t>(b)].doping;
    const double depth = mesh.dimension() == 3 ? mesh.center(c)[2] : 0.0;
    const double nd = prof.donor_at(depth);
    f.net[c] = nd - prof.acceptor;
    f.total[c] = nd + prof.acceptor;
  }
  return f;
}

DopingField uniform_doping(const TensorMesh& mesh, const std::vector<double>& net) {
  DopingField f;
  f.net = net;
  f.total.resize(net.size());
  for (std::size_t c = 0; c < net.size(); ++c) {
    f.total[c] = std::abs(net[c]);
    if (mesh.material(c) != Material::Silicon) f.net[c] = f.total[c] = 0.0;
  }
  return f;
}

void write_mesh_csv(std::ostream& os, const TensorMesh& mesh, const DopingField& doping) {
  os << "x_nm,y_nm,z_nm,region,net_doping_cm3\n";
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
    const auto p = mesh.center(c);
    os << format_double(p[0]) << ',' << format_double(p[1]) << ',' << format_double(p[2]) << ','
       << to_string(mesh.region(c)) << ',' << format_double(doping.net[c]) << '\n';
  }
}

}  // namespace mivkoz
