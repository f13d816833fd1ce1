#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mivkoz/process_model.hpp"

namespace mivkoz {

/// Controls line placement for generate_mesh. Lengths in nm.
struct RefinementPolicy {
  /// 2: top-view plane (x, y) of the surface layer, `sheet_depth` thick.
  /// 3: full tensor mesh of the substrate layer.
  int dimension = 2;
  double min_spacing = 0.5;      ///< near oxide/silicon interfaces and junctions
  double refine_distance = 2.0;  ///< half-width of the fine band
  double max_spacing = 12.0;
  double growth = 1.2;           ///< target ratio; emitted ratios stay below 1.3
  std::size_t cell_budget = 80000;
  double sheet_depth = 0.0;      ///< 2D only; 0 selects the source/drain depth

  bool operator==(const RefinementPolicy&) const = default;
};

/// Builds one strictly increasing axis over [lo, hi] that contains every
/// `required` coordinate, keeps spacing <= min_spacing within
/// refine_distance of every `critical` coordinate and grades towards
/// max_spacing elsewhere.
std::vector<double> generate_axis(double lo, double hi, std::vector<double> required,
                                  const std::vector<double>& critical,
                                  const RefinementPolicy& policy);

/// A boundary face through which a contact acts on one cell.
struct ContactFace {
  std::uint32_t cell;
  double area;      ///< cm^2
  double distance;  ///< cell center to face, cm
};

struct MeshContact {
  std::string name;
  ContactKind kind = ContactKind::Ohmic;
  double workfunction = 0.0;
  double insulator_thickness = 0.0;  ///< nm
  double insulator_permittivity = 3.9;
  std::vector<ContactFace> faces;
};

/// Link between two face-adjacent cells.
struct MeshEdge {
  std::uint32_t a;
  std::uint32_t b;
  double area;      ///< cm^2
  double distance;  ///< center to center, cm
  double share_a;   ///< fraction of `distance` lying inside cell a
};

/// Cell-centered tensor-product mesh in 1, 2 or 3 dimensions. Collapsed
/// dimensions contribute the constant `transverse` factor (nm^(3-d)) to
/// every volume and in-plane face area.
class TensorMesh {
 public:
  TensorMesh() = default;
  TensorMesh(std::vector<std::vector<double>> axes, double transverse);

  int dimension() const { return static_cast<int>(axes_.size()); }
  const std::vector<double>& axis(int a) const { return axes_[a]; }
  double transverse() const { return transverse_; }
  std::size_t cell_count() const { return regions_.size(); }
  std::array<std::size_t, 3> shape() const { return shape_; }

  std::size_t index(std::size_t i, std::size_t j = 0, std::size_t k = 0) const {
    return i + shape_[0] * (j + shape_[1] * k);
  }
  std::array<std::size_t, 3> unindex(std::size_t cell) const;

  /// Cell center in nm; collapsed coordinates are reported as 0.
  Point3 center(std::size_t cell) const;
  double width(std::size_t cell, int axis) const;
  double volume(std::size_t cell) const;  ///< cm^3
  double total_volume() const;            ///< cm^3

  Region region(std::size_t cell) const { return regions_[cell]; }
  Material material(std::size_t cell) const { return material_of(regions_[cell]); }
  void set_region(std::size_t cell, Region r) { regions_[cell] = r; }

  /// Index into the source layout's box list, or -1 for hand-built meshes.
  std::int32_t layout_box(std::size_t cell) const { return boxes_[cell]; }
  void set_layout_box(std::size_t cell, std::int32_t box) { boxes_[cell] = box; }

  /// Face-adjacent pairs where neither cell is metal.
  std::vector<MeshEdge> edges() const;

  const std::vector<MeshContact>& contacts() const { return contacts_; }
  void add_contact(MeshContact contact) { contacts_.push_back(std::move(contact)); }
  const MeshContact* contact(const std::string& name) const;
  int contact_index(const std::string& name) const;

  /// Adds an Ohmic/Insulated contact on the low (`high = false`) or high
  /// end of `axis`, covering every non-metal cell of that boundary layer.
  void add_end_contact(MeshContact contact, int axis, bool high);

  /// Out-of-plane thickness used for 2D sheets (nm), 0 otherwise.
  double sheet_depth() const { return sheet_depth_; }
  void set_sheet_depth(double d) { sheet_depth_ = d; }

 private:
  std::vector<std::vector<double>> axes_;
  double transverse_ = 1.0;
  double sheet_depth_ = 0.0;
  std::array<std::size_t, 3> shape_{1, 1, 1};
  std::vector<Region> regions_;
  std::vector<std::int32_t> boxes_;
  std::vector<MeshContact> contacts_;
};

/// Meshes a layout. Throws BudgetError when the cell count would exceed
/// the policy budget.
TensorMesh generate_mesh(const DeviceLayout& layout, const RefinementPolicy& policy);

/// Net doping N_D - N_A per cell (cm^-3) plus the total impurity level
/// used by doping-dependent mobility. Non-silicon cells carry zeros.
struct DopingField {
  std::vector<double> net;
  std::vector<double> total;
};

/// Evaluates each cell's layout box profile at the cell center depth
/// (3D) or at the surface (2D sheet).
DopingField assign_doping(const DeviceLayout& layout, const TensorMesh& mesh);

/// Uniform doping for hand-built meshes (oracle structures in tests).
DopingField uniform_doping(const TensorMesh& mesh, const std::vector<double>& net_per_cell);

/// CSV columns: x_nm,y_nm,z_nm,region,net_doping_cm3
void write_mesh_csv(std::ostream& os, const TensorMesh& mesh, const DopingField& doping);

}  // namespace mivkoz
