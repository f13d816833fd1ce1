#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mivkoz/mesh.hpp"
#include "mivkoz/physics.hpp"
#include "mivkoz/process_model.hpp"

namespace mivkoz {

enum class Statistics { Boltzmann, FermiDiracApprox };

/// Linear solves inside the nonlinear loops. Direct: sparse LDLT for
/// Poisson and LU for the carrier equations, both with the ordering
/// analysed once per mesh; keeps discrete current conservation at
/// round-off level, which femtoampere leakage currents need. Iterative:
/// CG + incomplete Cholesky and BiCGSTAB + ILUT at `linear_tolerance`.
enum class LinearSolver { Direct, Iterative };

struct SolverOptions {
  double gummel_tolerance = 1e-6;  ///< V, max potential change per outer pass
  int max_iterations = 200;
  double damping = 0.5;            ///< V, clamp on each Newton potential update
  Statistics statistics = Statistics::Boltzmann;
  double linear_tolerance = 1e-10; ///< relative, iterative solves
  LinearSolver linear_solver = LinearSolver::Direct;

  double mu_n = 1417.0;  ///< cm^2/Vs
  double mu_p = 470.0;
  bool doping_dependent_mobility = false;
  SrhParameters srh{};
  MaterialConstants material{};

  double ramp_step = 0.1;         ///< V per terminal
  double min_ramp_step = 0.0125;  ///< V

  void validate() const;
  /// Canonical text of every field; its hash tags simulated outputs.
  std::string serialize() const;
  std::string hash() const;
};

/// Terminal voltages keyed by contact name. Contacts not listed sit at 0 V.
using Voltages = std::map<std::string, double>;

/// Maps a transistor bias onto the standard contact names: source (0 V),
/// drain, gate, substrate and miv.
Voltages terminal_voltages(const BiasPoint& bias);

struct SolutionState {
  std::vector<double> psi;  ///< V, per cell (metal cells hold 0)
  std::vector<double> n;    ///< cm^-3, zero outside silicon
  std::vector<double> p;
  Voltages voltages;
  BiasPoint bias;
  bool converged = false;
  int iterations = 0;
  std::vector<double> residuals;  ///< potential update norm per outer pass
};

/// Terminal currents in A, positive into the device, in mesh contact order.
struct ContactCurrents {
  std::vector<std::string> names;
  std::vector<double> amps;

  double at(const std::string& name) const;
  double max_abs() const;
  /// |sum of currents| / max |current| (0 when every current is 0).
  double imbalance() const;
};

/// Bundles a mesh with its doping and the factorization workspaces so that
/// many bias points reuse the same sparse structure. Not thread-safe; use
/// one instance per worker.
class DeviceSolver {
 public:
  DeviceSolver(const TensorMesh& mesh, DopingField doping, SolverOptions options = {});
  ~DeviceSolver();
  DeviceSolver(const DeviceSolver&) = delete;
  DeviceSolver& operator=(const DeviceSolver&) = delete;

  const TensorMesh& mesh() const { return mesh_; }
  const DopingField& doping() const { return doping_; }
  const SolverOptions& options() const { return options_; }

  /// Nonlinear Poisson with flat quasi-Fermi levels and all contacts at 0 V.
  SolutionState equilibrium();

  /// Ramps from `state` to `target`, halving the step on failures.
  SolutionState solve(const SolutionState& state, const Voltages& target);
  SolutionState solve(const SolutionState& state, const BiasPoint& target);

  ContactCurrents currents(const SolutionState& state) const;

  /// Charge-neutral potential for a net doping (V, intrinsic-level reference).
  double neutral_potential(double net_doping) const;

  struct Impl;  // sparse workspaces, defined in solver.cpp

 private:
  const TensorMesh& mesh_;
  DopingField doping_;
  SolverOptions options_;
  std::unique_ptr<Impl> impl_;
};

SolutionState solve_equilibrium(const TensorMesh& mesh, const DopingField& doping,
                                const SolverOptions& options = {});

struct BiasSolution {
  SolutionState state;
  ContactCurrents currents;
};

BiasSolution solve_bias(const TensorMesh& mesh, const DopingField& doping,
                        const SolutionState& state, const BiasPoint& target,
                        const SolverOptions& options = {});

struct IVPoint {
  BiasPoint bias;
  double i_d = 0.0;  ///< drain current, A
  bool converged = false;
  int iterations = 0;
};

struct IVCurve {
  std::vector<IVPoint> points;
  std::optional<std::string> failure;  ///< message of the point that failed
  std::optional<BiasPoint> failed_at;

  const IVPoint* find_vgs(double v_gs) const;
};

/// Drain current over a v_gs grid at fixed v_ds; each point warm-starts
/// from the previous. `base` supplies v_sub and v_miv. A convergence
/// failure ends the curve and is recorded, earlier points are kept.
IVCurve id_vg_sweep(DeviceSolver& solver, const SolutionState& start, double v_ds,
                    const std::vector<double>& v_gs_grid, const BiasPoint& base = {});
IVCurve id_vd_sweep(DeviceSolver& solver, const SolutionState& start, double v_gs,
                    const std::vector<double>& v_ds_grid, const BiasPoint& base = {});

/// Columns: v_gs,v_ds,v_miv,i_d_amps,converged,iterations
void write_iv_csv(std::ostream& os, const IVCurve& curve);

/// Mesh dump columns followed by psi_v,n_cm3,p_cm3.
void write_solution_csv(std::ostream& os, const TensorMesh& mesh, const DopingField& doping,
                        const SolutionState& state);

}  // namespace mivkoz
