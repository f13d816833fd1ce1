#include "mivkoz/solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "mivkoz/errors.hpp"
#include "mivkoz/units.hpp"

namespace mivkoz {

using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Vec = Eigen::VectorXd;

namespace {

constexpr double kVt = constants::thermal_voltage;

bool finite_all(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Index of entry (row, col) inside the compressed value array.
int value_slot(const SpMat& m, int row, int col) {
  const int* inner = m.innerIndexPtr();
  const int* begin = inner + m.outerIndexPtr()[col];
  const int* end = inner + m.outerIndexPtr()[col + 1];
  const int* it = std::lower_bound(begin, end, row);
  return static_cast<int>(it - inner);
}

// Sparsity pattern over `n` unknowns with a diagonal plus the listed pairs.
SpMat make_pattern(int n, const std::vector<std::pair<int, int>>& pairs) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(n) + 2 * pairs.size());
  for (int i = 0; i < n; ++i) t.emplace_back(i, i, 1.0);
  for (auto [a, b] : pairs) {
    t.emplace_back(a, b, 1.0);
    t.emplace_back(b, a, 1.0);
  }
  SpMat m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

}  // namespace

void SolverOptions::validate() const {
  if (!(gummel_tolerance > 0.0) || !(linear_tolerance > 0.0) || !(damping > 0.0)) {
    throw ConfigError("solver tolerances and damping must be positive");
  }
  if (max_iterations < 1) throw ConfigError("solver max iterations must be at least 1");
  if (!(mu_n > 0.0) || !(mu_p > 0.0)) throw ConfigError("mobilities must be positive");
  if (!(srh.tau_n > 0.0) || !(srh.tau_p > 0.0)) throw ConfigError("lifetimes must be positive");
  if (!(ramp_step > 0.0) || !(min_ramp_step > 0.0) || min_ramp_step > ramp_step) {
    throw ConfigError("invalid bias ramp steps");
  }
}

std::string SolverOptions::serialize() const {
  std::ostringstream os;
  os << "gummel_tolerance=" << format_double(gummel_tolerance)
     << ";max_iterations=" << max_iterations << ";damping=" << format_double(damping)
     << ";statistics=" << (statistics == Statistics::Boltzmann ? "boltzmann" : "fermi_dirac")
     << ";linear_tolerance=" << format_double(linear_tolerance)
     << ";linear=" << (linear_solver == LinearSolver::Direct ? "direct" : "iterative")
     << ";mu_n=" << format_double(mu_n) << ";mu_p=" << format_double(mu_p)
     << ";doping_mobility=" << doping_dependent_mobility << ";n_i=" << format_double(srh.n_i)
     << ";tau_n=" << format_double(srh.tau_n) << ";tau_p=" << format_double(srh.tau_p)
     << ";trap=" << format_double(srh.trap_level) << ";eps_si=" << format_double(material.eps_si)
     << ";eps_ox=" << format_double(material.eps_ox) << ";ramp=" << format_double(ramp_step)
     << ";min_ramp=" << format_double(min_ramp_step);
  return os.str();
}

std::string SolverOptions::hash() const { return hex64(fnv1a(serialize())); }

Voltages terminal_voltages(const BiasPoint& b) {
  return {{"source", 0.0}, {"drain", b.v_ds}, {"gate", b.v_gs}, {"substrate", b.v_sub},
          {"miv", b.v_miv}};
}

double ContactCurrents::at(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return amps[i];
  }
  throw Error("no contact named '" + name + "'");
}

double ContactCurrents::max_abs() const {
  double m = 0.0;
  for (double a : amps) m = std::max(m, std::abs(a));
  return m;
}

double ContactCurrents::imbalance() const {
  double sum = 0.0;
  for (double a : amps) sum += a;
  const double m = max_abs();
  return m > 0.0 ? std::abs(sum) / m : 0.0;
}

struct DeviceSolver::Impl {
  struct PEdge {
    int a, b;        // Poisson unknowns
    double g;        // eps0/q * eps * A / d, 1/V
    int saa, sab, sba, sbb;
  };
  struct CEdge {
    int a, b;        // continuity unknowns
    std::uint32_t ca, cb;  // cells
    double kn, kp;   // mu * Vt * A / d, cm^3/s
    int saa, sab, sba, sbb;
  };
  struct Face {
    int contact;
    std::uint32_t cell;
    double g;        // Poisson conductance, 1/V
    double kn, kp;   // carrier exchange (ohmic only)
    double psi0, n0, p0, gn0, gp0;  // neutral values at 0 V (ohmic only)
  };

  int np = 0, nc = 0;
  std::vector<int> pidx, cidx;           // cell -> unknown or -1
  std::vector<std::uint32_t> pcell, ccell;  // unknown -> cell
  std::vector<double> vol;               // cm^3 per cell
  std::vector<PEdge> pedges;
  std::vector<CEdge> cedges;
  std::vector<Face> faces;
  std::vector<int> pdiag, cdiag;
  std::vector<double> contact_offset;    // insulated: -(workfunction - intrinsic)
  std::vector<bool> contact_ohmic;

  SpMat pmat, nmat, pmat_h;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_n, lu_p;
  bool analyzed = false, poisson_analyzed = false;
};

DeviceSolver::DeviceSolver(const TensorMesh& mesh, DopingField doping, SolverOptions options)
    : mesh_(mesh), doping_(std::move(doping)), options_(options), impl_(std::make_unique<Impl>()) {
  options_.validate();
  auto& m = *impl_;
  const std::size_t cells = mesh.cell_count();
  if (doping_.net.size() != cells) throw Error("doping field does not match mesh");
  if (doping_.total.size() != cells) doping_.total.assign(cells, 0.0);
  const double eps_scale = constants::eps0 / constants::q;
  const auto& mat = options_.material;

  m.pidx.assign(cells, -1);
  m.cidx.assign(cells, -1);
  m.vol.resize(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    m.vol[c] = mesh.volume(c);
    const Material k = mesh.material(c);
    if (k != Material::Metal) {
      m.pidx[c] = m.np++;
      m.pcell.push_back(static_cast<std::uint32_t>(c));
    }
    if (k == Material::Silicon) {
      m.cidx[c] = m.nc++;
      m.ccell.push_back(static_cast<std::uint32_t>(c));
    }
  }
  auto eps_of = [&](std::size_t c) {
    return mesh.material(c) == Material::Silicon ? mat.eps_si : mat.eps_ox;
  };
  auto mobility = [&](std::size_t c, bool electron) {
    if (!options_.doping_dependent_mobility) return electron ? options_.mu_n : options_.mu_p;
    return electron ? electron_mobility(doping_.total[c]) : hole_mobility(doping_.total[c]);
  };

  std::vector<std::pair<int, int>> ppairs, cpairs;
  for (const auto& e : mesh.edges()) {
    const double inv_eps = e.share_a / eps_of(e.a) + (1.0 - e.share_a) / eps_of(e.b);
    m.pedges.push_back({m.pidx[e.a], m.pidx[e.b], eps_scale * e.area / (e.distance * inv_eps),
                        0, 0, 0, 0});
    ppairs.emplace_back(m.pidx[e.a], m.pidx[e.b]);
    if (m.cidx[e.a] >= 0 && m.cidx[e.b] >= 0) {
      const double geo = kVt * e.area / e.distance;
      const double mun = 0.5 * (mobility(e.a, true) + mobility(e.b, true));
      const double mup = 0.5 * (mobility(e.a, false) + mobility(e.b, false));
      m.cedges.push_back({m.cidx[e.a], m.cidx[e.b], e.a, e.b, mun * geo, mup * geo, 0, 0, 0, 0});
      cpairs.emplace_back(m.cidx[e.a], m.cidx[e.b]);
    }
  }

  const double wf_i = mat.intrinsic_workfunction();
  for (std::size_t ci = 0; ci < mesh.contacts().size(); ++ci) {
    const auto& ct = mesh.contacts()[ci];
    const bool ohmic = ct.kind == ContactKind::Ohmic;
    m.contact_ohmic.push_back(ohmic);
    m.contact_offset.push_back(ohmic ? 0.0 : -(ct.workfunction - wf_i));
    for (const auto& f : ct.faces) {
      if (m.pidx[f.cell] < 0) continue;
      Impl::Face face{static_cast<int>(ci), f.cell, 0, 0, 0, 0, 0, 0, 1, 1};
      const double ins = ohmic ? 0.0 : ct.insulator_thickness * 1e-7 / ct.insulator_permittivity;
      face.g = eps_scale * f.area / (ins + f.distance / eps_of(f.cell));
      if (ohmic) {
        if (m.cidx[f.cell] < 0) continue;
        const double geo = kVt * f.area / f.distance;
        face.kn = mobility(f.cell, true) * geo;
        face.kp = mobility(f.cell, false) * geo;
        const double psi = neutral_potential(doping_.net[f.cell]);
        face.psi0 = psi;
        if (options_.statistics == Statistics::Boltzmann) {
          face.n0 = mat.n_i * std::exp(psi / kVt);
          face.p0 = mat.n_i * std::exp(-psi / kVt);
        } else {
          const double eta_n = psi / kVt + std::log(mat.n_i / mat.n_c);
          const double eta_p = -psi / kVt + std::log(mat.n_i / mat.n_v);
          face.n0 = mat.n_c * fermi_half(eta_n);
          face.p0 = mat.n_v * fermi_half(eta_p);
          face.gn0 = fermi_half(eta_n) / std::exp(eta_n);
          face.gp0 = fermi_half(eta_p) / std::exp(eta_p);
        }
      }
      m.faces.push_back(face);
    }
  }

  m.pmat = make_pattern(m.np, ppairs);
  for (auto& e : m.pedges) {
    e.saa = value_slot(m.pmat, e.a, e.a);
    e.sab = value_slot(m.pmat, e.a, e.b);
    e.sba = value_slot(m.pmat, e.b, e.a);
    e.sbb = value_slot(m.pmat, e.b, e.b);
  }
  for (int i = 0; i < m.np; ++i) m.pdiag.push_back(value_slot(m.pmat, i, i));
  m.nmat = make_pattern(m.nc, cpairs);
  for (auto& e : m.cedges) {
    e.saa = value_slot(m.nmat, e.a, e.a);
    e.sab = value_slot(m.nmat, e.a, e.b);
    e.sba = value_slot(m.nmat, e.b, e.a);
    e.sbb = value_slot(m.nmat, e.b, e.b);
  }
  for (int i = 0; i < m.nc; ++i) m.cdiag.push_back(value_slot(m.nmat, i, i));
  m.pmat_h = m.nmat;
}

DeviceSolver::~DeviceSolver() = default;

double DeviceSolver::neutral_potential(double net) const {
  const auto& mat = options_.material;
  if (options_.statistics == Statistics::Boltzmann) {
    return kVt * std::asinh(0.5 * net / mat.n_i);
  }
  // N + p - n decreases monotonically in psi.
  const double ln_c = std::log(mat.n_i / mat.n_c);
  const double ln_v = std::log(mat.n_i / mat.n_v);
  double lo = -1.5, hi = 1.5;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = net + mat.n_v * fermi_half(-mid / kVt + ln_v) -
                     mat.n_c * fermi_half(mid / kVt + ln_c);
    (f > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

// Carrier statistics helpers; densities in cm^-3, potentials in V.
struct Stats {
  const MaterialConstants& mat;
  bool fd;
  double ln_c = std::log(mat.n_i / mat.n_c);
  double ln_v = std::log(mat.n_i / mat.n_v);

  // density and derivative w.r.t. psi
  std::pair<double, double> electrons(double psi, double phi) const {
    const double x = (psi - phi) / kVt;
    if (!fd) {
      const double n = mat.n_i * std::exp(x);
      return {n, n / kVt};
    }
    const double eta = x + ln_c;
    return {mat.n_c * fermi_half(eta), mat.n_c * fermi_half_derivative(eta) / kVt};
  }
  std::pair<double, double> holes(double psi, double phi) const {
    const double x = (phi - psi) / kVt;
    if (!fd) {
      const double p = mat.n_i * std::exp(x);
      return {p, p / kVt};  // magnitude of dp/dpsi
    }
    const double eta = x + ln_v;
    return {mat.n_v * fermi_half(eta), mat.n_v * fermi_half_derivative(eta) / kVt};
  }
  double phi_n(double psi, double n) const {
    if (!fd) return psi - kVt * std::log(n / mat.n_i);
    return psi - kVt * (fermi_half_inverse(n / mat.n_c) - ln_c);
  }
  double phi_p(double psi, double p) const {
    if (!fd) return psi + kVt * std::log(p / mat.n_i);
    return psi + kVt * (fermi_half_inverse(p / mat.n_v) - ln_v);
  }
  // degeneracy factor F(eta)/exp(eta) of a density
  double gamma_n(double n) const {
    if (!fd) return 1.0;
    const double eta = fermi_half_inverse(n / mat.n_c);
    return n / (mat.n_c * std::exp(eta));
  }
  double gamma_p(double p) const {
    if (!fd) return 1.0;
    const double eta = fermi_half_inverse(p / mat.n_v);
    return p / (mat.n_v * std::exp(eta));
  }
};

constexpr double kDensityFloor = 1e-30;

}  // namespace

// Newton iteration on Poisson with the quasi-Fermi levels held fixed.
static int poisson_newton(const TensorMesh& mesh, DeviceSolver::Impl& m, SpMat& mat, const SolverOptions& opt, const DopingField& doping,
                          const std::vector<double>& contact_psi, const std::vector<double>& phin,
                          const std::vector<double>& phip, std::vector<double>& psi) {
  (void)mesh;
  const bool direct = opt.linear_solver == LinearSolver::Direct;
  if (direct && !m.poisson_analyzed) {
    m.ldlt.analyzePattern(mat);
    m.poisson_analyzed = true;
  }
  const Stats st{opt.material, opt.statistics == Statistics::FermiDiracApprox};
  const double tol = 0.1 * opt.gummel_tolerance;
  Vec rhs(m.np), delta(m.np);
  Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<double>>
      cg;
  cg.setTolerance(opt.linear_tolerance);
  cg.setMaxIterations(std::max(1000, 4 * m.np));
  double* val = mat.valuePtr();
  for (int it = 1; it <= 100; ++it) {
    std::fill(val, val + mat.nonZeros(), 0.0);
    rhs.setZero();
    for (const auto& e : m.pedges) {
      const double d = psi[m.pcell[e.b]] - psi[m.pcell[e.a]];
      val[e.saa] += e.g;
      val[e.sbb] += e.g;
      val[e.sab] -= e.g;
      val[e.sba] -= e.g;
      rhs[e.a] += e.g * d;
      rhs[e.b] -= e.g * d;
    }
    for (std::size_t f = 0; f < m.faces.size(); ++f) {
      const auto& face = m.faces[f];
      const int i = m.pidx[face.cell];
      val[m.pdiag[i]] += face.g;
      rhs[i] += face.g * (contact_psi[f] - psi[face.cell]);
    }
    for (int k = 0; k < m.nc; ++k) {
      const auto c = m.ccell[k];
      const auto [n, dn] = st.electrons(psi[c], phin[k]);
      const auto [p, dp] = st.holes(psi[c], phip[k]);
      const int i = m.pidx[c];
      val[m.pdiag[i]] += m.vol[c] * (dn + dp);
      rhs[i] += m.vol[c] * (p - n + doping.net[c]);
    }
    if (direct) {
      m.ldlt.factorize(mat);
      if (m.ldlt.info() != Eigen::Success) throw ConvergenceError("Poisson factorization failed");
      delta = m.ldlt.solve(rhs);
    } else {
      cg.compute(mat);
      delta = cg.solve(rhs);
      if (cg.info() != Eigen::Success && cg.error() > 1e-6) {
        throw ConvergenceError("Poisson linear solve failed");
      }
    }
    double worst = 0.0;
    for (int i = 0; i < m.np; ++i) {
      const double d = std::clamp(delta[i], -opt.damping, opt.damping);
      if (!std::isfinite(d)) throw ConvergenceError("Poisson update is not finite");
      psi[m.pcell[i]] += d;
      worst = std::max(worst, std::abs(d));
    }
    if (worst < tol) return it;
  }
  throw ConvergenceError("Poisson Newton iteration did not converge");
}

namespace {

template <class Solver>
bool linear_solve(Solver& s, const SpMat& a, const Vec& b, Vec& x) {
  s.factorize(a);
  if (s.info() != Eigen::Success) return false;
  x = s.solve(b);
  return s.info() == Eigen::Success;
}

}  // namespace

SolutionState DeviceSolver::equilibrium() {
  auto& m = *impl_;
  const Stats st{options_.material, options_.statistics == Statistics::FermiDiracApprox};
  SolutionState s;
  const std::size_t cells = mesh_.cell_count();
  s.psi.assign(cells, 0.0);
  for (std::size_t c = 0; c < cells; ++c) {
    if (mesh_.material(c) == Material::Silicon) s.psi[c] = neutral_potential(doping_.net[c]);
  }
  std::vector<double> contact_psi(m.faces.size());
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    const auto& face = m.faces[f];
    contact_psi[f] = m.contact_ohmic[face.contact] ? face.psi0 : m.contact_offset[face.contact];
  }
  std::vector<double> zero(m.nc, 0.0);
  s.iterations = poisson_newton(mesh_, m, m.pmat, options_, doping_, contact_psi, zero, zero, s.psi);
  s.n.assign(cells, 0.0);
  s.p.assign(cells, 0.0);
  for (int k = 0; k < m.nc; ++k) {
    const auto c = m.ccell[k];
    s.n[c] = st.electrons(s.psi[c], 0.0).first;
    s.p[c] = st.holes(s.psi[c], 0.0).first;
  }
  for (const auto& ct : mesh_.contacts()) s.voltages[ct.name] = 0.0;
  s.bias = BiasPoint{0.0, 0.0, 0.0, 0.0};
  s.converged = true;
  s.residuals.push_back(0.0);
  return s;
}

namespace {

double voltage_of(const Voltages& v, const std::string& name) {
  auto it = v.find(name);
  return it == v.end() ? 0.0 : it->second;
}

BiasPoint bias_of(const Voltages& v) {
  return {voltage_of(v, "gate"), voltage_of(v, "drain") - voltage_of(v, "source"),
          voltage_of(v, "substrate"), voltage_of(v, "miv")};
}

}  // namespace

// One Gummel solve at fixed contact voltages, warm-started from `start`.
static SolutionState gummel(const TensorMesh& mesh, DeviceSolver::Impl& m,
                            const SolverOptions& opt, const DopingField& doping,
                            const SolutionState& start, const Voltages& target) {
  const Stats st{opt.material, opt.statistics == Statistics::FermiDiracApprox};
  const auto& srh = opt.srh;
  const double n1 = srh.n1(), p1 = srh.p1(), ni2 = srh.n_i * srh.n_i;

  std::vector<double> contact_v(mesh.contacts().size());
  for (std::size_t ci = 0; ci < contact_v.size(); ++ci) {
    contact_v[ci] = voltage_of(target, mesh.contacts()[ci].name);
  }
  std::vector<double> contact_psi(m.faces.size());
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    const auto& face = m.faces[f];
    const double v = contact_v[face.contact];
    contact_psi[f] = v + (m.contact_ohmic[face.contact] ? face.psi0 : m.contact_offset[face.contact]);
  }

  SolutionState s = start;
  s.voltages = target;
  s.bias = bias_of(target);
  s.residuals.clear();
  s.converged = false;

  std::vector<double> phin(m.nc), phip(m.nc), gn(m.nc, 1.0), gp(m.nc, 1.0);
  Vec rhs(m.nc), x(m.nc);
  double* val = m.nmat.valuePtr();
  double* valp = m.pmat_h.valuePtr();
  const auto nnz = m.nmat.nonZeros();

  Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<double>> bicg;
  bicg.setTolerance(opt.linear_tolerance);
  bicg.setMaxIterations(std::max(1000, 2 * m.nc));
  const bool direct = opt.linear_solver == LinearSolver::Direct;
  auto solve_linear = [&](Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>& lu, const SpMat& a,
                          const Vec& b, Vec& out) {
    if (direct) return linear_solve(lu, a, b, out);
    bicg.compute(a);
    out = bicg.solveWithGuess(b, out);
    return bicg.info() == Eigen::Success;
  };
  if (direct && !m.analyzed) {
    m.lu_n.analyzePattern(m.nmat);
    m.lu_p.analyzePattern(m.pmat_h);
    m.analyzed = true;
  }

  // Electron then hole continuity at the current potential. Returns the
  // largest relative density change.
  auto solve_carriers = [&]() {
    double change = 0.0;
    // electrons: sum of outgoing currents equals the recombination in the cell
    std::fill(val, val + nnz, 0.0);
    rhs.setZero();
    for (const auto& e : m.cedges) {
      const double d = (s.psi[e.cb] - s.psi[e.ca]) / kVt + std::log(gn[e.b] / gn[e.a]);
      const double bp = e.kn * bernoulli(d), bm = e.kn * bernoulli(-d);
      val[e.saa] += bm;
      val[e.sab] -= bp;
      val[e.sbb] += bp;
      val[e.sba] -= bm;
    }
    for (int k = 0; k < m.nc; ++k) {
      const auto c = m.ccell[k];
      const double den = srh.tau_p * (s.n[c] + n1) + srh.tau_n * (s.p[c] + p1);
      val[m.cdiag[k]] += m.vol[c] * s.p[c] / den;
      rhs[k] += m.vol[c] * ni2 / den;
    }
    for (std::size_t f = 0; f < m.faces.size(); ++f) {
      const auto& face = m.faces[f];
      if (!m.contact_ohmic[face.contact]) continue;
      const int k = m.cidx[face.cell];
      const double d = (contact_psi[f] - s.psi[face.cell]) / kVt + std::log(face.gn0 / gn[k]);
      val[m.cdiag[k]] += face.kn * bernoulli(-d);
      rhs[k] += face.kn * face.n0 * bernoulli(d);
    }
    for (int k = 0; k < m.nc; ++k) x[k] = s.n[m.ccell[k]];
    if (!solve_linear(m.lu_n, m.nmat, rhs, x)) {
      throw ConvergenceError("electron continuity solve failed", s.residuals);
    }
    for (int k = 0; k < m.nc; ++k) {
      const auto c = m.ccell[k];
      const double v = std::max(x[k], kDensityFloor);
      change = std::max(change, std::abs(v - s.n[c]) / (s.n[c] + srh.n_i));
      s.n[c] = v;
    }

    // holes
    std::fill(valp, valp + nnz, 0.0);
    rhs.setZero();
    for (const auto& e : m.cedges) {
      const double d = (s.psi[e.cb] - s.psi[e.ca]) / kVt - std::log(gp[e.b] / gp[e.a]);
      const double bp = e.kp * bernoulli(d), bm = e.kp * bernoulli(-d);
      valp[e.saa] += bp;
      valp[e.sab] -= bm;
      valp[e.sbb] += bm;
      valp[e.sba] -= bp;
    }
    for (int k = 0; k < m.nc; ++k) {
      const auto c = m.ccell[k];
      const double den = srh.tau_p * (s.n[c] + n1) + srh.tau_n * (s.p[c] + p1);
      valp[m.cdiag[k]] += m.vol[c] * s.n[c] / den;
      rhs[k] += m.vol[c] * ni2 / den;
    }
    for (std::size_t f = 0; f < m.faces.size(); ++f) {
      const auto& face = m.faces[f];
      if (!m.contact_ohmic[face.contact]) continue;
      const int k = m.cidx[face.cell];
      const double d = (contact_psi[f] - s.psi[face.cell]) / kVt - std::log(face.gp0 / gp[k]);
      valp[m.cdiag[k]] += face.kp * bernoulli(d);
      rhs[k] += face.kp * face.p0 * bernoulli(-d);
    }
    for (int k = 0; k < m.nc; ++k) x[k] = s.p[m.ccell[k]];
    if (!solve_linear(m.lu_p, m.pmat_h, rhs, x)) {
      throw ConvergenceError("hole continuity solve failed", s.residuals);
    }
    for (int k = 0; k < m.nc; ++k) {
      const auto c = m.ccell[k];
      const double v = std::max(x[k], kDensityFloor);
      change = std::max(change, std::abs(v - s.p[c]) / (s.p[c] + srh.n_i));
      s.p[c] = v;
    }

    if (!finite_all(s.n) || !finite_all(s.p)) {
      throw ConvergenceError("carrier densities diverged", s.residuals);
    }
    return change;
  };

  for (int it = 1; it <= opt.max_iterations; ++it) {
    for (int k = 0; k < m.nc; ++k) {
      const auto c = m.ccell[k];
      phin[k] = st.phi_n(s.psi[c], std::max(s.n[c], kDensityFloor));
      phip[k] = st.phi_p(s.psi[c], std::max(s.p[c], kDensityFloor));
    }
    const std::vector<double> psi_old = s.psi;
    poisson_newton(mesh, m, m.pmat, opt, doping, contact_psi, phin, phip, s.psi);
    double dpsi = 0.0;
    for (std::size_t c = 0; c < s.psi.size(); ++c) dpsi = std::max(dpsi, std::abs(s.psi[c] - psi_old[c]));
    s.residuals.push_back(dpsi);
    if (!std::isfinite(dpsi)) throw ConvergenceError("potential diverged", s.residuals);

    if (st.fd) {
      for (int k = 0; k < m.nc; ++k) {
        const auto c = m.ccell[k];
        gn[k] = st.gamma_n(st.electrons(s.psi[c], phin[k]).first);
        gp[k] = st.gamma_p(st.holes(s.psi[c], phip[k]).first);
      }
    }

    solve_carriers();

    if (it >= 2 && dpsi < opt.gummel_tolerance) {
      // Settle n and p against each other at the final potential so that
      // recombination enters both equations alike and terminal currents
      // balance.
      for (int k = 0; k < 20 && solve_carriers() > 1e-10; ++k) {
      }
      s.converged = true;
      s.iterations = it;
      return s;
    }
  }
  throw ConvergenceError("Gummel iteration reached the iteration limit", s.residuals);
}

SolutionState DeviceSolver::solve(const SolutionState& state, const Voltages& target) {
  for (const auto& [name, v] : target) {
    if (mesh_.contact(name) == nullptr) throw ConfigError("no contact named '" + name + "'");
  }
  Voltages full = target;
  for (const auto& ct : mesh_.contacts()) full.try_emplace(ct.name, 0.0);
  for (const auto& [name, v] : full) {
    if (std::abs(v) > 2.0) throw RangeError(name + " voltage", v, -2.0, 2.0);
  }
  SolutionState cur = state;
  for (const auto& [name, v] : full) cur.voltages.try_emplace(name, 0.0);
  if (!cur.converged) throw ConvergenceError("starting state is not converged");

  auto reached = [&] {
    for (const auto& [name, v] : full) {
      if (voltage_of(cur.voltages, name) != v) return false;
    }
    return true;
  };
  double step = options_.ramp_step;
  int total_iterations = 0;
  while (!reached()) {
    Voltages next;
    for (const auto& [name, v] : full) {
      const double from = voltage_of(cur.voltages, name);
      const double d = v - from;
      next[name] = std::abs(d) > step ? from + std::copysign(step, d) : v;
    }
    try {
      SolutionState nx = gummel(mesh_, *impl_, options_, doping_, cur, next);
      total_iterations += nx.iterations;
      cur = std::move(nx);
      step = std::min(options_.ramp_step, 2.0 * step);
    } catch (const ConvergenceError& e) {
      step *= 0.5;
      if (step < options_.min_ramp_step * (1.0 - 1e-9)) {
        std::ostringstream os;
        os << e.what() << " (bias reached:";
        for (const auto& [name, v] : cur.voltages) os << ' ' << name << '=' << format_double(v);
        os << ')';
        throw ConvergenceError(os.str(), e.trace());
      }
    }
  }
  cur.voltages = full;
  cur.iterations = total_iterations;
  return cur;
}

SolutionState DeviceSolver::solve(const SolutionState& state, const BiasPoint& target) {
  validate_bias(target);
  Voltages v;
  for (const auto& [name, value] : terminal_voltages(target)) {
    if (mesh_.contact(name) != nullptr) v[name] = value;
  }
  SolutionState s = solve(state, v);
  s.bias = target;
  return s;
}

ContactCurrents DeviceSolver::currents(const SolutionState& s) const {
  const auto& m = *impl_;
  const Stats st{options_.material, options_.statistics == Statistics::FermiDiracApprox};
  ContactCurrents out;
  for (const auto& ct : mesh_.contacts()) {
    out.names.push_back(ct.name);
    out.amps.push_back(0.0);
  }
  for (const auto& face : m.faces) {
    if (!m.contact_ohmic[face.contact]) continue;
    const double v = voltage_of(s.voltages, mesh_.contacts()[face.contact].name);
    const double psi_c = v + face.psi0;
    const auto c = face.cell;
    const double gn = st.gamma_n(s.n[c]), gp = st.gamma_p(s.p[c]);
    const double dn = (psi_c - s.psi[c]) / kVt + std::log(face.gn0 / gn);
    const double dp = (psi_c - s.psi[c]) / kVt - std::log(face.gp0 / gp);
    const double i_n = face.kn * (face.n0 * bernoulli(dn) - s.n[c] * bernoulli(-dn));
    const double i_p = face.kp * (s.p[c] * bernoulli(dp) - face.p0 * bernoulli(-dp));
    out.amps[static_cast<std::size_t>(face.contact)] -= constants::q * (i_n + i_p);
  }
  return out;
}

SolutionState solve_equilibrium(const TensorMesh& mesh, const DopingField& doping,
                                const SolverOptions& options) {
  DeviceSolver s(mesh, doping, options);
  return s.equilibrium();
}

BiasSolution solve_bias(const TensorMesh& mesh, const DopingField& doping,
                        const SolutionState& state, const BiasPoint& target,
                        const SolverOptions& options) {
  DeviceSolver s(mesh, doping, options);
  BiasSolution out;
  out.state = s.solve(state, target);
  out.currents = s.currents(out.state);
  return out;
}

const IVPoint* IVCurve::find_vgs(double v_gs) const {
  for (const auto& p : points) {
    if (std::abs(p.bias.v_gs - v_gs) < 1e-12) return &p;
  }
  return nullptr;
}

namespace {

IVCurve sweep(DeviceSolver& solver, const SolutionState& start, const BiasPoint& base,
              const std::vector<double>& grid, bool gate_axis, double fixed) {
  IVCurve curve;
  SolutionState cur = start;
  for (double v : grid) {
    BiasPoint b = base;
    b.v_gs = gate_axis ? v : fixed;
    b.v_ds = gate_axis ? fixed : v;
    try {
      cur = solver.solve(cur, b);
      const auto i = solver.currents(cur);
      curve.points.push_back({b, i.at("drain"), cur.converged, cur.iterations});
    } catch (const ConvergenceError& e) {
      curve.failure = e.what();
      curve.failed_at = b;
      break;
    }
  }
  return curve;
}

}  // namespace

IVCurve id_vg_sweep(DeviceSolver& solver, const SolutionState& start, double v_ds,
                    const std::vector<double>& grid, const BiasPoint& base) {
  return sweep(solver, start, base, grid, true, v_ds);
}

IVCurve id_vd_sweep(DeviceSolver& solver, const SolutionState& start, double v_gs,
                    const std::vector<double>& grid, const BiasPoint& base) {
  return sweep(solver, start, base, grid, false, v_gs);
}

void write_iv_csv(std::ostream& os, const IVCurve& curve) {
  os << "v_gs,v_ds,v_miv,i_d_amps,converged,iterations\n";
  for (const auto& p : curve.points) {
    os << format_double(p.bias.v_gs) << ',' << format_double(p.bias.v_ds) << ','
       << format_double(p.bias.v_miv) << ',' << format_double(p.i_d) << ','
       << (p.converged ? "true" : "false") << ',' << p.iterations << '\n';
  }
  if (curve.failed_at) {
    const auto& b = *curve.failed_at;
    os << format_double(b.v_gs) << ',' << format_double(b.v_ds) << ',' << format_double(b.v_miv)
       << ",,false,0\n";
  }
}

void write_solution_csv(std::ostream& os, const TensorMesh& mesh, const DopingField& doping,
                        const SolutionState& s) {
  os << "x_nm,y_nm,z_nm,region,net_doping_cm3,psi_v,n_cm3,p_cm3\n";
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
    const auto pt = mesh.center(c);
    os << format_double(pt[0]) << ',' << format_double(pt[1]) << ',' << format_double(pt[2]) << ','
       << to_string(mesh.region(c)) << ',' << format_double(doping.net[c]) << ','
       << format_double(s.psi[c]) << ',' << format_double(s.n[c]) << ',' << format_double(s.p[c])
       << '\n';
  }
}

}  // namespace mivkoz
