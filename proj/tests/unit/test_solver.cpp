#include <doctest.h>

#include <cmath>
#include <sstream>

#include "../support/devices.hpp"
#include "mivkoz/errors.hpp"
#include "mivkoz/physics.hpp"

using namespace mivkoz;

TEST_CASE("physics kernels") {
  CHECK(bernoulli(10.0) == doctest::Approx(4.540199100968777e-4).epsilon(1e-12));
  CHECK(bernoulli(0.0) == doctest::Approx(1.0));
  CHECK(bernoulli(1e-12) == doctest::Approx(1.0 - 0.5e-12).epsilon(1e-14));
  for (double x : {-30.0, -2.0, 0.3, 5.0}) {
    CHECK(bernoulli(-x) == doctest::Approx(bernoulli(x) + x).epsilon(1e-12));
  }
  SrhParameters srh;
  CHECK(srh_rate(1e17, 1e3, srh) == doctest::Approx(-1663999640.576061).epsilon(1e-10));
  CHECK(srh_rate(srh.n_i, srh.n_i, srh) == doctest::Approx(0.0));
  for (double eta : {-10.0, -2.0, 0.0, 3.0}) {
    CHECK(fermi_half(eta) <= std::exp(eta) * (1 + 1e-12));
    CHECK(fermi_half_inverse(fermi_half(eta)) == doctest::Approx(eta).epsilon(1e-8));
  }
  CHECK(electron_mobility(1e15) > electron_mobility(1e19));
}

TEST_CASE("options validation and hashing") {
  SolverOptions o;
  CHECK_NOTHROW(o.validate());
  const std::string h = o.hash();
  o.mu_n = 1000.0;
  CHECK(o.hash() != h);
  o.damping = 0.0;
  CHECK_THROWS_AS(o.validate(), ConfigError);
}

TEST_CASE("resistor matches the drift closed form") {
  const TensorMesh m = testing::resistor_mesh();
  DeviceSolver s(m, uniform_doping(m, std::vector<double>(m.cell_count(), 1e16)));
  const SolutionState eq = s.equilibrium();
  CHECK(eq.converged);
  CHECK(s.currents(eq).max_abs() < 1e-18);
  const SolutionState st = s.solve(eq, Voltages{{"drain", 0.1}});
  const ContactCurrents I = s.currents(st);
  CHECK(I.at("drain") == doctest::Approx(testing::resistor_closed_form(0.1)).epsilon(0.01));
  CHECK(I.imbalance() <= 1e-6);
  // Linear in the applied voltage.
  const SolutionState st2 = s.solve(st, Voltages{{"drain", -0.05}});
  CHECK(s.currents(st2).at("drain") ==
        doctest::Approx(-0.5 * I.at("drain")).epsilon(1e-3));
}

TEST_CASE("iterative linear solves agree with direct ones") {
  const TensorMesh m = testing::resistor_mesh();
  SolverOptions o;
  o.linear_solver = LinearSolver::Iterative;
  DeviceSolver s(m, uniform_doping(m, std::vector<double>(m.cell_count(), 1e16)), o);
  const SolutionState st = s.solve(s.equilibrium(), Voltages{{"drain", 0.1}});
  CHECK(s.currents(st).at("drain") ==
        doctest::Approx(testing::resistor_closed_form(0.1)).epsilon(0.01));
}

TEST_CASE("junction equilibrium and bias") {
  auto j = testing::junction();
  DeviceSolver s(j.mesh, uniform_doping(j.mesh, j.net));
  const SolutionState eq = s.equilibrium();
  REQUIRE(eq.converged);
  // Equilibrium carries no current beyond round-off of the majority fluxes
  // (q D N A / h is about 1e-5 A here); n p = n_i^2 everywhere.
  CHECK(s.currents(eq).max_abs() < 1e-14);
  const double ni = MaterialConstants{}.n_i;
  for (std::size_t c = 0; c < j.mesh.cell_count(); c += 97) {
    CHECK(eq.n[c] * eq.p[c] == doctest::Approx(ni * ni).epsilon(1e-6));
  }
  const SolutionState rev = s.solve(eq, Voltages{{"anode", -0.5}});
  CHECK(std::abs(s.currents(rev).at("anode")) < 1e-14);
  // The contact fluxes on the n+ side are differences of ~20 A terms, so the
  // sum of terminal currents carries ~1e-14 A of round-off. At 0.6 V the
  // diode passes only 3e-8 A; 0.8 V puts the current well above that floor.
  const SolutionState fwd = s.solve(eq, Voltages{{"anode", 0.8}});
  const ContactCurrents I = s.currents(fwd);
  CHECK(I.at("anode") > 1e-6);
  CHECK(I.imbalance() <= 1e-6);
  CHECK(std::abs(I.at("anode") + I.at("cathode")) < 1e-13);
}

TEST_CASE("MOS column depletes deeper as the surface potential rises") {
  const double phi_f = constants::thermal_voltage * std::log(1e17 / MaterialConstants{}.n_i);
  double last = 0.0;
  for (double psi : {-0.3, 0.0, phi_f}) {
    const TensorMesh m = testing::mos_column(psi);
    DeviceSolver s(m, uniform_doping(m, std::vector<double>(m.cell_count(), -1e17)));
    const double w = testing::depletion_depth(m, s.equilibrium(), 1e17);
    CHECK(w > last);
    last = w;
  }
}

TEST_CASE("missing contact names are rejected") {
  const TensorMesh m = testing::resistor_mesh();
  DeviceSolver s(m, uniform_doping(m, std::vector<double>(m.cell_count(), 1e16)));
  CHECK_THROWS(s.solve(s.equilibrium(), Voltages{{"nowhere", 0.1}}));
}

TEST_CASE("solution CSV") {
  const TensorMesh m = testing::resistor_mesh();
  DeviceSolver s(m, uniform_doping(m, std::vector<double>(m.cell_count(), 1e16)));
  std::ostringstream os;
  write_solution_csv(os, m, s.doping(), s.equilibrium());
  const std::string text = os.str();
  CHECK(text.rfind("x_nm,y_nm,z_nm,region,net_doping_cm3,psi_v,n_cm3,p_cm3\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(m.cell_count()) + 1);
}
