#include "mivkoz/physics.hpp"

#include <cmath>

#include "mivkoz/units.hpp"

namespace mivkoz {

double bernoulli(double x) {
  const double ax = std::abs(x);
  if (ax < 1e-4) {
    // x/(e^x-1) = 1 - x/2 + x^2/12 - x^4/720
    const double x2 = x * x;
    return 1.0 - 0.5 * x + x2 / 12.0 * (1.0 - x2 / 60.0);
  }
  if (x > 700.0) return x * std::exp(-x);
  if (x < -700.0) return -x;
  return x / std::expm1(x);
}

double SrhParameters::n1() const {
  return n_i * std::exp(trap_level / constants::thermal_voltage);
}

double SrhParameters::p1() const {
  return n_i * std::exp(-trap_level / constants::thermal_voltage);
}

double srh_rate(double n, double p, const SrhParameters& s) {
  return (n * p - s.n_i * s.n_i) / (s.tau_p * (n + s.n1()) + s.tau_n * (p + s.p1()));
}

double fermi_half(double eta) {
  if (eta < -40.0) return std::exp(eta);
  const double a = eta + 2.13;
  const double b = std::pow(std::pow(std::abs(eta - 2.13), 2.4) + 9.6, 5.0 / 12.0);
  const double xi = 3.0 * std::sqrt(M_PI / 2.0) * std::pow(a + b, -1.5);
  return 1.0 / (std::exp(-eta) + xi);
}

double fermi_half_derivative(double eta) {
  const double h = 1e-5;
  return (fermi_half(eta + h) - fermi_half(eta - h)) / (2.0 * h);
}

double fermi_half_inverse(double y) {
  // Start from the Boltzmann limit and refine with Newton; F is monotone
  // increasing and convex in log space.
  double eta = std::log(y);
  if (y > 1.0) eta = std::max(eta, std::pow(0.75 * std::sqrt(M_PI) * y, 2.0 / 3.0));
  for (int it = 0; it < 100; ++it) {
    const double f = fermi_half(eta);
    const double step = (std::log(f) - std::log(y)) / (fermi_half_derivative(eta) / f);
    eta -= step;
    if (std::abs(step) < 1e-13 * std::max(1.0, std::abs(eta))) break;
  }
  return eta;
}

namespace {

double caughey_thomas(double n, double mu_min, double mu_max, double n_ref, double alpha) {
  return mu_min + (mu_max - mu_min) / (1.0 + std::pow(n / n_ref, alpha));
}

}  // namespace

double electron_mobility(double total_doping) {
  return caughey_thomas(total_doping, 68.5, 1414.0, 9.2e16, 0.711);
}

double hole_mobility(double total_doping) {
  return caughey_thomas(total_doping, 44.9, 470.5, 2.23e17, 0.719);
}

}  // namespace mivkoz
