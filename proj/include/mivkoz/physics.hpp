#pragma once

namespace mivkoz {

/// Silicon and oxide material constants at 300 K.
struct MaterialConstants {
  double n_i = 1.08e10;             ///< intrinsic density, cm^-3
  double eps_si = 11.7;             ///< relative permittivity
  double eps_ox = 3.9;
  double n_c = 2.8e19;              ///< conduction band DOS, cm^-3
  double n_v = 1.04e19;             ///< valence band DOS, cm^-3
  double affinity = 4.05;           ///< eV
  double band_gap = 1.12;           ///< eV

  /// Work function of intrinsic silicon; metal offsets are taken from it.
  double intrinsic_workfunction() const { return affinity + 0.5 * band_gap; }
};

/// x / (exp(x) - 1), the Scharfetter-Gummel weight.
double bernoulli(double x);

struct SrhParameters {
  double n_i = 1.08e10;
  double tau_n = 1e-7;       ///< s
  double tau_p = 1e-7;       ///< s
  double trap_level = 0.0;   ///< E_t - E_i, eV

  double n1() const;
  double p1() const;
};

/// Net Shockley-Read-Hall recombination rate, cm^-3 s^-1. Negative values
/// mean net generation.
double srh_rate(double n, double p, const SrhParameters& params);

/// Normalized Fermi-Dirac integral of order 1/2, F(eta) <= exp(eta), using
/// the closed-form approximation of Bednarczyk & Bednarczyk (max error
/// about 0.4%).
double fermi_half(double eta);
double fermi_half_derivative(double eta);
/// Inverse of fermi_half for y > 0.
double fermi_half_inverse(double y);

/// Caughey-Thomas doping-dependent low-field mobility, cm^2/Vs.
double electron_mobility(double total_doping);
double hole_mobility(double total_doping);

}  // namespace mivkoz
