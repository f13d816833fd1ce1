#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace mivkoz {

// Physical constants (SI except where noted; lengths in cm for transport).
namespace constants {
inline constexpr double q = 1.602176634e-19;         // C
inline constexpr double k_boltzmann = 1.380649e-23;  // J/K
inline constexpr double eps0 = 8.8541878128e-14;     // F/cm
inline constexpr double temperature = 300.0;         // K
inline constexpr double thermal_voltage = k_boltzmann * temperature / q;
inline constexpr double nm_to_cm = 1e-7;
}  // namespace constants

enum class Quantity { Length, Concentration, Voltage, Energy, Time, Mobility };

/// Parses a value with a mandatory unit suffix, e.g. "50nm", "1e17cm-3",
/// "0.5V", "4.6eV". Returns the value in canonical units: nm, cm^-3, V,
/// eV, s, cm^2/Vs. Throws ConfigError on a missing or wrong unit.
double parse_quantity(std::string_view text, Quantity kind);

/// Canonical textual form used when echoing values back into outputs.
std::string format_quantity(double value, Quantity kind);

/// Shortest decimal representation that round-trips through strtod.
std::string format_double(double value);

/// 64-bit FNV-1a, used for config and options fingerprints.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace mivkoz
