#include "mivkoz/units.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <utility>
#include <vector>

#include "mivkoz/errors.hpp"

namespace mivkoz {

namespace {

struct UnitScale {
  std::string_view suffix;
  double scale;
};

const std::vector<UnitScale>& units_for(Quantity kind) {
  static const std::vector<UnitScale> length{{"nm", 1.0}, {"um", 1e3}};
  static const std::vector<UnitScale> conc{{"cm-3", 1.0}, {"cm^-3", 1.0}};
  static const std::vector<UnitScale> volt{{"mV", 1e-3}, {"V", 1.0}};
  static const std::vector<UnitScale> energy{{"eV", 1.0}};
  static const std::vector<UnitScale> time{{"ns", 1e-9}, {"us", 1e-6}, {"s", 1.0}};
  static const std::vector<UnitScale> mobility{{"cm2/Vs", 1.0}};
  switch (kind) {
    case Quantity::Length: return length;
    case Quantity::Concentration: return conc;
    case Quantity::Voltage: return volt;
    case Quantity::Energy: return energy;
    case Quantity::Time: return time;
    case Quantity::Mobility: return mobility;
  }
  return length;
}

const char* unit_name(Quantity kind) {
  switch (kind) {
    case Quantity::Length: return "nm";
    case Quantity::Concentration: return "cm-3";
    case Quantity::Voltage: return "V";
    case Quantity::Energy: return "eV";
    case Quantity::Time: return "s";
    case Quantity::Mobility: return "cm2/Vs";
  }
  return "";
}

}  // namespace

double parse_quantity(std::string_view text, Quantity kind) {
  const std::string original(text);
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr == text.data()) {
    throw ConfigError("cannot parse number in '" + original + "'");
  }
  std::string_view rest(ptr, static_cast<std::size_t>(text.data() + text.size() - ptr));
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  if (rest.empty()) {
    throw ConfigError("missing unit in '" + original + "' (expected " + unit_name(kind) + ")");
  }
  for (const auto& u : units_for(kind)) {
    if (rest == u.suffix) {
      if (!std::isfinite(value)) throw ConfigError("non-finite value '" + original + "'");
      return value * u.scale;
    }
  }
  throw ConfigError("unexpected unit '" + std::string(rest) + "' in '" + original +
                    "' (expected " + unit_name(kind) + ")");
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

std::string format_quantity(double value, Quantity kind) {
  return format_double(value) + unit_name(kind);
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace mivkoz
