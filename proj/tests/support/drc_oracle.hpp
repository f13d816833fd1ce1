#pragma once
// Brute-force reference for check_floorplan and a random floorplan source.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "mivkoz/koz.hpp"

namespace mivkoz::testing {

inline std::vector<Violation> brute_force_check(const Floorplan& fp, const KozTable& table) {
  std::vector<Violation> out;
  for (const auto& m : fp.mivs) {
    const double h = 0.5 * m.t_miv + m.t_ox;
    const double mx0 = m.x - h, mx1 = m.x + h, my0 = m.y - h, my1 = m.y + h;
    for (const auto& t : fp.transistors) {
      const bool vert = t.orientation == Orientation::Vertical;
      const double tx0 = t.x, ty0 = t.y;
      const double tx1 = t.x + (vert ? t.length : t.width);
      const double ty1 = t.y + (vert ? t.width : t.length);
      const double dx = std::max({0.0, mx0 - tx1, tx0 - mx1});
      const double dy = std::max({0.0, my0 - ty1, ty0 - my1});
      const double d = std::hypot(dx, dy);
      const double req = lookup_koz(table, fp.corners.at(t.corner));
      if (d < req) out.push_back({m.id, t.id, d, req});
    }
  }
  std::sort(out.begin(), out.end(), [](const Violation& a, const Violation& b) {
    return std::tie(a.miv_id, a.transistor_id) < std::tie(b.miv_id, b.transistor_id);
  });
  return out;
}

/// Up to `max_instances` instances on a die sized so that some but not all
/// pairs violate. Coordinates are snapped to 0.5 nm to hit exact ties.
inline Floorplan random_floorplan(std::mt19937_64& rng, int max_instances) {
  Floorplan fp;
  const KozTable published = paper_table();
  for (std::size_t i = 0; i < published.rules.size(); i += 3) {
    ProcessCorner c;
    c.n_src = published.rules[i].n_src;
    c.n_sub = published.rules[i].n_sub;
    c.h_sub = published.rules[i].h_sub;
    fp.corners["c" + std::to_string(i)] = c;
  }
  ProcessCorner off;  // off-grid h_sub, resolved by bracketing
  off.n_src = 1e19;
  off.n_sub = 1e17;
  off.h_sub = 60.0;
  fp.corners["offgrid"] = off;
  std::vector<std::string> names;
  for (const auto& [k, v] : fp.corners) names.push_back(k);

  std::uniform_int_distribution<int> count(0, max_instances);
  const int n = count(rng);
  const double die = 200.0 + 40.0 * n;
  std::uniform_real_distribution<double> pos(0.0, die);
  std::uniform_int_distribution<int> coin(0, 3);
  std::uniform_int_distribution<std::size_t> pick(0, names.size() - 1);
  auto snap = [](double v) { return std::round(v * 2.0) / 2.0; };
  for (int i = 0; i < n; ++i) {
    if (coin(rng) == 0) {
      MivInstance m;
      m.id = "m" + std::to_string(i);
      m.x = snap(pos(rng));
      m.y = snap(pos(rng));
      m.t_miv = coin(rng) == 1 ? 100.0 : 50.0;
      m.t_ox = coin(rng) == 2 ? 2.0 : 1.0;
      fp.mivs.push_back(m);
    } else {
      TransistorInstance t;
      t.id = "t" + std::to_string(i);
      t.x = snap(pos(rng));
      t.y = snap(pos(rng));
      t.orientation = coin(rng) % 2 ? Orientation::Vertical : Orientation::Horizontal;
      t.corner = names[pick(rng)];
      fp.transistors.push_back(t);
    }
  }
  return fp;
}

}  // namespace mivkoz::testing
