#include "mivkoz/koz.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <ostream>
#include <set>
#include <unordered_map>

#include "mivkoz/config.hpp"
#include "mivkoz/errors.hpp"

namespace mivkoz {

using nlohmann::json;

void KozScan::validate() const {
  if (!(threshold > 0.0)) throw ConfigError("koz threshold must be positive");
  if (!(step > 0.0) || !(start > 0.0) || !(max >= start)) {
    throw ConfigError("koz scan needs step > 0, start > 0 and max >= start");
  }
}

double extract_koz(const ProcessCorner& corner, const RatioSimulator& simulate,
                   const KozScan& scan) {
  scan.validate();
  validate_corner(corner, CornerLimits::koz_study());
  const auto steps = static_cast<long>(std::floor((scan.max - scan.start) / scan.step + 1e-9));
  std::string trail;
  for (long k = 0; k <= steps; ++k) {
    PlacementScenario s;
    s.orientation = Orientation::Vertical;
    s.d_offset = 0.0;
    s.d_sep = scan.start + static_cast<double>(k) * scan.step;
    s.miv_present = true;
    const RatioReport r = simulate(s);
    if (r.leak_ratio < scan.threshold) return s.d_sep;
    trail += " " + format_double(s.d_sep) + "nm:" + format_double(r.leak_ratio);
  }
  throw NotFoundError("no spacing up to " + format_double(scan.max) +
                      " nm keeps the leakage ratio below " + format_double(scan.threshold) +
                      " (ratios" + trail + ")");
}

RatioSimulator device_ratio_simulator(const SimulationSetup& setup, const ProcessCorner& corner) {
  struct Shared {
    std::mutex mutex;
    std::optional<DeviceMetrics> baseline;
  };
  auto shared = std::make_shared<Shared>();
  return [setup, corner, shared](const PlacementScenario& s) {
    DeviceMetrics base;
    {
      std::lock_guard<std::mutex> lock(shared->mutex);
      if (!shared->baseline) shared->baseline = simulate_metrics(setup, corner, s.without_miv());
      base = *shared->baseline;
    }
    return compare(base, simulate_metrics(setup, corner, s));
  };
}

void KozTable::validate() const {
  scan.validate();
  std::set<std::tuple<double, double, double>> keys;
  for (const auto& r : rules) {
    const double k = r.koz / scan.step;
    if (!(r.koz > 0.0) || std::abs(k - std::round(k)) > 1e-9) {
      throw ConfigError("keep-out value " + format_double(r.koz) +
                        " nm is not a positive multiple of the step");
    }
    if (!(r.n_src > 0.0) || !(r.n_sub > 0.0) || !(r.h_sub > 0.0)) {
      throw ConfigError("keep-out rule keys must be positive");
    }
    if (!keys.emplace(r.n_src, r.n_sub, r.h_sub).second) {
      throw ConfigError("duplicate keep-out rule for n_src " + format_double(r.n_src) +
                        ", n_sub " + format_double(r.n_sub) + ", h_sub " +
                        format_double(r.h_sub));
    }
  }
}

KozTable paper_table() {
  struct Row {
    double n_src, n_sub;
    double koz[4];
  };
  static constexpr double kHeights[4] = {25.0, 50.0, 75.0, 100.0};
  static constexpr Row kRows[] = {
      {1e18, 1e15, {400, 450, 500, 500}}, {1e18, 1e16, {200, 200, 200, 200}},
      {1e19, 1e16, {200, 250, 200, 200}}, {1e19, 1e17, {100, 100, 100, 100}},
      {1e20, 1e17, {50, 100, 100, 100}},  {1e20, 1e18, {50, 50, 50, 50}},
      {1e21, 1e18, {50, 50, 50, 50}},     {1e21, 1e19, {50, 50, 50, 50}},
  };
  KozTable t;
  t.source = KozSource::PaperTableIII;
  for (const auto& row : kRows) {
    for (int h = 0; h < 4; ++h) {
      const bool at_max = row.koz[h] >= t.scan.max;
      t.rules.push_back({row.n_src, row.n_sub, kHeights[h], row.koz[h], at_max});
    }
  }
  return t;
}

namespace {

constexpr double kKeyEps = 1e-9;

struct Key {
  double a, b, h;  // log10 n_src, log10 n_sub, h_sub
};

Key key_of(double n_src, double n_sub, double h_sub) {
  return {std::log10(n_src), std::log10(n_sub), h_sub};
}

using P2 = std::pair<double, double>;

double cross(const P2& o, const P2& a, const P2& b) {
  return (a.first - o.first) * (b.second - o.second) - (a.second - o.second) * (b.first - o.first);
}

std::vector<P2> convex_hull(std::vector<P2> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<P2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

bool on_segment(const P2& a, const P2& b, const P2& p) {
  const double len = std::hypot(b.first - a.first, b.second - a.second);
  if (len == 0.0) return std::hypot(p.first - a.first, p.second - a.second) <= kKeyEps;
  if (std::abs(cross(a, b, p)) / len > kKeyEps) return false;
  const double t = ((p.first - a.first) * (b.first - a.first) +
                    (p.second - a.second) * (b.second - a.second)) /
                   (len * len);
  return t >= -kKeyEps && t <= 1.0 + kKeyEps;
}

bool in_hull(const std::vector<P2>& hull, const P2& p) {
  if (hull.empty()) return false;
  if (hull.size() == 1) return on_segment(hull[0], hull[0], p);
  if (hull.size() == 2) return on_segment(hull[0], hull[1], p);
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const P2& a = hull[i];
    const P2& b = hull[(i + 1) % hull.size()];
    const double len = std::hypot(b.first - a.first, b.second - a.second);
    if (cross(a, b, p) / len < -kKeyEps) return false;
  }
  return true;
}

// Nearest stored values at or below / at or above q.
std::pair<double, double> bracket(const std::vector<double>& sorted, double q) {
  double lo = sorted.front();
  double hi = sorted.back();
  for (double v : sorted) {
    if (v <= q + kKeyEps) lo = v;
  }
  for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
    if (*it >= q - kKeyEps) hi = *it;
  }
  return {lo, hi};
}

bool within(double v, const std::pair<double, double>& r) {
  return v >= r.first - kKeyEps && v <= r.second + kKeyEps;
}

std::string corner_text(const ProcessCorner& c) {
  return "(n_src " + format_quantity(c.n_src, Quantity::Concentration) + ", n_sub " +
         format_quantity(c.n_sub, Quantity::Concentration) + ", h_sub " +
         format_quantity(c.h_sub, Quantity::Length) + ")";
}

}  // namespace

double lookup_koz(const KozTable& table, const ProcessCorner& corner) {
  if (table.rules.empty()) throw OutOfDomainError("keep-out table is empty");
  if (!(corner.n_src > 0.0) || !(corner.n_sub > 0.0) || !std::isfinite(corner.h_sub)) {
    throw OutOfDomainError("corner " + corner_text(corner) + " has no valid table key");
  }
  for (const auto& r : table.rules) {
    if (r.n_src == corner.n_src && r.n_sub == corner.n_sub && r.h_sub == corner.h_sub) {
      return r.koz;
    }
  }
  const Key q = key_of(corner.n_src, corner.n_sub, corner.h_sub);
  std::vector<Key> keys;
  std::vector<P2> plane;
  std::vector<double> as, bs, hs;
  for (const auto& r : table.rules) {
    keys.push_back(key_of(r.n_src, r.n_sub, r.h_sub));
    plane.emplace_back(keys.back().a, keys.back().b);
    as.push_back(keys.back().a);
    bs.push_back(keys.back().b);
    hs.push_back(keys.back().h);
  }
  for (auto* v : {&as, &bs, &hs}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }
  const bool h_inside = q.h >= hs.front() - kKeyEps && q.h <= hs.back() + kKeyEps;
  if (!h_inside || !in_hull(convex_hull(plane), {q.a, q.b})) {
    throw OutOfDomainError("corner " + corner_text(corner) +
                           " lies outside the keep-out table's key range");
  }
  const auto ba = bracket(as, q.a);
  const auto bb = bracket(bs, q.b);
  const auto bh = bracket(hs, q.h);
  std::optional<double> best;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (within(keys[i].a, ba) && within(keys[i].b, bb) && within(keys[i].h, bh)) {
      best = std::max(best.value_or(0.0), table.rules[i].koz);
    }
  }
  if (!best) {
    throw OutOfDomainError("no keep-out rule brackets corner " + corner_text(corner));
  }
  return *best;
}

json to_json(const KozTable& t) {
  json rules = json::array();
  for (const auto& r : t.rules) {
    json j{{"n_src", format_quantity(r.n_src, Quantity::Concentration)},
           {"n_sub", format_quantity(r.n_sub, Quantity::Concentration)},
           {"h_sub", format_quantity(r.h_sub, Quantity::Length)},
           {"koz", format_quantity(r.koz, Quantity::Length)}};
    if (r.possibly_saturated) j["possibly_saturated"] = true;
    rules.push_back(std::move(j));
  }
  json out{{"source", t.source == KozSource::PaperTableIII ? "paper_table_iii" : "simulated"},
           {"threshold", t.scan.threshold},
           {"step", format_quantity(t.scan.step, Quantity::Length)},
           {"start", format_quantity(t.scan.start, Quantity::Length)},
           {"max", format_quantity(t.scan.max, Quantity::Length)},
           {"rules", std::move(rules)}};
  if (t.source == KozSource::Simulated) out["options_hash"] = t.options_hash;
  return out;
}

KozTable koz_table_from_json(const json& j) {
  ObjectReader r(j, "koz table");
  KozTable t;
  const std::string source = r.string("source");
  if (source == "paper_table_iii") {
    t.source = KozSource::PaperTableIII;
  } else if (source == "simulated") {
    t.source = KozSource::Simulated;
  } else {
    throw ConfigError("koz table source must be 'paper_table_iii' or 'simulated'");
  }
  t.scan.threshold = r.number_or("threshold", t.scan.threshold);
  t.scan.step = r.quantity_or("step", Quantity::Length, t.scan.step);
  t.scan.start = r.quantity_or("start", Quantity::Length, t.scan.start);
  t.scan.max = r.quantity_or("max", Quantity::Length, t.scan.max);
  t.options_hash = r.string_or("options_hash", "");
  for (const auto& item : r.array("rules")) {
    ObjectReader rr(item, "koz rule");
    KozRule rule;
    rule.n_src = rr.quantity("n_src", Quantity::Concentration);
    rule.n_sub = rr.quantity("n_sub", Quantity::Concentration);
    rule.h_sub = rr.quantity("h_sub", Quantity::Length);
    rule.koz = rr.quantity("koz", Quantity::Length);
    rule.possibly_saturated = rr.boolean_or("possibly_saturated", false);
    rr.finish();
    t.rules.push_back(rule);
  }
  r.finish();
  t.validate();
  return t;
}

double rect_distance(const Rect& a, const Rect& b) {
  const double dx = std::max({0.0, a.x0 - b.x1, b.x0 - a.x1});
  const double dy = std::max({0.0, a.y0 - b.y1, b.y0 - a.y1});
  return std::hypot(dx, dy);
}

Rect footprint(const MivInstance& m) {
  const double half = 0.5 * m.t_miv + m.t_ox;
  return {m.x - half, m.y - half, m.x + half, m.y + half};
}

Rect footprint(const TransistorInstance& t) {
  if (t.orientation == Orientation::Vertical) return {t.x, t.y, t.x + t.length, t.y + t.width};
  return {t.x, t.y, t.x + t.width, t.y + t.length};
}

void Floorplan::validate() const {
  std::set<std::string> ids;
  auto finite = [](std::initializer_list<double> vs) {
    return std::all_of(vs.begin(), vs.end(), [](double v) { return std::isfinite(v); });
  };
  for (const auto& m : mivs) {
    if (m.id.empty() || !ids.insert(m.id).second) {
      throw ConfigError("duplicate or empty instance id '" + m.id + "'");
    }
    if (!(m.t_miv > 0.0) || !(m.t_ox >= 0.0) || !finite({m.x, m.y, m.t_miv, m.t_ox})) {
      throw ConfigError("MIV '" + m.id + "' needs finite coordinates and positive size");
    }
  }
  for (const auto& t : transistors) {
    if (t.id.empty() || !ids.insert(t.id).second) {
      throw ConfigError("duplicate or empty instance id '" + t.id + "'");
    }
    if (!(t.width > 0.0) || !(t.length > 0.0) || !finite({t.x, t.y, t.width, t.length})) {
      throw ConfigError("transistor '" + t.id + "' needs finite coordinates and positive size");
    }
    if (!corners.count(t.corner)) {
      throw ConfigError("transistor '" + t.id + "' references unknown corner '" + t.corner + "'");
    }
  }
}

std::vector<Violation> check_floorplan(const Floorplan& fp, const KozTable& table) {
  fp.validate();
  std::vector<double> required(fp.transistors.size());
  std::vector<Rect> rects(fp.transistors.size());
  double reach = 0.0;
  for (std::size_t i = 0; i < fp.transistors.size(); ++i) {
    const auto& t = fp.transistors[i];
    try {
      required[i] = lookup_koz(table, fp.corners.at(t.corner));
    } catch (const OutOfDomainError& e) {
      throw OutOfDomainError("transistor '" + t.id + "': " + e.what());
    }
    rects[i] = footprint(t);
    reach = std::max(reach, required[i]);
  }
  std::vector<Violation> out;
  if (fp.mivs.empty() || fp.transistors.empty()) return out;

  const double cell = std::max(reach, 1.0);
  auto cell_of = [cell](double v) { return static_cast<long long>(std::floor(v / cell)); };
  auto cell_key = [](long long cx, long long cy) {
    return (static_cast<unsigned long long>(cx) * 0x9E3779B97F4A7C15ULL) ^
           static_cast<unsigned long long>(cy);
  };
  std::unordered_map<unsigned long long, std::vector<std::size_t>> grid;
  for (std::size_t i = 0; i < rects.size(); ++i) {
    for (long long cx = cell_of(rects[i].x0); cx <= cell_of(rects[i].x1); ++cx) {
      for (long long cy = cell_of(rects[i].y0); cy <= cell_of(rects[i].y1); ++cy) {
        grid[cell_key(cx, cy)].push_back(i);
      }
    }
  }

  std::vector<std::size_t> seen(rects.size(), static_cast<std::size_t>(-1));
  for (std::size_t m = 0; m < fp.mivs.size(); ++m) {
    const Rect r = footprint(fp.mivs[m]);
    for (long long cx = cell_of(r.x0 - reach); cx <= cell_of(r.x1 + reach); ++cx) {
      for (long long cy = cell_of(r.y0 - reach); cy <= cell_of(r.y1 + reach); ++cy) {
        auto it = grid.find(cell_key(cx, cy));
        if (it == grid.end()) continue;
        for (std::size_t i : it->second) {
          if (seen[i] == m) continue;
          seen[i] = m;
          const double d = rect_distance(r, rects[i]);
          if (d < required[i]) {
            out.push_back({fp.mivs[m].id, fp.transistors[i].id, d, required[i]});
          }
        }
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const Violation& a, const Violation& b) {
    return std::tie(a.miv_id, a.transistor_id) < std::tie(b.miv_id, b.transistor_id);
  });
  return out;
}

std::vector<PitchViolation> check_miv_pitch(const Floorplan& fp, double min_pitch) {
  std::vector<const MivInstance*> order;
  for (const auto& m : fp.mivs) order.push_back(&m);
  std::sort(order.begin(), order.end(),
            [](const MivInstance* a, const MivInstance* b) { return a->x < b->x; });
  std::vector<PitchViolation> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      if (order[j]->x - order[i]->x >= min_pitch) break;
      const double d = std::hypot(order[j]->x - order[i]->x, order[j]->y - order[i]->y);
      if (d < min_pitch) {
        const auto& [a, b] = std::minmax(order[i]->id, order[j]->id);
        out.push_back({a, b, d, min_pitch});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const PitchViolation& a, const PitchViolation& b) {
    return std::tie(a.first, a.second) < std::tie(b.first, b.second);
  });
  return out;
}

Floorplan floorplan_from_json(const json& j) {
  ObjectReader r(j, "floorplan");
  Floorplan fp;
  if (const json* cs = r.object("corners")) {
    for (auto it = cs->begin(); it != cs->end(); ++it) {
      fp.corners[it.key()] = parse_corner(it.value());
    }
  }
  if (r.has("mivs")) {
    for (const auto& item : r.array("mivs")) {
      ObjectReader m(item, "miv");
      MivInstance inst;
      inst.id = m.string("id");
      inst.x = m.quantity("x", Quantity::Length);
      inst.y = m.quantity("y", Quantity::Length);
      inst.t_miv = m.quantity_or("t_miv", Quantity::Length, inst.t_miv);
      inst.t_ox = m.quantity_or("t_ox", Quantity::Length, inst.t_ox);
      inst.domain = m.string_or("domain", "");
      m.finish();
      fp.mivs.push_back(std::move(inst));
    }
  }
  if (r.has("transistors")) {
    for (const auto& item : r.array("transistors")) {
      ObjectReader t(item, "transistor");
      TransistorInstance inst;
      inst.id = t.string("id");
      inst.x = t.quantity("x", Quantity::Length);
      inst.y = t.quantity("y", Quantity::Length);
      inst.width = t.quantity_or("width", Quantity::Length, inst.width);
      inst.length = t.quantity_or("length", Quantity::Length, inst.length);
      const std::string o = t.string_or("orientation", "vertical");
      if (o == "vertical") {
        inst.orientation = Orientation::Vertical;
      } else if (o == "horizontal") {
        inst.orientation = Orientation::Horizontal;
      } else {
        throw ConfigError("transistor orientation must be 'vertical' or 'horizontal'");
      }
      inst.corner = t.string("corner");
      t.finish();
      fp.transistors.push_back(std::move(inst));
    }
  }
  r.finish();
  fp.validate();
  return fp;
}

json to_json(const Floorplan& fp) {
  json corners = json::object();
  for (const auto& [name, c] : fp.corners) corners[name] = to_json(c);
  json mivs = json::array();
  for (const auto& m : fp.mivs) {
    mivs.push_back({{"id", m.id},
                    {"x", format_quantity(m.x, Quantity::Length)},
                    {"y", format_quantity(m.y, Quantity::Length)},
                    {"t_miv", format_quantity(m.t_miv, Quantity::Length)},
                    {"t_ox", format_quantity(m.t_ox, Quantity::Length)},
                    {"domain", m.domain}});
  }
  json ts = json::array();
  for (const auto& t : fp.transistors) {
    ts.push_back({{"id", t.id},
                  {"x", format_quantity(t.x, Quantity::Length)},
                  {"y", format_quantity(t.y, Quantity::Length)},
                  {"width", format_quantity(t.width, Quantity::Length)},
                  {"length", format_quantity(t.length, Quantity::Length)},
                  {"orientation", t.orientation == Orientation::Vertical ? "vertical" : "horizontal"},
                  {"corner", t.corner}});
  }
  return {{"corners", std::move(corners)}, {"mivs", std::move(mivs)}, {"transistors", std::move(ts)}};
}

json to_json(const std::vector<Violation>& violations) {
  json out = json::array();
  for (const auto& v : violations) {
    out.push_back({{"miv", v.miv_id},
                   {"transistor", v.transistor_id},
                   {"spacing", format_quantity(v.spacing, Quantity::Length)},
                   {"required", format_quantity(v.required, Quantity::Length)}});
  }
  return out;
}

void write_violations_text(std::ostream& os, const std::vector<Violation>& violations) {
  for (const auto& v : violations) {
    os << v.miv_id << " -> " << v.transistor_id << ": spacing "
       << format_quantity(v.spacing, Quantity::Length) << " < required "
       << format_quantity(v.required, Quantity::Length) << '\n';
  }
  os << violations.size() << (violations.size() == 1 ? " violation\n" : " violations\n");
}

}  // namespace mivkoz
