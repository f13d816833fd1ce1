// Acceptance runner. `mivkoz_acceptance <id>...` runs the named criteria
// (1 2 3 4 5 6 7, or "all") and prints one PASS/FAIL line per check.
// Exit status is nonzero when any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "../support/devices.hpp"
#include "../support/drc_oracle.hpp"
#include "mivkoz/cli.hpp"
#include "mivkoz/errors.hpp"
#include "mivkoz/koz.hpp"
#include "mivkoz/metrics.hpp"
#include "mivkoz/physics.hpp"
#include "mivkoz/sweep.hpp"

using namespace mivkoz;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(bool ok, const std::string& id, const std::string& what, const std::string& detail) {
  if (!ok) ++failures;
  std::cout << (ok ? "PASS " : "FAIL ") << id << ' ' << what << ": " << detail << std::endl;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report_time(const std::string& id, double elapsed, double budget) {
  report(elapsed < budget, id, "runtime",
         fmt("%.1f s", elapsed) + " (limit " + fmt("%g s", budget) + ")");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "mivkoz");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  if (code != kExitOk) std::cerr << e.str();
  return code;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mivkoz_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// 1 -------------------------------------------------------------------------

void published_table() {
  const auto t0 = Clock::now();
  std::string out;
  const int code = cli({"koz", "--paper"}, &out);
  std::ostringstream csv;
  csv << "n_src_cm3,n_sub_cm3,h_sub_nm,koz_nm\n";
  std::size_t rows = 0;
  if (code == kExitOk) {
    const json doc = json::parse(out);
    for (const auto& r : doc.at("rules")) {
      const double a = parse_quantity(r.at("n_src").get<std::string>(), Quantity::Concentration);
      const double b = parse_quantity(r.at("n_sub").get<std::string>(), Quantity::Concentration);
      const double h = parse_quantity(r.at("h_sub").get<std::string>(), Quantity::Length);
      const double k = parse_quantity(r.at("koz").get<std::string>(), Quantity::Length);
      char line[128];
      std::snprintf(line, sizeof line, "%g,%g,%g,%g\n", a, b, h, k);
      csv << line;
      ++rows;
    }
  }
  const std::string golden = slurp(fs::path(MIVKOZ_SOURCE_DIR) / "tests/golden/published_koz.csv");
  report(code == kExitOk && csv.str() == golden && rows == 32, "1", "koz --paper vs golden table",
         std::to_string(rows) + " rows, " + (csv.str() == golden ? "identical" : "different"));
  report_time("1", seconds_since(t0), 1.0);
}

// 2 -------------------------------------------------------------------------

void drc_equivalence() {
  const auto t0 = Clock::now();
  const KozTable table = paper_table();
  std::mt19937_64 rng(20240611);
  int equal = 0;
  std::size_t instances = 0, violations = 0;
  for (int i = 0; i < 100; ++i) {
    const Floorplan fp = testing::random_floorplan(rng, 200);
    instances += fp.mivs.size() + fp.transistors.size();
    const auto fast = check_floorplan(fp, table);
    violations += fast.size();
    equal += fast == testing::brute_force_check(fp, table);
  }
  report(equal == 100, "2", "grid checker vs all-pairs",
         std::to_string(equal) + "/100 identical, " + std::to_string(instances) + " instances, " +
             std::to_string(violations) + " violations");
  report_time("2", seconds_since(t0), 10.0);
}

// 3 -------------------------------------------------------------------------

std::size_t cell_at(const TensorMesh& m, double x) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < m.cell_count(); ++c) {
    if (std::abs(m.center(c)[0] - x) < std::abs(m.center(best)[0] - x)) best = c;
  }
  return best;
}

struct Imbalance {
  std::string label;
  double amps;
  double relative;
};

std::vector<Imbalance> conservation_log;

void log_currents(const std::string& label, const SolutionState& st, const ContactCurrents& I) {
  if (st.converged) conservation_log.push_back({label, I.max_abs(), I.imbalance()});
}

void physics_oracles() {
  const MaterialConstants mat;
  const double vt = constants::thermal_voltage;

  {  // (a) built-in potential, read between the neutral bulks
    const auto t0 = Clock::now();
    auto j = testing::junction(1e19, 1e17);
    DeviceSolver s(j.mesh, uniform_doping(j.mesh, j.net));
    const SolutionState eq = s.equilibrium();
    const double vbi = eq.psi[cell_at(j.mesh, 100.0)] - eq.psi[cell_at(j.mesh, 500.0)];
    const double ref = vt * std::log(1e19 * 1e17 / (mat.n_i * mat.n_i));
    const double err = std::abs(vbi - ref) / ref;
    report(eq.converged && err <= 0.02, "3a", "junction built-in potential",
           fmt("%.4f V", vbi) + " vs " + fmt("%.4f V", ref) + fmt(" (%.3f%%, tol 2%%)", 100 * err));
    for (double v : {0.7, 0.8, 0.9}) {
      const SolutionState st = s.solve(eq, Voltages{{"anode", v}});
      log_currents("junction " + fmt("%g V", v), st, s.currents(st));
    }
    report_time("3a", seconds_since(t0), 30.0);
  }

  {  // (b) resistor against q N mu V / L * A
    const auto t0 = Clock::now();
    const TensorMesh m = testing::resistor_mesh();
    DeviceSolver s(m, uniform_doping(m, std::vector<double>(m.cell_count(), 1e16)));
    const SolutionState st = s.solve(s.equilibrium(), Voltages{{"drain", 0.1}});
    const ContactCurrents I = s.currents(st);
    const double ref = testing::resistor_closed_form(0.1);
    const double err = std::abs(I.at("drain") - ref) / ref;
    report(st.converged && err <= 0.01, "3b", "resistor current",
           fmt("%.6e A", I.at("drain")) + " vs " + fmt("%.6e A", ref) +
               fmt(" (%.3f%%, tol 1%%)", 100 * err));
    log_currents("resistor 0.1 V", st, I);
    report_time("3b", seconds_since(t0), 30.0);
  }

  {  // (c) depletion depth with 2 phi_F of band bending
    const auto t0 = Clock::now();
    const double n_a = 1e17;
    const double phi_f = vt * std::log(n_a / mat.n_i);
    const TensorMesh m = testing::mos_column(phi_f);
    DeviceSolver s(m, uniform_doping(m, std::vector<double>(m.cell_count(), -n_a)));
    const SolutionState eq = s.equilibrium();
    const double w = testing::depletion_depth(m, eq, n_a);
    const double eps = mat.eps_si * constants::eps0;
    const double ref = std::sqrt(2.0 * eps * 2.0 * phi_f / (constants::q * n_a)) * 1e7;
    const double err = std::abs(w - ref) / ref;
    report(eq.converged && err <= 0.05, "3c", "MOS depletion width",
           fmt("%.2f nm", w) + " vs " + fmt("%.2f nm", ref) + fmt(" (%.2f%%, tol 5%%)", 100 * err));
    report_time("3c", seconds_since(t0), 30.0);
  }

  {  // (d) the solves above plus a coarse 2D transistor with an MIV
    const auto t0 = Clock::now();
    DeviceGeometry g;
    PlacementScenario sc;
    sc.miv_present = true;
    RefinementPolicy p;
    p.min_spacing = 2.0;
    p.refine_distance = 4.0;
    p.max_spacing = 16.0;
    const DeviceLayout lay = build_layout(g, ProcessCorner{}, sc);
    const TensorMesh m = generate_mesh(lay, p);
    DeviceSolver s(m, assign_doping(lay, m));
    SolutionState st = s.solve(s.equilibrium(), BiasPoint{0.0, 1.0, 0.0, 1.0});
    log_currents("transistor (0 V, 1 V)", st, s.currents(st));
    st = s.solve(st, BiasPoint{1.0, 1.0, 0.0, 1.0});
    log_currents("transistor (1 V, 1 V)", st, s.currents(st));

    double worst = 0.0;
    std::string where;
    for (const auto& e : conservation_log) {
      if (e.relative >= worst) {
        worst = e.relative;
        where = e.label;
      }
    }
    report(!conservation_log.empty() && worst <= 1e-6, "3d", "terminal current conservation",
           std::to_string(conservation_log.size()) + " converged biased solves, worst " +
               fmt("%.2e", worst) + " at " + where + " (tol 1e-6)");
    report_time("3d", seconds_since(t0), 30.0);
  }
}

// 4 and 5 -------------------------------------------------------------------

/// simulate_metrics with results kept across sweeps. No-MIV runs are keyed by
/// layout so every baseline the criteria share is computed once.
class MemoSimulator {
 public:
  explicit MemoSimulator(SimulationSetup setup) : setup_(std::move(setup)) {}

  DeviceMetrics operator()(const ProcessCorner& c, const PlacementScenario& s) {
    std::string key = s.miv_present
                          ? to_json(c).dump() + to_json(s).dump()
                          : hex64(build_layout(setup_.geometry, c, s).fingerprint());
    std::shared_future<DeviceMetrics> fut;
    bool owner = false;
    std::promise<DeviceMetrics> promise;
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = cache_.find(key);
      if (it == cache_.end()) {
        fut = promise.get_future().share();
        cache_.emplace(key, fut);
        owner = true;
      } else {
        fut = it->second;
      }
    }
    if (owner) {
      try {
        promise.set_value(simulate_metrics(setup_, c, s));
      } catch (...) {
        promise.set_exception(std::current_exception());
      }
    }
    DeviceMetrics m = fut.get();
    m.corner = c;
    m.scenario = s;
    return m;
  }

  const SimulationSetup& setup() const { return setup_; }

 private:
  SimulationSetup setup_;
  std::mutex mu_;
  std::map<std::string, std::shared_future<DeviceMetrics>> cache_;
};

int worker_count() {
  const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return resolve_workers(std::min(4, hw));
}

std::vector<double> leak_ratios(MemoSimulator& sim, SweepParam param, std::vector<double> values,
                                PlacementScenario scenario = {}, ProcessCorner corner = {}) {
  SweepPlan plan;
  plan.param = param;
  plan.values = std::move(values);
  plan.corner = corner;
  plan.scenario = scenario;
  plan.geometry = sim.setup().geometry;
  plan.workers = worker_count();
  const SweepResult r = run_sweep(plan, std::ref(sim));
  std::vector<double> out;
  for (const auto& e : r.entries) {
    if (!e.outcome) {
      std::cerr << "point " << e.value << " failed: " << e.error << '\n';
      out.push_back(std::nan(""));
    } else {
      out.push_back(std::get<RatioReport>(*e.outcome).leak_ratio);
    }
  }
  return out;
}

std::string list(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " / ") + fmt("%.4g", x);
  return s;
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] < v[i - 1])) return false;
  }
  return !v.empty();
}

bool strictly_increasing(std::vector<double> v) {
  std::reverse(v.begin(), v.end());
  return strictly_decreasing(v);
}

void trends(MemoSimulator& sim) {
  const auto t0 = Clock::now();
  const auto a = leak_ratios(sim, SweepParam::DSep, {20.0, 50.0, 100.0});
  const double span = a[0] / a[2];
  report(strictly_decreasing(a) && span >= 10.0, "4a", "leak ratio vs d_sep 20/50/100 nm",
         list(a) + ", ratio(20)/ratio(100) = " + fmt("%.3g", span) + " (need decreasing, >= 10)");

  const auto b = leak_ratios(sim, SweepParam::TMiv, {20.0, 50.0, 100.0});
  report(strictly_increasing(b), "4b", "leak ratio vs t_miv 20/50/100 nm",
         list(b) + " (need increasing)");

  const auto c = leak_ratios(sim, SweepParam::TOx, {0.25, 1.0, 2.0});
  report(strictly_decreasing(c), "4c", "leak ratio vs t_ox 0.25/1/2 nm",
         list(c) + " (need decreasing)");

  const auto d = leak_ratios(sim, SweepParam::NSub, {1e16, 1e17});
  report(d[0] > d[1], "4d", "leak ratio vs n_sub 1e16/1e17 cm-3", list(d) + " (need first larger)");

  PlacementScenario h;
  h.orientation = Orientation::Horizontal;
  const double vert = leak_ratios(sim, SweepParam::DSep, {50.0})[0];
  const double hs = leak_ratios(sim, SweepParam::DSep, {50.0}, h)[0];
  h.terminal_order = TerminalOrder::DrainNearMiv;
  const double hd = leak_ratios(sim, SweepParam::DSep, {50.0}, h)[0];
  report(vert > hs && vert > hd, "4e", "vertical vs horizontal at d_sep 50 nm",
         fmt("vertical %.4g", vert) + fmt(", horizontal source-side %.4g", hs) +
             fmt(", drain-side %.4g", hd));
  report_time("4", seconds_since(t0), 1800.0);
}

void offset_symmetry(MemoSimulator& sim) {
  const auto t0 = Clock::now();
  SweepPlan plan;
  plan.param = SweepParam::DOffset;
  plan.values = {-50.0, 50.0};
  plan.scenario.miv_present = true;
  plan.geometry = sim.setup().geometry;
  plan.workers = worker_count();
  plan.with_baseline = false;
  const SweepResult r = run_sweep(plan, std::ref(sim));
  if (r.succeeded() != 2) {
    report(false, "5", "metrics at d_offset -50/+50 nm", "a point failed");
    return;
  }
  const auto& lo = std::get<DeviceMetrics>(*r.entries[0].outcome);
  const auto& hi = std::get<DeviceMetrics>(*r.entries[1].outcome);
  auto rel = [](double x, double y) { return std::abs(x - y) / std::max(std::abs(x), std::abs(y)); };
  const double dm = rel(lo.i_d_max, hi.i_d_max), dl = rel(lo.i_d_leak, hi.i_d_leak);
  report(dm <= 0.02 && dl <= 0.02, "5", "metrics at d_offset -50/+50 nm",
         fmt("i_d_max %.4e", lo.i_d_max) + fmt(" / %.4e A", hi.i_d_max) + fmt(" (%.3f%%), ", 100 * dm) +
             fmt("i_d_leak %.4e", lo.i_d_leak) + fmt(" / %.4e A", hi.i_d_leak) +
             fmt(" (%.3f%%), tol 2%%", 100 * dl));
  report_time("5", seconds_since(t0), 300.0);
}

// 6 -------------------------------------------------------------------------

void extraction_contract() {
  const auto t0 = Clock::now();
  ProcessCorner c;
  c.n_src = 1e19;
  c.n_sub = 1e17;
  c.h_sub = 100.0;
  auto stub = [](std::map<double, double> table) {
    return [table](const PlacementScenario& s) {
      RatioReport r;
      r.leak_ratio = table.at(s.d_sep);
      r.max_ratio = 1.0;
      return r;
    };
  };
  const double worked = extract_koz(c, stub({{50.0, 40.0}, {100.0, 3.0}, {150.0, 1.5}}));
  report(worked == 100.0, "6", "worked example (1e19, 1e17, 100 nm)",
         fmt("%g nm (expected 100 nm)", worked));

  // Minimal passing multiple of 50 nm on random ratio maps.
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> ratio(0.0, 25.0);
  int ok = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::map<double, double> table;
    for (double d = 50.0; d <= 500.0; d += 50.0) table[d] = ratio(rng);
    double expected = -1.0;
    for (const auto& [d, r] : table) {
      if (r < 10.0) {
        expected = d;
        break;
      }
    }
    try {
      ok += extract_koz(c, stub(table)) == expected;
    } catch (const NotFoundError&) {
      ok += expected < 0.0;
    }
  }
  report(ok == 1000, "6", "minimal passing spacing on random maps", std::to_string(ok) + "/1000");
  report_time("6", seconds_since(t0), 1.0);
}

// 7 -------------------------------------------------------------------------

void determinism() {
  const auto t0 = Clock::now();
  const fs::path root = scratch("determinism");
  std::ofstream(root / "coarse.json")
      << R"({"mesh": {"min_spacing": "2nm", "refine_distance": "4nm", "max_spacing": "16nm"}})";
  auto run = [&](const std::string& tag, const std::string& workers) {
    const fs::path out = root / tag;
    const int code = cli({"sweep", "--config", (root / "coarse.json").string(), "--param", "dsep",
                          "--values", "50nm,100nm", "--workers", workers, "--out", out.string()});
    return code == kExitOk ? slurp(out / "sweep_dsep.csv") + slurp(out / "sweep_dsep.json") : "";
  };
  const std::string one = run("w1", "1");
  const std::string many = run("w3", "3");
  const std::string again = run("w1_again", "1");
  report(!one.empty() && one == many, "7", "1 worker vs 3 workers",
         one == many ? "identical CSV and JSON" : "outputs differ");
  report(!one.empty() && one == again, "7", "repeated run",
         one == again ? "byte-identical" : "outputs differ");
  report_time("7", seconds_since(t0), 600.0);
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> ids(argv + 1, argv + argc);
  if (ids.empty() || ids == std::vector<std::string>{"all"}) ids = {"1", "2", "3", "4", "5", "6", "7"};
  MemoSimulator sim{SimulationSetup{}};
  for (const auto& id : ids) {
    try {
      if (id == "1") published_table();
      else if (id == "2") drc_equivalence();
      else if (id == "3") physics_oracles();
      else if (id == "4") trends(sim);
      else if (id == "5") offset_symmetry(sim);
      else if (id == "6") extraction_contract();
      else if (id == "7") determinism();
      else {
        std::cerr << "unknown criterion '" << id << "'\n";
        return 2;
      }
    } catch (const std::exception& e) {
      report(false, id, "criterion aborted", e.what());
    }
  }
  return failures == 0 ? 0 : 1;
}
