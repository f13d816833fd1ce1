#include "mivkoz/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mivkoz/config.hpp"
#include "mivkoz/errors.hpp"
#include "mivkoz/koz.hpp"
#include "mivkoz/sweep.hpp"

namespace mivkoz {

namespace fs = std::filesystem;
using nlohmann::json;

json RunManifest::to_json() const {
  json steps_json = json::array();
  for (const auto& s : steps) {
    steps_json.push_back({{"name", s.name}, {"status", s.status}, {"detail", s.detail}});
  }
  json j{{"command", command}, {"config_hash", config_hash}, {"inputs", inputs},
         {"outputs", outputs}, {"steps", std::move(steps_json)}, {"echo", echo}};
  j["content_hash"] = hex64(fnv1a(j.dump()));
  j["duration_s"] = duration_s;
  return j;
}

std::string RunManifest::content_hash() const { return to_json()["content_hash"]; }

namespace {

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("cannot write '" + path + "'");
  os << text;
  if (!os) throw ConfigError("failed writing '" + path + "'");
}

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

int exit_code_for(const std::exception_ptr& ep, std::ostream& err) {
  try {
    std::rethrow_exception(ep);
  } catch (const ConfigError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const RangeError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const GeometryError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const BudgetError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

/// Shared output plumbing: tracks the manifest and writes it last.
class Run {
 public:
  Run(std::string command, std::string out_dir) : out_dir_(std::move(out_dir)) {
    manifest_.command = std::move(command);
    start_ = std::chrono::steady_clock::now();
    if (!out_dir_.empty()) fs::create_directories(out_dir_);
  }

  RunManifest& manifest() { return manifest_; }
  bool has_dir() const { return !out_dir_.empty(); }

  std::string path(const std::string& name) const { return (fs::path(out_dir_) / name).string(); }

  void output(const std::string& name, const std::string& text) {
    const std::string p = path(name);
    write_file(p, text);
    manifest_.outputs.push_back(p);
  }

  void step(std::string name, bool ok, std::string detail = {}) {
    manifest_.steps.push_back({std::move(name), ok ? "ok" : "failed", std::move(detail)});
  }

  void finish() {
    if (out_dir_.empty()) return;
    manifest_.duration_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_file(path("manifest.json"), json_text(manifest_.to_json()));
  }

 private:
  std::string out_dir_;
  RunManifest manifest_;
  std::chrono::steady_clock::time_point start_;
};

RunConfig config_from(const std::string& path, Run& run) {
  if (path.empty()) {
    RunConfig c = parse_config(json::object());
    run.manifest().config_hash = c.hash;
    return c;
  }
  RunConfig c = load_config(path);
  run.manifest().inputs.push_back(path);
  run.manifest().config_hash = c.hash;
  return c;
}

std::vector<double> bias_grid(double step) {
  if (!(step > 0.0) || step > 1.0) throw ConfigError("bias step must lie in (0 V, 1 V]");
  const auto n = static_cast<int>(std::lround(1.0 / step));
  if (std::abs(n * step - 1.0) > 1e-9) throw ConfigError("bias step must divide 1 V evenly");
  std::vector<double> g;
  for (int i = 0; i <= n; ++i) g.push_back(static_cast<double>(i) / n);
  return g;
}

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string out = "out";
  bool with_miv = false;
  bool baseline = false;
  std::string orientation;
  std::string terminal_order;
  std::string dsep;
  std::string doffset;
  double vg_step = 0.1;
  double vd_step = 0.1;
  bool skip_idvd = false;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  Run run("simulate", a.out);
  int code = kExitOk;
  try {
    RunConfig cfg = config_from(a.config, run);
    json overrides = json::object();
    if (!a.orientation.empty()) overrides["orientation"] = a.orientation;
    if (!a.terminal_order.empty()) overrides["terminal_order"] = a.terminal_order;
    if (!a.dsep.empty()) overrides["d_sep"] = a.dsep;
    if (!a.doffset.empty()) overrides["d_offset"] = a.doffset;
    cfg.scenario = parse_scenario(overrides, cfg.scenario);
    if (a.with_miv) cfg.scenario.miv_present = true;
    cfg.validate();
    const auto vg = bias_grid(a.vg_step);
    const auto vd = bias_grid(a.vd_step);

    std::vector<std::pair<std::string, PlacementScenario>> runs;
    if (a.baseline) runs.emplace_back("baseline", cfg.scenario.without_miv());
    if (a.with_miv || (!a.baseline && cfg.scenario.miv_present)) {
      runs.emplace_back("miv", cfg.scenario);
    }
    if (runs.empty()) runs.emplace_back("baseline", cfg.scenario);
    run.manifest().echo = {{"corner", to_json(cfg.corner)},
                           {"scenario", to_json(cfg.scenario)},
                           {"options_hash", cfg.setup.hash()}};

    std::map<std::string, DeviceMetrics> metrics;
    for (const auto& [tag, scenario] : runs) {
      const DeviceLayout layout = build_layout(cfg.setup.geometry, cfg.corner, scenario);
      const TensorMesh mesh = generate_mesh(layout, cfg.setup.mesh);
      DeviceSolver solver(mesh, assign_doping(layout, mesh), cfg.setup.solver);
      const SolutionState eq = solver.equilibrium();
      BiasPoint base;
      base.v_miv = scenario.miv_present ? cfg.setup.v_miv : 0.0;
      base.v_sub = cfg.setup.v_sub;

      const IVCurve idvg = id_vg_sweep(solver, eq, 1.0, vg, base);
      std::ostringstream csv;
      write_iv_csv(csv, idvg);
      run.output("idvg_" + tag + ".csv", csv.str());
      if (idvg.failure) {
        run.step("idvg_" + tag, false, *idvg.failure);
        code = kExitRuntime;
        err << tag << ": " << *idvg.failure << '\n';
        continue;
      }
      run.step("idvg_" + tag, true);
      const DeviceMetrics m = extract_metrics(idvg, cfg.corner, scenario, cfg.setup.geometry);
      metrics[tag] = m;
      run.output("metrics_" + tag + ".json", json_text(to_json(m)));
      out << tag << ": i_d_max " << format_double(m.i_d_max) << " A, i_d_leak "
          << format_double(m.i_d_leak) << " A\n";

      if (!a.skip_idvd) {
        std::ostringstream vcsv;
        bool ok = true;
        for (double v_gs : {0.5, 0.75, 1.0}) {
          BiasPoint b = base;
          b.v_gs = v_gs;
          const SolutionState start = solver.solve(eq, b);
          const IVCurve c = id_vd_sweep(solver, start, v_gs, vd, base);
          std::ostringstream part;
          write_iv_csv(part, c);
          std::string text = part.str();
          if (vcsv.tellp() > 0) text = text.substr(text.find('\n') + 1);
          vcsv << text;
          if (c.failure) {
            run.step("idvd_" + tag, false, *c.failure);
            err << tag << ": " << *c.failure << '\n';
            code = kExitRuntime;
            ok = false;
            break;
          }
        }
        run.output("idvd_" + tag + ".csv", vcsv.str());
        if (ok) run.step("idvd_" + tag, true);
      }
    }
    if (metrics.count("baseline") && metrics.count("miv")) {
      const RatioReport r = compare(metrics["baseline"], metrics["miv"]);
      run.output("ratio.json", json_text(to_json(r)));
      out << "ratio: i_d_max x" << format_double(r.max_ratio) << ", i_d_leak x"
          << format_double(r.leak_ratio) << '\n';
    }
  } catch (...) {
    code = exit_code_for(std::current_exception(), err);
    run.step("simulate", false, "aborted");
  }
  run.finish();
  return code;
}

// ---- sweep -----------------------------------------------------------------

struct SweepArgs {
  std::string config;
  std::string out = "out";
  std::string param;
  std::string values;
  int workers = 0;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  Run run("sweep", a.out);
  int code = kExitOk;
  try {
    RunConfig cfg = config_from(a.config, run);
    SweepPlan plan;
    plan.param = parse_sweep_param(a.param);
    std::stringstream ss(a.values);
    for (std::string item; std::getline(ss, item, ',');) {
      plan.values.push_back(parse_quantity(item, quantity_of(plan.param)));
    }
    plan.corner = cfg.corner;
    plan.scenario = cfg.scenario;
    plan.geometry = cfg.setup.geometry;
    plan.limits = cfg.limits;
    plan.workers = resolve_workers(a.workers > 0 ? a.workers : cfg.workers);
    plan.validate();
    const std::string options_hash = cfg.setup.hash();
    json values = json::array();
    for (double v : plan.values) values.push_back(format_quantity(v, quantity_of(plan.param)));
    run.manifest().echo = {{"param", std::string(to_string(plan.param))},
                           {"values", values},
                           {"options_hash", options_hash}};

    const SimulationSetup setup = cfg.setup;
    const SweepResult result =
        run_sweep(plan, [&setup](const ProcessCorner& c, const PlacementScenario& s) {
          return simulate_metrics(setup, c, s);
        });
    const std::string stem = "sweep_" + std::string(to_string(plan.param));
    std::ostringstream csv;
    write_sweep_csv(csv, result);
    run.output(stem + ".csv", csv.str());
    run.output(stem + ".json", json_text(to_json(result, plan, options_hash)));
    for (const auto& e : result.entries) {
      const std::string label = format_quantity(e.value, quantity_of(plan.param));
      run.step(label, e.outcome.has_value(), e.error);
      if (!e.outcome) err << "point " << label << " failed: " << e.error << '\n';
    }
    out << result.succeeded() << " of " << result.entries.size() << " points succeeded\n";
    if (result.succeeded() == 0) code = kExitRuntime;
  } catch (...) {
    code = exit_code_for(std::current_exception(), err);
    run.step("sweep", false, "aborted");
  }
  run.finish();
  return code;
}

// ---- koz -------------------------------------------------------------------

struct KozArgs {
  std::string config;
  std::string corners;
  bool paper = false;
  std::string out;
};

int cmd_koz(const KozArgs& a, std::ostream& out, std::ostream& err) {
  Run run("koz", a.out);
  int code = kExitOk;
  try {
    KozTable table;
    if (a.paper) {
      if (!a.corners.empty()) throw ConfigError("--paper and --corners are exclusive");
      table = paper_table();
      run.manifest().config_hash = hex64(fnv1a("paper"));
      run.step("paper_table", true);
    } else {
      if (a.corners.empty()) throw ConfigError("koz needs --paper or --corners FILE");
      RunConfig cfg = config_from(a.config, run);
      const json doc = read_json_file(a.corners);
      run.manifest().inputs.push_back(a.corners);
      ObjectReader r(doc, "corners file");
      if (const json* s = r.object("scan")) {
        ObjectReader sr(*s, "scan");
        table.scan.threshold = sr.number_or("threshold", table.scan.threshold);
        table.scan.step = sr.quantity_or("step", Quantity::Length, table.scan.step);
        table.scan.start = sr.quantity_or("start", Quantity::Length, table.scan.start);
        table.scan.max = sr.quantity_or("max", Quantity::Length, table.scan.max);
        sr.finish();
      }
      table.scan.validate();
      std::vector<ProcessCorner> corners;
      for (const auto& c : r.array("corners")) {
        corners.push_back(validate_corner(parse_corner(c), CornerLimits::koz_study()));
      }
      r.finish();
      if (corners.empty()) throw ConfigError("corners file lists no corners");
      table.source = KozSource::Simulated;
      table.options_hash = cfg.setup.hash();
      for (const auto& c : corners) {
        const std::string label = format_quantity(c.n_src, Quantity::Concentration) + "/" +
                                  format_quantity(c.n_sub, Quantity::Concentration) + "/" +
                                  format_quantity(c.h_sub, Quantity::Length);
        try {
          const double koz = extract_koz(c, device_ratio_simulator(cfg.setup, c), table.scan);
          table.rules.push_back({c.n_src, c.n_sub, c.h_sub, koz, false});
          run.step(label, true, format_quantity(koz, Quantity::Length));
        } catch (const Error& e) {
          run.step(label, false, e.what());
          err << "corner " << label << ": " << e.what() << '\n';
          code = kExitRuntime;
        }
      }
    }
    const std::string text = json_text(to_json(table));
    if (run.has_dir()) {
      run.output("koz_table.json", text);
    } else {
      out << text;
    }
  } catch (...) {
    code = exit_code_for(std::current_exception(), err);
    run.step("koz", false, "aborted");
  }
  run.finish();
  return code;
}

// ---- check -----------------------------------------------------------------

struct CheckArgs {
  std::string floorplan;
  std::string rules;
  bool text = false;
  bool pitch = false;
  std::string pitch_min = "100nm";
  std::string out;
};

int cmd_check(const CheckArgs& a, std::ostream& out, std::ostream& err) {
  Run run("check", a.out);
  int code = kExitOk;
  try {
    const Floorplan fp = floorplan_from_json(read_json_file(a.floorplan));
    run.manifest().inputs.push_back(a.floorplan);
    const KozTable table =
        a.rules == "paper" ? paper_table() : koz_table_from_json(read_json_file(a.rules));
    run.manifest().inputs.push_back(a.rules);
    run.manifest().config_hash = hex64(fnv1a(to_json(fp).dump() + to_json(table).dump()));
    const double min_pitch = parse_quantity(a.pitch_min, Quantity::Length);

    std::vector<Violation> v;
    try {
      v = check_floorplan(fp, table);
    } catch (const OutOfDomainError& e) {
      err << "error: " << e.what() << '\n';
      run.step("check", false, e.what());
      run.finish();
      return kExitRuntime;
    }
    json report = to_json(v);
    std::size_t count = v.size();
    if (a.pitch) {
      json pitch = json::array();
      for (const auto& p : check_miv_pitch(fp, min_pitch)) {
        pitch.push_back({{"first", p.first},
                         {"second", p.second},
                         {"pitch", format_quantity(p.pitch, Quantity::Length)},
                         {"required", format_quantity(p.required, Quantity::Length)}});
      }
      count += pitch.size();
      report = {{"koz", std::move(report)}, {"pitch", std::move(pitch)}};
    }
    if (a.text) {
      write_violations_text(out, v);
    } else {
      out << report.dump(2) << '\n';
    }
    if (run.has_dir()) run.output("violations.json", json_text(report));
    run.step("check", true, std::to_string(count) + " violations");
    if (count > 0) code = kExitViolations;
  } catch (...) {
    code = exit_code_for(std::current_exception(), err);
  }
  run.finish();
  return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"MIV keep-out-zone toolkit: device simulation, sweeps, KOZ tables, DRC"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "I-V curves and metrics for one placement");
  s->add_option("--config", sim.config, "JSON config");
  s->add_option("--out", sim.out, "output directory");
  s->add_flag("--with-miv", sim.with_miv, "simulate the device with the MIV");
  s->add_flag("--baseline", sim.baseline, "simulate the device without the MIV");
  s->add_option("--scenario", sim.orientation, "vertical | horizontal");
  s->add_option("--terminal-order", sim.terminal_order, "source_near_miv | drain_near_miv");
  s->add_option("--dsep", sim.dsep, "MIV to active edge spacing, e.g. 50nm");
  s->add_option("--doffset", sim.doffset, "MIV offset along the channel, e.g. 0nm");
  s->add_option("--vg-step", sim.vg_step, "gate sweep step, V");
  s->add_option("--vd-step", sim.vd_step, "drain sweep step, V");
  s->add_flag("--skip-idvd", sim.skip_idvd, "only the I_D-V_GS curve");

  SweepArgs sw;
  auto* w = app.add_subcommand("sweep", "one-parameter sweep of metrics and ratios");
  w->add_option("--config", sw.config, "JSON config");
  w->add_option("--out", sw.out, "output directory");
  w->add_option("--param", sw.param, "dsep | doffset | tmiv | tox | hsub | nsub | nsrc")
      ->required();
  w->add_option("--values", sw.values, "comma separated values with units, e.g. 20nm,50nm")
      ->required();
  w->add_option("--workers", sw.workers, "parallel workers (MIVKOZ_WORKERS overrides)");

  KozArgs kz;
  auto* k = app.add_subcommand("koz", "keep-out table from the published data or simulation");
  k->add_flag("--paper", kz.paper, "emit the published keep-out table");
  k->add_option("--corners", kz.corners, "JSON list of corners to extract");
  k->add_option("--config", kz.config, "JSON config for simulated extraction");
  k->add_option("--out", kz.out, "output directory (stdout when omitted)");

  CheckArgs ck;
  auto* c = app.add_subcommand("check", "keep-out DRC of a floorplan");
  c->add_option("--floorplan", ck.floorplan, "floorplan JSON")->required();
  c->add_option("--rules", ck.rules, "keep-out table JSON, or 'paper'")->required();
  c->add_flag("--text", ck.text, "human-readable report instead of JSON");
  c->add_flag("--pitch", ck.pitch, "also check MIV-to-MIV pitch");
  c->add_option("--pitch-min", ck.pitch_min, "minimum MIV pitch, e.g. 100nm");
  c->add_option("--out", ck.out, "also write violations.json and a manifest here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitInput;
  }

  if (s->parsed()) return cmd_simulate(sim, out, err);
  if (w->parsed()) return cmd_sweep(sw, out, err);
  if (k->parsed()) return cmd_koz(kz, out, err);
  return cmd_check(ck, out, err);
}

}  // namespace mivkoz
