#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mivkoz/cli.hpp"
#include "mivkoz/config.hpp"
#include "mivkoz/errors.hpp"
#include "mivkoz/koz.hpp"

using namespace mivkoz;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mivkoz_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mivkoz");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

const char* kFloorplan = R"({
  "corners": {"nom": {"n_src": "1e19cm-3", "n_sub": "1e17cm-3", "h_sub": "100nm"}},
  "mivs": [{"id": "m1", "x": "0nm", "y": "0nm"}],
  "transistors": [{"id": "t1", "x": "SPACEnm", "y": "-10nm", "corner": "nom"}]
})";

std::string floorplan(double spacing) {
  std::string s = kFloorplan;
  s.replace(s.find("SPACE"), 5, std::to_string(26.0 + spacing));
  return s;
}

}  // namespace

TEST_CASE("config parsing is strict about keys and units") {
  const RunConfig def = parse_config(json::object());
  CHECK(def.corner == ProcessCorner{});
  CHECK(def.setup.solver.hash() == SolverOptions{}.hash());

  const RunConfig c = parse_config(json::parse(R"({
    "corner": {"t_ox": "2nm", "n_sub": "1e16cm-3"},
    "scenario": {"orientation": "horizontal", "d_sep": "0.1um", "terminal_order": "drain_near_miv"},
    "geometry": {"gate_workfunction": "4.7eV"},
    "mesh": {"min_spacing": "1nm", "cell_budget": 5000},
    "solver": {"mu_n": "1000cm2/Vs", "tau_n": "1us", "statistics": "fermi_dirac"},
    "bias": {"v_miv": "500mV"},
    "limits": "koz_study",
    "workers": 2
  })"));
  CHECK(c.corner.t_ox == 2.0);
  CHECK(c.corner.n_sub == 1e16);
  CHECK(c.scenario.orientation == Orientation::Horizontal);
  CHECK(c.scenario.d_sep == doctest::Approx(100.0));
  CHECK(c.scenario.terminal_order == TerminalOrder::DrainNearMiv);
  CHECK(c.setup.geometry.gate_workfunction == 4.7);
  CHECK(c.setup.mesh.cell_budget == 5000);
  CHECK(c.setup.solver.mu_n == 1000.0);
  CHECK(c.setup.solver.srh.tau_n == doctest::Approx(1e-6));
  CHECK(c.setup.solver.statistics == Statistics::FermiDiracApprox);
  CHECK(c.setup.v_miv == doctest::Approx(0.5));
  CHECK(c.workers == 2);
  CHECK(c.hash != def.hash);

  CHECK_THROWS_AS(parse_config(json::parse(R"({"corner": {"t_ox": 1}})")), ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"corner": {"t_ox": "1"}})")), ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"corner": {"tox": "1nm"}})")), ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"colour": 1})")), ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"mesh": {"dimension": 4}})")), ConfigError);

  RunConfig thin = parse_config(json::parse(R"({"corner": {"t_ox": "0.1nm"}})"));
  CHECK_THROWS_AS(thin.validate(), RangeError);
}

TEST_CASE("exit codes") {
  CHECK(cli({}).code == kExitInput);
  CHECK(cli({"bogus"}).code == kExitInput);
  const auto d = scratch("codes");
  CHECK(cli({"sweep", "--param", "vds", "--values", "1V", "--out", d.string()}).code == kExitInput);
  CHECK(cli({"sweep", "--param", "dsep", "--values", "20,50", "--out", d.string()}).code ==
        kExitInput);
  CHECK(cli({"sweep", "--param", "tox", "--values", "0.1nm", "--out", d.string()}).code ==
        kExitInput);

  write(d / "thin.json", R"({"corner": {"t_ox": "0.1nm"}})");
  const Result r = cli({"simulate", "--config", (d / "thin.json").string(), "--out", d.string()});
  CHECK(r.code == kExitInput);
  CHECK(r.err.find("[0.25, 2]") != std::string::npos);
  const json manifest = json::parse(slurp(d / "manifest.json"));
  CHECK(manifest["steps"].back()["status"] == "failed");

  write(d / "broken.json", "{ not json");
  CHECK(cli({"simulate", "--config", (d / "broken.json").string(), "--out", d.string()}).code ==
        kExitInput);
  CHECK(cli({"koz", "--corners", (d / "broken.json").string(), "--out", d.string()}).code ==
        kExitInput);
  CHECK(cli({"koz"}).code == kExitInput);
}

TEST_CASE("koz --paper is reproducible") {
  const auto d = scratch("koz");
  REQUIRE(cli({"koz", "--paper", "--out", d.string()}).code == kExitOk);
  const std::string first = slurp(d / "koz_table.json");
  const std::string hash1 = json::parse(slurp(d / "manifest.json"))["content_hash"];
  REQUIRE(cli({"koz", "--paper", "--out", d.string()}).code == kExitOk);
  CHECK(slurp(d / "koz_table.json") == first);
  CHECK(json::parse(slurp(d / "manifest.json"))["content_hash"] == hash1);
  const KozTable t = koz_table_from_json(json::parse(first));
  CHECK(t == paper_table());

  const Result stdout_run = cli({"koz", "--paper"});
  CHECK(stdout_run.out == first);
}

TEST_CASE("check command") {
  const auto d = scratch("check");
  write(d / "near.json", floorplan(80.0));
  write(d / "far.json", floorplan(120.0));
  write(d / "empty.json", "{}");
  write(d / "odd.json", R"({
    "corners": {"weird": {"n_src": "1e17cm-3", "n_sub": "1e15cm-3"}},
    "mivs": [{"id": "m1", "x": "0nm", "y": "0nm"}],
    "transistors": [{"id": "t9", "x": "200nm", "y": "0nm", "corner": "weird"}]})");
  REQUIRE(cli({"koz", "--paper", "--out", d.string()}).code == kExitOk);
  const std::string rules = (d / "koz_table.json").string();

  Result r = cli({"check", "--floorplan", (d / "far.json").string(), "--rules", rules});
  CHECK(r.code == kExitOk);
  CHECK(json::parse(r.out) == json::array());
  r = cli({"check", "--floorplan", (d / "empty.json").string(), "--rules", "paper"});
  CHECK(r.code == kExitOk);
  r = cli({"check", "--floorplan", (d / "near.json").string(), "--rules", rules});
  CHECK(r.code == kExitViolations);
  const json v = json::parse(r.out);
  REQUIRE(v.size() == 1);
  CHECK(v[0]["required"] == "100nm");
  CHECK(v[0]["transistor"] == "t1");
  r = cli({"check", "--floorplan", (d / "odd.json").string(), "--rules", rules});
  CHECK(r.code == kExitRuntime);
  CHECK(r.err.find("t9") != std::string::npos);
  r = cli({"check", "--floorplan", (d / "missing.json").string(), "--rules", rules});
  CHECK(r.code == kExitInput);
  r = cli({"check", "--floorplan", (d / "near.json").string(), "--rules", "paper", "--text"});
  CHECK(r.out.find("m1 -> t1") != std::string::npos);
}
