#include "mivkoz/sweep.hpp"

#include <atomic>
#include <cstdlib>
#include <future>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "mivkoz/errors.hpp"

namespace mivkoz {

namespace {

struct ParamName {
  SweepParam param;
  const char* name;
  Quantity quantity;
};

constexpr ParamName kParams[] = {
    {SweepParam::DSep, "dsep", Quantity::Length},
    {SweepParam::DOffset, "doffset", Quantity::Length},
    {SweepParam::TMiv, "tmiv", Quantity::Length},
    {SweepParam::TOx, "tox", Quantity::Length},
    {SweepParam::HSub, "hsub", Quantity::Length},
    {SweepParam::NSub, "nsub", Quantity::Concentration},
    {SweepParam::NSrc, "nsrc", Quantity::Concentration},
};

}  // namespace

SweepParam parse_sweep_param(std::string_view name) {
  for (const auto& p : kParams) {
    if (name == p.name) return p.param;
  }
  throw ConfigError("'" + std::string(name) +
                    "' is not a sweepable parameter (dsep, doffset, tmiv, tox, hsub, nsub, nsrc)");
}

std::string_view to_string(SweepParam p) {
  for (const auto& e : kParams) {
    if (e.param == p) return e.name;
  }
  return "?";
}

Quantity quantity_of(SweepParam p) {
  for (const auto& e : kParams) {
    if (e.param == p) return e.quantity;
  }
  return Quantity::Length;
}

ProcessCorner SweepPlan::corner_at(double v) const {
  ProcessCorner c = corner;
  switch (param) {
    case SweepParam::TMiv: c.t_miv = v; break;
    case SweepParam::TOx: c.t_ox = v; break;
    case SweepParam::HSub: c.h_sub = v; break;
    case SweepParam::NSub: c.n_sub = v; break;
    case SweepParam::NSrc: c.n_src = v; break;
    default: break;
  }
  return c;
}

PlacementScenario SweepPlan::scenario_at(double v) const {
  PlacementScenario s = scenario;
  s.miv_present = true;
  if (param == SweepParam::DSep) s.d_sep = v;
  if (param == SweepParam::DOffset) s.d_offset = v;
  return s;
}

void SweepPlan::validate() const {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  if (workers < 1) throw ConfigError("sweep needs at least one worker");
  for (double v : values) {
    if (!std::isfinite(v)) throw ConfigError("sweep values must be finite");
    validate_corner(corner_at(v), limits);
    build_layout(geometry, corner_at(v), scenario_at(v));
  }
}

std::size_t SweepResult::succeeded() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.outcome.has_value();
  return n;
}

int resolve_workers(int requested) {
  if (const char* env = std::getenv("MIVKOZ_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
  }
  return std::max(1, requested);
}

SweepResult run_sweep(const SweepPlan& plan, const MetricsSimulator& simulate) {
  SweepResult result;
  result.param = plan.param;
  result.entries.resize(plan.values.size());

  std::mutex cache_mutex;
  std::map<std::uint64_t, std::shared_future<DeviceMetrics>> baselines;

  auto baseline_for = [&](const ProcessCorner& c, const PlacementScenario& s) {
    const PlacementScenario bs = s.without_miv();
    const std::uint64_t key = build_layout(plan.geometry, c, bs).fingerprint();
    std::promise<DeviceMetrics> promise;
    std::shared_future<DeviceMetrics> fut;
    bool owner = false;
    {
      std::lock_guard<std::mutex> lock(cache_mutex);
      auto it = baselines.find(key);
      if (it == baselines.end()) {
        fut = promise.get_future().share();
        baselines.emplace(key, fut);
        owner = true;
      } else {
        fut = it->second;
      }
    }
    if (owner) {
      try {
        promise.set_value(simulate(c, bs));
      } catch (...) {
        promise.set_exception(std::current_exception());
      }
    }
    return fut.get();
  };

  auto run_point = [&](std::size_t i) {
    SweepEntry& e = result.entries[i];
    e.value = plan.values[i];
    try {
      const ProcessCorner c = validate_corner(plan.corner_at(e.value), plan.limits);
      const PlacementScenario s = plan.scenario_at(e.value);
      if (plan.with_baseline) {
        // A shared baseline may come from another point with the same
        // domain; relabel it so the report carries this point's corner.
        DeviceMetrics base = baseline_for(c, s);
        base.corner = c;
        base.scenario = s.without_miv();
        e.outcome = compare(base, simulate(c, s));
      } else {
        e.outcome = simulate(c, s);
      }
    } catch (const std::exception& ex) {
      e.error = ex.what();
    }
  };

  const std::size_t n = plan.values.size();
  const auto workers = static_cast<std::size_t>(std::max(1, plan.workers));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) run_point(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run_point(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : result.entries) {
    if (!e.outcome) result.failures.emplace_back(e.value, e.error);
  }
  return result;
}

namespace {

const char* unit_suffix(Quantity q) { return q == Quantity::Length ? "nm" : "cm3"; }

}  // namespace

void write_sweep_csv(std::ostream& os, const SweepResult& r) {
  os << to_string(r.param) << '_' << unit_suffix(quantity_of(r.param))
     << ",i_d_max_a,i_d_leak_a,max_ratio,leak_ratio,converged\n";
  for (const auto& e : r.entries) {
    os << format_double(e.value) << ',';
    if (!e.outcome) {
      os << ",,,,false\n";
    } else if (const auto* m = std::get_if<DeviceMetrics>(&*e.outcome)) {
      os << format_double(m->i_d_max) << ',' << format_double(m->i_d_leak) << ",,,true\n";
    } else {
      const auto& rr = std::get<RatioReport>(*e.outcome);
      os << format_double(rr.with_miv.i_d_max) << ',' << format_double(rr.with_miv.i_d_leak) << ','
         << format_double(rr.max_ratio) << ',' << format_double(rr.leak_ratio) << ",true\n";
    }
  }
}

nlohmann::json to_json(const SweepResult& r, const SweepPlan& plan,
                       const std::string& options_hash) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& e : r.entries) {
    nlohmann::json p{{"value", format_quantity(e.value, quantity_of(r.param))}};
    if (!e.outcome) {
      p["converged"] = false;
      p["error"] = e.error;
    } else if (const auto* m = std::get_if<DeviceMetrics>(&*e.outcome)) {
      p["converged"] = true;
      p["metrics"] = to_json(*m);
    } else {
      p["converged"] = true;
      p["ratio"] = to_json(std::get<RatioReport>(*e.outcome));
    }
    points.push_back(std::move(p));
  }
  return {{"param", std::string(to_string(r.param))},
          {"corner", to_json(plan.corner)},
          {"scenario", to_json(plan.scenario)},
          {"options_hash", options_hash},
          {"points", std::move(points)}};
}

}  // namespace mivkoz
