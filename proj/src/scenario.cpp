#include "agdsa/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "agdsa/analytic.hpp"
#include "agdsa/estimator.hpp"
#include "agdsa/policies.hpp"

namespace agdsa::bench {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_keys(const json& obj, std::string_view where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + std::string(where));
  }
}

template <class T>
void read_opt(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_safe(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  }
  return s;
}

SimConfig point_sim(const Scenario& sc, const NetworkConfig& net, std::uint64_t seed) {
  SimConfig sim = sc.sim;
  sim.net = net;
  sim.base_seed = seed;
  return sim;
}

void fill_sim(ResultRow& row, const SimConfig& sim, const SimResult& result) {
  row.aaoi_mean = result.network_aaoi_mean;
  row.aaoi_ci95 = result.network_aaoi_ci95_halfwidth;
  row.episodes = sim.replications;
  row.slots_per_episode = sim.horizon_slots;
  row.collisions = result.slot_counts.collision;
}

struct AoiPick {
  std::int64_t threshold = 1;
  double p = 1.0;
};

AoiPick sweep_aoi_threshold(const Scenario& sc, const NetworkConfig& net, std::uint64_t seed) {
  const double base = static_cast<double>(net.num_devices) * net.frame_len +
                      static_cast<double>(net.frame_len) / net.gen_prob;
  std::vector<std::int64_t> thresholds;
  for (double f : sc.aoi_sweep.threshold_factors)
    thresholds.push_back(std::max<std::int64_t>(1, std::llround(f * base)));
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const SimConfig sim =
      SimConfig::with_default_warmup(net, sc.aoi_sweep.slots, sc.aoi_sweep.replications, seed);
  AoiPick best;
  double best_aaoi = std::numeric_limits<double>::infinity();
  for (std::int64_t t : thresholds) {
    for (double p : sc.aoi_sweep.tx_probs) {
      const double v =
          run_experiment(sim, [t, p] { return std::make_unique<AoiThresholdPolicy>(t, p); })
              .network_aaoi_mean;
      if (v < best_aaoi) {
        best_aaoi = v;
        best = {t, p};
      }
    }
  }
  return best;
}

double empirical_active_success(const Scenario& sc, const NetworkConfig& net, const BasicParams& params,
                                std::uint64_t seed) {
  SimConfig sim = SimConfig::with_default_warmup(net, sc.search.validation_slots,
                                                 sc.search.validation_replications, seed);
  sim.track_active_threshold = params.threshold;
  return run_experiment(sim, [params] { return std::make_unique<BasicPolicy>(params); })
      .active_frame_success_rate();
}

std::vector<ResultRow> run_point(const Scenario& sc, const NetworkConfig& net, std::uint64_t seed,
                                 const RunOptions& options) {
  const double bound = aaoi_lower_bound(net);
  const SimConfig sim = point_sim(sc, net, seed);
  std::vector<std::string> schemes = sc.schemes;
  std::sort(schemes.begin(), schemes.end());

  std::optional<search::SearchResult> basic_search;
  std::string basic_search_error;
  auto need_basic = [&]() -> const search::SearchResult& {
    if (!basic_search && basic_search_error.empty()) {
      try {
        search::SearchSpec spec = sc.search;
        spec.cfg = net;
        basic_search = search::optimize_basic(spec);
        if (!std::isfinite(basic_search->aaoi)) {
          basic_search_error = "search found no feasible (Gamma, p)";
          basic_search.reset();
        }
      } catch (const std::exception& e) {
        basic_search_error = e.what();
      }
    }
    if (!basic_search) throw std::runtime_error(basic_search_error);
    return *basic_search;
  };

  std::vector<ResultRow> rows;
  for (const std::string& scheme : schemes) {
    if (scheme == "aoi-threshold" && net.frame_len != 1) continue;
    ResultRow row;
    row.scenario = sc.name;
    row.scheme = scheme;
    row.n = net.num_devices;
    row.lambda = net.gen_prob;
    row.d = net.frame_len;
    row.lower_bound = bound;
    row.seed = seed;
    const auto start = std::chrono::steady_clock::now();
    try {
      if (scheme == "lower-bound") {
        row.aaoi_mean = bound;
      } else if (scheme == "basic") {
        const auto& r = need_basic();
        const BasicParams params{r.threshold, r.p};
        row.gamma = r.threshold;
        row.p = r.p;
        fill_sim(row, sim, run_experiment(sim, [params] { return std::make_unique<BasicPolicy>(params); }));
      } else if (scheme == "analytic-basic") {
        const auto& r = need_basic();
        const BasicParams params{r.threshold, r.p};
        row.gamma = r.threshold;
        row.p = r.p;
        const auto spec = analytic::ExternalChainSpec::from_params(net, params);
        const auto solution =
            options.validate_sim || sc.validate_sim
                ? analytic::solve_nearest(spec, empirical_active_success(sc, net, params, seed))
                : analytic::solve_fixed_point(spec);
        row.aaoi_mean = analytic::network_aaoi(solution, spec);
      } else if (scheme == "aloha-gamma1") {
        search::SearchSpec spec = sc.search;
        spec.cfg = net;
        spec.gamma_min = 1;
        spec.gamma_max = 1;
        spec.hooke_jeeves = false;
        const auto r = search::optimize_basic(spec);
        if (!std::isfinite(r.aaoi)) throw std::runtime_error("search found no feasible p");
        const double p = r.p;
        row.gamma = 1;
        row.p = p;
        fill_sim(row, sim, run_experiment(sim, [p] { return std::make_unique<AlohaGamma1Policy>(p); }));
      } else if (scheme == "aoi-threshold") {
        const AoiPick pick = sweep_aoi_threshold(sc, net, seed);
        row.gamma = pick.threshold;
        row.p = pick.p;
        fill_sim(row, sim, run_experiment(sim, [pick] {
                   return std::make_unique<AoiThresholdPolicy>(pick.threshold, pick.p);
                 }));
      } else if (scheme == "enhanced") {
        fill_sim(row, sim, run_experiment(sim, [net] { return std::make_unique<estimator::EnhancedPolicy>(net); }));
      } else if (scheme == "ideal-adaptive") {
        fill_sim(row, sim, run_experiment(sim, [] { return std::make_unique<IdealAdaptivePolicy>(); }));
      } else if (scheme == "ideal-scheduling") {
        fill_sim(row, sim, run_experiment(sim, [] { return std::make_unique<IdealSchedulingPolicy>(); }));
      }
    } catch (const std::exception& e) {
      row.aaoi_mean = kNaN;
      row.aaoi_ci95 = kNaN;
      row.error = csv_safe(e.what());
      if (row.error.empty()) row.error = "error";
    }
    if (options.timing)
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

const std::vector<std::string>& known_schemes() {
  static const std::vector<std::string> names{"aloha-gamma1",   "analytic-basic", "aoi-threshold",
                                              "basic",          "enhanced",       "ideal-adaptive",
                                              "ideal-scheduling", "lower-bound"};
  return names;
}

void Scenario::validate() const {
  if (name.empty()) throw ConfigError("scenario name must be nonempty");
  if (n_values.empty() || lambda_values.empty() || d_values.empty())
    throw ConfigError("grid lists must be nonempty");
  if (schemes.empty()) throw ConfigError("schemes must be nonempty");
  const auto& known = known_schemes();
  std::set<std::string> seen;
  for (const auto& s : schemes) {
    if (std::find(known.begin(), known.end(), s) == known.end())
      throw ConfigError("unknown scheme '" + s + "'");
    if (!seen.insert(s).second) throw ConfigError("duplicate scheme '" + s + "'");
  }
  try {
    for (int n : n_values)
      for (double l : lambda_values)
        for (int d : d_values) NetworkConfig{n, l, d}.validate();
    SimConfig s = sim;
    s.net = NetworkConfig{};
    s.validate();
    search::SearchSpec sp = search;
    sp.cfg = NetworkConfig{};
    sp.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (!(search.validation_tolerance > 0.0)) throw ConfigError("validation_tolerance must be positive");
  if (search.validation_slots < 2 || search.validation_replications < 1)
    throw ConfigError("validation_slots must be >= 2 and validation_replications >= 1");
  if (aoi_sweep.threshold_factors.empty() || aoi_sweep.tx_probs.empty())
    throw ConfigError("aoi_threshold_sweep lists must be nonempty");
  for (double f : aoi_sweep.threshold_factors)
    if (!(f > 0.0)) throw ConfigError("threshold factors must be positive");
  for (double p : aoi_sweep.tx_probs)
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("sweep probabilities must lie in (0, 1]");
  if (aoi_sweep.slots < 2 || aoi_sweep.replications < 1)
    throw ConfigError("aoi_threshold_sweep needs slots >= 2 and replications >= 1");
}

Scenario parse_scenario(std::string_view json_text) {
  Scenario sc;
  try {
    const json doc = json::parse(json_text);
    check_keys(doc, "scenario",
               {"name", "grid", "schemes", "sim", "search", "aoi_threshold_sweep", "validate_sim"});
    if (!doc.contains("name") || !doc.contains("grid") || !doc.contains("schemes"))
      throw ConfigError("scenario needs name, grid and schemes");
    sc.name = doc.at("name").get<std::string>();
    const json& grid = doc.at("grid");
    check_keys(grid, "grid", {"N", "lambda", "D"});
    sc.n_values = grid.at("N").get<std::vector<int>>();
    sc.lambda_values = grid.at("lambda").get<std::vector<double>>();
    sc.d_values = grid.at("D").get<std::vector<int>>();
    sc.schemes = doc.at("schemes").get<std::vector<std::string>>();

    if (doc.contains("sim")) {
      const json& s = doc.at("sim");
      check_keys(s, "sim", {"horizon_slots", "warmup_slots", "replications", "seed"});
      read_opt(s, "horizon_slots", sc.sim.horizon_slots);
      sc.sim.warmup_slots = sc.sim.horizon_slots / 10;
      read_opt(s, "warmup_slots", sc.sim.warmup_slots);
      read_opt(s, "replications", sc.sim.replications);
      read_opt(s, "seed", sc.sim.base_seed);
    }
    if (doc.contains("search")) {
      const json& s = doc.at("search");
      check_keys(s, "search",
                 {"p_tolerance", "budget", "patience", "gamma_max", "hooke_jeeves", "validate_sim",
                  "validation_tolerance", "validation_slots", "validation_replications"});
      read_opt(s, "p_tolerance", sc.search.p_tolerance);
      read_opt(s, "budget", sc.search.budget);
      read_opt(s, "patience", sc.search.patience);
      read_opt(s, "gamma_max", sc.search.gamma_max);
      read_opt(s, "hooke_jeeves", sc.search.hooke_jeeves);
      read_opt(s, "validate_sim", sc.search.validate_sim);
      read_opt(s, "validation_tolerance", sc.search.validation_tolerance);
      read_opt(s, "validation_slots", sc.search.validation_slots);
      read_opt(s, "validation_replications", sc.search.validation_replications);
    }
    if (doc.contains("aoi_threshold_sweep")) {
      const json& s = doc.at("aoi_threshold_sweep");
      check_keys(s, "aoi_threshold_sweep", {"threshold_factors", "tx_probs", "slots", "replications"});
      read_opt(s, "threshold_factors", sc.aoi_sweep.threshold_factors);
      read_opt(s, "tx_probs", sc.aoi_sweep.tx_probs);
      read_opt(s, "slots", sc.aoi_sweep.slots);
      read_opt(s, "replications", sc.aoi_sweep.replications);
    }
    read_opt(doc, "validate_sim", sc.validate_sim);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  sc.validate();
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str());
}

std::string scenario_to_json(const Scenario& sc) {
  json doc;
  doc["name"] = sc.name;
  doc["grid"] = {{"N", sc.n_values}, {"lambda", sc.lambda_values}, {"D", sc.d_values}};
  doc["schemes"] = sc.schemes;
  doc["sim"] = {{"horizon_slots", sc.sim.horizon_slots},
                {"warmup_slots", sc.sim.warmup_slots},
                {"replications", sc.sim.replications},
                {"seed", sc.sim.base_seed}};
  doc["search"] = {{"p_tolerance", sc.search.p_tolerance},
                   {"budget", sc.search.budget},
                   {"patience", sc.search.patience},
                   {"gamma_max", sc.search.gamma_max},
                   {"hooke_jeeves", sc.search.hooke_jeeves},
                   {"validate_sim", sc.search.validate_sim},
                   {"validation_tolerance", sc.search.validation_tolerance},
                   {"validation_slots", sc.search.validation_slots},
                   {"validation_replications", sc.search.validation_replications}};
  doc["aoi_threshold_sweep"] = {{"threshold_factors", sc.aoi_sweep.threshold_factors},
                                {"tx_probs", sc.aoi_sweep.tx_probs},
                                {"slots", sc.aoi_sweep.slots},
                                {"replications", sc.aoi_sweep.replications}};
  doc["validate_sim"] = sc.validate_sim;
  return doc.dump(2);
}

std::vector<std::string> builtin_names() { return {"acceptance", "fig4-desk", "fig5-desk", "smoke"}; }

Scenario builtin_scenario(std::string_view name) {
  Scenario sc;
  sc.name = std::string(name);
  if (name == "smoke") {
    sc.n_values = {1};
    sc.lambda_values = {1.0};
    sc.d_values = {1, 2};
    sc.schemes = {"analytic-basic", "basic", "ideal-scheduling", "lower-bound"};
    sc.sim = SimConfig::with_default_warmup(NetworkConfig{}, 10'000, 2, 1);
  } else if (name == "fig4-desk") {
    sc.n_values = {10, 30, 100};
    sc.lambda_values = {0.1, 0.3, 0.5, 1.0};
    sc.d_values = {1, 10};
    sc.schemes = {"aloha-gamma1", "analytic-basic", "aoi-threshold", "basic", "lower-bound"};
    sc.sim = SimConfig::with_default_warmup(NetworkConfig{}, 100'000, 10, 1);
  } else if (name == "fig5-desk") {
    sc.n_values = {5, 30, 100};
    sc.lambda_values = {0.05, 0.1, 0.3, 0.5, 1.0};
    sc.d_values = {1, 10};
    sc.schemes = {"basic", "enhanced", "ideal-adaptive", "ideal-scheduling", "lower-bound"};
    sc.sim = SimConfig::with_default_warmup(NetworkConfig{}, 100'000, 10, 1);
  } else if (name == "acceptance") {
    sc.n_values = {5, 10, 30};
    sc.lambda_values = {0.1, 1.0};
    sc.d_values = {1, 10};
    sc.schemes = known_schemes();
    sc.sim = SimConfig::with_default_warmup(NetworkConfig{}, 20'000, 5, 1);
    sc.aoi_sweep.slots = 10'000;
    sc.aoi_sweep.replications = 1;
  } else {
    throw ConfigError("unknown builtin scenario '" + std::string(name) + "'");
  }
  sc.validate();
  return sc;
}

std::vector<ResultRow> run_scenario(const Scenario& scenario, const RunOptions& options) {
  scenario.validate();
  const std::uint64_t seed = options.seed.value_or(scenario.sim.base_seed);
  std::vector<NetworkConfig> points;
  for (int n : scenario.n_values)
    for (double l : scenario.lambda_values)
      for (int d : scenario.d_values) points.push_back({n, l, d});

  std::vector<std::vector<ResultRow>> per_point(points.size());
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      per_point[i] = run_point(scenario, points[i], seed, options);
      if (options.progress) {
        std::lock_guard lock(progress_mutex);
        *options.progress << "[" << scenario.name << "] N=" << points[i].num_devices
                          << " lambda=" << points[i].gen_prob << " D=" << points[i].frame_len
                          << " done\n";
        options.progress->flush();
      }
    }
  };
  const int threads = std::clamp(options.threads, 1, static_cast<int>(points.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<ResultRow> rows;
  for (auto& group : per_point)
    for (auto& row : group) rows.push_back(std::move(row));
  return rows;
}

void write_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << "scenario,scheme,N,lambda,D,gamma,p,aaoi_mean,aaoi_ci95,lower_bound,episodes,"
        "slots_per_episode,seed,wall_ms,error\n";
  for (const auto& r : rows) {
    os << csv_safe(r.scenario) << ',' << r.scheme << ',' << r.n << ',' << format_number(r.lambda) << ','
       << r.d << ',' << (r.gamma ? std::to_string(*r.gamma) : std::string()) << ','
       << (r.p ? format_number(*r.p) : std::string()) << ',' << format_number(r.aaoi_mean) << ','
       << format_number(r.aaoi_ci95) << ',' << format_number(r.lower_bound) << ',' << r.episodes << ','
       << r.slots_per_episode << ',' << r.seed << ',' << format_number(r.wall_ms) << ',' << r.error
       << '\n';
  }
}

std::vector<std::filesystem::path> emit_plotdata(const std::vector<ResultRow>& rows,
                                                 const std::filesystem::path& dir,
                                                 const std::string& prefix) {
  struct Cell {
    double mean = kNaN;
    double ci = kNaN;
  };
  // (D, N) -> lambda -> scheme -> value
  std::map<std::pair<int, int>, std::map<double, std::map<std::string, Cell>>> groups;
  std::map<std::pair<int, int>, std::set<std::string>> series;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.d, r.n);
    groups[key][r.lambda][r.scheme] = r.error.empty() ? Cell{r.aaoi_mean, r.aaoi_ci95} : Cell{};
    series[key].insert(r.scheme);
  }

  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const auto& [key, by_lambda] : groups) {
    const auto path = dir / (prefix + "_D" + std::to_string(key.first) + "_N" + std::to_string(key.second) + ".tsv");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "lambda";
    for (const auto& s : series[key]) out << '\t' << s << "_mean\t" << s << "_ci95";
    out << '\n';
    for (const auto& [lambda, cells] : by_lambda) {
      out << format_number(lambda);
      for (const auto& s : series[key]) {
        const auto it = cells.find(s);
        const Cell c = it == cells.end() ? Cell{} : it->second;
        out << '\t' << (std::isnan(c.mean) ? "nan" : format_number(c.mean)) << '\t'
            << (std::isnan(c.ci) ? "nan" : format_number(c.ci));
      }
      out << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + path.string());
    written.push_back(path);
  }
  return written;
}

}  // namespace agdsa::bench
