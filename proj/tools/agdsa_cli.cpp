// agdsa: scenario runs, model solves and parameter search from the shell.
//
// Exit codes: 0 ok, 2 bad arguments or config, 3 solver/simulation failure
// (for run: at least one CSV row carries an error; the CSV is still written).

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "agdsa/analytic.hpp"
#include "agdsa/scenario.hpp"
#include "agdsa/search.hpp"
#include "agdsa/simkit.hpp"

namespace fs = std::filesystem;
using namespace agdsa;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitFailure = 3;

fs::path default_out_dir() {
  if (const char* env = std::getenv("AGDSA_OUT_DIR"); env && *env) return env;
  return "results";
}

bench::Scenario resolve_scenario(const std::string& what) {
  if (fs::exists(what)) return bench::load_scenario(what);
  return bench::builtin_scenario(what);
}

int cmd_run(const std::string& config, const std::string& out_opt, const std::optional<std::uint64_t>& seed,
            bool validate_sim, int threads, bool timing, bool plots) {
  const bench::Scenario sc = resolve_scenario(config);
  bench::RunOptions options;
  options.threads = threads;
  options.seed = seed;
  options.validate_sim = validate_sim;
  options.timing = timing;
  options.progress = &std::cerr;
  const auto rows = bench::run_scenario(sc, options);

  const fs::path out = out_opt.empty() ? default_out_dir() : fs::path(out_opt);
  fs::create_directories(out);
  const fs::path csv = out / (sc.name + ".csv");
  {
    std::ofstream os(csv);
    if (!os) throw std::runtime_error("cannot write " + csv.string());
    bench::write_csv(os, rows);
  }
  std::cout << csv.string() << '\n';
  if (plots) {
    for (const auto& p : bench::emit_plotdata(rows, out, sc.name)) std::cout << p.string() << '\n';
  }
  int failed = 0;
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      ++failed;
      std::cerr << "error: " << r.scheme << " N=" << r.n << " lambda=" << r.lambda << " D=" << r.d
                << ": " << r.error << '\n';
    }
  }
  return failed ? kExitFailure : 0;
}

int cmd_solve(const NetworkConfig& net, int gamma, double p, bool validate_sim, const std::string& pi_csv,
              const std::string& alpha_csv) {
  const BasicParams params{static_cast<std::int64_t>(gamma) * net.frame_len, p};
  const auto spec = analytic::ExternalChainSpec::from_params(net, params);
  analytic::ExternalChainSolution solution;
  std::optional<double> empirical;
  if (validate_sim) {
    SimConfig sim = SimConfig::with_default_warmup(net, 500'000, 3, 1);
    sim.track_active_threshold = params.threshold;
    empirical = run_experiment(sim, [params] { return std::make_unique<BasicPolicy>(params); })
                    .active_frame_success_rate();
    solution = analytic::solve_nearest(spec, *empirical);
  } else {
    solution = analytic::solve_fixed_point(spec);
  }
  const double aaoi = analytic::network_aaoi(solution, spec);

  std::cout << std::setprecision(10);
  std::cout << "Gamma " << params.threshold << " (gamma " << gamma << " frames), p " << p << '\n';
  std::cout << "fixed points:";
  for (double b : solution.fixed_points_found) std::cout << ' ' << b;
  std::cout << '\n';
  if (empirical) std::cout << "simulated active-frame success rate " << *empirical << '\n';
  std::cout << "beta " << solution.beta << '\n';
  std::cout << "active mass " << solution.pi.active_mass() << '\n';
  std::cout << "aaoi " << aaoi << '\n';
  std::cout << "lower bound " << aaoi_lower_bound(net) << '\n';

  if (!pi_csv.empty()) {
    std::ofstream os(pi_csv);
    if (!os) throw std::runtime_error("cannot write " + pi_csv);
    analytic::write_pi_csv(os, solution.pi, spec.trunc_l);
  }
  if (!alpha_csv.empty()) {
    std::ofstream os(alpha_csv);
    if (!os) throw std::runtime_error("cannot write " + alpha_csv);
    analytic::write_alpha_csv(os, solution);
  }
  return 0;
}

int cmd_optimize(const NetworkConfig& net, bool validate, bool hooke_jeeves, int gamma_max, int threads) {
  search::SearchSpec spec;
  spec.cfg = net;
  spec.validate_sim = validate;
  spec.hooke_jeeves = hooke_jeeves;
  spec.gamma_max = gamma_max;
  spec.threads = threads;
  const auto r = search::optimize_basic(spec);
  std::cout << std::setprecision(10);
  for (const auto& round : r.rounds) {
    std::cout << "round p_cap " << round.p_cap << ": Gamma " << round.gamma * net.frame_len << " p "
              << round.p << " analytic " << round.analytic_aaoi << " sim " << round.sim_aaoi << '\n';
  }
  if (!std::isfinite(r.aaoi)) {
    std::cerr << "error: no feasible (Gamma, p)\n";
    return kExitFailure;
  }
  std::cout << "Gamma* " << r.threshold << '\n';
  std::cout << "p* " << r.p << '\n';
  std::cout << "aaoi* " << r.aaoi << '\n';
  std::cout << "validated " << (r.validated ? "yes" : "no") << '\n';
  std::cout << "evaluations " << r.log.size() << (r.budget_exhausted ? " (budget exhausted)" : "") << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Age-gain threshold slotted ALOHA: simulation, analysis and search"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a scenario config file or builtin scenario");
  std::string config, out_dir;
  std::optional<std::uint64_t> seed;
  bool validate_sim = false, timing = false, no_plots = false;
  int threads = 1;
  run->add_option("config", config, "Config JSON path or builtin name")->required();
  run->add_option("--out", out_dir, "Output directory (default $AGDSA_OUT_DIR or ./results)");
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_flag("--validate-sim", validate_sim,
                "analytic-basic rows use the fixed point nearest a short simulation");
  run->add_option("--threads", threads, "Grid points run concurrently")->check(CLI::PositiveNumber);
  run->add_flag("--timing", timing, "Fill the wall_ms column");
  run->add_flag("--no-plots", no_plots, "Skip plot-data files");

  auto* scenarios = app.add_subcommand("scenarios", "Builtin scenarios");
  scenarios->require_subcommand(1);
  auto* list = scenarios->add_subcommand("list", "List builtin scenario names");
  auto* show = scenarios->add_subcommand("show", "Print a builtin scenario as JSON");
  std::string show_name;
  show->add_option("name", show_name)->required();

  NetworkConfig net;
  auto add_net = [&net](CLI::App* cmd) {
    cmd->add_option("--N", net.num_devices, "Number of devices")->required();
    cmd->add_option("--lambda", net.gen_prob, "Per-frame update probability")->required();
    cmd->add_option("--D", net.frame_len, "Slots per frame")->required();
  };

  auto* solve = app.add_subcommand("solve", "Analytic AAoI of basic parameters");
  add_net(solve);
  int gamma = 1;
  double p = 1.0;
  std::string pi_csv, alpha_csv;
  bool solve_validate = false;
  solve->add_option("--gamma", gamma, "Threshold in frames (Gamma = gamma * D)")->required();
  solve->add_option("--p", p, "Transmission probability")->required();
  solve->add_flag("--validate-sim", solve_validate, "Pick the fixed point nearest a short simulation");
  solve->add_option("--pi-csv", pi_csv, "Write the stationary law");
  solve->add_option("--alpha-csv", alpha_csv, "Write per-slot success probabilities");

  auto* optimize = app.add_subcommand("optimize", "Search (Gamma, p) for the basic scheme");
  add_net(optimize);
  bool no_validate = false, hooke = false;
  int gamma_max = 0;
  optimize->add_flag("--no-validate", no_validate, "Skip the simulation check of the optimum");
  optimize->add_flag("--hooke-jeeves", hooke, "Refine with a pattern search");
  optimize->add_option("--gamma-max", gamma_max, "Largest gamma tried (0: patience rule only)");
  optimize->add_option("--threads", threads, "Threads for validation runs")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(config, out_dir, seed, validate_sim, threads, timing, !no_plots);
    if (list->parsed()) {
      for (const auto& n : bench::builtin_names()) std::cout << n << '\n';
      return 0;
    }
    if (show->parsed()) {
      std::cout << bench::scenario_to_json(bench::builtin_scenario(show_name)) << '\n';
      return 0;
    }
    if (solve->parsed() || optimize->parsed()) {
      try {
        net.validate();
      } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
      }
      if (solve->parsed()) return cmd_solve(net, gamma, p, solve_validate, pi_csv, alpha_csv);
      return cmd_optimize(net, !no_validate, hooke, gamma_max, threads);
    }
  } catch (const bench::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return 0;
}
