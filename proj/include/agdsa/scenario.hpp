#pragma once

// Experiment harness: scenario configs (JSON), scheme sweeps over (N, lambda, D)
// grids, CSV rows and plot-data files.
//
// Config schema (every field except name, grid and schemes is optional):
//   {
//     "name": "fig4-desk",
//     "grid": {"N": [10, 30], "lambda": [0.3, 1.0], "D": [1, 10]},
//     "schemes": ["basic", "analytic-basic", ...],
//     "sim": {"horizon_slots": 100000, "warmup_slots": 10000,
//             "replications": 10, "seed": 1},
//     "search": {"p_tolerance": 0.001, "budget": 20000, "patience": 5,
//                "gamma_max": 0, "hooke_jeeves": false, "validate_sim": true,
//                "validation_tolerance": 0.035, "validation_slots": 500000,
//                "validation_replications": 3},
//     "aoi_threshold_sweep": {"threshold_factors": [...], "tx_probs": [...],
//                             "slots": 20000, "replications": 2},
//     "validate_sim": false
//   }

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "agdsa/search.hpp"
#include "agdsa/simkit.hpp"

namespace agdsa::bench {

/// Malformed or invalid scenario config.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every scheme name, alphabetical.
const std::vector<std::string>& known_schemes();

/// Grid for the AoI-threshold benchmark: thresholds are
/// round(factor * (N D + D / lambda)) slots; every (threshold, p) pair gets a
/// short simulation and the best pair is simulated at full length.
struct AoiThresholdSweep {
  std::vector<double> threshold_factors{0.25, 0.5, 0.75, 1.0, 1.5, 2.0};
  std::vector<double> tx_probs{0.02, 0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0};
  std::int64_t slots = 20'000;
  int replications = 2;
};

struct Scenario {
  std::string name;
  std::vector<int> n_values;
  std::vector<double> lambda_values;
  std::vector<int> d_values;
  std::vector<std::string> schemes;
  /// Horizon, warmup, replications and seed; net is set per grid point.
  SimConfig sim;
  /// Search template; cfg is set per grid point.
  search::SearchSpec search;
  AoiThresholdSweep aoi_sweep;
  /// analytic-basic rows keep the fixed point nearest a short simulation's
  /// per-frame success rate instead of the largest one.
  bool validate_sim = false;

  void validate() const;
};

Scenario parse_scenario(std::string_view json_text);
Scenario load_scenario(const std::filesystem::path& path);
std::string scenario_to_json(const Scenario& scenario);

std::vector<std::string> builtin_names();
/// Throws ConfigError for unknown names.
Scenario builtin_scenario(std::string_view name);

struct ResultRow {
  std::string scenario;
  std::string scheme;
  int n = 1;
  double lambda = 1.0;
  int d = 1;
  /// Threshold in slots (Gamma, or the AoI threshold) and transmission
  /// probability, when the scheme has fixed parameters.
  std::optional<std::int64_t> gamma;
  std::optional<double> p;
  double aaoi_mean = 0.0;
  double aaoi_ci95 = 0.0;
  double lower_bound = 0.0;
  int episodes = 0;
  std::int64_t slots_per_episode = 0;
  std::uint64_t seed = 0;
  double wall_ms = 0.0;
  std::string error;
  /// Not written to the CSV.
  std::int64_t collisions = 0;
};

struct RunOptions {
  int threads = 1;
  std::optional<std::uint64_t> seed;
  bool validate_sim = false;
  /// Fills wall_ms; otherwise it stays 0 so reruns are byte-identical.
  bool timing = false;
  /// One line per finished grid point, when set.
  std::ostream* progress = nullptr;
};

/// Rows ordered by grid point (N, then lambda, then D, in config order) and
/// scheme name. Per-row failures land in the error column.
std::vector<ResultRow> run_scenario(const Scenario& scenario, const RunOptions& options);

void write_csv(std::ostream& os, const std::vector<ResultRow>& rows);

/// One tab-separated file per (D, N) named <prefix>_D<D>_N<N>.tsv: column
/// lambda, then <scheme>_mean and <scheme>_ci95 per scheme in alphabetical
/// order; nan marks missing values. Returns the written paths.
std::vector<std::filesystem::path> emit_plotdata(const std::vector<ResultRow>& rows,
                                                 const std::filesystem::path& dir,
                                                 const std::string& prefix);

}  // namespace agdsa::bench
