#pragma once

// Offline tuning of the basic scheme's (Gamma, p): a scan over gamma = Gamma/D
// with a golden-section search on p inside each gamma.

#include <cstdint>
#include <vector>

#include "agdsa/analytic.hpp"
#include "agdsa/core.hpp"
#include "agdsa/simkit.hpp"

namespace agdsa::search {

enum class Objective { analytic, simulation };

struct SearchSpec {
  NetworkConfig cfg;
  Objective objective = Objective::analytic;
  int gamma_min = 1;
  /// 0 means no upper bound other than the patience rule.
  int gamma_max = 0;
  double p_tolerance = 1e-3;
  /// Maximum objective evaluations.
  int budget = 20000;
  /// Stop after this many consecutive gammas without improvement.
  int patience = 5;
  /// Runs a Hooke-Jeeves pass on (gamma, p) after the scan.
  bool hooke_jeeves = false;
  /// Horizon, replications and seed for the simulation objective; its net
  /// field is overwritten by cfg. The fixed seed gives common random numbers.
  SimConfig sim;
  int threads = 1;
  /// Fixed point scored by the analytic objective. The smallest beta makes
  /// bistable parameter points score as their collapsed state.
  analytic::FixedPointChoice fixed_point = analytic::FixedPointChoice::smallest;

  /// Analytic objective only: checks the optimum against a short simulation
  /// and, while they disagree by more than validation_tolerance (relative),
  /// caps p below the rejected value and searches again.
  bool validate_sim = true;
  double validation_tolerance = 0.035;
  std::int64_t validation_slots = 500'000;
  int validation_replications = 3;
  std::uint64_t validation_seed = 0x76616c6964ULL;
  double p_cap_shrink = 0.9;
  int max_validation_rounds = 30;

  void validate() const;
};

struct Evaluation {
  int gamma = 1;
  double p = 1.0;
  /// +inf when the model has no usable solution at this point.
  double aaoi = 0.0;
};

struct PResult {
  double p = 1.0;
  double aaoi = 0.0;
};

struct ValidationRound {
  double p_cap = 1.0;
  int gamma = 1;
  double p = 1.0;
  double analytic_aaoi = 0.0;
  double sim_aaoi = 0.0;
};

struct SearchResult {
  int gamma = 1;
  std::int64_t threshold = 1;
  double p = 1.0;
  double aaoi = 0.0;
  bool budget_exhausted = false;
  /// True when the reported point passed the simulation check.
  bool validated = false;
  double p_cap = 1.0;
  std::vector<ValidationRound> rounds;
  /// Distinct objective evaluations in order.
  std::vector<Evaluation> log;
};

/// Objective value at (gamma, p); +inf where the analytic model fails
/// (truncation or fixed-point failure).
double evaluate(const SearchSpec& spec, int gamma, double p);

/// Best p in (0, p_cap] for one gamma: a 25-point log grid on
/// [p_tolerance, 1] brackets the minimum, golden section refines it.
PResult optimize_p_given_gamma(const SearchSpec& spec, int gamma, double p_cap = 1.0);
SearchResult optimize_basic(const SearchSpec& spec);

}  // namespace agdsa::search
