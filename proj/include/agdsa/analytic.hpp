#pragma once

// Multi-layer Markov model of basic T-AGDSA: an external frame-boundary chain
// over (local age, age gain) indices, per-contention-level absorbing chains
// inside a frame, a binomial decoupling mixture, and a fixed point on the
// per-frame success probability beta of an active device.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "agdsa/core.hpp"
#include "agdsa/policies.hpp"

namespace agdsa::analytic {

/// Which converged fixed point a solve reports when several exist.
enum class FixedPointChoice { largest, smallest };

struct ExternalChainSpec {
  NetworkConfig cfg;
  /// Threshold in frames: gamma = ceil(Gamma / D).
  int gamma = 1;
  double tx_prob = 1.0;
  /// Rows written by the CSV dump; the solve itself is exact in l.
  int trunc_l = 256;
  /// Age-gain columns held explicitly; the columns beyond are summed in
  /// closed form.
  int trunc_k = 256;
  FixedPointChoice choice = FixedPointChoice::largest;

  void validate() const;
  static ExternalChainSpec from_params(const NetworkConfig& cfg, const AccessParams& params);
};

class TruncationError : public std::runtime_error {
 public:
  TruncationError(const std::string& what, double tail_mass)
      : std::runtime_error(what), tail_mass_(tail_mass) {}
  double tail_mass() const noexcept { return tail_mass_; }

 private:
  double tail_mass_;
};

class FixedPointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExternalTransition {
  std::int64_t l = 0;
  std::int64_t k = 0;
  double prob = 0.0;
};

/// The four outgoing branches of frame-start state (l, k); beta applies only
/// when k >= gamma. Zero-probability branches are kept.
std::vector<ExternalTransition> external_transition(std::int64_t l, std::int64_t k, double lambda,
                                                    int gamma, double beta);

/// Stationary law of the external chain for a given beta.
///
/// Row l of column k >= 1 is pi(0, k) a_k^l with a_k = (1 - lambda)(1 - beta_k),
/// so the solution is stored as row 0 plus the k = 0 column. Past trunc_k,
/// row 0 follows a fixed linear recurrence whose sums are kept in closed form.
struct SteadyState {
  double lambda = 1.0;
  double beta = 0.0;
  int gamma = 1;
  /// pi(0, k) for k in [0, trunc_k]; pi(0, 0) = 0.
  std::vector<double> row0;
  /// pi(l, 0) for l = 0, 1, ... until negligible.
  std::vector<double> col0;
  /// sum_l pi(l, k) and sum_l l pi(l, k).
  std::vector<double> col_mass;
  std::vector<double> col_moment;
  /// Mass in columns beyond trunc_k.
  double tail_mass = 0.0;
  /// sum_{k > trunc_k} pi(0, k) and sum_{k > trunc_k} k pi(0, k).
  double tail_row0_sum = 0.0;
  double tail_row0_moment = 0.0;
  /// Recurrence state at column trunc_k + 1.
  std::array<double, 4> tail_state{};

  int trunc_k() const noexcept { return static_cast<int>(row0.size()) - 1; }
  double decay(int k) const noexcept;
  double at(std::int64_t l, int k) const;
  /// Probability that a device is active at a frame start (k >= gamma).
  double active_mass() const noexcept;
};

SteadyState steady_state(const ExternalChainSpec& spec, double beta);

/// chi_s = Binomial(N - 1, q) with q the active mass.
std::vector<double> mixture_weights(const SteadyState& pi, int num_devices);

/// Row-stochastic matrix over {0, ..., s, suc}; state y counts the other
/// active devices that already succeeded in the frame.
std::vector<std::vector<double>> internal_transition_matrix(int s, double p);
/// phi_{s,nu} for nu in [0, D], started from state 0.
std::vector<std::vector<double>> internal_state_vectors(int s, double p, int frame_len);
/// Probability that the tagged device first succeeds in slot nu of the frame.
std::vector<double> slot_success_probs(int s, double p, int frame_len);

struct InternalChainSolution {
  /// alpha[s][nu].
  std::vector<std::vector<double>> alpha;
  std::vector<double> chi;
};

InternalChainSolution solve_internal(const NetworkConfig& cfg, double p);
std::vector<double> mixed_alpha(const InternalChainSolution& internal);

struct ExternalChainSolution {
  SteadyState pi;
  double beta = 0.0;
  std::vector<double> alpha;
  double tail_mass = 0.0;
  /// Distinct attracting fixed points, descending.
  std::vector<double> fixed_points_found;
  /// Evaluations of the fixed-point map.
  int iterations = 0;
};

/// Finds every fixed point of beta -> sum_nu mixed_alpha(beta) that attracts
/// the damped iteration beta <- (beta + F(beta)) / 2, by a log-grid scan of
/// F(beta) - beta on [1e-12, 1] and bracketed root refinement; beta = 0 is
/// included when the gap is already negative at 1e-12. Reports the largest
/// (default) or smallest one.
ExternalChainSolution solve_fixed_point(const ExternalChainSpec& spec);
/// Solves, then keeps the found fixed point closest to an empirical per-frame
/// success rate of an active device (e.g. from a short simulation).
ExternalChainSolution solve_nearest(const ExternalChainSpec& spec, double empirical_beta);
/// Completes a solution around a chosen fixed point (one of
/// fixed_points_found).
ExternalChainSolution solution_at(const ExternalChainSpec& spec, double beta);

struct FrameAaoiTerms {
  /// Frame-average AoI when the tagged device succeeds in slot nu.
  std::vector<double> on_success;
  double no_success = 0.0;
};

FrameAaoiTerms frame_aaoi_terms(std::int64_t l, std::int64_t k, int frame_len);

double network_aaoi(const ExternalChainSolution& solution, const ExternalChainSpec& spec);

/// Solve plus evaluate.
double analytic_aaoi(const NetworkConfig& cfg, const AccessParams& params,
                     FixedPointChoice choice = FixedPointChoice::largest);

void write_pi_csv(std::ostream& os, const SteadyState& pi, int max_l);
void write_alpha_csv(std::ostream& os, const ExternalChainSolution& solution);

}  // namespace agdsa::analytic
