#pragma once

// Enhanced scheme: a shared Bayesian posterior over (local age, age gain) of
// an arbitrary device, updated from ternary feedback and the arrival law, and
// a per-slot choice of (threshold, probability) that maximizes the estimated
// network expected AoI reduction (EAR).
//
// Cells are indexed (l, k) with local age w = l*D + offset and age gain
// g = k*D; offset is shared by every cell because arrivals only happen at
// frame starts.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "agdsa/core.hpp"
#include "agdsa/policies.hpp"
#include "agdsa/rng.hpp"
#include "agdsa/simkit.hpp"

namespace agdsa::estimator {

/// Grid extents (index caps) and the pruning floor. Mass beyond a cap folds
/// into the boundary row/column.
struct GridLimits {
  int max_l = 64;
  int max_k = 64;
  /// Trailing cells of a row below this, and then empty trailing rows, are
  /// dropped after each slot; 0 disables pruning.
  double prune_below = 1e-15;

  /// Caps sized for a network: at least 64, grown with 1/lambda for local
  /// ages and with N/D for age gains.
  static GridLimits for_network(const NetworkConfig& cfg);
};

class PosteriorGrid {
 public:
  PosteriorGrid(int frame_len, GridLimits limits);

  int frame_len() const noexcept { return frame_len_; }
  int offset() const noexcept { return offset_; }
  int max_l() const noexcept { return limits_.max_l; }
  int max_k() const noexcept { return limits_.max_k; }
  const GridLimits& limits() const noexcept { return limits_; }

  /// Highest row / column that may hold mass.
  int used_l() const noexcept { return used_l_; }
  int used_k() const noexcept { return used_k_; }
  /// Cells [0, row_end(l)) of row l may hold mass.
  int row_end(int l) const noexcept { return row_end_[static_cast<std::size_t>(l)]; }

  double mass(int l, int k) const;
  /// Sets one cell and widens the support box; used to build arbitrary priors.
  void set_mass(int l, int k, double value);
  void set_offset(int offset);
  double total_mass() const noexcept;
  /// Mass of age-gain index k summed over l.
  std::vector<double> gain_marginal() const;

  /// Dense dump, header "l,k,mass".
  void write_csv(std::ostream& os) const;

  // Raw row access for the update kernels.
  double* row(int l) noexcept { return data_.data() + static_cast<std::size_t>(l) * stride_; }
  const double* row(int l) const noexcept {
    return data_.data() + static_cast<std::size_t>(l) * stride_;
  }
  void widen_row(int l, int end) noexcept;
  void advance_offset() noexcept;
  void prune();

 private:
  int frame_len_;
  GridLimits limits_;
  std::size_t stride_;
  int offset_ = 0;
  int used_l_ = 0;
  int used_k_ = 0;
  std::vector<int> row_end_;
  std::vector<double> data_;
};

/// Threshold value meaning "no device is active"; used by the sentinel selection.
inline constexpr std::int64_t kNeverActive = std::numeric_limits<std::int64_t>::max() / 4;

struct EarSelection {
  AccessParams params{kNeverActive, 1.0};
  double active_prob = 0.0;
  double est_ear = -1.0;
  std::vector<double> active_pmf{1.0};
  /// True when no candidate threshold has positive active mass.
  bool silent = true;
  /// Local maxima of the EAR profile over candidate thresholds.
  int local_maxima = 0;
};

PosteriorGrid init_posterior(const NetworkConfig& cfg, GridLimits limits);
PosteriorGrid init_posterior(const NetworkConfig& cfg);

/// rho: posterior mass of cells with g >= threshold.
double active_prob(const PosteriorGrid& grid, std::int64_t threshold);
/// Binomial(N-1, rho) pmf of the number of other active devices.
std::vector<double> active_count_pmf(double rho, int num_devices);
/// sum_u xi_u (1-p)^u.
double success_prob(std::span<const double> xi, double p);
double estimate_ear(const PosteriorGrid& grid, std::int64_t threshold, double p,
                    std::span<const double> xi);
/// min{1/(N rho), 1}, the maximizer of p (1 - rho p)^(N-1).
double approx_popt(double rho, int num_devices);
/// Scans thresholds D, 2D, ..., used_k*D with positive active mass; ties go
/// to the larger threshold (identical active set).
EarSelection choose_params(const PosteriorGrid& grid, const NetworkConfig& cfg);

/// Per-observation likelihoods of the tagged device's slot, split by whether
/// it is active (g >= threshold).
struct ObservationLikelihoods {
  double idle_active = 0.0;
  double idle_inactive = 0.0;
  double other_success_active = 0.0;
  double other_success_inactive = 0.0;
  double self_success_active = 0.0;
  double collision_active = 0.0;
  double collision_inactive = 0.0;

  static ObservationLikelihoods compute(std::span<const double> xi, double p);
};

struct TransitionEntry {
  std::int64_t local_age = 0;
  std::int64_t age_gain = 0;
  double likelihood = 0.0;
};

/// Nonzero rows of Pr(w', g', c | w, g) for one observation.
std::vector<TransitionEntry> transition_likelihood(std::int64_t w, std::int64_t g,
                                                   std::int64_t threshold, double p,
                                                   std::span<const double> xi,
                                                   const ChannelStatus& observed);

/// Conditions on the observed status and advances the offset (crossing into
/// the next row at a frame end). Returns false when the observation had zero
/// likelihood; the grid then receives the unconditioned predictive update.
bool bayes_update(PosteriorGrid& grid, const EarSelection& selection, const ChannelStatus& observed);

/// Frame-start arrivals: lambda of each cell (l, k) moves to (0, l + k).
/// Requires offset 0.
void frame_boundary_update(PosteriorGrid& grid, double lambda);

bool enhanced_decide(const DeviceState& own, const EarSelection& selection, Rng& rng);

/// Per-episode estimator state machine. Every device would compute the same
/// values from the same global feedback, so one instance serves all devices.
class SharedEstimator {
 public:
  explicit SharedEstimator(const NetworkConfig& cfg);
  SharedEstimator(const NetworkConfig& cfg, GridLimits limits);

  /// Selection for the current slot.
  const EarSelection& begin_slot();
  /// Bayes update, plus the arrival update when the next slot starts a frame.
  void end_slot(const ChannelStatus& observed);

  const PosteriorGrid& grid() const noexcept { return grid_; }
  const EarSelection& selection() const noexcept { return selection_; }
  std::int64_t slot() const noexcept { return slot_; }
  std::int64_t zero_likelihood_events() const noexcept { return zero_likelihood_; }
  std::int64_t multimodal_slots() const noexcept { return multimodal_; }

 private:
  NetworkConfig cfg_;
  PosteriorGrid grid_;
  EarSelection selection_;
  std::int64_t slot_ = 0;
  std::int64_t zero_likelihood_ = 0;
  std::int64_t multimodal_ = 0;
};

class EnhancedPolicy final : public Policy {
 public:
  explicit EnhancedPolicy(const NetworkConfig& cfg) : estimator_(cfg) {}
  EnhancedPolicy(const NetworkConfig& cfg, GridLimits limits) : estimator_(cfg, limits) {}

  std::string name() const override { return "enhanced"; }
  void begin_slot(const SlotIndex& slot) override;
  bool decide(std::size_t, const DeviceState& own, Rng& rng) override {
    return enhanced_decide(own, *current_, rng);
  }
  void observe(const SlotIndex&, const ChannelStatus& status) override {
    estimator_.end_slot(status);
  }
  std::int64_t diagnostic_count() const noexcept override {
    return estimator_.zero_likelihood_events();
  }
  const SharedEstimator& estimator() const noexcept { return estimator_; }

 private:
  SharedEstimator estimator_;
  const EarSelection* current_ = nullptr;
};

}  // namespace agdsa::estimator
