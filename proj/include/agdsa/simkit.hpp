#pragma once

// Slot-level simulation engine with deterministic seeding and replication
// statistics.

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "agdsa/core.hpp"
#include "agdsa/rng.hpp"

namespace agdsa {

struct SimConfig {
  NetworkConfig net;
  std::int64_t horizon_slots = 100'000;
  std::int64_t warmup_slots = 10'000;
  int replications = 10;
  std::uint64_t base_seed = 1;
  /// When > 0, count frames that start with g >= this threshold and how many
  /// of those frames end in a delivery by that device.
  std::int64_t track_active_threshold = 0;

  void validate() const;
  /// Horizon with the default 10% warmup.
  static SimConfig with_default_warmup(const NetworkConfig& net, std::int64_t horizon,
                                       int replications, std::uint64_t seed);
};

/// Full state vector plus the exact number of devices with g >= 1. Only
/// handed to policies that declare themselves ideal.
struct OracleView {
  std::span<const DeviceState> states;
  int active_count = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string name() const = 0;
  /// Ideal (centralized) benchmarks receive OracleView each slot.
  virtual bool ideal() const noexcept { return false; }

  /// Once per slot, before any device decides.
  virtual void begin_slot(const SlotIndex& /*slot*/) {}
  virtual void begin_slot_oracle(const SlotIndex& /*slot*/, const OracleView& /*oracle*/) {}

  /// Only called for devices with g >= 1; devices with an empty buffer are
  /// silent under every scheme.
  virtual bool decide(std::size_t device, const DeviceState& own, Rng& rng) = 0;

  /// Slot-end ternary feedback.
  virtual void observe(const SlotIndex& /*slot*/, const ChannelStatus& /*status*/) {}

  /// Scheme-specific counters surfaced in results (e.g. estimator fallbacks).
  virtual std::int64_t diagnostic_count() const noexcept { return 0; }
};

using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

struct SlotCounts {
  std::int64_t idle = 0;
  std::int64_t success = 0;
  std::int64_t collision = 0;

  std::int64_t total() const noexcept { return idle + success + collision; }
  SlotCounts& operator+=(const SlotCounts& o) noexcept {
    idle += o.idle;
    success += o.success;
    collision += o.collision;
    return *this;
  }
};

/// One replication's outcome.
struct EpisodeResult {
  std::vector<double> per_device_aaoi;
  double network_aaoi = 0.0;
  SlotCounts slot_counts;
  std::int64_t active_frames = 0;
  std::int64_t active_frame_successes = 0;
  std::int64_t diagnostic_count = 0;
};

struct SimResult {
  std::vector<double> per_device_aaoi;
  double network_aaoi_mean = 0.0;
  /// +infinity when only one replication ran.
  double network_aaoi_ci95_halfwidth = std::numeric_limits<double>::infinity();
  std::vector<double> replication_aaoi;
  SlotCounts slot_counts;
  std::int64_t active_frames = 0;
  std::int64_t active_frame_successes = 0;
  std::int64_t diagnostic_count = 0;

  /// Empirical per-frame delivery probability of a device active at frame start.
  double active_frame_success_rate() const noexcept;
};

/// Seed of replication r's episode.
std::uint64_t replication_seed(std::uint64_t base_seed, int replication_index) noexcept;

EpisodeResult run_episode(const SimConfig& cfg, Policy& policy, int replication_index);

/// Runs all replications (concurrently when threads > 1) and aggregates the
/// mean and Student-t 95% half-width over replication network AAoI values.
SimResult run_experiment(const SimConfig& cfg, const PolicyFactory& factory, int threads = 1);

/// Mean and 95% Student-t half-width of a sample (+inf for size 1).
std::pair<double, double> mean_ci95(std::span<const double> values);

}  // namespace agdsa
