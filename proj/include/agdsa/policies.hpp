#pragma once

// Fixed-parameter threshold ALOHA and the benchmark schemes.

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "agdsa/core.hpp"
#include "agdsa/rng.hpp"
#include "agdsa/simkit.hpp"

namespace agdsa {

/// Per-slot access parameters: age-gain threshold (slots) and transmission
/// probability.
struct AccessParams {
  std::int64_t threshold = 1;
  double tx_prob = 1.0;

  void validate() const;
};

/// Fixed parameters of the basic scheme.
struct BasicParams : AccessParams {
  BasicParams() = default;
  BasicParams(std::int64_t threshold_, double tx_prob_) : AccessParams{threshold_, tx_prob_} {}
};

bool basic_decide(const DeviceState& state, const BasicParams& params, Rng& rng);
bool aloha_gamma1_decide(const DeviceState& state, double p, Rng& rng);
/// Threshold on the AoI h rather than the age gain; still requires g >= 1.
bool aoi_threshold_decide(const DeviceState& state, std::int64_t aoi_threshold, double p, Rng& rng);
/// p = 1/max(n_t, 1) for any device with g >= 1.
bool ideal_adaptive_decide(const DeviceState& state, int oracle_active_count, Rng& rng);
/// Lowest-index device with maximal g among those with g >= 1.
std::optional<std::size_t> ideal_schedule_pick(std::span<const DeviceState> states) noexcept;

class BasicPolicy final : public Policy {
 public:
  explicit BasicPolicy(BasicParams params);
  std::string name() const override { return "basic"; }
  bool decide(std::size_t, const DeviceState& own, Rng& rng) override {
    return basic_decide(own, params_, rng);
  }
  const BasicParams& params() const noexcept { return params_; }

 private:
  BasicParams params_;
};

class AlohaGamma1Policy final : public Policy {
 public:
  explicit AlohaGamma1Policy(double p);
  std::string name() const override { return "aloha-gamma1"; }
  bool decide(std::size_t, const DeviceState& own, Rng& rng) override {
    return aloha_gamma1_decide(own, p_, rng);
  }

 private:
  double p_;
};

class AoiThresholdPolicy final : public Policy {
 public:
  AoiThresholdPolicy(std::int64_t aoi_threshold, double p);
  std::string name() const override { return "aoi-threshold"; }
  bool decide(std::size_t, const DeviceState& own, Rng& rng) override {
    return aoi_threshold_decide(own, threshold_, p_, rng);
  }

 private:
  std::int64_t threshold_;
  double p_;
};

class IdealAdaptivePolicy final : public Policy {
 public:
  std::string name() const override { return "ideal-adaptive"; }
  bool ideal() const noexcept override { return true; }
  void begin_slot_oracle(const SlotIndex&, const OracleView& oracle) override {
    active_count_ = oracle.active_count;
  }
  bool decide(std::size_t, const DeviceState& own, Rng& rng) override {
    return ideal_adaptive_decide(own, active_count_, rng);
  }

 private:
  int active_count_ = 0;
};

class IdealSchedulingPolicy final : public Policy {
 public:
  std::string name() const override { return "ideal-scheduling"; }
  bool ideal() const noexcept override { return true; }
  void begin_slot_oracle(const SlotIndex&, const OracleView& oracle) override {
    pick_ = ideal_schedule_pick(oracle.states);
  }
  bool decide(std::size_t device, const DeviceState&, Rng&) override {
    return pick_ && *pick_ == device;
  }

 private:
  std::optional<std::size_t> pick_;
};

/// Never transmits.
class SilentPolicy final : public Policy {
 public:
  std::string name() const override { return "silent"; }
  bool decide(std::size_t, const DeviceState&, Rng&) override { return false; }
};

}  // namespace agdsa
