#include "agdsa/policies.hpp"

#include <algorithm>

namespace agdsa {

void AccessParams::validate() const {
  if (threshold < 1) throw InvalidArgument("threshold must be >= 1");
  if (!(tx_prob > 0.0 && tx_prob <= 1.0)) throw InvalidArgument("tx_prob must lie in (0, 1]");
}

bool basic_decide(const DeviceState& state, const BasicParams& params, Rng& rng) {
  if (age_gain(state) < params.threshold) return false;
  return rng.bernoulli(params.tx_prob);
}

bool aloha_gamma1_decide(const DeviceState& state, double p, Rng& rng) {
  return basic_decide(state, BasicParams{1, p}, rng);
}

bool aoi_threshold_decide(const DeviceState& state, std::int64_t aoi_threshold, double p,
                          Rng& rng) {
  if (state.aoi < aoi_threshold || age_gain(state) < 1) return false;
  return rng.bernoulli(p);
}

bool ideal_adaptive_decide(const DeviceState& state, int oracle_active_count, Rng& rng) {
  if (age_gain(state) < 1) return false;
  return rng.bernoulli(1.0 / static_cast<double>(std::max(oracle_active_count, 1)));
}

std::optional<std::size_t> ideal_schedule_pick(std::span<const DeviceState> states) noexcept {
  std::optional<std::size_t> best;
  std::int64_t best_gain = 0;
  for (std::size_t n = 0; n < states.size(); ++n) {
    const auto g = age_gain(states[n]);
    if (g >= 1 && g > best_gain) {
      best = n;
      best_gain = g;
    }
  }
  return best;
}

BasicPolicy::BasicPolicy(BasicParams params) : params_(params) { params_.validate(); }

AlohaGamma1Policy::AlohaGamma1Policy(double p) : p_(p) { AccessParams{1, p}.validate(); }

AoiThresholdPolicy::AoiThresholdPolicy(std::int64_t aoi_threshold, double p)
    : threshold_(aoi_threshold), p_(p) {
  AccessParams{aoi_threshold, p}.validate();
}

}  // namespace agdsa
