#include "agdsa/core.hpp"

namespace agdsa {

void NetworkConfig::validate() const {
  if (num_devices < 1) throw InvalidArgument("num_devices must be >= 1");
  if (!(gen_prob > 0.0 && gen_prob <= 1.0)) throw InvalidArgument("gen_prob must lie in (0, 1]");
  if (frame_len < 1) throw InvalidArgument("frame_len must be >= 1");
}

SlotIndex::SlotIndex(std::int64_t t, int frame_len) : t_(t), frame_len_(frame_len) {
  if (t < 0) throw InvalidArgument("slot index must be nonnegative");
  if (frame_len < 1) throw InvalidArgument("frame_len must be >= 1");
}

DeviceState step_device(const DeviceState& state, bool arrived, bool delivered,
                        bool next_is_frame_start) {
  if (arrived && !next_is_frame_start)
    throw InvalidArgument("updates can only arrive at the beginning of a frame");
  DeviceState next;
  next.aoi = delivered ? state.local_age + 1 : state.aoi + 1;
  next.local_age = arrived ? 0 : state.local_age + 1;
  return next;
}

std::string to_string(ChannelStatus::Kind kind) {
  switch (kind) {
    case ChannelStatus::Kind::idle: return "idle";
    case ChannelStatus::Kind::success: return "success";
    case ChannelStatus::Kind::collision: return "collision";
  }
  return "unknown";
}

ChannelStatus resolve_channel(std::span<const std::size_t> transmitters) noexcept {
  if (transmitters.empty()) return ChannelStatus::idle();
  if (transmitters.size() == 1) return ChannelStatus::success(transmitters.front());
  return ChannelStatus::collision();
}

double aaoi_lower_bound(const NetworkConfig& cfg) {
  cfg.validate();
  const double d = cfg.frame_len;
  return d / cfg.gen_prob + (1.0 - d) / 2.0;
}

}  // namespace agdsa
