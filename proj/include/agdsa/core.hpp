#pragma once

// Shared vocabulary: time structure, per-device age bookkeeping, channel
// contention and the collision-free AAoI lower bound.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

namespace agdsa {

/// Raised when a value violates a documented precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// N devices, per-frame update generation probability lambda, D slots per frame.
struct NetworkConfig {
  int num_devices = 1;
  double gen_prob = 1.0;
  int frame_len = 1;

  /// Throws InvalidArgument unless N >= 1, 0 < lambda <= 1 and D >= 1.
  void validate() const;
};

/// Global slot t viewed as (frame, offset) with t = frame * D + offset.
class SlotIndex {
 public:
  SlotIndex(std::int64_t t, int frame_len);

  std::int64_t t() const noexcept { return t_; }
  std::int64_t frame() const noexcept { return t_ / frame_len_; }
  int offset() const noexcept { return static_cast<int>(t_ % frame_len_); }
  int frame_len() const noexcept { return frame_len_; }
  bool frame_start() const noexcept { return offset() == 0; }

 private:
  std::int64_t t_;
  int frame_len_;
};

/// Slot-beginning local age w and AoI h of one device.
struct DeviceState {
  std::int64_t local_age = 0;
  std::int64_t aoi = 0;

  friend bool operator==(const DeviceState&, const DeviceState&) = default;
};

/// g = h - w, the AoI drop a successful transmission would produce now.
inline std::int64_t age_gain(const DeviceState& s) noexcept { return s.aoi - s.local_age; }

/// Advances one slot. Delivery is applied first (it uses the pre-arrival
/// local age), then a frame-start arrival resets the local age.
/// Throws InvalidArgument when `arrived` is set but the next slot does not
/// start a frame.
DeviceState step_device(const DeviceState& state, bool arrived, bool delivered,
                        bool next_is_frame_start);

/// Ternary slot feedback observed by every device at slot end.
class ChannelStatus {
 public:
  enum class Kind : std::uint8_t { idle, success, collision };

  static ChannelStatus idle() noexcept { return ChannelStatus{Kind::idle, 0}; }
  static ChannelStatus success(std::size_t winner) noexcept {
    return ChannelStatus{Kind::success, winner};
  }
  static ChannelStatus collision() noexcept { return ChannelStatus{Kind::collision, 0}; }

  Kind kind() const noexcept { return kind_; }
  bool is_idle() const noexcept { return kind_ == Kind::idle; }
  bool is_success() const noexcept { return kind_ == Kind::success; }
  bool is_collision() const noexcept { return kind_ == Kind::collision; }
  /// Winning device for a success, empty otherwise.
  std::optional<std::size_t> winner() const noexcept {
    if (kind_ == Kind::success) return winner_;
    return std::nullopt;
  }

  friend bool operator==(const ChannelStatus&, const ChannelStatus&) = default;

 private:
  ChannelStatus(Kind k, std::size_t w) noexcept : kind_(k), winner_(w) {}
  Kind kind_;
  std::size_t winner_;
};

std::string to_string(ChannelStatus::Kind kind);

ChannelStatus resolve_channel(std::span<const std::size_t> transmitters) noexcept;

/// D/lambda + (1 - D)/2: the AAoI when every update is delivered the moment
/// it is generated.
double aaoi_lower_bound(const NetworkConfig& cfg);

}  // namespace agdsa
