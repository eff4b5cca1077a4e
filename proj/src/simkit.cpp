#include "agdsa/simkit.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <cmath>
#include <numeric>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

namespace agdsa {

namespace {
constexpr std::uint64_t kPolicyStreamTag = 0x706f6c6963790001ULL;
constexpr std::uint64_t kArrivalStreamTag = 0x6172726976616c00ULL;
}  // namespace

void SimConfig::validate() const {
  net.validate();
  if (horizon_slots < 1) throw InvalidArgument("horizon_slots must be positive");
  if (warmup_slots < 0 || warmup_slots >= horizon_slots)
    throw InvalidArgument("warmup_slots must lie in [0, horizon_slots)");
  if (replications < 1) throw InvalidArgument("replications must be >= 1");
  if (track_active_threshold < 0) throw InvalidArgument("track_active_threshold must be >= 0");
}

SimConfig SimConfig::with_default_warmup(const NetworkConfig& net, std::int64_t horizon,
                                         int replications, std::uint64_t seed) {
  SimConfig cfg;
  cfg.net = net;
  cfg.horizon_slots = horizon;
  cfg.warmup_slots = horizon / 10;
  cfg.replications = replications;
  cfg.base_seed = seed;
  return cfg;
}

double SimResult::active_frame_success_rate() const noexcept {
  if (active_frames == 0) return 0.0;
  return static_cast<double>(active_frame_successes) / static_cast<double>(active_frames);
}

std::uint64_t replication_seed(std::uint64_t base_seed, int replication_index) noexcept {
  return derive_seed(base_seed, static_cast<std::uint64_t>(replication_index));
}

EpisodeResult run_episode(const SimConfig& cfg, Policy& policy, int replication_index) {
  cfg.validate();
  const auto n_dev = static_cast<std::size_t>(cfg.net.num_devices);
  const int frame_len = cfg.net.frame_len;
  const double lambda = cfg.net.gen_prob;
  const std::uint64_t episode_seed = replication_seed(cfg.base_seed, replication_index);

  std::vector<CounterStream> arrivals;
  arrivals.reserve(n_dev);
  for (std::size_t n = 0; n < n_dev; ++n)
    arrivals.emplace_back(derive_seed(episode_seed ^ kArrivalStreamTag, n));
  Rng rng(derive_seed(episode_seed, kPolicyStreamTag));

  std::vector<DeviceState> states(n_dev);
  std::vector<std::int64_t> aoi_sums(n_dev, 0);
  std::vector<char> active_in_frame(n_dev, 0);
  std::vector<std::size_t> transmitters;
  transmitters.reserve(n_dev);

  EpisodeResult out;
  const bool ideal = policy.ideal();
  const bool track = cfg.track_active_threshold > 0;

  for (std::int64_t t = 0; t < cfg.horizon_slots; ++t) {
    const SlotIndex slot(t, frame_len);
    const bool measured = t >= cfg.warmup_slots;
    if (measured) {
      for (std::size_t n = 0; n < n_dev; ++n) aoi_sums[n] += states[n].aoi;
    }
    if (track && measured && slot.frame_start()) {
      for (std::size_t n = 0; n < n_dev; ++n) {
        active_in_frame[n] = age_gain(states[n]) >= cfg.track_active_threshold;
        out.active_frames += active_in_frame[n];
      }
    }

    if (ideal) {
      OracleView view{states, 0};
      view.active_count = static_cast<int>(std::count_if(
          states.begin(), states.end(), [](const DeviceState& s) { return age_gain(s) >= 1; }));
      policy.begin_slot_oracle(slot, view);
    } else {
      policy.begin_slot(slot);
    }

    transmitters.clear();
    for (std::size_t n = 0; n < n_dev; ++n) {
      if (age_gain(states[n]) >= 1 && policy.decide(n, states[n], rng)) transmitters.push_back(n);
    }
    const ChannelStatus status = resolve_channel(transmitters);
    if (measured) {
      switch (status.kind()) {
        case ChannelStatus::Kind::idle: ++out.slot_counts.idle; break;
        case ChannelStatus::Kind::success: ++out.slot_counts.success; break;
        case ChannelStatus::Kind::collision: ++out.slot_counts.collision; break;
      }
    }
    policy.observe(slot, status);

    const auto winner = status.winner();
    if (track && measured && winner && active_in_frame[*winner]) {
      ++out.active_frame_successes;
      active_in_frame[*winner] = 0;
    }

    const bool next_frame_start = (t + 1) % frame_len == 0;
    const auto next_frame = static_cast<std::uint64_t>((t + 1) / frame_len);
    for (std::size_t n = 0; n < n_dev; ++n) {
      const bool arrived = next_frame_start && arrivals[n].uniform(next_frame) < lambda;
      const bool delivered = winner && *winner == n;
      states[n] = step_device(states[n], arrived, delivered, next_frame_start);
    }
  }

  const auto measured_slots = static_cast<double>(cfg.horizon_slots - cfg.warmup_slots);
  out.per_device_aaoi.resize(n_dev);
  for (std::size_t n = 0; n < n_dev; ++n)
    out.per_device_aaoi[n] = static_cast<double>(aoi_sums[n]) / measured_slots;
  out.network_aaoi = std::accumulate(out.per_device_aaoi.begin(), out.per_device_aaoi.end(), 0.0) /
                     static_cast<double>(n_dev);
  out.diagnostic_count = policy.diagnostic_count();
  return out;
}

std::pair<double, double> mean_ci95(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("mean_ci95 needs at least one value");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() == 1) return {mean, std::numeric_limits<double>::infinity()};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  const double tq = boost::math::quantile(boost::math::complement(dist, 0.025));
  return {mean, tq * sd / std::sqrt(n)};
}

SimResult run_experiment(const SimConfig& cfg, const PolicyFactory& factory, int threads) {
  cfg.validate();
  std::vector<EpisodeResult> episodes(static_cast<std::size_t>(cfg.replications));

  auto run_one = [&](int r) {
    auto policy = factory();
    episodes[static_cast<std::size_t>(r)] = run_episode(cfg, *policy, r);
  };
  const int workers = std::clamp(threads, 1, cfg.replications);
  if (workers == 1) {
    for (int r = 0; r < cfg.replications; ++r) run_one(r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int r = next++; r < cfg.replications; r = next++) {
          try {
            run_one(r);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  SimResult res;
  const auto n_dev = static_cast<std::size_t>(cfg.net.num_devices);
  res.per_device_aaoi.assign(n_dev, 0.0);
  for (const auto& ep : episodes) {
    for (std::size_t n = 0; n < n_dev; ++n) res.per_device_aaoi[n] += ep.per_device_aaoi[n];
    res.replication_aaoi.push_back(ep.network_aaoi);
    res.slot_counts += ep.slot_counts;
    res.active_frames += ep.active_frames;
    res.active_frame_successes += ep.active_frame_successes;
    res.diagnostic_count += ep.diagnostic_count;
  }
  for (auto& v : res.per_device_aaoi) v /= static_cast<double>(episodes.size());
  const auto [mean, half] = mean_ci95(res.replication_aaoi);
  res.network_aaoi_mean = mean;
  res.network_aaoi_ci95_halfwidth = half;
  return res;
}

}  // namespace agdsa
