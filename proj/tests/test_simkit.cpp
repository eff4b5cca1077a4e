#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "agdsa/policies.hpp"
#include "agdsa/simkit.hpp"
#include "oracles.hpp"

using namespace agdsa;

namespace {

PolicyFactory basic(std::int64_t threshold, double p) {
  return [=] { return std::make_unique<BasicPolicy>(BasicParams{threshold, p}); };
}

SimConfig sim(NetworkConfig net, std::int64_t horizon, int reps, std::uint64_t seed = 11) {
  return SimConfig::with_default_warmup(net, horizon, reps, seed);
}

}  // namespace

TEST_CASE("single device, lambda=1, D=1 gives AoI 1") {
  const auto r = run_experiment(sim({1, 1.0, 1}, 5000, 3), basic(1, 1.0));
  CHECK(r.network_aaoi_mean == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.slot_counts.collision == 0);
}

TEST_CASE("single device, lambda=1, D=2 alternates 2,1") {
  const auto r = run_experiment(sim({1, 1.0, 2}, 5000, 2), basic(1, 1.0));
  CHECK(r.network_aaoi_mean == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(r.network_aaoi_mean == doctest::Approx(aaoi_lower_bound({1, 1.0, 2})));
}

TEST_CASE("silent policy grows deterministically") {
  SimConfig cfg = sim({3, 1.0, 1}, 2000, 10);
  const auto r = run_experiment(cfg, [] { return std::make_unique<SilentPolicy>(); });
  // h_t = t, averaged over [warmup, horizon)
  const double expected = (cfg.warmup_slots + cfg.horizon_slots - 1) / 2.0;
  CHECK(r.network_aaoi_mean == doctest::Approx(expected).epsilon(1e-12));
  CHECK(r.network_aaoi_ci95_halfwidth == doctest::Approx(0.0));
  CHECK(r.slot_counts.idle == r.slot_counts.total());
}

TEST_CASE("one replication reports an infinite half-width") {
  const auto r = run_experiment(sim({2, 0.5, 1}, 2000, 1), basic(1, 0.5));
  CHECK(std::isinf(r.network_aaoi_ci95_halfwidth));
  const std::vector<double> one{3.0};
  CHECK(std::isinf(mean_ci95(one).second));
}

TEST_CASE("mean_ci95 against a hand-computed t interval") {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  const auto [mean, half] = mean_ci95(xs);
  CHECK(mean == doctest::Approx(2.5));
  // s = sqrt(5/3), t_{0.975,3} = 3.182446305284263
  CHECK(half == doctest::Approx(3.182446305284263 * std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-9));
}

TEST_CASE("identical configuration and seed give identical results") {
  const SimConfig cfg = sim({6, 0.4, 3}, 20000, 3, 99);
  const auto a = run_experiment(cfg, basic(3, 0.3));
  const auto b = run_experiment(cfg, basic(3, 0.3), 2);
  CHECK(a.replication_aaoi == b.replication_aaoi);
  CHECK(a.per_device_aaoi == b.per_device_aaoi);
  CHECK(a.slot_counts.success == b.slot_counts.success);
  const auto c = run_experiment(sim({6, 0.4, 3}, 20000, 3, 100), basic(3, 0.3));
  CHECK(c.replication_aaoi != a.replication_aaoi);
}

TEST_CASE("replication seeds are distinct") {
  std::vector<std::uint64_t> seeds;
  for (int r = 0; r < 64; ++r) seeds.push_back(replication_seed(5, r));
  std::sort(seeds.begin(), seeds.end());
  CHECK(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());
}

TEST_CASE("warmup only drops leading terms") {
  // Same seed and horizon, two warmups: sums over the common tail agree.
  SimConfig a = sim({3, 0.5, 2}, 10000, 1, 3);
  SimConfig b = a;
  a.warmup_slots = 1000;
  b.warmup_slots = 4000;
  BasicPolicy pa(BasicParams{2, 0.4}), pb(BasicParams{2, 0.4});
  const auto ea = run_episode(a, pa, 0);
  const auto eb = run_episode(b, pb, 0);
  // Full trajectory is shared; recover the sum of slots [1000, 4000) from both.
  SimConfig c = a;
  c.warmup_slots = 0;
  c.horizon_slots = 4000;
  BasicPolicy pc(BasicParams{2, 0.4});
  const auto ec = run_episode(c, pc, 0);
  SimConfig d = c;
  d.horizon_slots = 1000;
  BasicPolicy pd(BasicParams{2, 0.4});
  const auto ed = run_episode(d, pd, 0);
  const double head = ec.network_aaoi * 4000 - ed.network_aaoi * 1000;
  CHECK(ea.network_aaoi * 9000 == doctest::Approx(head + eb.network_aaoi * 6000).epsilon(1e-9));
}

TEST_CASE("property: simulated AAoI respects the lower bound") {
  for (NetworkConfig net : {NetworkConfig{4, 0.3, 1}, NetworkConfig{4, 0.3, 5}, NetworkConfig{8, 1.0, 2}}) {
    for (double p : {0.1, 0.4, 1.0}) {
      const auto r = run_experiment(sim(net, 20000, 4), basic(net.frame_len, p));
      CHECK(r.network_aaoi_mean >= aaoi_lower_bound(net) - 3.0 * r.network_aaoi_ci95_halfwidth);
      CHECK(r.slot_counts.total() == 4 * 18000);
    }
  }
}

TEST_CASE("two-device basic ALOHA matches the joint-chain oracle") {
  const double exact = oracle::two_device_basic_aaoi(1, 0.5);
  const auto r = run_experiment(sim({2, 1.0, 1}, 200000, 10, 5), basic(1, 0.5));
  CHECK(std::abs(r.network_aaoi_mean - exact) <= 2.0 * r.network_aaoi_ci95_halfwidth);
}

TEST_CASE("oracle sanity: two devices, p=1 never deliver") {
  // both always collide, so the capped chain piles up at the cap
  CHECK(oracle::two_device_basic_aaoi(1, 1.0, 40) == doctest::Approx(40.0));
}
