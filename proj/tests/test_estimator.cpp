#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "agdsa/estimator.hpp"
#include "agdsa/numeric.hpp"
#include "oracles.hpp"
#include "posterior_check.hpp"

using namespace agdsa;
using namespace agdsa::estimator;

namespace {

GridLimits small_limits() { return GridLimits{32, 32, 0.0}; }

EarSelection selection_for(double rho, int n, std::int64_t threshold, double p) {
  EarSelection s;
  s.silent = false;
  s.params = {threshold, p};
  s.active_prob = rho;
  s.active_pmf = active_count_pmf(rho, n);
  return s;
}

PosteriorGrid random_grid(std::mt19937_64& gen, int frame_len, int rows, int cols) {
  PosteriorGrid grid(frame_len, small_limits());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(static_cast<std::size_t>(rows * cols));
  double total = 0.0;
  for (double& x : w) total += (x = u(gen) < 0.4 ? 0.0 : u(gen));
  if (total == 0.0) {
    w[1] = 1.0;
    total = 1.0;
  }
  for (int l = 0; l < rows; ++l)
    for (int k = 0; k < cols; ++k) grid.set_mass(l, k, w[static_cast<std::size_t>(l * cols + k)] / total);
  return grid;
}

ChannelStatus random_status(std::mt19937_64& gen) {
  switch (gen() % 3) {
    case 0: return ChannelStatus::idle();
    case 1: return ChannelStatus::success(0);
    default: return ChannelStatus::collision();
  }
}

}  // namespace

TEST_CASE("init_posterior") {
  const auto grid = init_posterior({5, 0.3, 4});
  CHECK(grid.mass(0, 0) == 1.0);
  CHECK(grid.total_mass() == 1.0);
  CHECK(grid.offset() == 0);
  for (int l = 0; l < 4; ++l)
    for (int k = 0; k < 4; ++k)
      if (l + k > 0) CHECK(grid.mass(l, k) == 0.0);
  CHECK(active_prob(grid, 1) == 0.0);
  CHECK(active_prob(grid, 40) == 0.0);
}

TEST_CASE("active_prob") {
  const int d = 3;
  PosteriorGrid a(d, small_limits());
  a.set_mass(0, 0, 0.5);
  a.set_mass(2, 1, 0.5);
  CHECK(active_prob(a, 1) == doctest::Approx(0.5));
  PosteriorGrid b(d, small_limits());
  b.set_mass(0, 0, 0.5);
  b.set_mass(0, 1, 0.3);
  b.set_mass(1, 2, 0.2);
  CHECK(active_prob(b, 2 * d) == doctest::Approx(0.2));
  CHECK(active_prob(b, d + 1) == doctest::Approx(0.2));
  CHECK(active_prob(b, d) == doctest::Approx(0.5));
}

TEST_CASE("active_count_pmf") {
  const auto xi = active_count_pmf(0.5, 3);
  REQUIRE(xi.size() == 3);
  CHECK(xi[0] == doctest::Approx(0.25));
  CHECK(xi[1] == doctest::Approx(0.5));
  CHECK(xi[2] == doctest::Approx(0.25));
  const auto zero = active_count_pmf(0.0, 6);
  CHECK(zero[0] == 1.0);
  for (std::size_t u = 1; u < zero.size(); ++u) CHECK(zero[u] == 0.0);
  const auto ten = active_count_pmf(0.3, 10);
  const auto brute = oracle::enumerate_active_pmf(10, 0.3);
  REQUIRE(ten.size() == brute.size());
  for (std::size_t u = 0; u < ten.size(); ++u) CHECK(ten[u] == doctest::Approx(brute[u]).epsilon(1e-12));
}

TEST_CASE("success_prob") {
  const std::vector<double> xi{0.25, 0.5, 0.25};
  CHECK(success_prob(xi, 0.5) == doctest::Approx(0.5625));
  CHECK(success_prob(xi, 0.0) == doctest::Approx(1.0));
  const std::vector<double> point{1.0, 0.0, 0.0, 0.0};
  for (double p : {0.1, 0.7, 1.0}) CHECK(success_prob(point, p) == doctest::Approx(1.0));
}

TEST_CASE("estimate_ear") {
  PosteriorGrid grid(1, small_limits());
  grid.set_mass(0, 0, 0.5);
  grid.set_mass(0, 2, 0.5);
  const auto xi = active_count_pmf(active_prob(grid, 1), 2);
  CHECK(estimate_ear(grid, 1, 0.5, xi) == doctest::Approx(-0.625));
  CHECK(estimate_ear(grid, 3, 0.5, xi) == doctest::Approx(-1.0));
  const double tiny = estimate_ear(grid, 1, 1e-9, xi);
  CHECK(tiny > -1.0);
  CHECK(tiny == doctest::Approx(-1.0));
}

TEST_CASE("approx_popt") {
  CHECK(approx_popt(0.5, 10) == doctest::Approx(0.2));
  CHECK(approx_popt(0.05, 10) == 1.0);
  CHECK(approx_popt(0.0, 10) == 1.0);
  CHECK(std::abs(approx_popt(0.4, 7) - oracle::literal_popt(0.4, 7)) <= 1e-12);
}

TEST_CASE("property: closed-form popt equals the literal sum") {
  for (int n : {1, 2, 3, 7, 20, 60}) {
    for (double rho : {1e-4, 0.01, 0.1, 0.3, 0.5, 0.9, 1.0}) {
      CHECK(std::abs(approx_popt(rho, n) - oracle::literal_popt(rho, n)) <= 1e-12);
    }
  }
}

TEST_CASE("property: popt maximizes the single-threshold EAR") {
  for (int n : {2, 5, 30}) {
    for (double rho : {0.05, 0.3, 0.8}) {
      const double p0 = approx_popt(rho, n);
      auto f = [&](double p) { return p * std::pow(1.0 - rho * p, n - 1); };
      for (int i = 1; i <= 1000; ++i) CHECK(f(i / 1000.0) <= f(p0) + 1e-15);
    }
  }
}

TEST_CASE("choose_params on the initial grid is silent") {
  const NetworkConfig cfg{5, 0.5, 2};
  const auto sel = choose_params(init_posterior(cfg), cfg);
  CHECK(sel.silent);
  CHECK(sel.est_ear == -1.0);
  Rng rng(1);
  CHECK_FALSE(enhanced_decide({0, 40}, sel, rng));
}

TEST_CASE("choose_params picks the only positive-gain shelf") {
  const NetworkConfig cfg{50, 0.5, 2};
  PosteriorGrid grid(2, small_limits());
  grid.set_mass(0, 0, 0.9);
  grid.set_mass(3, 5, 0.1);
  const auto sel = choose_params(grid, cfg);
  CHECK_FALSE(sel.silent);
  CHECK(sel.params.threshold == 10);
  CHECK(sel.active_prob == doctest::Approx(0.1));
  CHECK(sel.params.tx_prob == doctest::Approx(0.2));
}

TEST_CASE("property: choose_params never picks an empty threshold while gain mass exists") {
  const NetworkConfig cfg{20, 0.01, 3};
  for (double tail : {1e-3, 1e-8, 1e-14}) {
    PosteriorGrid grid(3, small_limits());
    grid.set_mass(7, 0, 1.0 - tail);
    grid.set_mass(0, 4, tail);
    const auto sel = choose_params(grid, cfg);
    CHECK_FALSE(sel.silent);
    CHECK(active_prob(grid, sel.params.threshold) > 0.0);
  }
}

TEST_CASE("choose_params agrees with an exhaustive scan on random grids") {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const int d = 1 + trial % 3;
    const int n = 2 + trial % 6;
    const NetworkConfig cfg{n, 0.5, d};
    const auto grid = random_grid(gen, d, 8, 8);
    std::vector<std::vector<double>> mass(8, std::vector<double>(8));
    for (int l = 0; l < 8; ++l)
      for (int k = 0; k < 8; ++k) mass[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)] = grid.mass(l, k);

    // grid oracle over (Gamma, p) with 1000 p values
    double grid_best = -1.0;
    double exact_best = -1.0;
    int exact_index = 0;
    for (int k = 1; k < 8; ++k) {
      double rho = 0.0;
      for (int l = 0; l < 8; ++l)
        for (int j = k; j < 8; ++j) rho += mass[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)];
      if (!(rho > 0.0)) continue;
      for (int i = 1; i <= 1000; ++i) grid_best = std::max(grid_best, oracle::literal_ear(mass, d, n, k, i / 1000.0));
      const double e = oracle::literal_ear(mass, d, n, k, oracle::literal_popt(rho, n));
      if (e >= exact_best - 1e-12) {
        exact_best = e;
        exact_index = k;
      }
    }
    const auto sel = choose_params(grid, cfg);
    REQUIRE_FALSE(sel.silent);
    CHECK(sel.est_ear == doctest::Approx(exact_best).epsilon(1e-9));
    CHECK(sel.est_ear >= grid_best - 1e-6);
    CHECK(std::abs(sel.est_ear - grid_best) <= 0.02 * std::abs(grid_best) + 1e-6);
    CHECK(sel.params.threshold == static_cast<std::int64_t>(exact_index) * d);
  }
}

TEST_CASE("transition_likelihood examples") {
  const auto xi2 = active_count_pmf(0.5, 2);
  auto idle_active = transition_likelihood(3, 2, 1, 0.5, xi2, ChannelStatus::idle());
  REQUIRE(idle_active.size() == 1);
  CHECK(idle_active[0].local_age == 4);
  CHECK(idle_active[0].age_gain == 2);
  CHECK(idle_active[0].likelihood == doctest::Approx(0.375));
  auto idle_inactive = transition_likelihood(3, 0, 1, 0.5, xi2, ChannelStatus::idle());
  REQUIRE(idle_inactive.size() == 1);
  CHECK(idle_inactive[0].likelihood == doctest::Approx(0.75));
  const auto xi3 = active_count_pmf(0.5, 3);
  auto coll = transition_likelihood(0, 4, 2, 0.5, xi3, ChannelStatus::collision());
  REQUIRE(coll.size() == 1);
  CHECK(coll[0].likelihood == doctest::Approx(0.25));
  auto success = transition_likelihood(1, 4, 2, 0.5, xi3, ChannelStatus::success(0));
  REQUIRE(success.size() == 2);
  CHECK(success[1].age_gain == 0);
  CHECK(success[1].local_age == 2);
}

TEST_CASE("property: likelihoods sum to one for every cell") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(gen() % 40);
    const auto xi = active_count_pmf(u(gen), n);
    const double p = std::max(1e-6, u(gen));
    const std::int64_t threshold = 1 + static_cast<std::int64_t>(gen() % 5);
    for (std::int64_t g = 0; g < 8; ++g) {
      double total = 0.0;
      for (const auto& status : {ChannelStatus::idle(), ChannelStatus::success(0), ChannelStatus::collision()})
        for (const auto& e : transition_likelihood(2, g, threshold, p, xi, status)) total += e.likelihood;
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("observation likelihoods match an enumeration over transmit patterns") {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 1 + static_cast<int>(gen() % 10);
    const auto xi = active_count_pmf(u(gen), n);
    const double p = std::max(1e-3, u(gen));
    const auto lk = ObservationLikelihoods::compute(xi, p);
    const auto act = oracle::enumerate_likelihoods(xi, p, true);
    const auto inact = oracle::enumerate_likelihoods(xi, p, false);
    CHECK(lk.idle_active == doctest::Approx(act.idle).epsilon(1e-12));
    CHECK(lk.other_success_active == doctest::Approx(act.other_success).epsilon(1e-12));
    CHECK(lk.self_success_active == doctest::Approx(act.self_success).epsilon(1e-12));
    CHECK(lk.collision_active == doctest::Approx(act.collision).epsilon(1e-12));
    CHECK(lk.idle_inactive == doctest::Approx(inact.idle).epsilon(1e-12));
    CHECK(lk.other_success_inactive == doctest::Approx(inact.other_success).epsilon(1e-12));
    CHECK(lk.collision_inactive == doctest::Approx(inact.collision).epsilon(1e-12));
    CHECK(inact.self_success == 0.0);
  }
}

TEST_CASE("bayes_update on an idle slot") {
  PosteriorGrid grid(1, small_limits());
  grid.set_mass(0, 0, 0.5);
  grid.set_mass(0, 1, 0.5);
  const auto sel = selection_for(0.5, 2, 1, 0.5);
  CHECK(bayes_update(grid, sel, ChannelStatus::idle()));
  CHECK(grid.offset() == 0);
  CHECK(grid.mass(1, 0) == doctest::Approx(2.0 / 3.0));
  CHECK(grid.mass(1, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(grid.mass(0, 0) == 0.0);
  CHECK(grid.mass(0, 1) == 0.0);
}

TEST_CASE("bayes_update with all mass inactive keeps the shape on a success") {
  PosteriorGrid grid(2, small_limits());
  grid.set_mass(0, 0, 0.6);
  grid.set_mass(1, 1, 0.4);
  const auto sel = selection_for(0.3, 4, 4, 0.5);
  CHECK(bayes_update(grid, sel, ChannelStatus::success(2)));
  CHECK(grid.offset() == 1);
  CHECK(grid.mass(0, 0) == doctest::Approx(0.6));
  CHECK(grid.mass(1, 1) == doctest::Approx(0.4));
}

TEST_CASE("bayes_update matches a cell-by-cell oracle on random priors") {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + static_cast<int>(gen() % 3);
    auto grid = random_grid(gen, d, 6, 6);
    const int n = 2 + static_cast<int>(gen() % 8);
    const std::int64_t threshold = d * (1 + static_cast<std::int64_t>(gen() % 4));
    const double p = 0.05 + 0.9 * u(gen);
    const auto sel = selection_for(active_prob(grid, threshold), n, threshold, p);
    const auto status = random_status(gen);

    std::vector<std::vector<double>> expect(8, std::vector<double>(8, 0.0));
    double z = 0.0;
    for (int l = 0; l < 6; ++l) {
      for (int k = 0; k < 6; ++k) {
        const double m = grid.mass(l, k);
        if (m == 0.0) continue;
        for (const auto& e : transition_likelihood(l * d, k * d, threshold, p, sel.active_pmf, status)) {
          const auto l2 = static_cast<std::size_t>(e.local_age / d);
          const auto k2 = static_cast<std::size_t>(e.age_gain / d);
          expect[l2][k2] += m * e.likelihood;
          z += m * e.likelihood;
        }
      }
    }
    const bool ok = bayes_update(grid, sel, status);
    if (!(z > 0.0)) {
      CHECK_FALSE(ok);
      continue;
    }
    CHECK(ok);
    for (int l = 0; l < 7; ++l)
      for (int k = 0; k < 7; ++k)
        CHECK(grid.mass(l, k) ==
              doctest::Approx(expect[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)] / z).epsilon(1e-12));
    CHECK(std::abs(grid.total_mass() - 1.0) <= 1e-9);
  }
}

TEST_CASE("impossible observation falls back to the predictive update") {
  PosteriorGrid grid(1, small_limits());
  grid.set_mass(0, 0, 1.0);
  const auto sel = selection_for(0.0, 3, 1, 0.5);
  CHECK_FALSE(bayes_update(grid, sel, ChannelStatus::collision()));
  CHECK(grid.total_mass() == doctest::Approx(1.0));
  CHECK(grid.mass(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("frame_boundary_update") {
  const int d = 4;
  PosteriorGrid grid(d, small_limits());
  grid.set_mass(1, 1, 1.0);
  frame_boundary_update(grid, 0.5);
  CHECK(grid.mass(0, 2) == doctest::Approx(0.5));
  CHECK(grid.mass(1, 1) == doctest::Approx(0.5));

  PosteriorGrid all(d, small_limits());
  all.set_mass(2, 1, 0.3);
  all.set_mass(0, 3, 0.7);
  frame_boundary_update(all, 1.0);
  CHECK(all.mass(0, 3) == doctest::Approx(1.0));
  CHECK(all.mass(2, 1) == 0.0);

  PosteriorGrid none(d, small_limits());
  none.set_mass(2, 1, 1.0);
  frame_boundary_update(none, 0.0);
  CHECK(none.mass(2, 1) == 1.0);

  PosteriorGrid mid(d, small_limits());
  mid.set_mass(0, 0, 1.0);
  mid.set_offset(2);
  CHECK_THROWS_AS(frame_boundary_update(mid, 0.5), InvalidArgument);
}

TEST_CASE("enhanced_decide transmit rate") {
  const auto sel = selection_for(0.5, 4, 2, 0.3);
  Rng rng(12);
  int hits = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) hits += enhanced_decide({0, 3}, sel, rng);
  CHECK(std::abs(hits / static_cast<double>(draws) - 0.3) <= 3.0 * std::sqrt(0.21 / draws));
  CHECK_FALSE(enhanced_decide({0, 1}, sel, rng));
  CHECK_FALSE(enhanced_decide({0, 0}, sel, rng));
}

TEST_CASE("property: posterior mass is conserved over 10^4 random slots") {
  const NetworkConfig cfg{6, 0.3, 3};
  SharedEstimator est(cfg);
  std::mt19937_64 gen(31);
  double worst = 0.0;
  for (int t = 0; t < 10000; ++t) {
    est.begin_slot();
    est.end_slot(random_status(gen));
    worst = std::max(worst, std::abs(est.grid().total_mass() - 1.0));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("two estimators fed the same feedback choose the same parameters") {
  const NetworkConfig cfg{8, 0.4, 2};
  SharedEstimator a(cfg), b(cfg);
  std::mt19937_64 gen(77);
  std::bernoulli_distribution busy(0.35);
  for (int t = 0; t < 10000; ++t) {
    const auto& sa = a.begin_slot();
    const auto& sb = b.begin_slot();
    REQUIRE(sa.silent == sb.silent);
    REQUIRE(sa.params.threshold == sb.params.threshold);
    REQUIRE(sa.params.tx_prob == sb.params.tx_prob);
    const auto status = busy(gen) ? random_status(gen) : ChannelStatus::idle();
    a.end_slot(status);
    b.end_slot(status);
  }
  CHECK(a.zero_likelihood_events() == b.zero_likelihood_events());
}

TEST_CASE("grid limits grow with the network") {
  const auto small = GridLimits::for_network({5, 0.5, 10});
  CHECK(small.max_l >= 64);
  CHECK(small.max_k >= 64);
  const auto sparse = GridLimits::for_network({5, 0.01, 1});
  CHECK(sparse.max_l > small.max_l);
  const auto dense = GridLimits::for_network({400, 1.0, 1});
  CHECK(dense.max_k > small.max_k);
}

TEST_CASE("posterior of a single device equals the conditioned true law") {
  // no other devices, so the update is exact; only sampling noise remains
  const auto check = oracle::posterior_vs_conditioned_mc({1, 0.5, 4}, 20, 10000, 7);
  REQUIRE(check.accepted == 10000);
  CHECK(check.tv <= 0.03);
}
