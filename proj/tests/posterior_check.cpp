#include "posterior_check.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "agdsa/estimator.hpp"

namespace agdsa::oracle {

namespace {

using Prefix = std::vector<int>;

ChannelStatus status_of(int code) {
  return code == 0 ? ChannelStatus::idle() : code == 1 ? ChannelStatus::success(0) : ChannelStatus::collision();
}

struct Episode {
  Prefix feedback;
  std::vector<std::pair<std::int64_t, std::int64_t>> final_wg;
  bool matched = true;
};

// One episode of the true system with explicit per-device ages. With
// `target` set it aborts at the first slot whose feedback differs; with
// `rules` set it uses those selections instead of a live estimator.
Episode run(const NetworkConfig& net, int len, std::mt19937_64& gen, const Prefix* target,
            const std::vector<estimator::EarSelection>* rules) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto n = static_cast<std::size_t>(net.num_devices);
  Episode ep;
  std::vector<std::int64_t> w(n, 0), h(n, 0);
  std::optional<estimator::SharedEstimator> est;
  if (!rules) est.emplace(net);
  std::vector<std::size_t> tx;
  for (int t = 0; t < len; ++t) {
    const estimator::EarSelection sel = rules ? (*rules)[static_cast<std::size_t>(t)] : est->begin_slot();
    tx.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const std::int64_t g = h[i] - w[i];
      if (!sel.silent && g >= 1 && g >= sel.params.threshold && u(gen) < sel.params.tx_prob) tx.push_back(i);
    }
    const int code = tx.empty() ? 0 : (tx.size() == 1 ? 1 : 2);
    if (target && (*target)[static_cast<std::size_t>(t)] != code) {
      ep.matched = false;
      return ep;
    }
    ep.feedback.push_back(code);
    if (est) est->end_slot(status_of(code));
    const bool boundary = (t + 1) % net.frame_len == 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool delivered = tx.size() == 1 && tx[0] == i;
      h[i] = delivered ? w[i] + 1 : h[i] + 1;
      w[i] += 1;
      if (boundary && u(gen) < net.gen_prob) w[i] = 0;
    }
  }
  for (std::size_t i = 0; i < n; ++i) ep.final_wg.emplace_back(w[i], h[i] - w[i]);
  return ep;
}

}  // namespace

PosteriorCheck posterior_vs_conditioned_mc(const NetworkConfig& net, int prefix_len, std::int64_t samples,
                                           std::uint64_t seed, int pilot_runs, std::int64_t max_tries) {
  std::mt19937_64 pilot_gen(seed);
  std::map<Prefix, int> counts;
  for (int i = 0; i < pilot_runs; ++i) {
    const auto ep = run(net, prefix_len, pilot_gen, nullptr, nullptr);
    if (std::count_if(ep.feedback.begin(), ep.feedback.end(), [](int c) { return c != 0; }) >= 2)
      ++counts[ep.feedback];
  }
  PosteriorCheck out;
  if (counts.empty()) return out;
  const Prefix prefix = std::max_element(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
                          return a.second < b.second;
                        })->first;
  for (int c : prefix) out.prefix += "ISC"[c];

  estimator::SharedEstimator est(net);
  std::vector<estimator::EarSelection> rules;
  for (int code : prefix) {
    rules.push_back(est.begin_slot());
    est.end_slot(status_of(code));
  }

  std::mt19937_64 gen(seed ^ 0x5eed);
  std::map<std::pair<std::int64_t, std::int64_t>, double> empirical;
  while (out.accepted < samples && out.tried < max_tries) {
    ++out.tried;
    const auto ep = run(net, prefix_len, gen, &prefix, &rules);
    if (!ep.matched) continue;
    ++out.accepted;
    for (const auto& [w, g] : ep.final_wg) empirical[{w / net.frame_len, g / net.frame_len}] += 1.0;
  }
  if (out.accepted == 0) return out;
  for (auto& [cell, m] : empirical) m /= static_cast<double>(out.accepted) * net.num_devices;

  const auto& grid = est.grid();
  std::set<std::pair<std::int64_t, std::int64_t>> cells;
  for (const auto& [c, m] : empirical) cells.insert(c);
  for (int l = 0; l <= grid.used_l(); ++l)
    for (int k = 0; k < grid.row_end(l); ++k)
      if (grid.mass(l, k) > 0.0) cells.insert({l, k});
  double tv = 0.0;
  for (const auto& c : cells) {
    const double post = c.first <= grid.max_l() && c.second <= grid.max_k()
                            ? grid.mass(static_cast<int>(c.first), static_cast<int>(c.second))
                            : 0.0;
    const auto it = empirical.find(c);
    tv += std::abs(post - (it == empirical.end() ? 0.0 : it->second));
  }
  out.tv = tv / 2.0;
  return out;
}

}  // namespace agdsa::oracle
