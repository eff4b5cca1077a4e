#include "agdsa/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "agdsa/numeric.hpp"

namespace agdsa::estimator {

GridLimits GridLimits::for_network(const NetworkConfig& cfg) {
  cfg.validate();
  GridLimits limits;
  if (cfg.gen_prob < 1.0) {
    // rows beyond this hold < 1e-12 of the local-age mass
    const double rows = std::ceil(std::log(1e-12) / std::log1p(-cfg.gen_prob));
    limits.max_l = static_cast<int>(std::clamp(rows, 64.0, 4096.0));
  }
  const int frames_per_round = (cfg.num_devices + cfg.frame_len - 1) / cfg.frame_len;
  limits.max_k = std::max(64, 6 * frames_per_round + limits.max_l);
  return limits;
}

PosteriorGrid::PosteriorGrid(int frame_len, GridLimits limits)
    : frame_len_(frame_len), limits_(limits), stride_(static_cast<std::size_t>(limits.max_k) + 1) {
  if (frame_len < 1) throw InvalidArgument("frame_len must be >= 1");
  if (limits.max_l < 1 || limits.max_k < 1) throw InvalidArgument("grid caps must be >= 1");
  if (limits.prune_below < 0.0) throw InvalidArgument("prune_below must be >= 0");
  row_end_.assign(static_cast<std::size_t>(limits.max_l) + 1, 0);
  data_.assign((static_cast<std::size_t>(limits.max_l) + 1) * stride_, 0.0);
}

double PosteriorGrid::mass(int l, int k) const {
  if (l < 0 || l > max_l() || k < 0 || k > max_k()) throw InvalidArgument("grid index out of range");
  return row(l)[k];
}

void PosteriorGrid::set_mass(int l, int k, double value) {
  if (l < 0 || l > max_l() || k < 0 || k > max_k()) throw InvalidArgument("grid index out of range");
  if (!(value >= 0.0)) throw InvalidArgument("mass must be nonnegative");
  row(l)[k] = value;
  widen_row(l, k + 1);
}

void PosteriorGrid::widen_row(int l, int end) noexcept {
  int& e = row_end_[static_cast<std::size_t>(l)];
  e = std::max(e, std::min(end, max_k() + 1));
  used_l_ = std::max(used_l_, l);
  used_k_ = std::max(used_k_, e - 1);
}

void PosteriorGrid::set_offset(int offset) {
  if (offset < 0 || offset >= frame_len_) throw InvalidArgument("offset must lie in [0, D)");
  offset_ = offset;
}

double PosteriorGrid::total_mass() const noexcept {
  double total = 0.0;
  for (int l = 0; l <= used_l_; ++l) {
    const double* r = row(l);
    for (int k = 0, e = row_end(l); k < e; ++k) total += r[k];
  }
  return total;
}

std::vector<double> PosteriorGrid::gain_marginal() const {
  std::vector<double> marginal(static_cast<std::size_t>(used_k_) + 1, 0.0);
  for (int l = 0; l <= used_l_; ++l) {
    const double* r = row(l);
    for (int k = 0, e = row_end(l); k < e; ++k) marginal[static_cast<std::size_t>(k)] += r[k];
  }
  return marginal;
}

void PosteriorGrid::write_csv(std::ostream& os) const {
  os << "l,k,mass\n";
  const auto old_precision = os.precision(17);
  for (int l = 0; l <= max_l(); ++l) {
    for (int k = 0; k <= max_k(); ++k) os << l << ',' << k << ',' << row(l)[k] << '\n';
  }
  os.precision(old_precision);
}

void PosteriorGrid::advance_offset() noexcept {
  if (++offset_ < frame_len_) return;
  offset_ = 0;
  // w crosses into the next frame-length row
  auto end_of = [this](int l) -> int& { return row_end_[static_cast<std::size_t>(l)]; };
  int top = used_l_;
  if (used_l_ == max_l()) {
    double* last = row(max_l());
    const double* prev = row(max_l() - 1);
    for (int k = 0, e = end_of(max_l() - 1); k < e; ++k) last[k] += prev[k];
    end_of(max_l()) = std::max(end_of(max_l()), end_of(max_l() - 1));
    top = max_l() - 2;
  } else {
    ++used_l_;
  }
  for (int l = top; l >= 0; --l) {
    std::fill_n(row(l + 1), end_of(l + 1), 0.0);
    std::copy_n(row(l), end_of(l), row(l + 1));
    end_of(l + 1) = end_of(l);
  }
  std::fill_n(row(0), end_of(0), 0.0);
  end_of(0) = 0;
}

void PosteriorGrid::prune() {
  const double eps = limits_.prune_below;
  if (eps <= 0.0) return;
  int widest = 0;
  for (int l = 0; l <= used_l_; ++l) {
    double* r = row(l);
    int& e = row_end_[static_cast<std::size_t>(l)];
    while (e > 0 && r[e - 1] < eps) r[--e] = 0.0;
    widest = std::max(widest, e);
  }
  while (used_l_ > 0 && row_end(used_l_) == 0) --used_l_;
  used_k_ = std::max(widest - 1, 0);
}

PosteriorGrid init_posterior(const NetworkConfig& cfg, GridLimits limits) {
  cfg.validate();
  PosteriorGrid grid(cfg.frame_len, limits);
  grid.set_mass(0, 0, 1.0);
  return grid;
}

PosteriorGrid init_posterior(const NetworkConfig& cfg) {
  return init_posterior(cfg, GridLimits::for_network(cfg));
}

namespace {

// Smallest gain index k with k*D >= threshold.
int first_active_index(std::int64_t threshold, int frame_len) {
  if (threshold < 1) throw InvalidArgument("threshold must be >= 1");
  const std::int64_t k = (threshold + frame_len - 1) / frame_len;
  return static_cast<int>(std::min<std::int64_t>(k, std::numeric_limits<int>::max()));
}

void validate_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("probability must lie in [0, 1]");
}

}  // namespace

double active_prob(const PosteriorGrid& grid, std::int64_t threshold) {
  const int k0 = first_active_index(threshold, grid.frame_len());
  double rho = 0.0;
  for (int l = 0; l <= grid.used_l(); ++l) {
    const double* r = grid.row(l);
    for (int k = k0, e = grid.row_end(l); k < e; ++k) rho += r[k];
  }
  return rho;
}

std::vector<double> active_count_pmf(double rho, int num_devices) {
  if (num_devices < 1) throw InvalidArgument("num_devices must be >= 1");
  validate_probability(rho);
  return binomial_pmf(num_devices - 1, rho);
}

double success_prob(std::span<const double> xi, double p) {
  validate_probability(p);
  const double q = 1.0 - p;
  double qpow = 1.0;
  double theta = 0.0;
  for (double x : xi) {
    theta += x * qpow;
    qpow *= q;
  }
  return theta;
}

double estimate_ear(const PosteriorGrid& grid, std::int64_t threshold, double p,
                    std::span<const double> xi) {
  const int k0 = first_active_index(threshold, grid.frame_len());
  double gain_mass = 0.0;
  for (int l = 0; l <= grid.used_l(); ++l) {
    const double* r = grid.row(l);
    for (int k = k0, e = grid.row_end(l); k < e; ++k)
      gain_mass += r[k] * static_cast<double>(k) * grid.frame_len();
  }
  return -1.0 + gain_mass * p * success_prob(xi, p);
}

double approx_popt(double rho, int num_devices) {
  if (num_devices < 1) throw InvalidArgument("num_devices must be >= 1");
  validate_probability(rho);
  // sum_{u=1}^{N} C(N,u) rho^u (1-rho)^(N-u) u is the binomial mean N rho
  const double mean = static_cast<double>(num_devices) * rho;
  if (mean <= 1.0) return 1.0;
  return 1.0 / mean;
}

EarSelection choose_params(const PosteriorGrid& grid, const NetworkConfig& cfg) {
  const int n = cfg.num_devices;
  const int frame_len = grid.frame_len();
  const std::vector<double> marginal = grid.gain_marginal();
  const int kmax = static_cast<int>(marginal.size()) - 1;

  // suffix sums: rho(k) and sum of mass * g over cells with index >= k
  std::vector<double> rho(marginal.size() + 1, 0.0);
  std::vector<double> gain(marginal.size() + 1, 0.0);
  for (int k = kmax; k >= 1; --k) {
    const auto i = static_cast<std::size_t>(k);
    rho[i] = rho[i + 1] + marginal[i];
    gain[i] = gain[i + 1] + marginal[i] * static_cast<double>(k) * frame_len;
  }

  EarSelection best;
  int best_k = 0;
  double best_ear = -std::numeric_limits<double>::infinity();
  std::vector<double> profile;
  for (int k = 1; k <= kmax; ++k) {
    const double r = std::min(rho[static_cast<std::size_t>(k)], 1.0);
    if (!(r > 0.0)) continue;
    const double p = approx_popt(r, n);
    const double ear = -1.0 + gain[static_cast<std::size_t>(k)] * p * std::pow(1.0 - r * p, n - 1);
    profile.push_back(ear);
    if (ear >= best_ear) {
      best_ear = ear;
      best_k = k;
    }
  }
  if (best_k == 0) return best;

  int peaks = 0;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    const bool above_left = i == 0 || profile[i] > profile[i - 1];
    std::size_t j = i;
    while (j + 1 < profile.size() && profile[j + 1] == profile[i]) ++j;
    const bool above_right = j + 1 == profile.size() || profile[i] > profile[j + 1];
    if (above_left && above_right) ++peaks;
    i = j;
  }

  const auto bk = static_cast<std::size_t>(best_k);
  const double r = std::min(rho[bk], 1.0);
  best.silent = false;
  best.params.threshold = static_cast<std::int64_t>(best_k) * frame_len;
  best.params.tx_prob = approx_popt(r, n);
  best.active_prob = r;
  best.active_pmf = active_count_pmf(r, n);
  best.est_ear = -1.0 + gain[bk] * best.params.tx_prob * success_prob(best.active_pmf, best.params.tx_prob);
  best.local_maxima = peaks;
  return best;
}

ObservationLikelihoods ObservationLikelihoods::compute(std::span<const double> xi, double p) {
  validate_probability(p);
  const double q = 1.0 - p;
  ObservationLikelihoods out;
  double theta = 0.0;
  double one_other = 0.0;
  double coll_active = 0.0;
  double coll_inactive = 0.0;
  double q_prev = 0.0;  // q^(u-1)
  double q_u = 1.0;     // q^u
  for (std::size_t i = 0; i < xi.size(); ++i) {
    const double u = static_cast<double>(i);
    const double x = xi[i];
    theta += x * q_u;
    if (i >= 1) one_other += x * u * p * q_prev;
    // P(at least two transmit) among u+1 (tagged active) or u (tagged silent)
    coll_active += x * std::max(0.0, 1.0 - q_u * q - (u + 1.0) * p * q_u);
    if (i >= 2) coll_inactive += x * std::max(0.0, 1.0 - q_u - u * p * q_prev);
    q_prev = q_u;
    q_u *= q;
  }
  out.idle_active = q * theta;
  out.idle_inactive = theta;
  out.other_success_active = q * one_other;
  out.other_success_inactive = one_other;
  out.self_success_active = p * theta;
  out.collision_active = coll_active;
  out.collision_inactive = coll_inactive;
  return out;
}

std::vector<TransitionEntry> transition_likelihood(std::int64_t w, std::int64_t g,
                                                   std::int64_t threshold, double p,
                                                   std::span<const double> xi,
                                                   const ChannelStatus& observed) {
  if (w < 0 || g < 0) throw InvalidArgument("local age and age gain must be nonnegative");
  if (threshold < 1) throw InvalidArgument("threshold must be >= 1");
  const auto lk = ObservationLikelihoods::compute(xi, p);
  const bool active = g >= threshold;
  std::vector<TransitionEntry> out;
  auto emit = [&](std::int64_t g_next, double likelihood) {
    if (likelihood > 0.0) out.push_back({w + 1, g_next, likelihood});
  };
  switch (observed.kind()) {
    case ChannelStatus::Kind::idle:
      emit(g, active ? lk.idle_active : lk.idle_inactive);
      break;
    case ChannelStatus::Kind::success:
      emit(g, active ? lk.other_success_active : lk.other_success_inactive);
      if (active) emit(0, lk.self_success_active);
      break;
    case ChannelStatus::Kind::collision:
      emit(g, active ? lk.collision_active : lk.collision_inactive);
      break;
  }
  return out;
}

bool bayes_update(PosteriorGrid& grid, const EarSelection& selection, const ChannelStatus& observed) {
  const int used_l = grid.used_l();
  const int used_k = grid.used_k();
  const int k0 = selection.silent
                     ? used_k + 1
                     : std::min(first_active_index(selection.params.threshold, grid.frame_len()),
                                used_k + 1);
  const auto lk = ObservationLikelihoods::compute(selection.active_pmf, selection.params.tx_prob);

  double keep_active = 0.0;
  double self_active = 0.0;
  double keep_inactive = 0.0;
  switch (observed.kind()) {
    case ChannelStatus::Kind::idle:
      keep_active = lk.idle_active;
      keep_inactive = lk.idle_inactive;
      break;
    case ChannelStatus::Kind::success:
      keep_active = lk.other_success_active;
      self_active = lk.self_success_active;
      keep_inactive = lk.other_success_inactive;
      break;
    case ChannelStatus::Kind::collision:
      keep_active = lk.collision_active;
      keep_inactive = lk.collision_inactive;
      break;
  }

  double active_mass = 0.0;
  double inactive_mass = 0.0;
  for (int l = 0; l <= used_l; ++l) {
    const double* r = grid.row(l);
    const int e = grid.row_end(l);
    const int split = std::min(k0, e);
    for (int k = 0; k < split; ++k) inactive_mass += r[k];
    for (int k = split; k < e; ++k) active_mass += r[k];
  }
  double normalizer = active_mass * (keep_active + self_active) + inactive_mass * keep_inactive;
  const bool consistent = normalizer > 0.0 && std::isfinite(normalizer);
  if (!consistent) {
    // unconditioned one-slot prediction
    self_active = selection.params.tx_prob * success_prob(selection.active_pmf, selection.params.tx_prob);
    keep_active = 1.0 - self_active;
    keep_inactive = 1.0;
    normalizer = active_mass + inactive_mass;
  }
  const double scale = 1.0 / normalizer;
  const double ka = keep_active * scale;
  const double sa = self_active * scale;
  const double ki = keep_inactive * scale;
  for (int l = 0; l <= used_l; ++l) {
    double* r = grid.row(l);
    const int e = grid.row_end(l);
    const int split = std::min(k0, e);
    double delivered = 0.0;
    for (int k = 0; k < split; ++k) r[k] *= ki;
    for (int k = split; k < e; ++k) {
      delivered += r[k] * sa;
      r[k] *= ka;
    }
    if (delivered > 0.0) {
      r[0] += delivered;
      grid.widen_row(l, 1);
    }
  }
  grid.advance_offset();
  return consistent;
}

void frame_boundary_update(PosteriorGrid& grid, double lambda) {
  validate_probability(lambda);
  if (grid.offset() != 0) throw InvalidArgument("arrival update requires a frame boundary (offset 0)");
  if (lambda == 0.0) return;
  const int used_l = grid.used_l();
  const int max_k = grid.max_k();
  std::vector<double> arrived(static_cast<std::size_t>(max_k) + 1, 0.0);
  const double stay = 1.0 - lambda;
  int new_end = 0;
  for (int l = 0; l <= used_l; ++l) {
    double* r = grid.row(l);
    const int e = grid.row_end(l);
    if (e == 0) continue;
    const int shift = std::min(l, max_k);
    for (int k = 0; k < e; ++k) {
      const double m = r[k];
      arrived[static_cast<std::size_t>(std::min(k + shift, max_k))] += lambda * m;
      r[k] = stay * m;
    }
    new_end = std::max(new_end, std::min(e + shift, max_k + 1));
  }
  double* r0 = grid.row(0);
  for (int k = 0; k < new_end; ++k) r0[k] += arrived[static_cast<std::size_t>(k)];
  grid.widen_row(0, new_end);
}

bool enhanced_decide(const DeviceState& own, const EarSelection& selection, Rng& rng) {
  if (selection.silent || age_gain(own) < selection.params.threshold) return false;
  return rng.bernoulli(selection.params.tx_prob);
}

SharedEstimator::SharedEstimator(const NetworkConfig& cfg)
    : SharedEstimator(cfg, GridLimits::for_network(cfg)) {}

SharedEstimator::SharedEstimator(const NetworkConfig& cfg, GridLimits limits)
    : cfg_(cfg), grid_(init_posterior(cfg, limits)) {}

const EarSelection& SharedEstimator::begin_slot() {
  selection_ = choose_params(grid_, cfg_);
  if (selection_.local_maxima > 1) ++multimodal_;
  return selection_;
}

void SharedEstimator::end_slot(const ChannelStatus& observed) {
  if (!bayes_update(grid_, selection_, observed)) ++zero_likelihood_;
  if (grid_.offset() == 0) frame_boundary_update(grid_, cfg_.gen_prob);
  grid_.prune();
  ++slot_;
}

void EnhancedPolicy::begin_slot(const SlotIndex& slot) {
  if (slot.t() != estimator_.slot())
    throw std::logic_error("enhanced policy driven out of slot order");
  current_ = &estimator_.begin_slot();
}

}  // namespace agdsa::estimator
