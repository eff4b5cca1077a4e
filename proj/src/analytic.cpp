#include "agdsa/analytic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <string>

#include <boost/math/tools/toms748_solve.hpp>

#include "agdsa/numeric.hpp"

namespace agdsa::analytic {

void ExternalChainSpec::validate() const {
  cfg.validate();
  if (gamma < 1) throw InvalidArgument("gamma must be >= 1");
  if (!(tx_prob > 0.0 && tx_prob <= 1.0)) throw InvalidArgument("tx_prob must lie in (0, 1]");
  if (trunc_l < gamma + 2 || trunc_k < gamma + 2)
    throw InvalidArgument("truncation caps must be >= gamma + 2");
}

ExternalChainSpec ExternalChainSpec::from_params(const NetworkConfig& cfg,
                                                 const AccessParams& params) {
  cfg.validate();
  params.validate();
  ExternalChainSpec spec;
  spec.cfg = cfg;
  spec.gamma = static_cast<int>((params.threshold + cfg.frame_len - 1) / cfg.frame_len);
  spec.tx_prob = params.tx_prob;
  spec.trunc_l = std::max(spec.trunc_l, spec.gamma + 2);
  spec.trunc_k = std::max(spec.trunc_k, spec.gamma + 2);
  return spec;
}

std::vector<ExternalTransition> external_transition(std::int64_t l, std::int64_t k, double lambda,
                                                    int gamma, double beta) {
  if (l < 0 || k < 0) throw InvalidArgument("state indices must be nonnegative");
  const double b = k >= gamma ? beta : 0.0;
  return {
      {0, l + 1, lambda * b},
      {0, l + k + 1, lambda * (1.0 - b)},
      {l + 1, 0, (1.0 - lambda) * b},
      {l + 1, k, (1.0 - lambda) * (1.0 - b)},
  };
}

namespace {

// Beyond the cap (k > gamma) row 0 obeys x_{m+1} = M x_m, v_m = h . x_m with
// x_m = (a^{m-1}, idle carry, c_{m-1}, active carry) and M lower triangular.
struct TailOperator {
  double lambda;
  double beta;
  double a;

  std::array<double, 4> apply(const std::array<double, 4>& x) const {
    return {a * x[0], (1.0 - lambda) * x[1], (1.0 - lambda) * (beta * x[0] + x[2]),
            (1.0 - beta) * (lambda * (beta * x[0] + x[1] + x[2]) + x[3])};
  }
  // (I - M)^{-1} x by forward substitution.
  std::array<double, 4> resolvent(const std::array<double, 4>& x) const {
    std::array<double, 4> y{};
    y[0] = x[0] / (1.0 - a);
    y[1] = x[1] / lambda;
    y[2] = (x[2] + (1.0 - lambda) * beta * y[0]) / lambda;
    y[3] = (x[3] + (1.0 - beta) * lambda * (beta * y[0] + y[1] + y[2])) / beta;
    return y;
  }
  double value(const std::array<double, 4>& x) const {
    return lambda * (beta * x[0] + x[1] + x[2] + x[3]);
  }
};

}  // namespace

double SteadyState::decay(int k) const noexcept {
  return k >= gamma ? (1.0 - lambda) * (1.0 - beta) : 1.0 - lambda;
}

double SteadyState::at(std::int64_t l, int k) const {
  if (l < 0 || k < 0) throw InvalidArgument("state indices must be nonnegative");
  if (k > trunc_k()) {
    const TailOperator op{lambda, beta, decay(k)};
    auto x = tail_state;
    for (int m = trunc_k() + 1; m < k; ++m) x = op.apply(x);
    return op.value(x) * std::pow(decay(k), static_cast<double>(l));
  }
  if (k == 0) return l < static_cast<std::int64_t>(col0.size()) ? col0[static_cast<std::size_t>(l)] : 0.0;
  return row0[static_cast<std::size_t>(k)] * std::pow(decay(k), static_cast<double>(l));
}

double SteadyState::active_mass() const noexcept {
  double q = 0.0;
  for (std::size_t k = static_cast<std::size_t>(gamma); k < col_mass.size(); ++k) q += col_mass[k];
  q += tail_mass;
  return std::min(q, 1.0);
}

namespace {

SteadyState solve_rows(double lambda, int gamma, double beta, int kcap) {
  SteadyState out;
  out.lambda = lambda;
  out.beta = beta;
  out.gamma = gamma;
  const double stay_idle = 1.0 - lambda;
  const double stay_active = (1.0 - lambda) * (1.0 - beta);
  const auto size = static_cast<std::size_t>(kcap) + 1;

  // Unnormalized scale: the beta T a^{m-1} forcing uses T = 1.
  // k = 0 column: c_l = (1 - lambda) (c_{l-1} + beta a^{l-1}).
  std::vector<double> col0{0.0};
  {
    double c = 0.0;
    double apow = 1.0;
    double total = 0.0;
    for (std::int64_t l = 1; l < 50'000'000; ++l) {
      c = stay_idle * (c + beta * apow);
      apow *= stay_active;
      col0.push_back(c);
      total += c;
      if (l >= kcap && c <= 1e-18 * total && apow <= 1e-18) break;
      if (l >= kcap && c == 0.0 && apow == 0.0) break;
    }
  }

  std::vector<double> row0(size, 0.0);
  double idle_carry = 0.0;    // sum_{1<=k<min(m,gamma)} pi(0,k) (1-lambda)^{m-1-k}
  double active_carry = 0.0;  // sum_{gamma<=k<m} (1-beta) pi(0,k) a^{m-1-k}
  double apow = 1.0;          // a^{m-1}
  for (int m = 1; m <= kcap; ++m) {
    const double v = lambda * (beta * apow + col0[static_cast<std::size_t>(m - 1)] + idle_carry +
                               active_carry);
    row0[static_cast<std::size_t>(m)] = v;
    if (m < gamma) {
      idle_carry = stay_idle * idle_carry + v;
      active_carry *= stay_active;
    } else {
      idle_carry *= stay_idle;
      active_carry = stay_active * active_carry + (1.0 - beta) * v;
    }
    apow *= stay_active;
  }

  const TailOperator op{lambda, beta, stay_active};
  std::array<double, 4> state{apow, idle_carry, col0[static_cast<std::size_t>(kcap)], active_carry};
  // sum_{m>K} v_m = h (I-M)^{-1} x_{K+1};  sum_{j>=0} j M^j = M (I-M)^{-2}
  double tail_sum = op.value(op.resolvent(state));
  double tail_moment =
      static_cast<double>(kcap + 1) * tail_sum + op.value(op.resolvent(op.resolvent(op.apply(state))));

  std::vector<double> col_mass(size, 0.0);
  std::vector<double> col_moment(size, 0.0);
  for (std::size_t l = 0; l < col0.size(); ++l) {
    col_mass[0] += col0[l];
    col_moment[0] += static_cast<double>(l) * col0[l];
  }
  for (int k = 1; k <= kcap; ++k) {
    const double a = k >= gamma ? stay_active : stay_idle;
    const double v = row0[static_cast<std::size_t>(k)];
    col_mass[static_cast<std::size_t>(k)] = v / (1.0 - a);
    col_moment[static_cast<std::size_t>(k)] = v * a / ((1.0 - a) * (1.0 - a));
  }

  double total = tail_sum / (1.0 - stay_active);
  for (double v : col_mass) total += v;
  if (!(total > 0.0) || !std::isfinite(total))
    throw TruncationError("external chain has no normalizable stationary law", 1.0);
  for (auto* vec : {&row0, &col0, &col_mass, &col_moment})
    for (double& v : *vec) v /= total;
  for (double& v : state) v /= total;
  tail_sum /= total;
  tail_moment /= total;
  out.tail_row0_sum = tail_sum;
  out.tail_row0_moment = tail_moment;
  out.tail_state = state;
  out.tail_mass = tail_sum / (1.0 - stay_active);
  out.row0 = std::move(row0);
  out.col0 = std::move(col0);
  out.col_mass = std::move(col_mass);
  out.col_moment = std::move(col_moment);
  return out;
}

}  // namespace

SteadyState steady_state(const ExternalChainSpec& spec, double beta) {
  spec.validate();
  if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidArgument("beta must lie in [0, 1]");
  if (beta == 0.0) throw TruncationError("beta = 0: active devices never succeed", 1.0);
  return solve_rows(spec.cfg.gen_prob, spec.gamma, beta, spec.trunc_k);
}

std::vector<double> mixture_weights(const SteadyState& pi, int num_devices) {
  if (num_devices < 1) throw InvalidArgument("num_devices must be >= 1");
  return binomial_pmf(num_devices - 1, pi.active_mass());
}

std::vector<std::vector<double>> internal_transition_matrix(int s, double p) {
  if (s < 0) throw InvalidArgument("s must be >= 0");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("p must lie in [0, 1]");
  const auto n = static_cast<std::size_t>(s) + 2;
  const std::size_t suc = n - 1;
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  for (int y = 0; y <= s; ++y) {
    const double others_silent = std::pow(1.0 - p, s - y);
    const double absorb = p * others_silent;
    const double advance = (s - y) * p * others_silent;
    auto& row = m[static_cast<std::size_t>(y)];
    row[static_cast<std::size_t>(y)] = 1.0 - absorb - advance;
    if (y < s) row[static_cast<std::size_t>(y) + 1] = advance;
    row[suc] = absorb;
  }
  m[suc][suc] = 1.0;
  return m;
}

std::vector<std::vector<double>> internal_state_vectors(int s, double p, int frame_len) {
  if (frame_len < 1) throw InvalidArgument("frame_len must be >= 1");
  const auto m = internal_transition_matrix(s, p);
  const std::size_t n = m.size();
  std::vector<std::vector<double>> phi;
  phi.reserve(static_cast<std::size_t>(frame_len) + 1);
  std::vector<double> cur(n, 0.0);
  cur[0] = 1.0;
  phi.push_back(cur);
  for (int nu = 0; nu < frame_len; ++nu) {
    std::vector<double> next(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (cur[i] == 0.0) continue;
      // at most three nonzeros per row
      next[i] += cur[i] * m[i][i];
      if (i + 1 < n - 1) next[i + 1] += cur[i] * m[i][i + 1];
      if (i + 1 < n) next[n - 1] += cur[i] * m[i][n - 1];
    }
    cur = std::move(next);
    phi.push_back(cur);
  }
  return phi;
}

std::vector<double> slot_success_probs(int s, double p, int frame_len) {
  const auto phi = internal_state_vectors(s, p, frame_len);
  std::vector<double> alpha(static_cast<std::size_t>(frame_len));
  for (std::size_t nu = 0; nu < alpha.size(); ++nu)
    alpha[nu] = std::max(0.0, phi[nu + 1].back() - phi[nu].back());
  return alpha;
}

InternalChainSolution solve_internal(const NetworkConfig& cfg, double p) {
  cfg.validate();
  InternalChainSolution out;
  out.alpha.reserve(static_cast<std::size_t>(cfg.num_devices));
  for (int s = 0; s < cfg.num_devices; ++s)
    out.alpha.push_back(slot_success_probs(s, p, cfg.frame_len));
  out.chi.assign(static_cast<std::size_t>(cfg.num_devices), 0.0);
  out.chi[0] = 1.0;
  return out;
}

std::vector<double> mixed_alpha(const InternalChainSolution& internal) {
  if (internal.alpha.empty() || internal.chi.size() != internal.alpha.size())
    throw InvalidArgument("mixture weights and internal chains disagree in size");
  std::vector<double> out(internal.alpha.front().size(), 0.0);
  for (std::size_t s = 0; s < internal.chi.size(); ++s) {
    const double w = internal.chi[s];
    if (w == 0.0) continue;
    for (std::size_t nu = 0; nu < out.size(); ++nu) out[nu] += w * internal.alpha[s][nu];
  }
  return out;
}

namespace {

constexpr double kGridFloor = 1e-12;
constexpr int kGridPerDecade = 8;
constexpr double kRootTolerance = 1e-8;  // relative
constexpr double kMergeRadius = 1e-6;

double sum(const std::vector<double>& v) {
  double total = 0.0;
  for (double x : v) total += x;
  return total;
}

}  // namespace

ExternalChainSolution solution_at(const ExternalChainSpec& spec, double beta) {
  spec.validate();
  ExternalChainSolution out;
  out.pi = steady_state(spec, beta);
  auto internal = solve_internal(spec.cfg, spec.tx_prob);
  internal.chi = mixture_weights(out.pi, spec.cfg.num_devices);
  out.alpha = mixed_alpha(internal);
  out.beta = beta;
  out.tail_mass = out.pi.tail_mass;
  out.fixed_points_found = {beta};
  return out;
}

ExternalChainSolution solve_fixed_point(const ExternalChainSpec& spec) {
  spec.validate();
  auto internal = solve_internal(spec.cfg, spec.tx_prob);
  int evaluations = 0;
  auto gap = [&](double beta) {
    ++evaluations;
    const SteadyState pi = steady_state(spec, beta);
    internal.chi = mixture_weights(pi, spec.cfg.num_devices);
    return sum(mixed_alpha(internal)) - beta;
  };

  // Roots of F(beta) - beta where the gap falls through zero are the points
  // the damped iteration beta <- (beta + F(beta)) / 2 converges to.
  const int points = static_cast<int>(-std::log10(kGridFloor)) * kGridPerDecade;
  std::vector<double> grid(static_cast<std::size_t>(points) + 1);
  std::vector<double> gaps(grid.size());
  for (int i = 0; i <= points; ++i) {
    grid[static_cast<std::size_t>(i)] =
        i == points ? 1.0 : kGridFloor * std::pow(10.0, static_cast<double>(i) / kGridPerDecade);
    gaps[static_cast<std::size_t>(i)] = gap(grid[static_cast<std::size_t>(i)]);
    if (!std::isfinite(gaps[static_cast<std::size_t>(i)]))
      throw FixedPointError("fixed point map is not finite at beta = " +
                            std::to_string(grid[static_cast<std::size_t>(i)]));
  }

  std::vector<double> stable;
  // below the grid floor only a collapse onto beta = 0 remains
  if (gaps.front() < 0.0) stable.push_back(0.0);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    if (!(gaps[i] > 0.0 && gaps[i + 1] <= 0.0)) continue;
    if (gaps[i + 1] == 0.0) {
      stable.push_back(grid[i + 1]);
      continue;
    }
    auto tol = [](double lo, double hi) { return hi - lo <= kRootTolerance * lo; };
    std::uintmax_t max_iter = 200;
    const auto [lo, hi] = boost::math::tools::toms748_solve(gap, grid[i], grid[i + 1], gaps[i],
                                                            gaps[i + 1], tol, max_iter);
    stable.push_back(0.5 * (lo + hi));
  }
  if (stable.empty()) throw FixedPointError("no stable fixed point in [0, 1]");

  std::sort(stable.begin(), stable.end(), std::greater<>());
  std::vector<double> distinct;
  for (double b : stable) {
    if (distinct.empty() || distinct.back() - b > kMergeRadius) distinct.push_back(b);
  }

  const double pick = spec.choice == FixedPointChoice::largest ? distinct.front() : distinct.back();
  ExternalChainSolution out = solution_at(spec, pick);
  out.fixed_points_found = std::move(distinct);
  out.iterations = evaluations;
  return out;
}

ExternalChainSolution solve_nearest(const ExternalChainSpec& spec, double empirical_beta) {
  if (!(empirical_beta >= 0.0 && empirical_beta <= 1.0))
    throw InvalidArgument("empirical beta must lie in [0, 1]");
  const ExternalChainSolution solved = solve_fixed_point(spec);
  const auto& roots = solved.fixed_points_found;
  const double pick = *std::min_element(roots.begin(), roots.end(), [&](double a, double b) {
    return std::abs(a - empirical_beta) < std::abs(b - empirical_beta);
  });
  if (pick == solved.beta) return solved;
  ExternalChainSolution out = solution_at(spec, pick);
  out.fixed_points_found = roots;
  out.iterations = solved.iterations;
  return out;
}

FrameAaoiTerms frame_aaoi_terms(std::int64_t l, std::int64_t k, int frame_len) {
  if (l < 0 || k < 0) throw InvalidArgument("state indices must be nonnegative");
  if (frame_len < 1) throw InvalidArgument("frame_len must be >= 1");
  const double d = frame_len;
  const double half = (d - 1.0) / 2.0;
  FrameAaoiTerms out;
  out.on_success.resize(static_cast<std::size_t>(frame_len));
  for (int nu = 0; nu < frame_len; ++nu)
    out.on_success[static_cast<std::size_t>(nu)] =
        static_cast<double>(l) * d + static_cast<double>(k) * (nu + 1) + half;
  out.no_success = static_cast<double>(l + k) * d + half;
  return out;
}

double network_aaoi(const ExternalChainSolution& solution, const ExternalChainSpec& spec) {
  spec.validate();
  const int frame_len = spec.cfg.frame_len;
  if (solution.alpha.size() != static_cast<std::size_t>(frame_len))
    throw InvalidArgument("alpha length must equal D");
  const double d = frame_len;
  const double half = (d - 1.0) / 2.0;
  const double miss = 1.0 - solution.beta;
  double success_mass = 0.0;
  double success_weight = 0.0;  // sum_nu alpha_nu (nu + 1)
  for (int nu = 0; nu < frame_len; ++nu) {
    success_mass += solution.alpha[static_cast<std::size_t>(nu)];
    success_weight += solution.alpha[static_cast<std::size_t>(nu)] * (nu + 1);
  }

  const auto& pi = solution.pi;
  double total = 0.0;
  for (std::size_t k = 0; k < pi.col_mass.size(); ++k) {
    const double m0 = pi.col_mass[k];
    const double m1 = pi.col_moment[k];
    if (m0 == 0.0 && m1 == 0.0) continue;
    const double kk = static_cast<double>(k);
    if (static_cast<int>(k) >= pi.gamma) {
      const double w = success_mass + miss;
      total += m1 * d * w + m0 * (kk * (success_weight + miss * d) + half * w);
    } else {
      total += m1 * d + m0 * (kk * d + half);
    }
  }
  {
    // columns past the cap are all active and share the decay a
    const double a = pi.decay(pi.trunc_k() + 1);
    const double w = success_mass + miss;
    const double m0 = pi.tail_row0_sum / (1.0 - a);
    const double m1 = pi.tail_row0_sum * a / ((1.0 - a) * (1.0 - a));
    const double km0 = pi.tail_row0_moment / (1.0 - a);
    total += m1 * d * w + km0 * (success_weight + miss * d) + m0 * half * w;
  }
  return total;
}

double analytic_aaoi(const NetworkConfig& cfg, const AccessParams& params,
                     FixedPointChoice choice) {
  auto spec = ExternalChainSpec::from_params(cfg, params);
  spec.choice = choice;
  return network_aaoi(solve_fixed_point(spec), spec);
}

void write_pi_csv(std::ostream& os, const SteadyState& pi, int max_l) {
  os << "l,k,pi\n";
  const auto old_precision = os.precision(17);
  for (int l = 0; l <= max_l; ++l) {
    for (int k = 0; k <= pi.trunc_k(); ++k) {
      const double v = pi.at(l, k);
      if (v > 0.0) os << l << ',' << k << ',' << v << '\n';
    }
  }
  os.precision(old_precision);
}

void write_alpha_csv(std::ostream& os, const ExternalChainSolution& solution) {
  os << "nu,alpha\n";
  const auto old_precision = os.precision(17);
  for (std::size_t nu = 0; nu < solution.alpha.size(); ++nu)
    os << nu << ',' << solution.alpha[nu] << '\n';
  os.precision(old_precision);
}

}  // namespace agdsa::analytic
