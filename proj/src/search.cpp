#include "agdsa/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <utility>

#include "agdsa/analytic.hpp"
#include "agdsa/policies.hpp"

namespace agdsa::search {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTie = 1e-9;
constexpr int kUnboundedGamma = 1 << 20;

class BudgetExhausted {};

class Evaluator {
 public:
  explicit Evaluator(const SearchSpec& spec) : spec_(spec) {}

  double operator()(int gamma, double p) {
    const auto key = std::make_pair(gamma, p);
    if (const auto it = memo_.find(key); it != memo_.end()) return it->second;
    if (static_cast<int>(log_.size()) >= spec_.budget) throw BudgetExhausted{};
    const double v = evaluate(spec_, gamma, p);
    memo_.emplace(key, v);
    log_.push_back({gamma, p, v});
    return v;
  }
  std::vector<Evaluation>& log() noexcept { return log_; }

 private:
  const SearchSpec& spec_;
  std::map<std::pair<int, double>, double> memo_;
  std::vector<Evaluation> log_;
};

// Strictly better, or tied and at smaller p.
bool better(const PResult& a, const PResult& b) {
  if (a.aaoi < b.aaoi - kTie) return true;
  if (a.aaoi > b.aaoi + kTie) return false;
  return a.p < b.p;
}

constexpr int kPrescanPoints = 24;

// Grid points are fixed so that repeated searches under different caps hit
// the memo.
PResult golden_section(Evaluator& eval, int gamma, double tol, double p_cap) {
  const double lo_p = std::min(tol, p_cap);
  std::vector<double> grid;
  for (int i = 0; i <= kPrescanPoints; ++i) {
    const double p = i == kPrescanPoints
                         ? 1.0
                         : tol * std::pow(1.0 / tol, static_cast<double>(i) / kPrescanPoints);
    if (p >= lo_p && p < p_cap) grid.push_back(p);
  }
  grid.push_back(p_cap);
  PResult best{p_cap, kInf};
  std::size_t best_i = grid.size() - 1;
  for (std::size_t i = grid.size(); i-- > 0;) {
    const PResult r{grid[i], eval(gamma, grid[i])};
    if (better(r, best)) {
      best = r;
      best_i = i;
    }
  }
  if (!std::isfinite(best.aaoi)) return best;

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = grid[best_i > 0 ? best_i - 1 : 0];
  double hi = grid[std::min(best_i + 1, grid.size() - 1)];
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = eval(gamma, x1);
  double f2 = eval(gamma, x2);
  if (better({x1, f1}, best)) best = {x1, f1};
  if (better({x2, f2}, best)) best = {x2, f2};
  while (hi - lo > tol) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = eval(gamma, x1);
      if (better({x1, f1}, best)) best = {x1, f1};
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = eval(gamma, x2);
      if (better({x2, f2}, best)) best = {x2, f2};
    }
  }
  return best;
}

// Ties keep the smaller gamma already stored.
void scan_gamma(Evaluator& eval, const SearchSpec& spec, double p_cap, SearchResult& best) {
  const int gamma_hi = spec.gamma_max > 0 ? spec.gamma_max : kUnboundedGamma;
  best.gamma = spec.gamma_min;
  best.p = p_cap;
  best.aaoi = kInf;
  int stale = 0;
  for (int gamma = spec.gamma_min; gamma <= gamma_hi && stale < spec.patience; ++gamma) {
    const PResult r = golden_section(eval, gamma, spec.p_tolerance, p_cap);
    if (r.aaoi < best.aaoi - kTie) {
      best.gamma = gamma;
      best.p = r.p;
      best.aaoi = r.aaoi;
      stale = 0;
    } else {
      ++stale;
    }
  }
}

double simulate_basic(const SearchSpec& spec, int gamma, double p) {
  const BasicParams params{static_cast<std::int64_t>(gamma) * spec.cfg.frame_len, p};
  const SimConfig sim = SimConfig::with_default_warmup(
      spec.cfg, spec.validation_slots, spec.validation_replications, spec.validation_seed);
  return run_experiment(sim, [params] { return std::make_unique<BasicPolicy>(params); },
                        spec.threads)
      .network_aaoi_mean;
}

void hooke_jeeves(Evaluator& eval, const SearchSpec& spec, SearchResult& best) {
  const int gamma_hi = spec.gamma_max > 0 ? spec.gamma_max : kUnboundedGamma;
  const double p_hi = best.p_cap;
  auto clamp_p = [&](double p) { return std::clamp(p, std::min(spec.p_tolerance, p_hi), p_hi); };
  auto probe = [&](int g, double p) -> double {
    if (g < spec.gamma_min || g > gamma_hi) return kInf;
    return eval(g, clamp_p(p));
  };
  double step = 0.05;
  int g = best.gamma;
  double p = best.p;
  double f = best.aaoi;
  while (step >= spec.p_tolerance) {
    // exploratory moves, gamma first
    int ng = g;
    double np = p;
    double nf = f;
    for (int dg : {-1, 1}) {
      const double v = probe(g + dg, np);
      if (v < nf - kTie) {
        ng = g + dg;
        nf = v;
        break;
      }
    }
    for (double dp : {-step, step}) {
      const double v = probe(ng, p + dp);
      if (v < nf - kTie) {
        np = clamp_p(p + dp);
        nf = v;
        break;
      }
    }
    if (nf < f - kTie) {
      // pattern move along the successful direction
      const int pg = ng + (ng - g);
      const double pp = clamp_p(np + (np - p));
      const double pv = probe(pg, pp);
      g = ng;
      p = np;
      f = nf;
      if (pv < f - kTie) {
        g = pg;
        p = pp;
        f = pv;
      }
    } else {
      step /= 2.0;
    }
  }
  if (f < best.aaoi - kTie) {
    best.gamma = g;
    best.p = p;
    best.aaoi = f;
  }
}

}  // namespace

void SearchSpec::validate() const {
  cfg.validate();
  if (gamma_min < 1) throw InvalidArgument("gamma_min must be >= 1");
  if (gamma_max != 0 && gamma_max < gamma_min)
    throw InvalidArgument("gamma_max must be 0 or >= gamma_min");
  if (!(p_tolerance > 0.0 && p_tolerance < 1.0)) throw InvalidArgument("p_tolerance must lie in (0, 1)");
  if (budget < 1) throw InvalidArgument("budget must be >= 1");
  if (patience < 1) throw InvalidArgument("patience must be >= 1");
  if (objective == Objective::simulation) {
    SimConfig s = sim;
    s.net = cfg;
    s.validate();
  }
}

double evaluate(const SearchSpec& spec, int gamma, double p) {
  const BasicParams params{static_cast<std::int64_t>(gamma) * spec.cfg.frame_len, p};
  if (spec.objective == Objective::analytic) {
    try {
      return analytic::analytic_aaoi(spec.cfg, params, spec.fixed_point);
    } catch (const analytic::TruncationError&) {
      return kInf;
    } catch (const analytic::FixedPointError&) {
      return kInf;
    }
  }
  SimConfig sim = spec.sim;
  sim.net = spec.cfg;
  return run_experiment(sim, [params] { return std::make_unique<BasicPolicy>(params); },
                        spec.threads)
      .network_aaoi_mean;
}

PResult optimize_p_given_gamma(const SearchSpec& spec, int gamma, double p_cap) {
  spec.validate();
  if (gamma < spec.gamma_min || (spec.gamma_max != 0 && gamma > spec.gamma_max))
    throw InvalidArgument("gamma outside the search range");
  if (!(p_cap > 0.0 && p_cap <= 1.0)) throw InvalidArgument("p_cap must lie in (0, 1]");
  Evaluator eval(spec);
  return golden_section(eval, gamma, spec.p_tolerance, p_cap);
}

SearchResult optimize_basic(const SearchSpec& spec) {
  spec.validate();
  Evaluator eval(spec);
  SearchResult best;
  const bool check = spec.validate_sim && spec.objective == Objective::analytic;
  try {
    for (int round = 0;; ++round) {
      scan_gamma(eval, spec, best.p_cap, best);
      if (!check || !std::isfinite(best.aaoi)) break;
      const double sim = simulate_basic(spec, best.gamma, best.p);
      best.rounds.push_back({best.p_cap, best.gamma, best.p, best.aaoi, sim});
      if (std::abs(best.aaoi - sim) <= spec.validation_tolerance * sim) {
        best.validated = true;
        break;
      }
      const double next_cap = best.p * spec.p_cap_shrink;
      if (round + 1 >= spec.max_validation_rounds || next_cap < spec.p_tolerance) break;
      best.p_cap = next_cap;
    }
    if (spec.hooke_jeeves && std::isfinite(best.aaoi)) hooke_jeeves(eval, spec, best);
  } catch (const BudgetExhausted&) {
    best.budget_exhausted = true;
    // the interrupted gamma may already hold a better point
    for (const auto& e : eval.log()) {
      if (e.p > best.p_cap || !std::isfinite(e.aaoi)) continue;
      const bool improves = !std::isfinite(best.aaoi) || e.aaoi < best.aaoi - kTie ||
                            (e.aaoi <= best.aaoi + kTie &&
                             (e.gamma < best.gamma || (e.gamma == best.gamma && e.p < best.p)));
      if (improves) {
        best.gamma = e.gamma;
        best.p = e.p;
        best.aaoi = e.aaoi;
        best.validated = false;
      }
    }
  }
  best.threshold = static_cast<std::int64_t>(best.gamma) * spec.cfg.frame_len;
  best.log = std::move(eval.log());
  return best;
}

}  // namespace agdsa::search
