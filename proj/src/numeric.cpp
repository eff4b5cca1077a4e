#include "agdsa/numeric.hpp"

#include <algorithm>
#include <cmath>

#include "agdsa/core.hpp"

namespace agdsa {

std::vector<double> binomial_pmf(int trials, double q) {
  if (trials < 0) throw InvalidArgument("binomial_pmf: trials must be >= 0");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("binomial_pmf: q must lie in [0, 1]");
  const auto size = static_cast<std::size_t>(trials) + 1;
  std::vector<double> pmf(size, 0.0);
  if (q == 0.0) {
    pmf.front() = 1.0;
    return pmf;
  }
  if (q == 1.0) {
    pmf.back() = 1.0;
    return pmf;
  }
  const double odds = q / (1.0 - q);
  const int mode = std::min(trials, static_cast<int>(std::floor((trials + 1) * q)));
  pmf[static_cast<std::size_t>(mode)] = 1.0;
  // pmf(u+1)/pmf(u) = (trials-u)/(u+1) * odds
  for (int u = mode; u < trials; ++u) {
    pmf[static_cast<std::size_t>(u) + 1] =
        pmf[static_cast<std::size_t>(u)] * (trials - u) / (u + 1.0) * odds;
  }
  for (int u = mode; u > 0; --u) {
    pmf[static_cast<std::size_t>(u) - 1] =
        pmf[static_cast<std::size_t>(u)] * u / ((trials - u + 1.0) * odds);
  }
  double total = 0.0;
  for (double v : pmf) total += v;
  for (double& v : pmf) v /= total;
  return pmf;
}

}  // namespace agdsa
