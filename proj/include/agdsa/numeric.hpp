#pragma once

#include <vector>

namespace agdsa {

/// Binomial(trials, q) pmf over 0..trials, built outward from the mode by
/// ratio recurrences and normalized explicitly so it never underflows to an
/// all-zero vector.
std::vector<double> binomial_pmf(int trials, double q);

}  // namespace agdsa
