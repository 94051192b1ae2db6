#ifndef DOSEINS_PAVA_HPP
#define DOSEINS_PAVA_HPP

#include <span>
#include <vector>

namespace doseins {

/// Weighted isotonic (nondecreasing) regression by pool-adjacent-violators.
/// Weights must be positive; the result has the same length as `values`.
std::vector<double> isotonic_increasing(std::span<const double> values,
                                        std::span<const double> weights);

}  // namespace doseins

#endif  // DOSEINS_PAVA_HPP
