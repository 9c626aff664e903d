#pragma once

#include <vector>

namespace hapfl {

/// Splits `total` into integer counts proportional to `shares` by the
/// largest-remainder method: floor each quota, then hand out the leftover
/// units in order of descending fractional part (ties to the lowest index).
/// Shares must be non-negative with a positive sum.
std::vector<int> largest_remainder(const std::vector<double>& shares,
                                   int total);

}  // namespace hapfl
