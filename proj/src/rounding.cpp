#include "hapfl/rounding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hapfl/errors.hpp"

namespace hapfl {

std::vector<int> largest_remainder(const std::vector<double>& shares,
                                   int total) {
  if (shares.empty()) throw ContractError("largest_remainder: empty shares");
  if (total < 0) throw ContractError("largest_remainder: negative total");
  double sum = 0.0;
  for (double s : shares) {
    if (s < 0.0) throw ContractError("largest_remainder: negative share");
    sum += s;
  }
  if (sum <= 0.0) throw ContractError("largest_remainder: zero share sum");

  const std::size_t n = shares.size();
  std::vector<int> counts(n);
  std::vector<double> frac(n);
  int assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double quota = shares[i] / sum * total;
    counts[i] = static_cast<int>(std::floor(quota));
    frac[i] = quota - counts[i];
    assigned += counts[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&frac](std::size_t a, std::size_t b) {
                     return frac[a] > frac[b];
                   });
  for (int left = total - assigned, j = 0; left > 0; --left, ++j)
    ++counts[order[static_cast<std::size_t>(j) % n]];
  return counts;
}

}  // namespace hapfl
