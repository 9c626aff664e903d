#include "hapfl/rng.hpp"

#include <cmath>

#include "hapfl/errors.hpp"

namespace hapfl::rng {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive(std::uint64_t seed, std::uint64_t tag, std::uint64_t a,
                     std::uint64_t b) {
  std::uint64_t h = splitmix64(seed ^ 0x5851f42d4c957f2dULL);
  h = splitmix64(h ^ tag);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return h;
}

double Stream::uniform() {
  // 53 mantissa bits, value in [0, 1).
  return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double Stream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

int Stream::uniform_int(int n) {
  if (n <= 0) throw ContractError("uniform_int: n must be positive");
  // Rejection-free for our purposes; bias is negligible for small n.
  return static_cast<int>(eng_() % static_cast<std::uint64_t>(n));
}

double Stream::normal() {
  double u1 = 1.0 - uniform();  // (0, 1]
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Stream::gamma(double shape) {
  if (shape <= 0.0) throw ContractError("gamma: shape must be positive");
  if (shape < 1.0) {
    // Boost: Gamma(a) = Gamma(a+1) * U^(1/a).
    double g = gamma(shape + 1.0);
    double u = 1.0 - uniform();
    return g * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    double v = t * t * t;
    double u = 1.0 - uniform();
    double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> Stream::dirichlet_symmetric(double alpha, int n) {
  std::vector<double> conc(static_cast<std::size_t>(n), alpha);
  return dirichlet(conc);
}

std::vector<double> Stream::dirichlet(const std::vector<double>& concentration) {
  std::vector<double> out(concentration.size());
  double total = 0.0;
  for (std::size_t i = 0; i < concentration.size(); ++i) {
    out[i] = gamma(concentration[i]);
    total += out[i];
  }
  if (total <= 0.0) {
    // Extreme underflow; fall back to the uniform point of the simplex.
    double u = 1.0 / static_cast<double>(out.size());
    for (auto& x : out) x = u;
    return out;
  }
  for (auto& x : out) x /= total;
  return out;
}

}  // namespace hapfl::rng
