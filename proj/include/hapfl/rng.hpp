#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace hapfl::rng {

/// Stream purposes. Each (tag, a, b) triple names one independent stream
/// derived from the experiment seed; keep values unique across the codebase.
enum Tag : std::uint64_t {
  kTagBlobNoise = 1,
  kTagPartition = 2,
  kTagModelInit = 3,
  kTagJitter = 4,
  kTagDrift = 5,
  kTagShuffle = 6,
  kTagSelect = 7,
  kTagPpo1 = 8,
  kTagPpo2 = 9,
  kTagClientRound = 10,
  kTagPsi = 11,
  kTagAgentInit = 12,
};

/// Mixes a seed with tag/index values into a new stream seed. Used to derive
/// independent per-purpose streams (per round, per client, per epoch) from a
/// single experiment seed without any shared sequential state.
std::uint64_t derive(std::uint64_t seed, std::uint64_t tag,
                     std::uint64_t a = 0, std::uint64_t b = 0);

/// Deterministic random stream. All distribution transforms are implemented
/// by hand on top of mt19937_64 so that sequences are identical across
/// standard libraries and compilers.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  int uniform_int(int n);
  /// Standard normal via Box-Muller.
  double normal();
  /// Gamma(shape, 1) via Marsaglia-Tsang, any shape > 0.
  double gamma(double shape);
  /// Dirichlet(alpha * 1_n) sample on the n-simplex.
  std::vector<double> dirichlet_symmetric(double alpha, int n);
  /// Dirichlet(concentration) sample.
  std::vector<double> dirichlet(const std::vector<double>& concentration);

 private:
  std::mt19937_64 eng_;
};

}  // namespace hapfl::rng
