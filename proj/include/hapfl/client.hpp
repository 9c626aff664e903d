#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hapfl/data.hpp"
#include "hapfl/nn.hpp"

namespace hapfl::client {

/// One allocatable model size. cost_ratio is the per-epoch time of this
/// architecture relative to the LiteModel.
struct ModelTier {
  int tier_id = 0;
  nn::NetworkSpec spec;
  double cost_ratio = 1.0;
  int min_params = 0;
};

/// The LiteModel plus the ordered local-model tiers 1..delta.
struct TierCatalog {
  ModelTier lite;
  std::vector<ModelTier> tiers;

  int n_tiers() const { return static_cast<int>(tiers.size()); }
  const ModelTier& tier(int tier_id) const;
  /// Checks: ids are 1..delta in order; every spec valid; cost ratios >= 1
  /// and non-decreasing with parameter count; every spec meets its tier's
  /// parameter floor; lite cost_ratio is 1.
  void validate() const;
};

struct ClientProfile {
  int client_id = 0;
  double psi = 1.0;   // sim-seconds per sample per unit cost, current
  double psi0 = 1.0;  // initial value; drift clamps to [psi0/10, 10*psi0]
  double drift_sigma = 0.02;
  data::Dataset dataset;
  double entropy_H = 0.0;
};

struct ClientRoundReport {
  int client_id = 0;
  double assess_time = 0.0;  // T^d
  double local_time = 0.0;   // T^l
  double acc = 0.0;
  double entropy_H = 0.0;
  nn::ParamVector lite_params;
  nn::ParamVector local_params;
  int tier_id = 0;
  int epochs = 0;  // tau
};

/// Per-epoch cost without jitter: psi * |dataset| * cost_ratio.
double epoch_time_core(const ClientProfile& profile, const ModelTier& tier);

/// epoch_time_core scaled by u ~ Uniform[0.95, 1.05] drawn from jitter_seed.
double epoch_time(const ClientProfile& profile, const ModelTier& tier,
                  std::uint64_t jitter_seed);

/// Multiplicative random-walk step on psi, clamped to [psi0/10, 10*psi0].
void drift_psi(ClientProfile& profile, std::uint64_t seed);

/// Assessment phase: exactly one cross-entropy epoch of the LiteModel on the
/// local shard. Returns the measured duration T^d and the updated parameters
/// (the work is kept, not discarded).
std::pair<double, nn::ParamVector> assess(const ClientProfile& profile,
                                          const nn::ParamVector& lite_params,
                                          const ModelTier& lite_tier,
                                          double eta, std::uint64_t round_seed);

struct TrainParams {
  double lambda1 = 0.4;  // local-model CE weight
  double lambda2 = 0.6;  // local-model KL weight
  double lambda3 = 0.5;  // lite CE weight
  double lambda4 = 0.5;  // lite KL weight
  double eta = 0.0003;
};

/// tau epochs of alternating mutual distillation. Per minibatch the local
/// model steps against the current LiteModel's frozen logits, then the
/// LiteModel steps against the just-updated local model's frozen logits.
/// Both models train every epoch, so each epoch costs one tier epoch plus
/// one LiteModel epoch. Accuracy is the local model's on `test`.
ClientRoundReport local_train(const ClientProfile& profile,
                              nn::ParamVector lite_params,
                              nn::ParamVector local_params,
                              const ModelTier& tier, const ModelTier& lite_tier,
                              int tau, const TrainParams& tp,
                              const data::Dataset& test,
                              std::uint64_t round_seed);

/// Max minus min of client compute time: T^d + T^l when include_assessment,
/// else T^l alone.
double straggling_latency(const std::vector<ClientRoundReport>& reports,
                          bool include_assessment);

}  // namespace hapfl::client
