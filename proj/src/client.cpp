#include "hapfl/client.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hapfl/errors.hpp"
#include "hapfl/rng.hpp"

namespace hapfl::client {

namespace {

constexpr int kBatchSize = 64;

// Jitter stream sub-indices within a round (derive b argument).
constexpr std::uint64_t kJitterTierModel = 0;
constexpr std::uint64_t kJitterLiteModel = 1;
constexpr std::uint64_t kJitterAssess = 2;

nn::Matrix rows_of(const data::Dataset& ds, const std::vector<int>& idx) {
  nn::Matrix m(static_cast<int>(idx.size()), ds.dim());
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (int c = 0; c < ds.dim(); ++c)
      m.at(static_cast<int>(r), c) = ds.inputs.at(idx[r], c);
  return m;
}

std::vector<int> labels_of(const data::Dataset& ds,
                           const std::vector<int>& idx) {
  std::vector<int> y(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r)
    y[r] = ds.labels[static_cast<std::size_t>(idx[r])];
  return y;
}

/// Deterministic Fisher-Yates over sample indices.
std::vector<int> shuffled_indices(int n, rng::Stream& s) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = n - 1; i > 0; --i)
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[static_cast<std::size_t>(s.uniform_int(i + 1))]);
  return idx;
}

}  // namespace

const ModelTier& TierCatalog::tier(int tier_id) const {
  for (const ModelTier& t : tiers)
    if (t.tier_id == tier_id) return t;
  throw ContractError("unknown tier id " + std::to_string(tier_id));
}

void TierCatalog::validate() const {
  if (tiers.empty()) throw ContractError("tier catalog is empty");
  lite.spec.validate();
  if (lite.cost_ratio != 1.0)
    throw ContractError("LiteModel cost ratio must be 1");
  if (lite.spec.param_count() < lite.min_params)
    throw ContractError("LiteModel below its parameter floor");
  int prev_params = 0;
  double prev_cost = 0.0;
  for (std::size_t i = 0; i < tiers.size(); ++i) {
    const ModelTier& t = tiers[i];
    if (t.tier_id != static_cast<int>(i) + 1)
      throw ContractError("tier ids must be 1..delta in order, got " +
                          std::to_string(t.tier_id) + " at position " +
                          std::to_string(i));
    t.spec.validate();
    if (t.cost_ratio < 1.0)
      throw ContractError("tier " + std::to_string(t.tier_id) +
                          " cost ratio below 1");
    const int params = t.spec.param_count();
    if (params < t.min_params)
      throw ContractError("tier " + std::to_string(t.tier_id) +
                          " parameter count " + std::to_string(params) +
                          " below floor " + std::to_string(t.min_params));
    if (params >= prev_params && t.cost_ratio < prev_cost)
      throw ContractError("tier cost ratios must be non-decreasing with size");
    prev_params = params;
    prev_cost = t.cost_ratio;
  }
}

double epoch_time_core(const ClientProfile& profile, const ModelTier& tier) {
  if (profile.psi <= 0.0) throw ContractError("psi must be positive");
  if (profile.dataset.size() < 1) throw ContractError("client has no data");
  return profile.psi * profile.dataset.size() * tier.cost_ratio;
}

double epoch_time(const ClientProfile& profile, const ModelTier& tier,
                  std::uint64_t jitter_seed) {
  rng::Stream s(jitter_seed);
  return epoch_time_core(profile, tier) * s.uniform(0.95, 1.05);
}

void drift_psi(ClientProfile& profile, std::uint64_t seed) {
  rng::Stream s(seed);
  profile.psi *= std::exp(profile.drift_sigma * s.normal());
  profile.psi =
      std::clamp(profile.psi, profile.psi0 / 10.0, profile.psi0 * 10.0);
}

namespace {

/// One pass over the shard in shuffled minibatches. `step` receives the
/// minibatch inputs and labels and applies whatever update it wants.
template <typename Step>
void for_each_minibatch(const data::Dataset& ds, rng::Stream& order,
                        Step&& step) {
  const std::vector<int> idx = shuffled_indices(ds.size(), order);
  const int n = ds.size();
  for (int start = 0; start < n; start += kBatchSize) {
    const int end = std::min(start + kBatchSize, n);
    std::vector<int> batch(idx.begin() + start, idx.begin() + end);
    step(rows_of(ds, batch), labels_of(ds, batch));
  }
}

}  // namespace

std::pair<double, nn::ParamVector> assess(const ClientProfile& profile,
                                          const nn::ParamVector& lite_params,
                                          const ModelTier& lite_tier,
                                          double eta,
                                          std::uint64_t round_seed) {
  nn::ParamVector params = lite_params;
  rng::Stream order(rng::derive(round_seed, rng::kTagShuffle, 0, kJitterAssess));
  for_each_minibatch(profile.dataset, order,
                     [&](const nn::Matrix& x, const std::vector<int>& y) {
                       auto [loss, g] = nn::gradient(params, lite_tier.spec, x,
                                                     nn::make_ce_loss_fn(y));
                       (void)loss;
                       params = nn::sgd_step(params, g, eta);
                     });
  const double td = epoch_time(
      profile, lite_tier,
      rng::derive(round_seed, rng::kTagJitter, 0, kJitterAssess));
  return {td, std::move(params)};
}

ClientRoundReport local_train(const ClientProfile& profile,
                              nn::ParamVector lite_params,
                              nn::ParamVector local_params,
                              const ModelTier& tier, const ModelTier& lite_tier,
                              int tau, const TrainParams& tp,
                              const data::Dataset& test,
                              std::uint64_t round_seed) {
  if (tau < 1) throw ContractError("training intensity must be at least 1");
  if (std::abs(tp.lambda1 + tp.lambda2 - 1.0) > 1e-9 ||
      std::abs(tp.lambda3 + tp.lambda4 - 1.0) > 1e-9)
    throw ContractError("distillation weights must sum to 1 per model");

  double local_time = 0.0;
  for (int e = 0; e < tau; ++e) {
    rng::Stream order(rng::derive(round_seed, rng::kTagShuffle, e));
    for_each_minibatch(
        profile.dataset, order,
        [&](const nn::Matrix& x, const std::vector<int>& y) {
          nn::Matrix lite_logits = nn::forward(lite_params, lite_tier.spec, x);
          auto [l1, g1] = nn::gradient(
              local_params, tier.spec, x,
              nn::make_mutual_loss_fn(lite_logits, y, tp.lambda1, tp.lambda2));
          (void)l1;
          local_params = nn::sgd_step(local_params, g1, tp.eta);

          nn::Matrix local_logits = nn::forward(local_params, tier.spec, x);
          auto [l2, g2] = nn::gradient(
              lite_params, lite_tier.spec, x,
              nn::make_mutual_loss_fn(local_logits, y, tp.lambda3, tp.lambda4));
          (void)l2;
          lite_params = nn::sgd_step(lite_params, g2, tp.eta);
        });
    local_time += epoch_time(
        profile, tier, rng::derive(round_seed, rng::kTagJitter, e, kJitterTierModel));
    local_time += epoch_time(
        profile, lite_tier,
        rng::derive(round_seed, rng::kTagJitter, e, kJitterLiteModel));
  }

  ClientRoundReport report;
  report.client_id = profile.client_id;
  report.local_time = local_time;
  report.acc = nn::accuracy(local_params, tier.spec, test.inputs, test.labels);
  report.entropy_H = profile.entropy_H;
  report.lite_params = std::move(lite_params);
  report.local_params = std::move(local_params);
  report.tier_id = tier.tier_id;
  report.epochs = tau;
  return report;
}

double straggling_latency(const std::vector<ClientRoundReport>& reports,
                          bool include_assessment) {
  if (reports.size() < 2)
    throw ContractError("straggling latency needs at least 2 reports");
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const ClientRoundReport& r : reports) {
    const double t = include_assessment ? r.assess_time + r.local_time
                                        : r.local_time;
    if (first) {
      lo = hi = t;
      first = false;
    } else {
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
  }
  return hi - lo;
}

}  // namespace hapfl::client
