#include "hapfl/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hapfl/errors.hpp"

namespace hapfl::agg {

namespace {

std::vector<double> softmax(const std::vector<double>& x) {
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  std::vector<double> p(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    p[i] = std::exp(x[i] - mx);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

}  // namespace

AggregationWeights compute_weights(const std::vector<double>& entropies,
                                   const std::vector<double>& accuracies,
                                   const std::vector<int>& client_ids) {
  if (entropies.empty() || entropies.size() != accuracies.size())
    throw ContractError("entropy and accuracy lists must align");
  if (!client_ids.empty() && client_ids.size() != entropies.size())
    throw ContractError("client id list must align with metrics");
  for (double h : entropies)
    if (h < 0.0) throw ContractError("entropy must be non-negative");
  for (double a : accuracies)
    if (a < 0.0 || a > 1.0)
      throw ContractError("accuracy must lie in [0, 1]");

  const std::vector<double> ph = softmax(entropies);
  const std::vector<double> pa = softmax(accuracies);
  AggregationWeights out;
  out.weights.reserve(entropies.size());
  for (std::size_t i = 0; i < entropies.size(); ++i) {
    const int id = client_ids.empty() ? static_cast<int>(i) : client_ids[i];
    out.weights.emplace_back(id, 0.5 * (ph[i] + pa[i]));
  }
  return out;
}

nn::ParamVector aggregate(const nn::ParamVector& global,
                          const std::vector<nn::ParamVector>& members,
                          const AggregationWeights& weights, Form form) {
  if (members.empty()) throw ContractError("aggregate needs members");
  if (weights.weights.size() != members.size())
    throw ContractError("weights do not align with members");
  double wsum = 0.0;
  for (const auto& [id, w] : weights.weights) {
    if (w <= 0.0) throw ContractError("aggregation weights must be positive");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-9)
    throw ContractError("aggregation weights must sum to 1");
  for (const nn::ParamVector& m : members) {
    if (m.spec_id != global.spec_id)
      throw ContractError("member spec '" + m.spec_id +
                          "' does not match global '" + global.spec_id + "'");
    if (m.values.size() != global.values.size())
      throw ContractError("member parameter count mismatch");
  }

  nn::ParamVector out = global;
  for (std::size_t i = 0; i < members.size(); ++i) {
    const double w = weights.weights[i].second;
    const std::vector<double>& mv = members[i].values;
    if (form == Form::kDelta) {
      for (std::size_t j = 0; j < out.values.size(); ++j)
        out.values[j] += w * (mv[j] - global.values[j]);
    } else {
      for (std::size_t j = 0; j < out.values.size(); ++j)
        out.values[j] += w * mv[j];
    }
  }
  return out;
}

GlobalModels aggregate_round(const GlobalModels& current,
                             const std::vector<nn::ParamVector>& lite_members,
                             const AggregationWeights& lite_weights,
                             const std::vector<ModelGroup>& groups,
                             const std::vector<AggregationWeights>& group_weights,
                             Form form) {
  if (groups.size() != group_weights.size())
    throw ContractError("group weights do not align with groups");
  GlobalModels next = current;
  next.lite = aggregate(current.lite, lite_members, lite_weights, form);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const ModelGroup& group = groups[g];
    if (group.members.empty())
      throw ContractError("model group " + std::to_string(group.tier_id) +
                          " has no members");
    auto it = current.per_tier.find(group.tier_id);
    if (it == current.per_tier.end())
      throw ContractError("no global model for tier " +
                          std::to_string(group.tier_id));
    std::vector<nn::ParamVector> members;
    members.reserve(group.members.size());
    for (const auto& [id, params] : group.members) members.push_back(params);
    next.per_tier[group.tier_id] =
        aggregate(it->second, members, group_weights[g], form);
  }
  return next;
}

}  // namespace hapfl::agg
