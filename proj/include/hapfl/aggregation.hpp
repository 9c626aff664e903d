#pragma once

#include <map>
#include <utility>
#include <vector>

#include "hapfl/nn.hpp"

namespace hapfl::agg {

/// Per-client aggregation weights; a simplex over the round's participants.
struct AggregationWeights {
  std::vector<std::pair<int, double>> weights;  // (client_id, w)

  std::vector<double> values() const {
    std::vector<double> v;
    v.reserve(weights.size());
    for (const auto& [id, w] : weights) v.push_back(w);
    return v;
  }
};

/// Participants that trained the same local-model tier this round.
struct ModelGroup {
  int tier_id = 0;
  std::vector<std::pair<int, nn::ParamVector>> members;  // (client_id, params)
};

enum class Form { kDelta, kLiteral };

struct GlobalModels {
  nn::ParamVector lite;
  std::map<int, nn::ParamVector> per_tier;  // tier_id -> global params
};

/// W = (softmax(H) + softmax(acc)) / 2. client_ids defaults to 0..n-1.
AggregationWeights compute_weights(const std::vector<double>& entropies,
                                   const std::vector<double>& accuracies,
                                   const std::vector<int>& client_ids = {});

/// Delta form: global + sum w_i * (member_i - global), a weighted average of
/// client results anchored at the shared starting point. Literal form:
/// global + sum w_i * member_i, which grows without bound and exists only to
/// demonstrate why it is not used.
nn::ParamVector aggregate(const nn::ParamVector& global,
                          const std::vector<nn::ParamVector>& members,
                          const AggregationWeights& weights,
                          Form form = Form::kDelta);

/// Applies aggregate to the LiteModel and to each tier group with that
/// group's own weights. Tiers with no participants keep their previous
/// global unchanged.
GlobalModels aggregate_round(const GlobalModels& current,
                             const std::vector<nn::ParamVector>& lite_members,
                             const AggregationWeights& lite_weights,
                             const std::vector<ModelGroup>& groups,
                             const std::vector<AggregationWeights>& group_weights,
                             Form form = Form::kDelta);

}  // namespace hapfl::agg
