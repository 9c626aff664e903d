#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hapfl/aggregation.hpp"
#include "hapfl/client.hpp"
#include "hapfl/config.hpp"
#include "hapfl/data.hpp"
#include "hapfl/rl.hpp"

namespace hapfl::orch {

/// Everything recorded about one federated round. Per-client vectors follow
/// the order of `selected`.
struct RoundMetrics {
  int round = 0;
  std::vector<int> selected;          // client ids, ascending
  std::vector<int> tiers;             // assigned tier per selected client
  std::vector<int> taus;              // training epochs per selected client
  std::vector<double> assess_times;   // T^d
  std::vector<double> local_times;    // T^l
  std::vector<double> compute_times;  // T^c = T^d + T^l
  double delta_tc = 0.0;              // max T^c - min T^c
  double total_time = 0.0;            // max T^c + communication constants
  double r1 = 0.0;                    // allocation-agent reward
  double r2 = 0.0;                    // intensity-agent reward
  double acc_lite = 0.0;              // global LiteModel accuracy, post-round
  std::vector<double> acc_tiers;      // per-tier global accuracy, post-round
  std::vector<double> weights;        // LiteModel aggregation weights
};

/// Uniform random subset of size k from clients 0..K-1, returned ascending.
std::vector<int> select_clients(int K, int k, std::uint64_t round_seed);

/// The even split of tau_total across k clients (largest-remainder rounded,
/// sum preserved); the allocation the non-adaptive modes use.
std::vector<int> uniform_intensities(int k, int tau_total);

/// Mutable world state for one experiment: client population, global models,
/// and both agents with their replay buffers.
struct ExperimentState {
  explicit ExperimentState(const ExperimentConfig& cfg);

  ExperimentConfig cfg;
  client::TierCatalog catalog;
  data::Dataset test_set;
  std::vector<client::ClientProfile> profiles;
  agg::GlobalModels globals;
  rl::PpoAgent alloc_agent;
  rl::PpoAgent intensity_agent;
  rl::ReplayBuffer<rl::AllocationAction> alloc_buffer;
  rl::ReplayBuffer<rl::IntensityAction> intensity_buffer;
};

/// Episode reset: reinitializes the global models and restores every
/// client's speed factor; agents and buffers persist.
void reset_environment(ExperimentState& st);

/// One synchronous round: drift, selection, assessment, agent actions
/// (mode-dependent), local training, weighted aggregation, rewards, and
/// buffered agent updates. `round` is the global round index and seeds all
/// per-round randomness.
RoundMetrics run_round(ExperimentState& st, int round);

/// episodes x rounds metric rows with a continuous round index. `on_round`
/// fires after each round, `on_episode_end` after each episode's last round.
std::vector<RoundMetrics> run_experiment(
    const ExperimentConfig& cfg,
    const std::function<void(const RoundMetrics&)>& on_round = {},
    const std::function<void(const ExperimentState&, int episode)>&
        on_episode_end = {});

/// Per-run aggregate statistics; reduction percentages compare against the
/// first run in the list.
struct RunSummary {
  std::string label;
  int rounds = 0;
  double mean_delta_tc = 0.0;
  double median_delta_tc = 0.0;
  double total_time = 0.0;  // summed over rounds
  double final_acc_lite = 0.0;
  double final_acc_small = 0.0;  // first tier
  double final_acc_large = 0.0;  // last tier
  double straggling_latency_reduction_pct = 0.0;
  double total_time_reduction_pct = 0.0;
};

/// Summarizes >= 2 runs of equal length. Throws ConfigError on mismatched
/// round counts.
std::vector<RunSummary> compare_runs(
    const std::vector<std::string>& labels,
    const std::vector<std::vector<RoundMetrics>>& runs);

}  // namespace hapfl::orch
