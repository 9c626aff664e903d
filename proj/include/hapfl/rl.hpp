#pragma once

#include <cstdint>
#include <deque>
#include <tuple>
#include <vector>

#include "hapfl/client.hpp"
#include "hapfl/errors.hpp"
#include "hapfl/nn.hpp"

namespace hapfl::rl {

/// Tier id per selected client, each in 1..delta.
struct AllocationAction {
  std::vector<int> tiers;
};

/// Normalized training-intensity shares and the integer epochs they round to.
struct IntensityAction {
  std::vector<double> sigma;  // simplex
  std::vector<int> tau;       // sum = tau_total, every entry >= 1
};

template <typename A>
struct Transition {
  std::vector<double> state;  // raw (unfeaturized), length k
  A action;
  double log_prob = 0.0;
  double reward = 0.0;
  double value_estimate = 0.0;
};

/// Bounded FIFO of transitions; pushing past capacity drops the oldest.
template <typename A>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw ContractError("buffer capacity must be >= 1");
  }

  void push(Transition<A> t) {
    items_.push_back(std::move(t));
    if (static_cast<int>(items_.size()) > capacity_) items_.pop_front();
  }
  bool full() const { return static_cast<int>(items_.size()) == capacity_; }
  int size() const { return static_cast<int>(items_.size()); }
  int capacity() const { return capacity_; }
  const std::deque<Transition<A>>& items() const { return items_; }
  void clear() { items_.clear(); }

 private:
  int capacity_;
  std::deque<Transition<A>> items_;
};

struct PpoConfig {
  double clip_eps = 0.2;
  double gamma = 0.9;
  double actor_lr = 0.02;
  double critic_lr = 0.02;
  int update_epochs = 4;
  int hidden = 32;
};

enum class AgentKind { kAllocation, kIntensity };

/// Actor-critic pair with Adam state and a running reward normalizer.
/// Network inputs are the elementwise natural log of the state (states are
/// >= 1 by construction, so inputs stay in a tame range).
struct PpoAgent {
  AgentKind kind = AgentKind::kAllocation;
  PpoConfig cfg;
  int k = 0;        // state length / client slots
  int n_tiers = 0;  // delta; 0 for the intensity agent
  nn::NetworkSpec actor_spec;
  nn::NetworkSpec critic_spec;
  nn::ParamVector actor_params;
  nn::ParamVector critic_params;
  nn::AdamState actor_opt;
  nn::AdamState critic_opt;
  double reward_scale = 0.0;  // running max |reward| seen by updates
};

/// Tier-allocation agent: actor with k categorical heads over delta tiers.
PpoAgent make_allocation_agent(int k, int delta, const PpoConfig& cfg,
                               std::uint64_t seed);
/// Intensity agent: actor outputs k Dirichlet concentrations.
PpoAgent make_intensity_agent(int k, const PpoConfig& cfg, std::uint64_t seed);

/// Assessment times normalized by their minimum; every entry >= 1.
std::vector<double> ppo1_state(const std::vector<double>& assess_times);

/// Samples one tier per client (argmax per head when eval). Returns the
/// action, its joint log-probability, and the critic's value estimate.
std::tuple<AllocationAction, double, double> ppo1_act(
    const PpoAgent& agent, const std::vector<double>& state,
    std::uint64_t sample_seed, bool eval = false);

/// MD minus the ratio of slowest to fastest per-epoch local time.
double ppo1_reward(const std::vector<double>& local_times,
                   const std::vector<int>& taus, double md);

/// Expected relative training time: cost_ratio(tier) * normalized assess
/// time, per client.
std::vector<double> ppo2_state(const std::vector<double>& normalized_assess,
                               const AllocationAction& tiers,
                               const client::TierCatalog& catalog);

/// Samples intensity shares from Dirichlet(softplus(logits)+1) and rounds
/// them to integer epochs summing to tau_total (mean of the distribution
/// when eval). Returns action, log-density, value estimate.
std::tuple<IntensityAction, double, double> ppo2_act(
    const PpoAgent& agent, const std::vector<double>& state, int tau_total,
    std::uint64_t sample_seed, bool eval = false);

/// Fastest minus slowest local time; always <= 0.
double ppo2_reward(const std::vector<double>& local_times);

/// Largest-remainder rounding of sigma * tau_total with a floor of one epoch
/// per client; the floor's excess is taken back from the largest allocations.
std::vector<int> round_intensities(const std::vector<double>& sigma,
                                   int tau_total);

/// G_t = R_t + gamma * G_{t+1}, terminal bootstrap 0.
std::vector<double> discounted_returns(const std::vector<double>& rewards,
                                       double gamma);

/// Per-sample clipped surrogate: min(ratio*adv, clip(ratio, 1-eps, 1+eps)*adv).
double clipped_objective(double ratio, double advantage, double eps);

/// Runs update_epochs clipped-surrogate passes over the full buffer, then
/// empties it. Advantage = return - critic value (normalized across the
/// batch when it has >= 2 entries); rewards are divided by the agent's
/// running max-abs scale. Throws unless the buffer is full.
void ppo_update(PpoAgent& agent, ReplayBuffer<AllocationAction>& buffer);
void ppo_update(PpoAgent& agent, ReplayBuffer<IntensityAction>& buffer);

double digamma(double x);
double dirichlet_log_pdf(const std::vector<double>& x,
                         const std::vector<double>& concentration);

}  // namespace hapfl::rl
