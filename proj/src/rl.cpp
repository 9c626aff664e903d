#include "hapfl/rl.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hapfl/rng.hpp"
#include "hapfl/rounding.hpp"

namespace hapfl::rl {

namespace {

constexpr double kProbFloor = 1e-12;

void check_cfg(const PpoConfig& cfg) {
  if (cfg.clip_eps <= 0.0 || cfg.clip_eps >= 1.0)
    throw ContractError("clip epsilon must lie in (0, 1)");
  if (cfg.gamma < 0.0 || cfg.gamma > 1.0)
    throw ContractError("gamma must lie in [0, 1]");
  if (cfg.actor_lr <= 0.0 || cfg.critic_lr <= 0.0)
    throw ContractError("learning rates must be positive");
  if (cfg.update_epochs < 1) throw ContractError("update_epochs must be >= 1");
  if (cfg.hidden < 1) throw ContractError("hidden width must be >= 1");
}

/// States are >= 1 by construction; networks see their logs.
nn::Matrix featurize(const std::vector<double>& state) {
  nn::Matrix m(1, static_cast<int>(state.size()));
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state[i] <= 0.0)
      throw ContractError("state entries must be positive");
    m.v[i] = std::log(state[i]);
  }
  return m;
}

template <typename A>
nn::Matrix featurize_batch(const ReplayBuffer<A>& buffer, int k) {
  nn::Matrix m(buffer.size(), k);
  int r = 0;
  for (const Transition<A>& t : buffer.items()) {
    if (static_cast<int>(t.state.size()) != k)
      throw ContractError("transition state length does not match agent");
    for (int c = 0; c < k; ++c) {
      if (t.state[static_cast<std::size_t>(c)] <= 0.0)
        throw ContractError("state entries must be positive");
      m.at(r, c) = std::log(t.state[static_cast<std::size_t>(c)]);
    }
    ++r;
  }
  return m;
}

double softplus(double z) {
  if (z > 30.0) return z;
  if (z < -30.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double critic_value(const PpoAgent& agent, const nn::Matrix& x) {
  return nn::forward(agent.critic_params, agent.critic_spec, x).at(0, 0);
}

void check_state(const PpoAgent& agent, const std::vector<double>& state) {
  if (static_cast<int>(state.size()) != agent.k)
    throw ContractError("state length " + std::to_string(state.size()) +
                        " does not match agent k=" + std::to_string(agent.k));
}

/// Joint categorical log-prob over the k heads and its gradient with respect
/// to the actor's logit row. grad may be null.
double alloc_log_prob(const double* z, int k, int delta,
                      const std::vector<int>& tiers, double* grad) {
  double logp = 0.0;
  for (int h = 0; h < k; ++h) {
    const double* zh = z + static_cast<std::size_t>(h) * delta;
    const int a = tiers[static_cast<std::size_t>(h)] - 1;
    double mx = zh[0];
    for (int j = 1; j < delta; ++j) mx = std::max(mx, zh[j]);
    double total = 0.0;
    for (int j = 0; j < delta; ++j) total += std::exp(zh[j] - mx);
    const double lse = mx + std::log(total);
    logp += zh[a] - lse;
    if (grad) {
      double* gh = grad + static_cast<std::size_t>(h) * delta;
      for (int j = 0; j < delta; ++j) {
        const double p = std::exp(zh[j] - lse);
        gh[j] = (j == a ? 1.0 : 0.0) - p;
      }
    }
  }
  return logp;
}

/// Dirichlet log-density of the stored sigma under concentrations
/// c = softplus(z) + 1, with its gradient with respect to z. grad may be
/// null.
double intensity_log_prob(const double* z, int k,
                          const std::vector<double>& sigma, double* grad) {
  double csum = 0.0, logp = 0.0;
  std::vector<double> c(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    c[static_cast<std::size_t>(i)] = softplus(z[i]) + 1.0;
    csum += c[static_cast<std::size_t>(i)];
  }
  logp += std::lgamma(csum);
  for (int i = 0; i < k; ++i) {
    const double ci = c[static_cast<std::size_t>(i)];
    const double xi = std::max(sigma[static_cast<std::size_t>(i)], kProbFloor);
    logp -= std::lgamma(ci);
    logp += (ci - 1.0) * std::log(xi);
  }
  if (grad) {
    const double dg_sum = digamma(csum);
    for (int i = 0; i < k; ++i) {
      const double ci = c[static_cast<std::size_t>(i)];
      const double xi = std::max(sigma[static_cast<std::size_t>(i)], kProbFloor);
      grad[i] = (dg_sum - digamma(ci) + std::log(xi)) * logistic(z[i]);
    }
  }
  return logp;
}

/// Fresh policies start anchored to the uniform baseline: allocation leans
/// toward the small tier and intensity concentrations start moderately
/// peaked, so untrained rounds behave close to fedavg_uniform instead of
/// paying a large exploration penalty.
constexpr double kSmallTierBias = 1.5;
constexpr double kConcentrationBias = 2.0;

}  // namespace

PpoAgent make_allocation_agent(int k, int delta, const PpoConfig& cfg,
                               std::uint64_t seed) {
  if (k < 1) throw ContractError("agent needs k >= 1");
  if (delta < 1) throw ContractError("agent needs at least 1 tier");
  check_cfg(cfg);
  PpoAgent a;
  a.kind = AgentKind::kAllocation;
  a.cfg = cfg;
  a.k = k;
  a.n_tiers = delta;
  a.actor_spec = {{k, cfg.hidden, cfg.hidden, k * delta},
                  nn::Activation::kTanh};
  a.critic_spec = {{k, cfg.hidden, cfg.hidden, 1}, nn::Activation::kTanh};
  a.actor_params =
      nn::init_params(a.actor_spec, rng::derive(seed, rng::kTagAgentInit, 0));
  a.critic_params =
      nn::init_params(a.critic_spec, rng::derive(seed, rng::kTagAgentInit, 1));
  const std::size_t n = a.actor_params.values.size();
  const std::size_t head = n - static_cast<std::size_t>(k) * delta;
  for (int h = 0; h < k; ++h)
    a.actor_params.values[head + static_cast<std::size_t>(h) * delta] +=
        kSmallTierBias;
  return a;
}

PpoAgent make_intensity_agent(int k, const PpoConfig& cfg, std::uint64_t seed) {
  if (k < 1) throw ContractError("agent needs k >= 1");
  check_cfg(cfg);
  PpoAgent a;
  a.kind = AgentKind::kIntensity;
  a.cfg = cfg;
  a.k = k;
  a.n_tiers = 0;
  a.actor_spec = {{k, cfg.hidden, cfg.hidden, cfg.hidden, k},
                  nn::Activation::kTanh};
  a.critic_spec = {{k, cfg.hidden, cfg.hidden, cfg.hidden, 1},
                   nn::Activation::kTanh};
  a.actor_params =
      nn::init_params(a.actor_spec, rng::derive(seed, rng::kTagAgentInit, 2));
  a.critic_params =
      nn::init_params(a.critic_spec, rng::derive(seed, rng::kTagAgentInit, 3));
  const std::size_t n = a.actor_params.values.size();
  for (std::size_t i = n - static_cast<std::size_t>(k); i < n; ++i)
    a.actor_params.values[i] += kConcentrationBias;
  return a;
}

std::vector<double> ppo1_state(const std::vector<double>& assess_times) {
  if (assess_times.empty()) throw ContractError("no assessment times");
  double mn = assess_times[0];
  for (double t : assess_times) {
    if (t <= 0.0) throw ContractError("assessment time must be positive");
    mn = std::min(mn, t);
  }
  std::vector<double> s(assess_times.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = assess_times[i] / mn;
  return s;
}

std::tuple<AllocationAction, double, double> ppo1_act(
    const PpoAgent& agent, const std::vector<double>& state,
    std::uint64_t sample_seed, bool eval) {
  if (agent.kind != AgentKind::kAllocation)
    throw ContractError("ppo1_act requires an allocation agent");
  check_state(agent, state);
  const nn::Matrix x = featurize(state);
  const nn::Matrix logits = nn::forward(agent.actor_params, agent.actor_spec, x);
  const int delta = agent.n_tiers;

  AllocationAction action;
  action.tiers.resize(static_cast<std::size_t>(agent.k));
  rng::Stream s(sample_seed);
  for (int h = 0; h < agent.k; ++h) {
    const double* zh = logits.v.data() + static_cast<std::size_t>(h) * delta;
    int pick = 0;
    if (eval) {
      for (int j = 1; j < delta; ++j)
        if (zh[j] > zh[pick]) pick = j;
    } else {
      double mx = zh[0];
      for (int j = 1; j < delta; ++j) mx = std::max(mx, zh[j]);
      double total = 0.0;
      for (int j = 0; j < delta; ++j) total += std::exp(zh[j] - mx);
      double u = s.uniform() * total;
      double acc = 0.0;
      pick = delta - 1;
      for (int j = 0; j < delta; ++j) {
        acc += std::exp(zh[j] - mx);
        if (u < acc) {
          pick = j;
          break;
        }
      }
    }
    action.tiers[static_cast<std::size_t>(h)] = pick + 1;
  }
  const double logp =
      alloc_log_prob(logits.v.data(), agent.k, delta, action.tiers, nullptr);
  return {std::move(action), logp, critic_value(agent, x)};
}

double ppo1_reward(const std::vector<double>& local_times,
                   const std::vector<int>& taus, double md) {
  if (local_times.empty() || local_times.size() != taus.size())
    throw ContractError("local time and intensity counts differ");
  double mn = 0.0, mx = 0.0;
  for (std::size_t i = 0; i < local_times.size(); ++i) {
    if (taus[i] < 1) throw ContractError("training intensity must be >= 1");
    if (local_times[i] <= 0.0)
      throw ContractError("local time must be positive");
    const double avg = local_times[i] / taus[i];
    if (i == 0) {
      mn = mx = avg;
    } else {
      mn = std::min(mn, avg);
      mx = std::max(mx, avg);
    }
  }
  return md - mx / mn;
}

std::vector<double> ppo2_state(const std::vector<double>& normalized_assess,
                               const AllocationAction& tiers,
                               const client::TierCatalog& catalog) {
  if (normalized_assess.size() != tiers.tiers.size())
    throw ContractError("state and allocation lengths differ");
  std::vector<double> s(normalized_assess.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] = catalog.tier(tiers.tiers[i]).cost_ratio * normalized_assess[i];
  return s;
}

std::tuple<IntensityAction, double, double> ppo2_act(
    const PpoAgent& agent, const std::vector<double>& state, int tau_total,
    std::uint64_t sample_seed, bool eval) {
  if (agent.kind != AgentKind::kIntensity)
    throw ContractError("ppo2_act requires an intensity agent");
  check_state(agent, state);
  if (tau_total < agent.k)
    throw ConfigError("total intensity " + std::to_string(tau_total) +
                      " must be at least the number of clients " +
                      std::to_string(agent.k));
  const nn::Matrix x = featurize(state);
  const nn::Matrix z = nn::forward(agent.actor_params, agent.actor_spec, x);

  std::vector<double> conc(static_cast<std::size_t>(agent.k));
  double csum = 0.0;
  for (int i = 0; i < agent.k; ++i) {
    conc[static_cast<std::size_t>(i)] = softplus(z.v[static_cast<std::size_t>(i)]) + 1.0;
    csum += conc[static_cast<std::size_t>(i)];
  }

  IntensityAction action;
  if (eval) {
    action.sigma.resize(conc.size());
    for (std::size_t i = 0; i < conc.size(); ++i)
      action.sigma[i] = conc[i] / csum;
  } else {
    rng::Stream s(sample_seed);
    action.sigma = s.dirichlet(conc);
  }
  action.tau = round_intensities(action.sigma, tau_total);
  const double logp =
      intensity_log_prob(z.v.data(), agent.k, action.sigma, nullptr);
  return {std::move(action), logp, critic_value(agent, x)};
}

double ppo2_reward(const std::vector<double>& local_times) {
  if (local_times.size() < 2)
    throw ContractError("reward needs at least 2 local times");
  double mn = local_times[0], mx = local_times[0];
  for (double t : local_times) {
    mn = std::min(mn, t);
    mx = std::max(mx, t);
  }
  return mn - mx;
}

std::vector<int> round_intensities(const std::vector<double>& sigma,
                                   int tau_total) {
  const int k = static_cast<int>(sigma.size());
  if (tau_total < k)
    throw ConfigError("total intensity " + std::to_string(tau_total) +
                      " must be at least the number of clients " +
                      std::to_string(k));
  std::vector<int> tau = largest_remainder(sigma, tau_total);
  int excess = 0;
  for (int& t : tau) {
    if (t == 0) {
      t = 1;
      ++excess;
    }
  }
  while (excess > 0) {
    int best = -1;
    for (int i = 0; i < k; ++i)
      if (tau[static_cast<std::size_t>(i)] > 1 &&
          (best < 0 || tau[static_cast<std::size_t>(i)] >
                           tau[static_cast<std::size_t>(best)]))
        best = i;
    --tau[static_cast<std::size_t>(best)];
    --excess;
  }
  return tau;
}

std::vector<double> discounted_returns(const std::vector<double>& rewards,
                                       double gamma) {
  if (gamma < 0.0 || gamma > 1.0)
    throw ContractError("gamma must lie in [0, 1]");
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    g[i] = acc;
  }
  return g;
}

double clipped_objective(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clipped * advantage);
}

double digamma(double x) {
  if (x <= 0.0) throw ContractError("digamma requires x > 0");
  double result = 0.0;
  while (x < 8.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 -
                    inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
  return result;
}

double dirichlet_log_pdf(const std::vector<double>& x,
                         const std::vector<double>& concentration) {
  if (x.size() != concentration.size() || x.empty())
    throw ContractError("dirichlet dimensions differ");
  double csum = 0.0, logp = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double c = concentration[i];
    if (c <= 0.0) throw ContractError("concentration must be positive");
    csum += c;
    logp -= std::lgamma(c);
    logp += (c - 1.0) * std::log(std::max(x[i], kProbFloor));
  }
  return logp + std::lgamma(csum);
}

namespace {

/// Shared update body. `policy(z_row, transition, grad_row_or_null)` returns
/// the log-probability of the stored action under logits z_row and, when
/// asked, writes d(logp)/d(z) into grad_row.
template <typename A, typename Policy>
void update_impl(PpoAgent& agent, ReplayBuffer<A>& buffer, Policy&& policy) {
  if (!buffer.full())
    throw ContractError("ppo update requires a full buffer");
  const int B = buffer.size();
  const double eps = agent.cfg.clip_eps;

  double max_abs = 0.0;
  for (const Transition<A>& t : buffer.items())
    max_abs = std::max(max_abs, std::abs(t.reward));
  agent.reward_scale = std::max(agent.reward_scale, max_abs);
  const double scale = agent.reward_scale > 0.0 ? agent.reward_scale : 1.0;

  std::vector<double> rewards;
  std::vector<double> old_logp;
  rewards.reserve(static_cast<std::size_t>(B));
  old_logp.reserve(static_cast<std::size_t>(B));
  for (const Transition<A>& t : buffer.items()) {
    rewards.push_back(t.reward / scale);
    old_logp.push_back(t.log_prob);
  }
  const std::vector<double> returns =
      discounted_returns(rewards, agent.cfg.gamma);

  const nn::Matrix x = featurize_batch(buffer, agent.k);
  const nn::Matrix v0 =
      nn::forward(agent.critic_params, agent.critic_spec, x);
  std::vector<double> adv(static_cast<std::size_t>(B));
  for (int t = 0; t < B; ++t)
    adv[static_cast<std::size_t>(t)] = returns[static_cast<std::size_t>(t)] - v0.at(t, 0);
  if (B >= 2) {
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= B;
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / B);
    for (double& a : adv) a = (a - mean) / (sd + 1e-8);
  }

  std::vector<const A*> actions;
  actions.reserve(static_cast<std::size_t>(B));
  for (const Transition<A>& t : buffer.items()) actions.push_back(&t.action);

  const nn::LossFn actor_loss = [&](const nn::Matrix& z) {
    double total = 0.0;
    nn::Matrix g(z.rows, z.cols);
    std::vector<double> dlogp(static_cast<std::size_t>(z.cols));
    for (int t = 0; t < B; ++t) {
      const double* row = z.v.data() + static_cast<std::size_t>(t) * z.cols;
      const double logp = policy(row, *actions[static_cast<std::size_t>(t)],
                                 dlogp.data());
      const double ratio =
          std::exp(logp - old_logp[static_cast<std::size_t>(t)]);
      const double a = adv[static_cast<std::size_t>(t)];
      const double surr1 = ratio * a;
      const double surr2 = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * a;
      total -= std::min(surr1, surr2);
      double dobj;
      if (surr1 <= surr2)
        dobj = a;
      else
        dobj = (ratio >= 1.0 - eps && ratio <= 1.0 + eps) ? a : 0.0;
      const double dloss_dlogp = -dobj * ratio / B;
      double* grow = g.v.data() + static_cast<std::size_t>(t) * z.cols;
      for (int j = 0; j < z.cols; ++j)
        grow[j] = dloss_dlogp * dlogp[static_cast<std::size_t>(j)];
    }
    return std::make_pair(total / B, std::move(g));
  };
  const nn::LossFn critic_loss = [&](const nn::Matrix& v) {
    double total = 0.0;
    nn::Matrix g(v.rows, 1);
    for (int t = 0; t < B; ++t) {
      const double d = v.at(t, 0) - returns[static_cast<std::size_t>(t)];
      total += d * d;
      g.at(t, 0) = 2.0 * d / B;
    }
    return std::make_pair(total / B, std::move(g));
  };

  for (int e = 0; e < agent.cfg.update_epochs; ++e) {
    auto [al, agrad] =
        nn::gradient(agent.actor_params, agent.actor_spec, x, actor_loss);
    (void)al;
    agent.actor_params = nn::adam_step(agent.actor_opt, agent.actor_params,
                                       agrad, agent.cfg.actor_lr);
    auto [cl, cgrad] =
        nn::gradient(agent.critic_params, agent.critic_spec, x, critic_loss);
    (void)cl;
    agent.critic_params = nn::adam_step(agent.critic_opt, agent.critic_params,
                                        cgrad, agent.cfg.critic_lr);
  }
  buffer.clear();
}

}  // namespace

void ppo_update(PpoAgent& agent, ReplayBuffer<AllocationAction>& buffer) {
  if (agent.kind != AgentKind::kAllocation)
    throw ContractError("allocation buffer requires an allocation agent");
  const int k = agent.k, delta = agent.n_tiers;
  update_impl(agent, buffer,
              [k, delta](const double* z, const AllocationAction& a,
                         double* grad) {
                if (static_cast<int>(a.tiers.size()) != k)
                  throw ContractError("action arity does not match agent");
                return alloc_log_prob(z, k, delta, a.tiers, grad);
              });
}

void ppo_update(PpoAgent& agent, ReplayBuffer<IntensityAction>& buffer) {
  if (agent.kind != AgentKind::kIntensity)
    throw ContractError("intensity buffer requires an intensity agent");
  const int k = agent.k;
  update_impl(agent, buffer,
              [k](const double* z, const IntensityAction& a, double* grad) {
                if (static_cast<int>(a.sigma.size()) != k)
                  throw ContractError("action arity does not match agent");
                return intensity_log_prob(z, k, a.sigma, grad);
              });
}

}  // namespace hapfl::rl
