#include "hapfl/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>

#include "hapfl/errors.hpp"
#include "hapfl/rng.hpp"

namespace hapfl::orch {

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double reduction_pct(double base, double value) {
  if (base == 0.0) return 0.0;
  return 100.0 * (base - value) / base;
}

}  // namespace

std::vector<int> select_clients(int K, int k, std::uint64_t round_seed) {
  if (k < 1 || k > K)
    throw ContractError("cannot select " + std::to_string(k) + " of " +
                        std::to_string(K) + " clients");
  std::vector<int> ids(static_cast<std::size_t>(K));
  std::iota(ids.begin(), ids.end(), 0);
  rng::Stream s(round_seed);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(s.uniform_int(K - i));
    std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)]);
  }
  ids.resize(static_cast<std::size_t>(k));
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<int> uniform_intensities(int k, int tau_total) {
  return rl::round_intensities(
      std::vector<double>(static_cast<std::size_t>(k), 1.0 / k), tau_total);
}

ExperimentState::ExperimentState(const ExperimentConfig& cfg_in)
    : cfg(cfg_in),
      alloc_buffer(cfg_in.rl.buffer),
      intensity_buffer(cfg_in.rl.buffer) {
  cfg.validate();
  catalog = cfg.catalog();

  const DataConfig& d = cfg.data;
  const data::Dataset full =
      data::gen_blobs(d.n_classes, d.dim, d.n_per_class, d.spread,
                      rng::derive(cfg.seed, rng::kTagBlobNoise, 0, 1));
  test_set = data::gen_blobs(d.n_classes, d.dim, d.test_per_class, d.spread,
                             rng::derive(cfg.seed, rng::kTagBlobNoise, 0, 2));
  data::PartitionConfig pc;
  pc.n_clients = cfg.K;
  pc.alpha = d.alpha;
  pc.seed = rng::derive(cfg.seed, rng::kTagPartition, 0, 1);
  std::vector<data::Dataset> shards = data::dirichlet_partition(full, pc);

  profiles.reserve(static_cast<std::size_t>(cfg.K));
  for (int i = 0; i < cfg.K; ++i) {
    client::ClientProfile p;
    p.client_id = i;
    rng::Stream s(rng::derive(cfg.seed, rng::kTagPsi,
                              static_cast<std::uint64_t>(i)));
    p.psi = cfg.clients.psi_min * std::pow(cfg.clients.psi_span, s.uniform());
    p.psi0 = p.psi;
    p.drift_sigma = cfg.clients.drift_sigma;
    p.dataset = std::move(shards[static_cast<std::size_t>(i)]);
    p.entropy_H = data::label_entropy(p.dataset);
    profiles.push_back(std::move(p));
  }

  globals.lite = nn::init_params(catalog.lite.spec,
                                 rng::derive(cfg.seed, rng::kTagModelInit, 0));
  for (const client::ModelTier& t : catalog.tiers)
    globals.per_tier[t.tier_id] = nn::init_params(
        t.spec, rng::derive(cfg.seed, rng::kTagModelInit,
                            static_cast<std::uint64_t>(t.tier_id)));

  rl::PpoConfig c1{cfg.rl.clip_eps, cfg.rl.gamma,        cfg.rl.lr1,
                   cfg.rl.lr1,      cfg.rl.update_epochs, cfg.rl.hidden};
  rl::PpoConfig c2{cfg.rl.clip_eps, cfg.rl.gamma,        cfg.rl.lr2,
                   cfg.rl.lr2,      cfg.rl.update_epochs, cfg.rl.hidden};
  alloc_agent = rl::make_allocation_agent(cfg.k, catalog.n_tiers(), c1, cfg.seed);
  intensity_agent = rl::make_intensity_agent(cfg.k, c2, cfg.seed);
}

void reset_environment(ExperimentState& st) {
  st.globals.lite = nn::init_params(
      st.catalog.lite.spec, rng::derive(st.cfg.seed, rng::kTagModelInit, 0));
  for (const client::ModelTier& t : st.catalog.tiers)
    st.globals.per_tier[t.tier_id] = nn::init_params(
        t.spec, rng::derive(st.cfg.seed, rng::kTagModelInit,
                            static_cast<std::uint64_t>(t.tier_id)));
  for (client::ClientProfile& p : st.profiles) p.psi = p.psi0;
}

RoundMetrics run_round(ExperimentState& st, int round) {
  const ExperimentConfig& cfg = st.cfg;
  const int k = cfg.k;
  const std::uint64_t seed = cfg.seed;
  const std::uint64_t r = static_cast<std::uint64_t>(round);

  // Speeds evolve for the whole population regardless of selection, so the
  // hardware trajectory is identical across modes at a fixed seed.
  for (client::ClientProfile& p : st.profiles)
    client::drift_psi(
        p, rng::derive(seed, rng::kTagDrift, r,
                       static_cast<std::uint64_t>(p.client_id)));

  RoundMetrics m;
  m.round = round;
  m.selected = select_clients(cfg.K, k, rng::derive(seed, rng::kTagSelect, r));

  // Assessment: one LiteModel epoch per selected client; both the measured
  // duration and the updated parameters are kept.
  std::vector<double> assess_times(static_cast<std::size_t>(k));
  std::vector<nn::ParamVector> assessed_lite(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const client::ClientProfile& prof =
        st.profiles[static_cast<std::size_t>(m.selected[static_cast<std::size_t>(i)])];
    auto [td, params] = client::assess(
        prof, st.globals.lite, st.catalog.lite, cfg.fl.lr3,
        rng::derive(seed, rng::kTagClientRound, r,
                    static_cast<std::uint64_t>(prof.client_id)));
    assess_times[static_cast<std::size_t>(i)] = td;
    assessed_lite[static_cast<std::size_t>(i)] = std::move(params);
  }
  // Agent slots are ordered slowest-first so slot semantics are stable
  // across rounds; everything reported in RoundMetrics stays in `selected`
  // (ascending client id) order.
  std::vector<int> slot_of(static_cast<std::size_t>(k));
  std::iota(slot_of.begin(), slot_of.end(), 0);
  std::stable_sort(slot_of.begin(), slot_of.end(), [&](int a, int b) {
    return assess_times[static_cast<std::size_t>(a)] >
           assess_times[static_cast<std::size_t>(b)];
  });
  std::vector<double> slot_td(static_cast<std::size_t>(k));
  for (int s = 0; s < k; ++s)
    slot_td[static_cast<std::size_t>(s)] =
        assess_times[static_cast<std::size_t>(slot_of[static_cast<std::size_t>(s)])];
  const std::vector<double> s1 = rl::ppo1_state(slot_td);

  const bool use_alloc =
      cfg.mode == Mode::kHapfl || cfg.mode == Mode::kFixedIntensity;
  const bool use_intensity =
      cfg.mode == Mode::kHapfl || cfg.mode == Mode::kFixedModel;

  rl::AllocationAction alloc;
  double alloc_logp = 0.0, alloc_value = 0.0;
  if (use_alloc) {
    std::tie(alloc, alloc_logp, alloc_value) =
        rl::ppo1_act(st.alloc_agent, s1, rng::derive(seed, rng::kTagPpo1, r));
  } else {
    // fedavg_uniform trains the small tier everywhere; fixed_model freezes
    // everyone on the full-size model and only adapts intensities.
    const int fixed_tier = cfg.mode == Mode::kFixedModel
                               ? static_cast<int>(st.catalog.tiers.size())
                               : 1;
    alloc.tiers.assign(static_cast<std::size_t>(k), fixed_tier);
  }

  rl::IntensityAction intensity;
  double int_logp = 0.0, int_value = 0.0;
  std::vector<double> s2;
  if (use_intensity) {
    s2 = rl::ppo2_state(s1, alloc, st.catalog);
    std::tie(intensity, int_logp, int_value) =
        rl::ppo2_act(st.intensity_agent, s2, cfg.tau_total,
                     rng::derive(seed, rng::kTagPpo2, r));
  } else {
    intensity.sigma.assign(static_cast<std::size_t>(k), 1.0 / k);
    intensity.tau = uniform_intensities(k, cfg.tau_total);
  }

  // Map slot-space decisions back to selected-client order.
  std::vector<int> tier_of(static_cast<std::size_t>(k));
  std::vector<int> tau_of(static_cast<std::size_t>(k));
  for (int s = 0; s < k; ++s) {
    const std::size_t i =
        static_cast<std::size_t>(slot_of[static_cast<std::size_t>(s)]);
    tier_of[i] = alloc.tiers[static_cast<std::size_t>(s)];
    tau_of[i] = intensity.tau[static_cast<std::size_t>(s)];
  }

  const client::TrainParams tp{cfg.fl.lambda1, cfg.fl.lambda2, cfg.fl.lambda3,
                               cfg.fl.lambda4, cfg.fl.lr3};
  std::vector<client::ClientRoundReport> reports;
  reports.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const client::ClientProfile& prof =
        st.profiles[static_cast<std::size_t>(m.selected[static_cast<std::size_t>(i)])];
    const client::ModelTier& tier =
        st.catalog.tier(tier_of[static_cast<std::size_t>(i)]);
    client::ClientRoundReport rep = client::local_train(
        prof, std::move(assessed_lite[static_cast<std::size_t>(i)]),
        st.globals.per_tier.at(tier.tier_id), tier, st.catalog.lite,
        tau_of[static_cast<std::size_t>(i)], tp, st.test_set,
        rng::derive(seed, rng::kTagClientRound, r,
                    static_cast<std::uint64_t>(prof.client_id)));
    rep.assess_time = assess_times[static_cast<std::size_t>(i)];
    reports.push_back(std::move(rep));
  }

  // Weighted aggregation: LiteModel over everyone, each tier over its own
  // participants with weights renormalized within the group.
  std::vector<double> entropies, accs, local_times;
  std::vector<nn::ParamVector> lite_members;
  for (const client::ClientRoundReport& rep : reports) {
    entropies.push_back(rep.entropy_H);
    accs.push_back(rep.acc);
    local_times.push_back(rep.local_time);
    lite_members.push_back(rep.lite_params);
  }
  const agg::AggregationWeights lite_weights =
      agg::compute_weights(entropies, accs, m.selected);

  std::map<int, std::vector<int>> by_tier;  // tier_id -> report indices
  for (int i = 0; i < k; ++i)
    by_tier[reports[static_cast<std::size_t>(i)].tier_id].push_back(i);
  std::vector<agg::ModelGroup> groups;
  std::vector<agg::AggregationWeights> group_weights;
  for (const auto& [tier_id, idxs] : by_tier) {
    agg::ModelGroup g;
    g.tier_id = tier_id;
    std::vector<double> gh, ga;
    std::vector<int> gids;
    for (int i : idxs) {
      const client::ClientRoundReport& rep = reports[static_cast<std::size_t>(i)];
      g.members.emplace_back(rep.client_id, rep.local_params);
      gh.push_back(rep.entropy_H);
      ga.push_back(rep.acc);
      gids.push_back(rep.client_id);
    }
    groups.push_back(std::move(g));
    group_weights.push_back(agg::compute_weights(gh, ga, gids));
  }
  st.globals = agg::aggregate_round(st.globals, lite_members, lite_weights,
                                    groups, group_weights,
                                    cfg.aggregation_form);

  m.r1 = rl::ppo1_reward(local_times, tau_of, cfg.md);
  m.r2 = rl::ppo2_reward(local_times);

  if (use_alloc) {
    st.alloc_buffer.push({s1, alloc, alloc_logp, m.r1, alloc_value});
    if (st.alloc_buffer.full()) rl::ppo_update(st.alloc_agent, st.alloc_buffer);
  }
  if (use_intensity) {
    st.intensity_buffer.push({s2, intensity, int_logp, m.r2, int_value});
    if (st.intensity_buffer.full())
      rl::ppo_update(st.intensity_agent, st.intensity_buffer);
  }

  m.tiers = tier_of;
  m.taus = tau_of;
  m.assess_times = assess_times;
  m.local_times = local_times;
  for (int i = 0; i < k; ++i)
    m.compute_times.push_back(assess_times[static_cast<std::size_t>(i)] +
                              local_times[static_cast<std::size_t>(i)]);
  m.delta_tc = client::straggling_latency(reports, true);
  m.total_time = *std::max_element(m.compute_times.begin(),
                                   m.compute_times.end()) +
                 cfg.clients.t_broadcast + cfg.clients.t_upload +
                 cfg.clients.t_aggregate;
  m.acc_lite = nn::accuracy(st.globals.lite, st.catalog.lite.spec,
                            st.test_set.inputs, st.test_set.labels);
  for (const client::ModelTier& t : st.catalog.tiers)
    m.acc_tiers.push_back(nn::accuracy(st.globals.per_tier.at(t.tier_id),
                                       t.spec, st.test_set.inputs,
                                       st.test_set.labels));
  m.weights = lite_weights.values();
  return m;
}

std::vector<RoundMetrics> run_experiment(
    const ExperimentConfig& cfg,
    const std::function<void(const RoundMetrics&)>& on_round,
    const std::function<void(const ExperimentState&, int episode)>&
        on_episode_end) {
  ExperimentState st(cfg);
  std::vector<RoundMetrics> out;
  out.reserve(static_cast<std::size_t>(cfg.episodes) *
              static_cast<std::size_t>(cfg.rounds));
  int global_round = 0;
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    if (ep > 0) reset_environment(st);
    for (int r = 0; r < cfg.rounds; ++r) {
      RoundMetrics m = run_round(st, global_round);
      if (on_round) on_round(m);
      out.push_back(std::move(m));
      ++global_round;
    }
    if (on_episode_end) on_episode_end(st, ep);
  }
  return out;
}

std::vector<RunSummary> compare_runs(
    const std::vector<std::string>& labels,
    const std::vector<std::vector<RoundMetrics>>& runs) {
  if (runs.size() < 2)
    throw ConfigError("compare needs at least 2 runs, got " +
                      std::to_string(runs.size()));
  if (labels.size() != runs.size())
    throw ContractError("compare labels and runs differ in length");
  const std::size_t rounds = runs.front().size();
  for (std::size_t i = 0; i < runs.size(); ++i)
    if (runs[i].size() != rounds)
      throw ConfigError("run \"" + labels[i] + "\" has " +
                        std::to_string(runs[i].size()) + " rounds, expected " +
                        std::to_string(rounds));
  if (rounds == 0) throw ConfigError("compare needs non-empty runs");

  std::vector<RunSummary> out;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const std::vector<RoundMetrics>& run = runs[i];
    RunSummary s;
    s.label = labels[i];
    s.rounds = static_cast<int>(rounds);
    std::vector<double> dtc;
    for (const RoundMetrics& m : run) {
      dtc.push_back(m.delta_tc);
      s.total_time += m.total_time;
    }
    s.mean_delta_tc = mean_of(dtc);
    s.median_delta_tc = median_of(dtc);
    const RoundMetrics& last = run.back();
    s.final_acc_lite = last.acc_lite;
    if (!last.acc_tiers.empty()) {
      s.final_acc_small = last.acc_tiers.front();
      s.final_acc_large = last.acc_tiers.back();
    }
    out.push_back(std::move(s));
  }
  for (RunSummary& s : out) {
    s.straggling_latency_reduction_pct =
        reduction_pct(out.front().mean_delta_tc, s.mean_delta_tc);
    s.total_time_reduction_pct =
        reduction_pct(out.front().total_time, s.total_time);
  }
  return out;
}

}  // namespace hapfl::orch
