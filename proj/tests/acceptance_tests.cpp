#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hapfl/aggregation.hpp"
#include "hapfl/client.hpp"
#include "hapfl/config.hpp"
#include "hapfl/data.hpp"
#include "hapfl/errors.hpp"
#include "hapfl/metrics_io.hpp"
#include "hapfl/nn.hpp"
#include "hapfl/orchestrator.hpp"
#include "hapfl/rl.hpp"
#include "hapfl/rng.hpp"

namespace {

using namespace hapfl;

// Pinned thresholds. The latency criteria are evaluated on seeds 1..5 with
// the environment and agent settings from experiment_config below.
constexpr double kUniformReductionPct = 15.0;
constexpr double kAblationReductionPct = 8.0;
constexpr int kTrendWindow = 40;
constexpr int kTrendSeedsRequired = 4;
constexpr double kGradientRelTol = 1e-4;
constexpr double kOracleTol = 1e-9;
constexpr double kTargetAccuracy = 0.9;
constexpr int kAccuracyRounds = 100;
constexpr double kContractionRelTol = 0.10;
constexpr double kRuntimeBudgetSec = 300.0;
constexpr int kSeeds[] = {1, 2, 3, 4, 5};

bool g_all_ok = true;

void report(int criterion, bool ok, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", criterion, ok ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  g_all_ok = g_all_ok && ok;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// Ten clients, six selected, 10x speed span, two tiers, 200 rounds. Agent
// settings are the tuned desk-scale values; everything else is the default.
std::string experiment_config(int seed, const std::string& mode) {
  return "{\"seed\": " + std::to_string(seed) + ", \"mode\": \"" + mode +
         "\", \"clients\": {\"drift_sigma\": 0.01}, "
         "\"rl\": {\"lr2\": 0.02, \"gamma\": 0.0, \"update_epochs\": 8, "
         "\"hidden\": 16}}";
}

// Twenty clients, three tiers, 20x speed span; longer horizon so the larger
// policies converge.
std::string scalability_config(int seed, const std::string& mode) {
  return "{\"seed\": " + std::to_string(seed) + ", \"mode\": \"" + mode +
         "\", \"K\": 20, \"k\": 12, \"rounds\": 300, \"tau_total\": 240, "
         "\"clients\": {\"psi_span\": 20.0, \"drift_sigma\": 0.01}, "
         "\"tiers\": {\"lite_hidden\": [8], \"tiers\": ["
         "{\"hidden\": [16], \"cost_ratio\": 2.0, \"min_params\": 0}, "
         "{\"hidden\": [24], \"cost_ratio\": 3.0, \"min_params\": 0}, "
         "{\"hidden\": [32], \"cost_ratio\": 4.0, \"min_params\": 0}]}, "
         "\"rl\": {\"lr2\": 0.02, \"gamma\": 0.0, \"update_epochs\": 8, "
         "\"hidden\": 16}}";
}

std::vector<orch::RoundMetrics> run(const std::string& json) {
  return orch::run_experiment(config_from_json_text(json));
}

double mean_delta_tc(const std::vector<orch::RoundMetrics>& rows) {
  double s = 0.0;
  for (const orch::RoundMetrics& m : rows) s += m.delta_tc;
  return s / rows.size();
}

double reduction_pct(double base, double ours) {
  return (1.0 - ours / base) * 100.0;
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();

  // Criteria 1, 2 and 4 share one set of paired runs.
  std::vector<std::vector<orch::RoundMetrics>> hapfl_runs;
  std::vector<double> vs_uniform, vs_fixed_intensity, vs_fixed_model;
  for (int seed : kSeeds) {
    hapfl_runs.push_back(run(experiment_config(seed, "hapfl")));
    const double ours = mean_delta_tc(hapfl_runs.back());
    vs_uniform.push_back(reduction_pct(
        mean_delta_tc(run(experiment_config(seed, "fedavg_uniform"))), ours));
    vs_fixed_intensity.push_back(reduction_pct(
        mean_delta_tc(run(experiment_config(seed, "fixed_intensity"))), ours));
    vs_fixed_model.push_back(reduction_pct(
        mean_delta_tc(run(experiment_config(seed, "fixed_model"))), ours));
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  {
    const double worst =
        *std::min_element(vs_uniform.begin(), vs_uniform.end());
    const bool ok = worst >= kUniformReductionPct &&
                    elapsed <= kRuntimeBudgetSec;
    report(1, ok,
           "straggling latency vs fedavg_uniform: min reduction " +
               fmt(worst) + "% over 5 paired seeds (need >= " +
               fmt(kUniformReductionPct) + "%), paired runs took " +
               fmt(elapsed) + "s");
  }

  {
    const double worst_fi =
        *std::min_element(vs_fixed_intensity.begin(), vs_fixed_intensity.end());
    const double worst_fm =
        *std::min_element(vs_fixed_model.begin(), vs_fixed_model.end());
    const bool ok = worst_fi >= kAblationReductionPct &&
                    worst_fm >= kAblationReductionPct;
    report(2, ok,
           "ablations: min reduction vs fixed_intensity " + fmt(worst_fi) +
               "%, vs fixed_model " + fmt(worst_fm) + "% (need >= " +
               fmt(kAblationReductionPct) + "%)");
  }

  {
    // Paired mean reduction at 20 clients must not fall below the 10-client
    // mean on the same seed list.
    std::vector<double> scal;
    for (int seed : kSeeds) {
      const double base = mean_delta_tc(run(scalability_config(seed, "fedavg_uniform")));
      const double ours = mean_delta_tc(run(scalability_config(seed, "hapfl")));
      scal.push_back(reduction_pct(base, ours));
    }
    double mean_scal = 0.0, mean_base = 0.0;
    for (double v : scal) mean_scal += v;
    for (double v : vs_uniform) mean_base += v;
    mean_scal /= scal.size();
    mean_base /= vs_uniform.size();
    report(3, mean_scal >= mean_base,
           "scalability: 20-client mean reduction " + fmt(mean_scal) +
               "% vs 10-client mean " + fmt(mean_base) + "%");
  }

  {
    int r1_up = 0, r2_up = 0;
    for (const std::vector<orch::RoundMetrics>& rows : hapfl_runs) {
      const int n = static_cast<int>(rows.size());
      double f1 = 0.0, l1 = 0.0, f2 = 0.0, l2 = 0.0;
      for (int i = 0; i < kTrendWindow; ++i) {
        f1 += rows[static_cast<std::size_t>(i)].r1;
        f2 += rows[static_cast<std::size_t>(i)].r2;
        l1 += rows[static_cast<std::size_t>(n - kTrendWindow + i)].r1;
        l2 += rows[static_cast<std::size_t>(n - kTrendWindow + i)].r2;
      }
      if (l1 > f1) ++r1_up;
      if (l2 > f2) ++r2_up;
    }
    const bool ok =
        r1_up >= kTrendSeedsRequired && r2_up >= kTrendSeedsRequired;
    report(4, ok,
           "reward trend: last-" + std::to_string(kTrendWindow) +
               " mean exceeds first-" + std::to_string(kTrendWindow) +
               " in " + std::to_string(r1_up) + "/5 seeds for R1 and " +
               std::to_string(r2_up) + "/5 for R2 (need >= " +
               std::to_string(kTrendSeedsRequired) + ")");
  }

  {
    // Backpropagation against central finite differences of the same loss.
    double max_rel = 0.0;
    rng::Stream draw(rng::derive(2024, 1));
    for (int trial = 0; trial < 20; ++trial) {
      const int in = 2 + static_cast<int>(draw.uniform() * 4);
      const int hid = 3 + static_cast<int>(draw.uniform() * 5);
      const int out = 1 + static_cast<int>(draw.uniform() * 4);
      const nn::NetworkSpec spec{{in, hid, out}, nn::Activation::kTanh};
      nn::ParamVector p = nn::init_params(spec, draw.next_u64());
      const int rows = 2 + static_cast<int>(draw.uniform() * 4);
      nn::Matrix x(rows, in);
      for (double& v : x.v) v = draw.uniform(-2.0, 2.0);
      const nn::LossFn loss = [](const nn::Matrix& z) {
        double total = 0.0;
        nn::Matrix g(z.rows, z.cols);
        for (std::size_t i = 0; i < z.v.size(); ++i) {
          total += 0.5 * z.v[i] * z.v[i];
          g.v[i] = z.v[i];
        }
        return std::make_pair(total, std::move(g));
      };
      auto [value, grad] = nn::gradient(p, spec, x, loss);
      (void)value;
      const double h = 1e-6;
      for (std::size_t j = 0; j < p.values.size(); ++j) {
        const double keep = p.values[j];
        p.values[j] = keep + h;
        const double up = loss(nn::forward(p, spec, x)).first;
        p.values[j] = keep - h;
        const double dn = loss(nn::forward(p, spec, x)).first;
        p.values[j] = keep;
        const double fd = (up - dn) / (2.0 * h);
        const double a = grad.values[j];
        const double rel =
            std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-3});
        max_rel = std::max(max_rel, rel);
      }
    }
    report(5, max_rel < kGradientRelTol,
           "gradient check: max relative error " + fmt(max_rel * 1e6) +
               "e-6 over 20 draws (need < 1e-4)");
  }

  {
    // Each formula against a naive re-evaluation written independently here.
    rng::Stream draw(rng::derive(2024, 2));
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const int m = 2 + static_cast<int>(draw.uniform() * 5);
      const int n = 1 + static_cast<int>(draw.uniform() * 50);
      data::Dataset ds;
      ds.inputs = nn::Matrix(n, 2);
      ds.n_classes = m;
      ds.labels.resize(static_cast<std::size_t>(n));
      std::vector<int> counts(static_cast<std::size_t>(m), 0);
      for (int i = 0; i < n; ++i) {
        ds.labels[static_cast<std::size_t>(i)] =
            static_cast<int>(draw.uniform() * m) % m;
        ++counts[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])];
      }
      double naive = 0.0;
      for (int c : counts)
        if (c > 0) {
          const double q = static_cast<double>(c) / n;
          naive -= q * std::log2(q);
        }
      worst = std::max(worst, std::abs(data::label_entropy(ds) - naive));

      const int k = 2 + static_cast<int>(draw.uniform() * 7);
      std::vector<double> td(static_cast<std::size_t>(k));
      for (double& v : td) v = draw.uniform(0.1, 10.0);
      const std::vector<double> s1 = rl::ppo1_state(td);
      const double mn = *std::min_element(td.begin(), td.end());
      for (int i = 0; i < k; ++i)
        worst = std::max(worst,
                         std::abs(s1[static_cast<std::size_t>(i)] -
                                  td[static_cast<std::size_t>(i)] / mn));

      std::vector<double> tl(static_cast<std::size_t>(k));
      std::vector<int> taus(static_cast<std::size_t>(k));
      for (int i = 0; i < k; ++i) {
        tl[static_cast<std::size_t>(i)] = draw.uniform(0.5, 20.0);
        taus[static_cast<std::size_t>(i)] =
            1 + static_cast<int>(draw.uniform() * 30);
      }
      double mx_avg = 0.0, mn_avg = 1e300;
      for (int i = 0; i < k; ++i) {
        const double avg =
            tl[static_cast<std::size_t>(i)] / taus[static_cast<std::size_t>(i)];
        mx_avg = std::max(mx_avg, avg);
        mn_avg = std::min(mn_avg, avg);
      }
      worst = std::max(worst, std::abs(rl::ppo1_reward(tl, taus, 10.0) -
                                       (10.0 - mx_avg / mn_avg)));
      worst = std::max(
          worst,
          std::abs(rl::ppo2_reward(tl) -
                   (*std::min_element(tl.begin(), tl.end()) -
                    *std::max_element(tl.begin(), tl.end()))));

      std::vector<double> ent(static_cast<std::size_t>(k)),
          acc(static_cast<std::size_t>(k));
      for (int i = 0; i < k; ++i) {
        ent[static_cast<std::size_t>(i)] = draw.uniform(0.0, 3.0);
        acc[static_cast<std::size_t>(i)] = draw.uniform();
      }
      const agg::AggregationWeights w = agg::compute_weights(ent, acc);
      double se = 0.0, sa = 0.0;
      for (int i = 0; i < k; ++i) {
        se += std::exp(ent[static_cast<std::size_t>(i)]);
        sa += std::exp(acc[static_cast<std::size_t>(i)]);
      }
      for (int i = 0; i < k; ++i) {
        const double naive_w =
            0.5 * (std::exp(ent[static_cast<std::size_t>(i)]) / se +
                   std::exp(acc[static_cast<std::size_t>(i)]) / sa);
        worst = std::max(
            worst, std::abs(w.weights[static_cast<std::size_t>(i)].second -
                            naive_w));
      }
    }
    report(6, worst < kOracleTol,
           "formula oracles: max deviation " + fmt(worst * 1e12) +
               "e-12 over 100 random inputs each (need < 1e-9)");
  }

  {
    rl::PpoConfig pcfg;
    pcfg.hidden = 16;
    rl::PpoAgent intensity = rl::make_intensity_agent(6, pcfg, 11);
    rng::Stream draw(rng::derive(2024, 3));
    bool sums_ok = true, floor_ok = true;
    for (int i = 0; i < 1000; ++i) {
      std::vector<double> s(6);
      for (double& v : s) v = draw.uniform(1.0, 8.0);
      auto [action, lp, val] = rl::ppo2_act(intensity, s, 120, draw.next_u64());
      (void)lp;
      (void)val;
      int sum = 0, mn = action.tau[0];
      for (int t : action.tau) {
        sum += t;
        mn = std::min(mn, t);
      }
      sums_ok = sums_ok && sum == 120 && mn >= 1;
    }
    // Catalog with tight parameter floors; every sampled tier must sit at or
    // above its floor.
    ExperimentConfig cfg = config_from_json_text(experiment_config(1, "hapfl"));
    client::TierCatalog catalog = cfg.catalog();
    for (client::ModelTier& t : catalog.tiers) t.min_params = t.spec.param_count();
    catalog.validate();
    rl::PpoAgent alloc = rl::make_allocation_agent(
        6, static_cast<int>(catalog.tiers.size()), pcfg, 12);
    for (int i = 0; i < 1000; ++i) {
      std::vector<double> s(6);
      for (double& v : s) v = draw.uniform(1.0, 8.0);
      auto [action, lp, val] = rl::ppo1_act(alloc, s, draw.next_u64());
      (void)lp;
      (void)val;
      for (int tier_id : action.tiers) {
        const client::ModelTier& t = catalog.tier(tier_id);
        floor_ok = floor_ok && t.spec.param_count() >= t.min_params;
      }
    }
    report(7, sums_ok && floor_ok,
           std::string("constraints: 1000 intensity actions (sum and floor ") +
               (sums_ok ? "held" : "VIOLATED") +
               "), 1000 allocation actions (parameter floor " +
               (floor_ok ? "held" : "VIOLATED") + ")");
  }

  {
    // Mutual distillation on easy blobs; both the LiteModel global and every
    // tier global must clear 90% test accuracy inside 100 rounds. The local
    // learning rate is raised to a desk-scale value.
    ExperimentConfig cfg = config_from_json_text(
        "{\"seed\": 1, \"rounds\": 100, "
        "\"clients\": {\"drift_sigma\": 0.01}, "
        "\"fl\": {\"lr3\": 0.05}, "
        "\"rl\": {\"lr2\": 0.02, \"gamma\": 0.0, \"update_epochs\": 8, "
        "\"hidden\": 16}}");
    const std::vector<orch::RoundMetrics> rows = orch::run_experiment(cfg);
    int first = -1;
    for (const orch::RoundMetrics& m : rows) {
      const double tier_min =
          *std::min_element(m.acc_tiers.begin(), m.acc_tiers.end());
      if (m.acc_lite >= kTargetAccuracy && tier_min >= kTargetAccuracy) {
        first = m.round + 1;
        break;
      }
    }
    const bool ok = first > 0 && first <= kAccuracyRounds;
    report(8, ok,
           ok ? "learning: all global models reach 90% accuracy by round " +
                    std::to_string(first)
              : "learning: 90% accuracy not reached within " +
                    std::to_string(kAccuracyRounds) + " rounds");
  }

  {
    // Gradient descent on f(x) = 0.5 * sum(lambda_i x_i^2) with
    // lambda in [mu, L]; the mean per-step value contraction must match
    // 1 - Gamma within 10%.
    const std::vector<double> lambda{1.0, 1.05, 1.1};
    const double mu = 1.0, L = 1.1, eta = 0.3;
    const double gamma_rate = 2.0 * mu * (eta - L * eta * eta / 2.0);
    std::vector<double> x{1.0, 1.0, 1.0};
    double prev = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      prev += 0.5 * lambda[i] * x[i] * x[i];
    double mean_ratio = 0.0;
    for (int step = 0; step < 50; ++step) {
      for (std::size_t i = 0; i < x.size(); ++i) x[i] -= eta * lambda[i] * x[i];
      double f = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i)
        f += 0.5 * lambda[i] * x[i] * x[i];
      mean_ratio += f / prev;
      prev = f;
    }
    mean_ratio /= 50.0;
    const double target = 1.0 - gamma_rate;
    const double rel = std::abs(mean_ratio - target) / target;
    report(9, rel <= kContractionRelTol,
           "convergence rate: mean contraction " + fmt(mean_ratio) +
               " vs 1-Gamma " + fmt(target) + " (relative gap " +
               fmt(rel * 100.0) + "%, need <= 10%)");
  }

  {
    // Fixed members and weights; the literal form accumulates, the delta
    // form stays a weighted average anchored at the previous global.
    nn::ParamVector global;
    global.spec_id = "probe";
    global.values.assign(8, 0.25);
    nn::ParamVector m1 = global, m2 = global;
    m1.values.assign(8, 1.0);
    m2.values.assign(8, 0.5);
    const std::vector<nn::ParamVector> members{m1, m2};
    agg::AggregationWeights w;
    w.weights = {{0, 0.6}, {1, 0.4}};
    double member_norm = 0.0;
    for (const nn::ParamVector& m : members)
      for (double v : m.values) member_norm = std::max(member_norm, std::abs(v));

    const double start_norm = 0.25;
    nn::ParamVector lit = global;
    int doubled_at = -1;
    for (int round = 1; round <= 5; ++round) {
      lit = agg::aggregate(lit, members, w, agg::Form::kLiteral);
      double norm = 0.0;
      for (double v : lit.values) norm = std::max(norm, std::abs(v));
      if (norm >= 2.0 * start_norm && doubled_at < 0) doubled_at = round;
    }
    nn::ParamVector del = global;
    bool delta_bounded = true;
    for (int round = 1; round <= 5; ++round) {
      del = agg::aggregate(del, members, w, agg::Form::kDelta);
      for (double v : del.values)
        delta_bounded = delta_bounded && std::abs(v) <= member_norm + 1e-12;
    }
    const bool ok = doubled_at > 0 && doubled_at <= 5 && delta_bounded;
    report(10, ok,
           "aggregation forms: literal inf-norm doubled at round " +
               std::to_string(doubled_at) + ", delta stayed within max member "
               "norm " + fmt(member_norm));
  }

  {
    const std::filesystem::path dir = "acceptance_tmp";
    std::filesystem::create_directories(dir);
    const auto write = [&](const std::filesystem::path& p) {
      {
        std::ofstream out(p, std::ios::binary);
        io::write_metrics_csv(out, run(experiment_config(kSeeds[0], "hapfl")));
      }
      std::ifstream in(p, std::ios::binary);
      std::ostringstream buf;
      buf << in.rdbuf();
      return buf.str();
    };
    const std::string a = write(dir / "run_a.csv");
    const std::string b = write(dir / "run_b.csv");
    std::filesystem::remove_all(dir);
    report(11, !a.empty() && a == b,
           "determinism: two seed-" + std::to_string(kSeeds[0]) +
               " runs wrote byte-identical metrics.csv (" +
               std::to_string(a.size()) + " bytes)");
  }

  std::printf("%s\n", g_all_ok ? "ALL CRITERIA PASSED" : "CRITERIA FAILED");
  return g_all_ok ? 0 : 1;
}
