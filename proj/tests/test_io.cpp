#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "hapfl/errors.hpp"
#include "hapfl/metrics_io.hpp"
#include "hapfl/orchestrator.hpp"
#include "hapfl/serialize.hpp"

using namespace hapfl;

namespace {

orch::RoundMetrics sample_metrics() {
  orch::RoundMetrics m;
  m.round = 3;
  m.selected = {0, 2, 5};
  m.tiers = {1, 2, 1};
  m.taus = {4, 1, 1};
  m.delta_tc = 12.5;
  m.total_time = 40.25;
  m.r1 = 7.123456789;
  m.r2 = -3.5;
  m.acc_lite = 0.8125;
  m.acc_tiers = {0.75, 0.875};
  m.weights = {0.333333333, 0.25, 0.416666667};
  return m;
}

std::string write_temp_csv(const std::vector<orch::RoundMetrics>& rows,
                           const std::string& name) {
  std::ofstream out(name);
  io::write_metrics_csv(out, rows);
  return name;
}

}  // namespace

TEST_CASE("metrics CSV header matches the fixed schema") {
  CHECK(io::metrics_csv_header() ==
        "round,selected,tier_assignment,tau,delta_tc,total_time,r1,r2,"
        "acc_lite,acc_small,acc_large,weights");
}

TEST_CASE("metrics rows join lists with semicolons and print 6 significant digits") {
  const std::string row = io::metrics_csv_row(sample_metrics());
  CHECK(row ==
        "3,0;2;5,1;2;1,4;1;1,12.5,40.25,7.12346,-3.5,0.8125,0.75,0.875,"
        "0.333333;0.25;0.416667");
}

TEST_CASE("format_g6 uses 6 significant digits") {
  CHECK(io::format_g6(0.123456789) == "0.123457");
  CHECK(io::format_g6(1234567.0) == "1.23457e+06");
  CHECK(io::format_g6(0.5) == "0.5");
  CHECK(io::format_g6(-0.000123456789) == "-0.000123457");
}

TEST_CASE("metrics CSV round-trips its carried fields") {
  const std::string path = "test_metrics_tmp.csv";
  std::vector<orch::RoundMetrics> rows = {sample_metrics(), sample_metrics()};
  rows[1].round = 4;
  rows[1].selected = {1, 3, 4};
  write_temp_csv(rows, path);

  const std::vector<orch::RoundMetrics> back = io::read_metrics_csv(path);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].round == rows[i].round);
    CHECK(back[i].selected == rows[i].selected);
    CHECK(back[i].tiers == rows[i].tiers);
    CHECK(back[i].taus == rows[i].taus);
    CHECK(back[i].delta_tc == rows[i].delta_tc);
    CHECK(back[i].total_time == rows[i].total_time);
    CHECK(back[i].r2 == rows[i].r2);
    CHECK(back[i].acc_lite == rows[i].acc_lite);
    CHECK(back[i].acc_tiers.front() == rows[i].acc_tiers.front());
    CHECK(back[i].acc_tiers.back() == rows[i].acc_tiers.back());
  }
  // 6-significant-digit fields survive one write/read/write cycle unchanged.
  std::ostringstream first, second;
  io::write_metrics_csv(first, rows);
  io::write_metrics_csv(second, back);
  CHECK(first.str() == second.str());
  std::remove(path.c_str());
}

TEST_CASE("metrics CSV reader rejects malformed input") {
  const std::string path = "test_metrics_bad_tmp.csv";
  {
    std::ofstream out(path);
    out << "wrong,header\n";
  }
  CHECK_THROWS_AS(io::read_metrics_csv(path), ConfigError);
  {
    std::ofstream out(path);
    out << io::metrics_csv_header() << "\n1,2,3\n";
  }
  CHECK_THROWS_AS(io::read_metrics_csv(path), ConfigError);
  {
    std::ofstream out(path);
    out << io::metrics_csv_header()
        << "\n1,0;1,1;1,2;2,oops,1,1,1,1,1,1,0.5;0.5\n";
  }
  CHECK_THROWS_AS(io::read_metrics_csv(path), ConfigError);
  CHECK_THROWS_AS(io::read_metrics_csv("missing_file.csv"), ConfigError);
  std::remove(path.c_str());
}

TEST_CASE("param vectors survive a binary round-trip") {
  nn::NetworkSpec spec{{4, 6, 3}, nn::Activation::kTanh};
  nn::ParamVector pv = nn::init_params(spec, 123);
  std::stringstream buf;
  ser::write_param_vector(buf, pv);
  nn::ParamVector back = ser::read_param_vector(buf);
  CHECK(back.spec_id == pv.spec_id);
  CHECK(back.values == pv.values);
}

TEST_CASE("agent checkpoints round-trip parameters and hyperparameters") {
  rl::PpoConfig cfg;
  cfg.clip_eps = 0.15;
  cfg.gamma = 0.85;
  cfg.actor_lr = 0.011;
  cfg.critic_lr = 0.012;
  cfg.update_epochs = 3;
  cfg.hidden = 12;
  rl::PpoAgent agent = rl::make_allocation_agent(4, 3, cfg, 77);
  agent.reward_scale = 9.5;

  const std::string path = "test_agent_tmp.ckpt";
  ser::save_agent(agent, path);
  rl::PpoAgent back = ser::load_agent(path);
  CHECK(back.kind == rl::AgentKind::kAllocation);
  CHECK(back.k == 4);
  CHECK(back.n_tiers == 3);
  CHECK(back.cfg.clip_eps == agent.cfg.clip_eps);
  CHECK(back.cfg.gamma == agent.cfg.gamma);
  CHECK(back.cfg.actor_lr == agent.cfg.actor_lr);
  CHECK(back.cfg.critic_lr == agent.cfg.critic_lr);
  CHECK(back.cfg.update_epochs == agent.cfg.update_epochs);
  CHECK(back.cfg.hidden == agent.cfg.hidden);
  CHECK(back.reward_scale == 9.5);
  CHECK(back.actor_params.values == agent.actor_params.values);
  CHECK(back.critic_params.values == agent.critic_params.values);
  CHECK(back.actor_params.spec_id == agent.actor_params.spec_id);
  std::remove(path.c_str());
}

TEST_CASE("intensity agent checkpoints preserve the agent kind") {
  rl::PpoAgent agent = rl::make_intensity_agent(5, rl::PpoConfig{}, 3);
  const std::string path = "test_agent_int_tmp.ckpt";
  ser::save_agent(agent, path);
  rl::PpoAgent back = ser::load_agent(path);
  CHECK(back.kind == rl::AgentKind::kIntensity);
  CHECK(back.k == 5);
  CHECK(back.actor_params.values == agent.actor_params.values);
  std::remove(path.c_str());
}

TEST_CASE("corrupt checkpoints are rejected") {
  const std::string path = "test_agent_bad_tmp.ckpt";
  {
    std::ofstream out(path, std::ios::binary);
    out << "not a checkpoint at all";
  }
  CHECK_THROWS_AS(ser::load_agent(path), ConfigError);
  CHECK_THROWS_AS(ser::load_agent("missing.ckpt"), ConfigError);

  // Truncate a valid checkpoint mid-parameters.
  rl::PpoAgent agent = rl::make_allocation_agent(3, 2, rl::PpoConfig{}, 1);
  ser::save_agent(agent, path);
  std::string full;
  {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    full = buf.str();
  }
  {
    std::ofstream out(path, std::ios::binary);
    out.write(full.data(), static_cast<std::streamsize>(full.size() / 2));
  }
  CHECK_THROWS_AS(ser::load_agent(path), ConfigError);
  std::remove(path.c_str());
}
