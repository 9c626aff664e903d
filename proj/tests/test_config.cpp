#include "hapfl/config.hpp"

#include <cstdio>
#include <fstream>
#include <string>

#include "doctest.h"
#include "hapfl/errors.hpp"

using namespace hapfl;

TEST_CASE("empty object yields the full default config") {
  ExperimentConfig cfg = config_from_json_text("{}");
  CHECK(cfg.K == 10);
  CHECK(cfg.k == 6);
  CHECK(cfg.rounds == 200);
  CHECK(cfg.episodes == 1);
  CHECK(cfg.tau_total == 120);
  CHECK(cfg.md == doctest::Approx(10.0));
  CHECK(cfg.mode == Mode::kHapfl);
  CHECK(cfg.aggregation_form == agg::Form::kDelta);
  CHECK(cfg.seed == 0);
  CHECK(cfg.data.n_classes == 4);
  CHECK(cfg.data.dim == 16);
  CHECK(cfg.clients.psi_span == doctest::Approx(10.0));
  CHECK(cfg.fl.lambda1 == doctest::Approx(0.4));
  CHECK(cfg.fl.lambda2 == doctest::Approx(0.6));
  CHECK(cfg.fl.local_epochs == 20);
  CHECK(cfg.rl.clip_eps == doctest::Approx(0.2));
  CHECK(cfg.rl.gamma == doctest::Approx(0.9));
  CHECK(cfg.rl.lr1 == doctest::Approx(0.02));
  CHECK(cfg.rl.lr2 == doctest::Approx(0.0003));
  CHECK(cfg.rl.buffer == 5);
  CHECK(cfg.tiers.lite_hidden == std::vector<int>{8});
  REQUIRE(cfg.tiers.tiers.size() == 2);
  CHECK(cfg.tiers.tiers[0].hidden == std::vector<int>{16});
  CHECK(cfg.tiers.tiers[0].cost_ratio == doctest::Approx(2.0));
  CHECK(cfg.tiers.tiers[1].cost_ratio == doctest::Approx(4.0));
}

TEST_CASE("k exceeding K is rejected naming k") {
  try {
    config_from_json_text(R"({"k": 12, "K": 10})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("\"k\"") != std::string::npos);
  }
}

TEST_CASE("serialized defaults parse back to an identical config") {
  ExperimentConfig a = config_from_json_text("{}");
  std::string text = config_to_json_text(a);
  ExperimentConfig b = config_from_json_text(text);
  CHECK(config_to_json_text(b) == text);
  CHECK(b.K == a.K);
  CHECK(b.k == a.k);
  CHECK(b.rounds == a.rounds);
  CHECK(b.tau_total == a.tau_total);
  CHECK(b.mode == a.mode);
  CHECK(b.seed == a.seed);
  CHECK(b.fl.lambda1 == a.fl.lambda1);
  CHECK(b.rl.lr2 == a.rl.lr2);
  CHECK(b.tiers.tiers.size() == a.tiers.tiers.size());
}

TEST_CASE("round-trip preserves non-default values") {
  ExperimentConfig a = config_from_json_text(R"({
    "K": 20, "k": 5, "rounds": 7, "seed": 12345,
    "mode": "fixed_model", "aggregation_form": "literal",
    "data": {"dim": 8, "n_classes": 3},
    "fl": {"lambda1": 0.3, "lambda2": 0.7},
    "rl": {"lr2": 0.02},
    "tiers": {"lite_hidden": [4], "tiers": [{"hidden": [6, 6], "cost_ratio": 3.5, "min_params": 10}]}
  })");
  ExperimentConfig b = config_from_json_text(config_to_json_text(a));
  CHECK(b.K == 20);
  CHECK(b.k == 5);
  CHECK(b.seed == 12345);
  CHECK(b.mode == Mode::kFixedModel);
  CHECK(b.aggregation_form == agg::Form::kLiteral);
  CHECK(b.data.dim == 8);
  CHECK(b.fl.lambda1 == doctest::Approx(0.3));
  CHECK(b.rl.lr2 == doctest::Approx(0.02));
  REQUIRE(b.tiers.tiers.size() == 1);
  CHECK(b.tiers.tiers[0].hidden == std::vector<int>{6, 6});
  CHECK(b.tiers.tiers[0].cost_ratio == doctest::Approx(3.5));
  CHECK(b.tiers.tiers[0].min_params == 10);
}

TEST_CASE("tau_total defaults to k times local_epochs") {
  ExperimentConfig cfg = config_from_json_text(R"({"k": 4, "fl": {"local_epochs": 7}})");
  CHECK(cfg.tau_total == 28);
  ExperimentConfig explicit_tau =
      config_from_json_text(R"({"k": 4, "tau_total": 50})");
  CHECK(explicit_tau.tau_total == 50);
}

TEST_CASE("unknown keys are rejected by name") {
  try {
    config_from_json_text(R"({"roundz": 5})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("roundz") != std::string::npos);
  }
  try {
    config_from_json_text(R"({"rl": {"lr9": 5}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("rl.lr9") != std::string::npos);
  }
}

TEST_CASE("invalid mode lists the valid modes") {
  try {
    config_from_json_text(R"({"mode": "bogus"})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    CHECK(msg.find("bogus") != std::string::npos);
    CHECK(msg.find("hapfl") != std::string::npos);
    CHECK(msg.find("fedavg_uniform") != std::string::npos);
    CHECK(msg.find("fixed_model") != std::string::npos);
    CHECK(msg.find("fixed_intensity") != std::string::npos);
  }
}

TEST_CASE("mode names round-trip through parse_mode") {
  for (Mode m : {Mode::kHapfl, Mode::kFedavgUniform, Mode::kFixedModel,
                 Mode::kFixedIntensity})
    CHECK(parse_mode(mode_name(m)) == m);
}

TEST_CASE("malformed JSON and missing files raise ConfigError") {
  CHECK_THROWS_AS(config_from_json_text("{nope"), ConfigError);
  CHECK_THROWS_AS(config_from_json_text("[1,2]"), ConfigError);
  CHECK_THROWS_AS(parse_config("/nonexistent/path.json"), ConfigError);
}

TEST_CASE("parse_config reads a file and prefixes errors with the path") {
  std::string path = "test_config_tmp.json";
  {
    std::ofstream out(path);
    out << R"({"K": 3, "k": 2, "data": {"n_per_class": 4}})";
  }
  ExperimentConfig cfg = parse_config(path);
  CHECK(cfg.K == 3);
  CHECK(cfg.k == 2);
  {
    std::ofstream out(path);
    out << R"({"k": 99})";
  }
  try {
    parse_config(path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(path) != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("validation names the offending key") {
  struct Case {
    const char* text;
    const char* key;
  };
  const Case cases[] = {
      {R"({"K": 0})", "\"K\""},
      {R"({"rounds": 0})", "\"rounds\""},
      {R"({"tau_total": 2, "k": 6})", "\"tau_total\""},
      {R"({"md": -1})", "\"md\""},
      {R"({"data": {"n_classes": 1}})", "\"data.n_classes\""},
      {R"({"data": {"spread": 0}})", "\"data.spread\""},
      {R"({"clients": {"psi_min": 0}})", "\"clients.psi_min\""},
      {R"({"fl": {"lambda1": 0.5}})", "\"fl.lambda1\""},
      {R"({"fl": {"lr3": 0}})", "\"fl.lr3\""},
      {R"({"rl": {"clip_eps": 1.5}})", "\"rl.clip_eps\""},
      {R"({"rl": {"buffer": 0}})", "\"rl.buffer\""},
      {R"({"tiers": {"tiers": []}})", "\"tiers.tiers\""},
  };
  for (const Case& c : cases) {
    try {
      config_from_json_text(c.text);
      FAIL("expected ConfigError for ", c.text);
    } catch (const ConfigError& e) {
      INFO("input: ", c.text, " message: ", e.what());
      CHECK(std::string(e.what()).find(c.key) != std::string::npos);
    }
  }
}

TEST_CASE("catalog builds specs around the dataset shape") {
  ExperimentConfig cfg = config_from_json_text(
      R"({"data": {"dim": 12, "n_classes": 5}})");
  client::TierCatalog cat = cfg.catalog();
  CHECK(cat.lite.spec.layer_sizes == std::vector<int>{12, 8, 5});
  CHECK(cat.lite.cost_ratio == doctest::Approx(1.0));
  REQUIRE(cat.n_tiers() == 2);
  CHECK(cat.tier(1).spec.layer_sizes == std::vector<int>{12, 16, 5});
  CHECK(cat.tier(2).spec.layer_sizes == std::vector<int>{12, 32, 5});
  CHECK(cat.tier(2).cost_ratio == doctest::Approx(4.0));
  cat.validate();
}

TEST_CASE("tier catalog violations surface as config errors") {
  // A larger tier with a smaller cost ratio breaks the cost/size ordering.
  try {
    config_from_json_text(
        R"({"tiers": {"tiers": [{"hidden": [16], "cost_ratio": 4.0},
                                 {"hidden": [32], "cost_ratio": 2.0}]}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("tiers") != std::string::npos);
  }
}
