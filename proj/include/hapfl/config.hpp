#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hapfl/aggregation.hpp"
#include "hapfl/client.hpp"

namespace hapfl {

enum class Mode { kHapfl, kFedavgUniform, kFixedModel, kFixedIntensity };

Mode parse_mode(const std::string& name);  // throws ConfigError listing valid modes
std::string mode_name(Mode mode);

struct DataConfig {
  int n_classes = 4;
  int dim = 16;
  int n_per_class = 64;
  int test_per_class = 32;
  double spread = 0.3;
  double alpha = 0.4;
};

struct ClientConfig {
  double psi_min = 1.0;
  double psi_span = 10.0;  // psi drawn log-uniform from [psi_min, psi_min*span]
  double drift_sigma = 0.02;
  double t_broadcast = 0.0;
  double t_upload = 0.0;
  double t_aggregate = 0.0;
};

struct FlConfig {
  double lambda1 = 0.4;
  double lambda2 = 0.6;
  double lambda3 = 0.5;
  double lambda4 = 0.5;
  double lr3 = 0.0003;
  int local_epochs = 20;  // E; the uniform baseline's per-client intensity
};

struct RlConfig {
  double clip_eps = 0.2;
  double gamma = 0.9;
  double lr1 = 0.02;    // allocation agent
  double lr2 = 0.0003;  // intensity agent
  int buffer = 5;
  int update_epochs = 4;
  int hidden = 32;
};

struct TierSpecConfig {
  std::vector<int> hidden;
  double cost_ratio = 1.0;
  int min_params = 0;
};

struct TiersConfig {
  std::vector<int> lite_hidden = {8};
  std::vector<TierSpecConfig> tiers = {
      {{16}, 2.0, 0},
      {{32}, 4.0, 0},
  };
};

struct ExperimentConfig {
  int K = 10;  // client population
  int k = 6;   // selected per round
  int rounds = 200;
  int episodes = 1;
  int tau_total = 120;  // total training intensity per round (k * E default)
  double md = 10.0;
  Mode mode = Mode::kHapfl;
  agg::Form aggregation_form = agg::Form::kDelta;
  std::uint64_t seed = 0;
  DataConfig data;
  ClientConfig clients;
  FlConfig fl;
  RlConfig rl;
  TiersConfig tiers;

  /// Throws ConfigError naming the offending key.
  void validate() const;
  /// Instantiates the tier catalog for the configured dataset shape.
  client::TierCatalog catalog() const;
};

/// Parses a JSON object; absent keys take defaults, unknown keys are
/// rejected by name. `text` must be a JSON object literal.
ExperimentConfig config_from_json_text(const std::string& text);

/// Reads and parses the file at `path`.
ExperimentConfig parse_config(const std::string& path);

/// Serializes every field (round-trips through config_from_json_text).
std::string config_to_json_text(const ExperimentConfig& cfg);

}  // namespace hapfl
