#include "hapfl/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "hapfl/errors.hpp"
#include "json.hpp"

namespace hapfl {

namespace {

using nlohmann::json;

std::string qualify(const std::string& scope, const std::string& key) {
  return scope.empty() ? key : scope + "." + key;
}

[[noreturn]] void bad_key(const std::string& scope, const std::string& key,
                          const std::string& why) {
  throw ConfigError("config key \"" + qualify(scope, key) + "\" " + why);
}

/// Typed reader over one JSON object; tracks consumed keys so anything left
/// over can be rejected by name.
class ObjReader {
 public:
  ObjReader(const json& j, std::string scope)
      : j_(j), scope_(std::move(scope)) {
    if (!j.is_object())
      throw ConfigError((scope_.empty() ? std::string("config root") : scope_) +
                        " must be a JSON object");
  }

  void read_int(const char* key, int& out) {
    if (!mark(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) bad_key(scope_, key, "must be an integer");
    out = v.get<int>();
  }

  bool read_u64(const char* key, std::uint64_t& out) {
    if (!mark(key)) return false;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned() && !v.is_number_integer())
      bad_key(scope_, key, "must be a non-negative integer");
    if (v.is_number_integer() && v.get<long long>() < 0)
      bad_key(scope_, key, "must be a non-negative integer");
    out = v.get<std::uint64_t>();
    return true;
  }

  void read_double(const char* key, double& out) {
    if (!mark(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) bad_key(scope_, key, "must be a number");
    out = v.get<double>();
  }

  bool read_string(const char* key, std::string& out) {
    if (!mark(key)) return false;
    const json& v = j_.at(key);
    if (!v.is_string()) bad_key(scope_, key, "must be a string");
    out = v.get<std::string>();
    return true;
  }

  void read_int_list(const char* key, std::vector<int>& out) {
    if (!mark(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array()) bad_key(scope_, key, "must be an array of integers");
    out.clear();
    for (const json& e : v) {
      if (!e.is_number_integer())
        bad_key(scope_, key, "must be an array of integers");
      out.push_back(e.get<int>());
    }
  }

  bool take(const char* key, json& out) {
    if (!mark(key)) return false;
    out = j_.at(key);
    return true;
  }

  void finish() {
    for (const auto& [key, value] : j_.items())
      if (!used_.count(key))
        throw ConfigError("unknown config key \"" + qualify(scope_, key) +
                          "\"");
  }

 private:
  bool mark(const std::string& key) {
    if (!j_.contains(key)) return false;
    used_.insert(key);
    return true;
  }

  const json& j_;
  std::string scope_;
  std::set<std::string> used_;
};

ExperimentConfig from_json(const json& root) {
  ExperimentConfig cfg;
  ObjReader r(root, "");
  r.read_int("K", cfg.K);
  r.read_int("k", cfg.k);
  r.read_int("rounds", cfg.rounds);
  r.read_int("episodes", cfg.episodes);
  r.read_double("md", cfg.md);
  r.read_u64("seed", cfg.seed);

  std::string mode;
  if (r.read_string("mode", mode)) cfg.mode = parse_mode(mode);
  std::string form;
  if (r.read_string("aggregation_form", form)) {
    if (form == "delta")
      cfg.aggregation_form = agg::Form::kDelta;
    else if (form == "literal")
      cfg.aggregation_form = agg::Form::kLiteral;
    else
      throw ConfigError(
          "config key \"aggregation_form\" must be \"delta\" or \"literal\"");
  }

  json section;
  if (r.take("data", section)) {
    ObjReader d(section, "data");
    d.read_int("n_classes", cfg.data.n_classes);
    d.read_int("dim", cfg.data.dim);
    d.read_int("n_per_class", cfg.data.n_per_class);
    d.read_int("test_per_class", cfg.data.test_per_class);
    d.read_double("spread", cfg.data.spread);
    d.read_double("alpha", cfg.data.alpha);
    d.finish();
  }
  if (r.take("clients", section)) {
    ObjReader c(section, "clients");
    c.read_double("psi_min", cfg.clients.psi_min);
    c.read_double("psi_span", cfg.clients.psi_span);
    c.read_double("drift_sigma", cfg.clients.drift_sigma);
    c.read_double("t_broadcast", cfg.clients.t_broadcast);
    c.read_double("t_upload", cfg.clients.t_upload);
    c.read_double("t_aggregate", cfg.clients.t_aggregate);
    c.finish();
  }
  if (r.take("fl", section)) {
    ObjReader f(section, "fl");
    f.read_double("lambda1", cfg.fl.lambda1);
    f.read_double("lambda2", cfg.fl.lambda2);
    f.read_double("lambda3", cfg.fl.lambda3);
    f.read_double("lambda4", cfg.fl.lambda4);
    f.read_double("lr3", cfg.fl.lr3);
    f.read_int("local_epochs", cfg.fl.local_epochs);
    f.finish();
  }
  if (r.take("rl", section)) {
    ObjReader l(section, "rl");
    l.read_double("clip_eps", cfg.rl.clip_eps);
    l.read_double("gamma", cfg.rl.gamma);
    l.read_double("lr1", cfg.rl.lr1);
    l.read_double("lr2", cfg.rl.lr2);
    l.read_int("buffer", cfg.rl.buffer);
    l.read_int("update_epochs", cfg.rl.update_epochs);
    l.read_int("hidden", cfg.rl.hidden);
    l.finish();
  }
  if (r.take("tiers", section)) {
    ObjReader t(section, "tiers");
    t.read_int_list("lite_hidden", cfg.tiers.lite_hidden);
    json tier_list;
    if (t.take("tiers", tier_list)) {
      if (!tier_list.is_array())
        throw ConfigError("config key \"tiers.tiers\" must be an array");
      cfg.tiers.tiers.clear();
      int idx = 0;
      for (const json& e : tier_list) {
        ObjReader te(e, "tiers.tiers[" + std::to_string(idx) + "]");
        TierSpecConfig ts;
        te.read_int_list("hidden", ts.hidden);
        te.read_double("cost_ratio", ts.cost_ratio);
        te.read_int("min_params", ts.min_params);
        te.finish();
        cfg.tiers.tiers.push_back(std::move(ts));
        ++idx;
      }
    }
    t.finish();
  }

  // tau_total defaults to k * E so the uniform baseline spends exactly E
  // epochs per selected client.
  if (root.contains("tau_total")) {
    r.read_int("tau_total", cfg.tau_total);
  } else {
    cfg.tau_total = cfg.k * cfg.fl.local_epochs;
  }

  r.finish();
  cfg.validate();
  return cfg;
}

}  // namespace

Mode parse_mode(const std::string& name) {
  if (name == "hapfl") return Mode::kHapfl;
  if (name == "fedavg_uniform") return Mode::kFedavgUniform;
  if (name == "fixed_model") return Mode::kFixedModel;
  if (name == "fixed_intensity") return Mode::kFixedIntensity;
  throw ConfigError("unknown mode \"" + name +
                    "\"; valid modes are hapfl, fedavg_uniform, fixed_model, "
                    "fixed_intensity");
}

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::kHapfl: return "hapfl";
    case Mode::kFedavgUniform: return "fedavg_uniform";
    case Mode::kFixedModel: return "fixed_model";
    case Mode::kFixedIntensity: return "fixed_intensity";
  }
  throw ContractError("invalid mode value");
}

void ExperimentConfig::validate() const {
  if (K < 1) throw ConfigError("config key \"K\" must be at least 1");
  if (k < 2 || k > K)
    throw ConfigError("config key \"k\" (" + std::to_string(k) +
                      ") must lie in [2, K=" + std::to_string(K) +
                      "]; straggling metrics need two clients per round");
  if (rounds < 1) throw ConfigError("config key \"rounds\" must be at least 1");
  if (episodes < 1)
    throw ConfigError("config key \"episodes\" must be at least 1");
  if (tau_total < k)
    throw ConfigError("config key \"tau_total\" (" + std::to_string(tau_total) +
                      ") must be at least k=" + std::to_string(k));
  if (md <= 0.0) throw ConfigError("config key \"md\" must be positive");

  if (data.n_classes < 2)
    throw ConfigError("config key \"data.n_classes\" must be at least 2");
  if (data.dim < 2) throw ConfigError("config key \"data.dim\" must be at least 2");
  if (data.n_per_class < 1)
    throw ConfigError("config key \"data.n_per_class\" must be at least 1");
  if (data.test_per_class < 1)
    throw ConfigError("config key \"data.test_per_class\" must be at least 1");
  if (data.spread <= 0.0)
    throw ConfigError("config key \"data.spread\" must be positive");
  if (data.alpha <= 0.0)
    throw ConfigError("config key \"data.alpha\" must be positive");
  if (data.n_classes * data.n_per_class < K)
    throw ConfigError("config key \"data.n_per_class\" too small: dataset must "
                      "hold at least one sample per client");

  if (clients.psi_min <= 0.0)
    throw ConfigError("config key \"clients.psi_min\" must be positive");
  if (clients.psi_span < 1.0)
    throw ConfigError("config key \"clients.psi_span\" must be at least 1");
  if (clients.drift_sigma < 0.0)
    throw ConfigError("config key \"clients.drift_sigma\" must be non-negative");
  if (clients.t_broadcast < 0.0 || clients.t_upload < 0.0 ||
      clients.t_aggregate < 0.0)
    throw ConfigError("config keys \"clients.t_*\" must be non-negative");

  if (std::abs(fl.lambda1 + fl.lambda2 - 1.0) > 1e-9)
    throw ConfigError("config keys \"fl.lambda1\" + \"fl.lambda2\" must sum to 1");
  if (std::abs(fl.lambda3 + fl.lambda4 - 1.0) > 1e-9)
    throw ConfigError("config keys \"fl.lambda3\" + \"fl.lambda4\" must sum to 1");
  if (fl.lambda1 < 0.0 || fl.lambda2 < 0.0 || fl.lambda3 < 0.0 ||
      fl.lambda4 < 0.0)
    throw ConfigError("config keys \"fl.lambda*\" must be non-negative");
  if (fl.lr3 <= 0.0) throw ConfigError("config key \"fl.lr3\" must be positive");
  if (fl.local_epochs < 1)
    throw ConfigError("config key \"fl.local_epochs\" must be at least 1");

  if (rl.clip_eps <= 0.0 || rl.clip_eps >= 1.0)
    throw ConfigError("config key \"rl.clip_eps\" must lie in (0, 1)");
  if (rl.gamma < 0.0 || rl.gamma > 1.0)
    throw ConfigError("config key \"rl.gamma\" must lie in [0, 1]");
  if (rl.lr1 <= 0.0) throw ConfigError("config key \"rl.lr1\" must be positive");
  if (rl.lr2 <= 0.0) throw ConfigError("config key \"rl.lr2\" must be positive");
  if (rl.buffer < 1)
    throw ConfigError("config key \"rl.buffer\" must be at least 1");
  if (rl.update_epochs < 1)
    throw ConfigError("config key \"rl.update_epochs\" must be at least 1");
  if (rl.hidden < 1)
    throw ConfigError("config key \"rl.hidden\" must be at least 1");

  if (tiers.tiers.empty())
    throw ConfigError("config key \"tiers.tiers\" must list at least one tier");
  try {
    catalog().validate();
  } catch (const ContractError& e) {
    throw ConfigError(std::string("config key \"tiers\" invalid: ") + e.what());
  }
}

client::TierCatalog ExperimentConfig::catalog() const {
  auto build_spec = [this](const std::vector<int>& hidden) {
    std::vector<int> sizes;
    sizes.push_back(data.dim);
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(data.n_classes);
    return nn::NetworkSpec{sizes, nn::Activation::kRelu};
  };
  client::TierCatalog cat;
  cat.lite = {0, build_spec(tiers.lite_hidden), 1.0, 0};
  int id = 1;
  for (const TierSpecConfig& ts : tiers.tiers) {
    cat.tiers.push_back({id, build_spec(ts.hidden), ts.cost_ratio,
                         ts.min_params});
    ++id;
  }
  return cat;
}

ExperimentConfig config_from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON config: ") + e.what());
  }
  return from_json(root);
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return config_from_json_text(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string config_to_json_text(const ExperimentConfig& cfg) {
  json root;
  root["K"] = cfg.K;
  root["k"] = cfg.k;
  root["rounds"] = cfg.rounds;
  root["episodes"] = cfg.episodes;
  root["tau_total"] = cfg.tau_total;
  root["md"] = cfg.md;
  root["mode"] = mode_name(cfg.mode);
  root["aggregation_form"] =
      cfg.aggregation_form == agg::Form::kDelta ? "delta" : "literal";
  root["seed"] = cfg.seed;
  root["data"] = {{"n_classes", cfg.data.n_classes},
                  {"dim", cfg.data.dim},
                  {"n_per_class", cfg.data.n_per_class},
                  {"test_per_class", cfg.data.test_per_class},
                  {"spread", cfg.data.spread},
                  {"alpha", cfg.data.alpha}};
  root["clients"] = {{"psi_min", cfg.clients.psi_min},
                     {"psi_span", cfg.clients.psi_span},
                     {"drift_sigma", cfg.clients.drift_sigma},
                     {"t_broadcast", cfg.clients.t_broadcast},
                     {"t_upload", cfg.clients.t_upload},
                     {"t_aggregate", cfg.clients.t_aggregate}};
  root["fl"] = {{"lambda1", cfg.fl.lambda1},   {"lambda2", cfg.fl.lambda2},
                {"lambda3", cfg.fl.lambda3},   {"lambda4", cfg.fl.lambda4},
                {"lr3", cfg.fl.lr3},           {"local_epochs", cfg.fl.local_epochs}};
  root["rl"] = {{"clip_eps", cfg.rl.clip_eps},
                {"gamma", cfg.rl.gamma},
                {"lr1", cfg.rl.lr1},
                {"lr2", cfg.rl.lr2},
                {"buffer", cfg.rl.buffer},
                {"update_epochs", cfg.rl.update_epochs},
                {"hidden", cfg.rl.hidden}};
  json tier_list = json::array();
  for (const TierSpecConfig& ts : cfg.tiers.tiers)
    tier_list.push_back({{"hidden", ts.hidden},
                         {"cost_ratio", ts.cost_ratio},
                         {"min_params", ts.min_params}});
  root["tiers"] = {{"lite_hidden", cfg.tiers.lite_hidden},
                   {"tiers", tier_list}};
  return root.dump(2) + "\n";
}

}  // namespace hapfl
