#include "hapfl/serialize.hpp"

#include <cstdint>
#include <fstream>

#include "hapfl/errors.hpp"
#include "json.hpp"

namespace hapfl::ser {

namespace {

constexpr const char* kMagic = "hapfl-agent-v1\n";

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ConfigError("truncated checkpoint stream");
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ConfigError("truncated checkpoint stream");
  return v;
}

}  // namespace

void write_param_vector(std::ostream& out, const nn::ParamVector& pv) {
  write_u32(out, static_cast<std::uint32_t>(pv.spec_id.size()));
  out.write(pv.spec_id.data(), static_cast<std::streamsize>(pv.spec_id.size()));
  write_u64(out, pv.values.size());
  out.write(reinterpret_cast<const char*>(pv.values.data()),
            static_cast<std::streamsize>(pv.values.size() * sizeof(double)));
}

nn::ParamVector read_param_vector(std::istream& in) {
  const std::uint32_t id_len = read_u32(in);
  if (id_len > 4096) throw ConfigError("implausible spec id length in checkpoint");
  std::string spec_id(id_len, '\0');
  in.read(spec_id.data(), id_len);
  const std::uint64_t count = read_u64(in);
  if (count > (1u << 28)) throw ConfigError("implausible parameter count in checkpoint");
  nn::ParamVector pv;
  pv.spec_id = std::move(spec_id);
  pv.values.resize(count);
  in.read(reinterpret_cast<char*>(pv.values.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw ConfigError("truncated checkpoint stream");
  return pv;
}

void save_agent(const rl::PpoAgent& agent, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);
  out << kMagic;
  nlohmann::json header;
  header["kind"] =
      agent.kind == rl::AgentKind::kAllocation ? "allocation" : "intensity";
  header["k"] = agent.k;
  header["n_tiers"] = agent.n_tiers;
  header["clip_eps"] = agent.cfg.clip_eps;
  header["gamma"] = agent.cfg.gamma;
  header["actor_lr"] = agent.cfg.actor_lr;
  header["critic_lr"] = agent.cfg.critic_lr;
  header["update_epochs"] = agent.cfg.update_epochs;
  header["hidden"] = agent.cfg.hidden;
  header["reward_scale"] = agent.reward_scale;
  const std::string text = header.dump();
  write_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_param_vector(out, agent.actor_params);
  write_param_vector(out, agent.critic_params);
  if (!out) throw ConfigError("failed writing checkpoint: " + path);
}

rl::PpoAgent load_agent(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  std::string magic(std::char_traits<char>::length(kMagic), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != kMagic)
    throw ConfigError("not an agent checkpoint: " + path);
  const std::uint32_t header_len = read_u32(in);
  if (header_len > 65536) throw ConfigError("implausible checkpoint header");
  std::string text(header_len, '\0');
  in.read(text.data(), header_len);
  if (!in) throw ConfigError("truncated checkpoint: " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("corrupt checkpoint header: " + std::string(e.what()));
  }
  rl::PpoConfig cfg;
  cfg.clip_eps = header.at("clip_eps").get<double>();
  cfg.gamma = header.at("gamma").get<double>();
  cfg.actor_lr = header.at("actor_lr").get<double>();
  cfg.critic_lr = header.at("critic_lr").get<double>();
  cfg.update_epochs = header.at("update_epochs").get<int>();
  cfg.hidden = header.at("hidden").get<int>();
  const std::string kind = header.at("kind").get<std::string>();
  const int k = header.at("k").get<int>();
  const int n_tiers = header.at("n_tiers").get<int>();
  if (k < 1 || n_tiers < 0)
    throw ConfigError("implausible agent dimensions in checkpoint");

  rl::PpoAgent agent;
  if (kind == "allocation") {
    agent = rl::make_allocation_agent(k, n_tiers, cfg, 0);
  } else if (kind == "intensity") {
    agent = rl::make_intensity_agent(k, cfg, 0);
  } else {
    throw ConfigError("unknown agent kind in checkpoint: " + kind);
  }
  agent.reward_scale = header.at("reward_scale").get<double>();

  nn::ParamVector actor = read_param_vector(in);
  nn::ParamVector critic = read_param_vector(in);
  if (actor.spec_id != agent.actor_spec.id() ||
      actor.values.size() !=
          static_cast<std::size_t>(agent.actor_spec.param_count()))
    throw ConfigError("checkpoint actor parameters do not match their spec");
  if (critic.spec_id != agent.critic_spec.id() ||
      critic.values.size() !=
          static_cast<std::size_t>(agent.critic_spec.param_count()))
    throw ConfigError("checkpoint critic parameters do not match their spec");
  agent.actor_params = std::move(actor);
  agent.critic_params = std::move(critic);
  return agent;
}

}  // namespace hapfl::ser
