#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hapfl/config.hpp"
#include "hapfl/errors.hpp"
#include "hapfl/metrics_io.hpp"
#include "hapfl/orchestrator.hpp"
#include "hapfl/serialize.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string now_utc() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct RunArgs {
  std::string config_path;
  std::string mode;
  std::string seed;
  std::string out_dir = "runs";
};

void write_manifest(const fs::path& dir, const hapfl::ExperimentConfig& cfg,
                    const std::string& run_id, const std::string& started,
                    const std::string& status, const std::string& ended) {
  json m;
  m["run_id"] = run_id;
  m["status"] = status;
  m["started"] = started;
  if (!ended.empty()) m["ended"] = ended;
  m["config"] = json::parse(hapfl::config_to_json_text(cfg));
  m["paths"] = {{"metrics", "metrics.csv"}, {"checkpoints", "checkpoints"}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw hapfl::ConfigError("cannot write manifest in " + dir.string());
  out << m.dump(2) << "\n";
}

int cmd_run(const RunArgs& args) {
  hapfl::ExperimentConfig cfg = args.config_path.empty()
                                    ? hapfl::config_from_json_text("{}")
                                    : hapfl::parse_config(args.config_path);
  if (const char* env = std::getenv("HAPFL_SEED"); env && *env)
    cfg.seed = std::stoull(env);
  if (!args.seed.empty()) cfg.seed = std::stoull(args.seed);
  if (!args.mode.empty()) cfg.mode = hapfl::parse_mode(args.mode);
  cfg.validate();

  const std::string config_text = hapfl::config_to_json_text(cfg);
  const std::string run_id = fnv1a_hex(config_text);
  const fs::path run_dir = fs::path(args.out_dir) / run_id;
  fs::create_directories(run_dir / "checkpoints");

  const std::string started = now_utc();
  write_manifest(run_dir, cfg, run_id, started, "incomplete", "");

  std::ofstream csv(run_dir / "metrics.csv");
  if (!csv)
    throw hapfl::ConfigError("cannot write metrics.csv in " + run_dir.string());
  csv << hapfl::io::metrics_csv_header() << '\n';

  hapfl::orch::run_experiment(
      cfg,
      [&](const hapfl::orch::RoundMetrics& m) {
        csv << hapfl::io::metrics_csv_row(m) << '\n';
      },
      [&](const hapfl::orch::ExperimentState& st, int episode) {
        const fs::path ckpt = run_dir / "checkpoints";
        const std::string suffix = "_ep" + std::to_string(episode) + ".ckpt";
        hapfl::ser::save_agent(st.alloc_agent,
                               (ckpt / ("allocation" + suffix)).string());
        hapfl::ser::save_agent(st.intensity_agent,
                               (ckpt / ("intensity" + suffix)).string());
      });
  csv.close();

  write_manifest(run_dir, cfg, run_id, started, "complete", now_utc());
  std::cout << run_dir.string() << "\n";
  return 0;
}

std::vector<std::pair<std::string, std::string>> summary_cells(
    const hapfl::orch::RunSummary& s) {
  using hapfl::io::format_g6;
  return {
      {"rounds", std::to_string(s.rounds)},
      {"mean_delta_tc", format_g6(s.mean_delta_tc)},
      {"median_delta_tc", format_g6(s.median_delta_tc)},
      {"total_time", format_g6(s.total_time)},
      {"final_acc_lite", format_g6(s.final_acc_lite)},
      {"final_acc_small", format_g6(s.final_acc_small)},
      {"final_acc_large", format_g6(s.final_acc_large)},
      {"straggling_latency_reduction_pct",
       format_g6(s.straggling_latency_reduction_pct)},
      {"total_time_reduction_pct", format_g6(s.total_time_reduction_pct)},
  };
}

int cmd_compare(const std::vector<std::string>& dirs,
                const std::string& out_path) {
  std::vector<std::string> labels;
  std::vector<std::vector<hapfl::orch::RoundMetrics>> runs;
  for (const std::string& dir : dirs) {
    labels.push_back(fs::path(dir).filename().string().empty()
                         ? dir
                         : fs::path(dir).filename().string());
    runs.push_back(hapfl::io::read_metrics_csv(
        (fs::path(dir) / "metrics.csv").string()));
  }
  const std::vector<hapfl::orch::RunSummary> summaries =
      hapfl::orch::compare_runs(labels, runs);

  // One metric per row, one column per run: both the CSV file and the
  // aligned text printed to stdout.
  const std::size_t n_metrics = summary_cells(summaries.front()).size();
  std::vector<std::vector<std::string>> table(
      n_metrics + 1, std::vector<std::string>(summaries.size() + 1));
  table[0][0] = "metric";
  for (std::size_t j = 0; j < summaries.size(); ++j) {
    table[0][j + 1] = summaries[j].label;
    const auto cells = summary_cells(summaries[j]);
    for (std::size_t i = 0; i < n_metrics; ++i) {
      table[i + 1][0] = cells[i].first;
      table[i + 1][j + 1] = cells[i].second;
    }
  }

  std::ofstream csv(out_path);
  if (!csv) throw hapfl::ConfigError("cannot write summary: " + out_path);
  for (const auto& row : table) {
    for (std::size_t j = 0; j < row.size(); ++j)
      csv << (j ? "," : "") << row[j];
    csv << '\n';
  }

  std::vector<std::size_t> widths(table[0].size(), 0);
  for (const auto& row : table)
    for (std::size_t j = 0; j < row.size(); ++j)
      widths[j] = std::max(widths[j], row[j].size());
  for (const auto& row : table) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      std::cout << row[j] << std::string(widths[j] - row[j].size(), ' ');
      if (j + 1 < row.size()) std::cout << "  ";
    }
    std::cout << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HAPFL federated-learning simulator"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run = app.add_subcommand(
      "run", "run one experiment and write metrics + checkpoints");
  run->add_option("--config", run_args.config_path,
                  "JSON config file (defaults apply when omitted)");
  run->add_option("--mode", run_args.mode,
                  "hapfl, fedavg_uniform, fixed_model, or fixed_intensity");
  run->add_option("--seed", run_args.seed, "global seed override");
  run->add_option("--out", run_args.out_dir,
                  "output root; the run writes to <out>/<run_id>/");

  std::vector<std::string> compare_dirs;
  std::string compare_out = "compare_summary.csv";
  CLI::App* compare =
      app.add_subcommand("compare", "summarize two or more finished runs");
  compare->add_option("dirs", compare_dirs, "run directories")
      ->expected(2, -1)
      ->required();
  compare->add_option("--out", compare_out, "summary CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_args);
    return cmd_compare(compare_dirs, compare_out);
  } catch (const hapfl::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
