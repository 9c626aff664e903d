#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "hapfl/orchestrator.hpp"

namespace hapfl::io {

/// Fixed schema: round,selected,tier_assignment,tau,delta_tc,total_time,
/// r1,r2,acc_lite,acc_small,acc_large,weights. List cells are
/// semicolon-joined; floats use 6 significant digits. acc_small/acc_large
/// are the first/last tier's global accuracy.
std::string metrics_csv_header();
std::string metrics_csv_row(const orch::RoundMetrics& m);

void write_metrics_csv(std::ostream& out,
                       const std::vector<orch::RoundMetrics>& metrics);

/// Parses a metrics CSV back into RoundMetrics. Only CSV-carried fields are
/// recovered: per-client time columns stay empty and acc_tiers holds the
/// small/large pair. Throws ConfigError on schema or parse failures.
std::vector<orch::RoundMetrics> read_metrics_csv(const std::string& path);

/// %.6g rendering used for every float cell.
std::string format_g6(double v);

}  // namespace hapfl::io
