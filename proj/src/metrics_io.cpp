#include "hapfl/metrics_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "hapfl/errors.hpp"

namespace hapfl::io {

namespace {

constexpr const char* kHeader =
    "round,selected,tier_assignment,tau,delta_tc,total_time,r1,r2,acc_lite,"
    "acc_small,acc_large,weights";

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(v[i]);
  }
  return s;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ';';
    s += format_g6(v[i]);
  }
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

int parse_int(const std::string& s, int line_no) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("metrics CSV line " + std::to_string(line_no) +
                      ": bad integer \"" + s + "\"");
  }
}

double parse_double(const std::string& s, int line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("metrics CSV line " + std::to_string(line_no) +
                      ": bad number \"" + s + "\"");
  }
}

std::vector<int> parse_int_list(const std::string& s, int line_no) {
  std::vector<int> out;
  if (s.empty()) return out;
  for (const std::string& cell : split(s, ';'))
    out.push_back(parse_int(cell, line_no));
  return out;
}

std::vector<double> parse_double_list(const std::string& s, int line_no) {
  std::vector<double> out;
  if (s.empty()) return out;
  for (const std::string& cell : split(s, ';'))
    out.push_back(parse_double(cell, line_no));
  return out;
}

}  // namespace

std::string format_g6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string metrics_csv_header() { return kHeader; }

std::string metrics_csv_row(const orch::RoundMetrics& m) {
  if (m.acc_tiers.empty())
    throw ContractError("metrics row is missing per-tier accuracies");
  std::string s;
  s += std::to_string(m.round);
  s += ',';
  s += join_ints(m.selected);
  s += ',';
  s += join_ints(m.tiers);
  s += ',';
  s += join_ints(m.taus);
  s += ',';
  s += format_g6(m.delta_tc);
  s += ',';
  s += format_g6(m.total_time);
  s += ',';
  s += format_g6(m.r1);
  s += ',';
  s += format_g6(m.r2);
  s += ',';
  s += format_g6(m.acc_lite);
  s += ',';
  s += format_g6(m.acc_tiers.front());
  s += ',';
  s += format_g6(m.acc_tiers.back());
  s += ',';
  s += join_doubles(m.weights);
  return s;
}

void write_metrics_csv(std::ostream& out,
                       const std::vector<orch::RoundMetrics>& metrics) {
  out << kHeader << '\n';
  for (const orch::RoundMetrics& m : metrics) out << metrics_csv_row(m) << '\n';
}

std::vector<orch::RoundMetrics> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open metrics CSV: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw ConfigError("metrics CSV is empty: " + path);
  if (line == std::string(kHeader) + "\r") line.pop_back();
  if (line != kHeader)
    throw ConfigError("metrics CSV has an unexpected header: " + path);

  std::vector<orch::RoundMetrics> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split(line, ',');
    if (cells.size() != 12)
      throw ConfigError("metrics CSV line " + std::to_string(line_no) +
                        ": expected 12 columns, got " +
                        std::to_string(cells.size()));
    orch::RoundMetrics m;
    m.round = parse_int(cells[0], line_no);
    m.selected = parse_int_list(cells[1], line_no);
    m.tiers = parse_int_list(cells[2], line_no);
    m.taus = parse_int_list(cells[3], line_no);
    m.delta_tc = parse_double(cells[4], line_no);
    m.total_time = parse_double(cells[5], line_no);
    m.r1 = parse_double(cells[6], line_no);
    m.r2 = parse_double(cells[7], line_no);
    m.acc_lite = parse_double(cells[8], line_no);
    m.acc_tiers = {parse_double(cells[9], line_no),
                   parse_double(cells[10], line_no)};
    m.weights = parse_double_list(cells[11], line_no);
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace hapfl::io
