#include "hapfl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "hapfl/errors.hpp"
#include "hapfl/rng.hpp"
#include "hapfl/rounding.hpp"

namespace hapfl::data {

namespace {

/// Fixed class geometry: raw Gaussian directions from a constant-seeded
/// stream, Gram-Schmidt orthogonalized while dimensions allow, unit norm,
/// scaled by 3. Independent of the dataset seed so different seeds draw from
/// the same classification problem.
std::vector<std::vector<double>> class_centers(int n_classes, int dim) {
  rng::Stream s(0x48415046ULL);  // constant, not the experiment seed
  std::vector<std::vector<double>> centers;
  centers.reserve(static_cast<std::size_t>(n_classes));
  for (int c = 0; c < n_classes; ++c) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double norm = 0.0;
    while (norm < 1e-6) {
      for (double& x : v) x = s.normal();
      if (c < dim) {
        for (const auto& prev : centers) {
          double dot = 0.0;
          for (int i = 0; i < dim; ++i) dot += v[i] * prev[i];
          dot /= 9.0;  // prev has norm 3
          for (int i = 0; i < dim; ++i) v[i] -= dot * prev[i];
        }
      }
      norm = 0.0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
    }
    for (double& x : v) x *= 3.0 / norm;
    centers.push_back(std::move(v));
  }
  return centers;
}

Dataset subset(const Dataset& ds, const std::vector<int>& idx) {
  Dataset out;
  out.n_classes = ds.n_classes;
  out.inputs = nn::Matrix(static_cast<int>(idx.size()), ds.dim());
  out.labels.resize(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    for (int c = 0; c < ds.dim(); ++c)
      out.inputs.at(static_cast<int>(r), c) = ds.inputs.at(idx[r], c);
    out.labels[r] = ds.labels[static_cast<std::size_t>(idx[r])];
  }
  return out;
}

}  // namespace

Dataset gen_blobs(int n_classes, int dim, int n_per_class, double spread,
                  std::uint64_t seed) {
  if (n_classes < 2) throw ContractError("gen_blobs: need at least 2 classes");
  if (dim < 2) throw ContractError("gen_blobs: need dim >= 2");
  if (n_per_class < 1) throw ContractError("gen_blobs: need n_per_class >= 1");
  if (spread <= 0.0) throw ContractError("gen_blobs: spread must be positive");

  const auto centers = class_centers(n_classes, dim);
  Dataset ds;
  ds.n_classes = n_classes;
  ds.inputs = nn::Matrix(n_classes * n_per_class, dim);
  ds.labels.resize(static_cast<std::size_t>(n_classes) * n_per_class);
  int row = 0;
  for (int c = 0; c < n_classes; ++c) {
    rng::Stream noise(rng::derive(seed, rng::kTagBlobNoise, c));
    for (int j = 0; j < n_per_class; ++j, ++row) {
      for (int i = 0; i < dim; ++i)
        ds.inputs.at(row, i) = centers[c][i] + spread * noise.normal();
      ds.labels[static_cast<std::size_t>(row)] = c;
    }
  }
  return ds;
}

std::vector<Dataset> dirichlet_partition(const Dataset& ds,
                                         const PartitionConfig& cfg) {
  if (ds.size() < 1) throw ContractError("dirichlet_partition: empty dataset");
  if (cfg.n_clients < 1)
    throw ContractError("dirichlet_partition: need at least 1 client");
  if (cfg.alpha <= 0.0)
    throw ContractError("dirichlet_partition: alpha must be positive");
  if (ds.size() < cfg.n_clients)
    throw ContractError("dirichlet_partition: fewer samples than clients");

  const int K = cfg.n_clients;
  std::vector<std::vector<int>> assigned(static_cast<std::size_t>(K));
  for (int c = 0; c < ds.n_classes; ++c) {
    std::vector<int> members;
    for (int r = 0; r < ds.size(); ++r)
      if (ds.labels[static_cast<std::size_t>(r)] == c) members.push_back(r);
    if (members.empty()) continue;
    rng::Stream s(rng::derive(cfg.seed, rng::kTagPartition, c));
    const std::vector<double> prop = s.dirichlet_symmetric(cfg.alpha, K);
    const std::vector<int> counts =
        largest_remainder(prop, static_cast<int>(members.size()));
    std::size_t next = 0;
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < counts[static_cast<std::size_t>(i)]; ++j)
        assigned[static_cast<std::size_t>(i)].push_back(members[next++]);
  }

  // Every client must hold at least one sample; we verified K <= n above so
  // repeatedly moving one sample off the largest shard always terminates.
  for (auto& shard : assigned) {
    while (shard.empty()) {
      auto largest = std::max_element(
          assigned.begin(), assigned.end(),
          [](const auto& a, const auto& b) { return a.size() < b.size(); });
      shard.push_back(largest->back());
      largest->pop_back();
    }
  }

  std::vector<Dataset> shards;
  shards.reserve(static_cast<std::size_t>(K));
  for (const auto& idx : assigned) shards.push_back(subset(ds, idx));
  return shards;
}

double label_entropy(const Dataset& ds) {
  if (ds.size() < 1) throw ContractError("label_entropy: empty dataset");
  std::vector<int> counts(static_cast<std::size_t>(ds.n_classes), 0);
  for (int y : ds.labels) ++counts[static_cast<std::size_t>(y)];
  const double n = ds.size();
  double h = 0.0;
  for (int c : counts) {
    if (c == 0) continue;
    const double q = c / n;
    h -= q * std::log2(q);
  }
  return h;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  char buf[32];
  for (int r = 0; r < ds.size(); ++r) {
    for (int c = 0; c < ds.dim(); ++c) {
      std::snprintf(buf, sizeof buf, "%.6g", ds.inputs.at(r, c));
      out << buf << ',';
    }
    out << ds.labels[static_cast<std::size_t>(r)] << '\n';
  }
}

}  // namespace hapfl::data
