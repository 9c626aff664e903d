#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hapfl/nn.hpp"

namespace hapfl::data {

/// Labeled samples; labels lie in [0, n_classes).
struct Dataset {
  nn::Matrix inputs;
  std::vector<int> labels;
  int n_classes = 0;

  int size() const { return inputs.rows; }
  int dim() const { return inputs.cols; }
};

struct PartitionConfig {
  int n_clients = 1;
  double alpha = 0.4;
  std::uint64_t seed = 0;
};

/// Gaussian blobs: class c is centered at a fixed unit direction scaled by 3
/// (directions do not depend on `seed`, only the noise does), isotropic noise
/// of scale `spread`. Samples are grouped by class, n_per_class each.
Dataset gen_blobs(int n_classes, int dim, int n_per_class, double spread,
                  std::uint64_t seed);

/// Non-IID split: per class, client proportions are drawn from
/// Dirichlet(alpha) and the class's samples are divided by largest-remainder
/// rounding. Every sample lands in exactly one shard; empty shards are then
/// topped up with one sample taken from the largest shard so every client can
/// train.
std::vector<Dataset> dirichlet_partition(const Dataset& ds,
                                         const PartitionConfig& cfg);

/// Shannon entropy of the label histogram, in bits. Absent classes
/// contribute zero.
double label_entropy(const Dataset& ds);

/// One row per sample: feature values then the integer label.
void save_csv(const Dataset& ds, const std::string& path);

}  // namespace hapfl::data
