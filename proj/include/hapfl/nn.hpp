#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace hapfl::nn {

enum class Activation { kRelu, kTanh };

/// Dense row-major matrix. The only tensor shape the engine needs.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
};

/// Architecture descriptor for a multilayer perceptron: layer sizes from
/// input to output, hidden activation, raw logits at the output.
struct NetworkSpec {
  std::vector<int> layer_sizes;
  Activation activation = Activation::kRelu;

  /// Canonical identifier, e.g. "mlp:16-32-4:relu". ParamVectors carry it so
  /// a vector cannot silently be applied to the wrong architecture.
  std::string id() const;
  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  /// Total number of weights and biases.
  int param_count() const;
  /// Throws ContractError unless there are >= 2 layers, all sizes >= 1.
  void validate() const;
};

/// Flat parameter storage; the unit of aggregation and checkpointing.
/// Layout per layer: weights [out x in] row-major, then biases [out].
struct ParamVector {
  std::vector<double> values;
  std::string spec_id;

  std::size_t size() const { return values.size(); }
};

/// Input rows plus integer class labels in [0, n_classes).
struct Batch {
  Matrix inputs;
  std::vector<int> labels;
};

ParamVector zeros(const NetworkSpec& spec);
/// Seeded uniform init in +-sqrt(6/(fan_in+fan_out)); biases start at zero.
ParamVector init_params(const NetworkSpec& spec, std::uint64_t seed);

/// Runs the network on a batch of inputs and returns raw logits
/// (n_samples x output_dim). Pure function; throws on any dimension mismatch
/// naming the offending axis.
Matrix forward(const ParamVector& params, const NetworkSpec& spec,
               const Matrix& inputs);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

/// Fraction of rows whose argmax logit equals the label.
double accuracy(const ParamVector& params, const NetworkSpec& spec,
                const Matrix& inputs, const std::vector<int>& labels);

struct MutualLossValue {
  double value = 0.0;
  double ce_term = 0.0;  // lambda_ce * mean cross-entropy
  double kl_term = 0.0;  // lambda_kl * mean KL(student || teacher)
};

/// Distillation loss for one side of mutual learning:
///   lambda_ce * CE(student, labels) + lambda_kl * KL(student || teacher),
/// both terms averaged over samples. Requires lambda_ce + lambda_kl = 1.
/// Probabilities are clamped at 1e-12 before any log.
MutualLossValue mutual_loss(const Matrix& student_logits,
                            const Matrix& teacher_logits,
                            const std::vector<int>& labels, double lambda_ce,
                            double lambda_kl);

/// A differentiable scalar loss over network outputs: returns the loss value
/// and its gradient with respect to the logits.
using LossFn = std::function<std::pair<double, Matrix>(const Matrix& logits)>;

/// LossFn for mutual_loss with the teacher's logits held constant.
LossFn make_mutual_loss_fn(Matrix teacher_logits, std::vector<int> labels,
                           double lambda_ce, double lambda_kl);
/// Plain cross-entropy LossFn (mutual loss with lambda_kl = 0).
LossFn make_ce_loss_fn(std::vector<int> labels);

/// Reverse-mode gradient of loss_fn(forward(params, inputs)) with respect to
/// params. Exact for the supported op set. Throws NumericError carrying the
/// layer index if a non-finite intermediate appears.
std::pair<double, ParamVector> gradient(const ParamVector& params,
                                        const NetworkSpec& spec,
                                        const Matrix& inputs,
                                        const LossFn& loss_fn);

/// theta - eta * grad, elementwise.
ParamVector sgd_step(const ParamVector& params, const ParamVector& grad,
                     double eta);

/// Adam moments; sized lazily on first use.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update; moments are carried in `state`.
ParamVector adam_step(AdamState& state, const ParamVector& params,
                      const ParamVector& grad, double eta);

}  // namespace hapfl::nn
