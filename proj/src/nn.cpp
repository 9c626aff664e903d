#include "hapfl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hapfl/errors.hpp"
#include "hapfl/rng.hpp"

namespace hapfl::nn {

namespace {

constexpr double kProbFloor = 1e-12;

void check_finite_layer(const std::vector<double>& buf, int layer,
                        const char* what) {
  for (double x : buf) {
    if (!std::isfinite(x)) {
      std::ostringstream os;
      os << "non-finite " << what << " at layer " << layer;
      throw NumericError(os.str());
    }
  }
}

}  // namespace

std::string NetworkSpec::id() const {
  std::ostringstream os;
  os << "mlp:";
  for (std::size_t i = 0; i < layer_sizes.size(); ++i) {
    if (i) os << '-';
    os << layer_sizes[i];
  }
  os << (activation == Activation::kRelu ? ":relu" : ":tanh");
  return os.str();
}

int NetworkSpec::param_count() const {
  int n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    n += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  return n;
}

void NetworkSpec::validate() const {
  if (layer_sizes.size() < 2)
    throw ContractError("network spec needs at least input and output layers");
  for (int s : layer_sizes)
    if (s < 1) throw ContractError("network layer size must be >= 1");
}

ParamVector zeros(const NetworkSpec& spec) {
  spec.validate();
  ParamVector p;
  p.spec_id = spec.id();
  p.values.assign(static_cast<std::size_t>(spec.param_count()), 0.0);
  return p;
}

ParamVector init_params(const NetworkSpec& spec, std::uint64_t seed) {
  ParamVector p = zeros(spec);
  rng::Stream stream(seed);
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    const int in = spec.layer_sizes[l];
    const int out = spec.layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / (in + out));
    for (int i = 0; i < out * in; ++i)
      p.values[off + i] = stream.uniform(-bound, bound);
    off += static_cast<std::size_t>(out) * in;
    off += out;  // biases stay zero
  }
  return p;
}

namespace {

struct LayerView {
  const double* w;  // [out x in] row-major
  const double* b;  // [out]
  int in, out;
};

std::vector<LayerView> layer_views(const ParamVector& params,
                                   const NetworkSpec& spec) {
  if (params.spec_id != spec.id())
    throw ContractError("param vector built for '" + params.spec_id +
                        "' applied to '" + spec.id() + "'");
  if (params.values.size() != static_cast<std::size_t>(spec.param_count()))
    throw ContractError("param vector length " +
                        std::to_string(params.values.size()) +
                        " does not match spec param count " +
                        std::to_string(spec.param_count()));
  std::vector<LayerView> views;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    LayerView v;
    v.in = spec.layer_sizes[l];
    v.out = spec.layer_sizes[l + 1];
    v.w = params.values.data() + off;
    off += static_cast<std::size_t>(v.out) * v.in;
    v.b = params.values.data() + off;
    off += v.out;
    views.push_back(v);
  }
  return views;
}

void check_inputs(const NetworkSpec& spec, const Matrix& inputs) {
  spec.validate();
  if (inputs.cols != spec.input_dim())
    throw ContractError("input column count " + std::to_string(inputs.cols) +
                        " does not match network input dim " +
                        std::to_string(spec.input_dim()));
  if (inputs.rows < 1) throw ContractError("empty input batch");
}

/// affine + activation for every layer; fills per-layer post-activation
/// buffers when `keep` is non-null (needed for backprop).
Matrix run_forward(const std::vector<LayerView>& views,
                   const NetworkSpec& spec, const Matrix& inputs,
                   std::vector<Matrix>* keep) {
  const int n = inputs.rows;
  Matrix cur = inputs;
  const int last = static_cast<int>(views.size()) - 1;
  for (int l = 0; l <= last; ++l) {
    const LayerView& lv = views[l];
    Matrix next(n, lv.out);
    for (int r = 0; r < n; ++r) {
      const double* x = cur.v.data() + static_cast<std::size_t>(r) * lv.in;
      double* y = next.v.data() + static_cast<std::size_t>(r) * lv.out;
      for (int o = 0; o < lv.out; ++o) {
        const double* wrow = lv.w + static_cast<std::size_t>(o) * lv.in;
        double acc = lv.b[o];
        for (int i = 0; i < lv.in; ++i) acc += wrow[i] * x[i];
        y[o] = acc;
      }
    }
    if (l != last) {
      if (spec.activation == Activation::kRelu) {
        for (double& x : next.v) x = x > 0.0 ? x : 0.0;
      } else {
        for (double& x : next.v) x = std::tanh(x);
      }
    }
    check_finite_layer(next.v, l, "activation");
    if (keep) keep->push_back(next);
    cur = std::move(next);
  }
  return cur;
}

}  // namespace

Matrix forward(const ParamVector& params, const NetworkSpec& spec,
               const Matrix& inputs) {
  check_inputs(spec, inputs);
  return run_forward(layer_views(params, spec), spec, inputs, nullptr);
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows, logits.cols);
  for (int r = 0; r < logits.rows; ++r) {
    const double* z = logits.v.data() + static_cast<std::size_t>(r) * logits.cols;
    double* p = out.v.data() + static_cast<std::size_t>(r) * logits.cols;
    double mx = z[0];
    for (int c = 1; c < logits.cols; ++c) mx = std::max(mx, z[c]);
    double total = 0.0;
    for (int c = 0; c < logits.cols; ++c) {
      p[c] = std::exp(z[c] - mx);
      total += p[c];
    }
    for (int c = 0; c < logits.cols; ++c) p[c] /= total;
  }
  return out;
}

double accuracy(const ParamVector& params, const NetworkSpec& spec,
                const Matrix& inputs, const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != inputs.rows)
    throw ContractError("label count does not match input row count");
  Matrix logits = forward(params, spec, inputs);
  int hits = 0;
  for (int r = 0; r < logits.rows; ++r) {
    const double* z = logits.v.data() + static_cast<std::size_t>(r) * logits.cols;
    int best = 0;
    for (int c = 1; c < logits.cols; ++c)
      if (z[c] > z[best]) best = c;
    if (best == labels[r]) ++hits;
  }
  return static_cast<double>(hits) / logits.rows;
}

namespace {

void check_loss_shapes(const Matrix& student, const Matrix& teacher,
                       const std::vector<int>& labels, double lambda_ce,
                       double lambda_kl) {
  if (student.rows != teacher.rows || student.cols != teacher.cols)
    throw ContractError("student and teacher logit shapes differ");
  if (static_cast<int>(labels.size()) != student.rows)
    throw ContractError("label count does not match logit row count");
  for (int y : labels)
    if (y < 0 || y >= student.cols)
      throw ContractError("label out of range for logit width");
  if (std::abs(lambda_ce + lambda_kl - 1.0) > 1e-9)
    throw ContractError("loss weights must sum to 1");
  if (lambda_ce < 0.0 || lambda_kl < 0.0)
    throw ContractError("loss weights must be non-negative");
}

}  // namespace

MutualLossValue mutual_loss(const Matrix& student_logits,
                            const Matrix& teacher_logits,
                            const std::vector<int>& labels, double lambda_ce,
                            double lambda_kl) {
  check_loss_shapes(student_logits, teacher_logits, labels, lambda_ce,
                    lambda_kl);
  const Matrix p = softmax_rows(student_logits);
  const Matrix q = softmax_rows(teacher_logits);
  const int n = p.rows, m = p.cols;
  double ce = 0.0, kl = 0.0;
  for (int r = 0; r < n; ++r) {
    const double* pr = p.v.data() + static_cast<std::size_t>(r) * m;
    const double* qr = q.v.data() + static_cast<std::size_t>(r) * m;
    ce += -std::log(std::max(pr[labels[r]], kProbFloor));
    for (int c = 0; c < m; ++c) {
      const double pc = std::max(pr[c], kProbFloor);
      const double qc = std::max(qr[c], kProbFloor);
      kl += pc * std::log(pc / qc);
    }
  }
  MutualLossValue out;
  out.ce_term = lambda_ce * ce / n;
  out.kl_term = lambda_kl * kl / n;
  out.value = out.ce_term + out.kl_term;
  return out;
}

namespace {

/// d/dz of mean_r [ lambda_ce * CE_r + lambda_kl * KL_r ] where
/// p = softmax(z). CE gradient is the usual (p - onehot)/n. The KL term
/// sum p_c log(p_c/q_c) differentiates through the softmax to
/// p_c*(log(p_c/q_c) - KL_r)/n, with the clamp treated as identity (the
/// clamp only binds where p is numerically zero, and there the gradient
/// factor p_c vanishes anyway).
Matrix mutual_loss_grad(const Matrix& student_logits,
                        const Matrix& teacher_logits,
                        const std::vector<int>& labels, double lambda_ce,
                        double lambda_kl) {
  const Matrix p = softmax_rows(student_logits);
  const Matrix q = softmax_rows(teacher_logits);
  const int n = p.rows, m = p.cols;
  Matrix g(n, m);
  for (int r = 0; r < n; ++r) {
    const double* pr = p.v.data() + static_cast<std::size_t>(r) * m;
    const double* qr = q.v.data() + static_cast<std::size_t>(r) * m;
    double* gr = g.v.data() + static_cast<std::size_t>(r) * m;
    double kl_r = 0.0;
    for (int c = 0; c < m; ++c) {
      const double pc = std::max(pr[c], kProbFloor);
      const double qc = std::max(qr[c], kProbFloor);
      kl_r += pc * std::log(pc / qc);
    }
    for (int c = 0; c < m; ++c) {
      const double pc = std::max(pr[c], kProbFloor);
      const double qc = std::max(qr[c], kProbFloor);
      double d = lambda_ce * (pr[c] - (labels[r] == c ? 1.0 : 0.0));
      d += lambda_kl * pr[c] * (std::log(pc / qc) - kl_r);
      gr[c] = d / n;
    }
  }
  return g;
}

}  // namespace

LossFn make_mutual_loss_fn(Matrix teacher_logits, std::vector<int> labels,
                           double lambda_ce, double lambda_kl) {
  return [teacher = std::move(teacher_logits), labels = std::move(labels),
          lambda_ce, lambda_kl](const Matrix& logits) {
    MutualLossValue v = mutual_loss(logits, teacher, labels, lambda_ce, lambda_kl);
    return std::make_pair(v.value, mutual_loss_grad(logits, teacher, labels,
                                                    lambda_ce, lambda_kl));
  };
}

LossFn make_ce_loss_fn(std::vector<int> labels) {
  return [labels = std::move(labels)](const Matrix& logits) {
    // Teacher equal to the student makes the KL term and its gradient zero.
    MutualLossValue v = mutual_loss(logits, logits, labels, 1.0, 0.0);
    return std::make_pair(v.value,
                          mutual_loss_grad(logits, logits, labels, 1.0, 0.0));
  };
}

std::pair<double, ParamVector> gradient(const ParamVector& params,
                                        const NetworkSpec& spec,
                                        const Matrix& inputs,
                                        const LossFn& loss_fn) {
  check_inputs(spec, inputs);
  const std::vector<LayerView> views = layer_views(params, spec);
  std::vector<Matrix> acts;  // post-activation output of each layer
  acts.reserve(views.size());
  Matrix logits = run_forward(views, spec, inputs, &acts);

  auto [loss, dlogits] = loss_fn(logits);
  if (dlogits.rows != logits.rows || dlogits.cols != logits.cols)
    throw ContractError("loss gradient shape does not match logits");
  check_finite_layer(dlogits.v, static_cast<int>(views.size()) - 1,
                     "loss gradient");

  ParamVector grad = zeros(spec);
  const int n = inputs.rows;
  Matrix delta = std::move(dlogits);  // dL/d(pre-activation of layer l)
  std::size_t off = params.values.size();
  for (int l = static_cast<int>(views.size()) - 1; l >= 0; --l) {
    const LayerView& lv = views[l];
    const Matrix& below = l == 0 ? inputs : acts[l - 1];
    off -= static_cast<std::size_t>(lv.out) * lv.in + lv.out;
    double* gw = grad.values.data() + off;
    double* gb = gw + static_cast<std::size_t>(lv.out) * lv.in;
    for (int r = 0; r < n; ++r) {
      const double* d = delta.v.data() + static_cast<std::size_t>(r) * lv.out;
      const double* x = below.v.data() + static_cast<std::size_t>(r) * lv.in;
      for (int o = 0; o < lv.out; ++o) {
        double* gwrow = gw + static_cast<std::size_t>(o) * lv.in;
        for (int i = 0; i < lv.in; ++i) gwrow[i] += d[o] * x[i];
        gb[o] += d[o];
      }
    }
    if (l > 0) {
      Matrix prev(n, lv.in);
      for (int r = 0; r < n; ++r) {
        const double* d = delta.v.data() + static_cast<std::size_t>(r) * lv.out;
        double* pd = prev.v.data() + static_cast<std::size_t>(r) * lv.in;
        for (int o = 0; o < lv.out; ++o) {
          const double* wrow = lv.w + static_cast<std::size_t>(o) * lv.in;
          for (int i = 0; i < lv.in; ++i) pd[i] += d[o] * wrow[i];
        }
        const double* a = acts[l - 1].v.data() + static_cast<std::size_t>(r) * lv.in;
        if (spec.activation == Activation::kRelu) {
          for (int i = 0; i < lv.in; ++i)
            if (a[i] <= 0.0) pd[i] = 0.0;
        } else {
          for (int i = 0; i < lv.in; ++i) pd[i] *= 1.0 - a[i] * a[i];
        }
      }
      check_finite_layer(prev.v, l - 1, "backprop delta");
      delta = std::move(prev);
    }
  }
  check_finite_layer(grad.values, 0, "gradient");
  return {loss, std::move(grad)};
}

ParamVector sgd_step(const ParamVector& params, const ParamVector& grad,
                     double eta) {
  if (params.spec_id != grad.spec_id || params.size() != grad.size())
    throw ContractError("sgd_step params and grad do not match");
  ParamVector out = params;
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] -= eta * grad.values[i];
  return out;
}

ParamVector adam_step(AdamState& state, const ParamVector& params,
                      const ParamVector& grad, double eta) {
  if (params.spec_id != grad.spec_id || params.size() != grad.size())
    throw ContractError("adam_step params and grad do not match");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size())
    throw ContractError("adam state size does not match params");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step);
  ParamVector out = params;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double g = grad.values[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    out.values[i] -=
        eta * (state.m[i] / bc1) / (std::sqrt(state.v[i] / bc2) + state.eps);
  }
  return out;
}

}  // namespace hapfl::nn
