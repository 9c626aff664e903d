#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <stdexcept>

#include "hapfl/aggregation.hpp"
#include "hapfl/config.hpp"
#include "hapfl/data.hpp"
#include "hapfl/metrics_io.hpp"
#include "hapfl/nn.hpp"
#include "hapfl/orchestrator.hpp"
#include "hapfl/rl.hpp"

namespace py = pybind11;
using namespace hapfl;

namespace {

nn::Activation activation_from(const std::string& name) {
  if (name == "relu") return nn::Activation::kRelu;
  if (name == "tanh") return nn::Activation::kTanh;
  throw std::invalid_argument("activation must be \"relu\" or \"tanh\", got \"" +
                              name + "\"");
}

agg::Form form_from(const std::string& name) {
  if (name == "delta") return agg::Form::kDelta;
  if (name == "literal") return agg::Form::kLiteral;
  throw std::invalid_argument("form must be \"delta\" or \"literal\", got \"" +
                              name + "\"");
}

nn::Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r > 0 ? static_cast<int>(rows[0].size()) : 0;
  nn::Matrix m(r, c);
  for (int i = 0; i < r; ++i) {
    if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != c)
      throw std::invalid_argument("matrix rows must all have equal length");
    for (int j = 0; j < c; ++j)
      m.at(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

std::vector<std::vector<double>> matrix_to_rows(const nn::Matrix& m) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows));
  for (int i = 0; i < m.rows; ++i) {
    rows[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(m.cols));
    for (int j = 0; j < m.cols; ++j)
      rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m.at(i, j);
  }
  return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "hapfl simulator core";

  py::class_<nn::Matrix>(m, "Matrix")
      .def(py::init(&matrix_from_rows), py::arg("rows"))
      .def_readonly("rows", &nn::Matrix::rows)
      .def_readonly("cols", &nn::Matrix::cols)
      .def("tolist", &matrix_to_rows);

  py::class_<nn::NetworkSpec>(m, "NetworkSpec")
      .def(py::init([](std::vector<int> sizes, const std::string& act) {
             nn::NetworkSpec s{std::move(sizes), activation_from(act)};
             s.validate();
             return s;
           }),
           py::arg("layer_sizes"), py::arg("activation") = "relu")
      .def_readonly("layer_sizes", &nn::NetworkSpec::layer_sizes)
      .def("id", &nn::NetworkSpec::id)
      .def("param_count", &nn::NetworkSpec::param_count);

  py::class_<nn::ParamVector>(m, "ParamVector")
      .def_readwrite("values", &nn::ParamVector::values)
      .def_readonly("spec_id", &nn::ParamVector::spec_id)
      .def("__len__", &nn::ParamVector::size);

  py::class_<nn::MutualLossValue>(m, "MutualLossValue")
      .def_readonly("value", &nn::MutualLossValue::value)
      .def_readonly("ce_term", &nn::MutualLossValue::ce_term)
      .def_readonly("kl_term", &nn::MutualLossValue::kl_term);

  py::class_<data::Dataset>(m, "Dataset")
      .def_property_readonly(
          "inputs", [](const data::Dataset& d) { return matrix_to_rows(d.inputs); })
      .def_readonly("labels", &data::Dataset::labels)
      .def_readonly("n_classes", &data::Dataset::n_classes)
      .def("__len__", &data::Dataset::size)
      .def("dim", &data::Dataset::dim);

  py::class_<agg::AggregationWeights>(m, "AggregationWeights")
      .def_readonly("weights", &agg::AggregationWeights::weights)
      .def("values", &agg::AggregationWeights::values);

  py::class_<orch::RoundMetrics>(m, "RoundMetrics")
      .def_readonly("round", &orch::RoundMetrics::round)
      .def_readonly("selected", &orch::RoundMetrics::selected)
      .def_readonly("tiers", &orch::RoundMetrics::tiers)
      .def_readonly("taus", &orch::RoundMetrics::taus)
      .def_readonly("assess_times", &orch::RoundMetrics::assess_times)
      .def_readonly("local_times", &orch::RoundMetrics::local_times)
      .def_readonly("compute_times", &orch::RoundMetrics::compute_times)
      .def_readonly("delta_tc", &orch::RoundMetrics::delta_tc)
      .def_readonly("total_time", &orch::RoundMetrics::total_time)
      .def_readonly("r1", &orch::RoundMetrics::r1)
      .def_readonly("r2", &orch::RoundMetrics::r2)
      .def_readonly("acc_lite", &orch::RoundMetrics::acc_lite)
      .def_readonly("acc_tiers", &orch::RoundMetrics::acc_tiers)
      .def_readonly("weights", &orch::RoundMetrics::weights);

  m.def("gen_blobs", &data::gen_blobs, py::arg("n_classes"), py::arg("dim"),
        py::arg("n_per_class"), py::arg("spread"), py::arg("seed"),
        "Gaussian blob dataset grouped by class.");
  m.def(
      "dirichlet_partition",
      [](const data::Dataset& ds, int n_clients, double alpha,
         std::uint64_t seed) {
        return data::dirichlet_partition(ds, {n_clients, alpha, seed});
      },
      py::arg("dataset"), py::arg("n_clients"), py::arg("alpha"),
      py::arg("seed"), "Non-IID Dirichlet split into per-client shards.");
  m.def("label_entropy", &data::label_entropy, py::arg("dataset"),
        "Shannon entropy of the label histogram, in bits.");

  m.def("init_params", &nn::init_params, py::arg("spec"), py::arg("seed"),
        "Seeded uniform parameter initialization.");
  m.def("forward", &nn::forward, py::arg("params"), py::arg("spec"),
        py::arg("inputs"), "Batch forward pass returning raw logits.");
  m.def("accuracy", &nn::accuracy, py::arg("params"), py::arg("spec"),
        py::arg("inputs"), py::arg("labels"),
        "Fraction of rows whose argmax logit matches the label.");
  m.def("mutual_loss", &nn::mutual_loss, py::arg("student_logits"),
        py::arg("teacher_logits"), py::arg("labels"), py::arg("lambda_ce"),
        py::arg("lambda_kl"),
        "Distillation loss: weighted cross-entropy plus KL to the teacher.");

  m.def("ppo1_state", &rl::ppo1_state, py::arg("assess_times"),
        "Assessment times normalized by their minimum.");
  m.def("ppo1_reward", &rl::ppo1_reward, py::arg("local_times"),
        py::arg("taus"), py::arg("md"),
        "MD minus the slowest-to-fastest per-epoch time ratio.");
  m.def("ppo2_reward", &rl::ppo2_reward, py::arg("local_times"),
        "Fastest minus slowest local time; always <= 0.");
  m.def("round_intensities", &rl::round_intensities, py::arg("sigma"),
        py::arg("tau_total"),
        "Largest-remainder rounding with a floor of one epoch per client.");
  m.def("discounted_returns", &rl::discounted_returns, py::arg("rewards"),
        py::arg("gamma"), "G_t = R_t + gamma * G_{t+1}, terminal bootstrap 0.");
  m.def("clipped_objective", &rl::clipped_objective, py::arg("ratio"),
        py::arg("advantage"), py::arg("eps"),
        "Per-sample clipped surrogate objective.");

  m.def("compute_weights", &agg::compute_weights, py::arg("entropies"),
        py::arg("accuracies"), py::arg("client_ids") = std::vector<int>{},
        "W = (softmax(H) + softmax(acc)) / 2.");
  m.def(
      "aggregate",
      [](const nn::ParamVector& global,
         const std::vector<nn::ParamVector>& members,
         const agg::AggregationWeights& weights, const std::string& form) {
        return agg::aggregate(global, members, weights, form_from(form));
      },
      py::arg("global_params"), py::arg("members"), py::arg("weights"),
      py::arg("form") = "delta",
      "Weighted aggregation of member parameters onto the global.");

  m.def(
      "default_config",
      []() { return config_to_json_text(ExperimentConfig{}); },
      "Default experiment configuration as a JSON string.");
  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        return orch::run_experiment(config_from_json_text(config_json));
      },
      py::arg("config_json"),
      "Runs a full experiment from a JSON config; returns per-round metrics.");
  m.def(
      "metrics_csv",
      [](const std::vector<orch::RoundMetrics>& rows) {
        std::ostringstream out;
        io::write_metrics_csv(out, rows);
        return out.str();
      },
      py::arg("metrics"), "Renders metric rows in the metrics.csv schema.");
}
