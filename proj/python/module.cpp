#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fedproc/data.hpp"
#include "fedproc/errors.hpp"
#include "fedproc/gradcheck.hpp"
#include "fedproc/harness.hpp"
#include "fedproc/losses.hpp"
#include "fedproc/network.hpp"

#include <optional>
#include <string>
#include <vector>

namespace py = pybind11;

namespace {

fedproc::Tensor to_vector_tensor(const std::vector<double>& v) {
    return fedproc::Tensor::vector1d(v);
}

fedproc::PrototypeSet to_prototypes(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) {
        throw fedproc::usage_error("prototype list must not be empty");
    }
    fedproc::PrototypeSet protos(rows.size(), rows.front().size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        protos.vectors[k] = fedproc::Tensor::vector1d(rows[k]);
        protos.present[k] = true;
    }
    return protos;
}

py::list metrics_to_list(const std::vector<fedproc::RoundMetrics>& series) {
    py::list out;
    for (const auto& m : series) {
        py::dict row;
        row["round"] = m.round;
        row["alpha"] = m.alpha;
        row["mean_train_loss"] = m.mean_train_loss;
        row["top1_accuracy"] = m.top1_accuracy;
        row["participants"] = m.participating_clients;
        out.append(row);
    }
    return out;
}

} // namespace

PYBIND11_MODULE(fedproc, m) {
    m.doc() = "federated prototypical-contrastive learning simulator";

    py::register_exception<fedproc::config_error>(m, "ConfigError");
    py::register_exception<fedproc::usage_error>(m, "UsageError");
    py::register_exception<fedproc::protocol_error>(m, "ProtocolError");
    py::register_exception<fedproc::degenerate_input_error>(m, "DegenerateInputError");
    py::register_exception<fedproc::ingestion_error>(m, "IngestionError");

    m.def(
        "cosine_similarity",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            return fedproc::cosine_similarity(a, b);
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "cross_entropy",
        [](const std::vector<double>& logits, int label) {
            return fedproc::cross_entropy(to_vector_tensor(logits), label);
        },
        py::arg("logits"), py::arg("label"));

    m.def(
        "gpc_loss",
        [](const std::vector<double>& z, int label,
           const std::vector<std::vector<double>>& prototypes) {
            return fedproc::gpc_loss(to_vector_tensor(z), label, to_prototypes(prototypes));
        },
        py::arg("z"), py::arg("label"), py::arg("prototypes"));

    m.def(
        "blended_loss",
        [](const std::vector<double>& z, const std::vector<double>& logits, int label,
           const std::vector<std::vector<double>>& prototypes, std::size_t t, std::size_t total) {
            return fedproc::blended_loss(to_vector_tensor(z), to_vector_tensor(logits), label,
                                         to_prototypes(prototypes),
                                         fedproc::RoundSchedule{t, total});
        },
        py::arg("z"), py::arg("logits"), py::arg("label"), py::arg("prototypes"), py::arg("t"),
        py::arg("total"));

    m.def("alpha", &fedproc::alpha_schedule, py::arg("t"), py::arg("total"));

    m.def(
        "generate_blobs",
        [](std::size_t classes, std::size_t dim, std::size_t per_class, double spread,
           std::uint64_t seed) {
            const auto ds = fedproc::generate_blobs(classes, dim, per_class, spread, seed);
            std::vector<std::vector<double>> features;
            features.reserve(ds.size());
            for (const auto& f : ds.features) {
                features.push_back(f.data);
            }
            return py::make_tuple(features, ds.labels);
        },
        py::arg("classes"), py::arg("dim"), py::arg("per_class"), py::arg("spread"),
        py::arg("seed"));

    m.def(
        "partition_class_counts",
        [](const std::vector<int>& labels, std::size_t classes, std::size_t clients, double beta,
           std::uint64_t seed) {
            fedproc::LabeledDataset ds;
            ds.num_classes = classes;
            ds.labels = labels;
            ds.features.assign(labels.size(), fedproc::Tensor({1}));
            const auto parts =
                fedproc::dirichlet_partition(ds, fedproc::PartitionConfig{clients, beta, seed});
            std::vector<std::vector<std::size_t>> counts;
            counts.reserve(parts.size());
            for (const auto& p : parts) {
                std::vector<std::size_t> row;
                row.reserve(classes);
                for (const auto& idx : p.per_class_index) {
                    row.push_back(idx.size());
                }
                counts.push_back(std::move(row));
            }
            return counts;
        },
        py::arg("labels"), py::arg("classes"), py::arg("clients"), py::arg("beta"),
        py::arg("seed"));

    m.def(
        "run_experiment",
        [](const std::string& config_path, const std::vector<std::string>& overrides,
           std::optional<std::uint64_t> seed) {
            auto entries = fedproc::parse_config_file(config_path);
            for (const auto& ov : overrides) {
                fedproc::apply_override(entries, ov);
            }
            auto cfg = fedproc::config_from_entries(entries);
            if (seed) {
                cfg.seed = *seed;
            }
            return metrics_to_list(fedproc::run_experiment(cfg));
        },
        py::arg("config_path"), py::arg("overrides") = std::vector<std::string>{},
        py::arg("seed") = std::nullopt,
        "Run an experiment and return the per-round metrics (no files are written).");

    m.def(
        "gradient_check",
        [](std::uint64_t seed, std::size_t points) {
            const auto report = fedproc::run_gradient_checks(seed, points);
            py::dict out;
            out["all_passed"] = report.all_passed;
            out["seconds"] = report.seconds;
            py::list cases;
            for (const auto& c : report.cases) {
                py::dict d;
                d["name"] = c.name;
                d["max_rel_err"] = c.max_rel_err;
                d["passed"] = c.passed;
                cases.append(d);
            }
            out["cases"] = cases;
            return out;
        },
        py::arg("seed") = 7, py::arg("points") = 10);
}
