#pragma once

#include "fedproc/data.hpp"
#include "fedproc/federation.hpp"
#include "fedproc/network.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fedproc {

struct DatasetConfig {
    enum class Source { blobs, idx };
    Source source = Source::blobs;

    // blobs
    std::size_t classes = 8;
    std::size_t dim = 32;
    std::size_t per_class = 400;
    double spread = 0.35;
    double test_fraction = 0.2;

    // idx
    std::string train_images, train_labels, test_images, test_labels;
};

struct ExperimentConfig {
    Strategy strategy = Strategy::fedproc;
    std::size_t rounds = 100;      // T
    std::size_t local_epochs = 10; // E
    std::size_t batch_size = 64;   // B
    std::size_t num_clients = 10;  // m
    double learning_rate = 0.01;   // eta
    double dirichlet_beta = 0.5;   // beta
    double sample_rate = 1.0;      // gamma
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::optional<double> alpha_override; // debug: forces the blend weight
    std::size_t checkpoint_every = 0;     // 0 = never; n = every n rounds plus final
    std::string output_dir = "runs/latest";

    NetworkSpec network; // classes/input filled from the dataset when left at 0
    DatasetConfig dataset;

    void validate() const;
    TrainingConfig training() const;
};

// Flat key-value config file with [section] headers and '#' comments. Unknown
// keys are configuration errors. Missing file is a configuration error.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_entries(const std::map<std::string, std::string>& entries);

// Applies "section.key=value" to a parsed entry map (CLI --override).
void apply_override(std::map<std::string, std::string>& entries, const std::string& spec);
std::map<std::string, std::string> parse_config_file(const std::string& path);

// Materialized experiment inputs: partitioned training data plus the server-held
// test set and the resolved network spec.
struct ExperimentData {
    std::vector<ClientDataset> clients;
    LabeledDataset test;
    NetworkSpec network;
};
ExperimentData prepare_data(const ExperimentConfig& cfg);

// Runs the full protocol: build data, initialize w^0 and c^0, run T rounds,
// append one metrics row (and flush) after every round. Returns the series.
// When sink is non-null each round's row is handed over as soon as it exists.
struct MetricsSink {
    virtual ~MetricsSink() = default;
    virtual void on_round(const RoundMetrics& m) = 0;
};
std::vector<RoundMetrics> run_experiment(const ExperimentConfig& cfg,
                                         MetricsSink* sink = nullptr);

// CSV persistence: header `round,alpha,mean_train_loss,top1_accuracy,participants`,
// floats printed with round-trip precision.
std::string metrics_csv_header();
std::string metrics_csv_row(const RoundMetrics& m);

struct MetricsRow {
    std::size_t round = 0;
    double alpha = 0.0;
    double mean_train_loss = 0.0;
    double top1_accuracy = 0.0;
    std::size_t participants = 0;
};
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

// Runs to completion, writing metrics.csv and run.json under cfg.output_dir
// (FEDPROC_OUTPUT_DIR overrides the directory).
std::vector<RoundMetrics> run_experiment_to_dir(const ExperimentConfig& cfg);

std::string resolved_config_json(const ExperimentConfig& cfg);

} // namespace fedproc
