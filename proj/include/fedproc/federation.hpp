#pragma once

#include "fedproc/data.hpp"
#include "fedproc/network.hpp"
#include "fedproc/params.hpp"
#include "fedproc/prototypes.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fedproc {

enum class Strategy { fedproc, fedavg, solo };

Strategy strategy_from_string(const std::string& s);
std::string to_string(Strategy s);

// What a client hands back after local training.
struct ClientUpdate {
    int client_id = 0;
    ModelParameters params;     // w_i^{t+1}
    PrototypeSet prototypes;    // c_i^{t+1}, computed with the final local weights
    std::size_t num_samples = 0;
    double mean_train_loss = 0.0;
};

struct TrainingConfig {
    Strategy strategy = Strategy::fedproc;
    std::size_t total_rounds = 1;   // T
    std::size_t local_epochs = 1;   // E
    std::size_t batch_size = 64;    // B
    double learning_rate = 0.01;    // eta; 0 trains nothing (useful as a no-op probe)
    double sample_rate = 1.0;       // gamma
    std::uint64_t seed = 0;
    std::size_t threads = 1;        // worker threads for client training; 0 = hardware
    // Debug override of the blend weight; replaces alpha(t,T) in the local loss
    // but never the reported schedule.
    std::optional<double> alpha_override;
};

// Per-class mean of f_e(w_e; x) over the client's samples; classes the client
// does not hold are marked absent.
PrototypeSet compute_prototypes(const NetworkSpec& spec, const ModelParameters& params,
                                const ClientDataset& ds);

// Per class, the unweighted mean over the clients where the class is present.
// A class present in no update is a protocol error.
PrototypeSet aggregate_prototypes(const std::vector<ClientUpdate>& updates);
PrototypeSet aggregate_prototype_sets(const std::vector<const PrototypeSet*>& sets);

// Entry-wise sum of |D_i|/sum_j |D_j| * w_i over the given updates.
ModelParameters aggregate_weights(const std::vector<ClientUpdate>& updates);

// max(1, round(gamma * m)) distinct ids, in ascending order, deterministic per
// round seed.
std::vector<int> sample_clients(std::size_t num_clients, double gamma,
                                std::uint64_t round_seed);

// Runs E local epochs of mini-batch SGD on the strategy's loss starting from the
// global snapshot, then recomputes prototypes with the final local weights.
ClientUpdate client_local_training(int client_id, std::size_t t, const NetworkSpec& spec,
                                   const ModelParameters& global_params,
                                   const PrototypeSet& global_prototypes,
                                   const ClientDataset& ds, const TrainingConfig& cfg);

struct FederationState {
    ModelParameters global_params;
    PrototypeSet global_prototypes;
    // solo only: each client's private model, never aggregated
    std::vector<ModelParameters> solo_params;
};

struct RoundMetrics {
    std::size_t round = 0;
    double alpha = 1.0; // schedule value 1 - t/T, independent of any override
    double mean_train_loss = 0.0;
    double top1_accuracy = 0.0;
    std::vector<int> participating_clients;
};

// Fraction of test samples whose highest logit matches the label; ties break to
// the lowest class index.
double evaluate(const NetworkSpec& spec, const ModelParameters& params,
                const LabeledDataset& test);

// For solo: per-client accuracy mean and stddev on the shared test set.
struct SoloAccuracy {
    double mean = 0.0;
    double stddev = 0.0;
};
SoloAccuracy evaluate_solo(const NetworkSpec& spec, const std::vector<ModelParameters>& models,
                           const LabeledDataset& test);

// One communication round: sample clients, train them against an immutable
// snapshot of (w^t, c^t), aggregate prototypes then weights over the
// participants, and evaluate on the server's test set. solo skips sampling and
// aggregation and advances every private model instead.
RoundMetrics run_round(std::size_t t, FederationState& state, const NetworkSpec& spec,
                       const std::vector<ClientDataset>& clients, const LabeledDataset& test,
                       const TrainingConfig& cfg);

// Masked average of all clients' initial prototypes under the starting weights;
// forms c^0 before the first round.
PrototypeSet initial_prototypes(const NetworkSpec& spec, const ModelParameters& params,
                                const std::vector<ClientDataset>& clients);

} // namespace fedproc
