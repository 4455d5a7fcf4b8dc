#pragma once

#include "fedproc/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fedproc {

struct LabeledDataset {
    std::vector<Tensor> features;
    std::vector<int> labels;
    std::size_t num_classes = 0;

    std::size_t size() const { return features.size(); }
    void validate() const; // non-empty, labels in range, uniform feature shapes
};

// One client's shard plus its per-class index. The per-class lists partition the
// sample list exactly; a client may lack some classes entirely.
struct ClientDataset {
    int client_id = 0;
    LabeledDataset data;
    std::vector<std::vector<std::size_t>> per_class_index;

    std::size_t size() const { return data.size(); }
    bool has_class(std::size_t k) const { return !per_class_index[k].empty(); }
};

struct PartitionConfig {
    std::size_t num_clients = 1;
    double beta = 0.5; // Dirichlet concentration; smaller = more skew
    std::uint64_t seed = 0;
};

// Class-wise Dirichlet split: for each class an independent Dir(beta,...,beta)
// draw fixes the client proportions, realized by largest-remainder rounding so
// per-class counts are conserved exactly. A draw that leaves any client empty is
// redrawn with an incremented sub-seed, up to 100 attempts.
std::vector<ClientDataset> dirichlet_partition(const LabeledDataset& data,
                                               const PartitionConfig& cfg);

// K isotropic Gaussian clusters in R^dim with unit-separated means (class k is
// centered on the k-th basis vector) and stddev = spread. Balanced labels,
// deterministic per seed. Requires K <= dim.
LabeledDataset generate_blobs(std::size_t num_classes, std::size_t dim, std::size_t per_class,
                              double spread, std::uint64_t seed);

// IDX ingestion (big-endian; magic 0x00000803 for images, 0x00000801 for labels).
// Pixels are scaled to [0,1]; feature tensors are (rows, cols, 1).
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

// Deterministic stratified split: per class, the seeded shuffle's first
// round(test_fraction * count) samples go to the test set.
struct TrainTestSplit {
    LabeledDataset train;
    LabeledDataset test;
};
TrainTestSplit split_train_test(const LabeledDataset& data, double test_fraction,
                                std::uint64_t seed);

// One epoch of index batches: a seeded shuffle sliced into chunks of batch_size,
// final partial batch kept.
std::vector<std::vector<std::size_t>> batches(const ClientDataset& ds, std::size_t batch_size,
                                              std::uint64_t epoch_seed);

// Rebuilds the per-class index for a shard.
ClientDataset make_client_dataset(int client_id, LabeledDataset data);

} // namespace fedproc
