#pragma once

#include "fedproc/tensor.hpp"

#include <string>
#include <vector>

namespace fedproc {

struct ParamEntry {
    std::string name;
    Tensor tensor;
};

// Flat ordered list of every learnable array of a network. Entry order and shapes
// are identical across all clients and the server within one experiment; the
// partition marker separates feature-extractor entries (encoder + projection head)
// from output-layer entries, and is stable across rounds.
struct ModelParameters {
    std::vector<ParamEntry> entries;
    std::size_t partition_marker = 0;

    std::size_t scalar_count() const;
    bool same_layout(const ModelParameters& other) const;
};

// Gradients in one-to-one correspondence with ModelParameters entries.
struct GradientSet {
    std::vector<Tensor> grads;
};

// w - lr * g per entry. lr must be strictly positive.
ModelParameters sgd_step(const ModelParameters& params, const GradientSet& grads, double lr);
void sgd_step_inplace(ModelParameters& params, const GradientSet& grads, double lr);

// Binary checkpoint: magic, version byte, partition marker, then ordered
// (name, shape, little-endian float64 data) records. Identical files <=> identical
// models.
void save_checkpoint(const std::string& path, const ModelParameters& params);
ModelParameters load_checkpoint(const std::string& path);

} // namespace fedproc
