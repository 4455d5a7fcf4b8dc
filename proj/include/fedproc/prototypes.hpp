#pragma once

#include "fedproc/tensor.hpp"

#include <vector>

namespace fedproc {

// Per-class mean representation vectors in the projection space. A class may be
// absent (a client that holds no samples of it); a complete set has every class
// present and is required before the contrastive loss can be evaluated.
struct PrototypeSet {
    std::size_t dim = 0; // Q
    std::vector<Tensor> vectors;
    std::vector<bool> present;

    PrototypeSet() = default;
    PrototypeSet(std::size_t num_classes, std::size_t q)
        : dim(q), vectors(num_classes, Tensor({q})), present(num_classes, false) {}

    std::size_t num_classes() const { return vectors.size(); }
    bool complete() const;

    // Dense (K, Q) matrix; requires a complete set.
    Tensor to_matrix() const;
};

} // namespace fedproc
