#pragma once

#include "fedproc/prototypes.hpp"
#include "fedproc/tensor.hpp"

#include <span>

namespace fedproc {

// Position in the round schedule. The blend weight alpha = 1 - t/T moves local
// training from feature learning toward classifier learning as rounds progress.
struct RoundSchedule {
    std::size_t t = 0;
    std::size_t total = 1; // T

    double alpha() const;
};

double alpha_schedule(std::size_t t, std::size_t total);

// a.b / (|a||b|). Zero-norm inputs raise degenerate_input_error.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// -log softmax(s)[y], max-subtraction stabilized. s is a logit vector of K >= 2.
double cross_entropy(const Tensor& logits, int label);

// Global prototypical contrastive loss for one representation z against a complete
// prototype set: softmax over cosine similarities, negative log of the own-class
// entry. Prototypes are constants; no gradient ever reaches them.
double gpc_loss(const Tensor& z, int label, const PrototypeSet& prototypes);

// alpha * gpc + (1 - alpha) * ce. A term with zero weight is skipped outright, so
// the value (and any gradient built from it) is bit-identical to the surviving
// term alone.
double blended_loss(const Tensor& z, const Tensor& logits, int label,
                    const PrototypeSet& prototypes, const RoundSchedule& schedule);

} // namespace fedproc
