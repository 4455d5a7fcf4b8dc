#include "fedproc/losses.hpp"

#include "fedproc/errors.hpp"
#include "fedproc/graph.hpp"

#include <cmath>

namespace fedproc {

double alpha_schedule(std::size_t t, std::size_t total) {
    if (t >= total) {
        throw usage_error("alpha: round " + std::to_string(t) + " is not below the total " +
                          std::to_string(total));
    }
    return 1.0 - static_cast<double>(t) / static_cast<double>(total);
}

double RoundSchedule::alpha() const {
    return alpha_schedule(t, total);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) {
        throw usage_error("cosine similarity needs two equal-length nonempty vectors");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw degenerate_input_error("cosine similarity of a zero-norm vector");
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double cross_entropy(const Tensor& logits, int label) {
    if (logits.rank() != 1) {
        throw usage_error("cross_entropy: expected a logit vector, got " + logits.shape_str());
    }
    Graph g;
    const auto s = g.leaf(Tensor({1, logits.dim(0)}, logits.data));
    return g.value(g.cross_entropy_mean(s, {label})).data[0];
}

double gpc_loss(const Tensor& z, int label, const PrototypeSet& prototypes) {
    if (z.rank() != 1) {
        throw usage_error("gpc_loss: expected a representation vector, got " + z.shape_str());
    }
    const Tensor protos = prototypes.to_matrix();
    Graph g;
    const auto zv = g.leaf(Tensor({1, z.dim(0)}, z.data));
    return g.value(g.gpc_mean(zv, {label}, protos)).data[0];
}

double blended_loss(const Tensor& z, const Tensor& logits, int label,
                    const PrototypeSet& prototypes, const RoundSchedule& schedule) {
    const double a = schedule.alpha();
    if (a == 0.0) {
        return cross_entropy(logits, label);
    }
    if (a == 1.0) {
        return gpc_loss(z, label, prototypes);
    }
    return a * gpc_loss(z, label, prototypes) + (1.0 - a) * cross_entropy(logits, label);
}

} // namespace fedproc
