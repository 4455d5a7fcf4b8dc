#pragma once

#include "fedproc/tensor.hpp"

#include <functional>
#include <vector>

namespace fedproc {

// Reverse-mode tape over whole-batch tensors. Nodes are created in topological
// order by construction; backward() walks them in reverse. Graphs are cheap,
// single-use objects: build, run backward once, read gradients.
class Graph {
public:
    using Value = std::size_t;

    Value leaf(Tensor value, bool requires_grad = false);

    Value linear(Value x, Value w, Value b); // (B,in) x (in,out) + (out)
    Value relu(Value x);
    Value conv2d(Value x, Value w, Value b);
    Value maxpool2(Value x);
    Value flatten(Value x);
    Value add(Value a, Value b);      // same shape
    Value scale(Value x, double c);
    Value sum(Value x);               // scalar

    // Mean cross-entropy over the batch: logits (B,K), labels in {0..K-1}.
    Value cross_entropy_mean(Value logits, const std::vector<int>& labels);

    // Mean prototypical contrastive loss over the batch: z (B,Q), prototypes (K,Q).
    // Prototypes enter as plain data, not graph values, so no gradient reaches them.
    Value gpc_mean(Value z, const std::vector<int>& labels, const Tensor& prototypes);

    const Tensor& value(Value v) const { return nodes_[v].value; }

    // Reverse pass from a scalar root. Throws usage_error if the root is not scalar.
    void backward(Value root);

    // Gradient of the last backward() root w.r.t. a requires_grad leaf.
    const Tensor& grad(Value v) const;

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Graph&, const Tensor&)> backprop; // upstream grad -> parents
    };

    Value push(Tensor value, bool requires_grad,
               std::function<void(Graph&, const Tensor&)> backprop);
    void accumulate(Value v, const Tensor& g);
    bool needs_grad(Value v) const { return nodes_[v].requires_grad; }

    std::vector<Node> nodes_;
};

} // namespace fedproc
