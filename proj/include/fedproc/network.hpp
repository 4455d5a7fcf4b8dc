#pragma once

#include "fedproc/graph.hpp"
#include "fedproc/params.hpp"
#include "fedproc/tensor.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fedproc {

enum class EncoderKind { mlp, small_cnn };

// Local network: base encoder -> 2-layer projection head -> single linear output
// layer. The feature extractor (encoder + projection head) maps an input to the
// projection space R^Q; the output layer maps R^Q to class logits R^K.
struct NetworkSpec {
    EncoderKind encoder = EncoderKind::mlp;

    // mlp: flat input width and hidden layer widths.
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims{64};

    // small_cnn: input (H, W, C); two 5x5 conv layers (channels below), each
    // followed by 2x2 max pooling, then two fully connected ReLU layers whose
    // widths come from hidden_dims (default {120, 84}).
    std::array<std::size_t, 3> input_shape{0, 0, 0};
    std::array<std::size_t, 2> conv_channels{6, 16};

    std::size_t projection_dim = 256; // Q
    std::size_t num_classes = 0;      // K

    void validate() const; // throws config_error
    std::size_t encoder_output_dim() const;
    std::vector<std::size_t> sample_shape() const; // feature shape of one sample
};

// Activations of one forward pass: encoder output r, projection z in R^Q, and
// class logits s in R^K. Batched: each tensor has a leading batch dimension.
struct ForwardActivations {
    Tensor r;
    Tensor z;
    Tensor s;
};

// Fan-in-scaled uniform initialization of every entry, drawn deterministically
// from the seed. partition_marker is set to the first output-layer entry.
ModelParameters build_network(const NetworkSpec& spec, std::uint64_t seed);

// x may be a single sample (spec.sample_shape()) or a batch with a leading batch
// dimension. Output tensors are always batched.
ForwardActivations forward_full(const NetworkSpec& spec, const ModelParameters& params,
                                const Tensor& x);

// z only; identical to forward_full(...).z.
Tensor extract_representation(const NetworkSpec& spec, const ModelParameters& params,
                              const Tensor& x);

// Graph hookup for training. Registers every parameter entry as a requires_grad
// leaf (in entry order), builds the forward graph on batch x, and reports the
// z and s values.
struct NetworkGraph {
    std::vector<Graph::Value> param_leaves;
    Graph::Value z = 0;
    Graph::Value s = 0;
};
NetworkGraph build_forward_graph(Graph& g, const NetworkSpec& spec,
                                 const ModelParameters& params, Tensor x_batch);

// Gradients of the current backward() root for every parameter leaf.
GradientSet collect_gradients(const Graph& g, const NetworkGraph& net);

} // namespace fedproc
