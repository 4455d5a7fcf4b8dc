#include "fedproc/network.hpp"

#include "fedproc/errors.hpp"
#include "fedproc/rng.hpp"

#include <cmath>

namespace fedproc {

namespace {

struct CnnDims {
    std::size_t conv1_h, conv1_w, pool1_h, pool1_w;
    std::size_t conv2_h, conv2_w, pool2_h, pool2_w;
    std::size_t flat;
};

CnnDims cnn_dims(const NetworkSpec& spec) {
    const auto [h, w, c] = spec.input_shape;
    (void)c;
    CnnDims d{};
    d.conv1_h = h - 4;
    d.conv1_w = w - 4;
    d.pool1_h = d.conv1_h / 2;
    d.pool1_w = d.conv1_w / 2;
    d.conv2_h = d.pool1_h - 4;
    d.conv2_w = d.pool1_w - 4;
    d.pool2_h = d.conv2_h / 2;
    d.pool2_w = d.conv2_w / 2;
    d.flat = d.pool2_h * d.pool2_w * spec.conv_channels[1];
    return d;
}

void append_initialized(ModelParameters& params, Rng& rng, const std::string& name,
                        std::vector<std::size_t> shape, std::size_t fan_in) {
    Tensor t(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t.data) {
        v = rng.uniform(-bound, bound);
    }
    params.entries.push_back({name, std::move(t)});
}

void append_linear(ModelParameters& params, Rng& rng, const std::string& name,
                   std::size_t in, std::size_t out) {
    append_initialized(params, rng, name + ".weight", {in, out}, in);
    append_initialized(params, rng, name + ".bias", {out}, in);
}

} // namespace

void NetworkSpec::validate() const {
    if (projection_dim == 0) {
        throw config_error("network: projection dimension must be positive");
    }
    if (num_classes == 0) {
        throw config_error("network: class count must be positive");
    }
    if (encoder == EncoderKind::mlp) {
        if (input_dim == 0) {
            throw config_error("network: mlp encoder needs a positive input dimension");
        }
    } else {
        const auto [h, w, c] = input_shape;
        if (h == 0 || w == 0 || c == 0) {
            throw config_error("network: small_cnn encoder needs an input shape (H,W,C)");
        }
        if (h < 16 || w < 16) {
            throw config_error("network: small_cnn needs at least a 16x16 input, got " +
                               std::to_string(h) + "x" + std::to_string(w));
        }
        if (hidden_dims.size() != 2) {
            throw config_error("network: small_cnn takes exactly two fully connected widths");
        }
        if (conv_channels[0] == 0 || conv_channels[1] == 0) {
            throw config_error("network: small_cnn conv channels must be positive");
        }
    }
    for (std::size_t hsz : hidden_dims) {
        if (hsz == 0) {
            throw config_error("network: hidden widths must be positive");
        }
    }
}

std::size_t NetworkSpec::encoder_output_dim() const {
    if (encoder == EncoderKind::mlp) {
        return hidden_dims.empty() ? input_dim : hidden_dims.back();
    }
    return hidden_dims.back();
}

std::vector<std::size_t> NetworkSpec::sample_shape() const {
    if (encoder == EncoderKind::mlp) {
        return {input_dim};
    }
    return {input_shape[0], input_shape[1], input_shape[2]};
}

ModelParameters build_network(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    ModelParameters params;
    if (spec.encoder == EncoderKind::mlp) {
        std::size_t prev = spec.input_dim;
        for (std::size_t i = 0; i < spec.hidden_dims.size(); ++i) {
            append_linear(params, rng, "enc.fc" + std::to_string(i + 1), prev,
                          spec.hidden_dims[i]);
            prev = spec.hidden_dims[i];
        }
    } else {
        const auto d = cnn_dims(spec);
        const std::size_t cin = spec.input_shape[2];
        const std::size_t c1 = spec.conv_channels[0], c2 = spec.conv_channels[1];
        append_initialized(params, rng, "enc.conv1.weight", {5, 5, cin, c1}, 25 * cin);
        append_initialized(params, rng, "enc.conv1.bias", {c1}, 25 * cin);
        append_initialized(params, rng, "enc.conv2.weight", {5, 5, c1, c2}, 25 * c1);
        append_initialized(params, rng, "enc.conv2.bias", {c2}, 25 * c1);
        append_linear(params, rng, "enc.fc1", d.flat, spec.hidden_dims[0]);
        append_linear(params, rng, "enc.fc2", spec.hidden_dims[0], spec.hidden_dims[1]);
    }
    const std::size_t enc_out = spec.encoder_output_dim();
    append_linear(params, rng, "proj.fc1", enc_out, enc_out);
    append_linear(params, rng, "proj.fc2", enc_out, spec.projection_dim);
    params.partition_marker = params.entries.size();
    append_linear(params, rng, "head", spec.projection_dim, spec.num_classes);
    return params;
}

namespace {

struct Wired {
    Graph::Value r, z, s;
};

// Chains the forward graph; `leaves` must hold one graph value per parameter
// entry, in entry order.
Wired wire(Graph& g, const NetworkSpec& spec, const std::vector<Graph::Value>& leaves,
           Graph::Value x) {
    std::size_t p = 0;
    auto next_pair = [&]() {
        const Graph::Value w = leaves[p], b = leaves[p + 1];
        p += 2;
        return std::pair{w, b};
    };
    Graph::Value cur = x;
    if (spec.encoder == EncoderKind::mlp) {
        for (std::size_t i = 0; i < spec.hidden_dims.size(); ++i) {
            auto [w, b] = next_pair();
            cur = g.relu(g.linear(cur, w, b));
        }
    } else {
        auto [w1, b1] = next_pair();
        cur = g.maxpool2(g.relu(g.conv2d(cur, w1, b1)));
        auto [w2, b2] = next_pair();
        cur = g.maxpool2(g.relu(g.conv2d(cur, w2, b2)));
        cur = g.flatten(cur);
        auto [w3, b3] = next_pair();
        cur = g.relu(g.linear(cur, w3, b3));
        auto [w4, b4] = next_pair();
        cur = g.relu(g.linear(cur, w4, b4));
    }
    const Graph::Value r = cur;
    auto [pw1, pb1] = next_pair();
    const Graph::Value hidden = g.relu(g.linear(r, pw1, pb1));
    auto [pw2, pb2] = next_pair();
    const Graph::Value z = g.linear(hidden, pw2, pb2);
    auto [hw, hb] = next_pair();
    const Graph::Value s = g.linear(z, hw, hb);
    return {r, z, s};
}

// Promotes a single sample to a batch of one; reports whether it was promoted.
Tensor to_batch(const NetworkSpec& spec, const Tensor& x, bool& was_single) {
    const auto sample = spec.sample_shape();
    if (x.shape == sample) {
        was_single = true;
        std::vector<std::size_t> batched{1};
        batched.insert(batched.end(), sample.begin(), sample.end());
        return Tensor(batched, x.data);
    }
    was_single = false;
    if (x.rank() == sample.size() + 1) {
        bool ok = true;
        for (std::size_t i = 0; i < sample.size(); ++i) {
            ok = ok && x.dim(i + 1) == sample[i];
        }
        if (ok) return x;
    }
    throw usage_error("input shape " + x.shape_str() + " does not match network input " +
                      shape_to_string(sample));
}

Tensor squeeze_batch(Tensor t) {
    return Tensor({t.dim(1)}, std::move(t.data));
}

} // namespace

NetworkGraph build_forward_graph(Graph& g, const NetworkSpec& spec,
                                 const ModelParameters& params, Tensor x_batch) {
    NetworkGraph net;
    net.param_leaves.reserve(params.entries.size());
    for (const auto& e : params.entries) {
        net.param_leaves.push_back(g.leaf(e.tensor, /*requires_grad=*/true));
    }
    const Graph::Value x = g.leaf(std::move(x_batch), /*requires_grad=*/false);
    const Wired wired = wire(g, spec, net.param_leaves, x);
    net.z = wired.z;
    net.s = wired.s;
    return net;
}

GradientSet collect_gradients(const Graph& g, const NetworkGraph& net) {
    GradientSet gs;
    gs.grads.reserve(net.param_leaves.size());
    for (const Graph::Value v : net.param_leaves) {
        gs.grads.push_back(g.grad(v));
    }
    return gs;
}

ForwardActivations forward_full(const NetworkSpec& spec, const ModelParameters& params,
                                const Tensor& x) {
    spec.validate();
    bool single = false;
    Tensor xb = to_batch(spec, x, single);
    Graph g;
    std::vector<Graph::Value> leaves;
    leaves.reserve(params.entries.size());
    for (const auto& e : params.entries) {
        leaves.push_back(g.leaf(e.tensor, /*requires_grad=*/false));
    }
    const Graph::Value xv = g.leaf(std::move(xb), /*requires_grad=*/false);
    const Wired wired = wire(g, spec, leaves, xv);
    ForwardActivations acts{g.value(wired.r), g.value(wired.z), g.value(wired.s)};
    if (single) {
        acts.r = squeeze_batch(std::move(acts.r));
        acts.z = squeeze_batch(std::move(acts.z));
        acts.s = squeeze_batch(std::move(acts.s));
    }
    return acts;
}

Tensor extract_representation(const NetworkSpec& spec, const ModelParameters& params,
                              const Tensor& x) {
    return forward_full(spec, params, x).z;
}

} // namespace fedproc
