#include "fedproc/gradcheck.hpp"

#include "fedproc/graph.hpp"
#include "fedproc/network.hpp"
#include "fedproc/rng.hpp"

#include <chrono>
#include <cmath>
#include <optional>

namespace fedproc {

namespace {

constexpr double kStep = 1e-5;
constexpr double kRelTol = 1e-4;

struct LossSetup {
    NetworkSpec spec;
    Tensor x;                 // batch
    std::vector<int> labels;
    Tensor prototypes;        // (K,Q)
    std::optional<double> blend; // nullopt = pure ce; 1.0 = pure gpc
};

// Builds the forward graph and attaches the configured loss head.
Graph::Value attach_loss(Graph& g, const NetworkGraph& net, const LossSetup& setup) {
    if (!setup.blend) {
        return g.cross_entropy_mean(net.s, setup.labels);
    }
    const double a = *setup.blend;
    if (a == 0.0) {
        return g.cross_entropy_mean(net.s, setup.labels);
    }
    if (a == 1.0) {
        return g.gpc_mean(net.z, setup.labels, setup.prototypes);
    }
    return g.add(g.scale(g.gpc_mean(net.z, setup.labels, setup.prototypes), a),
                 g.scale(g.cross_entropy_mean(net.s, setup.labels), 1.0 - a));
}

double loss_value(const ModelParameters& params, const LossSetup& setup) {
    Graph g;
    NetworkGraph net = build_forward_graph(g, setup.spec, params, setup.x);
    return g.value(attach_loss(g, net, setup)).data[0];
}

GradCheckCase check_case(const std::string& name, const ModelParameters& params,
                         const LossSetup& setup, std::size_t points, Rng& rng) {
    GradCheckCase result;
    result.name = name;
    result.points = points;

    Graph g;
    NetworkGraph net = build_forward_graph(g, setup.spec, params, setup.x);
    g.backward(attach_loss(g, net, setup));
    const GradientSet analytic = collect_gradients(g, net);

    ModelParameters probe = params;
    double worst = 0.0;
    for (std::size_t p = 0; p < points; ++p) {
        const std::size_t entry = rng.index(params.entries.size());
        auto& w = probe.entries[entry].tensor.data;
        const std::size_t coord = rng.index(w.size());
        const double saved = w[coord];
        w[coord] = saved + kStep;
        const double up = loss_value(probe, setup);
        w[coord] = saved - kStep;
        const double down = loss_value(probe, setup);
        w[coord] = saved;
        const double numeric = (up - down) / (2.0 * kStep);
        const double exact = analytic.grads[entry].data[coord];
        const double scale = std::max(std::abs(numeric), std::abs(exact));
        double rel = 0.0;
        if (scale > 1e-8) {
            rel = std::abs(numeric - exact) / scale;
        } else if (std::abs(numeric - exact) > 1e-8) {
            rel = 1.0;
        }
        worst = std::max(worst, rel);
    }
    result.max_rel_err = worst;
    result.passed = worst <= kRelTol;
    return result;
}

Tensor random_batch(const std::vector<std::size_t>& sample_shape, std::size_t batch, Rng& rng) {
    std::vector<std::size_t> shape{batch};
    shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
    Tensor x(shape);
    for (auto& v : x.data) {
        v = rng.normal();
    }
    return x;
}

Tensor random_prototypes(std::size_t k, std::size_t q, Rng& rng) {
    Tensor protos({k, q});
    for (auto& v : protos.data) {
        v = rng.normal();
    }
    return protos;
}

} // namespace

GradCheckReport run_gradient_checks(std::uint64_t seed, std::size_t points_per_case) {
    const auto start = std::chrono::steady_clock::now();
    GradCheckReport report;
    Rng rng(mix_seed(seed, 0x67726164));

    NetworkSpec mlp;
    mlp.encoder = EncoderKind::mlp;
    mlp.input_dim = 11;
    mlp.hidden_dims = {9};
    mlp.projection_dim = 7;
    mlp.num_classes = 4;

    NetworkSpec cnn;
    cnn.encoder = EncoderKind::small_cnn;
    cnn.input_shape = {16, 16, 2};
    cnn.conv_channels = {3, 4};
    cnn.hidden_dims = {18, 10};
    cnn.projection_dim = 7;
    cnn.num_classes = 4;

    const struct {
        const char* tag;
        std::optional<double> blend;
    } heads[] = {
        {"ce", std::nullopt},
        {"gpc", 1.0},
        {"blend_a0", 0.0},
        {"blend_a05", 0.5},
        {"blend_a1", 1.0},
    };

    for (const NetworkSpec& spec : {mlp, cnn}) {
        const char* net_tag = spec.encoder == EncoderKind::mlp ? "mlp" : "small_cnn";
        const ModelParameters params = build_network(spec, rng.next_u64());
        LossSetup setup;
        setup.spec = spec;
        setup.x = random_batch(spec.sample_shape(), 3, rng);
        setup.labels = {0, 2, 1};
        setup.prototypes = random_prototypes(spec.num_classes, spec.projection_dim, rng);
        for (const auto& head : heads) {
            setup.blend = head.blend;
            report.cases.push_back(check_case(std::string(net_tag) + "/" + head.tag, params,
                                              setup, points_per_case, rng));
        }
    }

    report.all_passed = true;
    for (const auto& c : report.cases) {
        report.all_passed = report.all_passed && c.passed;
    }
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

} // namespace fedproc
