#include "doctest.h"

#include "fedproc/errors.hpp"
#include "fedproc/network.hpp"
#include "fedproc/ops.hpp"
#include "fedproc/rng.hpp"

#include "oracles.hpp"

using namespace fedproc;

namespace {

NetworkSpec tiny_mlp() {
    NetworkSpec spec;
    spec.encoder = EncoderKind::mlp;
    spec.input_dim = 16;
    spec.hidden_dims = {32};
    spec.projection_dim = 8;
    spec.num_classes = 4;
    return spec;
}

Tensor random_input(const NetworkSpec& spec, std::size_t batch, Rng& rng) {
    std::vector<std::size_t> shape{batch};
    const auto s = spec.sample_shape();
    shape.insert(shape.end(), s.begin(), s.end());
    Tensor x(shape);
    for (auto& v : x.data) {
        v = rng.normal();
    }
    return x;
}

const Tensor& entry(const ModelParameters& p, const std::string& name) {
    for (const auto& e : p.entries) {
        if (e.name == name) return e.tensor;
    }
    throw std::runtime_error("no entry " + name);
}

// Forward of the mlp network by hand, independent of the graph machinery.
std::vector<double> naive_forward_logits(const NetworkSpec& spec, const ModelParameters& p,
                                         const std::vector<double>& x) {
    auto dense = [](const std::vector<double>& in, const Tensor& w, const Tensor& b,
                    bool relu) {
        std::vector<double> out = oracle::matmul(in, 1, w.dim(0), w.data, w.dim(1));
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] += b[i];
            if (relu && out[i] < 0.0) out[i] = 0.0;
        }
        return out;
    };
    std::vector<double> cur = x;
    for (std::size_t i = 0; i < spec.hidden_dims.size(); ++i) {
        const std::string base = "enc.fc" + std::to_string(i + 1);
        cur = dense(cur, entry(p, base + ".weight"), entry(p, base + ".bias"), true);
    }
    cur = dense(cur, entry(p, "proj.fc1.weight"), entry(p, "proj.fc1.bias"), true);
    cur = dense(cur, entry(p, "proj.fc2.weight"), entry(p, "proj.fc2.bias"), false);
    cur = dense(cur, entry(p, "head.weight"), entry(p, "head.bias"), false);
    return cur;
}

} // namespace

TEST_SUITE("model-zoo") {

TEST_CASE("mlp output layer has the declared shape") {
    const ModelParameters p = build_network(tiny_mlp(), 1);
    CHECK(entry(p, "head.weight").shape == std::vector<std::size_t>{8, 4});
    CHECK(entry(p, "head.bias").shape == std::vector<std::size_t>{4});
    CHECK(p.partition_marker == p.entries.size() - 2);
    // everything before the marker belongs to the feature extractor
    for (std::size_t i = 0; i < p.partition_marker; ++i) {
        CHECK(p.entries[i].name.rfind("head", 0) == std::string::npos);
    }
}

TEST_CASE("small_cnn parameter count matches the shape calculator on 32x32x3") {
    NetworkSpec spec;
    spec.encoder = EncoderKind::small_cnn;
    spec.input_shape = {32, 32, 3};
    spec.hidden_dims = {120, 84};
    spec.projection_dim = 256;
    spec.num_classes = 10;
    const ModelParameters p = build_network(spec, 3);
    const std::size_t expected =
        oracle::small_cnn_param_count({32, 32, 3}, 6, 16, 120, 84, 256, 10);
    CHECK(p.scalar_count() == expected);
}

TEST_CASE("same seed builds identical parameters, different seeds differ") {
    const ModelParameters a = build_network(tiny_mlp(), 77);
    const ModelParameters b = build_network(tiny_mlp(), 77);
    const ModelParameters c = build_network(tiny_mlp(), 78);
    REQUIRE(a.same_layout(b));
    bool all_equal = true;
    bool any_differs_from_c = false;
    for (std::size_t e = 0; e < a.entries.size(); ++e) {
        all_equal = all_equal && a.entries[e].tensor.data == b.entries[e].tensor.data;
        any_differs_from_c =
            any_differs_from_c || a.entries[e].tensor.data != c.entries[e].tensor.data;
    }
    CHECK(all_equal);
    CHECK(any_differs_from_c);
}

TEST_CASE("invalid specs are rejected") {
    NetworkSpec spec = tiny_mlp();
    spec.projection_dim = 0;
    CHECK_THROWS_AS(build_network(spec, 1), config_error);
    spec = tiny_mlp();
    spec.num_classes = 0;
    CHECK_THROWS_AS(build_network(spec, 1), config_error);
    spec = tiny_mlp();
    spec.input_dim = 0;
    CHECK_THROWS_AS(build_network(spec, 1), config_error);
}

TEST_CASE("projection dimension defaults to 256") {
    CHECK(NetworkSpec{}.projection_dim == 256);
}

TEST_CASE("zero network maps everything to zero") {
    const NetworkSpec spec = tiny_mlp();
    ModelParameters p = build_network(spec, 1);
    for (auto& e : p.entries) {
        e.tensor.fill(0.0);
    }
    Rng rng(4);
    const Tensor x = random_input(spec, 1, rng);
    const auto acts = forward_full(spec, p, Tensor({spec.input_dim}, x.data));
    for (double v : acts.z.data) {
        CHECK(v == 0.0);
    }
    for (double v : acts.s.data) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("applying the output layer to z reproduces s exactly") {
    const NetworkSpec spec = tiny_mlp();
    const ModelParameters p = build_network(spec, 21);
    Rng rng(22);
    const Tensor x = random_input(spec, 5, rng);
    const auto acts = forward_full(spec, p, x);
    const Tensor s2 = linear_forward(acts.z, entry(p, "head.weight"), entry(p, "head.bias"));
    CHECK(s2.data == acts.s.data);
}

TEST_CASE("random network forward matches the hand-rolled oracle") {
    const NetworkSpec spec = tiny_mlp();
    const ModelParameters p = build_network(spec, 31);
    Rng rng(32);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(spec.input_dim);
        for (auto& v : x) {
            v = rng.normal();
        }
        const auto acts = forward_full(spec, p, Tensor::vector1d(x));
        const auto expected = naive_forward_logits(spec, p, x);
        REQUIRE(acts.s.size() == expected.size());
        for (std::size_t i = 0; i < expected.size(); ++i) {
            CHECK(acts.s[i] == doctest::Approx(expected[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("extract_representation agrees with forward_full on 100 random inputs") {
    const NetworkSpec spec = tiny_mlp();
    const ModelParameters p = build_network(spec, 41);
    Rng rng(42);
    const Tensor x = random_input(spec, 100, rng);
    const Tensor z = extract_representation(spec, p, x);
    const auto acts = forward_full(spec, p, x);
    CHECK(z.data == acts.z.data);
}

TEST_CASE("perturbing w_c leaves z alone; perturbing w_e leaves the z->s map alone") {
    const NetworkSpec spec = tiny_mlp();
    const ModelParameters p = build_network(spec, 51);
    Rng rng(52);
    const Tensor x = random_input(spec, 3, rng);
    const auto base = forward_full(spec, p, x);

    ModelParameters head_perturbed = p;
    for (std::size_t e = p.partition_marker; e < p.entries.size(); ++e) {
        for (auto& v : head_perturbed.entries[e].tensor.data) {
            v += 0.25;
        }
    }
    const auto after_head = forward_full(spec, head_perturbed, x);
    CHECK(after_head.z.data == base.z.data);

    ModelParameters body_perturbed = p;
    for (std::size_t e = 0; e < p.partition_marker; ++e) {
        for (auto& v : body_perturbed.entries[e].tensor.data) {
            v += 0.25;
        }
    }
    const auto after_body = forward_full(spec, body_perturbed, x);
    bool z_changed = after_body.z.data != base.z.data;
    CHECK(z_changed);
    // same head applied to the new z
    const Tensor mapped =
        linear_forward(after_body.z, entry(p, "head.weight"), entry(p, "head.bias"));
    CHECK(mapped.data == after_body.s.data);
}

TEST_CASE("forward rejects inputs with the wrong shape") {
    const NetworkSpec spec = tiny_mlp();
    const ModelParameters p = build_network(spec, 61);
    CHECK_THROWS_AS(forward_full(spec, p, Tensor({3, 5})), usage_error);
    CHECK_THROWS_AS(forward_full(spec, p, Tensor({spec.input_dim + 1})), usage_error);
}

TEST_CASE("small_cnn forward produces finite activations of the right width") {
    NetworkSpec spec;
    spec.encoder = EncoderKind::small_cnn;
    spec.input_shape = {16, 16, 1};
    spec.conv_channels = {3, 4};
    spec.hidden_dims = {12, 10};
    spec.projection_dim = 6;
    spec.num_classes = 3;
    const ModelParameters p = build_network(spec, 71);
    Rng rng(72);
    const Tensor x = random_input(spec, 2, rng);
    const auto acts = forward_full(spec, p, x);
    CHECK(acts.r.shape == std::vector<std::size_t>{2, 10});
    CHECK(acts.z.shape == std::vector<std::size_t>{2, 6});
    CHECK(acts.s.shape == std::vector<std::size_t>{2, 3});
    CHECK(acts.z.all_finite());
    CHECK(acts.s.all_finite());
}

} // TEST_SUITE
