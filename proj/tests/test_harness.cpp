#include "doctest.h"

#include "fedproc/errors.hpp"
#include "fedproc/harness.hpp"
#include "fedproc/losses.hpp"
#include "fedproc/rng.hpp"

#include "oracles.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fedproc;

namespace {

std::string write_temp_config(const std::string& name, const std::string& body) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream os(path, std::ios::trunc);
    os << body;
    return path.string();
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// Small fast experiment used by the determinism and schema checks.
std::string tiny_experiment_body(const std::string& out_dir) {
    return "[experiment]\n"
           "strategy = fedproc\n"
           "rounds = 3\n"
           "local_epochs = 1\n"
           "batch_size = 16\n"
           "clients = 3\n"
           "learning_rate = 0.05\n"
           "dirichlet_beta = 0.8\n"
           "seed = 21\n"
           "output_dir = " + out_dir + "\n"
           "\n"
           "[network]\n"
           "hidden = 12\n"
           "projection_dim = 8\n"
           "\n"
           "[data]\n"
           "classes = 3\n"
           "dim = 6\n"
           "per_class = 40\n"
           "spread = 0.3\n";
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("an empty config file runs on documented defaults") {
    const auto path = write_temp_config("fedproc_empty.toml", "");
    const ExperimentConfig cfg = load_config(path);
    CHECK(cfg.strategy == Strategy::fedproc);
    CHECK(cfg.batch_size == 64);
    CHECK(cfg.num_clients == 10);
    CHECK(cfg.rounds == 100);
    CHECK(cfg.local_epochs == 10);
    CHECK(cfg.dirichlet_beta == 0.5);
    CHECK(cfg.sample_rate == 1.0);
    CHECK(cfg.network.projection_dim == 256);
    CHECK_NOTHROW(cfg.validate());
    std::remove(path.c_str());
}

TEST_CASE("config parsing handles sections, comments, and overrides") {
    const auto path = write_temp_config("fedproc_parse.toml",
                                        "# top comment\n"
                                        "rounds = 7   # trailing comment\n"
                                        "[network]\n"
                                        "hidden = 12, 8\n"
                                        "encoder = \"mlp\"\n"
                                        "[data]\n"
                                        "spread = 0.25\n");
    auto entries = parse_config_file(path);
    apply_override(entries, "local_epochs=2");
    apply_override(entries, "network.projection_dim=16");
    const ExperimentConfig cfg = config_from_entries(entries);
    CHECK(cfg.rounds == 7);
    CHECK(cfg.local_epochs == 2);
    CHECK(cfg.network.hidden_dims == std::vector<std::size_t>{12, 8});
    CHECK(cfg.network.projection_dim == 16);
    CHECK(cfg.dataset.spread == 0.25);
    std::remove(path.c_str());
}

TEST_CASE("config errors are loud and typed") {
    CHECK_THROWS_AS(load_config("definitely_missing.toml"), config_error);

    const auto bad_key = write_temp_config("fedproc_badkey.toml", "no_such_option = 5\n");
    CHECK_THROWS_WITH_AS(load_config(bad_key), doctest::Contains("no_such_option"),
                         config_error);
    std::remove(bad_key.c_str());

    const auto bad_value = write_temp_config("fedproc_badval.toml", "rounds = soon\n");
    CHECK_THROWS_AS(load_config(bad_value), config_error);
    std::remove(bad_value.c_str());

    const auto bad_strategy = write_temp_config("fedproc_badstrat.toml", "strategy = moon\n");
    CHECK_THROWS_AS(load_config(bad_strategy), config_error);
    std::remove(bad_strategy.c_str());

    ExperimentConfig cfg;
    cfg.sample_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg = ExperimentConfig{};
    cfg.dataset.dim = 2;
    CHECK_THROWS_AS(cfg.validate(), config_error);
}

TEST_CASE("a constant model scores exactly one over K on balanced data") {
    NetworkSpec spec;
    spec.input_dim = 8;
    spec.hidden_dims = {4};
    spec.projection_dim = 4;
    spec.num_classes = 4;
    ModelParameters zero = build_network(spec, 1);
    for (auto& e : zero.entries) {
        e.tensor.fill(0.0);
    }
    const auto data = generate_blobs(4, 8, 25, 0.3, 31);
    CHECK(evaluate(spec, zero, data) == 0.25); // ties break to class 0, balanced labels
}

TEST_CASE("a hand-built lookup model is perfect on its three samples") {
    // identity feature extractor plus identity head: logits == one-hot input
    NetworkSpec spec;
    spec.input_dim = 3;
    spec.hidden_dims = {};
    spec.projection_dim = 3;
    spec.num_classes = 3;
    ModelParameters p = build_network(spec, 2);
    for (auto& e : p.entries) {
        e.tensor.fill(0.0);
    }
    for (auto& e : p.entries) {
        if (e.name == "proj.fc1.weight" || e.name == "proj.fc2.weight" ||
            e.name == "head.weight") {
            for (std::size_t i = 0; i < 3; ++i) {
                e.tensor.at(i, i) = 1.0;
            }
        }
    }
    LabeledDataset test;
    test.num_classes = 3;
    test.features = {Tensor({3}, {1, 0, 0}), Tensor({3}, {0, 1, 0}), Tensor({3}, {0, 0, 1})};
    test.labels = {0, 1, 2};
    CHECK(evaluate(spec, p, test) == 1.0);
}

TEST_CASE("evaluation matches a brute-force argmax count on a random model") {
    NetworkSpec spec;
    spec.input_dim = 6;
    spec.hidden_dims = {5};
    spec.projection_dim = 4;
    spec.num_classes = 3;
    const ModelParameters p = build_network(spec, 3);
    const auto data = generate_blobs(3, 6, 70, 0.6, 32); // 210 samples, messy spread
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto acts = forward_full(spec, p, data.features[i]);
        std::size_t best = 0;
        for (std::size_t c = 1; c < 3; ++c) {
            if (acts.s[c] > acts.s[best]) best = c;
        }
        if (static_cast<int>(best) == data.labels[i]) ++correct;
    }
    CHECK(evaluate(spec, p, data) ==
          doctest::Approx(static_cast<double>(correct) / data.size()).epsilon(1e-15));
}

TEST_CASE("metrics rows round-trip through the csv format") {
    RoundMetrics m;
    m.round = 3;
    m.alpha = 1.0 - 3.0 / 7.0;
    m.mean_train_loss = 1.2345678901234567;
    m.top1_accuracy = 0.875;
    m.participating_clients = {0, 2, 4};
    const auto header = metrics_csv_header();
    const auto row = metrics_csv_row(m);
    const auto path = write_temp_config("fedproc_metrics.csv", header + "\n" + row + "\n");
    const auto rows = read_metrics_csv(path);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].round == 3);
    CHECK(rows[0].alpha == m.alpha); // %.17g round-trips doubles exactly
    CHECK(rows[0].mean_train_loss == m.mean_train_loss);
    CHECK(rows[0].top1_accuracy == m.top1_accuracy);
    CHECK(rows[0].participants == 3);
    std::remove(path.c_str());
}

TEST_CASE("a one-round zero-rate run scores exactly the initial network") {
    const auto out = (std::filesystem::temp_directory_path() / "fedproc_noop_run").string();
    auto entries = parse_config_file(write_temp_config("fedproc_noop.toml",
                                                       tiny_experiment_body(out)));
    apply_override(entries, "experiment.learning_rate=0");
    apply_override(entries, "experiment.rounds=1");
    const ExperimentConfig cfg = config_from_entries(entries);

    const auto series = run_experiment(cfg);
    REQUIRE(series.size() == 1);

    const ExperimentData data = prepare_data(cfg);
    const ModelParameters initial = build_network(data.network, mix_seed(cfg.seed, stream::init));
    CHECK(series[0].top1_accuracy == evaluate(data.network, initial, data.test));
    CHECK(series[0].alpha == 1.0);
}

TEST_CASE("identical configs write byte-identical metrics files") {
    const auto out1 = (std::filesystem::temp_directory_path() / "fedproc_det1").string();
    const auto out2 = (std::filesystem::temp_directory_path() / "fedproc_det2").string();
    auto entries = parse_config_file(
        write_temp_config("fedproc_det.toml", tiny_experiment_body(out1)));
    ExperimentConfig cfg1 = config_from_entries(entries);
    apply_override(entries, "experiment.output_dir=" + out2);
    ExperimentConfig cfg2 = config_from_entries(entries);

    run_experiment_to_dir(cfg1);
    run_experiment_to_dir(cfg2);
    const std::string csv1 = slurp(out1 + "/metrics.csv");
    const std::string csv2 = slurp(out2 + "/metrics.csv");
    REQUIRE(!csv1.empty());
    CHECK(csv1 == csv2);

    // a different seed must change the numbers but keep the schema
    ExperimentConfig cfg3 = cfg2;
    cfg3.seed = 22;
    run_experiment_to_dir(cfg3);
    const std::string csv3 = slurp(out2 + "/metrics.csv");
    CHECK(csv3 != csv2);
    CHECK(csv3.substr(0, csv3.find('\n')) == metrics_csv_header());

    const auto rows = read_metrics_csv(out1 + "/metrics.csv");
    REQUIRE(rows.size() == 3);
    for (std::size_t t = 0; t < rows.size(); ++t) {
        CHECK(rows[t].alpha == alpha_schedule(t, 3));
    }
    CHECK(slurp(out1 + "/run.json").find("\"strategy\"") != std::string::npos);

    std::filesystem::remove_all(out1);
    std::filesystem::remove_all(out2);
}

TEST_CASE("the output directory env var wins over the config") {
    const auto out = (std::filesystem::temp_directory_path() / "fedproc_envdir").string();
    auto entries = parse_config_file(write_temp_config(
        "fedproc_env.toml", tiny_experiment_body("should_not_be_used")));
    apply_override(entries, "experiment.rounds=1");
    const ExperimentConfig cfg = config_from_entries(entries);
    setenv("FEDPROC_OUTPUT_DIR", out.c_str(), 1);
    run_experiment_to_dir(cfg);
    unsetenv("FEDPROC_OUTPUT_DIR");
    CHECK(std::filesystem::exists(out + "/metrics.csv"));
    CHECK_FALSE(std::filesystem::exists("should_not_be_used"));
    std::filesystem::remove_all(out);
}

TEST_CASE("checkpoints appear at the configured cadence") {
    const auto out = (std::filesystem::temp_directory_path() / "fedproc_ckpt").string();
    auto entries = parse_config_file(
        write_temp_config("fedproc_ckpt.toml", tiny_experiment_body(out)));
    apply_override(entries, "experiment.checkpoint_every=2");
    const ExperimentConfig cfg = config_from_entries(entries);
    run_experiment_to_dir(cfg);
    CHECK(std::filesystem::exists(out + "/round_0001.ckpt"));
    CHECK(std::filesystem::exists(out + "/round_0002.ckpt")); // final round, 3 rounds total
    const ModelParameters final_model = load_checkpoint(out + "/round_0002.ckpt");
    CHECK(final_model.entries.size() > 0);
    std::filesystem::remove_all(out);
}

TEST_CASE("idx-backed configs validate their file paths early") {
    ExperimentConfig cfg;
    cfg.dataset.source = DatasetConfig::Source::idx;
    CHECK_THROWS_AS(cfg.validate(), config_error);
}

} // TEST_SUITE
