#include "fedproc/errors.hpp"
#include "fedproc/gradcheck.hpp"
#include "fedproc/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

namespace {

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            long long seed, bool seed_given) {
    auto entries = fedproc::parse_config_file(config_path);
    for (const auto& ov : overrides) {
        fedproc::apply_override(entries, ov);
    }
    fedproc::ExperimentConfig cfg = fedproc::config_from_entries(entries);
    if (seed_given) {
        cfg.seed = static_cast<std::uint64_t>(seed);
    }
    const auto series = fedproc::run_experiment_to_dir(cfg);
    std::printf("completed %zu rounds (strategy=%s)\n", series.size(),
                fedproc::to_string(cfg.strategy).c_str());
    if (!series.empty()) {
        std::printf("final top-1 accuracy: %.4f\n", series.back().top1_accuracy);
    }
    return 0;
}

int cmd_partition_stats(const std::string& config_path) {
    const fedproc::ExperimentConfig cfg = fedproc::load_config(config_path);
    const fedproc::ExperimentData data = fedproc::prepare_data(cfg);
    const std::size_t k = data.test.num_classes;
    std::printf("%zu clients, %zu classes (beta=%g, seed=%llu)\n", data.clients.size(), k,
                cfg.dirichlet_beta, static_cast<unsigned long long>(cfg.seed));
    std::printf("%-8s", "client");
    for (std::size_t c = 0; c < k; ++c) {
        std::printf(" %6zu", c);
    }
    std::printf(" %8s\n", "total");
    for (const auto& client : data.clients) {
        std::printf("%-8d", client.client_id);
        for (std::size_t c = 0; c < k; ++c) {
            std::printf(" %6zu", client.per_class_index[c].size());
        }
        std::printf(" %8zu\n", client.size());
    }
    return 0;
}

int cmd_gradcheck(long long seed, std::size_t points) {
    const auto report = fedproc::run_gradient_checks(static_cast<std::uint64_t>(seed), points);
    for (const auto& c : report.cases) {
        std::printf("%-20s %4zu points  max rel err %.3e  %s\n", c.name.c_str(), c.points,
                    c.max_rel_err, c.passed ? "ok" : "FAILED");
    }
    std::printf("gradient check %s in %.2fs\n", report.all_passed ? "passed" : "FAILED",
                report.seconds);
    if (!report.all_passed) {
        throw std::runtime_error("gradient check failed");
    }
    return 0;
}

int cmd_compare(const std::vector<std::string>& runs) {
    std::vector<double> finals;
    std::printf("%-40s %8s %10s\n", "run", "rounds", "final_top1");
    for (const auto& path : runs) {
        const auto rows = fedproc::read_metrics_csv(path);
        if (rows.empty()) {
            throw fedproc::ingestion_error("metrics file has no rows: " + path);
        }
        finals.push_back(rows.back().top1_accuracy);
        std::printf("%-40s %8zu %10.4f\n", path.c_str(), rows.size(),
                    rows.back().top1_accuracy);
    }
    for (std::size_t i = 1; i < finals.size(); ++i) {
        std::printf("delta(%s - %s) = %.6f\n", runs[i].c_str(), runs[0].c_str(),
                    finals[i] - finals[0]);
    }
    if (finals.size() == 1) {
        std::printf("nothing to compare against\n");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fedproc: deterministic federated-learning simulator with prototypical "
                 "contrastive local training"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    long long seed = 0;

    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("--config", config_path, "experiment config file")->required();
    auto* seed_opt = run->add_option("--seed", seed, "override the experiment seed");
    run->add_option("--override", overrides,
                    "override a config entry as section.key=value (repeatable)");

    std::string stats_config;
    auto* stats = app.add_subcommand("partition-stats",
                                     "print the per-client class histogram of a config");
    stats->add_option("--config", stats_config, "experiment config file")->required();

    long long gc_seed = 7;
    std::size_t gc_points = 10;
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    gradcheck->add_option("--seed", gc_seed, "seed for the random probes");
    gradcheck->add_option("--points", gc_points, "parameter coordinates per case");

    std::vector<std::string> compare_runs;
    auto* compare = app.add_subcommand("compare", "compare the final accuracy of metrics files");
    compare->add_option("--runs", compare_runs, "metrics.csv files")->expected(1, -1)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (run->parsed()) {
            return cmd_run(config_path, overrides, seed, seed_opt->count() > 0);
        }
        if (stats->parsed()) {
            return cmd_partition_stats(stats_config);
        }
        if (gradcheck->parsed()) {
            return cmd_gradcheck(gc_seed, gc_points);
        }
        if (compare->parsed()) {
            return cmd_compare(compare_runs);
        }
    } catch (const fedproc::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
