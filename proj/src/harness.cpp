#include "fedproc/harness.hpp"

#include "fedproc/errors.hpp"
#include "fedproc/losses.hpp"
#include "fedproc/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fedproc {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

// Strips a trailing comment: '#' at line start or preceded by whitespace.
std::string strip_comment(const std::string& s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '#' && (i == 0 || s[i - 1] == ' ' || s[i - 1] == '\t')) {
            return s.substr(0, i);
        }
    }
    return s;
}

std::string unquote(std::string v) {
    if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') ||
                          (v.front() == '\'' && v.back() == '\''))) {
        return v.substr(1, v.size() - 2);
    }
    return v;
}

std::size_t to_size(const std::string& key, const std::string& v) {
    try {
        const long long n = std::stoll(v);
        if (n < 0) throw std::invalid_argument("negative");
        return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
        throw config_error("config key '" + key + "' expects a non-negative integer, got '" + v +
                           "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw config_error("config key '" + key + "' expects a number, got '" + v + "'");
    }
}

std::vector<std::size_t> to_size_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    std::string item;
    std::stringstream ss(v);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(to_size(key, item));
    }
    return out;
}

std::array<std::size_t, 3> to_shape3(const std::string& key, std::string v) {
    std::replace(v.begin(), v.end(), 'x', ',');
    const auto list = to_size_list(key, v);
    if (list.size() != 3) {
        throw config_error("config key '" + key + "' expects H,W,C");
    }
    return {list[0], list[1], list[2]};
}

} // namespace

void ExperimentConfig::validate() const {
    if (rounds == 0) throw config_error("rounds must be positive");
    if (local_epochs == 0) throw config_error("local_epochs must be positive");
    if (batch_size == 0) throw config_error("batch_size must be positive");
    if (num_clients == 0) throw config_error("clients must be positive");
    if (learning_rate < 0.0) throw config_error("learning_rate must be non-negative");
    if (!(dirichlet_beta > 0.0)) throw config_error("dirichlet_beta must be positive");
    if (!(sample_rate > 0.0 && sample_rate <= 1.0)) {
        throw config_error("sample_rate must lie in (0,1]");
    }
    if (alpha_override && (*alpha_override < 0.0 || *alpha_override > 1.0)) {
        throw config_error("alpha_override must lie in [0,1]");
    }
    if (output_dir.empty()) throw config_error("output_dir must not be empty");
    if (dataset.source == DatasetConfig::Source::blobs) {
        if (dataset.classes < 2) throw config_error("blobs need at least 2 classes");
        if (dataset.per_class == 0) throw config_error("blobs need samples per class");
        if (dataset.dim < dataset.classes) {
            throw config_error("blobs need dim >= classes");
        }
        if (dataset.spread < 0.0) throw config_error("blobs spread must be non-negative");
        if (!(dataset.test_fraction >= 0.0 && dataset.test_fraction < 1.0)) {
            throw config_error("test_fraction must lie in [0,1)");
        }
    } else {
        if (dataset.train_images.empty() || dataset.train_labels.empty() ||
            dataset.test_images.empty() || dataset.test_labels.empty()) {
            throw config_error("idx datasets need train and test image/label paths");
        }
    }
}

TrainingConfig ExperimentConfig::training() const {
    TrainingConfig t;
    t.strategy = strategy;
    t.total_rounds = rounds;
    t.local_epochs = local_epochs;
    t.batch_size = batch_size;
    t.learning_rate = learning_rate;
    t.sample_rate = sample_rate;
    t.seed = seed;
    t.threads = threads;
    t.alpha_override = alpha_override;
    return t;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw config_error("cannot open config file: " + path);
    }
    std::map<std::string, std::string> entries;
    std::string line;
    std::string section = "experiment";
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw config_error(path + ":" + std::to_string(lineno) + ": unterminated section");
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw config_error(path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = unquote(trim(line.substr(eq + 1)));
        if (key.empty()) {
            throw config_error(path + ":" + std::to_string(lineno) + ": empty key");
        }
        entries[section + "." + key] = value;
    }
    return entries;
}

void apply_override(std::map<std::string, std::string>& entries, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw config_error("override must look like section.key=value, got '" + spec + "'");
    }
    std::string key = trim(spec.substr(0, eq));
    if (key.find('.') == std::string::npos) {
        key = "experiment." + key;
    }
    entries[key] = unquote(trim(spec.substr(eq + 1)));
}

ExperimentConfig config_from_entries(const std::map<std::string, std::string>& entries) {
    ExperimentConfig cfg;
    for (const auto& [key, value] : entries) {
        if (key == "experiment.strategy") {
            cfg.strategy = strategy_from_string(value);
        } else if (key == "experiment.rounds") {
            cfg.rounds = to_size(key, value);
        } else if (key == "experiment.local_epochs") {
            cfg.local_epochs = to_size(key, value);
        } else if (key == "experiment.batch_size") {
            cfg.batch_size = to_size(key, value);
        } else if (key == "experiment.clients") {
            cfg.num_clients = to_size(key, value);
        } else if (key == "experiment.learning_rate") {
            cfg.learning_rate = to_double(key, value);
        } else if (key == "experiment.dirichlet_beta") {
            cfg.dirichlet_beta = to_double(key, value);
        } else if (key == "experiment.sample_rate") {
            cfg.sample_rate = to_double(key, value);
        } else if (key == "experiment.seed") {
            cfg.seed = static_cast<std::uint64_t>(to_size(key, value));
        } else if (key == "experiment.threads") {
            cfg.threads = to_size(key, value);
        } else if (key == "experiment.alpha_override") {
            if (value != "none") cfg.alpha_override = to_double(key, value);
        } else if (key == "experiment.checkpoint_every") {
            cfg.checkpoint_every = to_size(key, value);
        } else if (key == "experiment.output_dir") {
            cfg.output_dir = value;
        } else if (key == "network.encoder") {
            if (value == "mlp") {
                cfg.network.encoder = EncoderKind::mlp;
            } else if (value == "small_cnn") {
                cfg.network.encoder = EncoderKind::small_cnn;
            } else {
                throw config_error("unknown encoder '" + value + "' (expected mlp or small_cnn)");
            }
        } else if (key == "network.input_dim") {
            cfg.network.input_dim = to_size(key, value);
        } else if (key == "network.input_shape") {
            cfg.network.input_shape = to_shape3(key, value);
        } else if (key == "network.hidden") {
            cfg.network.hidden_dims = to_size_list(key, value);
        } else if (key == "network.projection_dim") {
            cfg.network.projection_dim = to_size(key, value);
        } else if (key == "network.classes") {
            cfg.network.num_classes = to_size(key, value);
        } else if (key == "network.conv_channels") {
            const auto list = to_size_list(key, value);
            if (list.size() != 2) throw config_error("conv_channels expects two values");
            cfg.network.conv_channels = {list[0], list[1]};
        } else if (key == "data.source") {
            if (value == "blobs") {
                cfg.dataset.source = DatasetConfig::Source::blobs;
            } else if (value == "idx") {
                cfg.dataset.source = DatasetConfig::Source::idx;
            } else {
                throw config_error("unknown data source '" + value + "' (expected blobs or idx)");
            }
        } else if (key == "data.classes") {
            cfg.dataset.classes = to_size(key, value);
        } else if (key == "data.dim") {
            cfg.dataset.dim = to_size(key, value);
        } else if (key == "data.per_class") {
            cfg.dataset.per_class = to_size(key, value);
        } else if (key == "data.spread") {
            cfg.dataset.spread = to_double(key, value);
        } else if (key == "data.test_fraction") {
            cfg.dataset.test_fraction = to_double(key, value);
        } else if (key == "data.train_images") {
            cfg.dataset.train_images = value;
        } else if (key == "data.train_labels") {
            cfg.dataset.train_labels = value;
        } else if (key == "data.test_images") {
            cfg.dataset.test_images = value;
        } else if (key == "data.test_labels") {
            cfg.dataset.test_labels = value;
        } else {
            throw config_error("unknown config key '" + key + "'");
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    return config_from_entries(parse_config_file(path));
}

namespace {

// Fills network fields left at zero from the dataset and checks consistency.
NetworkSpec resolve_network(const ExperimentConfig& cfg, const LabeledDataset& sample_source) {
    NetworkSpec net = cfg.network;
    if (net.num_classes == 0) {
        net.num_classes = sample_source.num_classes;
    }
    const Tensor& f = sample_source.features.front();
    if (net.encoder == EncoderKind::mlp) {
        if (net.input_dim == 0) {
            net.input_dim = f.size();
        }
        if (net.input_dim != f.size()) {
            throw config_error("network input_dim " + std::to_string(net.input_dim) +
                               " does not match dataset feature size " +
                               std::to_string(f.size()));
        }
    } else {
        if (net.input_shape == std::array<std::size_t, 3>{0, 0, 0}) {
            if (f.rank() != 3) {
                throw config_error("small_cnn needs (H,W,C) features; dataset provides " +
                                   f.shape_str());
            }
            net.input_shape = {f.dim(0), f.dim(1), f.dim(2)};
        }
        if (f.rank() != 3 || net.input_shape != std::array<std::size_t, 3>{f.dim(0), f.dim(1),
                                                                           f.dim(2)}) {
            throw config_error("network input_shape does not match dataset features " +
                               f.shape_str());
        }
    }
    if (net.num_classes != sample_source.num_classes) {
        throw config_error("network classes " + std::to_string(net.num_classes) +
                           " do not match dataset classes " +
                           std::to_string(sample_source.num_classes));
    }
    net.validate();
    return net;
}

} // namespace

ExperimentData prepare_data(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentData out;
    LabeledDataset train;
    if (cfg.dataset.source == DatasetConfig::Source::blobs) {
        LabeledDataset full = generate_blobs(cfg.dataset.classes, cfg.dataset.dim,
                                             cfg.dataset.per_class, cfg.dataset.spread, cfg.seed);
        auto split = split_train_test(full, cfg.dataset.test_fraction, cfg.seed);
        train = std::move(split.train);
        out.test = std::move(split.test);
    } else {
        train = load_idx(cfg.dataset.train_images, cfg.dataset.train_labels);
        out.test = load_idx(cfg.dataset.test_images, cfg.dataset.test_labels);
        const std::size_t k = std::max(train.num_classes, out.test.num_classes);
        train.num_classes = k;
        out.test.num_classes = k;
    }
    if (out.test.size() == 0) {
        throw config_error("experiment needs a non-empty test set");
    }
    out.network = resolve_network(cfg, train);
    out.clients =
        dirichlet_partition(train, PartitionConfig{cfg.num_clients, cfg.dirichlet_beta, cfg.seed});
    return out;
}

std::string metrics_csv_header() {
    return "round,alpha,mean_train_loss,top1_accuracy,participants";
}

std::string metrics_csv_row(const RoundMetrics& m) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%zu", m.round, m.alpha,
                  m.mean_train_loss, m.top1_accuracy, m.participating_clients.size());
    return buf;
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw ingestion_error("cannot open metrics file: " + path);
    }
    std::string line;
    if (!std::getline(is, line) || trim(line) != metrics_csv_header()) {
        throw ingestion_error("unexpected metrics header in " + path);
    }
    std::vector<MetricsRow> rows;
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty()) continue;
        MetricsRow r;
        char* end = nullptr;
        const char* p = line.c_str();
        r.round = std::strtoull(p, &end, 10);
        if (*end != ',') throw ingestion_error("malformed metrics row in " + path);
        r.alpha = std::strtod(end + 1, &end);
        if (*end != ',') throw ingestion_error("malformed metrics row in " + path);
        r.mean_train_loss = std::strtod(end + 1, &end);
        if (*end != ',') throw ingestion_error("malformed metrics row in " + path);
        r.top1_accuracy = std::strtod(end + 1, &end);
        if (*end != ',') throw ingestion_error("malformed metrics row in " + path);
        r.participants = std::strtoull(end + 1, &end, 10);
        rows.push_back(r);
    }
    return rows;
}

std::vector<RoundMetrics> run_experiment(const ExperimentConfig& cfg, MetricsSink* sink) {
    const ExperimentData data = prepare_data(cfg);
    const TrainingConfig train_cfg = cfg.training();

    FederationState state;
    state.global_params = build_network(data.network, mix_seed(cfg.seed, stream::init));
    if (cfg.strategy != Strategy::solo) {
        state.global_prototypes =
            initial_prototypes(data.network, state.global_params, data.clients);
    }

    std::vector<RoundMetrics> series;
    series.reserve(cfg.rounds);
    for (std::size_t t = 0; t < cfg.rounds; ++t) {
        series.push_back(run_round(t, state, data.network, data.clients, data.test, train_cfg));
        if (sink) {
            sink->on_round(series.back());
        }
        if (cfg.checkpoint_every > 0 && cfg.strategy != Strategy::solo &&
            ((t + 1) % cfg.checkpoint_every == 0 || t + 1 == cfg.rounds)) {
            char name[64];
            std::snprintf(name, sizeof(name), "round_%04zu.ckpt", t);
            namespace fs = std::filesystem;
            save_checkpoint((fs::path(cfg.output_dir) / name).string(), state.global_params);
        }
    }
    if (cfg.strategy == Strategy::solo) {
        const SoloAccuracy acc = evaluate_solo(data.network, state.solo_params, data.test);
        std::cout << "solo final top-1 over " << state.solo_params.size()
                  << " clients: mean=" << acc.mean << " stddev=" << acc.stddev << "\n";
    }
    return series;
}

std::string resolved_config_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["strategy"] = to_string(cfg.strategy);
    j["rounds"] = cfg.rounds;
    j["local_epochs"] = cfg.local_epochs;
    j["batch_size"] = cfg.batch_size;
    j["clients"] = cfg.num_clients;
    j["learning_rate"] = cfg.learning_rate;
    j["dirichlet_beta"] = cfg.dirichlet_beta;
    j["sample_rate"] = cfg.sample_rate;
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    j["checkpoint_every"] = cfg.checkpoint_every;
    j["output_dir"] = cfg.output_dir;
    if (cfg.alpha_override) {
        j["alpha_override"] = *cfg.alpha_override;
    }
    nlohmann::json net;
    net["encoder"] = cfg.network.encoder == EncoderKind::mlp ? "mlp" : "small_cnn";
    net["input_dim"] = cfg.network.input_dim;
    net["input_shape"] = cfg.network.input_shape;
    net["hidden"] = cfg.network.hidden_dims;
    net["projection_dim"] = cfg.network.projection_dim;
    net["classes"] = cfg.network.num_classes;
    net["conv_channels"] = cfg.network.conv_channels;
    j["network"] = net;
    nlohmann::json data;
    data["source"] = cfg.dataset.source == DatasetConfig::Source::blobs ? "blobs" : "idx";
    if (cfg.dataset.source == DatasetConfig::Source::blobs) {
        data["classes"] = cfg.dataset.classes;
        data["dim"] = cfg.dataset.dim;
        data["per_class"] = cfg.dataset.per_class;
        data["spread"] = cfg.dataset.spread;
        data["test_fraction"] = cfg.dataset.test_fraction;
    } else {
        data["train_images"] = cfg.dataset.train_images;
        data["train_labels"] = cfg.dataset.train_labels;
        data["test_images"] = cfg.dataset.test_images;
        data["test_labels"] = cfg.dataset.test_labels;
    }
    j["data"] = data;
    return j.dump(2);
}

namespace {

struct CsvFileSink : MetricsSink {
    std::ofstream os;
    explicit CsvFileSink(const std::string& path) : os(path, std::ios::trunc) {
        if (!os) {
            throw config_error("cannot open metrics file for writing: " + path);
        }
        os << metrics_csv_header() << "\n";
        os.flush();
    }
    void on_round(const RoundMetrics& m) override {
        os << metrics_csv_row(m) << "\n";
        os.flush();
    }
};

} // namespace

std::vector<RoundMetrics> run_experiment_to_dir(const ExperimentConfig& cfg) {
    ExperimentConfig resolved = cfg;
    if (const char* env = std::getenv("FEDPROC_OUTPUT_DIR"); env && *env) {
        resolved.output_dir = env;
    }
    resolved.validate();
    namespace fs = std::filesystem;
    fs::create_directories(resolved.output_dir);
    {
        std::ofstream js(fs::path(resolved.output_dir) / "run.json", std::ios::trunc);
        if (!js) {
            throw config_error("cannot write run.json under " + resolved.output_dir);
        }
        js << resolved_config_json(resolved) << "\n";
    }
    CsvFileSink sink((fs::path(resolved.output_dir) / "metrics.csv").string());
    return run_experiment(resolved, &sink);
}

} // namespace fedproc
