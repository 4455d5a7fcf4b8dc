#include "fedproc/data.hpp"

#include "fedproc/errors.hpp"
#include "fedproc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace fedproc {

void LabeledDataset::validate() const {
    if (features.empty() || features.size() != labels.size()) {
        throw config_error("dataset must be non-empty with one label per sample");
    }
    if (num_classes < 2) {
        throw config_error("dataset needs at least 2 classes");
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
            throw config_error("dataset label " + std::to_string(y) + " out of range [0," +
                               std::to_string(num_classes) + ")");
        }
    }
    for (const auto& f : features) {
        if (!f.same_shape(features.front())) {
            throw config_error("dataset features must share one shape");
        }
    }
}

ClientDataset make_client_dataset(int client_id, LabeledDataset data) {
    ClientDataset ds;
    ds.client_id = client_id;
    ds.per_class_index.assign(data.num_classes, {});
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        ds.per_class_index[static_cast<std::size_t>(data.labels[i])].push_back(i);
    }
    ds.data = std::move(data);
    return ds;
}

namespace {

// Largest-remainder rounding of proportions * total; conserves the total exactly.
std::vector<std::size_t> apportion(const std::vector<double>& proportions, std::size_t total) {
    const std::size_t n = proportions.size();
    std::vector<std::size_t> counts(n);
    std::vector<std::pair<double, std::size_t>> remainders(n);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double target = proportions[i] * static_cast<double>(total);
        counts[i] = static_cast<std::size_t>(std::floor(target));
        remainders[i] = {target - std::floor(target), i};
        assigned += counts[i];
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t j = 0; assigned < total; ++j, ++assigned) {
        counts[remainders[j % n].second] += 1;
    }
    return counts;
}

} // namespace

std::vector<ClientDataset> dirichlet_partition(const LabeledDataset& data,
                                               const PartitionConfig& cfg) {
    data.validate();
    if (cfg.num_clients == 0) {
        throw config_error("partition needs at least one client");
    }
    if (!(cfg.beta > 0.0)) {
        throw config_error("dirichlet concentration must be positive");
    }
    const std::size_t m = cfg.num_clients;
    const std::size_t k_count = data.num_classes;

    std::vector<std::vector<std::size_t>> by_class(k_count);
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
    }

    constexpr int kMaxAttempts = 100;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        Rng rng(mix_seed(cfg.seed, stream::partition, static_cast<std::uint64_t>(attempt)));
        std::vector<std::vector<std::size_t>> assignment(m);
        for (std::size_t k = 0; k < k_count; ++k) {
            std::vector<std::size_t> idx = by_class[k];
            rng.shuffle(idx);
            const auto proportions = rng.dirichlet(cfg.beta, m);
            const auto counts = apportion(proportions, idx.size());
            std::size_t cursor = 0;
            for (std::size_t i = 0; i < m; ++i) {
                assignment[i].insert(assignment[i].end(), idx.begin() + cursor,
                                     idx.begin() + cursor + counts[i]);
                cursor += counts[i];
            }
        }
        const bool any_empty =
            std::any_of(assignment.begin(), assignment.end(), [](const auto& a) { return a.empty(); });
        if (any_empty) continue;

        std::vector<ClientDataset> clients;
        clients.reserve(m);
        for (std::size_t i = 0; i < m; ++i) {
            LabeledDataset shard;
            shard.num_classes = k_count;
            shard.features.reserve(assignment[i].size());
            shard.labels.reserve(assignment[i].size());
            for (std::size_t s : assignment[i]) {
                shard.features.push_back(data.features[s]);
                shard.labels.push_back(data.labels[s]);
            }
            clients.push_back(make_client_dataset(static_cast<int>(i), std::move(shard)));
        }
        return clients;
    }
    throw config_error("dirichlet partition left a client empty after " +
                       std::to_string(kMaxAttempts) + " redraws; fewer clients or more data needed");
}

LabeledDataset generate_blobs(std::size_t num_classes, std::size_t dim, std::size_t per_class,
                              double spread, std::uint64_t seed) {
    if (num_classes < 2 || per_class < 1) {
        throw config_error("blobs need at least 2 classes and 1 sample per class");
    }
    if (dim < num_classes) {
        throw config_error("blobs need dim >= classes to place unit-separated means");
    }
    if (spread < 0.0) {
        throw config_error("blobs spread must be non-negative");
    }
    Rng rng(mix_seed(seed, stream::data));
    LabeledDataset out;
    out.num_classes = num_classes;
    out.features.reserve(num_classes * per_class);
    out.labels.reserve(num_classes * per_class);
    // Class k is centered on the k-th unit basis vector.
    for (std::size_t k = 0; k < num_classes; ++k) {
        for (std::size_t i = 0; i < per_class; ++i) {
            Tensor x({dim});
            for (std::size_t d = 0; d < dim; ++d) {
                x[d] = spread * rng.normal();
            }
            x[k] += 1.0;
            out.features.push_back(std::move(x));
            out.labels.push_back(static_cast<int>(k));
        }
    }
    return out;
}

namespace {

std::uint32_t read_be_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    const auto offset = static_cast<long long>(is.tellg());
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
        throw ingestion_error("truncated IDX file " + path + " at offset " +
                              std::to_string(offset));
    }
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

} // namespace

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) {
        throw ingestion_error("cannot open IDX images: " + images_path);
    }
    const std::uint32_t img_magic = read_be_u32(imgs, images_path);
    if (img_magic != 0x00000803u) {
        throw ingestion_error("bad IDX image magic in " + images_path + " at offset 0");
    }
    const std::uint32_t count = read_be_u32(imgs, images_path);
    const std::uint32_t rows = read_be_u32(imgs, images_path);
    const std::uint32_t cols = read_be_u32(imgs, images_path);

    std::ifstream lbls(labels_path, std::ios::binary);
    if (!lbls) {
        throw ingestion_error("cannot open IDX labels: " + labels_path);
    }
    const std::uint32_t lbl_magic = read_be_u32(lbls, labels_path);
    if (lbl_magic != 0x00000801u) {
        throw ingestion_error("bad IDX label magic in " + labels_path + " at offset 0");
    }
    const std::uint32_t lbl_count = read_be_u32(lbls, labels_path);
    if (lbl_count != count) {
        throw ingestion_error("IDX count mismatch: " + std::to_string(count) + " images vs " +
                              std::to_string(lbl_count) + " labels");
    }
    if (count == 0 || rows == 0 || cols == 0) {
        throw ingestion_error("IDX file " + images_path + " declares an empty dataset");
    }

    LabeledDataset out;
    out.features.reserve(count);
    out.labels.reserve(count);
    std::vector<unsigned char> pixel_buf(static_cast<std::size_t>(rows) * cols);
    int max_label = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        if (!imgs.read(reinterpret_cast<char*>(pixel_buf.data()),
                       static_cast<std::streamsize>(pixel_buf.size()))) {
            throw ingestion_error("truncated IDX file " + images_path + " at offset " +
                                  std::to_string(16 + static_cast<std::size_t>(i) *
                                                          pixel_buf.size()));
        }
        Tensor x({rows, cols, 1});
        for (std::size_t p = 0; p < pixel_buf.size(); ++p) {
            x[p] = static_cast<double>(pixel_buf[p]) / 255.0;
        }
        const int label = lbls.get();
        if (label == std::char_traits<char>::eof()) {
            throw ingestion_error("truncated IDX file " + labels_path + " at offset " +
                                  std::to_string(8 + i));
        }
        max_label = std::max(max_label, label);
        out.features.push_back(std::move(x));
        out.labels.push_back(label);
    }
    out.num_classes = static_cast<std::size_t>(max_label) + 1;
    if (out.num_classes < 2) {
        out.num_classes = 2;
    }
    return out;
}

TrainTestSplit split_train_test(const LabeledDataset& data, double test_fraction,
                                std::uint64_t seed) {
    data.validate();
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
        throw config_error("test fraction must lie in [0,1)");
    }
    std::vector<std::vector<std::size_t>> by_class(data.num_classes);
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
    }
    Rng rng(mix_seed(seed, stream::split));
    TrainTestSplit split;
    split.train.num_classes = data.num_classes;
    split.test.num_classes = data.num_classes;
    for (auto& idx : by_class) {
        rng.shuffle(idx);
        const auto n_test = static_cast<std::size_t>(
            std::llround(test_fraction * static_cast<double>(idx.size())));
        for (std::size_t j = 0; j < idx.size(); ++j) {
            auto& dst = j < n_test ? split.test : split.train;
            dst.features.push_back(data.features[idx[j]]);
            dst.labels.push_back(data.labels[idx[j]]);
        }
    }
    return split;
}

std::vector<std::vector<std::size_t>> batches(const ClientDataset& ds, std::size_t batch_size,
                                              std::uint64_t epoch_seed) {
    if (batch_size == 0) {
        throw config_error("batch size must be positive");
    }
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(epoch_seed);
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> out;
    out.reserve((order.size() + batch_size - 1) / batch_size);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

} // namespace fedproc
