#include "fedproc/params.hpp"

#include "fedproc/errors.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace fedproc {

namespace {

constexpr char kMagic[4] = {'F', 'P', 'C', 'K'};
constexpr std::uint8_t kVersion = 1;

void require_grads_match(const ModelParameters& params, const GradientSet& grads) {
    if (grads.grads.size() != params.entries.size()) {
        throw usage_error("gradient set has " + std::to_string(grads.grads.size()) +
                          " entries, parameters have " + std::to_string(params.entries.size()));
    }
    for (std::size_t i = 0; i < grads.grads.size(); ++i) {
        if (!grads.grads[i].same_shape(params.entries[i].tensor)) {
            throw usage_error("gradient shape mismatch at entry '" + params.entries[i].name + "'");
        }
    }
}

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
        throw ingestion_error("truncated checkpoint " + path + " at offset " +
                              std::to_string(static_cast<long long>(is.tellg())));
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<unsigned char>(bits >> (8 * i));
    }
    os.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& is, const std::string& path) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) {
        throw ingestion_error("truncated checkpoint " + path);
    }
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
        bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    }
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

} // namespace

std::size_t ModelParameters::scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) {
        n += e.tensor.size();
    }
    return n;
}

bool ModelParameters::same_layout(const ModelParameters& other) const {
    if (entries.size() != other.entries.size() || partition_marker != other.partition_marker) {
        return false;
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].name != other.entries[i].name ||
            !entries[i].tensor.same_shape(other.entries[i].tensor)) {
            return false;
        }
    }
    return true;
}

ModelParameters sgd_step(const ModelParameters& params, const GradientSet& grads, double lr) {
    if (!(lr > 0.0)) {
        throw config_error("sgd: learning rate must be positive, got " + std::to_string(lr));
    }
    ModelParameters out = params;
    sgd_step_inplace(out, grads, lr);
    return out;
}

void sgd_step_inplace(ModelParameters& params, const GradientSet& grads, double lr) {
    if (!(lr > 0.0)) {
        throw config_error("sgd: learning rate must be positive, got " + std::to_string(lr));
    }
    require_grads_match(params, grads);
    for (std::size_t i = 0; i < params.entries.size(); ++i) {
        auto& w = params.entries[i].tensor.data;
        const auto& g = grads.grads[i].data;
        for (std::size_t j = 0; j < w.size(); ++j) {
            w[j] -= lr * g[j];
        }
    }
}

void save_checkpoint(const std::string& path, const ModelParameters& params) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw ingestion_error("cannot open checkpoint for writing: " + path);
    }
    os.write(kMagic, 4);
    os.put(static_cast<char>(kVersion));
    write_u32(os, static_cast<std::uint32_t>(params.partition_marker));
    write_u32(os, static_cast<std::uint32_t>(params.entries.size()));
    for (const auto& e : params.entries) {
        write_u32(os, static_cast<std::uint32_t>(e.name.size()));
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        os.put(static_cast<char>(e.tensor.rank()));
        for (std::size_t d : e.tensor.shape) {
            write_u32(os, static_cast<std::uint32_t>(d));
        }
        for (double v : e.tensor.data) {
            write_f64(os, v);
        }
    }
    if (!os) {
        throw ingestion_error("write failed for checkpoint: " + path);
    }
}

ModelParameters load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw ingestion_error("cannot open checkpoint: " + path);
    }
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw ingestion_error("bad checkpoint magic in " + path + " at offset 0");
    }
    const int version = is.get();
    if (version != kVersion) {
        throw ingestion_error("unsupported checkpoint version " + std::to_string(version) +
                              " in " + path);
    }
    ModelParameters params;
    params.partition_marker = read_u32(is, path);
    const std::uint32_t count = read_u32(is, path);
    params.entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = read_u32(is, path);
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) {
            throw ingestion_error("truncated checkpoint " + path);
        }
        const int rank = is.get();
        if (rank < 0) {
            throw ingestion_error("truncated checkpoint " + path);
        }
        std::vector<std::size_t> shape(static_cast<std::size_t>(rank));
        for (auto& d : shape) {
            d = read_u32(is, path);
        }
        Tensor t(shape);
        for (auto& v : t.data) {
            v = read_f64(is, path);
        }
        params.entries.push_back({std::move(name), std::move(t)});
    }
    if (params.partition_marker > params.entries.size()) {
        throw ingestion_error("checkpoint partition marker out of range in " + path);
    }
    return params;
}

} // namespace fedproc
