#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fedproc {

// Deterministic seed derivation. Every random stream in an experiment is keyed by
// mixing the experiment seed with a purpose tag and indices, so results do not
// depend on scheduling or call order.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d);

// Stream tags for mix_seed. Values are arbitrary but frozen: changing them changes
// every seeded trajectory.
namespace stream {
inline constexpr std::uint64_t init = 0x696e6974;      // parameter initialization
inline constexpr std::uint64_t data = 0x64617461;      // synthetic data generation
inline constexpr std::uint64_t split = 0x73706c74;     // train/test split
inline constexpr std::uint64_t partition = 0x70617274; // dirichlet partition
inline constexpr std::uint64_t sample = 0x73616d70;    // per-round client sampling
inline constexpr std::uint64_t client = 0x636c6e74;    // per-(round, client) training
} // namespace stream

// Seeded random source with hand-rolled distribution transforms. The engine
// (mt19937_64) is bit-exact by the standard; the transforms avoid the
// implementation-defined std::*_distribution classes so identical seeds give
// identical streams on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1); never returns an endpoint, safe under log().
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; consumes exactly two draws.
    double normal();

    // Gamma(shape, 1) via Marsaglia-Tsang, boosted for shape < 1.
    double gamma(double shape);

    // Symmetric Dirichlet(concentration) over n components.
    std::vector<double> dirichlet(double concentration, std::size_t n);

    // Uniform integer in [0, n); n must be positive.
    std::size_t index(std::size_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
};

} // namespace fedproc
