#include "fedproc/rng.hpp"

#include "fedproc/errors.hpp"

#include <cmath>

namespace fedproc {

namespace {

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return mix64(mix64(a) ^ (b + 0x9e3779b97f4a7c15ULL));
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix_seed(mix_seed(a, b), c);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
    return mix_seed(mix_seed(a, b, c), d);
}

double Rng::normal() {
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

double Rng::gamma(double shape) {
    if (!(shape > 0.0)) {
        throw usage_error("gamma shape must be positive");
    }
    if (shape < 1.0) {
        // Gamma(a) = Gamma(a+1) * U^{1/a}
        const double g = gamma(shape + 1.0);
        return g * std::pow(uniform_open(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x;
        double v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform_open();
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
            return d * v;
        }
    }
}

std::vector<double> Rng::dirichlet(double concentration, std::size_t n) {
    if (!(concentration > 0.0)) {
        throw usage_error("dirichlet concentration must be positive");
    }
    std::vector<double> out(n);
    double total = 0.0;
    for (auto& g : out) {
        g = gamma(concentration);
        total += g;
    }
    for (auto& g : out) {
        g /= total;
    }
    return out;
}

std::size_t Rng::index(std::size_t n) {
    if (n == 0) {
        throw usage_error("index() over an empty range");
    }
    return static_cast<std::size_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

} // namespace fedproc
