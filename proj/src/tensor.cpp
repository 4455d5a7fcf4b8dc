#include "fedproc/tensor.hpp"

#include "fedproc/errors.hpp"

#include <algorithm>
#include <cmath>

namespace fedproc {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        n *= d;
    }
    return n;
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

Tensor::Tensor(std::vector<std::size_t> s)
    : shape(std::move(s)), data(shape_numel(shape), 0.0) {
    for (std::size_t d : shape) {
        if (d == 0) throw usage_error("tensor dimensions must be positive, got " + shape_str());
    }
}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != data.size()) {
        throw usage_error("tensor shape " + shape_str() + " does not match data length " +
                          std::to_string(data.size()));
    }
}

Tensor Tensor::vector1d(std::vector<double> d) {
    const std::size_t n = d.size();
    return Tensor({n}, std::move(d));
}

bool Tensor::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) {
    std::fill(data.begin(), data.end(), v);
}

std::string Tensor::shape_str() const {
    return shape_to_string(shape);
}

} // namespace fedproc
