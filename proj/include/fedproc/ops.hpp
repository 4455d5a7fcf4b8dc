#pragma once

#include "fedproc/tensor.hpp"

#include <cstdint>
#include <vector>

namespace fedproc {

// Layer kernels. Forward functions are pure; backward functions take the cached
// forward inputs plus the upstream gradient and accumulate nothing — they return
// fresh gradient tensors. Batch dimension is always leading.

// x: (B, in), w: (in, out), b: (out) -> (B, out)
Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b);
void linear_backward(const Tensor& x, const Tensor& w, const Tensor& dy,
                     Tensor& dx, Tensor& dw, Tensor& db);

Tensor relu_forward(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& dy);

// x: (B, H, W, Cin), w: (KH, KW, Cin, Cout), b: (Cout) -> (B, H-KH+1, W-KW+1, Cout).
// Valid padding, stride 1.
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b);
void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy,
                     Tensor& dx, Tensor& dw, Tensor& db);

// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
// argmax records the flat input offset that won each output cell.
Tensor maxpool2_forward(const Tensor& x, std::vector<std::size_t>& argmax);
Tensor maxpool2_backward(const Tensor& x, const std::vector<std::size_t>& argmax,
                         const Tensor& dy);

// (B, d1, ..., dn) -> (B, d1*...*dn). Data is shared layout, only the shape changes.
Tensor flatten_forward(const Tensor& x);

// Row-wise log-softmax with max subtraction; x: (B, K).
Tensor log_softmax_rows(const Tensor& x);

} // namespace fedproc
