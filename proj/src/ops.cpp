#include "fedproc/ops.hpp"

#include "fedproc/errors.hpp"

#include <algorithm>
#include <cmath>

namespace fedproc {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw config_error(what);
}

} // namespace

Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    require(x.rank() == 2 && w.rank() == 2 && b.rank() == 1,
            "linear: expected input (B,in), weight (in,out), bias (out)");
    require(x.dim(1) == w.dim(0) && w.dim(1) == b.dim(0),
            "linear: shape mismatch, input " + x.shape_str() + " weight " + w.shape_str() +
                " bias " + b.shape_str());
    const std::size_t batch = x.dim(0), in = w.dim(0), out = w.dim(1);
    Tensor y({batch, out});
    for (std::size_t r = 0; r < batch; ++r) {
        const double* xr = &x.data[r * in];
        double* yr = &y.data[r * out];
        for (std::size_t c = 0; c < out; ++c) {
            yr[c] = b.data[c];
        }
        for (std::size_t k = 0; k < in; ++k) {
            const double xv = xr[k];
            if (xv == 0.0) continue;
            const double* wk = &w.data[k * out];
            for (std::size_t c = 0; c < out; ++c) {
                yr[c] += xv * wk[c];
            }
        }
    }
    return y;
}

void linear_backward(const Tensor& x, const Tensor& w, const Tensor& dy,
                     Tensor& dx, Tensor& dw, Tensor& db) {
    const std::size_t batch = x.dim(0), in = w.dim(0), out = w.dim(1);
    dx = Tensor({batch, in});
    dw = Tensor({in, out});
    db = Tensor({out});
    for (std::size_t r = 0; r < batch; ++r) {
        const double* xr = &x.data[r * in];
        const double* dyr = &dy.data[r * out];
        double* dxr = &dx.data[r * in];
        for (std::size_t c = 0; c < out; ++c) {
            db.data[c] += dyr[c];
        }
        for (std::size_t k = 0; k < in; ++k) {
            const double* wk = &w.data[k * out];
            double* dwk = &dw.data[k * out];
            double acc = 0.0;
            const double xv = xr[k];
            for (std::size_t c = 0; c < out; ++c) {
                acc += dyr[c] * wk[c];
                dwk[c] += xv * dyr[c];
            }
            dxr[k] = acc;
        }
    }
}

Tensor relu_forward(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.data) {
        v = v > 0.0 ? v : 0.0;
    }
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
    Tensor dx({x.shape});
    for (std::size_t i = 0; i < x.size(); ++i) {
        dx.data[i] = x.data[i] > 0.0 ? dy.data[i] : 0.0;
    }
    return dx;
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    require(x.rank() == 4 && w.rank() == 4 && b.rank() == 1,
            "conv2d: expected input (B,H,W,C), kernel (KH,KW,Cin,Cout), bias (Cout)");
    const std::size_t batch = x.dim(0), h = x.dim(1), wd = x.dim(2), cin = x.dim(3);
    const std::size_t kh = w.dim(0), kw = w.dim(1), cout = w.dim(3);
    require(w.dim(2) == cin, "conv2d: kernel channels " + w.shape_str() +
                                 " do not match input " + x.shape_str());
    require(b.dim(0) == cout, "conv2d: bias " + b.shape_str() + " does not match kernel " +
                                  w.shape_str());
    require(h >= kh && wd >= kw, "conv2d: input " + x.shape_str() + " smaller than kernel " +
                                     w.shape_str());
    const std::size_t oh = h - kh + 1, ow = wd - kw + 1;
    Tensor y({batch, oh, ow, cout});
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                double* yp = &y.data[((n * oh + i) * ow + j) * cout];
                for (std::size_t c = 0; c < cout; ++c) {
                    yp[c] = b.data[c];
                }
                for (std::size_t ki = 0; ki < kh; ++ki) {
                    for (std::size_t kj = 0; kj < kw; ++kj) {
                        const double* xp = &x.data[((n * h + i + ki) * wd + j + kj) * cin];
                        const double* wp = &w.data[(ki * kw + kj) * cin * cout];
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                            const double xv = xp[ci];
                            const double* wc = wp + ci * cout;
                            for (std::size_t c = 0; c < cout; ++c) {
                                yp[c] += xv * wc[c];
                            }
                        }
                    }
                }
            }
        }
    }
    return y;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy,
                     Tensor& dx, Tensor& dw, Tensor& db) {
    const std::size_t batch = x.dim(0), h = x.dim(1), wd = x.dim(2), cin = x.dim(3);
    const std::size_t kh = w.dim(0), kw = w.dim(1), cout = w.dim(3);
    const std::size_t oh = h - kh + 1, ow = wd - kw + 1;
    dx = Tensor({batch, h, wd, cin});
    dw = Tensor({kh, kw, cin, cout});
    db = Tensor({cout});
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                const double* dyp = &dy.data[((n * oh + i) * ow + j) * cout];
                for (std::size_t c = 0; c < cout; ++c) {
                    db.data[c] += dyp[c];
                }
                for (std::size_t ki = 0; ki < kh; ++ki) {
                    for (std::size_t kj = 0; kj < kw; ++kj) {
                        const std::size_t xoff = ((n * h + i + ki) * wd + j + kj) * cin;
                        const std::size_t woff = (ki * kw + kj) * cin * cout;
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                            const double xv = x.data[xoff + ci];
                            const double* wc = &w.data[woff + ci * cout];
                            double acc = 0.0;
                            double* dwc = &dw.data[woff + ci * cout];
                            for (std::size_t c = 0; c < cout; ++c) {
                                acc += dyp[c] * wc[c];
                                dwc[c] += xv * dyp[c];
                            }
                            dx.data[xoff + ci] += acc;
                        }
                    }
                }
            }
        }
    }
}

Tensor maxpool2_forward(const Tensor& x, std::vector<std::size_t>& argmax) {
    if (x.rank() != 4) {
        throw config_error("maxpool2: expected input (B,H,W,C), got " + x.shape_str());
    }
    const std::size_t batch = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    if (h < 2 || w < 2) {
        throw config_error("maxpool2: input " + x.shape_str() + " too small for a 2x2 window");
    }
    const std::size_t oh = h / 2, ow = w / 2;
    Tensor y({batch, oh, ow, c});
    argmax.assign(y.size(), 0);
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    std::size_t best = ((n * h + 2 * i) * w + 2 * j) * c + ch;
                    double bv = x.data[best];
                    for (std::size_t di = 0; di < 2; ++di) {
                        for (std::size_t dj = 0; dj < 2; ++dj) {
                            const std::size_t off =
                                ((n * h + 2 * i + di) * w + 2 * j + dj) * c + ch;
                            if (x.data[off] > bv) {
                                bv = x.data[off];
                                best = off;
                            }
                        }
                    }
                    const std::size_t yi = ((n * oh + i) * ow + j) * c + ch;
                    y.data[yi] = bv;
                    argmax[yi] = best;
                }
            }
        }
    }
    return y;
}

Tensor maxpool2_backward(const Tensor& x, const std::vector<std::size_t>& argmax,
                         const Tensor& dy) {
    Tensor dx({x.shape});
    for (std::size_t i = 0; i < dy.size(); ++i) {
        dx.data[argmax[i]] += dy.data[i];
    }
    return dx;
}

Tensor flatten_forward(const Tensor& x) {
    if (x.rank() < 2) {
        throw config_error("flatten: expected a batched tensor, got " + x.shape_str());
    }
    return Tensor({x.dim(0), x.size() / x.dim(0)}, x.data);
}

Tensor log_softmax_rows(const Tensor& x) {
    const std::size_t batch = x.dim(0), k = x.dim(1);
    Tensor y({batch, k});
    for (std::size_t r = 0; r < batch; ++r) {
        const double* xr = &x.data[r * k];
        double m = xr[0];
        for (std::size_t c = 1; c < k; ++c) {
            m = std::max(m, xr[c]);
        }
        double sum = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            sum += std::exp(xr[c] - m);
        }
        const double lse = m + std::log(sum);
        for (std::size_t c = 0; c < k; ++c) {
            y.data[r * k + c] = xr[c] - lse;
        }
    }
    return y;
}

} // namespace fedproc
