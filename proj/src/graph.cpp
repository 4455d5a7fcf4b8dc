#include "fedproc/graph.hpp"

#include "fedproc/errors.hpp"
#include "fedproc/ops.hpp"

#include <cmath>
#include <utility>

namespace fedproc {

Graph::Value Graph::push(Tensor value, bool requires_grad,
                         std::function<void(Graph&, const Tensor&)> backprop) {
    nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, std::move(backprop)});
    return nodes_.size() - 1;
}

void Graph::accumulate(Value v, const Tensor& g) {
    Node& n = nodes_[v];
    if (!n.requires_grad) return;
    if (n.grad.data.empty()) {
        n.grad = g;
        return;
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        n.grad.data[i] += g.data[i];
    }
}

Graph::Value Graph::leaf(Tensor value, bool requires_grad) {
    return push(std::move(value), requires_grad, nullptr);
}

Graph::Value Graph::linear(Value x, Value w, Value b) {
    Tensor y = linear_forward(value(x), value(w), value(b));
    const bool rg = needs_grad(x) || needs_grad(w) || needs_grad(b);
    return push(std::move(y), rg, [x, w, b](Graph& g, const Tensor& dy) {
        Tensor dx, dw, db;
        linear_backward(g.value(x), g.value(w), dy, dx, dw, db);
        g.accumulate(x, dx);
        g.accumulate(w, dw);
        g.accumulate(b, db);
    });
}

Graph::Value Graph::relu(Value x) {
    Tensor y = relu_forward(value(x));
    return push(std::move(y), needs_grad(x), [x](Graph& g, const Tensor& dy) {
        g.accumulate(x, relu_backward(g.value(x), dy));
    });
}

Graph::Value Graph::conv2d(Value x, Value w, Value b) {
    Tensor y = conv2d_forward(value(x), value(w), value(b));
    const bool rg = needs_grad(x) || needs_grad(w) || needs_grad(b);
    return push(std::move(y), rg, [x, w, b](Graph& g, const Tensor& dy) {
        Tensor dx, dw, db;
        conv2d_backward(g.value(x), g.value(w), dy, dx, dw, db);
        g.accumulate(x, dx);
        g.accumulate(w, dw);
        g.accumulate(b, db);
    });
}

Graph::Value Graph::maxpool2(Value x) {
    std::vector<std::size_t> argmax;
    Tensor y = maxpool2_forward(value(x), argmax);
    return push(std::move(y), needs_grad(x),
                [x, argmax = std::move(argmax)](Graph& g, const Tensor& dy) {
                    g.accumulate(x, maxpool2_backward(g.value(x), argmax, dy));
                });
}

Graph::Value Graph::flatten(Value x) {
    Tensor y = flatten_forward(value(x));
    return push(std::move(y), needs_grad(x), [x](Graph& g, const Tensor& dy) {
        g.accumulate(x, Tensor(g.value(x).shape, dy.data));
    });
}

Graph::Value Graph::add(Value a, Value b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) {
        throw usage_error("add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Tensor y = ta;
    for (std::size_t i = 0; i < y.size(); ++i) {
        y.data[i] += tb.data[i];
    }
    return push(std::move(y), needs_grad(a) || needs_grad(b),
                [a, b](Graph& g, const Tensor& dy) {
                    g.accumulate(a, dy);
                    g.accumulate(b, dy);
                });
}

Graph::Value Graph::scale(Value x, double c) {
    Tensor y = value(x);
    for (auto& v : y.data) {
        v *= c;
    }
    return push(std::move(y), needs_grad(x), [x, c](Graph& g, const Tensor& dy) {
        Tensor dx = dy;
        for (auto& v : dx.data) {
            v *= c;
        }
        g.accumulate(x, dx);
    });
}

Graph::Value Graph::sum(Value x) {
    double total = 0.0;
    for (double v : value(x).data) {
        total += v;
    }
    return push(Tensor::scalar(total), needs_grad(x), [x](Graph& g, const Tensor& dy) {
        Tensor dx(g.value(x).shape);
        dx.fill(dy.data[0]);
        g.accumulate(x, dx);
    });
}

Graph::Value Graph::cross_entropy_mean(Value logits, const std::vector<int>& labels) {
    const Tensor& s = value(logits);
    if (s.rank() != 2) {
        throw usage_error("cross_entropy: expected logits (B,K), got " + s.shape_str());
    }
    const std::size_t batch = s.dim(0), k = s.dim(1);
    if (k < 2) {
        throw usage_error("cross_entropy: needs at least 2 classes, got " + std::to_string(k));
    }
    if (labels.size() != batch) {
        throw usage_error("cross_entropy: batch " + std::to_string(batch) + " but " +
                          std::to_string(labels.size()) + " labels");
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= k) {
            throw usage_error("cross_entropy: label " + std::to_string(y) + " out of range [0," +
                              std::to_string(k) + ")");
        }
    }
    Tensor lsm = log_softmax_rows(s);
    double total = 0.0;
    Tensor probs({batch, k});
    for (std::size_t r = 0; r < batch; ++r) {
        total -= lsm.at(r, static_cast<std::size_t>(labels[r]));
        for (std::size_t c = 0; c < k; ++c) {
            probs.at(r, c) = std::exp(lsm.at(r, c));
        }
    }
    const double inv_b = 1.0 / static_cast<double>(batch);
    return push(Tensor::scalar(total * inv_b), needs_grad(logits),
                [logits, labels, probs = std::move(probs), inv_b](Graph& g, const Tensor& dy) {
                    const double up = dy.data[0] * inv_b;
                    Tensor ds = probs;
                    const std::size_t k = ds.dim(1);
                    for (std::size_t r = 0; r < ds.dim(0); ++r) {
                        ds.at(r, static_cast<std::size_t>(labels[r])) -= 1.0;
                        for (std::size_t c = 0; c < k; ++c) {
                            ds.at(r, c) *= up;
                        }
                    }
                    g.accumulate(logits, ds);
                });
}

Graph::Value Graph::gpc_mean(Value z, const std::vector<int>& labels, const Tensor& prototypes) {
    const Tensor& zt = value(z);
    if (zt.rank() != 2 || prototypes.rank() != 2 || zt.dim(1) != prototypes.dim(1)) {
        throw usage_error("gpc: expected z (B,Q) and prototypes (K,Q), got " + zt.shape_str() +
                          " and " + prototypes.shape_str());
    }
    const std::size_t batch = zt.dim(0), q = zt.dim(1), k = prototypes.dim(0);
    if (labels.size() != batch) {
        throw usage_error("gpc: batch " + std::to_string(batch) + " but " +
                          std::to_string(labels.size()) + " labels");
    }
    std::vector<double> proto_norm(k);
    for (std::size_t c = 0; c < k; ++c) {
        double n2 = 0.0;
        for (std::size_t d = 0; d < q; ++d) {
            n2 += prototypes.at(c, d) * prototypes.at(c, d);
        }
        if (n2 == 0.0) {
            throw degenerate_input_error("gpc: zero-norm prototype for class " + std::to_string(c));
        }
        proto_norm[c] = std::sqrt(n2);
    }
    std::vector<double> z_norm(batch);
    Tensor sims({batch, k});
    for (std::size_t r = 0; r < batch; ++r) {
        const int y = labels[r];
        if (y < 0 || static_cast<std::size_t>(y) >= k) {
            throw usage_error("gpc: label " + std::to_string(y) + " out of range [0," +
                              std::to_string(k) + ")");
        }
        const double* zr = &zt.data[r * q];
        double n2 = 0.0;
        for (std::size_t d = 0; d < q; ++d) {
            n2 += zr[d] * zr[d];
        }
        if (n2 == 0.0) {
            throw degenerate_input_error("gpc: zero-norm representation in batch row " +
                                         std::to_string(r));
        }
        z_norm[r] = std::sqrt(n2);
        for (std::size_t c = 0; c < k; ++c) {
            double dot = 0.0;
            for (std::size_t d = 0; d < q; ++d) {
                dot += zr[d] * prototypes.at(c, d);
            }
            sims.at(r, c) = dot / (z_norm[r] * proto_norm[c]);
        }
    }
    Tensor lsm = log_softmax_rows(sims);
    double total = 0.0;
    Tensor probs({batch, k});
    for (std::size_t r = 0; r < batch; ++r) {
        total -= lsm.at(r, static_cast<std::size_t>(labels[r]));
        for (std::size_t c = 0; c < k; ++c) {
            probs.at(r, c) = std::exp(lsm.at(r, c));
        }
    }
    const double inv_b = 1.0 / static_cast<double>(batch);
    return push(
        Tensor::scalar(total * inv_b), needs_grad(z),
        [z, labels, prototypes, sims = std::move(sims), probs = std::move(probs),
         z_norm = std::move(z_norm), proto_norm = std::move(proto_norm),
         inv_b](Graph& g, const Tensor& dy) {
            const Tensor& zt = g.value(z);
            const std::size_t batch = zt.dim(0), q = zt.dim(1), k = probs.dim(1);
            const double up = dy.data[0] * inv_b;
            Tensor dz({batch, q});
            for (std::size_t r = 0; r < batch; ++r) {
                const double* zr = &zt.data[r * q];
                double* dzr = &dz.data[r * q];
                double radial = 0.0; // sum_k coeff_k * sim_k, scales the -z/|z|^2 term
                for (std::size_t c = 0; c < k; ++c) {
                    double coeff = probs.at(r, c);
                    if (static_cast<std::size_t>(labels[r]) == c) {
                        coeff -= 1.0;
                    }
                    coeff *= up;
                    if (coeff == 0.0) continue;
                    const double s = coeff / (z_norm[r] * proto_norm[c]);
                    for (std::size_t d = 0; d < q; ++d) {
                        dzr[d] += s * prototypes.at(c, d);
                    }
                    radial += coeff * sims.at(r, c);
                }
                const double zs = radial / (z_norm[r] * z_norm[r]);
                for (std::size_t d = 0; d < q; ++d) {
                    dzr[d] -= zs * zr[d];
                }
            }
            g.accumulate(z, dz);
        });
}

void Graph::backward(Value root) {
    const Tensor& rv = nodes_[root].value;
    if (rv.size() != 1) {
        throw usage_error("backward: loss root must be scalar, got " + rv.shape_str());
    }
    for (auto& n : nodes_) {
        n.grad = Tensor{};
    }
    nodes_[root].grad = Tensor::scalar(1.0);
    for (std::size_t i = root + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.backprop && !n.grad.data.empty()) {
            n.backprop(*this, n.grad);
        }
    }
    // Leaves that took part in the graph but received no flow (e.g. output-layer
    // weights when only the contrastive term is active) read back as exact zeros.
    for (auto& n : nodes_) {
        if (n.requires_grad && n.grad.data.empty()) {
            n.grad = Tensor(n.value.shape);
        }
    }
}

const Tensor& Graph::grad(Value v) const {
    const Node& n = nodes_[v];
    if (!n.requires_grad) {
        throw usage_error("grad() queried on a value that does not require gradients");
    }
    if (n.grad.data.empty()) {
        throw usage_error("grad() queried before backward()");
    }
    return n.grad;
}

} // namespace fedproc
