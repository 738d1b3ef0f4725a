#include "degbench/ops.hpp"

#include <cmath>
#include <cstdint>

#include "degbench/error.hpp"
#include "degbench/op_common.hpp"

namespace degbench {

namespace detail {

Tensor make_op(Shape shape, std::vector<float> value,
               std::vector<std::shared_ptr<Tensor::Node>> parents,
               std::function<void(Tensor::Node&)> backprop) {
    auto node = std::make_shared<Tensor::Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    for (const auto& p : parents)
        if (p->requires_grad) node->requires_grad = true;
    if (node->requires_grad) {
        node->parents = std::move(parents);
        node->backprop = std::move(backprop);
    }
    return Tensor::wrap(std::move(node));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw UsageError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

AxisView axis_view(const Shape& shape, int axis) {
    if (axis < 0) axis += static_cast<int>(shape.size());
    if (axis < 0 || axis >= static_cast<int>(shape.size()))
        throw UsageError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
    AxisView v;
    v.axis = axis;
    v.extent = shape[static_cast<size_t>(axis)];
    v.outer = 1;
    v.inner = 1;
    for (int i = 0; i < axis; ++i) v.outer *= shape[static_cast<size_t>(i)];
    for (size_t i = static_cast<size_t>(axis) + 1; i < shape.size(); ++i)
        v.inner *= static_cast<int64_t>(shape[i]);
    return v;
}

}  // namespace detail

using detail::axis_view;
using detail::check_same_shape;
using detail::make_op;

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    const auto& av = a.data();
    const auto& bv = b.data();
    std::vector<float> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    auto an = a.node(), bn = b.node();
    return make_op(a.shape(), std::move(out), {an, bn}, [an, bn](Tensor::Node& n) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] += n.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    const auto& av = a.data();
    const auto& bv = b.data();
    std::vector<float> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    auto an = a.node(), bn = b.node();
    return make_op(a.shape(), std::move(out), {an, bn}, [an, bn](Tensor::Node& n) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] -= n.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    const auto& av = a.data();
    const auto& bv = b.data();
    std::vector<float> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    auto an = a.node(), bn = b.node();
    return make_op(a.shape(), std::move(out), {an, bn}, [an, bn](Tensor::Node& n) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i] * bn->value[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] += n.grad[i] * an->value[i];
        }
    });
}

Tensor scale(const Tensor& x, double s) {
    const auto& xv = x.data();
    std::vector<float> out(xv.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(xv[i] * s);
    auto xn = x.node();
    return make_op(x.shape(), std::move(out), {xn}, [xn, s](Tensor::Node& n) {
        xn->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
            xn->grad[i] += static_cast<float>(n.grad[i] * s);
    });
}

Tensor add_scalar(const Tensor& x, double c) {
    const auto& xv = x.data();
    std::vector<float> out(xv.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(xv[i] + c);
    auto xn = x.node();
    return make_op(x.shape(), std::move(out), {xn}, [xn](Tensor::Node& n) {
        xn->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) xn->grad[i] += n.grad[i];
    });
}

Tensor relu(const Tensor& x) {
    const auto& xv = x.data();
    std::vector<float> out(xv.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0f ? xv[i] : 0.0f;
    auto xn = x.node();
    return make_op(x.shape(), std::move(out), {xn}, [xn](Tensor::Node& n) {
        xn->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
            if (xn->value[i] > 0.0f) xn->grad[i] += n.grad[i];
    });
}

Tensor sigmoid(const Tensor& x) {
    const auto& xv = x.data();
    std::vector<float> out(xv.size());
    for (size_t i = 0; i < out.size(); ++i) {
        const double v = xv[i];
        out[i] = static_cast<float>(v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                             : std::exp(v) / (1.0 + std::exp(v)));
    }
    auto xn = x.node();
    auto yv = std::make_shared<std::vector<float>>(out);
    return make_op(x.shape(), std::move(out), {xn}, [xn, yv](Tensor::Node& n) {
        xn->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) {
            const float y = (*yv)[i];
            xn->grad[i] += n.grad[i] * y * (1.0f - y);
        }
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw UsageError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    const auto& av = a.data();
    const auto& bv = b.data();
    std::vector<float> out(static_cast<size_t>(m) * n);
    std::vector<double> acc(static_cast<size_t>(n));
    for (int i = 0; i < m; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int t = 0; t < k; ++t)
            detail::axpy_fd(acc.data(), av[static_cast<size_t>(i) * k + t],
                            bv.data() + static_cast<size_t>(t) * n, n);
        for (int j = 0; j < n; ++j)
            out[static_cast<size_t>(i) * n + j] = static_cast<float>(acc[static_cast<size_t>(j)]);
    }
    auto an = a.node(), bn = b.node();
    return make_op({m, n}, std::move(out), {an, bn}, [an, bn, m, k, n](Tensor::Node& node) {
        // row-contiguous accumulation into double scratch
        if (an->requires_grad) {
            an->ensure_grad();
            std::vector<double> da(an->value.size(), 0.0);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double g = node.grad[static_cast<size_t>(i) * n + j];
                    if (g == 0.0) continue;
                    double* dst = da.data() + static_cast<size_t>(i) * k;
                    for (int t = 0; t < k; ++t)
                        dst[t] += g * bn->value[static_cast<size_t>(t) * n + j];
                }
            for (size_t idx = 0; idx < da.size(); ++idx)
                an->grad[idx] += static_cast<float>(da[idx]);
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            std::vector<double> db(bn->value.size(), 0.0);
            for (int i = 0; i < m; ++i)
                for (int t = 0; t < k; ++t) {
                    const double av = an->value[static_cast<size_t>(i) * k + t];
                    if (av == 0.0) continue;
                    const float* grow = node.grad.data() + static_cast<size_t>(i) * n;
                    double* dst = db.data() + static_cast<size_t>(t) * n;
                    for (int j = 0; j < n; ++j) dst[j] += av * grow[j];
                }
            for (size_t idx = 0; idx < db.size(); ++idx)
                bn->grad[idx] += static_cast<float>(db[idx]);
        }
    });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
        throw UsageError("matmul_nt: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()) + "^T");
    const int m = a.dim(0), k = a.dim(1), n = b.dim(0);
    const auto& av = a.data();
    const auto& bv = b.data();
    std::vector<float> out(static_cast<size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
        const float* arow = av.data() + static_cast<size_t>(i) * k;
        for (int j = 0; j < n; ++j)
            out[static_cast<size_t>(i) * n + j] = static_cast<float>(
                detail::dot_fd(arow, bv.data() + static_cast<size_t>(j) * k, k));
    }
    auto an = a.node(), bn = b.node();
    return make_op({m, n}, std::move(out), {an, bn}, [an, bn, m, k, n](Tensor::Node& node) {
        // dA[i,:] += g[i,j] * B[j,:], dB[j,:] += g[i,j] * A[i,:], all rows
        // contiguous, accumulated in double
        const bool need_da = an->requires_grad;
        const bool need_db = bn->requires_grad;
        std::vector<double> da(need_da ? an->value.size() : 0, 0.0);
        std::vector<double> db(need_db ? bn->value.size() : 0, 0.0);
        for (int i = 0; i < m; ++i) {
            const float* arow = an->value.data() + static_cast<size_t>(i) * k;
            double* da_row = need_da ? da.data() + static_cast<size_t>(i) * k : nullptr;
            for (int j = 0; j < n; ++j) {
                const double g = node.grad[static_cast<size_t>(i) * n + j];
                if (g == 0.0) continue;
                const float* brow = bn->value.data() + static_cast<size_t>(j) * k;
                if (need_da)
                    for (int t = 0; t < k; ++t) da_row[t] += g * brow[t];
                if (need_db) {
                    double* db_row = db.data() + static_cast<size_t>(j) * k;
                    for (int t = 0; t < k; ++t) db_row[t] += g * arow[t];
                }
            }
        }
        if (need_da) {
            an->ensure_grad();
            for (size_t idx = 0; idx < da.size(); ++idx)
                an->grad[idx] += static_cast<float>(da[idx]);
        }
        if (need_db) {
            bn->ensure_grad();
            for (size_t idx = 0; idx < db.size(); ++idx)
                bn->grad[idx] += static_cast<float>(db[idx]);
        }
    });
}

Tensor add_rowvec(const Tensor& x, const Tensor& bias) {
    if (x.rank() != 2 || bias.rank() != 1 || x.dim(1) != bias.dim(0))
        throw UsageError("add_rowvec: shapes " + shape_str(x.shape()) + " + " +
                         shape_str(bias.shape()));
    const int m = x.dim(0), n = x.dim(1);
    const auto& xv = x.data();
    const auto& bv = bias.data();
    std::vector<float> out(xv.size());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<size_t>(i) * n + j] = xv[static_cast<size_t>(i) * n + j] + bv[j];
    auto xn = x.node(), bn = bias.node();
    return make_op(x.shape(), std::move(out), {xn, bn}, [xn, bn, m, n](Tensor::Node& node) {
        if (xn->requires_grad) {
            xn->ensure_grad();
            for (size_t i = 0; i < node.grad.size(); ++i) xn->grad[i] += node.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int i = 0; i < m; ++i) acc += node.grad[static_cast<size_t>(i) * n + j];
                bn->grad[j] += static_cast<float>(acc);
            }
        }
    });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
    if (x.rank() != 4 || bias.rank() != 1 || x.dim(1) != bias.dim(0))
        throw UsageError("add_channel_bias: shapes " + shape_str(x.shape()) + " + " +
                         shape_str(bias.shape()));
    const int n = x.dim(0), c = x.dim(1);
    const int64_t hw = static_cast<int64_t>(x.dim(2)) * x.dim(3);
    const auto& xv = x.data();
    const auto& bv = bias.data();
    std::vector<float> out(xv.size());
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const int64_t base = (static_cast<int64_t>(i) * c + ch) * hw;
            const float b = bv[ch];
            for (int64_t p = 0; p < hw; ++p) out[base + p] = xv[base + p] + b;
        }
    auto xn = x.node(), bn = bias.node();
    return make_op(x.shape(), std::move(out), {xn, bn}, [xn, bn, n, c, hw](Tensor::Node& node) {
        if (xn->requires_grad) {
            xn->ensure_grad();
            for (size_t i = 0; i < node.grad.size(); ++i) xn->grad[i] += node.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int i = 0; i < n; ++i) {
                    const int64_t base = (static_cast<int64_t>(i) * c + ch) * hw;
                    for (int64_t p = 0; p < hw; ++p) acc += node.grad[base + p];
                }
                bn->grad[ch] += static_cast<float>(acc);
            }
        }
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.size())
        throw UsageError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
    auto xn = x.node();
    return make_op(std::move(shape), x.data(), {xn}, [xn](Tensor::Node& n) {
        xn->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) xn->grad[i] += n.grad[i];
    });
}

Tensor reduce_sum(const Tensor& x) {
    double acc = 0.0;
    for (float v : x.data()) acc += v;
    auto xn = x.node();
    return make_op({1}, {static_cast<float>(acc)}, {xn}, [xn](Tensor::Node& n) {
        xn->ensure_grad();
        const float g = n.grad[0];
        for (auto& gv : xn->grad) gv += g;
    });
}

Tensor reduce_mean(const Tensor& x) {
    const double inv = 1.0 / static_cast<double>(x.size());
    double acc = 0.0;
    for (float v : x.data()) acc += v;
    auto xn = x.node();
    return make_op({1}, {static_cast<float>(acc * inv)}, {xn}, [xn, inv](Tensor::Node& n) {
        xn->ensure_grad();
        const float g = static_cast<float>(n.grad[0] * inv);
        for (auto& gv : xn->grad) gv += g;
    });
}

Tensor l2_norm(const Tensor& x, int axis) {
    const auto view = axis_view(x.shape(), axis);
    Shape out_shape;
    for (size_t i = 0; i < x.shape().size(); ++i)
        if (static_cast<int>(i) != view.axis) out_shape.push_back(x.shape()[i]);
    if (out_shape.empty()) out_shape.push_back(1);

    const auto& xv = x.data();
    std::vector<float> out(static_cast<size_t>(view.outer * view.inner));
    for (int64_t o = 0; o < view.outer; ++o)
        for (int64_t in = 0; in < view.inner; ++in) {
            double acc = 0.0;
            for (int64_t e = 0; e < view.extent; ++e) {
                const double v = xv[(o * view.extent + e) * view.inner + in];
                acc += v * v;
            }
            out[o * view.inner + in] = static_cast<float>(std::sqrt(acc));
        }
    auto xn = x.node();
    auto norms = std::make_shared<std::vector<float>>(out);
    return make_op(std::move(out_shape), std::move(out), {xn}, [xn, view, norms](Tensor::Node& n) {
        xn->ensure_grad();
        for (int64_t o = 0; o < view.outer; ++o)
            for (int64_t in = 0; in < view.inner; ++in) {
                const float norm = (*norms)[o * view.inner + in];
                if (norm <= 0.0f) continue;  // subgradient 0 at the origin
                const float g = n.grad[o * view.inner + in] / norm;
                for (int64_t e = 0; e < view.extent; ++e) {
                    const int64_t idx = (o * view.extent + e) * view.inner + in;
                    xn->grad[idx] += g * xn->value[idx];
                }
            }
    });
}

Tensor softmax(const Tensor& x, int axis) {
    const auto view = axis_view(x.shape(), axis);
    const auto& xv = x.data();
    std::vector<float> out(xv.size());
    for (int64_t o = 0; o < view.outer; ++o)
        for (int64_t in = 0; in < view.inner; ++in) {
            double mx = -1e300;
            for (int64_t e = 0; e < view.extent; ++e)
                mx = std::max(mx, static_cast<double>(xv[(o * view.extent + e) * view.inner + in]));
            double sum = 0.0;
            for (int64_t e = 0; e < view.extent; ++e)
                sum += std::exp(static_cast<double>(xv[(o * view.extent + e) * view.inner + in]) - mx);
            for (int64_t e = 0; e < view.extent; ++e) {
                const int64_t idx = (o * view.extent + e) * view.inner + in;
                out[idx] = static_cast<float>(std::exp(static_cast<double>(xv[idx]) - mx) / sum);
            }
        }
    auto xn = x.node();
    auto yv = std::make_shared<std::vector<float>>(out);
    return make_op(x.shape(), std::move(out), {xn}, [xn, view, yv](Tensor::Node& n) {
        xn->ensure_grad();
        for (int64_t o = 0; o < view.outer; ++o)
            for (int64_t in = 0; in < view.inner; ++in) {
                double dot = 0.0;
                for (int64_t e = 0; e < view.extent; ++e) {
                    const int64_t idx = (o * view.extent + e) * view.inner + in;
                    dot += static_cast<double>(n.grad[idx]) * (*yv)[idx];
                }
                for (int64_t e = 0; e < view.extent; ++e) {
                    const int64_t idx = (o * view.extent + e) * view.inner + in;
                    xn->grad[idx] += static_cast<float>((n.grad[idx] - dot) * (*yv)[idx]);
                }
            }
    });
}

std::pair<Tensor, std::vector<float>> dropout(const Tensor& x, double rate, Prng& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw UsageError("dropout: rate must be in [0,1), got " + std::to_string(rate));
    const auto& xv = x.data();
    std::vector<float> mask(xv.size());
    for (auto& m : mask) m = rng.next_double() >= rate ? 1.0f : 0.0f;
    const float keep_scale = static_cast<float>(1.0 / (1.0 - rate));
    std::vector<float> out(xv.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i] * keep_scale;
    auto xn = x.node();
    auto mk = std::make_shared<std::vector<float>>(mask);
    Tensor y = make_op(x.shape(), std::move(out), {xn}, [xn, mk, keep_scale](Tensor::Node& n) {
        xn->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
            xn->grad[i] += n.grad[i] * (*mk)[i] * keep_scale;
    });
    return {y, std::move(mask)};
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2)
        throw UsageError("softmax_cross_entropy: logits must be [N,C], got " +
                         shape_str(logits.shape()));
    const int n = logits.dim(0), c = logits.dim(1);
    if (static_cast<int>(labels.size()) != n)
        throw UsageError("softmax_cross_entropy: label count mismatch");
    for (int y : labels)
        if (y < 0 || y >= c) throw UsageError("softmax_cross_entropy: label out of range");

    const auto& zv = logits.data();
    auto probs = std::make_shared<std::vector<float>>(zv.size());
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        double mx = -1e300;
        for (int j = 0; j < c; ++j) mx = std::max(mx, static_cast<double>(zv[i * c + j]));
        double sum = 0.0;
        for (int j = 0; j < c; ++j) sum += std::exp(static_cast<double>(zv[i * c + j]) - mx);
        for (int j = 0; j < c; ++j)
            (*probs)[static_cast<size_t>(i) * c + j] =
                static_cast<float>(std::exp(static_cast<double>(zv[i * c + j]) - mx) / sum);
        loss += mx + std::log(sum) - zv[i * c + labels[static_cast<size_t>(i)]];
    }
    loss /= n;
    auto zn = logits.node();
    auto lbl = std::make_shared<std::vector<int>>(labels);
    return make_op({1}, {static_cast<float>(loss)}, {zn}, [zn, probs, lbl, n, c](Tensor::Node& node) {
        zn->ensure_grad();
        const float g = node.grad[0] / static_cast<float>(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j) {
                const float onehot = (*lbl)[static_cast<size_t>(i)] == j ? 1.0f : 0.0f;
                zn->grad[static_cast<size_t>(i) * c + j] +=
                    g * ((*probs)[static_cast<size_t>(i) * c + j] - onehot);
            }
    });
}

Tensor sum_squared_error(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sum_squared_error");
    const auto& av = a.data();
    const auto& bv = b.data();
    double acc = 0.0;
    for (size_t i = 0; i < av.size(); ++i) {
        const double d = static_cast<double>(av[i]) - bv[i];
        acc += d * d;
    }
    auto an = a.node(), bn = b.node();
    return make_op({1}, {static_cast<float>(acc)}, {an, bn}, [an, bn](Tensor::Node& n) {
        const float g = n.grad[0];
        if (an->requires_grad) an->ensure_grad();
        if (bn->requires_grad) bn->ensure_grad();
        for (size_t i = 0; i < an->value.size(); ++i) {
            const float d = 2.0f * (an->value[i] - bn->value[i]) * g;
            if (an->requires_grad) an->grad[i] += d;
            if (bn->requires_grad) bn->grad[i] -= d;
        }
    });
}

}  // namespace degbench
