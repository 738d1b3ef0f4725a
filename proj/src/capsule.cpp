#include "degbench/capsule.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "degbench/error.hpp"
#include "degbench/op_common.hpp"
#include "degbench/ops.hpp"

namespace degbench {

using detail::make_op;

Tensor squash(const Tensor& x) {
    if (x.rank() < 1) throw UsageError("squash: empty tensor");
    const int d = x.dim(x.rank() - 1);
    const int64_t rows = x.size() / d;
    const auto& xv = x.data();
    std::vector<float> out(xv.size());
    auto norms = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        double nsq = 0.0;
        for (int e = 0; e < d; ++e) {
            const double v = xv[r * d + e];
            nsq += v * v;
        }
        const double norm = std::sqrt(nsq);
        (*norms)[r] = norm;
        const double factor = norm > 1e-12 ? norm / (1.0 + nsq) : 0.0;
        for (int e = 0; e < d; ++e)
            out[r * d + e] = static_cast<float>(xv[r * d + e] * factor);
    }
    auto xn = x.node();
    return make_op(x.shape(), std::move(out), {xn}, [xn, norms, d, rows](Tensor::Node& node) {
        xn->ensure_grad();
        for (int64_t r = 0; r < rows; ++r) {
            const double norm = (*norms)[r];
            if (norm <= 1e-12) continue;  // Jacobian vanishes at the origin
            const double nsq = norm * norm;
            const double factor = norm / (1.0 + nsq);
            // d factor/d norm, divided by norm for the x x^T term
            const double dfac = (1.0 - nsq) / ((1.0 + nsq) * (1.0 + nsq)) / norm;
            double xg = 0.0;
            for (int e = 0; e < d; ++e)
                xg += static_cast<double>(xn->value[r * d + e]) * node.grad[r * d + e];
            for (int e = 0; e < d; ++e)
                xn->grad[r * d + e] += static_cast<float>(
                    factor * node.grad[r * d + e] + dfac * xg * xn->value[r * d + e]);
        }
    });
}

Tensor caps_transform(const Tensor& u, const Tensor& w) {
    if (u.rank() != 3 || w.rank() != 4 || u.dim(1) != w.dim(0) || u.dim(2) != w.dim(3))
        throw UsageError("caps_transform: incompatible shapes " + shape_str(u.shape()) + " and " +
                         shape_str(w.shape()));
    const int n = u.dim(0), ni = u.dim(1), din = u.dim(2);
    const int nj = w.dim(1), dout = w.dim(2);
    const auto& uv = u.data();
    const auto& wv = w.data();
    std::vector<float> out(static_cast<size_t>(n) * ni * nj * dout);
    for (int b = 0; b < n; ++b)
        for (int i = 0; i < ni; ++i) {
            const float* uvec = uv.data() + (static_cast<int64_t>(b) * ni + i) * din;
            for (int j = 0; j < nj; ++j) {
                const float* wm = wv.data() + ((static_cast<int64_t>(i) * nj + j) * dout) * din;
                float* dst = out.data() + ((static_cast<int64_t>(b) * ni + i) * nj + j) * dout;
                for (int o = 0; o < dout; ++o) {
                    double acc = 0.0;
                    const float* wrow = wm + static_cast<int64_t>(o) * din;
                    for (int e = 0; e < din; ++e) acc += static_cast<double>(wrow[e]) * uvec[e];
                    dst[o] = static_cast<float>(acc);
                }
            }
        }
    auto un = u.node(), wn = w.node();
    return make_op({n, ni, nj, dout}, std::move(out), {un, wn},
                   [un, wn, n, ni, nj, din, dout](Tensor::Node& node) {
                       const bool need_du = un->requires_grad;
                       const bool need_dw = wn->requires_grad;
                       if (need_du) un->ensure_grad();
                       if (need_dw) wn->ensure_grad();
                       std::vector<double> du(need_du ? un->value.size() : 0, 0.0);
                       std::vector<double> dw(need_dw ? wn->value.size() : 0, 0.0);
                       for (int b = 0; b < n; ++b)
                           for (int i = 0; i < ni; ++i) {
                               const int64_t ub = (static_cast<int64_t>(b) * ni + i) * din;
                               for (int j = 0; j < nj; ++j) {
                                   const int64_t wb = (static_cast<int64_t>(i) * nj + j) *
                                                      static_cast<int64_t>(dout) * din;
                                   const int64_t gb =
                                       ((static_cast<int64_t>(b) * ni + i) * nj + j) * dout;
                                   for (int o = 0; o < dout; ++o) {
                                       const double g = node.grad[gb + o];
                                       if (g == 0.0) continue;
                                       const int64_t wr = wb + static_cast<int64_t>(o) * din;
                                       for (int e = 0; e < din; ++e) {
                                           if (need_du) du[ub + e] += g * wn->value[wr + e];
                                           if (need_dw) dw[wr + e] += g * un->value[ub + e];
                                       }
                                   }
                               }
                           }
                       if (need_du)
                           for (size_t i = 0; i < du.size(); ++i)
                               un->grad[i] += static_cast<float>(du[i]);
                       if (need_dw)
                           for (size_t i = 0; i < dw.size(); ++i)
                               wn->grad[i] += static_cast<float>(dw[i]);
                   });
}

Tensor route_weighted_sum(const Tensor& c, const Tensor& u_hat) {
    if (c.rank() != 3 || u_hat.rank() != 4 || c.dim(0) != u_hat.dim(0) ||
        c.dim(1) != u_hat.dim(1) || c.dim(2) != u_hat.dim(2))
        throw UsageError("route_weighted_sum: incompatible shapes " + shape_str(c.shape()) +
                         " and " + shape_str(u_hat.shape()));
    const int n = c.dim(0), ni = c.dim(1), nj = c.dim(2), d = u_hat.dim(3);
    const auto& cv = c.data();
    const auto& uv = u_hat.data();
    std::vector<float> out(static_cast<size_t>(n) * nj * d, 0.0f);
    std::vector<double> acc(static_cast<size_t>(nj) * d);
    for (int b = 0; b < n; ++b) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int i = 0; i < ni; ++i)
            for (int j = 0; j < nj; ++j) {
                const double w = cv[(static_cast<int64_t>(b) * ni + i) * nj + j];
                const float* uh = uv.data() + ((static_cast<int64_t>(b) * ni + i) * nj + j) * d;
                double* dst = acc.data() + static_cast<int64_t>(j) * d;
                for (int e = 0; e < d; ++e) dst[e] += w * uh[e];
            }
        for (int j = 0; j < nj; ++j)
            for (int e = 0; e < d; ++e)
                out[(static_cast<int64_t>(b) * nj + j) * d + e] =
                    static_cast<float>(acc[static_cast<int64_t>(j) * d + e]);
    }
    auto cn = c.node(), un = u_hat.node();
    return make_op({n, nj, d}, std::move(out), {cn, un},
                   [cn, un, n, ni, nj, d](Tensor::Node& node) {
                       const bool need_dc = cn->requires_grad;
                       const bool need_du = un->requires_grad;
                       if (need_dc) cn->ensure_grad();
                       if (need_du) un->ensure_grad();
                       for (int b = 0; b < n; ++b)
                           for (int i = 0; i < ni; ++i)
                               for (int j = 0; j < nj; ++j) {
                                   const int64_t cidx = (static_cast<int64_t>(b) * ni + i) * nj + j;
                                   const int64_t ub = cidx * d;
                                   const int64_t gb = (static_cast<int64_t>(b) * nj + j) * d;
                                   if (need_dc) {
                                       double acc = 0.0;
                                       for (int e = 0; e < d; ++e)
                                           acc += static_cast<double>(un->value[ub + e]) *
                                                  node.grad[gb + e];
                                       cn->grad[cidx] += static_cast<float>(acc);
                                   }
                                   if (need_du) {
                                       const float w = cn->value[cidx];
                                       for (int e = 0; e < d; ++e)
                                           un->grad[ub + e] += w * node.grad[gb + e];
                                   }
                               }
                   });
}

Tensor route_agreement(const Tensor& u_hat, const Tensor& v) {
    if (u_hat.rank() != 4 || v.rank() != 3 || u_hat.dim(0) != v.dim(0) ||
        u_hat.dim(2) != v.dim(1) || u_hat.dim(3) != v.dim(2))
        throw UsageError("route_agreement: incompatible shapes " + shape_str(u_hat.shape()) +
                         " and " + shape_str(v.shape()));
    const int n = u_hat.dim(0), ni = u_hat.dim(1), nj = u_hat.dim(2), d = u_hat.dim(3);
    const auto& uv = u_hat.data();
    const auto& vv = v.data();
    std::vector<float> out(static_cast<size_t>(n) * ni * nj);
    for (int b = 0; b < n; ++b)
        for (int i = 0; i < ni; ++i)
            for (int j = 0; j < nj; ++j) {
                const float* uh = uv.data() + ((static_cast<int64_t>(b) * ni + i) * nj + j) * d;
                const float* vj = vv.data() + (static_cast<int64_t>(b) * nj + j) * d;
                double acc = 0.0;
                for (int e = 0; e < d; ++e) acc += static_cast<double>(uh[e]) * vj[e];
                out[(static_cast<int64_t>(b) * ni + i) * nj + j] = static_cast<float>(acc);
            }
    auto un = u_hat.node(), vn = v.node();
    return make_op({n, ni, nj}, std::move(out), {un, vn},
                   [un, vn, n, ni, nj, d](Tensor::Node& node) {
                       const bool need_du = un->requires_grad;
                       const bool need_dv = vn->requires_grad;
                       if (need_du) un->ensure_grad();
                       if (need_dv) vn->ensure_grad();
                       for (int b = 0; b < n; ++b)
                           for (int i = 0; i < ni; ++i)
                               for (int j = 0; j < nj; ++j) {
                                   const float g =
                                       node.grad[(static_cast<int64_t>(b) * ni + i) * nj + j];
                                   if (g == 0.0f) continue;
                                   const int64_t ub =
                                       ((static_cast<int64_t>(b) * ni + i) * nj + j) * d;
                                   const int64_t vb = (static_cast<int64_t>(b) * nj + j) * d;
                                   for (int e = 0; e < d; ++e) {
                                       if (need_du) un->grad[ub + e] += g * vn->value[vb + e];
                                       if (need_dv) vn->grad[vb + e] += g * un->value[ub + e];
                                   }
                               }
                   });
}

Tensor dynamic_routing(const Tensor& u_hat, int iterations) {
    if (iterations < 1)
        throw UsageError("dynamic_routing: iterations must be >= 1, got " +
                         std::to_string(iterations));
    if (u_hat.rank() != 4)
        throw UsageError("dynamic_routing: u_hat must be [N,I,J,D], got " +
                         shape_str(u_hat.shape()));
    const int n = u_hat.dim(0), ni = u_hat.dim(1), nj = u_hat.dim(2);
    Tensor logits = Tensor::zeros({n, ni, nj});
    Tensor v;
    for (int r = 0; r < iterations; ++r) {
        Tensor couplings = softmax(logits, 2);
        Tensor s = route_weighted_sum(couplings, u_hat);
        v = squash(s);
        if (r + 1 < iterations) logits = add(logits, route_agreement(u_hat, v));
    }
    return v;
}

Tensor margin_loss(const Tensor& lengths, const std::vector<int>& labels,
                   const MarginLossParams& params) {
    if (lengths.rank() != 2)
        throw UsageError("margin_loss: lengths must be [N, classes], got " +
                         shape_str(lengths.shape()));
    const int n = lengths.dim(0), c = lengths.dim(1);
    if (static_cast<int>(labels.size()) != n)
        throw UsageError("margin_loss: label count mismatch");
    std::vector<float> present(static_cast<size_t>(n) * c, 0.0f);
    std::vector<float> absent(static_cast<size_t>(n) * c,
                              static_cast<float>(params.lambda_down));
    for (int i = 0; i < n; ++i) {
        const int y = labels[static_cast<size_t>(i)];
        if (y < 0 || y >= c) throw UsageError("margin_loss: label out of range");
        present[static_cast<size_t>(i) * c + y] = 1.0f;
        absent[static_cast<size_t>(i) * c + y] = 0.0f;
    }
    Tensor t_present = Tensor::from_data({n, c}, std::move(present));
    Tensor t_absent = Tensor::from_data({n, c}, std::move(absent));
    // T * max(0, m+ - len)^2 + lambda * (1-T) * max(0, len - m-)^2
    Tensor under = relu(add_scalar(scale(lengths, -1.0), params.m_plus));
    Tensor over = relu(add_scalar(lengths, -params.m_minus));
    Tensor per_entry =
        add(mul(t_present, mul(under, under)), mul(t_absent, mul(over, over)));
    return scale(reduce_sum(per_entry), 1.0 / n);
}

Tensor primary_caps_reshape(const Tensor& x, int types, int dim) {
    if (x.rank() != 4 || x.dim(1) != types * dim)
        throw UsageError("primary_caps_reshape: expected [N," + std::to_string(types * dim) +
                         ",h,w], got " + shape_str(x.shape()));
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int caps = types * h * w;
    const auto& xv = x.data();
    std::vector<float> out(static_cast<size_t>(n) * caps * dim);
    auto src_index = [types, dim, h, w](int b, int cap, int d) {
        const int t = cap / (h * w);
        const int yx = cap % (h * w);
        return ((static_cast<int64_t>(b) * types * dim + t * dim + d) * h + yx / w) * w + yx % w;
    };
    for (int b = 0; b < n; ++b)
        for (int cap = 0; cap < caps; ++cap)
            for (int d = 0; d < dim; ++d)
                out[(static_cast<int64_t>(b) * caps + cap) * dim + d] = xv[src_index(b, cap, d)];
    auto xn = x.node();
    return make_op({n, caps, dim}, std::move(out), {xn},
                   [xn, src_index, n, caps, dim](Tensor::Node& node) {
                       xn->ensure_grad();
                       for (int b = 0; b < n; ++b)
                           for (int cap = 0; cap < caps; ++cap)
                               for (int d = 0; d < dim; ++d)
                                   xn->grad[src_index(b, cap, d)] +=
                                       node.grad[(static_cast<int64_t>(b) * caps + cap) * dim + d];
                   });
}

Tensor mask_class_caps(const Tensor& caps, const std::vector<int>& selected) {
    if (caps.rank() != 3)
        throw UsageError("mask_class_caps: caps must be [N, classes, dim], got " +
                         shape_str(caps.shape()));
    const int n = caps.dim(0), c = caps.dim(1), d = caps.dim(2);
    if (static_cast<int>(selected.size()) != n)
        throw UsageError("mask_class_caps: selection count mismatch");
    const auto& cv = caps.data();
    std::vector<float> out(static_cast<size_t>(n) * c * d, 0.0f);
    for (int i = 0; i < n; ++i) {
        const int y = selected[static_cast<size_t>(i)];
        if (y < 0 || y >= c) throw UsageError("mask_class_caps: selection out of range");
        const int64_t base = (static_cast<int64_t>(i) * c + y) * d;
        for (int e = 0; e < d; ++e) out[base + e] = cv[base + e];
    }
    auto cn = caps.node();
    auto sel = std::make_shared<std::vector<int>>(selected);
    return make_op({n, c * d}, std::move(out), {cn}, [cn, sel, c, d](Tensor::Node& node) {
        cn->ensure_grad();
        const int n_rows = static_cast<int>(sel->size());
        for (int i = 0; i < n_rows; ++i) {
            const int64_t base = (static_cast<int64_t>(i) * c + (*sel)[static_cast<size_t>(i)]) * d;
            for (int e = 0; e < d; ++e) cn->grad[base + e] += node.grad[base + e];
        }
    });
}

}  // namespace degbench
