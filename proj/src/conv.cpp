#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "degbench/error.hpp"
#include "degbench/op_common.hpp"
#include "degbench/ops.hpp"

namespace degbench {

using detail::make_op;

Conv2dDims conv2d_dims(int in_h, int in_w, int kh, int kw, int stride, Padding padding) {
    if (stride < 1) throw UsageError("conv2d: stride must be positive");
    Conv2dDims d;
    if (padding == Padding::kValid) {
        if (kh > in_h || kw > in_w)
            throw UsageError("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                             " larger than input " + std::to_string(in_h) + "x" +
                             std::to_string(in_w) + " with 'valid' padding");
        d.out_h = (in_h - kh) / stride + 1;
        d.out_w = (in_w - kw) / stride + 1;
        d.pad_top = 0;
        d.pad_left = 0;
    } else {
        d.out_h = (in_h + stride - 1) / stride;
        d.out_w = (in_w + stride - 1) / stride;
        const int pad_h = std::max((d.out_h - 1) * stride + kh - in_h, 0);
        const int pad_w = std::max((d.out_w - 1) * stride + kw - in_w, 0);
        d.pad_top = pad_h / 2;
        d.pad_left = pad_w / 2;
    }
    return d;
}

namespace {

struct ConvGeom {
    int n, cin, h, w;
    int cout, kh, kw;
    int stride;
    Conv2dDims dims;
    bool depthwise;
};

ConvGeom conv_geometry(const Tensor& input, const Tensor& kernel, int stride, Padding padding,
                       bool depthwise) {
    if (input.rank() != 4)
        throw UsageError("conv2d: input must be [N,C,H,W], got " + shape_str(input.shape()));
    if (kernel.rank() != 4)
        throw UsageError("conv2d: kernel must be 4-D, got " + shape_str(kernel.shape()));
    ConvGeom g;
    g.n = input.dim(0);
    g.cin = input.dim(1);
    g.h = input.dim(2);
    g.w = input.dim(3);
    g.kh = kernel.dim(2);
    g.kw = kernel.dim(3);
    g.stride = stride;
    g.depthwise = depthwise;
    if (depthwise) {
        if (kernel.dim(0) != g.cin || kernel.dim(1) != 1)
            throw UsageError("depthwise_conv2d: kernel must be [C,1,k,k] with C=" +
                             std::to_string(g.cin) + ", got " + shape_str(kernel.shape()));
        g.cout = g.cin;
    } else {
        if (kernel.dim(1) != g.cin)
            throw UsageError("conv2d: kernel channels " + std::to_string(kernel.dim(1)) +
                             " do not match input channels " + std::to_string(g.cin));
        g.cout = kernel.dim(0);
    }
    g.dims = conv2d_dims(g.h, g.w, g.kh, g.kw, stride, padding);
    return g;
}

// Valid output range along one axis for a fixed kernel offset:
// o*stride - pad + k must land in [0, extent).
struct TapRange {
    int lo, hi;  // [lo, hi)
};

inline TapRange tap_range(int out_extent, int in_extent, int stride, int pad, int k) {
    const int num = in_extent - 1 - k + pad;
    if (num < 0) return {0, 0};
    const int lo = std::max(0, (pad - k + stride - 1) / stride);
    const int hi = std::min(out_extent, num / stride + 1);
    return {lo, std::max(lo, hi)};
}

// Shared direct convolution, kernel-tap outer so the inner loops run
// contiguously along output rows with the weight hoisted. Accumulation is
// double throughout. For the depthwise case output channel f reads only
// input channel f and kernel plane f.
Tensor conv_impl(const Tensor& input, const Tensor& kernel, int stride, Padding padding,
                 bool depthwise) {
    const ConvGeom g = conv_geometry(input, kernel, stride, padding, depthwise);
    const int oh = g.dims.out_h, ow = g.dims.out_w;
    const int pt = g.dims.pad_top, pl = g.dims.pad_left;
    const auto& inp = input.data();
    const auto& ker = kernel.data();
    const int64_t in_chw = static_cast<int64_t>(g.cin) * g.h * g.w;
    const int64_t out_chw = static_cast<int64_t>(g.cout) * oh * ow;
    const int64_t ker_ck = static_cast<int64_t>(depthwise ? 1 : g.cin) * g.kh * g.kw;

    std::vector<float> out(static_cast<size_t>(g.n) * out_chw);
    std::vector<double> acc(static_cast<size_t>(oh) * ow);
    for (int b = 0; b < g.n; ++b) {
        for (int f = 0; f < g.cout; ++f) {
            std::fill(acc.begin(), acc.end(), 0.0);
            const int c_begin = depthwise ? f : 0;
            const int c_end = depthwise ? f + 1 : g.cin;
            for (int c = c_begin; c < c_end; ++c) {
                const float* in_ch = inp.data() + b * in_chw + static_cast<int64_t>(c) * g.h * g.w;
                const float* ker_ch =
                    ker.data() + f * ker_ck + static_cast<int64_t>(depthwise ? 0 : c) * g.kh * g.kw;
                for (int ky = 0; ky < g.kh; ++ky) {
                    const TapRange ys = tap_range(oh, g.h, stride, pt, ky);
                    for (int kx = 0; kx < g.kw; ++kx) {
                        const double wv = ker_ch[ky * g.kw + kx];
                        if (wv == 0.0) continue;
                        const TapRange xs = tap_range(ow, g.w, stride, pl, kx);
                        for (int oy = ys.lo; oy < ys.hi; ++oy) {
                            const float* in_row = in_ch +
                                                  static_cast<int64_t>(oy * stride - pt + ky) * g.w +
                                                  (xs.lo * stride - pl + kx);
                            double* acc_row = acc.data() + static_cast<int64_t>(oy) * ow;
                            if (stride == 1) {
                                detail::axpy_fd(acc_row + xs.lo, wv, in_row, xs.hi - xs.lo);
                            } else {
                                for (int ox = xs.lo, ii = 0; ox < xs.hi; ++ox, ii += stride)
                                    acc_row[ox] += wv * in_row[ii];
                            }
                        }
                    }
                }
            }
            float* dst = out.data() + b * out_chw + static_cast<int64_t>(f) * oh * ow;
            for (size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<float>(acc[i]);
        }
    }

    auto in_node = input.node();
    auto ker_node = kernel.node();
    auto backprop = [in_node, ker_node, g, stride](Tensor::Node& node) {
        const int oh = g.dims.out_h, ow = g.dims.out_w;
        const int pt = g.dims.pad_top, pl = g.dims.pad_left;
        const int64_t in_chw = static_cast<int64_t>(g.cin) * g.h * g.w;
        const int64_t out_chw = static_cast<int64_t>(g.cout) * oh * ow;
        const int64_t ker_ck = static_cast<int64_t>(g.depthwise ? 1 : g.cin) * g.kh * g.kw;
        const bool need_din = in_node->requires_grad;
        const bool need_dker = ker_node->requires_grad;
        std::vector<double> din(need_din ? in_node->value.size() : 0, 0.0);
        std::vector<double> dker(need_dker ? ker_node->value.size() : 0, 0.0);

        for (int b = 0; b < g.n; ++b) {
            for (int f = 0; f < g.cout; ++f) {
                const float* g_map = node.grad.data() + b * out_chw +
                                     static_cast<int64_t>(f) * oh * ow;
                const int c_begin = g.depthwise ? f : 0;
                const int c_end = g.depthwise ? f + 1 : g.cin;
                for (int c = c_begin; c < c_end; ++c) {
                    const int64_t in_base = b * in_chw + static_cast<int64_t>(c) * g.h * g.w;
                    const int64_t ker_base =
                        f * ker_ck + static_cast<int64_t>(g.depthwise ? 0 : c) * g.kh * g.kw;
                    for (int ky = 0; ky < g.kh; ++ky) {
                        const TapRange ys = tap_range(oh, g.h, stride, pt, ky);
                        for (int kx = 0; kx < g.kw; ++kx) {
                            const TapRange xs = tap_range(ow, g.w, stride, pl, kx);
                            if (xs.lo >= xs.hi || ys.lo >= ys.hi) continue;
                            const double wv = ker_node->value[ker_base + ky * g.kw + kx];
                            const int len = xs.hi - xs.lo;
                            double kacc = 0.0;
                            for (int oy = ys.lo; oy < ys.hi; ++oy) {
                                const int64_t in_off =
                                    in_base + static_cast<int64_t>(oy * stride - pt + ky) * g.w +
                                    (xs.lo * stride - pl + kx);
                                const float* g_row = g_map + static_cast<int64_t>(oy) * ow + xs.lo;
                                if (need_dker) {
                                    const float* in_row = in_node->value.data() + in_off;
                                    kacc += stride == 1
                                                ? detail::dot_fd(g_row, in_row, len)
                                                : detail::dot_fd_strided(g_row, in_row, stride, len);
                                }
                                if (need_din && wv != 0.0) {
                                    double* din_row = din.data() + in_off;
                                    if (stride == 1) {
                                        detail::axpy_fd(din_row, wv, g_row, len);
                                    } else {
                                        for (int ox = 0, ii = 0; ox < len; ++ox, ii += stride)
                                            din_row[ii] += wv * g_row[ox];
                                    }
                                }
                            }
                            if (need_dker) dker[ker_base + ky * g.kw + kx] += kacc;
                        }
                    }
                }
            }
        }
        if (need_din) {
            in_node->ensure_grad();
            for (size_t i = 0; i < din.size(); ++i)
                in_node->grad[i] += static_cast<float>(din[i]);
        }
        if (need_dker) {
            ker_node->ensure_grad();
            for (size_t i = 0; i < dker.size(); ++i)
                ker_node->grad[i] += static_cast<float>(dker[i]);
        }
    };
    return make_op({g.n, g.cout, oh, ow}, std::move(out), {in_node, ker_node},
                   std::move(backprop));
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, Padding padding) {
    return conv_impl(input, kernel, stride, padding, /*depthwise=*/false);
}

Tensor depthwise_conv2d(const Tensor& input, const Tensor& kernel, int stride, Padding padding) {
    return conv_impl(input, kernel, stride, padding, /*depthwise=*/true);
}

Tensor max_pool2d(const Tensor& x, int kernel) {
    if (x.rank() != 4)
        throw UsageError("max_pool2d: input must be [N,C,H,W], got " + shape_str(x.shape()));
    if (kernel < 1) throw UsageError("max_pool2d: kernel must be positive");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oh = h / kernel, ow = w / kernel;
    if (oh < 1 || ow < 1)
        throw UsageError("max_pool2d: window " + std::to_string(kernel) + " larger than input");
    const auto& xv = x.data();
    std::vector<float> out(static_cast<size_t>(n) * c * oh * ow);
    auto argmax = std::make_shared<std::vector<int64_t>>(out.size());
    int64_t oi = 0;
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            const int64_t base = (static_cast<int64_t>(b) * c + ch) * h * w;
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox, ++oi) {
                    float best = -std::numeric_limits<float>::infinity();
                    int64_t best_idx = -1;
                    for (int ky = 0; ky < kernel; ++ky)
                        for (int kx = 0; kx < kernel; ++kx) {
                            const int64_t idx =
                                base + static_cast<int64_t>(oy * kernel + ky) * w + ox * kernel + kx;
                            if (xv[idx] > best) {  // first max wins on ties
                                best = xv[idx];
                                best_idx = idx;
                            }
                        }
                    out[oi] = best;
                    (*argmax)[oi] = best_idx;
                }
        }
    auto xn = x.node();
    return make_op({n, c, oh, ow}, std::move(out), {xn}, [xn, argmax](Tensor::Node& node) {
        xn->ensure_grad();
        for (size_t i = 0; i < node.grad.size(); ++i)
            xn->grad[(*argmax)[i]] += node.grad[i];
    });
}

}  // namespace degbench
