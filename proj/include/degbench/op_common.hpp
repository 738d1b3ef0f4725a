#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "degbench/tensor.hpp"

namespace degbench::detail {

// Builds a tape node. The backprop closure is only retained when some parent
// tracks gradients, so inference graphs stay lean.
Tensor make_op(Shape shape, std::vector<float> value,
               std::vector<std::shared_ptr<Tensor::Node>> parents,
               std::function<void(Tensor::Node&)> backprop);

void check_same_shape(const Tensor& a, const Tensor& b, const char* op);

// Decomposes a shape around one axis: index = (outer*extent + e)*inner + inner_idx.
struct AxisView {
    int axis = 0;
    int64_t outer = 1;
    int64_t extent = 1;
    int64_t inner = 1;
};

AxisView axis_view(const Shape& shape, int axis);

// float x float -> double dot with four partial sums, so the accumulation
// chain does not serialize the loop.
inline double dot_fd(const float* a, const float* b, int n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += static_cast<double>(a[i]) * b[i];
        s1 += static_cast<double>(a[i + 1]) * b[i + 1];
        s2 += static_cast<double>(a[i + 2]) * b[i + 2];
        s3 += static_cast<double>(a[i + 3]) * b[i + 3];
    }
    for (; i < n; ++i) s0 += static_cast<double>(a[i]) * b[i];
    return (s0 + s1) + (s2 + s3);
}

inline double dot_fd_strided(const float* a, const float* b, int64_t b_stride, int n) {
    double s0 = 0.0, s1 = 0.0;
    int i = 0;
    for (; i + 2 <= n; i += 2) {
        s0 += static_cast<double>(a[i]) * b[i * b_stride];
        s1 += static_cast<double>(a[i + 1]) * b[(i + 1) * b_stride];
    }
    if (i < n) s0 += static_cast<double>(a[i]) * b[i * b_stride];
    return s0 + s1;
}

// dst[i] += w * src[i]; independent elements, vectorizes freely.
inline void axpy_fd(double* dst, double w, const float* src, int n) {
    for (int i = 0; i < n; ++i) dst[i] += w * src[i];
}

}  // namespace degbench::detail
