#pragma once

#include <utility>
#include <vector>

#include "degbench/prng.hpp"
#include "degbench/tensor.hpp"

namespace degbench {

enum class Padding { kSame, kValid };

struct Conv2dDims {
    int out_h = 0, out_w = 0;
    int pad_top = 0, pad_left = 0;
};

// Output geometry for a stride-s convolution. 'same' pads with zeros,
// split floor(beg)/ceil(end).
Conv2dDims conv2d_dims(int in_h, int in_w, int kh, int kw, int stride, Padding padding);

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);
Tensor add_scalar(const Tensor& x, double c);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);     // [M,K]x[K,N] -> [M,N]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [M,K]x[N,K]^T -> [M,N]
Tensor add_rowvec(const Tensor& x, const Tensor& bias);        // [M,N] + [N]
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);  // [N,C,H,W] + [C]

// ---- shape / reductions ----
Tensor reshape(const Tensor& x, Shape shape);
Tensor reduce_sum(const Tensor& x);   // -> scalar
Tensor reduce_mean(const Tensor& x);  // -> scalar
Tensor l2_norm(const Tensor& x, int axis);
Tensor softmax(const Tensor& x, int axis);

// ---- convolutions ----
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, Padding padding);
Tensor depthwise_conv2d(const Tensor& input, const Tensor& kernel, int stride, Padding padding);
Tensor max_pool2d(const Tensor& x, int kernel);  // stride == kernel, valid

// ---- regularization / losses ----
// Inverted dropout; returns the 0/1 keep mask so a run can be replayed.
std::pair<Tensor, std::vector<float>> dropout(const Tensor& x, double rate, Prng& rng);
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);  // mean
Tensor sum_squared_error(const Tensor& a, const Tensor& b);  // -> scalar

}  // namespace degbench
