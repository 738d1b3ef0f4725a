#pragma once

#include <vector>

#include "degbench/tensor.hpp"

namespace degbench {

struct MarginLossParams {
    double m_plus = 0.9;
    double m_minus = 0.1;
    double lambda_down = 0.5;
};

// Vector squash along the last axis: v * ||v|| / (1 + ||v||^2).
// Zero vectors map to zero vectors.
Tensor squash(const Tensor& x);

// Prediction vectors u_hat[n,i,j,:] = W[i,j] * u[n,i,:].
// u: [N, I, Din], w: [I, J, Dout, Din] -> [N, I, J, Dout].
Tensor caps_transform(const Tensor& u, const Tensor& w);

// s[n,j,:] = sum_i c[n,i,j] * u_hat[n,i,j,:].
Tensor route_weighted_sum(const Tensor& c, const Tensor& u_hat);

// a[n,i,j] = u_hat[n,i,j,:] . v[n,j,:].
Tensor route_agreement(const Tensor& u_hat, const Tensor& v);

// Routing-by-agreement over u_hat [N,I,J,D]: logits start at zero, couplings
// are softmaxed over the output axis J, and the agreement update is skipped
// after the final round. Returns output capsules [N,J,D]. Fully on the tape.
Tensor dynamic_routing(const Tensor& u_hat, int iterations);

// Two-sided hinge on capsule lengths [N, classes]; mean over the batch.
Tensor margin_loss(const Tensor& lengths, const std::vector<int>& labels,
                   const MarginLossParams& params = {});

// Decoder input: flattens [N, C, D] keeping only the capsule of the selected
// class per sample, everything else zeroed. -> [N, C*D]
Tensor mask_class_caps(const Tensor& caps, const std::vector<int>& selected);

// Conv activations [N, T*D, h, w] regrouped into capsule vectors
// [N, T*h*w, D]; capsule (t, y, x) takes its D components from the
// channel block t*D..t*D+D-1 at (y, x).
Tensor primary_caps_reshape(const Tensor& x, int types, int dim);

}  // namespace degbench
