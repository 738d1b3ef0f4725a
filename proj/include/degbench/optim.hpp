#pragma once

#include <cstdint>
#include <vector>

#include "degbench/tensor.hpp"

namespace degbench {

// In-place SGD: p -= lr * g. Parameter and gradient lengths must match.
void sgd_step(std::vector<float>& params, const std::vector<float>& grads, double lr);

struct AdamState {
    std::vector<float> m;
    std::vector<float> v;
    int64_t t = 0;
};

// Standard bias-corrected Adam update; state is created on first use.
void adam_step(std::vector<float>& params, const std::vector<float>& grads, AdamState& state,
               double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// Convenience wrappers over a parameter list (tensors carrying grads).
void sgd_step(std::vector<Tensor>& params, double lr);
void adam_step(std::vector<Tensor>& params, std::vector<AdamState>& states, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

}  // namespace degbench
