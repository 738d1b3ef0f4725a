#include "degbench/optim.hpp"

#include <cmath>

#include "degbench/error.hpp"

namespace degbench {

void sgd_step(std::vector<float>& params, const std::vector<float>& grads, double lr) {
    if (params.size() != grads.size())
        throw UsageError("sgd_step: parameter/gradient size mismatch");
    for (size_t i = 0; i < params.size(); ++i)
        params[i] = static_cast<float>(params[i] - lr * grads[i]);
}

void adam_step(std::vector<float>& params, const std::vector<float>& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
    if (params.size() != grads.size())
        throw UsageError("adam_step: parameter/gradient size mismatch");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0f);
        state.v.assign(params.size(), 0.0f);
        state.t = 0;
    }
    if (state.m.size() != params.size())
        throw UsageError("adam_step: state size mismatch");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        const double m = beta1 * state.m[i] + (1.0 - beta1) * g;
        const double v = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        state.m[i] = static_cast<float>(m);
        state.v[i] = static_cast<float>(v);
        params[i] =
            static_cast<float>(params[i] - lr * (m / bc1) / (std::sqrt(v / bc2) + eps));
    }
}

void sgd_step(std::vector<Tensor>& params, double lr) {
    for (auto& p : params) {
        if (!p.has_grad()) continue;  // untouched parameters stay put
        sgd_step(p.raw_data(), p.grad(), lr);
    }
}

void adam_step(std::vector<Tensor>& params, std::vector<AdamState>& states, double lr,
               double beta1, double beta2, double eps) {
    if (states.size() != params.size()) states.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
        if (!params[i].has_grad()) continue;
        adam_step(params[i].raw_data(), params[i].grad(), states[i], lr, beta1, beta2, eps);
    }
}

}  // namespace degbench
