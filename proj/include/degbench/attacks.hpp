#pragma once

#include <vector>

#include "degbench/data.hpp"
#include "degbench/model.hpp"

namespace degbench {

// Single-step untargeted FGSM: x' = clip_[0,1](x + eps * sign(dL/dx)), using
// the model's own training loss; sign(0) = 0. Images must already match the
// model input size.
std::vector<Image> fgsm_untargeted(const Model& model, const std::vector<Image>& batch,
                                   const std::vector<int>& labels, double eps);

struct AdvSweepPoint {
    double eps = 0.0;
    double top1 = 0.0;
    double top3 = 0.0;
    double mean_psnr = 0.0;  // over finite entries only
    int finite_psnr = 0;
    int infinite_psnr = 0;
    int n = 0;
};

std::vector<AdvSweepPoint> adversarial_sweep(const Model& model, const std::vector<Sample>& data,
                                             const std::vector<double>& eps_list,
                                             int batch_size = 32);

}  // namespace degbench
