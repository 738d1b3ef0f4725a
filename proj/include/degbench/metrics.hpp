#pragma once

#include <vector>

#include "degbench/image.hpp"

namespace degbench {

enum class SsimWindow { kGaussian, kUniform };

struct SsimParams {
    int window_size = 11;
    double window_sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;  // L, 1.0 for [0,1] images
    SsimWindow window = SsimWindow::kGaussian;
};

// Mean of the local SSIM map over the valid (fully-windowed) interior of a
// single-channel map. Sides must be >= window_size.
double mean_ssim_map(const std::vector<double>& a, const std::vector<double>& b, int h, int w,
                     const SsimParams& params = {});

// Channel-wise mean SSIM of two same-shape RGB images.
double mean_ssim(const Image& a, const Image& b, const SsimParams& params = {});

// 10*log10(peak^2 / MSE); identical inputs yield +infinity.
double psnr(const Image& a, const Image& b, double peak = 1.0);

struct EvalRecord {
    int sample_id = 0;
    int true_label = 0;
    std::vector<int> ranked_classes;  // descending score, ties by ascending index
};

// Descending-score ranking with the deterministic tie-break.
std::vector<int> rank_classes(const std::vector<float>& scores);

double top_k_accuracy(const std::vector<EvalRecord>& records, int k);

// Min-max normalization to [0,1]; constant maps go to all 0.5.
std::vector<float> normalize_map(const std::vector<float>& m);

}  // namespace degbench
