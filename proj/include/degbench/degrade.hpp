#pragma once

#include <string>
#include <variant>
#include <vector>

#include "degbench/image.hpp"
#include "degbench/prng.hpp"

namespace degbench {

// Severity parameters live on the same [0,1] scale as pixels (noise sigma,
// impulse density) or are kernel/quality integers.
struct AwgnShared {
    double sigma = 0.0;
};
struct AwgnPerChannel {
    double sigma = 0.0;
};
struct SaltPepper {
    double density = 0.0;
};
struct MotionBlur {
    int width = 1;  // odd
};
struct GaussianBlur {
    int ksize = 3;  // odd, >= 3
};
struct JpegQuality {
    int quality = 100;  // 0..100; 0 is treated as 1
};

using DegradationSpec =
    std::variant<AwgnShared, AwgnPerChannel, SaltPepper, MotionBlur, GaussianBlur, JpegQuality>;

std::string degradation_name(const DegradationSpec& spec);
double degradation_param(const DegradationSpec& spec);
DegradationSpec make_degradation(const std::string& name, double param);

// One H x W Gaussian field added identically to all three channels.
Image apply_awgn_shared(const Image& img, double sigma, Prng& rng);
// Three independent fields; introduces color artifacts.
Image apply_awgn_per_channel(const Image& img, double sigma, Prng& rng);
// Exactly round(d * H * W) pixels replaced (all channels) by 0 or 1.
Image apply_salt_pepper(const Image& img, double density, Prng& rng);

// Horizontal 1 x k kernel with entries 1/k.
std::vector<double> motion_blur_kernel(int width);
// sigma_b = 0.3 * ((k_b - 1) * 0.5 - 1) + 0.8
double gaussian_blur_sigma(int ksize);
// k x k sampled Gaussian at sigma_b, renormalized to sum 1.
std::vector<double> gaussian_blur_kernel(int ksize);

// Replicate-edge blurs, output size == input size.
Image apply_motion_blur(const Image& img, int width);
Image apply_gaussian_blur(const Image& img, int ksize);

// Baseline JPEG round-trip (4:2:0, Annex-K tables under the conventional
// quality scaling). Declared in jpeg.cpp.
Image apply_jpeg(const Image& img, int quality);

Image apply(const DegradationSpec& spec, const Image& img, Prng& rng);

}  // namespace degbench
