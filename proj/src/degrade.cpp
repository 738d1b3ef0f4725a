#include "degbench/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "degbench/error.hpp"

namespace degbench {

std::string degradation_name(const DegradationSpec& spec) {
    return std::visit(
        [](const auto& s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, AwgnShared>) return "awgn";
            if constexpr (std::is_same_v<T, AwgnPerChannel>) return "awgn_color";
            if constexpr (std::is_same_v<T, SaltPepper>) return "salt_pepper";
            if constexpr (std::is_same_v<T, MotionBlur>) return "motion_blur";
            if constexpr (std::is_same_v<T, GaussianBlur>) return "gaussian_blur";
            if constexpr (std::is_same_v<T, JpegQuality>) return "jpeg";
        },
        spec);
}

double degradation_param(const DegradationSpec& spec) {
    return std::visit(
        [](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, AwgnShared>) return s.sigma;
            if constexpr (std::is_same_v<T, AwgnPerChannel>) return s.sigma;
            if constexpr (std::is_same_v<T, SaltPepper>) return s.density;
            if constexpr (std::is_same_v<T, MotionBlur>) return s.width;
            if constexpr (std::is_same_v<T, GaussianBlur>) return s.ksize;
            if constexpr (std::is_same_v<T, JpegQuality>) return s.quality;
        },
        spec);
}

DegradationSpec make_degradation(const std::string& name, double param) {
    if (name == "awgn") return AwgnShared{param};
    if (name == "awgn_color") return AwgnPerChannel{param};
    if (name == "salt_pepper") return SaltPepper{param};
    if (name == "motion_blur") return MotionBlur{static_cast<int>(std::lround(param))};
    if (name == "gaussian_blur") return GaussianBlur{static_cast<int>(std::lround(param))};
    if (name == "jpeg") return JpegQuality{static_cast<int>(std::lround(param))};
    throw UsageError("unknown degradation: " + name);
}

Image apply_awgn_shared(const Image& img, double sigma, Prng& rng) {
    if (sigma < 0.0) throw UsageError("awgn: sigma must be >= 0");
    Image out = img;
    if (sigma == 0.0) return out;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double noise = sigma * rng.next_gaussian();
            for (int c = 0; c < 3; ++c) out.at(y, x, c) += noise;
        }
    clip_pixels(out);
    return out;
}

Image apply_awgn_per_channel(const Image& img, double sigma, Prng& rng) {
    if (sigma < 0.0) throw UsageError("awgn: sigma must be >= 0");
    Image out = img;
    if (sigma == 0.0) return out;
    // channel-major so each channel consumes a contiguous slice of the stream
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                out.at(y, x, c) += sigma * rng.next_gaussian();
    clip_pixels(out);
    return out;
}

Image apply_salt_pepper(const Image& img, double density, Prng& rng) {
    if (density < 0.0 || density > 1.0) throw UsageError("salt_pepper: density must be in [0,1]");
    Image out = img;
    const int64_t total = static_cast<int64_t>(img.height) * img.width;
    const int64_t hits = std::llround(density * static_cast<double>(total));
    if (hits == 0) return out;
    // partial Fisher-Yates: first `hits` entries are a uniform sample
    // without replacement
    std::vector<int64_t> idx(static_cast<size_t>(total));
    std::iota(idx.begin(), idx.end(), 0);
    for (int64_t i = 0; i < hits; ++i) {
        const int64_t j = i + static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(total - i)));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
        const double v = rng.next_below(2) ? 1.0 : 0.0;  // salt or pepper, equal odds
        const int64_t p = idx[static_cast<size_t>(i)];
        const int y = static_cast<int>(p / img.width);
        const int x = static_cast<int>(p % img.width);
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = v;
    }
    return out;
}

std::vector<double> motion_blur_kernel(int width) {
    if (width < 1 || width % 2 == 0)
        throw UsageError("motion_blur: kernel width must be odd and >= 1, got " +
                         std::to_string(width));
    return std::vector<double>(static_cast<size_t>(width), 1.0 / static_cast<double>(width));
}

double gaussian_blur_sigma(int ksize) {
    if (ksize < 3 || ksize % 2 == 0)
        throw UsageError("gaussian_blur: kernel size must be odd and >= 3, got " +
                         std::to_string(ksize));
    return 0.3 * ((ksize - 1) * 0.5 - 1.0) + 0.8;
}

std::vector<double> gaussian_blur_kernel(int ksize) {
    const double sigma = gaussian_blur_sigma(ksize);
    const int r = ksize / 2;
    std::vector<double> k(static_cast<size_t>(ksize) * ksize);
    double sum = 0.0;
    for (int y = -r; y <= r; ++y)
        for (int x = -r; x <= r; ++x) {
            const double v = std::exp(-(static_cast<double>(x) * x + static_cast<double>(y) * y) /
                                      (2.0 * sigma * sigma));
            k[static_cast<size_t>(y + r) * ksize + (x + r)] = v;
            sum += v;
        }
    for (auto& v : k) v /= sum;
    return k;
}

namespace {

int clamp_coord(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Horizontal pass with replicate-edge sampling.
Image convolve_rows(const Image& img, const std::vector<double>& kernel) {
    const int r = static_cast<int>(kernel.size()) / 2;
    Image out(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int t = -r; t <= r; ++t)
                    acc += kernel[static_cast<size_t>(t + r)] *
                           img.at(y, clamp_coord(x + t, 0, img.width - 1), c);
                out.at(y, x, c) = acc;
            }
    return out;
}

Image convolve_cols(const Image& img, const std::vector<double>& kernel) {
    const int r = static_cast<int>(kernel.size()) / 2;
    Image out(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int t = -r; t <= r; ++t)
                    acc += kernel[static_cast<size_t>(t + r)] *
                           img.at(clamp_coord(y + t, 0, img.height - 1), x, c);
                out.at(y, x, c) = acc;
            }
    return out;
}

void check_kernel_fits(int ksize, const Image& img, const char* which) {
    if (ksize > 2 * std::min(img.height, img.width))
        throw UsageError(std::string(which) + ": kernel size " + std::to_string(ksize) +
                         " larger than twice the image side");
}

}  // namespace

Image apply_motion_blur(const Image& img, int width) {
    const auto kernel = motion_blur_kernel(width);
    check_kernel_fits(width, img, "motion_blur");
    if (width == 1) return img;
    Image out = convolve_rows(img, kernel);
    clip_pixels(out);
    return out;
}

Image apply_gaussian_blur(const Image& img, int ksize) {
    const double sigma = gaussian_blur_sigma(ksize);
    check_kernel_fits(ksize, img, "gaussian_blur");
    // separable pass; the normalized 2-D kernel is the outer product of the
    // normalized 1-D profile with itself
    const int r = ksize / 2;
    std::vector<double> k(static_cast<size_t>(ksize));
    double sum = 0.0;
    for (int t = -r; t <= r; ++t) {
        k[static_cast<size_t>(t + r)] =
            std::exp(-static_cast<double>(t) * t / (2.0 * sigma * sigma));
        sum += k[static_cast<size_t>(t + r)];
    }
    for (auto& v : k) v /= sum;
    Image out = convolve_cols(convolve_rows(img, k), k);
    clip_pixels(out);
    return out;
}

Image apply(const DegradationSpec& spec, const Image& img, Prng& rng) {
    return std::visit(
        [&](const auto& s) -> Image {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, AwgnShared>)
                return apply_awgn_shared(img, s.sigma, rng);
            if constexpr (std::is_same_v<T, AwgnPerChannel>)
                return apply_awgn_per_channel(img, s.sigma, rng);
            if constexpr (std::is_same_v<T, SaltPepper>)
                return apply_salt_pepper(img, s.density, rng);
            if constexpr (std::is_same_v<T, MotionBlur>) return apply_motion_blur(img, s.width);
            if constexpr (std::is_same_v<T, GaussianBlur>)
                return apply_gaussian_blur(img, s.ksize);
            if constexpr (std::is_same_v<T, JpegQuality>) return apply_jpeg(img, s.quality);
        },
        spec);
}

}  // namespace degbench
