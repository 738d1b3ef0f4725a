// Baseline JPEG degradation as a quantization round-trip: color transform,
// 4:2:0 chroma subsampling, 8x8 DCT, quantize/dequantize with the standard
// Annex-K tables under the conventional quality scaling, inverse DCT. The
// decoded pixels equal a full encode/decode since entropy coding is lossless.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "degbench/degrade.hpp"
#include "degbench/error.hpp"

namespace degbench {

namespace {

constexpr std::array<int, 64> kLumaQuant = {
    16, 11, 10, 16, 24,  40,  51,  61,  //
    12, 12, 14, 19, 26,  58,  60,  55,  //
    14, 13, 16, 24, 40,  57,  69,  56,  //
    14, 17, 22, 29, 51,  87,  80,  62,  //
    18, 22, 37, 56, 68,  109, 103, 77,  //
    24, 35, 55, 64, 81,  104, 113, 92,  //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99};

constexpr std::array<int, 64> kChromaQuant = {
    17, 18, 24, 47, 99, 99, 99, 99,  //
    18, 21, 26, 66, 99, 99, 99, 99,  //
    24, 26, 56, 99, 99, 99, 99, 99,  //
    47, 66, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99};

std::array<int, 64> scaled_table(const std::array<int, 64>& base, int quality) {
    const int q = std::max(quality, 1);  // the scale law is singular at 0
    const int scale = q < 50 ? 5000 / q : 200 - 2 * q;
    std::array<int, 64> out{};
    for (int i = 0; i < 64; ++i)
        out[static_cast<size_t>(i)] =
            std::clamp((base[static_cast<size_t>(i)] * scale + 50) / 100, 1, 255);
    return out;
}

struct Plane {
    int h = 0, w = 0;
    std::vector<double> v;
    Plane() = default;
    Plane(int hh, int ww) : h(hh), w(ww), v(static_cast<size_t>(hh) * ww, 0.0) {}
    double& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    double at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
};

Plane pad_replicate(const Plane& p, int mult) {
    const int ph = (p.h + mult - 1) / mult * mult;
    const int pw = (p.w + mult - 1) / mult * mult;
    Plane out(ph, pw);
    for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x)
            out.at(y, x) = p.at(std::min(y, p.h - 1), std::min(x, p.w - 1));
    return out;
}

void dct_block(const double* in, double* out) {
    // orthonormal 2-D DCT-II with JPEG alpha factors
    static const double kPi = 3.14159265358979323846;
    for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
            double acc = 0.0;
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                    acc += in[y * 8 + x] * std::cos((2 * y + 1) * u * kPi / 16.0) *
                           std::cos((2 * x + 1) * v * kPi / 16.0);
            const double au = u == 0 ? 1.0 / std::sqrt(2.0) : 1.0;
            const double av = v == 0 ? 1.0 / std::sqrt(2.0) : 1.0;
            out[u * 8 + v] = 0.25 * au * av * acc;
        }
}

void idct_block(const double* in, double* out) {
    static const double kPi = 3.14159265358979323846;
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            double acc = 0.0;
            for (int u = 0; u < 8; ++u)
                for (int v = 0; v < 8; ++v) {
                    const double au = u == 0 ? 1.0 / std::sqrt(2.0) : 1.0;
                    const double av = v == 0 ? 1.0 / std::sqrt(2.0) : 1.0;
                    acc += au * av * in[u * 8 + v] * std::cos((2 * y + 1) * u * kPi / 16.0) *
                           std::cos((2 * x + 1) * v * kPi / 16.0);
                }
            out[y * 8 + x] = 0.25 * acc;
        }
}

void requantize_plane(Plane& p, const std::array<int, 64>& quant) {
    double block[64], coef[64];
    for (int by = 0; by < p.h; by += 8)
        for (int bx = 0; bx < p.w; bx += 8) {
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) block[y * 8 + x] = p.at(by + y, bx + x) - 128.0;
            dct_block(block, coef);
            for (int i = 0; i < 64; ++i) {
                const double q = quant[static_cast<size_t>(i)];
                coef[i] = std::nearbyint(coef[i] / q) * q;
            }
            idct_block(coef, block);
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) p.at(by + y, bx + x) = block[y * 8 + x] + 128.0;
        }
}

}  // namespace

Image apply_jpeg(const Image& img, int quality) {
    if (quality < 0 || quality > 100)
        throw UsageError("jpeg: quality must be in [0,100], got " + std::to_string(quality));
    const auto luma_q = scaled_table(kLumaQuant, quality);
    const auto chroma_q = scaled_table(kChromaQuant, quality);

    // RGB -> YCbCr (JFIF, full range, on the 0..255 scale)
    Plane yp(img.height, img.width), cb(img.height, img.width), cr(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double r = img.at(y, x, 0) * 255.0;
            const double g = img.at(y, x, 1) * 255.0;
            const double b = img.at(y, x, 2) * 255.0;
            yp.at(y, x) = 0.299 * r + 0.587 * g + 0.114 * b;
            cb.at(y, x) = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0;
            cr.at(y, x) = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0;
        }

    // 4:2:0 -- chroma averaged over 2x2, to an 8-aligned subsampled grid
    Plane ypad = pad_replicate(yp, 16);
    Plane cbpad = pad_replicate(cb, 16);
    Plane crpad = pad_replicate(cr, 16);
    Plane cbsub(ypad.h / 2, ypad.w / 2), crsub(ypad.h / 2, ypad.w / 2);
    for (int y = 0; y < cbsub.h; ++y)
        for (int x = 0; x < cbsub.w; ++x) {
            cbsub.at(y, x) = 0.25 * (cbpad.at(2 * y, 2 * x) + cbpad.at(2 * y, 2 * x + 1) +
                                     cbpad.at(2 * y + 1, 2 * x) + cbpad.at(2 * y + 1, 2 * x + 1));
            crsub.at(y, x) = 0.25 * (crpad.at(2 * y, 2 * x) + crpad.at(2 * y, 2 * x + 1) +
                                     crpad.at(2 * y + 1, 2 * x) + crpad.at(2 * y + 1, 2 * x + 1));
        }

    requantize_plane(ypad, luma_q);
    requantize_plane(cbsub, chroma_q);
    requantize_plane(crsub, chroma_q);

    Image out(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double yy = ypad.at(y, x);
            const double cbv = cbsub.at(y / 2, x / 2) - 128.0;  // nearest upsampling
            const double crv = crsub.at(y / 2, x / 2) - 128.0;
            out.at(y, x, 0) = (yy + 1.402 * crv) / 255.0;
            out.at(y, x, 1) = (yy - 0.344136 * cbv - 0.714136 * crv) / 255.0;
            out.at(y, x, 2) = (yy + 1.772 * cbv) / 255.0;
        }
    clip_pixels(out);
    return out;
}

}  // namespace degbench
