#include "degbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "degbench/error.hpp"

namespace degbench {

namespace {

std::vector<double> ssim_window(const SsimParams& p) {
    const int n = p.window_size;
    std::vector<double> w(static_cast<size_t>(n) * n);
    if (p.window == SsimWindow::kUniform) {
        std::fill(w.begin(), w.end(), 1.0 / (static_cast<double>(n) * n));
        return w;
    }
    const int r = n / 2;
    double sum = 0.0;
    for (int y = -r; y <= r; ++y)
        for (int x = -r; x <= r; ++x) {
            const double v = std::exp(-(static_cast<double>(x) * x + static_cast<double>(y) * y) /
                                      (2.0 * p.window_sigma * p.window_sigma));
            w[static_cast<size_t>(y + r) * n + (x + r)] = v;
            sum += v;
        }
    for (auto& v : w) v /= sum;
    return w;
}

}  // namespace

double mean_ssim_map(const std::vector<double>& a, const std::vector<double>& b, int h, int w,
                     const SsimParams& params) {
    if (a.size() != b.size() || a.size() != static_cast<size_t>(h) * w)
        throw UsageError("mean_ssim: map shape mismatch");
    const int n = params.window_size;
    if (h < n || w < n)
        throw UsageError("mean_ssim: input sides must be >= window size " + std::to_string(n));
    if (params.k1 <= 0.0 || params.k2 <= 0.0) throw UsageError("mean_ssim: K1, K2 must be > 0");

    const auto win = ssim_window(params);
    const double c1 = params.k1 * params.dynamic_range * params.k1 * params.dynamic_range;
    const double c2 = params.k2 * params.dynamic_range * params.k2 * params.dynamic_range;
    const int oh = h - n + 1, ow = w - n + 1;
    double total = 0.0;
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double ma = 0.0, mb = 0.0, maa = 0.0, mbb = 0.0, mab = 0.0;
            for (int wy = 0; wy < n; ++wy)
                for (int wx = 0; wx < n; ++wx) {
                    const double weight = win[static_cast<size_t>(wy) * n + wx];
                    const double va = a[static_cast<size_t>(y + wy) * w + (x + wx)];
                    const double vb = b[static_cast<size_t>(y + wy) * w + (x + wx)];
                    ma += weight * va;
                    mb += weight * vb;
                    maa += weight * va * va;
                    mbb += weight * vb * vb;
                    mab += weight * va * vb;
                }
            const double var_a = maa - ma * ma;
            const double var_b = mbb - mb * mb;
            const double cov = mab - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                     ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        }
    return total / (static_cast<double>(oh) * ow);
}

double mean_ssim(const Image& a, const Image& b, const SsimParams& params) {
    if (a.height != b.height || a.width != b.width)
        throw UsageError("mean_ssim: image shape mismatch");
    double total = 0.0;
    std::vector<double> ca(static_cast<size_t>(a.height) * a.width);
    std::vector<double> cb(ca.size());
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < a.height; ++y)
            for (int x = 0; x < a.width; ++x) {
                ca[static_cast<size_t>(y) * a.width + x] = a.at(y, x, c);
                cb[static_cast<size_t>(y) * a.width + x] = b.at(y, x, c);
            }
        total += mean_ssim_map(ca, cb, a.height, a.width, params);
    }
    return total / 3.0;
}

double psnr(const Image& a, const Image& b, double peak) {
    if (a.height != b.height || a.width != b.width) throw UsageError("psnr: shape mismatch");
    double mse = 0.0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.pixels.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

std::vector<int> rank_classes(const std::vector<float>& scores) {
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&scores](int lhs, int rhs) {
        if (scores[static_cast<size_t>(lhs)] != scores[static_cast<size_t>(rhs)])
            return scores[static_cast<size_t>(lhs)] > scores[static_cast<size_t>(rhs)];
        return lhs < rhs;
    });
    return order;
}

double top_k_accuracy(const std::vector<EvalRecord>& records, int k) {
    if (records.empty()) throw UsageError("top_k_accuracy: empty record list");
    if (k < 1) throw UsageError("top_k_accuracy: k must be >= 1");
    for (const auto& r : records)
        if (k > static_cast<int>(r.ranked_classes.size()))
            throw UsageError("top_k_accuracy: k exceeds class count");
    int64_t hits = 0;
    for (const auto& r : records) {
        const auto end = r.ranked_classes.begin() + k;
        if (std::find(r.ranked_classes.begin(), end, r.true_label) != end) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(records.size());
}

std::vector<float> normalize_map(const std::vector<float>& m) {
    if (m.empty()) return {};
    float lo = m[0], hi = m[0];
    for (float v : m) {
        if (!std::isfinite(v)) throw UsageError("normalize_map: non-finite entry");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::vector<float> out(m.size());
    if (hi == lo) {
        std::fill(out.begin(), out.end(), 0.5f);
        return out;
    }
    const float inv = 1.0f / (hi - lo);
    for (size_t i = 0; i < m.size(); ++i) out[i] = (m[i] - lo) * inv;
    return out;
}

}  // namespace degbench
