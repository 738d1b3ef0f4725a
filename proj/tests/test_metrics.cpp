#include <cmath>
#include <limits>

#include "degbench/error.hpp"
#include "degbench/image.hpp"
#include "degbench/metrics.hpp"
#include "degbench/prng.hpp"
#include "doctest.h"

using namespace degbench;

namespace {

Image noise_image(int side, uint64_t seed) {
    Image img(side, side);
    Prng rng(seed, 0);
    for (auto& v : img.pixels) v = rng.next_double();
    return img;
}

}  // namespace

TEST_CASE("ssim: self similarity is exactly one") {
    Image img = noise_image(32, 1);
    CHECK(std::abs(mean_ssim(img, img) - 1.0) < 1e-9);
}

TEST_CASE("ssim: symmetric in its arguments") {
    Image a = noise_image(24, 2);
    Image b = noise_image(24, 3);
    CHECK(std::abs(mean_ssim(a, b) - mean_ssim(b, a)) < 1e-12);
}

TEST_CASE("ssim: binary inversion approaches the -1 boundary") {
    Image a(16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            for (int c = 0; c < 3; ++c) a.at(y, x, c) = (x + y) % 2 ? 1.0 : 0.0;
    Image b = a;
    for (auto& v : b.pixels) v = 1.0 - v;
    const double s = mean_ssim(a, b);
    CHECK(s < -0.9);
    CHECK(s >= -1.0);
}

TEST_CASE("ssim: constant-offset closed form") {
    const double c = 0.4, delta = 0.1;
    Image a = Image::filled_gray(16, 16, c);
    Image b = Image::filled_gray(16, 16, c + delta);
    // zero variances collapse SSIM to the luminance term
    const double c1 = 0.01 * 0.01;
    const double expected = (2.0 * c * (c + delta) + c1) /
                            (c * c + (c + delta) * (c + delta) + c1);
    CHECK(std::abs(mean_ssim(a, b) - expected) < 1e-9);
}

TEST_CASE("ssim: shape and size preconditions") {
    Image a(16, 16), b(16, 17);
    CHECK_THROWS_AS(mean_ssim(a, b), UsageError);
    Image small(8, 8);
    CHECK_THROWS_AS(mean_ssim(small, small), UsageError);  // below the 11x11 window
}

TEST_CASE("ssim: uniform window variant available") {
    Image a = noise_image(24, 4);
    Image b = noise_image(24, 5);
    SsimParams uniform;
    uniform.window = SsimWindow::kUniform;
    const double su = mean_ssim(a, b, uniform);
    const double sg = mean_ssim(a, b);
    CHECK(std::isfinite(su));
    CHECK(su != sg);  // different windows weigh structure differently
    CHECK(std::abs(mean_ssim(a, a, uniform) - 1.0) < 1e-9);
}

TEST_CASE("psnr: sentinel, closed form, symmetry, monotonicity") {
    Image a = noise_image(16, 6);
    CHECK(std::isinf(psnr(a, a)));

    Image base = Image::filled_gray(16, 16, 0.25);
    Image offset = base;
    for (auto& v : offset.pixels) v += 0.1;
    CHECK(std::abs(psnr(base, offset) - 20.0) < 1e-9);

    Image b = noise_image(16, 7);
    CHECK(psnr(a, b) == psnr(b, a));

    // strictly decreasing as MSE grows on a fixed pair family
    double prev = std::numeric_limits<double>::infinity();
    for (double d : {0.05, 0.1, 0.2, 0.4}) {
        Image shifted = base;
        for (auto& v : shifted.pixels) v += d;
        const double p = psnr(base, shifted);
        CHECK(p < prev);
        prev = p;
    }

    Image c(16, 17);
    CHECK_THROWS_AS(psnr(a, c), UsageError);
}

TEST_CASE("top-k: planted ranks and monotonicity") {
    // 100 synthetic 8-class records; true label planted at a known rank
    std::vector<EvalRecord> records;
    int planted_top1 = 0, planted_top3 = 0;
    for (int i = 0; i < 100; ++i) {
        EvalRecord r;
        r.sample_id = i;
        r.true_label = i % 8;
        const int rank = i % 5;  // 0..4
        std::vector<int> order;
        for (int cls = 0; cls < 8; ++cls)
            if (cls != r.true_label) order.push_back(cls);
        order.insert(order.begin() + rank, r.true_label);
        r.ranked_classes = order;
        if (rank < 1) ++planted_top1;
        if (rank < 3) ++planted_top3;
        records.push_back(std::move(r));
    }
    CHECK(top_k_accuracy(records, 1) == doctest::Approx(planted_top1 / 100.0));
    CHECK(top_k_accuracy(records, 3) == doctest::Approx(planted_top3 / 100.0));
    CHECK(top_k_accuracy(records, 8) == 1.0);

    double prev = 0.0;
    for (int k = 1; k <= 8; ++k) {
        const double acc = top_k_accuracy(records, k);
        CHECK(acc >= prev);
        prev = acc;
    }

    CHECK_THROWS_AS(top_k_accuracy({}, 1), UsageError);
    CHECK_THROWS_AS(top_k_accuracy(records, 9), UsageError);
}

TEST_CASE("top-k: single record ranked second") {
    EvalRecord r;
    r.sample_id = 0;
    r.true_label = 4;
    r.ranked_classes = {2, 4, 0, 1, 3};
    CHECK(top_k_accuracy({r}, 1) == 0.0);
    CHECK(top_k_accuracy({r}, 3) == 1.0);
}

TEST_CASE("rank_classes: descending with ascending-index tie break") {
    const std::vector<float> scores{0.2f, 0.5f, 0.5f, 0.1f};
    CHECK(rank_classes(scores) == std::vector<int>{1, 2, 0, 3});
}

TEST_CASE("normalize_map: affine mapping and degenerate cases") {
    CHECK(normalize_map({-1.0f, 0.0f, 3.0f}) == std::vector<float>{0.0f, 0.25f, 1.0f});
    CHECK(normalize_map({0.0f, 0.5f, 1.0f}) == std::vector<float>{0.0f, 0.5f, 1.0f});
    CHECK(normalize_map({0.7f, 0.7f, 0.7f}) == std::vector<float>{0.5f, 0.5f, 0.5f});
    CHECK_THROWS_AS(normalize_map({1.0f, std::numeric_limits<float>::quiet_NaN()}), UsageError);
}
