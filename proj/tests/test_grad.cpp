#include <cmath>

#include "degbench/capsule.hpp"
#include "degbench/error.hpp"
#include "degbench/ops.hpp"
#include "degbench/prng.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace degbench;
using degbench::testutil::grad_check;
using degbench::testutil::random_tensor;

namespace {

// Keeps samples away from non-differentiable kinks so central differences
// with h=1e-3 stay clean.
Tensor random_away_from(Shape shape, Prng& rng, std::vector<double> kinks, double margin = 0.02) {
    Tensor t = random_tensor(std::move(shape), rng);
    for (auto& v : t.raw_data()) {
        bool near = true;
        while (near) {
            near = false;
            for (double k : kinks)
                if (std::abs(static_cast<double>(v) - k) < margin) near = true;
            if (near) v = static_cast<float>(rng.next_uniform(-1.0, 1.0));
        }
    }
    return t;
}

}  // namespace

TEST_CASE("grad: elementwise and activation ops") {
    Prng rng(101);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor a = random_tensor({3, 5}, rng);
        Tensor b = random_tensor({3, 5}, rng);
        auto r1 = grad_check([&] { return mul(add(a, b), sub(a, b)); }, {a, b});
        CHECK(r1.max_rel_err < 1e-3);

        Tensor x = random_away_from({4, 4}, rng, {0.0});
        auto r2 = grad_check([&] { return relu(x); }, {x});
        CHECK(r2.max_rel_err < 1e-3);

        Tensor y = random_tensor({4, 4}, rng, -3.0, 3.0);
        auto r3 = grad_check([&] { return sigmoid(y); }, {y});
        CHECK(r3.max_rel_err < 1e-3);
    }
}

TEST_CASE("grad: dense path (matmul + bias)") {
    Prng rng(102);
    for (int trial = 0; trial < 20; ++trial) {
        const int m = 1 + static_cast<int>(rng.next_below(3));
        const int k = 2 + static_cast<int>(rng.next_below(4));
        const int n = 1 + static_cast<int>(rng.next_below(4));
        Tensor x = random_tensor({m, k}, rng);
        Tensor w = random_tensor({n, k}, rng);
        Tensor b = random_tensor({n}, rng);
        auto r = grad_check([&] { return add_rowvec(matmul_nt(x, w), b); }, {x, w, b});
        CHECK(r.max_rel_err < 1e-3);

        Tensor w2 = random_tensor({k, n}, rng);
        auto r2 = grad_check([&] { return matmul(x, w2); }, {x, w2});
        CHECK(r2.max_rel_err < 1e-3);
    }
}

TEST_CASE("grad: softmax along both axes") {
    Prng rng(103);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = random_tensor({3, 4}, rng, -2.0, 2.0);
        for (int axis : {0, 1}) {
            auto r = grad_check([&] { return softmax(x, axis); }, {x});
            CHECK(r.max_rel_err < 1e-3);
        }
    }
}

TEST_CASE("grad: conv2d over random geometries") {
    Prng rng(104);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + static_cast<int>(rng.next_below(2));
        const int c = 1 + static_cast<int>(rng.next_below(3));
        const int f = 1 + static_cast<int>(rng.next_below(3));
        const int h = 4 + static_cast<int>(rng.next_below(4));
        const int w = 4 + static_cast<int>(rng.next_below(4));
        const int k = 1 + static_cast<int>(rng.next_below(3));
        const int stride = 1 + static_cast<int>(rng.next_below(2));
        const Padding pad = rng.next_below(2) ? Padding::kSame : Padding::kValid;
        Tensor x = random_tensor({n, c, h, w}, rng);
        Tensor ker = random_tensor({f, c, k, k}, rng);
        auto r = grad_check([&] { return conv2d(x, ker, stride, pad); }, {x, ker});
        CHECK(r.max_rel_err < 1e-3);
    }
}

TEST_CASE("grad: depthwise conv2d") {
    Prng rng(105);
    for (int trial = 0; trial < 20; ++trial) {
        const int c = 1 + static_cast<int>(rng.next_below(4));
        const int h = 4 + static_cast<int>(rng.next_below(4));
        const int k = 1 + static_cast<int>(rng.next_below(3));
        const Padding pad = rng.next_below(2) ? Padding::kSame : Padding::kValid;
        Tensor x = random_tensor({1, c, h, h}, rng);
        Tensor ker = random_tensor({c, 1, k, k}, rng);
        auto r = grad_check([&] { return depthwise_conv2d(x, ker, 1, pad); }, {x, ker});
        CHECK(r.max_rel_err < 1e-3);
    }
}

TEST_CASE("grad: max pool avoids tie plateaus") {
    Prng rng(106);
    for (int trial = 0; trial < 20; ++trial) {
        // shuffled ramp: all entries distinct with gaps >> 2h, so the argmax
        // cannot flip under the probe steps
        std::vector<float> vals(72);
        for (size_t i = 0; i < vals.size(); ++i)
            vals[i] = -1.8f + 0.05f * static_cast<float>(i);
        for (size_t i = vals.size() - 1; i > 0; --i)
            std::swap(vals[i], vals[rng.next_below(i + 1)]);
        Tensor x = Tensor::from_data({1, 2, 6, 6}, vals, true);
        auto r = grad_check([&] { return max_pool2d(x, 2); }, {x});
        CHECK(r.max_rel_err < 1e-3);
    }
}

TEST_CASE("grad: l2_norm and squash") {
    Prng rng(107);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = random_tensor({3, 4}, rng);
        // keep norms bounded away from zero: the norm is non-differentiable there
        for (int row = 0; row < 3; ++row) {
            double nsq = 0.0;
            for (int e = 0; e < 4; ++e) {
                const float v = x.data()[static_cast<size_t>(row) * 4 + e];
                nsq += static_cast<double>(v) * v;
            }
            if (nsq < 0.04) x.raw_data()[static_cast<size_t>(row) * 4] += 0.5f;
        }
        auto r1 = grad_check([&] { return l2_norm(x, 1); }, {x});
        CHECK(r1.max_rel_err < 1e-3);
        auto r2 = grad_check([&] { return squash(x); }, {x});
        CHECK(r2.max_rel_err < 1e-3);
    }
}

TEST_CASE("grad: capsule transform and routing r in {1,3}") {
    Prng rng(108);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + static_cast<int>(rng.next_below(2));
        const int ni = 2 + static_cast<int>(rng.next_below(3));
        const int nj = 2 + static_cast<int>(rng.next_below(3));
        const int din = 2, dout = 3;
        Tensor u = random_tensor({n, ni, din}, rng);
        Tensor w = random_tensor({ni, nj, dout, din}, rng);
        auto r1 = grad_check([&] { return caps_transform(u, w); }, {u, w});
        CHECK(r1.max_rel_err < 1e-3);

        Tensor u_hat = random_tensor({n, ni, nj, din}, rng);
        for (int iters : {1, 3}) {
            auto r2 = grad_check([&] { return dynamic_routing(u_hat, iters); }, {u_hat});
            CHECK(r2.max_rel_err < 1e-3);
        }
        // full head: transform -> routing -> lengths
        auto r3 = grad_check(
            [&] { return l2_norm(dynamic_routing(caps_transform(u, w), 3), 2); }, {u, w});
        CHECK(r3.max_rel_err < 1e-3);
    }
}

TEST_CASE("grad: margin loss away from hinge corners") {
    Prng rng(109);
    MarginLossParams params;
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2, c = 5;
        std::vector<float> lengths(static_cast<size_t>(n) * c);
        for (auto& v : lengths) {
            double s;
            do {
                s = rng.next_uniform(0.02, 0.98);
            } while (std::abs(s - params.m_plus) < 0.02 || std::abs(s - params.m_minus) < 0.02);
            v = static_cast<float>(s);
        }
        Tensor len = Tensor::from_data({n, c}, lengths, true);
        std::vector<int> labels{static_cast<int>(rng.next_below(c)),
                                static_cast<int>(rng.next_below(c))};
        auto r = grad_check([&] { return margin_loss(len, labels, params); }, {len});
        CHECK(r.max_rel_err < 1e-3);
    }
}

TEST_CASE("grad: cross entropy and reconstruction error") {
    Prng rng(110);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor logits = random_tensor({3, 6}, rng, -2.0, 2.0);
        std::vector<int> labels{1, 4, 0};
        auto r = grad_check([&] { return softmax_cross_entropy(logits, labels); }, {logits});
        CHECK(r.max_rel_err < 1e-3);

        Tensor a = random_tensor({2, 8}, rng);
        Tensor b = random_tensor({2, 8}, rng);
        auto r2 = grad_check([&] { return sum_squared_error(a, b); }, {a, b});
        CHECK(r2.max_rel_err < 1e-3);
    }
}

TEST_CASE("grad: dropout with a fixed stream") {
    Prng rng(111);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = random_tensor({4, 4}, rng);
        auto r = grad_check(
            [&] {
                Prng drop(123, 7);  // same mask on every rebuild
                return dropout(x, 0.4, drop).first;
            },
            {x});
        CHECK(r.max_rel_err < 1e-3);
    }
}

TEST_CASE("grad: mask_class_caps routes gradient to the kept capsule only") {
    Prng rng(112);
    Tensor caps = random_tensor({2, 3, 4}, rng);
    std::vector<int> sel{2, 0};
    auto r = grad_check([&] { return mask_class_caps(caps, sel); }, {caps});
    CHECK(r.max_rel_err < 1e-3);
}

TEST_CASE("conv2d agrees with the quadruple-loop reference on random 8x8 inputs") {
    Prng rng(113);
    for (int trial = 0; trial < 10; ++trial) {
        const int c = 1 + static_cast<int>(rng.next_below(3));
        const int f = 1 + static_cast<int>(rng.next_below(3));
        const int k = 1 + static_cast<int>(rng.next_below(3));
        const int stride = 1 + static_cast<int>(rng.next_below(2));
        const Padding pad = rng.next_below(2) ? Padding::kSame : Padding::kValid;
        Tensor x = random_tensor({2, c, 8, 8}, rng, -1.0, 1.0, false);
        Tensor ker = random_tensor({f, c, k, k}, rng, -1.0, 1.0, false);
        Tensor y = conv2d(x, ker, stride, pad);
        const auto dims = conv2d_dims(8, 8, k, k, stride, pad);
        auto ref = testutil::naive_conv2d(x.data(), 2, c, 8, 8, ker.data(), f, k, k, stride,
                                          dims.pad_top, dims.pad_left, dims.out_h, dims.out_w);
        REQUIRE(y.size() == static_cast<int64_t>(ref.size()));
        for (size_t i = 0; i < ref.size(); ++i)
            CHECK(std::abs(y.data()[i] - ref[i]) < 1e-5);

        Tensor dk = random_tensor({c, 1, k, k}, rng, -1.0, 1.0, false);
        Tensor dy = depthwise_conv2d(x, dk, stride, pad);
        auto dref = testutil::naive_conv2d(x.data(), 2, c, 8, 8, dk.data(), c, k, k, stride,
                                           dims.pad_top, dims.pad_left, dims.out_h, dims.out_w,
                                           /*depthwise=*/true);
        for (size_t i = 0; i < dref.size(); ++i)
            CHECK(std::abs(dy.data()[i] - dref[i]) < 1e-5);
    }
}

TEST_CASE("conv2d: identity kernel, zero kernel, and the 2x2 ones window") {
    // centered delta leaves the input unchanged under 'same' padding
    Tensor x = Tensor::from_data({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    Tensor delta = Tensor::from_data({1, 1, 3, 3}, {0, 0, 0, 0, 1, 0, 0, 0, 0});
    Tensor y = conv2d(x, delta, 1, Padding::kSame);
    CHECK(y.data() == x.data());

    Tensor zeros = Tensor::zeros({1, 1, 3, 3});
    Tensor z = conv2d(x, zeros, 1, Padding::kSame);
    for (float v : z.data()) CHECK(v == 0.0f);

    // 4x4 ones, 2x2 ones kernel, stride 2, valid: each window sums to 4
    Tensor ones = Tensor::full({1, 1, 4, 4}, 1.0f);
    Tensor k22 = Tensor::full({1, 1, 2, 2}, 1.0f);
    Tensor s = conv2d(ones, k22, 2, Padding::kValid);
    CHECK(s.shape() == Shape{1, 1, 2, 2});
    for (float v : s.data()) CHECK(v == doctest::Approx(4.0f));

    CHECK_THROWS_AS(conv2d(x, Tensor::zeros({1, 2, 3, 3}), 1, Padding::kSame), UsageError);
    CHECK_THROWS_AS(conv2d(x, Tensor::zeros({1, 1, 5, 5}), 1, Padding::kValid), UsageError);
}

TEST_CASE("depthwise: per-channel independence") {
    // average kernel on channel 0 only, deltas elsewhere
    Prng rng(114);
    Tensor x = random_tensor({1, 3, 5, 5}, rng, 0.0, 1.0, false);
    std::vector<float> kdata(3 * 9, 0.0f);
    for (int i = 0; i < 9; ++i) kdata[i] = 1.0f / 9.0f;  // channel 0: average
    kdata[9 + 4] = 1.0f;                                 // channel 1: delta
    kdata[18 + 4] = 1.0f;                                // channel 2: delta
    Tensor ker = Tensor::from_data({3, 1, 3, 3}, kdata);
    Tensor y = depthwise_conv2d(x, ker, 1, Padding::kSame);
    bool ch0_changed = false;
    for (int i = 0; i < 25; ++i)
        if (std::abs(y.data()[i] - x.data()[i]) > 1e-6) ch0_changed = true;
    CHECK(ch0_changed);
    for (int i = 25; i < 75; ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]));

    // per-channel deltas -> identity
    std::vector<float> iddata(3 * 9, 0.0f);
    iddata[4] = iddata[9 + 4] = iddata[18 + 4] = 1.0f;
    Tensor idker = Tensor::from_data({3, 1, 3, 3}, iddata);
    Tensor yid = depthwise_conv2d(x, idker, 1, Padding::kSame);
    CHECK(yid.data() == x.data());

    // constant image: interior pixels unchanged by any normalized kernel
    Tensor cimg = Tensor::full({1, 3, 6, 6}, 0.4f);
    std::vector<float> avg(3 * 9, 1.0f / 9.0f);
    Tensor avgker = Tensor::from_data({3, 1, 3, 3}, avg);
    Tensor yc = depthwise_conv2d(cimg, avgker, 1, Padding::kSame);
    for (int c = 0; c < 3; ++c)
        for (int yy = 1; yy < 5; ++yy)
            for (int xx = 1; xx < 5; ++xx)
                CHECK(yc.data()[(static_cast<size_t>(c) * 6 + yy) * 6 + xx] ==
                      doctest::Approx(0.4f).epsilon(1e-6));

    CHECK_THROWS_AS(depthwise_conv2d(x, Tensor::zeros({2, 1, 3, 3}), 1, Padding::kSame),
                    UsageError);
}

TEST_CASE("routing: uniform couplings at r=1 and symmetric-agreement stability") {
    // 2 in-caps, 2 out-caps, dim 1; with I == J the r=1 output is
    // squash(mean_i u_hat[i,j])
    Tensor u_hat = Tensor::from_data({1, 2, 2, 1}, {0.2f, -0.4f, 0.6f, 0.8f});
    Tensor v = dynamic_routing(u_hat, 1);
    auto squash1 = [](double s) { return s * std::abs(s) / (1.0 + s * s); };
    CHECK(v.data()[0] == doctest::Approx(squash1(0.5 * (0.2 + 0.6))).epsilon(1e-5));
    CHECK(v.data()[1] == doctest::Approx(squash1(0.5 * (-0.4 + 0.8))).epsilon(1e-5));

    CHECK_THROWS_AS(dynamic_routing(u_hat, 0), UsageError);

    // identical predictions across j keep couplings uniform for any r
    Tensor same = Tensor::from_data({1, 2, 2, 1}, {0.3f, 0.3f, 0.5f, 0.5f});
    Tensor v1 = dynamic_routing(same, 1);
    Tensor v3 = dynamic_routing(same, 3);
    for (int i = 0; i < 2; ++i)
        CHECK(v1.data()[i] == doctest::Approx(v3.data()[i]).epsilon(1e-6));
}

TEST_CASE("routing: two-round recurrence matches an independent double-precision run") {
    const int ni = 2, nj = 2, d = 2;
    std::vector<float> u{0.5f, -0.3f, 0.1f, 0.7f, -0.6f, 0.2f, 0.4f, 0.4f};
    Tensor u_hat = Tensor::from_data({1, ni, nj, d}, u);
    Tensor v = dynamic_routing(u_hat, 2);

    // independent straight-loop oracle
    std::vector<double> b(ni * nj, 0.0), vv(nj * d, 0.0);
    for (int round = 0; round < 2; ++round) {
        std::vector<double> c(ni * nj);
        for (int i = 0; i < ni; ++i) {
            double mx = std::max(b[i * nj], b[i * nj + 1]);
            double sum = 0.0;
            for (int j = 0; j < nj; ++j) sum += std::exp(b[i * nj + j] - mx);
            for (int j = 0; j < nj; ++j) c[i * nj + j] = std::exp(b[i * nj + j] - mx) / sum;
        }
        for (int j = 0; j < nj; ++j) {
            double s[2] = {0.0, 0.0};
            for (int i = 0; i < ni; ++i)
                for (int e = 0; e < d; ++e) s[e] += c[i * nj + j] * u[(i * nj + j) * d + e];
            const double nsq = s[0] * s[0] + s[1] * s[1];
            const double factor = std::sqrt(nsq) / (1.0 + nsq);
            for (int e = 0; e < d; ++e) vv[j * d + e] = s[e] * factor;
        }
        if (round == 0)
            for (int i = 0; i < ni; ++i)
                for (int j = 0; j < nj; ++j)
                    for (int e = 0; e < d; ++e)
                        b[i * nj + j] += u[(i * nj + j) * d + e] * vv[j * d + e];
    }
    for (int idx = 0; idx < nj * d; ++idx)
        CHECK(v.data()[idx] == doctest::Approx(vv[idx]).epsilon(1e-5));
}

TEST_CASE("squash: norm fixed points") {
    Tensor zero = Tensor::zeros({1, 3});
    Tensor sz = squash(zero);
    for (float v : sz.data()) CHECK(v == 0.0f);

    Tensor unit = Tensor::from_data({1, 2}, {1.0f, 0.0f});
    CHECK(squash(unit).data()[0] == doctest::Approx(0.5f));

    Tensor big = Tensor::from_data({1, 2}, {10.0f, 0.0f});
    CHECK(squash(big).data()[0] > 0.99f);
    CHECK(squash(big).data()[0] == doctest::Approx(100.0 / 101.0).epsilon(1e-6));
}

TEST_CASE("margin loss: closed-form values and monotonicity") {
    MarginLossParams p;
    // satisfied margins -> zero loss
    Tensor good = Tensor::from_data({1, 3}, {0.95f, 0.05f, 0.02f});
    CHECK(margin_loss(good, {0}, p).item() == 0.0f);

    // target 0.5, one non-target 0.5, rest 0: (0.9-0.5)^2 + 0.5*(0.5-0.1)^2 = 0.24
    Tensor mid = Tensor::from_data({1, 3}, {0.5f, 0.5f, 0.0f});
    CHECK(margin_loss(mid, {0}, p).item() == doctest::Approx(0.24f).epsilon(1e-6));

    // non-increasing in target length, non-decreasing in a non-target length
    float prev = 1e9f;
    for (float t = 0.1f; t < 0.95f; t += 0.1f) {
        Tensor len = Tensor::from_data({1, 2}, {t, 0.3f});
        const float l = margin_loss(len, {0}, p).item();
        CHECK(l <= prev + 1e-7f);
        prev = l;
    }
    prev = -1e9f;
    for (float o = 0.05f; o < 0.95f; o += 0.1f) {
        Tensor len = Tensor::from_data({1, 2}, {0.95f, o});
        const float l = margin_loss(len, {0}, p).item();
        CHECK(l >= prev - 1e-7f);
        prev = l;
    }
}
