#include <cmath>
#include <cstdio>
#include <filesystem>

#include "degbench/capsule.hpp"
#include "degbench/error.hpp"
#include "degbench/model.hpp"
#include "degbench/model_config.hpp"
#include "degbench/ops.hpp"
#include "degbench/train.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace degbench;
using degbench::testutil::random_tensor;

namespace {

CapsnetOptions tiny_caps_options() {
    CapsnetOptions opt;
    opt.conv1_filters = 16;
    opt.conv2_filters = 32;
    opt.conv_kernel = 9;
    opt.primary_types = 4;
    opt.primary_dim = 4;
    opt.primary_kernel = 3;
    opt.primary_stride = 2;
    opt.class_dim = 16;
    opt.decoder_hidden = {64, 128};
    return opt;
}

std::vector<Sample> random_samples(int n, int side, int classes, uint64_t seed) {
    Prng rng(seed, 77);
    std::vector<Sample> out;
    for (int i = 0; i < n; ++i) {
        Image img(side, side);
        for (auto& v : img.pixels) v = rng.next_double();
        out.push_back({std::move(img), i % classes});
    }
    return out;
}

}  // namespace

TEST_CASE("capsnet builder: hand-computed parameter count for 28x28/10 classes") {
    const ModelConfig cfg = build_capsnet(28, 10, 3, /*with_decoder=*/true, tiny_caps_options());
    // per layer, weights + biases:
    //   conv1 16f 9x9x3: 16*243 + 16          = 3904
    //   conv2 32f 9x9x16: 32*1296 + 32        = 41504
    //   primary conv 16f 3x3x32: 16*288 + 16  = 4624   (4 types x 4 dim)
    //   class caps: 16 caps * 10 * 16 * 4     = 10240  (2x2 map, 4 types)
    //   decoder 160->64->128->2352:
    //     160*64+64 + 64*128+128 + 128*2352+2352 = 10304 + 8320 + 303408
    const int64_t expected = 3904 + 41504 + 4624 + 10240 + 10304 + 8320 + 303408;
    CHECK(parameter_count(cfg) == expected);
    Model model(cfg, 1);
    CHECK(model.trainable_parameter_count() == expected);
}

TEST_CASE("capsnet: forward produces lengths in [0,1) and a reconstruction") {
    const ModelConfig cfg = build_capsnet(28, 10, 3, true, tiny_caps_options());
    Model model(cfg, 3);
    Prng rng(5);
    Tensor x = random_tensor({2, 3, 28, 28}, rng, 0.0, 1.0, false);
    std::vector<int> labels{1, 7};
    const ForwardResult fr = model.forward(x, false, nullptr, &labels);
    REQUIRE(fr.lengths.shape() == Shape{2, 10});
    for (float v : fr.lengths.data()) {
        CHECK(v >= 0.0f);
        CHECK(v < 1.0f);
    }
    CHECK(fr.reconstruction.shape() == Shape{2, 3, 28, 28});
    CHECK(fr.scores.data() == fr.lengths.data());

    // loss builds and is finite
    const Tensor loss = model.loss(fr, labels);
    CHECK(std::isfinite(loss.item()));

    CHECK_THROWS_AS(build_capsnet(16, 10, 3, true), UsageError);  // side < 28
}

TEST_CASE("vcaps mini: dropout 0.8, margin-only loss, no decoder") {
    VCapsMiniOptions opt;
    opt.base_filters = 4;
    opt.primary_types = 4;
    opt.primary_dim = 4;
    const ModelConfig cfg = build_vcapsnet_mini(32, 8, 2, opt);
    CHECK(cfg.loss == LossKind::kMargin);
    bool saw_dropout = false, saw_decoder = false;
    int convs = 0;
    for (const auto& layer : cfg.layers) {
        if (const auto* d = std::get_if<DropoutSpec>(&layer)) {
            saw_dropout = true;
            CHECK(d->rate == 0.8);
        }
        if (std::holds_alternative<DecoderSpec>(layer)) saw_decoder = true;
        if (std::holds_alternative<ConvSpec>(layer)) ++convs;
    }
    CHECK(saw_dropout);
    CHECK(!saw_decoder);
    CHECK(convs == 5);  // 2 per block x 2 blocks + backbone cutoff conv

    // primary capsule count follows stride-2 k-3 conv arithmetic: 32 -> 8
    // after two pools, then (8-3)/2+1 = 3, so caps = types * 3 * 3
    const auto* pc = std::get_if<PrimaryCapsSpec>(&cfg.layers[cfg.layers.size() - 2]);
    REQUIRE(pc != nullptr);
    Model model(cfg, 2);
    Prng rng(6);
    Tensor x = random_tensor({1, 3, 32, 32}, rng, 0.0, 1.0, false);
    const ForwardResult fr = model.forward(x);
    CHECK(fr.lengths.shape() == Shape{1, 8});

    CHECK_THROWS_AS(build_vcapsnet_mini(32, 8, 1, opt), UsageError);
    // deep enough stacks shrink the map below the capsule kernel
    CHECK_THROWS_AS(build_vcapsnet_mini(16, 8, 3, opt), UsageError);
}

TEST_CASE("small cnn: softmax head, depth ordering, overfit sanity") {
    const ModelConfig shallow = build_small_cnn(16, 4, CnnDepth::kShallow);
    const ModelConfig deep = build_small_cnn(16, 4, CnnDepth::kDeep);
    auto conv_count = [](const ModelConfig& cfg) {
        int n = 0;
        for (const auto& l : cfg.layers)
            if (std::holds_alternative<ConvSpec>(l)) ++n;
        return n;
    };
    CHECK(conv_count(deep) > conv_count(shallow));

    Model model(shallow, 4);
    Prng rng(8);
    Tensor x = random_tensor({3, 3, 16, 16}, rng, 0.0, 1.0, false);
    const auto scores = model.predict(x);
    for (const auto& row : scores) {
        double sum = 0.0;
        for (float v : row) {
            CHECK(v >= 0.0f);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("small cnn: both variants overfit a 10-sample batch") {
    for (CnnDepth depth : {CnnDepth::kShallow, CnnDepth::kDeep}) {
        Model model(build_small_cnn(16, 5, depth), 11);
        const auto data = random_samples(10, 16, 5, 21);
        TrainHyper hp;
        hp.batch_size = 10;
        hp.val_fraction = 0.0;
        hp.patience = 0;
        hp.lr = 3e-3;
        int steps = 0;
        double acc = 0.0;
        while (steps < 500) {
            hp.epochs = 50;  // one step per epoch at batch 10
            train_model(model, data, hp, 31);
            steps += 50;
            acc = evaluate_top1(model, data);
            if (acc == 1.0) break;
        }
        CHECK(acc == 1.0);
        CHECK(steps <= 500);
    }
}

TEST_CASE("ntt: table pairings, frozen average, delta start") {
    CHECK(ntt_default_filter_size(224) == 21);
    CHECK(ntt_default_filter_size(256) == 23);
    CHECK(ntt_default_filter_size(299) == 23);
    CHECK(ntt_default_filter_size(104) == 7);
    CHECK(ntt_default_filter_size(32) % 2 == 1);
    CHECK(ntt_default_filter_size(32) >= 3);

    const ModelConfig base = build_small_cnn(16, 4, CnnDepth::kShallow);
    const int k = 5;
    const ModelConfig with_ntt = attach_ntt(base, k);
    CHECK(has_ntt(with_ntt));
    CHECK_THROWS_AS(attach_ntt(with_ntt, k), UsageError);
    CHECK_THROWS_AS(attach_ntt(base, 4), UsageError);  // even size
    CHECK(serialize_config(strip_ntt(with_ntt)) == serialize_config(base));
    CHECK_THROWS_AS(strip_ntt(base), UsageError);

    Model model(with_ntt, 9);
    // frozen kernel holds exactly 1/k^2 everywhere
    const auto& frozen = model.all_params().front();
    CHECK(frozen.name.find("lowpass") != std::string::npos);
    CHECK(!frozen.trainable);
    for (float v : frozen.tensor.data())
        CHECK(std::abs(v - 1.0 / (k * k)) < 1e-9);

    // delta-initialized trainable layer: NTT output == average-filtered input
    Prng rng(10);
    Tensor x = random_tensor({2, 3, 16, 16}, rng, 0.0, 1.0, false);
    Tensor ntt_out = model.feature_extract("ntt", x);
    Tensor avg_kernel = Tensor::full({3, 1, k, k}, 1.0f / (k * k));
    Tensor expected = depthwise_conv2d(x, avg_kernel, 1, Padding::kSame);
    REQUIRE(ntt_out.shape() == expected.shape());
    for (size_t i = 0; i < expected.data().size(); ++i)
        CHECK(std::abs(ntt_out.data()[i] - expected.data()[i]) < 1e-6);
}

TEST_CASE("ntt: frozen kernel is bit-identical after training steps") {
    Model model(attach_ntt(build_small_cnn(16, 4, CnnDepth::kShallow), 3), 13);
    const std::vector<float> before = model.all_params().front().tensor.data();
    const auto data = random_samples(24, 16, 4, 41);
    TrainHyper hp;
    hp.epochs = 5;
    hp.batch_size = 8;
    hp.val_fraction = 0.0;
    train_model(model, data, hp, 51);
    const std::vector<float>& after = model.all_params().front().tensor.data();
    CHECK(before == after);

    // while the trainable twin did move
    bool trainable_moved = false;
    for (const auto& p : model.all_params())
        if (p.trainable && p.name.find("ntt.weight") != std::string::npos) {
            for (size_t i = 0; i < p.tensor.data().size(); ++i) {
                const float delta_init =
                    (i % 9 == 4) ? 1.0f : 0.0f;  // center of each 3x3 plane
                if (p.tensor.data()[i] != delta_init) trainable_moved = true;
            }
        }
    CHECK(trainable_moved);
}

TEST_CASE("feature_extract: tags, shapes, purity") {
    Model model(build_small_cnn(16, 4, CnnDepth::kShallow), 15);
    Prng rng(12);
    Tensor x = random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0, false);
    Tensor c1 = model.feature_extract("conv1", x);
    CHECK(c1.shape() == Shape{1, 8, 16, 16});
    Tensor c2 = model.feature_extract("conv2", x);
    CHECK(c2.shape() == Shape{1, 16, 8, 8});
    Tensor last = model.feature_extract("last_conv", x);
    CHECK(last.data() == c2.data());
    Tensor again = model.feature_extract("last_conv", x);
    CHECK(again.data() == last.data());
    CHECK_THROWS_AS(model.feature_extract("conv9", x), UsageError);
}

TEST_CASE("model: deterministic init per seed, checkpoint round-trip") {
    const ModelConfig cfg = build_small_cnn(16, 4, CnnDepth::kShallow);
    Model a(cfg, 123), b(cfg, 123), c(cfg, 124);
    CHECK(a.all_params()[0].tensor.data() == b.all_params()[0].tensor.data());
    CHECK(a.all_params()[0].tensor.data() != c.all_params()[0].tensor.data());

    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "degbench_ckpt_test";
    fs::create_directories(dir);
    const std::string cfg_path = (dir / "m.cfg").string();
    const std::string ckpt_path = (dir / "m.ckpt").string();
    save_config(cfg_path, cfg);
    a.save_weights(ckpt_path);
    Model restored = Model::load(cfg_path, ckpt_path);
    for (size_t i = 0; i < a.all_params().size(); ++i)
        CHECK(restored.all_params()[i].tensor.data() == a.all_params()[i].tensor.data());

    Prng rng(14);
    Tensor x = random_tensor({2, 3, 16, 16}, rng, 0.0, 1.0, false);
    CHECK(restored.predict(x) == a.predict(x));

    // loading into a different architecture fails loudly
    Model other(build_small_cnn(16, 4, CnnDepth::kDeep), 1);
    CHECK_THROWS_AS(other.load_weights(ckpt_path), DataError);
    fs::remove_all(dir);
}

TEST_CASE("config: serialize/parse round trip") {
    const ModelConfig cfg =
        attach_ntt(build_capsnet(32, 6, 1, true, tiny_caps_options()), 7);
    const std::string text = serialize_config(cfg);
    const ModelConfig back = parse_config_text(text);
    CHECK(serialize_config(back) == text);
    CHECK_THROWS_AS(parse_config_text("bogus_key=1\n"), UsageError);
}

TEST_CASE("config validation: invariants") {
    ModelConfig cfg = build_small_cnn(16, 4, CnnDepth::kShallow);
    cfg.loss = LossKind::kMargin;  // margin without a capsule head
    CHECK_THROWS_AS(validate_config(cfg), UsageError);

    ModelConfig caps = build_capsnet(28, 4, 3, false, tiny_caps_options());
    caps.loss = LossKind::kCrossEntropy;
    CHECK_THROWS_AS(validate_config(caps), UsageError);

    // ntt anywhere but first is rejected
    ModelConfig moved = build_small_cnn(16, 4, CnnDepth::kShallow);
    moved.layers.insert(moved.layers.begin() + 1, NttSpec{3});
    CHECK_THROWS_AS(validate_config(moved), UsageError);
}

TEST_CASE("training: deterministic trajectory under one seed") {
    auto run = [] {
        Model model(build_small_cnn(16, 3, CnnDepth::kShallow), 77);
        const auto data = random_samples(30, 16, 3, 91);
        TrainHyper hp;
        hp.epochs = 3;
        hp.batch_size = 8;
        hp.val_fraction = 0.2;
        train_model(model, data, hp, 13);
        std::vector<float> flat;
        for (const auto& p : model.all_params())
            flat.insert(flat.end(), p.tensor.data().begin(), p.tensor.data().end());
        return flat;
    };
    CHECK(run() == run());
}

TEST_CASE("training: non-finite loss raises a numeric error") {
    Model model(build_small_cnn(16, 3, CnnDepth::kShallow), 78);
    const auto data = random_samples(10, 16, 3, 92);
    TrainHyper hp;
    hp.epochs = 50;
    hp.batch_size = 10;
    hp.val_fraction = 0.0;
    hp.lr = 1e18;  // divergence on purpose
    CHECK_THROWS_AS(train_model(model, data, hp, 14), NumericError);
}
