#include "degbench/model.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "degbench/capsule.hpp"
#include "degbench/error.hpp"
#include "degbench/metrics.hpp"
#include "degbench/ops.hpp"

namespace degbench {

namespace {

Tensor init_normal(Shape shape, double stddev, Prng rng) {
    std::vector<float> data(static_cast<size_t>(shape_numel(shape)));
    for (auto& v : data) v = static_cast<float>(stddev * rng.next_gaussian());
    return Tensor::from_data(std::move(shape), std::move(data), true);
}

Tensor init_delta_depthwise(int channels, int k) {
    std::vector<float> data(static_cast<size_t>(channels) * k * k, 0.0f);
    for (int c = 0; c < channels; ++c)
        data[static_cast<size_t>(c) * k * k + (k / 2) * k + k / 2] = 1.0f;
    return Tensor::from_data({channels, 1, k, k}, std::move(data), true);
}

Tensor init_average_depthwise(int channels, int k) {
    Tensor t = Tensor::full({channels, 1, k, k}, 1.0f / static_cast<float>(k * k));
    t.set_requires_grad(false);
    return t;
}

Tensor apply_activation(const Tensor& x, Activation act) {
    switch (act) {
        case Activation::kLinear: return x;
        case Activation::kRelu: return relu(x);
        case Activation::kSigmoid: return sigmoid(x);
    }
    return x;
}

}  // namespace

Model::Model(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    validate_config(cfg_);
    classes_ = config_classes(cfg_);

    int c = cfg_.input_channels, h = cfg_.input_side, w = cfg_.input_side;
    int caps = 0, cap_dim = 0;
    int class_count = 0, class_dim = 0;
    for (size_t li = 0; li < cfg_.layers.size(); ++li) {
        const std::string prefix = "layer" + std::to_string(li) + ".";
        Prng rng(seed, 1000 + li);
        std::visit(
            [&](const auto& spec) {
                using T = std::decay_t<decltype(spec)>;
                if constexpr (std::is_same_v<T, NttSpec>) {
                    params_.push_back({prefix + "ntt.lowpass",
                                       init_average_depthwise(c, spec.filter_size), false});
                    params_.push_back(
                        {prefix + "ntt.weight", init_delta_depthwise(c, spec.filter_size), true});
                } else if constexpr (std::is_same_v<T, ConvSpec>) {
                    const double stddev = std::sqrt(2.0 / (static_cast<double>(c) * spec.kernel *
                                                           spec.kernel));
                    params_.push_back(
                        {prefix + "conv.weight",
                         init_normal({spec.filters, c, spec.kernel, spec.kernel}, stddev, rng),
                         true});
                    params_.push_back(
                        {prefix + "conv.bias", Tensor::zeros({spec.filters}, true), true});
                    const auto d =
                        conv2d_dims(h, w, spec.kernel, spec.kernel, spec.stride, spec.pad);
                    c = spec.filters;
                    h = d.out_h;
                    w = d.out_w;
                } else if constexpr (std::is_same_v<T, MaxPoolSpec>) {
                    h /= spec.kernel;
                    w /= spec.kernel;
                } else if constexpr (std::is_same_v<T, DenseSpec>) {
                    // dense input is the flattened map, or the previous dense
                    // width once flat (h == 0)
                    const int in = h > 0 ? c * h * w : c;
                    params_.push_back({prefix + "dense.weight",
                                       init_normal({spec.units, in}, std::sqrt(2.0 / in), rng),
                                       true});
                    params_.push_back(
                        {prefix + "dense.bias", Tensor::zeros({spec.units}, true), true});
                    c = spec.units;
                    h = w = 0;  // flat from here on
                } else if constexpr (std::is_same_v<T, PrimaryCapsSpec>) {
                    const int filters = spec.types * spec.dim;
                    const double stddev = std::sqrt(2.0 / (static_cast<double>(c) * spec.kernel *
                                                           spec.kernel));
                    params_.push_back(
                        {prefix + "primary_caps.weight",
                         init_normal({filters, c, spec.kernel, spec.kernel}, stddev, rng), true});
                    params_.push_back(
                        {prefix + "primary_caps.bias", Tensor::zeros({filters}, true), true});
                    const auto d =
                        conv2d_dims(h, w, spec.kernel, spec.kernel, spec.stride, spec.pad);
                    h = d.out_h;
                    w = d.out_w;
                    caps = spec.types * h * w;
                    cap_dim = spec.dim;
                    c = filters;
                } else if constexpr (std::is_same_v<T, ClassCapsSpec>) {
                    params_.push_back(
                        {prefix + "class_caps.weight",
                         init_normal({caps, spec.classes, spec.dim, cap_dim}, 0.1, rng), true});
                    class_count = spec.classes;
                    class_dim = spec.dim;
                } else if constexpr (std::is_same_v<T, DecoderSpec>) {
                    int in = class_count * class_dim;
                    for (size_t fi = 0; fi < spec.hidden.size(); ++fi) {
                        const int units = spec.hidden[fi];
                        params_.push_back(
                            {prefix + "decoder.fc" + std::to_string(fi) + ".weight",
                             init_normal({units, in}, std::sqrt(2.0 / in), rng), true});
                        params_.push_back({prefix + "decoder.fc" + std::to_string(fi) + ".bias",
                                           Tensor::zeros({units}, true), true});
                        in = units;
                    }
                    const int out_units = cfg_.input_channels * cfg_.input_side * cfg_.input_side;
                    params_.push_back({prefix + "decoder.out.weight",
                                       init_normal({out_units, in}, std::sqrt(1.0 / in), rng),
                                       true});
                    params_.push_back(
                        {prefix + "decoder.out.bias", Tensor::zeros({out_units}, true), true});
                }
            },
            cfg_.layers[li]);
    }
}

ForwardResult Model::forward(const Tensor& x, bool training, Prng* dropout_rng,
                             const std::vector<int>* labels) const {
    if (x.rank() != 4 || x.dim(1) != cfg_.input_channels || x.dim(2) != cfg_.input_side ||
        x.dim(3) != cfg_.input_side)
        throw UsageError("model forward: expected [N," + std::to_string(cfg_.input_channels) +
                         "," + std::to_string(cfg_.input_side) + "," +
                         std::to_string(cfg_.input_side) + "], got " + shape_str(x.shape()));
    ForwardResult fr;
    fr.input = x;
    Tensor h = x;
    size_t pi = 0;  // parameter cursor, in construction order
    auto next_param = [&pi, this](const char* what) -> const Tensor& {
        if (pi >= params_.size()) throw UsageError(std::string("parameter walk bug at ") + what);
        return params_[pi++].tensor;
    };
    int conv_tap = 0;
    const int n = x.dim(0);

    for (size_t li = 0; li < cfg_.layers.size(); ++li) {
        std::visit(
            [&](const auto& spec) {
                using T = std::decay_t<decltype(spec)>;
                if constexpr (std::is_same_v<T, NttSpec>) {
                    const Tensor& lowpass = next_param("ntt.lowpass");
                    const Tensor& weight = next_param("ntt.weight");
                    h = depthwise_conv2d(h, lowpass, 1, Padding::kSame);
                    h = depthwise_conv2d(h, weight, 1, Padding::kSame);
                    fr.taps.emplace_back("ntt", h);
                } else if constexpr (std::is_same_v<T, ConvSpec>) {
                    const Tensor& weight = next_param("conv.weight");
                    const Tensor& bias = next_param("conv.bias");
                    h = add_channel_bias(conv2d(h, weight, spec.stride, spec.pad), bias);
                    h = apply_activation(h, spec.act);
                    ++conv_tap;
                    fr.taps.emplace_back("conv" + std::to_string(conv_tap), h);
                } else if constexpr (std::is_same_v<T, MaxPoolSpec>) {
                    h = max_pool2d(h, spec.kernel);
                } else if constexpr (std::is_same_v<T, DenseSpec>) {
                    if (h.rank() == 4)
                        h = reshape(h, {n, static_cast<int>(h.size() / n)});
                    const Tensor& weight = next_param("dense.weight");
                    const Tensor& bias = next_param("dense.bias");
                    h = apply_activation(add_rowvec(matmul_nt(h, weight), bias), spec.act);
                } else if constexpr (std::is_same_v<T, DropoutSpec>) {
                    if (training) {
                        if (!dropout_rng)
                            throw UsageError("model forward: dropout needs an rng in training");
                        h = dropout(h, spec.rate, *dropout_rng).first;
                    }
                } else if constexpr (std::is_same_v<T, PrimaryCapsSpec>) {
                    const Tensor& weight = next_param("primary_caps.weight");
                    const Tensor& bias = next_param("primary_caps.bias");
                    h = add_channel_bias(conv2d(h, weight, spec.stride, spec.pad), bias);
                    h = squash(primary_caps_reshape(h, spec.types, spec.dim));
                } else if constexpr (std::is_same_v<T, ClassCapsSpec>) {
                    const Tensor& weight = next_param("class_caps.weight");
                    Tensor u_hat = caps_transform(h, weight);
                    fr.class_caps = dynamic_routing(u_hat, spec.routing_iters);
                    fr.lengths = l2_norm(fr.class_caps, 2);
                    h = fr.lengths;
                } else if constexpr (std::is_same_v<T, DecoderSpec>) {
                    std::vector<int> selected;
                    if (labels) {
                        selected = *labels;
                    } else {
                        // decode the argmax capsule when no labels are given
                        const auto& lv = fr.lengths.data();
                        selected.resize(static_cast<size_t>(n));
                        for (int b = 0; b < n; ++b) {
                            int best = 0;
                            for (int cls = 1; cls < classes_; ++cls)
                                if (lv[static_cast<size_t>(b) * classes_ + cls] >
                                    lv[static_cast<size_t>(b) * classes_ + best])
                                    best = cls;
                            selected[static_cast<size_t>(b)] = best;
                        }
                    }
                    Tensor d = mask_class_caps(fr.class_caps, selected);
                    for (size_t fi = 0; fi < spec.hidden.size(); ++fi) {
                        const Tensor& weight = next_param("decoder.fc.weight");
                        const Tensor& bias = next_param("decoder.fc.bias");
                        d = relu(add_rowvec(matmul_nt(d, weight), bias));
                    }
                    const Tensor& out_w = next_param("decoder.out.weight");
                    const Tensor& out_b = next_param("decoder.out.bias");
                    d = sigmoid(add_rowvec(matmul_nt(d, out_w), out_b));
                    fr.reconstruction =
                        reshape(d, {n, cfg_.input_channels, cfg_.input_side, cfg_.input_side});
                }
            },
            cfg_.layers[li]);
    }

    if (cfg_.loss == LossKind::kCrossEntropy) {
        fr.logits = h;
        fr.scores = softmax(h, 1);
    } else {
        fr.scores = fr.lengths;
    }
    return fr;
}

Tensor Model::loss(const ForwardResult& fr, const std::vector<int>& labels) const {
    switch (cfg_.loss) {
        case LossKind::kCrossEntropy:
            return softmax_cross_entropy(fr.logits, labels);
        case LossKind::kMargin:
            return margin_loss(fr.lengths, labels);
        case LossKind::kMarginRecon: {
            if (!fr.reconstruction.defined())
                throw UsageError("model loss: reconstruction missing from forward result");
            Tensor margin = margin_loss(fr.lengths, labels);
            const int n = fr.input.dim(0);
            Tensor recon = scale(sum_squared_error(fr.reconstruction, fr.input),
                                 cfg_.recon_weight / static_cast<double>(n));
            return add(margin, recon);
        }
    }
    throw UsageError("model loss: unknown loss kind");
}

std::vector<std::vector<float>> Model::predict(const Tensor& x) const {
    const ForwardResult fr = forward(x);
    const int n = x.dim(0);
    std::vector<std::vector<float>> out(static_cast<size_t>(n));
    const auto& sv = fr.scores.data();
    for (int b = 0; b < n; ++b)
        out[static_cast<size_t>(b)] =
            std::vector<float>(sv.begin() + static_cast<int64_t>(b) * classes_,
                               sv.begin() + static_cast<int64_t>(b + 1) * classes_);
    return out;
}

Tensor Model::feature_extract(const std::string& tag, const Tensor& x) const {
    const ForwardResult fr = forward(x);
    if (tag == "last_conv") {
        for (auto it = fr.taps.rbegin(); it != fr.taps.rend(); ++it)
            if (it->first.rfind("conv", 0) == 0) return it->second;
        throw UsageError("feature_extract: model has no conv layers");
    }
    for (const auto& [name, tensor] : fr.taps)
        if (name == tag) return tensor;
    throw UsageError("feature_extract: unknown tag '" + tag + "'");
}

std::vector<Tensor> Model::trainable_params() {
    std::vector<Tensor> out;
    for (auto& p : params_)
        if (p.trainable) out.push_back(p.tensor);
    return out;
}

int64_t Model::trainable_parameter_count() const {
    int64_t total = 0;
    for (const auto& p : params_)
        if (p.trainable) total += p.tensor.size();
    return total;
}

namespace {
constexpr char kCkptMagic[8] = {'D', 'G', 'B', 'N', 'C', 'K', 'P', '1'};

void write_u32(std::ofstream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t read_u32(std::ifstream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
}  // namespace

void Model::save_weights(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out.write(kCkptMagic, 8);
    write_u32(out, 1);  // version
    write_u32(out, static_cast<uint32_t>(params_.size()));
    for (const auto& p : params_) {
        write_u32(out, static_cast<uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        const auto& shape = p.tensor.shape();
        write_u32(out, static_cast<uint32_t>(shape.size()));
        for (int d : shape) write_u32(out, static_cast<uint32_t>(d));
        const auto& data = p.tensor.data();
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size() * sizeof(float)));
    }
    if (!out) throw DataError("short write: " + path);
}

void Model::load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCkptMagic, 8) != 0)
        throw DataError("bad checkpoint magic: " + path);
    const uint32_t version = read_u32(in);
    if (version != 1) throw DataError("unsupported checkpoint version in " + path);
    const uint32_t count = read_u32(in);
    if (count != params_.size())
        throw DataError("checkpoint layer count mismatch in " + path);
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const uint32_t rank = read_u32(in);
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<int>(read_u32(in));
        auto it = std::find_if(params_.begin(), params_.end(),
                               [&name](const ParamEntry& p) { return p.name == name; });
        if (it == params_.end()) throw DataError("unknown parameter '" + name + "' in " + path);
        if (it->tensor.shape() != shape)
            throw DataError("shape mismatch for '" + name + "' in " + path);
        auto& data = it->tensor.raw_data();
        in.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(data.size() * sizeof(float)));
        if (!in) throw DataError("truncated checkpoint: " + path);
    }
}

Model Model::load(const std::string& config_path, const std::string& weights_path) {
    Model model(load_config(config_path), /*seed=*/0);
    model.load_weights(weights_path);
    return model;
}

}  // namespace degbench
