#include "degbench/model_config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "degbench/error.hpp"

namespace degbench {

namespace {

struct ShapeWalk {
    bool flat = false;
    int c = 0, h = 0, w = 0;  // spatial mode
    int units = 0;            // flat mode
    int caps = 0, cap_dim = 0;
    bool has_caps_out = false;
    int classes = -1;
    bool capsule_head = false;
};

ShapeWalk walk_shapes(const ModelConfig& cfg) {
    if (cfg.input_side < 1 || cfg.input_channels != 3)
        throw UsageError("model config: input must be side>=1 with 3 channels");
    ShapeWalk s;
    s.c = cfg.input_channels;
    s.h = s.w = cfg.input_side;
    bool past_head = false;
    for (size_t li = 0; li < cfg.layers.size(); ++li) {
        const auto& layer = cfg.layers[li];
        if (past_head && !std::holds_alternative<DecoderSpec>(layer))
            throw UsageError("model config: layers after the class-capsule head");
        std::visit(
            [&](const auto& spec) {
                using T = std::decay_t<decltype(spec)>;
                if constexpr (std::is_same_v<T, NttSpec>) {
                    if (li != 0) throw UsageError("model config: ntt layer must come first");
                    if (spec.filter_size < 1 || spec.filter_size % 2 == 0)
                        throw UsageError("model config: ntt filter size must be odd");
                } else if constexpr (std::is_same_v<T, ConvSpec>) {
                    if (s.flat) throw UsageError("model config: conv after flatten");
                    const auto d =
                        conv2d_dims(s.h, s.w, spec.kernel, spec.kernel, spec.stride, spec.pad);
                    s.c = spec.filters;
                    s.h = d.out_h;
                    s.w = d.out_w;
                } else if constexpr (std::is_same_v<T, MaxPoolSpec>) {
                    if (s.flat) throw UsageError("model config: pool after flatten");
                    if (s.h / spec.kernel < 1 || s.w / spec.kernel < 1)
                        throw UsageError("model config: pool window exceeds feature map");
                    s.h /= spec.kernel;
                    s.w /= spec.kernel;
                } else if constexpr (std::is_same_v<T, DenseSpec>) {
                    if (!s.flat) {
                        s.units = s.c * s.h * s.w;
                        s.flat = true;
                    }
                    s.units = spec.units;
                    s.classes = spec.units;  // last dense defines the head
                } else if constexpr (std::is_same_v<T, DropoutSpec>) {
                    if (spec.rate < 0.0 || spec.rate >= 1.0)
                        throw UsageError("model config: dropout rate must be in [0,1)");
                } else if constexpr (std::is_same_v<T, PrimaryCapsSpec>) {
                    if (s.flat) throw UsageError("model config: capsules after flatten");
                    if (s.h < spec.kernel || s.w < spec.kernel)
                        throw UsageError("model config: feature map smaller than " +
                                         std::to_string(spec.kernel) + "x" +
                                         std::to_string(spec.kernel) + " at the capsule head");
                    const auto d =
                        conv2d_dims(s.h, s.w, spec.kernel, spec.kernel, spec.stride, spec.pad);
                    s.caps = spec.types * d.out_h * d.out_w;
                    s.cap_dim = spec.dim;
                    s.h = d.out_h;
                    s.w = d.out_w;
                    s.has_caps_out = true;
                } else if constexpr (std::is_same_v<T, ClassCapsSpec>) {
                    if (!s.has_caps_out)
                        throw UsageError("model config: class capsules need primary capsules");
                    s.classes = spec.classes;
                    s.caps = spec.classes;
                    s.cap_dim = spec.dim;
                    s.capsule_head = true;
                    past_head = true;
                } else if constexpr (std::is_same_v<T, DecoderSpec>) {
                    if (!s.capsule_head)
                        throw UsageError("model config: decoder needs a class-capsule head");
                    if (li + 1 != cfg.layers.size())
                        throw UsageError("model config: decoder must be the last layer");
                }
            },
            layer);
    }
    if (s.classes < 1) throw UsageError("model config: no classification head");
    if (s.capsule_head && cfg.loss == LossKind::kCrossEntropy)
        throw UsageError("model config: capsule head requires a margin loss");
    if (!s.capsule_head && cfg.loss != LossKind::kCrossEntropy)
        throw UsageError("model config: margin loss requires a capsule head");
    int ntt_count = 0;
    for (const auto& layer : cfg.layers)
        if (std::holds_alternative<NttSpec>(layer)) ++ntt_count;
    if (ntt_count > 1) throw UsageError("model config: at most one ntt layer");
    return s;
}

}  // namespace

void validate_config(const ModelConfig& cfg) { (void)walk_shapes(cfg); }

int config_classes(const ModelConfig& cfg) { return walk_shapes(cfg).classes; }

bool config_is_capsule(const ModelConfig& cfg) { return walk_shapes(cfg).capsule_head; }

int64_t parameter_count(const ModelConfig& cfg) {
    int64_t total = 0;
    int c = cfg.input_channels, h = cfg.input_side, w = cfg.input_side;
    bool flat = false;
    int64_t units = 0;
    int caps = 0, cap_dim = 0;
    int classes = 0, class_dim = 0;
    for (const auto& layer : cfg.layers) {
        std::visit(
            [&](const auto& spec) {
                using T = std::decay_t<decltype(spec)>;
                if constexpr (std::is_same_v<T, NttSpec>) {
                    // trainable depthwise only; the frozen average is not a parameter
                    total += static_cast<int64_t>(c) * spec.filter_size * spec.filter_size;
                } else if constexpr (std::is_same_v<T, ConvSpec>) {
                    total += static_cast<int64_t>(spec.filters) * c * spec.kernel * spec.kernel +
                             spec.filters;
                    const auto d =
                        conv2d_dims(h, w, spec.kernel, spec.kernel, spec.stride, spec.pad);
                    c = spec.filters;
                    h = d.out_h;
                    w = d.out_w;
                } else if constexpr (std::is_same_v<T, MaxPoolSpec>) {
                    h /= spec.kernel;
                    w /= spec.kernel;
                } else if constexpr (std::is_same_v<T, DenseSpec>) {
                    if (!flat) {
                        units = static_cast<int64_t>(c) * h * w;
                        flat = true;
                    }
                    total += static_cast<int64_t>(spec.units) * units + spec.units;
                    units = spec.units;
                } else if constexpr (std::is_same_v<T, PrimaryCapsSpec>) {
                    const int filters = spec.types * spec.dim;
                    total += static_cast<int64_t>(filters) * c * spec.kernel * spec.kernel +
                             filters;
                    const auto d =
                        conv2d_dims(h, w, spec.kernel, spec.kernel, spec.stride, spec.pad);
                    h = d.out_h;
                    w = d.out_w;
                    caps = spec.types * h * w;
                    cap_dim = spec.dim;
                    c = filters;
                } else if constexpr (std::is_same_v<T, ClassCapsSpec>) {
                    total += static_cast<int64_t>(caps) * spec.classes * spec.dim * cap_dim;
                    classes = spec.classes;
                    class_dim = spec.dim;
                } else if constexpr (std::is_same_v<T, DecoderSpec>) {
                    int64_t in = static_cast<int64_t>(classes) * class_dim;
                    for (int hsize : spec.hidden) {
                        total += in * hsize + hsize;
                        in = hsize;
                    }
                    const int64_t out =
                        static_cast<int64_t>(cfg.input_channels) * cfg.input_side * cfg.input_side;
                    total += in * out + out;
                }
            },
            layer);
    }
    return total;
}

ModelConfig build_capsnet(int input_side, int classes, int routing_iters, bool with_decoder,
                          const CapsnetOptions& opt) {
    if (input_side < 28)
        throw UsageError("build_capsnet: input side must be >= 28, got " +
                         std::to_string(input_side));
    if (classes < 2) throw UsageError("build_capsnet: need at least 2 classes");
    ModelConfig cfg;
    cfg.id = "capsnet";
    cfg.input_side = input_side;
    cfg.layers.push_back(
        ConvSpec{opt.conv1_filters, opt.conv_kernel, 1, Padding::kValid, Activation::kRelu});
    cfg.layers.push_back(
        ConvSpec{opt.conv2_filters, opt.conv_kernel, 2, Padding::kValid, Activation::kRelu});
    cfg.layers.push_back(PrimaryCapsSpec{opt.primary_types, opt.primary_dim, opt.primary_kernel,
                                         opt.primary_stride, Padding::kValid});
    cfg.layers.push_back(ClassCapsSpec{classes, opt.class_dim, routing_iters});
    if (with_decoder) {
        cfg.layers.push_back(DecoderSpec{opt.decoder_hidden});
        cfg.loss = LossKind::kMarginRecon;
        // keep the reconstruction term at the weight the routing reference
        // used for its 784-pixel inputs, rescaled to this input size
        cfg.recon_weight =
            0.0005 * 784.0 / (static_cast<double>(input_side) * input_side * 3.0);
    } else {
        cfg.loss = LossKind::kMargin;
    }
    validate_config(cfg);
    return cfg;
}

ModelConfig build_vcapsnet_mini(int input_side, int classes, int backbone_blocks,
                                const VCapsMiniOptions& opt) {
    if (backbone_blocks < 2)
        throw UsageError("build_vcapsnet_mini: need at least 2 backbone blocks");
    if (classes < 2) throw UsageError("build_vcapsnet_mini: need at least 2 classes");
    ModelConfig cfg;
    cfg.id = "vcaps_mini";
    cfg.input_side = input_side;
    int filters = opt.base_filters;
    for (int b = 0; b < backbone_blocks; ++b) {
        cfg.layers.push_back(ConvSpec{filters, 3, 1, Padding::kSame, Activation::kRelu});
        cfg.layers.push_back(ConvSpec{filters, 3, 1, Padding::kSame, Activation::kRelu});
        cfg.layers.push_back(MaxPoolSpec{2});
        filters = std::min(filters * 2, opt.max_filters);
    }
    // first conv of the next block, as the backbone cutoff
    cfg.layers.push_back(ConvSpec{filters, 3, 1, Padding::kSame, Activation::kRelu});
    cfg.layers.push_back(DropoutSpec{opt.dropout});
    cfg.layers.push_back(PrimaryCapsSpec{opt.primary_types, opt.primary_dim, opt.primary_kernel,
                                         opt.primary_stride, Padding::kValid});
    cfg.layers.push_back(ClassCapsSpec{classes, opt.class_dim, opt.routing_iters});
    cfg.loss = LossKind::kMargin;
    validate_config(cfg);  // rejects feature maps smaller than the capsule kernel
    return cfg;
}

ModelConfig build_small_cnn(int input_side, int classes, CnnDepth depth) {
    if (classes < 2) throw UsageError("build_small_cnn: need at least 2 classes");
    ModelConfig cfg;
    cfg.input_side = input_side;
    cfg.loss = LossKind::kCrossEntropy;
    if (depth == CnnDepth::kShallow) {
        cfg.id = "cnn_shallow";
        cfg.layers.push_back(ConvSpec{8, 3, 1, Padding::kSame, Activation::kRelu});
        cfg.layers.push_back(MaxPoolSpec{2});
        cfg.layers.push_back(ConvSpec{16, 3, 1, Padding::kSame, Activation::kRelu});
        cfg.layers.push_back(MaxPoolSpec{2});
    } else {
        cfg.id = "cnn_deep";
        int filters = 8;
        for (int b = 0; b < 3; ++b) {
            cfg.layers.push_back(ConvSpec{filters, 3, 1, Padding::kSame, Activation::kRelu});
            cfg.layers.push_back(ConvSpec{filters, 3, 1, Padding::kSame, Activation::kRelu});
            cfg.layers.push_back(MaxPoolSpec{2});
            filters *= 2;
        }
    }
    cfg.layers.push_back(DenseSpec{64, Activation::kRelu});
    cfg.layers.push_back(DenseSpec{classes, Activation::kLinear});
    validate_config(cfg);
    return cfg;
}

ModelConfig attach_ntt(const ModelConfig& cfg, int filter_size) {
    if (has_ntt(cfg)) throw UsageError("attach_ntt: model already has an ntt layer");
    if (filter_size < 1 || filter_size % 2 == 0)
        throw UsageError("attach_ntt: filter size must be odd and positive");
    ModelConfig out = cfg;
    out.layers.insert(out.layers.begin(), NttSpec{filter_size});
    validate_config(out);
    return out;
}

ModelConfig strip_ntt(const ModelConfig& cfg) {
    if (!has_ntt(cfg)) throw UsageError("strip_ntt: model has no ntt layer");
    ModelConfig out = cfg;
    out.layers.erase(out.layers.begin());
    return out;
}

bool has_ntt(const ModelConfig& cfg) {
    return !cfg.layers.empty() && std::holds_alternative<NttSpec>(cfg.layers.front());
}

int ntt_default_filter_size(int input_side) {
    switch (input_side) {
        case 104: return 7;
        case 224: return 21;
        case 256: return 23;
        case 299: return 23;
        default: break;
    }
    int k = static_cast<int>(std::lround(input_side / 12.0));
    if (k % 2 == 0) ++k;
    return std::max(k, 3);
}

namespace {

const char* act_name(Activation a) {
    switch (a) {
        case Activation::kLinear: return "linear";
        case Activation::kRelu: return "relu";
        case Activation::kSigmoid: return "sigmoid";
    }
    return "linear";
}

Activation act_from(const std::string& s) {
    if (s == "linear") return Activation::kLinear;
    if (s == "relu") return Activation::kRelu;
    if (s == "sigmoid") return Activation::kSigmoid;
    throw UsageError("unknown activation: " + s);
}

const char* pad_name(Padding p) { return p == Padding::kSame ? "same" : "valid"; }

Padding pad_from(const std::string& s) {
    if (s == "same") return Padding::kSame;
    if (s == "valid") return Padding::kValid;
    throw UsageError("unknown padding: " + s);
}

const char* loss_name(LossKind l) {
    switch (l) {
        case LossKind::kCrossEntropy: return "cross_entropy";
        case LossKind::kMargin: return "margin";
        case LossKind::kMarginRecon: return "margin_recon";
    }
    return "cross_entropy";
}

LossKind loss_from(const std::string& s) {
    if (s == "cross_entropy") return LossKind::kCrossEntropy;
    if (s == "margin") return LossKind::kMargin;
    if (s == "margin_recon") return LossKind::kMarginRecon;
    throw UsageError("unknown loss: " + s);
}

std::map<std::string, std::string> parse_kv(std::istringstream& in) {
    std::map<std::string, std::string> kv;
    std::string token;
    while (in >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) throw UsageError("malformed layer attribute: " + token);
        kv[token.substr(0, eq)] = token.substr(eq + 1);
    }
    return kv;
}

int kv_int(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw UsageError("missing layer attribute: " + key);
    return std::stoi(it->second);
}

}  // namespace

std::string serialize_config(const ModelConfig& cfg) {
    std::ostringstream os;
    os << "id=" << cfg.id << "\n";
    os << "input_side=" << cfg.input_side << "\n";
    os << "input_channels=" << cfg.input_channels << "\n";
    os << "loss=" << loss_name(cfg.loss) << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", cfg.recon_weight);
    os << "recon_weight=" << buf << "\n";
    for (const auto& layer : cfg.layers) {
        std::visit(
            [&os](const auto& spec) {
                using T = std::decay_t<decltype(spec)>;
                if constexpr (std::is_same_v<T, NttSpec>) {
                    os << "layer=ntt filter_size=" << spec.filter_size << "\n";
                } else if constexpr (std::is_same_v<T, ConvSpec>) {
                    os << "layer=conv filters=" << spec.filters << " kernel=" << spec.kernel
                       << " stride=" << spec.stride << " pad=" << pad_name(spec.pad)
                       << " act=" << act_name(spec.act) << "\n";
                } else if constexpr (std::is_same_v<T, MaxPoolSpec>) {
                    os << "layer=maxpool kernel=" << spec.kernel << "\n";
                } else if constexpr (std::is_same_v<T, DenseSpec>) {
                    os << "layer=dense units=" << spec.units << " act=" << act_name(spec.act)
                       << "\n";
                } else if constexpr (std::is_same_v<T, DropoutSpec>) {
                    char rb[32];
                    std::snprintf(rb, sizeof(rb), "%.17g", spec.rate);
                    os << "layer=dropout rate=" << rb << "\n";
                } else if constexpr (std::is_same_v<T, PrimaryCapsSpec>) {
                    os << "layer=primary_caps types=" << spec.types << " dim=" << spec.dim
                       << " kernel=" << spec.kernel << " stride=" << spec.stride
                       << " pad=" << pad_name(spec.pad) << "\n";
                } else if constexpr (std::is_same_v<T, ClassCapsSpec>) {
                    os << "layer=class_caps classes=" << spec.classes << " dim=" << spec.dim
                       << " routing=" << spec.routing_iters << "\n";
                } else if constexpr (std::is_same_v<T, DecoderSpec>) {
                    os << "layer=decoder hidden=";
                    for (size_t i = 0; i < spec.hidden.size(); ++i)
                        os << (i ? "," : "") << spec.hidden[i];
                    os << "\n";
                }
            },
            layer);
    }
    return os.str();
}

ModelConfig parse_config_text(const std::string& text) {
    ModelConfig cfg;
    cfg.layers.clear();
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError("malformed config line: " + line);
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "id") {
            cfg.id = value;
        } else if (key == "input_side") {
            cfg.input_side = std::stoi(value);
        } else if (key == "input_channels") {
            cfg.input_channels = std::stoi(value);
        } else if (key == "loss") {
            cfg.loss = loss_from(value);
        } else if (key == "recon_weight") {
            cfg.recon_weight = std::stod(value);
        } else if (key == "layer") {
            std::istringstream in(value);
            std::string kind;
            in >> kind;
            auto kv = parse_kv(in);
            if (kind == "ntt") {
                cfg.layers.push_back(NttSpec{kv_int(kv, "filter_size")});
            } else if (kind == "conv") {
                cfg.layers.push_back(ConvSpec{kv_int(kv, "filters"), kv_int(kv, "kernel"),
                                              kv_int(kv, "stride"), pad_from(kv.at("pad")),
                                              act_from(kv.at("act"))});
            } else if (kind == "maxpool") {
                cfg.layers.push_back(MaxPoolSpec{kv_int(kv, "kernel")});
            } else if (kind == "dense") {
                cfg.layers.push_back(DenseSpec{kv_int(kv, "units"), act_from(kv.at("act"))});
            } else if (kind == "dropout") {
                cfg.layers.push_back(DropoutSpec{std::stod(kv.at("rate"))});
            } else if (kind == "primary_caps") {
                cfg.layers.push_back(PrimaryCapsSpec{kv_int(kv, "types"), kv_int(kv, "dim"),
                                                     kv_int(kv, "kernel"), kv_int(kv, "stride"),
                                                     pad_from(kv.at("pad"))});
            } else if (kind == "class_caps") {
                cfg.layers.push_back(ClassCapsSpec{kv_int(kv, "classes"), kv_int(kv, "dim"),
                                                   kv_int(kv, "routing")});
            } else if (kind == "decoder") {
                DecoderSpec d;
                d.hidden.clear();
                std::istringstream hs(kv.at("hidden"));
                std::string tok;
                while (std::getline(hs, tok, ',')) d.hidden.push_back(std::stoi(tok));
                cfg.layers.push_back(std::move(d));
            } else {
                throw UsageError("unknown layer kind: " + kind);
            }
        } else {
            throw UsageError("unknown config key: " + key);
        }
    }
    validate_config(cfg);
    return cfg;
}

void save_config(const std::string& path, const ModelConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << serialize_config(cfg);
    if (!out) throw DataError("short write: " + path);
}

ModelConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

}  // namespace degbench
