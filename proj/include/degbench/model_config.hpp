#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "degbench/ops.hpp"

namespace degbench {

enum class Activation { kLinear, kRelu, kSigmoid };
enum class LossKind { kCrossEntropy, kMargin, kMarginRecon };

// NTT: frozen depthwise average followed by a trainable depthwise layer,
// both k x k, depth 1 per channel, linear, stride 1, 'same' padding. Always
// the first layer, active in training and inference.
struct NttSpec {
    int filter_size = 7;
};
struct ConvSpec {
    int filters = 8;
    int kernel = 3;
    int stride = 1;
    Padding pad = Padding::kSame;
    Activation act = Activation::kRelu;
};
struct MaxPoolSpec {
    int kernel = 2;
};
struct DenseSpec {
    int units = 10;
    Activation act = Activation::kLinear;
};
struct DropoutSpec {
    double rate = 0.5;
};
struct PrimaryCapsSpec {
    int types = 32;
    int dim = 8;
    int kernel = 9;
    int stride = 2;
    Padding pad = Padding::kValid;
};
struct ClassCapsSpec {
    int classes = 10;
    int dim = 16;
    int routing_iters = 3;
};
// Fully connected decoder reconstructing the input from the masked class
// capsules; hidden layers are relu, the output layer sigmoid.
struct DecoderSpec {
    std::vector<int> hidden = {512, 1024};
};

using LayerSpec = std::variant<NttSpec, ConvSpec, MaxPoolSpec, DenseSpec, DropoutSpec,
                               PrimaryCapsSpec, ClassCapsSpec, DecoderSpec>;

struct ModelConfig {
    std::string id = "model";
    int input_side = 32;
    int input_channels = 3;
    std::vector<LayerSpec> layers;
    LossKind loss = LossKind::kCrossEntropy;
    double recon_weight = 0.0;  // weight on the reconstruction SSE (per sample)
};

// Walks the layer chain and throws UsageError on incompatible shapes,
// misplaced NTT/decoder, or a missing classification head.
void validate_config(const ModelConfig& cfg);

int config_classes(const ModelConfig& cfg);
bool config_is_capsule(const ModelConfig& cfg);
int64_t parameter_count(const ModelConfig& cfg);

// ---- builders ----

struct CapsnetOptions {
    int conv1_filters = 256;
    int conv2_filters = 256;
    int conv_kernel = 9;
    int primary_types = 32;
    int primary_dim = 8;
    int primary_kernel = 9;
    int primary_stride = 2;
    int class_dim = 16;
    std::vector<int> decoder_hidden = {512, 1024};
};

// Two generic conv layers, a primary capsule layer, one class-capsule layer,
// and an optional 3-FC decoder with margin(+reconstruction) loss.
ModelConfig build_capsnet(int input_side, int classes, int routing_iters, bool with_decoder,
                          const CapsnetOptions& opt = {});

struct VCapsMiniOptions {
    int base_filters = 16;
    int max_filters = 128;
    double dropout = 0.8;
    int primary_types = 32;
    int primary_dim = 8;
    int primary_kernel = 3;
    int primary_stride = 2;
    int class_dim = 16;
    int routing_iters = 3;
};

// VGG-pattern backbone (two 3x3 convs + pool per block, doubling filters,
// then the first conv of the next block), dropout, capsule head, margin loss
// only, no decoder.
ModelConfig build_vcapsnet_mini(int input_side, int classes, int backbone_blocks,
                                const VCapsMiniOptions& opt = {});

enum class CnnDepth { kShallow, kDeep };

ModelConfig build_small_cnn(int input_side, int classes, CnnDepth depth);

// Prepends the frozen-average + trainable-delta depthwise pair.
ModelConfig attach_ntt(const ModelConfig& cfg, int filter_size);
ModelConfig strip_ntt(const ModelConfig& cfg);
bool has_ntt(const ModelConfig& cfg);

// Published filter sizes for the known input sizes, proportional fallback
// elsewhere (always odd, >= 3).
int ntt_default_filter_size(int input_side);

std::string serialize_config(const ModelConfig& cfg);
ModelConfig parse_config_text(const std::string& text);
void save_config(const std::string& path, const ModelConfig& cfg);
ModelConfig load_config(const std::string& path);

}  // namespace degbench
