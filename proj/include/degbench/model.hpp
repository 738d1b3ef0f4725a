#pragma once

#include <string>
#include <utility>
#include <vector>

#include "degbench/image.hpp"
#include "degbench/model_config.hpp"
#include "degbench/prng.hpp"
#include "degbench/tensor.hpp"

namespace degbench {

struct ForwardResult {
    Tensor input;           // the graph leaf the batch went in through
    Tensor scores;          // [N, classes]: softmax probs or capsule lengths
    Tensor logits;          // CE models only
    Tensor lengths;         // capsule models only
    Tensor class_caps;      // capsule models only, [N, classes, dim]
    Tensor reconstruction;  // decoder models only, [N, C, H, W]
    std::vector<std::pair<std::string, Tensor>> taps;  // conv outputs by tag
};

// A config instantiated with parameters. Forward builds a fresh tape each
// call; the parameter tensors are shared leaves, so inference on a frozen
// model is safe from multiple threads while training mutates them
// exclusively.
class Model {
public:
    Model(ModelConfig cfg, uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    int classes() const { return classes_; }

    // labels drive the decoder mask (and must be present when training a
    // decoder model); at inference the argmax capsule is decoded instead.
    ForwardResult forward(const Tensor& x, bool training = false, Prng* dropout_rng = nullptr,
                          const std::vector<int>* labels = nullptr) const;

    // Builds the configured loss on top of a forward result.
    Tensor loss(const ForwardResult& fr, const std::vector<int>& labels) const;

    std::vector<std::vector<float>> predict(const Tensor& x) const;

    // Post-activation maps of the tagged conv layer ("conv1".."convN" or
    // "last_conv") as a [N, C, h, w] tensor.
    Tensor feature_extract(const std::string& tag, const Tensor& x) const;

    struct ParamEntry {
        std::string name;
        Tensor tensor;
        bool trainable = true;
    };

    std::vector<Tensor> trainable_params();
    const std::vector<ParamEntry>& all_params() const { return params_; }
    int64_t trainable_parameter_count() const;

    void save_weights(const std::string& path) const;
    void load_weights(const std::string& path);
    static Model load(const std::string& config_path, const std::string& weights_path);

private:
    ModelConfig cfg_;
    int classes_ = 0;
    std::vector<ParamEntry> params_;
};

}  // namespace degbench
