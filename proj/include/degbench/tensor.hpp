#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace degbench {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense float32 tensor with reverse-mode autodiff. Tensors are immutable once
// produced by an op; `Tensor` is a cheap shared handle onto the tape node.
class Tensor {
public:
    struct Node {
        Shape shape;
        std::vector<float> value;
        std::vector<float> grad;  // allocated lazily, same length as value
        bool requires_grad = false;
        std::vector<std::shared_ptr<Node>> parents;
        // Propagates node.grad into parents' grads.
        std::function<void(Node&)> backprop;

        void ensure_grad() {
            if (grad.empty()) grad.assign(value.size(), 0.0f);
        }
    };

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float fill, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<float> data, bool requires_grad = false);
    static Tensor scalar(float v);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int64_t size() const { return static_cast<int64_t>(node_->value.size()); }
    int dim(int axis) const { return node_->shape[static_cast<size_t>(axis)]; }
    int rank() const { return static_cast<int>(node_->shape.size()); }

    const std::vector<float>& data() const { return node_->value; }
    // Direct mutation is reserved for parameter setup and optimizer updates.
    std::vector<float>& raw_data() { return node_->value; }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool rg) { node_->requires_grad = rg; }

    bool has_grad() const { return !node_->grad.empty(); }
    const std::vector<float>& grad() const;
    void zero_grad() { node_->grad.clear(); }

    float item() const;

    std::shared_ptr<Node> node() const { return node_; }
    static Tensor wrap(std::shared_ptr<Node> node);

private:
    std::shared_ptr<Node> node_;
};

// Runs reverse-mode accumulation from a scalar loss. Every tensor on the tape
// that requires grad receives d(loss)/d(tensor) in its grad buffer.
void backward(const Tensor& loss);

}  // namespace degbench
