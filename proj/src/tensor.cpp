#include "degbench/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "degbench/error.hpp"

namespace degbench {

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::full(Shape shape, float fill, bool requires_grad) {
    auto node = std::make_shared<Node>();
    node->value.assign(static_cast<size_t>(shape_numel(shape)), fill);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return wrap(std::move(node));
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data, bool requires_grad) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
        throw UsageError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(data);
    node->requires_grad = requires_grad;
    return wrap(std::move(node));
}

Tensor Tensor::scalar(float v) { return from_data({1}, {v}); }

Tensor Tensor::wrap(std::shared_ptr<Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
}

const std::vector<float>& Tensor::grad() const {
    if (node_->grad.empty()) throw UsageError("tensor has no gradient (run backward first)");
    return node_->grad;
}

float Tensor::item() const {
    if (size() != 1) throw UsageError("item() requires a scalar tensor, got " + shape_str(shape()));
    return node_->value[0];
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw UsageError("backward requires a scalar loss tensor");

    // Iterative post-order DFS; closures run in reverse topological order.
    std::vector<Tensor::Node*> order;
    std::unordered_set<Tensor::Node*> seen;
    std::vector<std::pair<Tensor::Node*, size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (next_child < node->parents.size()) {
            Tensor::Node* child = node->parents[next_child++].get();
            if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad();
    loss.node()->grad[0] = 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor::Node* node = *it;
        if (node->backprop && !node->grad.empty()) node->backprop(*node);
    }
}

}  // namespace degbench
