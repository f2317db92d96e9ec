#include "dmmv/autodiff.hpp"

#include "dmmv/errors.hpp"

#include <unordered_set>

namespace dmmv::ad {

namespace {
thread_local bool g_grad_enabled = true;
} // namespace

Tensor& Node::input_grad(std::size_t i) {
    Node& in = *inputs[i];
    if (in.grad.data.size() != in.value.data.size()) in.grad = Tensor(in.value.shape, 0.0);
    return in.grad;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var constant(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    return Var(std::move(node));
}

Var param(Parameter& p) {
    auto node = std::make_shared<Node>();
    node->value = p.value;
    node->param = &p;
    node->requires_grad = g_grad_enabled && p.trainable;
    return Var(std::move(node));
}

Var detach(const Var& x) { return constant(x.value()); }

void backward(const Var& loss, double seed) {
    if (!loss.defined() || loss.numel() != 1) {
        throw NotScalarLoss("backward needs a one-element loss, got shape " +
                            (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
    }
    Node* root = loss.node();
    if (!root->requires_grad) return;

    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
    seen.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : order) n->grad = Tensor();
    root->grad = Tensor(root->value.shape, seed);

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->grad.data.empty()) continue;
        if (n->backward_fn) n->backward_fn(*n);
        if (n->param && n->param->trainable) {
            auto& dst = n->param->grad.data;
            const auto& src = n->grad.data;
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
    }
}

} // namespace dmmv::ad
