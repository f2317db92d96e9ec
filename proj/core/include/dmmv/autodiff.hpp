#pragma once

// Minimal reverse-mode differentiation over dense tensors. A forward pass
// builds a DAG of Nodes; backward() walks it in reverse topological order
// and accumulates gradients into the Parameters that were used as leaves.

#include "dmmv/parameter.hpp"
#include "dmmv/tensor.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace dmmv::ad {

struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward_fn;
    Parameter* param = nullptr;
    bool requires_grad = false;

    /// Lazily sized gradient buffer of an input.
    Tensor& input_grad(std::size_t i);
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    const Tensor& value() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape; }
    std::size_t numel() const { return node_->value.numel(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool defined() const { return static_cast<bool>(node_); }

    /// Gradient after backward(); zeros when the node was not reached.
    const Tensor& grad() const { return node_->grad; }

    Node* node() const { return node_.get(); }
    const std::shared_ptr<Node>& shared() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// Recording switch for the current thread. Outside recording every Var is a
/// plain value and no backward closures are kept.
bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

Var constant(Tensor value);
/// Leaf bound to a parameter. Gradients flow only when the parameter is
/// trainable and recording is enabled.
Var param(Parameter& p);

/// Seeds d(loss)/d(loss) = 1 and accumulates into every trainable Parameter
/// reachable from `loss`. Throws NotScalarLoss for non-scalar input.
void backward(const Var& loss, double seed = 1.0);

/// Same value, cut from the graph.
Var detach(const Var& x);

// ---- forward op set -------------------------------------------------------

Var matmul(const Var& a, const Var& b);
/// x[m,in] * W[out,in]^T (+ b[out]).
Var linear(const Var& x, const Var& weight, const Var& bias);
Var linear(const Var& x, const Var& weight);

/// Same shapes, a bias row broadcast over rows, or a one-element b.
Var add(const Var& a, const Var& b);
/// Same element count.
Var sub(const Var& a, const Var& b);
/// Same shapes or a one-element b.
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

Var transpose(const Var& a);
Var reshape(const Var& a, Shape shape);
Var slice_rows(const Var& a, std::size_t begin, std::size_t end);
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);

/// out.flat[i] = a.flat[index[i]]; covers permutations, crops and patching.
Var gather(const Var& a, std::shared_ptr<const std::vector<std::size_t>> index, Shape out_shape);
Var gather_rows(const Var& a, std::span<const std::size_t> rows);
/// Copy of `base` with row rows[i] replaced by row i of `values`.
Var overwrite_rows(const Var& base, const Var& values, std::span<const std::size_t> rows);
Var repeat_rows(const Var& row, std::size_t count);
/// Elementwise pick: take_b[i] ? b : a.
Var select(const Var& a, const Var& b, std::shared_ptr<const std::vector<std::uint8_t>> take_b);

Var sum(const Var& a);
Var mean(const Var& a);
Var softmax(const Var& a);
Var gelu(const Var& a);
Var sigmoid(const Var& a);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-6);
Var mse(const Var& pred, const Var& target);

} // namespace dmmv::ad
