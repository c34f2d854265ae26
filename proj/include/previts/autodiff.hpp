#pragma once

// Reverse-mode automatic differentiation over dense tensors.
//
// Every backward rule is itself expressed with the ops below, so the gradients
// returned by grad(..., create_graph = true) are ordinary graph values that can be
// differentiated again. This is what the Grad-CAM attention loss needs: its map is
// built from a gradient, and training differentiates through that gradient.

#include "previts/conv_kernels.hpp"
#include "previts/tensor.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace previts::ad {

class Var;

using BackwardFn = std::function<std::vector<Var>(const Var& grad, const std::vector<bool>& need)>;

struct Node {
    Tensor value;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    BackwardFn backward;
    const char* op = "leaf";
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    bool defined() const { return node_ != nullptr; }
    const Tensor& value() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape; }
    std::ptrdiff_t numel() const { return node_->value.numel(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    Scalar item() const;
    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// Gradients of `output` (a one-element tensor unless `seed` is given) with respect to
// each of `inputs`. Inputs may be intermediate values. Inputs that do not influence
// the output receive zeros.
std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs, bool create_graph = false,
                      const Var& seed = {});

// Leaves
Var constant(Tensor value);
Var parameter(Tensor value);
Var scalar(Scalar value);

// Elementwise
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, Scalar factor);
Var add_scalar(const Var& a, Scalar value);
Var relu(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var reciprocal(const Var& a);

// Shape and reductions
Var reshape(const Var& a, Shape shape);
Var sum(const Var& a);
Var expand(const Var& scalar_value, Shape shape);
Var mean(const Var& a);
Var dot(const Var& a, const Var& b);

// [C, ...] tensors viewed as C rows of P positions.
Var reduce_positions(const Var& a);
Var broadcast_positions(const Var& per_channel, Shape shape);
Var reduce_channels(const Var& a);
Var broadcast_channels(const Var& per_position, int channels);

// Matrices are rank-2 row-major tensors.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

Var conv3d(const Var& x, const Var& w, const Conv3dGeometry& g);
Var conv3d_input_grad(const Var& grad_out, const Var& w, const Conv3dGeometry& g, Shape input_shape);
Var conv3d_weight_grad(const Var& x, const Var& grad_out, const Conv3dGeometry& g, Shape weight_shape);

// Composites
Var l2_normalize(const Var& a);
Var norm(const Var& a);

}  // namespace previts::ad
