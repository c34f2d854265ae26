#include "previts/autodiff.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace previts::ad {

namespace {

thread_local bool g_grad_enabled = true;

Var make(Tensor value, std::vector<Var> inputs, BackwardFn backward, const char* op) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->op = op;
    if (g_grad_enabled) {
        const bool any = std::any_of(inputs.begin(), inputs.end(),
                                     [](const Var& v) { return v.requires_grad(); });
        if (any) {
            node->requires_grad = true;
            node->backward = std::move(backward);
            node->parents.reserve(inputs.size());
            for (const auto& v : inputs) node->parents.push_back(v.node());
        }
    }
    return Var(std::move(node));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    }
}

std::ptrdiff_t positions_of(const Shape& s) {
    return s.empty() ? 1 : shape_numel(s) / s[0];
}

Shape tail(const Shape& s) { return Shape(s.begin() + 1, s.end()); }

}  // namespace

Scalar Var::item() const {
    if (numel() != 1) throw std::logic_error("item() on tensor of shape " + shape_str(shape()));
    return node_->value.data[0];
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs, bool create_graph, const Var& seed) {
    if (!seed.defined() && output.numel() != 1) {
        throw std::invalid_argument("grad: non-scalar output requires an explicit seed");
    }
    std::unordered_set<const Node*> input_set;
    for (const auto& v : inputs) input_set.insert(v.node().get());

    // Post-order DFS: parents precede children in `order`.
    std::vector<Node*> order;
    std::unordered_map<const Node*, bool> needed;
    if (output.requires_grad()) {
        std::vector<std::pair<Node*, std::size_t>> stack{{output.node().get(), 0}};
        std::unordered_set<const Node*> visited{output.node().get()};
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < node->parents.size()) {
                Node* p = node->parents[next++].get();
                if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
                continue;
            }
            bool need = input_set.count(node) > 0;
            for (const auto& p : node->parents) {
                auto it = needed.find(p.get());
                need = need || (it != needed.end() && it->second);
            }
            needed[node] = need;
            order.push_back(node);
            stack.pop_back();
        }
    }

    std::unordered_map<const Node*, Var> grads;
    {
        NoGradGuard guard;
        grads[output.node().get()] =
            seed.defined() ? seed : constant(Tensor::constant(output.shape(), Scalar(1)));
    }

    auto run = [&] {
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node* node = *it;
            if (!needed[node] || node->parents.empty()) continue;
            auto g = grads.find(node);
            if (g == grads.end()) continue;
            std::vector<bool> need(node->parents.size());
            bool any = false;
            for (std::size_t i = 0; i < need.size(); ++i) {
                auto pn = needed.find(node->parents[i].get());
                need[i] = pn != needed.end() && pn->second;
                any = any || need[i];
            }
            if (!any) continue;
            const Var upstream = g->second;
            std::vector<Var> pg = node->backward(upstream, need);
            for (std::size_t i = 0; i < need.size(); ++i) {
                if (!need[i] || !pg[i].defined()) continue;
                const Node* parent = node->parents[i].get();
                auto slot = grads.find(parent);
                if (slot == grads.end()) {
                    grads.emplace(parent, pg[i]);
                } else {
                    slot->second = add(slot->second, pg[i]);
                }
            }
        }
    };
    if (create_graph) {
        run();
    } else {
        NoGradGuard guard;
        run();
    }

    std::vector<Var> result;
    result.reserve(inputs.size());
    for (const auto& v : inputs) {
        auto it = grads.find(v.node().get());
        if (it != grads.end()) {
            result.push_back(it->second);
        } else {
            NoGradGuard guard;
            result.push_back(constant(Tensor::zeros(v.shape())));
        }
    }
    return result;
}

Var constant(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->op = "constant";
    return Var(std::move(node));
}

Var parameter(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = true;
    node->op = "parameter";
    return Var(std::move(node));
}

Var scalar(Scalar value) { return constant(Tensor::constant({1}, value)); }

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    Tensor out(a.shape(), a.value().data + b.value().data);
    return make(std::move(out), {a, b},
                [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{g, g}; }, "add");
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    Tensor out(a.shape(), a.value().data - b.value().data);
    return make(std::move(out), {a, b},
                [](const Var& g, const std::vector<bool>& need) {
                    return std::vector<Var>{g, need[1] ? neg(g) : Var{}};
                },
                "sub");
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    Tensor out(a.shape(), a.value().data * b.value().data);
    return make(std::move(out), {a, b},
                [a, b](const Var& g, const std::vector<bool>& need) {
                    return std::vector<Var>{need[0] ? mul(g, b) : Var{}, need[1] ? mul(g, a) : Var{}};
                },
                "mul");
}

Var neg(const Var& a) { return scale(a, Scalar(-1)); }

Var scale(const Var& a, Scalar factor) {
    Tensor out(a.shape(), a.value().data * factor);
    return make(std::move(out), {a},
                [factor](const Var& g, const std::vector<bool>&) { return std::vector<Var>{scale(g, factor)}; },
                "scale");
}

Var add_scalar(const Var& a, Scalar value) {
    Tensor out(a.shape(), a.value().data + value);
    return make(std::move(out), {a}, [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{g}; },
                "add_scalar");
}

Var relu(const Var& a) {
    Tensor out(a.shape(), a.value().data.max(Scalar(0)));
    return make(std::move(out), {a},
                [a](const Var& g, const std::vector<bool>&) {
                    // The second derivative of ReLU vanishes almost everywhere, so the
                    // gate can enter the graph as a constant.
                    Tensor gate(a.shape(), (a.value().data > Scalar(0)).cast<Scalar>());
                    return std::vector<Var>{mul(g, constant(std::move(gate)))};
                },
                "relu");
}

Var exp(const Var& a) {
    Tensor out(a.shape(), a.value().data.exp());
    return make(std::move(out), {a},
                [a](const Var& g, const std::vector<bool>&) { return std::vector<Var>{mul(g, exp(a))}; }, "exp");
}

Var log(const Var& a) {
    Tensor out(a.shape(), a.value().data.log());
    return make(std::move(out), {a},
                [a](const Var& g, const std::vector<bool>&) { return std::vector<Var>{mul(g, reciprocal(a))}; },
                "log");
}

Var sqrt(const Var& a) {
    Tensor out(a.shape(), a.value().data.sqrt());
    return make(std::move(out), {a},
                [a](const Var& g, const std::vector<bool>&) {
                    return std::vector<Var>{scale(mul(g, reciprocal(sqrt(a))), Scalar(0.5))};
                },
                "sqrt");
}

Var reciprocal(const Var& a) {
    Tensor out(a.shape(), a.value().data.inverse());
    return make(std::move(out), {a},
                [a](const Var& g, const std::vector<bool>&) {
                    const Var r = reciprocal(a);
                    return std::vector<Var>{neg(mul(g, mul(r, r)))};
                },
                "reciprocal");
}

Var reshape(const Var& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw std::invalid_argument("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape));
    }
    Shape original = a.shape();
    Tensor out(std::move(shape), a.value().data);
    return make(std::move(out), {a},
                [original](const Var& g, const std::vector<bool>&) { return std::vector<Var>{reshape(g, original)}; },
                "reshape");
}

Var sum(const Var& a) {
    Tensor out({1}, ArrayX<>::Constant(1, a.value().data.sum()));
    Shape original = a.shape();
    return make(std::move(out), {a},
                [original](const Var& g, const std::vector<bool>&) { return std::vector<Var>{expand(g, original)}; },
                "sum");
}

Var expand(const Var& scalar_value, Shape shape) {
    if (scalar_value.numel() != 1) throw std::invalid_argument("expand expects a one-element tensor");
    Tensor out = Tensor::constant(std::move(shape), scalar_value.value().data[0]);
    return make(std::move(out), {scalar_value},
                [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{sum(g)}; }, "expand");
}

Var mean(const Var& a) { return scale(sum(a), Scalar(1) / static_cast<Scalar>(a.numel())); }

Var dot(const Var& a, const Var& b) { return sum(mul(a, b)); }

Var reduce_positions(const Var& a) {
    const int channels = a.shape().at(0);
    const std::ptrdiff_t p = positions_of(a.shape());
    Eigen::Map<const MatrixX<>> m(a.value().data.data(), p, channels);
    Tensor out({channels}, m.colwise().sum().transpose().array());
    Shape original = a.shape();
    return make(std::move(out), {a},
                [original](const Var& g, const std::vector<bool>&) {
                    return std::vector<Var>{broadcast_positions(g, original)};
                },
                "reduce_positions");
}

Var broadcast_positions(const Var& per_channel, Shape shape) {
    const int channels = shape.at(0);
    if (per_channel.numel() != channels) {
        throw std::invalid_argument("broadcast_positions: " + shape_str(per_channel.shape()) + " into " +
                                    shape_str(shape));
    }
    const std::ptrdiff_t p = positions_of(shape);
    Tensor out(shape);
    Eigen::Map<MatrixX<>>(out.data.data(), p, channels).rowwise() = per_channel.value().data.matrix().transpose();
    Shape original = per_channel.shape();
    return make(std::move(out), {per_channel},
                [original](const Var& g, const std::vector<bool>&) {
                    return std::vector<Var>{reshape(reduce_positions(g), original)};
                },
                "broadcast_positions");
}

Var reduce_channels(const Var& a) {
    const int channels = a.shape().at(0);
    const std::ptrdiff_t p = positions_of(a.shape());
    Eigen::Map<const MatrixX<>> m(a.value().data.data(), p, channels);
    Tensor out(tail(a.shape()), m.rowwise().sum().array());
    return make(std::move(out), {a},
                [channels](const Var& g, const std::vector<bool>&) {
                    return std::vector<Var>{broadcast_channels(g, channels)};
                },
                "reduce_channels");
}

Var broadcast_channels(const Var& per_position, int channels) {
    Shape shape{channels};
    shape.insert(shape.end(), per_position.shape().begin(), per_position.shape().end());
    const std::ptrdiff_t p = per_position.numel();
    Tensor out(shape);
    Eigen::Map<MatrixX<>>(out.data.data(), p, channels).colwise() = per_position.value().data.matrix();
    return make(std::move(out), {per_position},
                [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{reduce_channels(g)}; },
                "broadcast_channels");
}

Var matmul(const Var& a, const Var& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
        throw std::invalid_argument("matmul " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    // Row-major A (m×k) is column-major A^T (k×m); C^T = B^T A^T.
    Eigen::Map<const MatrixX<>> at(a.value().data.data(), k, m);
    Eigen::Map<const MatrixX<>> bt(b.value().data.data(), n, k);
    Tensor out({m, n});
    Eigen::Map<MatrixX<>>(out.data.data(), n, m).noalias() = bt * at;
    return make(std::move(out), {a, b},
                [a, b](const Var& g, const std::vector<bool>& need) {
                    return std::vector<Var>{need[0] ? matmul(g, transpose(b)) : Var{},
                                            need[1] ? matmul(transpose(a), g) : Var{}};
                },
                "matmul");
}

Var transpose(const Var& a) {
    if (a.shape().size() != 2) throw std::invalid_argument("transpose expects a matrix");
    const int m = a.shape()[0], n = a.shape()[1];
    Eigen::Map<const MatrixX<>> at(a.value().data.data(), n, m);
    Tensor out({n, m});
    Eigen::Map<MatrixX<>>(out.data.data(), m, n) = at.transpose();
    return make(std::move(out), {a},
                [](const Var& g, const std::vector<bool>&) { return std::vector<Var>{transpose(g)}; }, "transpose");
}

Var conv3d(const Var& x, const Var& w, const Conv3dGeometry& g) {
    Tensor out = conv3d_forward(x.value(), w.value(), g);
    return make(std::move(out), {x, w},
                [x, w, g](const Var& grad_out, const std::vector<bool>& need) {
                    return std::vector<Var>{
                        need[0] ? conv3d_input_grad(grad_out, w, g, x.shape()) : Var{},
                        need[1] ? conv3d_weight_grad(x, grad_out, g, w.shape()) : Var{}};
                },
                "conv3d");
}

Var conv3d_input_grad(const Var& grad_out, const Var& w, const Conv3dGeometry& g, Shape input_shape) {
    Tensor out = previts::conv3d_input_grad(grad_out.value(), w.value(), g, input_shape);
    return make(std::move(out), {grad_out, w},
                [grad_out, w, g](const Var& gg, const std::vector<bool>& need) {
                    return std::vector<Var>{need[0] ? conv3d(gg, w, g) : Var{},
                                            need[1] ? conv3d_weight_grad(gg, grad_out, g, w.shape()) : Var{}};
                },
                "conv3d_input_grad");
}

Var conv3d_weight_grad(const Var& x, const Var& grad_out, const Conv3dGeometry& g, Shape weight_shape) {
    Tensor out = previts::conv3d_weight_grad(x.value(), grad_out.value(), g, weight_shape);
    return make(std::move(out), {x, grad_out},
                [x, grad_out, g](const Var& gg, const std::vector<bool>& need) {
                    return std::vector<Var>{need[0] ? conv3d_input_grad(grad_out, gg, g, x.shape()) : Var{},
                                            need[1] ? conv3d(x, gg, g) : Var{}};
                },
                "conv3d_weight_grad");
}

Var norm(const Var& a) { return sqrt(dot(a, a)); }

Var l2_normalize(const Var& a) { return mul(a, expand(reciprocal(norm(a)), a.shape())); }

}  // namespace previts::ad
