#include "previts/model.hpp"

#include <cmath>
#include <stdexcept>

namespace previts {

namespace {

const char* kConvNames[3] = {"conv1", "conv2", "conv3"};

void check_config(const EncoderConfig& c) {
    if (c.frames < 1 || c.size < 8 || c.hidden < 1 || c.proj_dim < 1 || c.speed_dim < 1) {
        throw std::invalid_argument("encoder config: non-positive dimension");
    }
    const Shape s = c.conv5_shape();
    for (int d : s) {
        if (d < 1) throw std::invalid_argument("encoder config: input too small for the conv stack");
    }
}

}  // namespace

Conv3dGeometry EncoderConfig::block(int i) const {
    Conv3dGeometry g;
    const int ss = spatial_stride[static_cast<std::size_t>(i)];
    g.stride = {temporal_stride[static_cast<std::size_t>(i)], ss, ss};
    g.pad = {1, ss == 1 ? 1 : 0, ss == 1 ? 1 : 0};
    return g;
}

Shape EncoderConfig::conv5_shape() const {
    Shape s = input_shape();
    for (int i = 0; i < 3; ++i) s = block(i).output_shape(s, channels[static_cast<std::size_t>(i)]);
    return s;
}

std::string EncoderConfig::arch_string() const {
    std::string s = "conv3d-v1 in=" + std::to_string(frames) + "x" + std::to_string(size) + " ch=";
    for (int i = 0; i < 3; ++i) {
        s += std::to_string(channels[static_cast<std::size_t>(i)]) + "/" +
             std::to_string(temporal_stride[static_cast<std::size_t>(i)]) + "," +
             std::to_string(spatial_stride[static_cast<std::size_t>(i)]) + " ";
    }
    s += "hidden=" + std::to_string(hidden) + " proj=" + std::to_string(proj_dim);
    s += " speed=" + (speed_head ? std::to_string(speed_dim) : std::string("off"));
    s += bias ? " bias" : " nobias";
    return s;
}

std::uint64_t EncoderConfig::arch_hash() const { return fnv1a(arch_string()); }

std::ptrdiff_t EncoderParams::parameter_count() const {
    std::ptrdiff_t n = 0;
    for (const auto& [_, t] : tensors) n += t.numel();
    return n;
}

bool EncoderParams::finite() const {
    for (const auto& [_, t] : tensors) {
        if (!t.data.allFinite()) return false;
    }
    return true;
}

EncoderParams zero_params(const EncoderConfig& config) {
    check_config(config);
    EncoderParams p{config, {}};
    int in = 3;
    for (int i = 0; i < 3; ++i) {
        const int out = config.channels[static_cast<std::size_t>(i)];
        p.tensors[std::string(kConvNames[i]) + ".w"] = Tensor({out, in, 3, 3, 3});
        if (config.bias) p.tensors[std::string(kConvNames[i]) + ".b"] = Tensor({out});
        in = out;
    }
    p.tensors["head.fc1.w"] = Tensor({in, config.hidden});
    p.tensors["head.fc2.w"] = Tensor({config.hidden, config.proj_dim});
    if (config.bias) {
        p.tensors["head.fc1.b"] = Tensor({1, config.hidden});
        p.tensors["head.fc2.b"] = Tensor({1, config.proj_dim});
    }
    if (config.speed_head) {
        p.tensors["speed.fc.w"] = Tensor({in, config.speed_dim});
        if (config.bias) p.tensors["speed.fc.b"] = Tensor({1, config.speed_dim});
    }
    return p;
}

EncoderParams init_params(const EncoderConfig& config, Rng& rng) {
    EncoderParams p = zero_params(config);
    for (auto& [name, t] : p.tensors) {
        if (name.size() < 2 || name.compare(name.size() - 2, 2, ".w") != 0) continue;
        // He initialisation over the fan-in.
        const double fan_in = static_cast<double>(t.numel()) / (t.shape.size() == 5 ? t.shape[0] : t.shape[1]);
        const double std = std::sqrt(2.0 / fan_in);
        for (auto& v : t.data) v = std * rng.normal();
    }
    return p;
}

Tensor clip_to_tensor(const FrameVolume& clip) {
    Tensor out({3, clip.t, clip.h, clip.w});
    const std::ptrdiff_t plane = std::ptrdiff_t{clip.t} * clip.h * clip.w;
    for (std::ptrdiff_t i = 0; i < plane; ++i) {
        for (int c = 0; c < 3; ++c) out.data[c * plane + i] = clip.pixels[i * 3 + c];
    }
    return out;
}

ParamVars ParamVars::leaves(const EncoderParams& params, bool requires_grad) {
    ParamVars pv;
    for (const auto& [name, t] : params.tensors) {
        pv.vars.emplace(name, requires_grad ? ad::parameter(t) : ad::constant(t));
    }
    return pv;
}

ForwardGraph forward(const ParamVars& p, const EncoderConfig& config, const ad::Var& input) {
    if (input.shape() != config.input_shape()) {
        throw std::invalid_argument("encoder expects input " + shape_str(config.input_shape()) + ", got " +
                                    shape_str(input.shape()));
    }
    ad::Var a = input;
    for (int i = 0; i < 3; ++i) {
        const std::string name = kConvNames[i];
        a = ad::conv3d(a, p[name + ".w"], config.block(i));
        if (config.bias) a = ad::add(a, ad::broadcast_positions(p[name + ".b"], a.shape()));
        a = ad::relu(a);
    }
    ForwardGraph g;
    g.conv5 = a;
    const int channels = a.shape()[0];
    const double positions = static_cast<double>(a.numel() / channels);
    g.pooled = ad::reshape(ad::scale(ad::reduce_positions(a), 1.0 / positions), {1, channels});

    ad::Var h = ad::matmul(g.pooled, p["head.fc1.w"]);
    if (config.bias) h = ad::add(h, p["head.fc1.b"]);
    h = ad::relu(h);
    ad::Var z = ad::matmul(h, p["head.fc2.w"]);
    if (config.bias) z = ad::add(z, p["head.fc2.b"]);
    g.embedding = ad::l2_normalize(ad::reshape(z, {config.proj_dim}));

    if (config.speed_head) {
        ad::Var s = ad::matmul(g.pooled, p["speed.fc.w"]);
        if (config.bias) s = ad::add(s, p["speed.fc.b"]);
        g.speed_embedding = ad::l2_normalize(ad::reshape(s, {config.speed_dim}));
    } else {
        g.speed_embedding = g.embedding;
    }
    return g;
}

EncodeResult encode(const EncoderParams& params, const FrameVolume& clip) {
    ad::NoGradGuard guard;
    const ForwardGraph g =
        forward(ParamVars::leaves(params, false), params.config, ad::constant(clip_to_tensor(clip)));
    EncodeResult r;
    r.embedding = g.embedding.value().data.matrix();
    r.speed_embedding = g.speed_embedding.value().data.matrix();
    r.pooled = g.pooled.value().data.matrix();
    r.conv5 = g.conv5.value();
    return r;
}

std::vector<EncodeResult> encode_batch(const EncoderParams& params, const std::vector<FrameVolume>& clips) {
    std::vector<EncodeResult> out;
    out.reserve(clips.size());
    for (const auto& c : clips) out.push_back(encode(params, c));
    return out;
}

NegativeQueue::NegativeQueue(int capacity, int dim)
    : capacity_(capacity), dim_(dim), buffer_(MatrixX<>::Zero(capacity, dim)) {
    if (capacity < 1 || dim < 1) throw std::invalid_argument("queue capacity and dim must be positive");
}

void NegativeQueue::fill_random(Rng& rng) {
    for (int i = 0; i < capacity_; ++i) {
        VectorX<> v(dim_);
        for (int j = 0; j < dim_; ++j) v[j] = rng.normal();
        buffer_.row(i) = v.normalized().transpose();
    }
    head_ = 0;
    size_ = capacity_;
}

void NegativeQueue::enqueue(const MatrixX<>& rows) {
    if (rows.cols() != dim_) throw std::invalid_argument("queue: embedding dim mismatch");
    for (int i = 0; i < rows.rows(); ++i) {
        if (std::abs(rows.row(i).norm() - 1.0) > 1e-5) {
            throw std::invalid_argument("queue: embedding is not unit-norm");
        }
    }
    for (int i = 0; i < rows.rows(); ++i) {
        buffer_.row(head_) = rows.row(i);
        head_ = (head_ + 1) % capacity_;
        size_ = std::min(size_ + 1, capacity_);
    }
}

void NegativeQueue::enqueue(const VectorX<>& row) { enqueue(MatrixX<>(row.transpose())); }

MatrixX<> NegativeQueue::negatives() const {
    MatrixX<> out(size_, dim_);
    const int start = size_ < capacity_ ? 0 : head_;
    for (int i = 0; i < size_; ++i) out.row(i) = buffer_.row((start + i) % capacity_);
    return out;
}

void NegativeQueue::restore(MatrixX<> buffer, int head, int size) {
    if (buffer.rows() != capacity_ || buffer.cols() != dim_ || head < 0 || head >= capacity_ || size < 0 ||
        size > capacity_) {
        throw std::invalid_argument("queue restore: inconsistent state");
    }
    buffer_ = std::move(buffer);
    head_ = head;
    size_ = size;
}

EncoderState init_state(const EncoderConfig& config, double momentum, int queue_size, Rng& rng) {
    EncoderState s;
    s.theta_q = init_params(config, rng);
    s.theta_k = s.theta_q;
    s.momentum = momentum;
    s.queue = NegativeQueue(queue_size, config.proj_dim);
    s.queue.fill_random(rng);
    return s;
}

void momentum_update(EncoderState& state) {
    const double m = state.momentum;
    if (!(m >= 0.0 && m <= 1.0)) throw std::invalid_argument("momentum must lie in [0, 1]");
    for (auto& [name, tk] : state.theta_k.tensors) {
        const Tensor& tq = state.theta_q.tensors.at(name);
        if (m == 1.0) continue;
        if (m == 0.0) {
            tk.data = tq.data;
        } else {
            tk.data = m * tk.data + (1.0 - m) * tq.data;
        }
    }
}

}  // namespace previts
