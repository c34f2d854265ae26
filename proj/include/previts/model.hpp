#pragma once

// Small 3D-convolutional query/key encoder pair with a projection head, an
// optional speed head, and a fixed-size queue of negative key embeddings.

#include "previts/autodiff.hpp"
#include "previts/rng.hpp"
#include "previts/video.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace previts {

struct EncoderConfig {
    int frames = 4;
    int size = 32;
    std::array<int, 3> channels{8, 16, 32};
    std::array<int, 3> spatial_stride{2, 2, 1};
    std::array<int, 3> temporal_stride{1, 2, 1};
    int hidden = 32;
    int proj_dim = 32;
    int speed_dim = 16;
    bool speed_head = true;
    bool bias = true;

    // Geometry of conv block i (kernel 3, temporal pad 1, spatial pad 1 only when
    // the spatial stride is 1).
    Conv3dGeometry block(int i) const;
    Shape input_shape() const { return {3, frames, size, size}; }
    Shape conv5_shape() const;
    std::string arch_string() const;
    std::uint64_t arch_hash() const;
};

// Named parameter tensors; iteration order is the map's (stable) key order.
struct EncoderParams {
    EncoderConfig config;
    std::map<std::string, Tensor> tensors;

    std::ptrdiff_t parameter_count() const;
    bool finite() const;
};

EncoderParams init_params(const EncoderConfig& config, Rng& rng);
EncoderParams zero_params(const EncoderConfig& config);

// Layout conversion (t, h, w, 3) -> [3, t, h, w].
Tensor clip_to_tensor(const FrameVolume& clip);

struct EncodeResult {
    VectorX<> embedding;  // unit norm
    VectorX<> speed_embedding;  // unit norm; the main embedding when the speed head is off
    VectorX<> pooled;     // global average of conv5
    Tensor conv5;         // [c, t', h', w']
};

// Graph-level forward pass over parameter variables.
struct ParamVars {
    std::map<std::string, ad::Var> vars;
    const ad::Var& operator[](const std::string& name) const { return vars.at(name); }
    // Parameters as differentiable leaves (requires_grad) or constants.
    static ParamVars leaves(const EncoderParams& params, bool requires_grad);
};

struct ForwardGraph {
    ad::Var conv5, pooled, embedding, speed_embedding;
};

ForwardGraph forward(const ParamVars& params, const EncoderConfig& config, const ad::Var& input);

// Inference forward; throws std::invalid_argument on a clip shape mismatch.
EncodeResult encode(const EncoderParams& params, const FrameVolume& clip);
std::vector<EncodeResult> encode_batch(const EncoderParams& params, const std::vector<FrameVolume>& clips);

class NegativeQueue {
public:
    NegativeQueue() = default;
    NegativeQueue(int capacity, int dim);

    // Fills the whole buffer with random unit vectors.
    void fill_random(Rng& rng);

    // Rows must have unit L2 norm (within 1e-5); throws std::invalid_argument otherwise.
    void enqueue(const MatrixX<>& rows);
    void enqueue(const VectorX<>& row);

    // Current contents, oldest first.
    MatrixX<> negatives() const;

    int capacity() const { return capacity_; }
    int dim() const { return dim_; }
    int size() const { return size_; }
    int head() const { return head_; }

    const MatrixX<>& buffer() const { return buffer_; }
    void restore(MatrixX<> buffer, int head, int size);

private:
    int capacity_ = 0, dim_ = 0, head_ = 0, size_ = 0;
    MatrixX<> buffer_;
};

struct EncoderState {
    EncoderParams theta_q, theta_k;
    double momentum = 0.99;
    NegativeQueue queue;
};

EncoderState init_state(const EncoderConfig& config, double momentum, int queue_size, Rng& rng);

// theta_k <- m * theta_k + (1 - m) * theta_q
void momentum_update(EncoderState& state);

}  // namespace previts
