#pragma once

// Training objective: InfoNCE over a negative queue, the playback-speed triplet,
// Grad-CAM over the query encoder's last conv block, and the cosine attention loss
// against the interpolated query mask.

#include "previts/model.hpp"
#include "previts/sampler.hpp"

#include <map>
#include <string>
#include <vector>

namespace previts {

// -log( exp(q.k/tau) / sum_{n in N ∪ {k}} exp(q.n/tau) ). Rows of `negatives` are
// the queue entries; the positive is always part of the denominator.
double moco_loss(const VectorX<>& q, const VectorX<>& k, const MatrixX<>& negatives, double tau);
ad::Var moco_loss(const ad::Var& q, const VectorX<>& k, const MatrixX<>& negatives, double tau);

// max(0, gamma - (pair_pos - pair_neg))
double speed_loss(double pair_pos, double pair_neg, double gamma);
ad::Var speed_loss(const ad::Var& pair_pos, const ad::Var& pair_neg, double gamma);

// x_k * M_k per frame and channel.
FrameVolume mask_key_foreground(const FrameVolume& x_k, const MaskVolume& m_k);

// Grad-CAM map over conv5, shape (t', h', w'); entries are >= 0.
struct AttentionMap {
    Tensor grid;
};

// Interpolated query mask, shape (t', h', w'), entries in [0, 1].
struct PseudoMask {
    Tensor grid;
};

struct GradCamGraph {
    ad::Var alpha;  // [c] channel importances
    ad::Var map;    // [t', h', w'] after ReLU
};

// alpha = mean over conv5 positions of d(q . k_m)/dA; map = ReLU(sum_c alpha_c A_c).
// With create_graph the result stays differentiable with respect to the encoder
// parameters (double backprop); otherwise alpha enters as a constant.
GradCamGraph gradcam_graph(const ForwardGraph& query, const VectorX<>& key_foreground, bool create_graph);

// Throws std::runtime_error if the gradients are not finite.
AttentionMap gradcam(const EncoderParams& theta_q, const FrameVolume& x_q, const VectorX<>& key_foreground);
VectorX<> gradcam_alpha(const EncoderParams& theta_q, const FrameVolume& x_q, const VectorX<>& key_foreground);

// Area-average downsampling of a binary volume to (t', h', w'). Throws
// std::invalid_argument when any target extent exceeds the source.
PseudoMask interpolate_mask(const MaskVolume& mask, const Shape& target);

struct AttentionLossValue {
    double value = 1.0;
    bool degenerate = false;  // one of the grids was all zero; value fixed at 1
};

// 1 - <G, M> / (|G| |M|) on flattened grids.
AttentionLossValue attention_loss(const AttentionMap& g, const PseudoMask& m);
ad::Var attention_loss(const ad::Var& g, const PseudoMask& m, bool& degenerate);

struct ObjectiveConfig {
    double tau = 0.07;
    double gamma = 0.15;
    double lambda = 3.0;
    // Treat the Grad-CAM channel weights as constants (no second-order term).
    bool detach_alpha = false;
};

struct LossBreakdown {
    double l_moco = 0.0, l_speed = 0.0, l_att = 0.0, lambda = 0.0, total = 0.0;
    int degenerate = 0;  // samples whose Grad-CAM map was all zero
};

struct TrainingBatch {
    std::vector<ClipPair> pairs;          // augmented views with their masks
    std::vector<SpeedTriplet> triplets;   // may be empty
};

struct ObjectiveResult {
    LossBreakdown losses;
    std::map<std::string, Tensor> grads;  // d total / d theta_q (batch mean)
    MatrixX<> keys;                       // key embeddings, one row per pair
};

// Batch-mean L = L_moco + L_speed + lambda * L_att and, if requested, its gradient
// with respect to theta_q. Key-side encodings use theta_k without gradients.
ObjectiveResult total_loss(const TrainingBatch& batch, const EncoderState& state, const ObjectiveConfig& config,
                           bool compute_grads = true);

}  // namespace previts
