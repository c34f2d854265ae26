#include "previts/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace previts {

namespace {

Tensor vector_tensor(const VectorX<>& v) { return Tensor({static_cast<int>(v.size())}, v.array()); }

void check_tau(double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
}

// 1-D overlap weights between `out` equal cells and `in` unit source cells.
MatrixX<> area_weights(int in, int out) {
    MatrixX<> w = MatrixX<>::Zero(out, in);
    const double cell = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        const double lo = o * cell, hi = (o + 1) * cell;
        for (int i = static_cast<int>(std::floor(lo)); i < std::min(in, static_cast<int>(std::ceil(hi))); ++i) {
            const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
            if (overlap > 0) w(o, i) = overlap / cell;
        }
    }
    return w;
}

}  // namespace

double moco_loss(const VectorX<>& q, const VectorX<>& k, const MatrixX<>& negatives, double tau) {
    check_tau(tau);
    const double pos = q.dot(k) / tau;
    double m = pos;
    VectorX<> neg;
    if (negatives.rows() > 0) {
        neg = negatives * q / tau;
        m = std::max(m, neg.maxCoeff());
    }
    double denom = std::exp(pos - m);
    if (neg.size() > 0) denom += (neg.array() - m).exp().sum();
    return m + std::log(denom) - pos;
}

ad::Var moco_loss(const ad::Var& q, const VectorX<>& k, const MatrixX<>& negatives, double tau) {
    check_tau(tau);
    const int d = static_cast<int>(k.size());
    const ad::Var pos = ad::scale(ad::dot(q, ad::constant(vector_tensor(k))), 1.0 / tau);
    double m = pos.item();
    ad::Var denom = ad::exp(ad::add_scalar(pos, -m));
    if (negatives.rows() > 0) {
        // Row-major [d, K] holds N^T; its column-major view is N itself.
        const int n = static_cast<int>(negatives.rows());
        Tensor nt({d, n});
        Eigen::Map<MatrixX<>>(nt.data.data(), n, d) = negatives;
        const ad::Var neg = ad::scale(ad::matmul(ad::reshape(q, {1, d}), ad::constant(std::move(nt))), 1.0 / tau);
        const double neg_max = neg.value().data.maxCoeff();
        if (neg_max > m) {
            m = neg_max;
            denom = ad::exp(ad::add_scalar(pos, -m));
        }
        denom = ad::add(denom, ad::sum(ad::exp(ad::add_scalar(neg, -m))));
    }
    return ad::sub(ad::add_scalar(ad::log(denom), m), pos);
}

double speed_loss(double pair_pos, double pair_neg, double gamma) {
    return std::max(0.0, gamma - (pair_pos - pair_neg));
}

ad::Var speed_loss(const ad::Var& pair_pos, const ad::Var& pair_neg, double gamma) {
    return ad::relu(ad::add_scalar(ad::neg(ad::sub(pair_pos, pair_neg)), gamma));
}

FrameVolume mask_key_foreground(const FrameVolume& x_k, const MaskVolume& m_k) {
    if (x_k.t != m_k.t || x_k.h != m_k.h || x_k.w != m_k.w) {
        throw std::invalid_argument("mask_key_foreground: clip and mask dims differ");
    }
    FrameVolume out = x_k;
    for (int k = 0; k < x_k.t; ++k)
        for (int y = 0; y < x_k.h; ++y)
            for (int x = 0; x < x_k.w; ++x) {
                const float m = m_k.frames[static_cast<std::size_t>(k)](y, x) ? 1.0f : 0.0f;
                for (int c = 0; c < 3; ++c) out.at(k, y, x, c) *= m;
            }
    return out;
}

GradCamGraph gradcam_graph(const ForwardGraph& query, const VectorX<>& key_foreground, bool create_graph) {
    const ad::Var& a = query.conv5;
    const ad::Var score = ad::dot(query.embedding, ad::constant(vector_tensor(key_foreground)));
    const ad::Var grad_a = ad::grad(score, {a}, create_graph)[0];
    const int channels = a.shape()[0];
    const double positions = static_cast<double>(a.numel() / channels);
    GradCamGraph out;
    out.alpha = ad::scale(ad::reduce_positions(grad_a), 1.0 / positions);
    out.map = ad::relu(ad::reduce_channels(ad::mul(ad::broadcast_positions(out.alpha, a.shape()), a)));
    return out;
}

namespace {

GradCamGraph gradcam_eval(const EncoderParams& theta_q, const FrameVolume& x_q, const VectorX<>& key_foreground) {
    const ForwardGraph f = forward(ParamVars::leaves(theta_q, true), theta_q.config,
                                   ad::constant(clip_to_tensor(x_q)));
    GradCamGraph g = gradcam_graph(f, key_foreground, false);
    if (!g.alpha.value().data.allFinite() || !g.map.value().data.allFinite()) {
        throw std::runtime_error("gradcam: non-finite gradients");
    }
    return g;
}

}  // namespace

AttentionMap gradcam(const EncoderParams& theta_q, const FrameVolume& x_q, const VectorX<>& key_foreground) {
    return {gradcam_eval(theta_q, x_q, key_foreground).map.value()};
}

VectorX<> gradcam_alpha(const EncoderParams& theta_q, const FrameVolume& x_q, const VectorX<>& key_foreground) {
    return gradcam_eval(theta_q, x_q, key_foreground).alpha.value().data.matrix();
}

PseudoMask interpolate_mask(const MaskVolume& mask, const Shape& target) {
    if (target.size() != 3) throw std::invalid_argument("interpolate_mask: target must be (t', h', w')");
    const int tt = target[0], th = target[1], tw = target[2];
    if (tt > mask.t || th > mask.h || tw > mask.w || tt < 1 || th < 1 || tw < 1) {
        throw std::invalid_argument("interpolate_mask: target " + shape_str(target) + " exceeds source (" +
                                    std::to_string(mask.t) + ", " + std::to_string(mask.h) + ", " +
                                    std::to_string(mask.w) + "); upsampling is unsupported");
    }
    const MatrixX<> wt = area_weights(mask.t, tt), wy = area_weights(mask.h, th), wx = area_weights(mask.w, tw);
    // Spatial pass per source frame, then temporal mixing.
    std::vector<MatrixX<>> spatial;
    spatial.reserve(static_cast<std::size_t>(mask.t));
    for (const auto& f : mask.frames) spatial.push_back(wy * f.cast<Scalar>().matrix() * wx.transpose());
    PseudoMask out{Tensor({tt, th, tw})};
    for (int o = 0; o < tt; ++o) {
        MatrixX<> acc = MatrixX<>::Zero(th, tw);
        for (int i = 0; i < mask.t; ++i) {
            if (wt(o, i) != 0.0) acc += wt(o, i) * spatial[static_cast<std::size_t>(i)];
        }
        for (int y = 0; y < th; ++y)
            for (int x = 0; x < tw; ++x) out.grid.data[(o * th + y) * tw + x] = std::clamp(acc(y, x), 0.0, 1.0);
    }
    return out;
}

AttentionLossValue attention_loss(const AttentionMap& g, const PseudoMask& m) {
    if (g.grid.shape != m.grid.shape) throw std::invalid_argument("attention_loss: grid shapes differ");
    const double gn = g.grid.data.matrix().norm(), mn = m.grid.data.matrix().norm();
    if (gn == 0.0 || mn == 0.0) return {1.0, true};
    return {1.0 - g.grid.data.matrix().dot(m.grid.data.matrix()) / (gn * mn), false};
}

ad::Var attention_loss(const ad::Var& g, const PseudoMask& m, bool& degenerate) {
    if (g.shape() != m.grid.shape) throw std::invalid_argument("attention_loss: grid shapes differ");
    const double gn = g.value().data.matrix().norm(), mn = m.grid.data.matrix().norm();
    degenerate = gn == 0.0 || mn == 0.0;
    if (degenerate) return ad::scalar(1.0);
    const ad::Var cosine =
        ad::scale(ad::mul(ad::dot(g, ad::constant(m.grid)), ad::reciprocal(ad::norm(g))), 1.0 / mn);
    return ad::add_scalar(ad::neg(cosine), 1.0);
}

ObjectiveResult total_loss(const TrainingBatch& batch, const EncoderState& state, const ObjectiveConfig& config,
                           bool compute_grads) {
    if (batch.pairs.empty()) throw std::invalid_argument("total_loss: empty batch");
    if (!batch.triplets.empty() && batch.triplets.size() != batch.pairs.size()) {
        throw std::invalid_argument("total_loss: need one speed triplet per clip pair or none");
    }
    const EncoderConfig& cfg = state.theta_q.config;
    const MatrixX<> negatives = state.queue.negatives();
    const double inv_b = 1.0 / static_cast<double>(batch.pairs.size());

    ObjectiveResult result;
    result.keys.resize(static_cast<std::ptrdiff_t>(batch.pairs.size()), cfg.proj_dim);
    if (compute_grads) {
        for (const auto& [name, t] : state.theta_q.tensors) result.grads[name] = Tensor(t.shape);
    }
    LossBreakdown& lb = result.losses;
    lb.lambda = config.lambda;

    for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
        const ClipPair& pair = batch.pairs[i];
        // Parameters stay differentiable leaves either way: Grad-CAM needs d(score)/d(conv5).
        const ParamVars pq = ParamVars::leaves(state.theta_q, true);

        const ForwardGraph fq = forward(pq, cfg, ad::constant(clip_to_tensor(pair.x_q)));
        const EncodeResult key = encode(state.theta_k, pair.x_k);
        result.keys.row(static_cast<std::ptrdiff_t>(i)) = key.embedding.transpose();

        ad::Var sample = moco_loss(fq.embedding, key.embedding, negatives, config.tau);
        lb.l_moco += sample.item() * inv_b;

        const EncodeResult key_fg = encode(state.theta_k, mask_key_foreground(pair.x_k, pair.m_k));
        const bool second_order = compute_grads && config.lambda > 0.0 && !config.detach_alpha;
        const GradCamGraph cam = gradcam_graph(fq, key_fg.embedding, second_order);
        bool degenerate = false;
        const ad::Var att =
            attention_loss(cam.map, interpolate_mask(pair.m_q, {cam.map.shape().begin(), cam.map.shape().end()}),
                           degenerate);
        lb.l_att += att.item() * inv_b;
        lb.degenerate += degenerate ? 1 : 0;
        if (config.lambda > 0.0) sample = ad::add(sample, ad::scale(att, config.lambda));

        if (!batch.triplets.empty()) {
            const SpeedTriplet& tri = batch.triplets[i];
            const ForwardGraph fa = forward(pq, cfg, ad::constant(clip_to_tensor(tri.anchor)));
            const EncodeResult pos = encode(state.theta_k, tri.positive);
            const EncodeResult neg = encode(state.theta_k, tri.negative);
            const int sd = static_cast<int>(pos.speed_embedding.size());
            const ad::Var pair_pos =
                ad::dot(fa.speed_embedding, ad::constant(Tensor({sd}, pos.speed_embedding.array())));
            const ad::Var pair_neg =
                ad::dot(fa.speed_embedding, ad::constant(Tensor({sd}, neg.speed_embedding.array())));
            const ad::Var ls = speed_loss(pair_pos, pair_neg, config.gamma);
            lb.l_speed += ls.item() * inv_b;
            sample = ad::add(sample, ls);
        }

        if (compute_grads) {
            std::vector<ad::Var> leaves;
            std::vector<std::string> names;
            for (const auto& [name, v] : pq.vars) {
                names.push_back(name);
                leaves.push_back(v);
            }
            const auto grads = ad::grad(sample, leaves);
            for (std::size_t j = 0; j < names.size(); ++j) result.grads[names[j]].data += grads[j].value().data * inv_b;
        }
    }
    lb.total = lb.l_moco + lb.l_speed + lb.lambda * lb.l_att;
    return result;
}

}  // namespace previts
