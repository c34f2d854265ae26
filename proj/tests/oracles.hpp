#pragma once

// Independent reference computations shared by the unit tests and the acceptance run.

#include "previts/objective.hpp"

#include <cmath>
#include <vector>

namespace previts::oracle {


inline VectorX<> unit(int d, Rng& rng) {
    VectorX<> v(d);
    for (int i = 0; i < d; ++i) v[i] = rng.normal();
    return v.normalized();
}

// Softmax cross-entropy with the positive at index 0, no max shift.
inline double brute_force_infonce(const VectorX<>& q, const VectorX<>& k, const MatrixX<>& n, double tau) {
    std::vector<double> logits{q.dot(k) / tau};
    for (int i = 0; i < n.rows(); ++i) logits.push_back(q.dot(n.row(i).transpose()) / tau);
    double z = 0.0;
    for (double l : logits) z += std::exp(l);
    return -std::log(std::exp(logits[0]) / z);
}

inline EncoderConfig toy_config() {
    EncoderConfig c;
    c.frames = 4;
    c.size = 16;
    c.channels = {2, 2, 2};
    c.hidden = 4;
    c.proj_dim = 5;
    c.speed_dim = 3;
    return c;
}

inline FrameVolume random_clip(int t, int s, Rng& rng) {
    FrameVolume v(t, s, s);
    for (auto& p : v.pixels) p = static_cast<float>(rng.uniform());
    return v;
}

// Projection head evaluated from conv5 in plain Eigen, independent of the tape.
inline double head_score(const EncoderParams& p, const Tensor& a, const VectorX<>& km) {
    const int c = a.shape[0];
    const std::ptrdiff_t per = a.numel() / c;
    VectorX<> pooled(c);
    for (int ch = 0; ch < c; ++ch) pooled[ch] = a.data.segment(ch * per, per).mean();
    const auto& w1 = p.tensors.at("head.fc1.w");
    const auto& w2 = p.tensors.at("head.fc2.w");
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W1(
        w1.data.data(), w1.shape[0], w1.shape[1]);
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W2(
        w2.data.data(), w2.shape[0], w2.shape[1]);
    VectorX<> h = W1.transpose() * pooled + p.tensors.at("head.fc1.b").data.matrix();
    h = h.cwiseMax(0.0);
    const VectorX<> z = W2.transpose() * h + p.tensors.at("head.fc2.b").data.matrix();
    return z.normalized().dot(km);
}



struct ToyProblem {
    EncoderState state;
    TrainingBatch batch;
};

inline ToyProblem toy_problem(std::uint64_t seed) {
    const auto c = toy_config();
    Rng rng(seed);
    ToyProblem t;
    t.state = init_state(c, 0.99, 6, rng);
    t.state.theta_k = init_params(c, rng);
    for (int i = 0; i < 2; ++i) {
        ClipPair p;
        p.x_q = random_clip(c.frames, c.size, rng);
        p.x_k = random_clip(c.frames, c.size, rng);
        p.m_q = MaskVolume(c.frames, c.size, c.size);
        p.m_k = MaskVolume(c.frames, c.size, c.size);
        for (int k = 0; k < c.frames; ++k) {
            p.m_q.frames[k].block(2 + k, 3, 7, 8).setOnes();
            p.m_k.frames[k].block(4, 1 + k, 8, 6).setOnes();
        }
        t.batch.pairs.push_back(p);
        SpeedTriplet s;
        s.anchor = random_clip(c.frames, c.size, rng);
        s.positive = random_clip(c.frames, c.size, rng);
        s.negative = random_clip(c.frames, c.size, rng);
        t.batch.triplets.push_back(s);
    }
    return t;
}


}  // namespace previts::oracle
