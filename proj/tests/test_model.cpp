#include "doctest.h"

#include "previts/model.hpp"

#include <deque>

using namespace previts;

namespace {

EncoderConfig tiny_config() {
    EncoderConfig c;
    c.frames = 4;
    c.size = 16;
    c.channels = {2, 3, 4};
    c.hidden = 5;
    c.proj_dim = 6;
    c.speed_dim = 3;
    return c;
}

FrameVolume random_clip(const EncoderConfig& c, Rng& rng) {
    FrameVolume v(c.frames, c.size, c.size);
    for (auto& p : v.pixels) p = static_cast<float>(rng.uniform());
    return v;
}

VectorX<> unit(int d, Rng& rng) {
    VectorX<> v(d);
    for (int i = 0; i < d; ++i) v[i] = rng.normal();
    return v.normalized();
}

}  // namespace

TEST_CASE("default architecture has a 7x7 conv5 grid") {
    EncoderConfig c;
    const Shape s = c.conv5_shape();
    CHECK(s == Shape{32, 2, 7, 7});
    Rng rng(1);
    const auto p = init_params(c, rng);
    CHECK(p.parameter_count() > 10000);
    CHECK(p.parameter_count() < 100000);
    CHECK(c.arch_hash() != tiny_config().arch_hash());
}

TEST_CASE("embeddings are unit norm and shape mismatches are rejected") {
    const auto c = tiny_config();
    Rng rng(2);
    const auto p = init_params(c, rng);
    for (int i = 0; i < 10; ++i) {
        const auto r = encode(p, random_clip(c, rng));
        CHECK(std::abs(r.embedding.norm() - 1.0) < 1e-5);
        CHECK(std::abs(r.speed_embedding.norm() - 1.0) < 1e-5);
        CHECK(r.conv5.shape == c.conv5_shape());
    }
    FrameVolume wrong(c.frames, c.size + 2, c.size);
    CHECK_THROWS_AS(encode(p, wrong), std::invalid_argument);
}

TEST_CASE("zero parameters give zero or constant conv5") {
    auto c = tiny_config();
    FrameVolume zero(c.frames, c.size, c.size);
    c.bias = false;
    auto p = zero_params(c);
    CHECK(encode(p, zero).conv5.data.abs().maxCoeff() == 0.0);

    c.bias = true;
    p = zero_params(c);
    p.tensors["conv3.b"].data << 0.5, -1.0, 2.0, 0.0;
    p.tensors["conv1.b"].data.setConstant(0.3);
    const auto a = encode(p, zero).conv5;
    const int per = static_cast<int>(a.numel() / 4);
    const double expect[] = {0.5, 0.0, 2.0, 0.0};
    for (int ch = 0; ch < 4; ++ch)
        for (int i = 0; i < per; ++i) CHECK(a.data[ch * per + i] == expect[ch]);
}

TEST_CASE("batch encoding is permutation equivariant") {
    const auto c = tiny_config();
    Rng rng(3);
    const auto p = init_params(c, rng);
    std::vector<FrameVolume> clips;
    for (int i = 0; i < 5; ++i) clips.push_back(random_clip(c, rng));
    const std::vector<int> perm{3, 0, 4, 1, 2};
    std::vector<FrameVolume> shuffled;
    for (int i : perm) shuffled.push_back(clips[i]);
    const auto a = encode_batch(p, clips), b = encode_batch(p, shuffled);
    for (int j = 0; j < 5; ++j) CHECK(b[j].embedding == a[perm[j]].embedding);
}

TEST_CASE("momentum update") {
    const auto c = tiny_config();
    Rng rng(4);
    EncoderState s = init_state(c, 1.0, 8, rng);
    s.theta_q = init_params(c, rng);
    const auto before = s.theta_k;
    momentum_update(s);
    for (const auto& [n, t] : s.theta_k.tensors) CHECK((t.data == before.tensors.at(n).data).all());

    s.momentum = 0.0;
    momentum_update(s);
    for (const auto& [n, t] : s.theta_k.tensors) CHECK((t.data == s.theta_q.tensors.at(n).data).all());

    // theta_q = theta_k + delta, m = 0.999: theta_k moves by 0.001 delta.
    s.momentum = 0.999;
    EncoderParams delta = init_params(c, rng);
    for (auto& [n, t] : s.theta_q.tensors) t.data = s.theta_k.tensors.at(n).data + delta.tensors.at(n).data;
    const auto k0 = s.theta_k;
    momentum_update(s);
    for (const auto& [n, t] : s.theta_k.tensors) {
        const ArrayX<> moved = t.data - k0.tensors.at(n).data;
        CHECK((moved - 0.001 * delta.tensors.at(n).data).abs().maxCoeff() < 1e-12);
    }

    // Frozen theta_q: the gap shrinks by exactly m per step.
    s.momentum = 0.9;
    auto gap = [&] {
        double g = 0;
        for (const auto& [n, t] : s.theta_k.tensors) g += (t.data - s.theta_q.tensors.at(n).data).square().sum();
        return std::sqrt(g);
    };
    double prev = gap();
    for (int i = 0; i < 20; ++i) {
        momentum_update(s);
        const double now = gap();
        CHECK(now == doctest::Approx(0.9 * prev).epsilon(1e-9));
        prev = now;
    }
    s.momentum = 1.5;
    CHECK_THROWS(momentum_update(s));
}

TEST_CASE("negative queue ring semantics") {
    Rng rng(5);
    NegativeQueue q(4, 3);
    std::vector<VectorX<>> pushed;
    for (int i = 0; i < 4; ++i) {
        pushed.push_back(unit(3, rng));
        q.enqueue(pushed.back());
    }
    CHECK(q.size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(q.negatives().row(i).transpose() == pushed[i]);
    pushed.push_back(unit(3, rng));
    q.enqueue(pushed.back());
    const MatrixX<> n = q.negatives();
    for (int i = 0; i < 4; ++i) CHECK(n.row(i).transpose() != pushed[0]);

    VectorX<> bad = VectorX<>::Ones(3);
    CHECK_THROWS_AS(q.enqueue(bad), std::invalid_argument);
}

TEST_CASE("queue matches a reference deque under interleaved use") {
    Rng rng(6);
    const int cap = 7;
    NegativeQueue q(cap, 4);
    std::deque<VectorX<>> ref;
    for (int step = 0; step < 200; ++step) {
        const int batch = static_cast<int>(rng.uniform_int(0, 4));
        MatrixX<> rows(batch, 4);
        for (int i = 0; i < batch; ++i) {
            rows.row(i) = unit(4, rng).transpose();
            ref.push_back(rows.row(i).transpose());
            if (static_cast<int>(ref.size()) > cap) ref.pop_front();
        }
        q.enqueue(rows);
        const MatrixX<> n = q.negatives();
        REQUIRE(n.rows() == static_cast<int>(ref.size()));
        for (int i = 0; i < n.rows(); ++i) CHECK(n.row(i).transpose() == ref[i]);
    }
}

TEST_CASE("queue is initialised with unit vectors") {
    Rng rng(7);
    NegativeQueue q(32, 8);
    q.fill_random(rng);
    CHECK(q.size() == 32);
    for (int i = 0; i < 32; ++i) CHECK(std::abs(q.negatives().row(i).norm() - 1.0) < 1e-12);
}

TEST_CASE("parameter gradients of embedding . c match central differences") {
    const auto c = tiny_config();
    Rng rng(8);
    const auto p = init_params(c, rng);
    const auto clip = random_clip(c, rng);
    const VectorX<> target = unit(c.proj_dim, rng);
    const Tensor tgt({c.proj_dim}, target.array());

    const ParamVars pv = ParamVars::leaves(p, true);
    const auto g = forward(pv, c, ad::constant(clip_to_tensor(clip)));
    const ad::Var score = ad::dot(g.embedding, ad::constant(tgt));
    std::vector<ad::Var> leaves;
    std::vector<std::string> names;
    for (const auto& [n, v] : pv.vars) {
        names.push_back(n);
        leaves.push_back(v);
    }
    const auto grads = ad::grad(score, leaves);

    auto eval = [&](const EncoderParams& q) { return encode(q, clip).embedding.dot(target); };
    const double h = 1e-4;
    int checked = 0;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& t = p.tensors.at(names[i]);
        for (std::ptrdiff_t j = 0; j < t.numel(); j += std::max<std::ptrdiff_t>(1, t.numel() / 6)) {
            EncoderParams plus = p, minus = p;
            plus.tensors[names[i]].data[j] += h;
            minus.tensors[names[i]].data[j] -= h;
            const double fd = (eval(plus) - eval(minus)) / (2 * h);
            const double an = grads[i].value().data[j];
            CHECK(std::abs(fd - an) <= 1e-3 * std::max({std::abs(fd), std::abs(an), 1e-4}));
            ++checked;
        }
    }
    CHECK(checked > 30);
}

TEST_CASE("key path records no gradient") {
    const auto c = tiny_config();
    Rng rng(9);
    const auto p = init_params(c, rng);
    const auto g = forward(ParamVars::leaves(p, false), c, ad::constant(clip_to_tensor(random_clip(c, rng))));
    CHECK_FALSE(g.embedding.requires_grad());
    CHECK_FALSE(g.conv5.requires_grad());
}
