#include "doctest.h"

#include "previts/tracking.hpp"

#include <filesystem>
#include <queue>

using namespace previts;

namespace {

// Reference labelling: BFS flood fill in row-major seed order, returns the
// component masks in discovery order.
std::vector<Mask2D> flood_components(const Mask2D& m) {
    Mask2D seen = Mask2D::Zero(m.rows(), m.cols());
    std::vector<Mask2D> out;
    for (int y = 0; y < m.rows(); ++y)
        for (int x = 0; x < m.cols(); ++x) {
            if (!m(y, x) || seen(y, x)) continue;
            Mask2D comp = Mask2D::Zero(m.rows(), m.cols());
            std::queue<std::pair<int, int>> q;
            q.push({y, x});
            seen(y, x) = 1;
            while (!q.empty()) {
                auto [cy, cx] = q.front();
                q.pop();
                comp(cy, cx) = 1;
                const int dy[] = {1, -1, 0, 0}, dx[] = {0, 0, 1, -1};
                for (int d = 0; d < 4; ++d) {
                    const int ny = cy + dy[d], nx = cx + dx[d];
                    if (ny < 0 || nx < 0 || ny >= m.rows() || nx >= m.cols()) continue;
                    if (m(ny, nx) && !seen(ny, nx)) {
                        seen(ny, nx) = 1;
                        q.push({ny, nx});
                    }
                }
            }
            out.push_back(comp);
        }
    return out;
}

Mask2D reference_largest(const Mask2D& m) {
    const auto comps = flood_components(m);
    std::size_t best = 0;
    for (std::size_t i = 1; i < comps.size(); ++i)
        if (mask_area(comps[i]) > mask_area(comps[best])) best = i;
    return comps[best];
}

GeneratedVideo moving(std::uint64_t seed, ShapeClass shape = ShapeClass::Circle, Texture tex = Texture::Checker) {
    VideoSpec s;
    s.shape = shape;
    s.texture = tex;
    s.vy = 0.6;
    s.vx = 0.8;
    return generate_video(s, seed);
}

}  // namespace

TEST_CASE("oracle saliency returns the ground-truth mask") {
    const auto g = moving(1);
    for (int k = 0; k < g.video.t; k += 5) {
        const auto s = compute_saliency(g.video, k, SaliencyBackend::Oracle, &g.gt);
        CHECK((s.mask == g.gt.fg_mask.frames[k]).all());
        CHECK(s.frame_index == k);
    }
    CHECK_THROWS(compute_saliency(g.video, 0, SaliencyBackend::Oracle, nullptr));
}

TEST_CASE("uniform frame has no salient object") {
    FrameVolume v(1, 16, 16);
    v.pixels.setConstant(0.4f);
    CHECK_THROWS_AS(compute_saliency(v, 0, SaliencyBackend::ColorContrast), NoSalientObject);
}

TEST_CASE("colour contrast finds a red circle on a checker background") {
    VideoSpec s;
    s.frames = 1;
    s.shape = ShapeClass::Circle;
    s.radius = 7.0;
    s.texture = Texture::Checker;
    s.palette_index = 0;
    const auto g = generate_video(s, 2);
    const auto sal = compute_saliency(g.video, 0, SaliencyBackend::ColorContrast);
    CHECK(mask_iou(sal.mask, g.gt.fg_mask.frames[0]) >= 0.8);
}

TEST_CASE("largest region") {
    Mask2D m = Mask2D::Zero(12, 12);
    m.block(1, 1, 5, 6) = 1;  // 30
    m.block(8, 8, 2, 5).setZero();
    m.block(8, 7, 2, 5) = 1;  // 10
    const Mask2D big = largest_region(m);
    CHECK(mask_area(big) == 30);
    CHECK(big(1, 1) == 1);
    CHECK(big(8, 7) == 0);

    Mask2D single = Mask2D::Zero(6, 6);
    single.block(2, 2, 2, 3) = 1;
    CHECK((largest_region(single) == single).all());

    CHECK_THROWS_AS(largest_region(Mask2D::Zero(4, 4)), EmptyMask);

    // Equal areas: the component seen first in row-major order wins.
    Mask2D tie = Mask2D::Zero(10, 10);
    tie.block(6, 0, 2, 2) = 1;
    tie.block(0, 7, 2, 2) = 1;
    const Mask2D pick = largest_region(tie);
    CHECK(pick(0, 7) == 1);
    CHECK((pick == reference_largest(tie)).all());
}

TEST_CASE("largest region agrees with flood fill on random masks") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        Mask2D m(9, 11);
        for (int i = 0; i < m.size(); ++i) m(i / 11, i % 11) = rng.bernoulli(0.45);
        if (mask_area(m) == 0) continue;
        CHECK((largest_region(m) == reference_largest(m)).all());
    }
}

TEST_CASE("static object gives a full identical tube") {
    VideoSpec s;
    s.shape = ShapeClass::Cross;
    const auto g = generate_video(s, 3);
    const auto seed = compute_saliency(g.video, 0, SaliencyBackend::Oracle, &g.gt);
    const auto tube = extract_tube(g.video, seed, SaliencyBackend::Oracle, &g.gt);
    CHECK(tube.active_length() == s.frames);
    for (int k = 0; k < s.frames; ++k) {
        CHECK(tube.active[k]);
        CHECK((tube.masks.frames[k] == tube.masks.frames[0]).all());
    }
}

TEST_CASE("object leaving the frame ends the tube at the exit frame") {
    // A square keeps full-height slivers at the border, so the gate holds until the exit.
    VideoSpec s;
    s.shape = ShapeClass::Square;
    s.radius = 5.0;
    s.cx = 24.0;
    s.vx = 2.0;
    s.motion = MotionMode::Exit;
    const auto g = generate_video(s, 4);
    int exit_frame = s.frames;
    for (int k = 0; k < s.frames; ++k)
        if (mask_area(g.gt.fg_mask.frames[k]) == 0) {
            exit_frame = k;
            break;
        }
    REQUIRE(exit_frame < s.frames);
    const auto tube = extract_tube(g.video, compute_saliency(g.video, 0, SaliencyBackend::Oracle, &g.gt),
                                   SaliencyBackend::Oracle, &g.gt);
    CHECK(tube.active_length() == exit_frame);
    for (int k = exit_frame; k < s.frames; ++k) CHECK(tube.areas[k] == 0);
}

TEST_CASE("teleport cut terminates the tube") {
    VideoSpec s;
    s.radius = 5.0;
    s.cy = 12.0;
    s.cx = 12.0;
    s.teleport_frame = 5;
    const auto g = generate_video(s, 5);
    REQUIRE(mask_iou(g.gt.fg_mask.frames[4], g.gt.fg_mask.frames[5]) == 0.0);
    const auto tube = extract_tube(g.video, compute_saliency(g.video, 0, SaliencyBackend::Oracle, &g.gt),
                                   SaliencyBackend::Oracle, &g.gt);
    CHECK(tube.active_length() == 5);

    TubeOptions resume;
    resume.terminate_on_failure = false;
    const auto t2 = extract_tube(g.video, compute_saliency(g.video, 0, SaliencyBackend::Oracle, &g.gt),
                                 SaliencyBackend::Oracle, &g.gt, resume);
    CHECK_FALSE(t2.active[5]);
}

TEST_CASE("tube invariants: bookkeeping, containment, monotone gate") {
    for (std::uint64_t seed = 10; seed < 16; ++seed) {
        const auto g = moving(seed, static_cast<ShapeClass>(seed % 4), static_cast<Texture>(seed % 3));
        const auto s0 = compute_saliency(g.video, 0, SaliencyBackend::ColorContrast);
        int prev_len = g.video.t + 1;
        for (double gate : {0.1, 0.3, 0.6, 0.9, 1.0}) {
            TubeOptions opt;
            opt.iou_gate = gate;
            const auto tube = extract_tube(g.video, s0, SaliencyBackend::ColorContrast, nullptr, opt);
            CHECK(tube.active_length() <= prev_len);
            prev_len = tube.active_length();
            for (int k = 0; k < tube.frames(); ++k) {
                CHECK(tube.areas[k] == mask_area(tube.masks.frames[k]));
                CHECK(tube.active[k] == (tube.areas[k] > 0));
                if (!tube.active[k]) continue;
                CHECK(flood_components(tube.masks.frames[k]).size() == 1);
                const auto raw = compute_saliency(g.video, k, SaliencyBackend::ColorContrast).mask;
                CHECK(((tube.masks.frames[k] != 0) <= (raw != 0)).all());
                const auto box = mask_bbox(tube.masks.frames[k]);
                CHECK(tube.bboxes[k] == *box);
            }
        }
    }
}

TEST_CASE("errors on bad seeds") {
    const auto g = moving(1);
    SaliencyMask empty{Mask2D::Zero(g.video.h, g.video.w), 0};
    CHECK_THROWS(extract_tube(g.video, empty, SaliencyBackend::Oracle, &g.gt));
    SaliencyMask wrong{Mask2D::Ones(4, 4), 0};
    CHECK_THROWS(extract_tube(g.video, wrong, SaliencyBackend::Oracle, &g.gt));
}

TEST_CASE("ground-truth tubes and degradations") {
    const auto g = moving(7, ShapeClass::Circle);
    const auto tube = tube_from_ground_truth(g.gt);
    for (int k = 0; k < tube.frames(); ++k) {
        long sum = 0;
        for (int y = 0; y < g.gt.fg_mask.h; ++y)
            for (int x = 0; x < g.gt.fg_mask.w; ++x) sum += g.gt.fg_mask.frames[k](y, x);
        CHECK(tube.areas[k] == sum);
    }
    const auto box = degrade_tube(tube, TubeDegradation::BoxOnly);
    REQUIRE(box.has_value());
    for (int k = 0; k < tube.frames(); ++k) {
        CHECK(box->areas[k] >= tube.areas[k]);
        const auto b = tube.bboxes[k];
        CHECK(box->areas[k] == long(b.height()) * b.width());
    }
    CHECK_FALSE(degrade_tube(tube, TubeDegradation::None).has_value());
}

TEST_CASE("tube serialisation round trip") {
    const auto g = moving(8);
    const auto tube = tube_from_ground_truth(g.gt);
    const auto path = std::filesystem::temp_directory_path() / "previts_test_tube.pva";
    save_tube(path, tube);
    const auto back = load_tube(path);
    CHECK(back.masks == tube.masks);
    CHECK(back.active == tube.active);
    CHECK(back.areas == tube.areas);
    CHECK(back.bboxes == tube.bboxes);
}
