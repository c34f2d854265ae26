#include "doctest.h"

#include "previts/corpus.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

using namespace previts;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("previts_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

// Scanline raster of a disc: per row, the pixel-centre span inside the circle.
long scanline_disc_area(double cy, double cx, double r, int h, int w) {
    long n = 0;
    for (int y = 0; y < h; ++y) {
        const double dy = y + 0.5 - cy;
        if (dy * dy > r * r) continue;
        const double half = std::sqrt(r * r - dy * dy);
        const int x0 = std::max(0, static_cast<int>(std::ceil(cx - half - 0.5)));
        const int x1 = std::min(w - 1, static_cast<int>(std::floor(cx + half - 0.5)));
        if (x1 >= x0) n += x1 - x0 + 1;
    }
    return n;
}

VideoSpec moving_spec() {
    VideoSpec s;
    s.shape = ShapeClass::Square;
    s.vy = 0.7;
    s.vx = -0.9;
    s.scale_rate = 0.005;
    s.texture = Texture::Checker;
    return s;
}

}  // namespace

TEST_CASE("circle raster matches a scanline reference") {
    VideoSpec s;
    s.frames = 3;
    s.height = s.width = 64;
    s.cy = s.cx = 32.0;
    s.radius = 8.0;
    const auto g = generate_video(s, 1);
    const long ref = scanline_disc_area(32.0, 32.0, 8.0, 64, 64);
    for (const auto& m : g.gt.fg_mask.frames) {
        CHECK(mask_area(m) == ref);
        CHECK(mask_area(m) >= 181);
        CHECK(mask_area(m) <= 221);
    }
}

TEST_CASE("static object has identical masks in every frame") {
    VideoSpec s;
    s.shape = ShapeClass::Triangle;
    const auto g = generate_video(s, 7);
    for (int k = 1; k < s.frames; ++k) CHECK((g.gt.fg_mask.frames[k] == g.gt.fg_mask.frames[0]).all());
}

TEST_CASE("generation is deterministic and seed dependent") {
    const auto a = generate_video(moving_spec(), 42);
    const auto b = generate_video(moving_spec(), 42);
    const auto c = generate_video(moving_spec(), 43);
    CHECK(a.video == b.video);
    CHECK(a.gt.fg_mask == b.gt.fg_mask);
    CHECK_FALSE(a.video == c.video);
}

TEST_CASE("moving object translates and masks stay non-empty") {
    const auto g = generate_video(moving_spec(), 3);
    CHECK_FALSE((g.gt.fg_mask.frames.front() == g.gt.fg_mask.frames.back()).all());
    for (const auto& m : g.gt.fg_mask.frames) CHECK(mask_area(m) > 0);
    CHECK(g.gt.trajectory.size() == static_cast<std::size_t>(g.video.t));
}

TEST_CASE("oversized object is rejected") {
    VideoSpec s;
    s.radius = 30.0;
    CHECK_THROWS_AS(generate_video(s, 0), std::invalid_argument);
}

TEST_CASE("foreground colours never coincide with background colours in a frame") {
    for (int tex = 0; tex < kNumTextures; ++tex) {
        VideoSpec s = moving_spec();
        s.texture = static_cast<Texture>(tex);
        s.palette_index = tex;
        const auto g = generate_video(s, 100 + tex);
        for (int k = 0; k < g.video.t; k += 7) {
            std::set<std::array<float, 3>> fg, bg;
            for (int y = 0; y < g.video.h; ++y)
                for (int x = 0; x < g.video.w; ++x) {
                    std::array<float, 3> px{g.video.at(k, y, x, 0), g.video.at(k, y, x, 1), g.video.at(k, y, x, 2)};
                    (g.gt.fg_mask.frames[k](y, x) ? fg : bg).insert(px);
                }
            for (const auto& p : fg) CHECK(bg.count(p) == 0);
        }
    }
}

TEST_CASE("variant algebra") {
    const auto g = generate_video(moving_spec(), 5);
    CHECK(composite_variant(g.video, g.gt, Variant::Original) == g.video);

    const auto fg = composite_variant(g.video, g.gt, Variant::OnlyFG);
    double outside = 0.0;
    for (int k = 0; k < fg.t; ++k)
        for (int y = 0; y < fg.h; ++y)
            for (int x = 0; x < fg.w; ++x)
                if (!g.gt.fg_mask.frames[k](y, x))
                    for (int c = 0; c < 3; ++c) outside += fg.at(k, y, x, c);
    CHECK(outside == 0.0);
    CHECK(composite_variant(fg, g.gt, Variant::OnlyFG) == fg);

    const auto bgb = composite_variant(g.video, g.gt, Variant::OnlyBG_B);
    for (int k = 0; k < bgb.t; ++k)
        for (int y = 0; y < bgb.h; ++y)
            for (int x = 0; x < bgb.w; ++x) {
                const bool in = g.gt.fg_mask.frames[k](y, x);
                for (int c = 0; c < 3; ++c) {
                    if (in) CHECK(bgb.at(k, y, x, c) == 0.0f);
                    else CHECK(bgb.at(k, y, x, c) == g.video.at(k, y, x, c));
                }
            }
}

TEST_CASE("NoFG fills each foreground pixel from a nearest background pixel") {
    const auto g = generate_video(moving_spec(), 11);
    const auto out = composite_variant(g.video, g.gt, Variant::NoFG);
    for (int k = 0; k < g.video.t; k += 5) {
        const auto& m = g.gt.fg_mask.frames[k];
        for (int y = 0; y < g.video.h; ++y)
            for (int x = 0; x < g.video.w; ++x) {
                if (!m(y, x)) {
                    CHECK(out.at(k, y, x, 0) == g.video.at(k, y, x, 0));
                    continue;
                }
                long best = -1;
                for (int yy = 0; yy < g.video.h; ++yy)
                    for (int xx = 0; xx < g.video.w; ++xx)
                        if (!m(yy, xx)) {
                            const long d = long(yy - y) * (yy - y) + long(xx - x) * (xx - x);
                            if (best < 0 || d < best) best = d;
                        }
                bool matched = false;
                for (int yy = 0; yy < g.video.h && !matched; ++yy)
                    for (int xx = 0; xx < g.video.w && !matched; ++xx)
                        if (!m(yy, xx) && long(yy - y) * (yy - y) + long(xx - x) * (xx - x) == best) {
                            matched = out.at(k, y, x, 0) == g.video.at(k, yy, xx, 0) &&
                                      out.at(k, y, x, 1) == g.video.at(k, yy, xx, 1) &&
                                      out.at(k, y, x, 2) == g.video.at(k, yy, xx, 2);
                        }
                CHECK(matched);
            }
    }
}

TEST_CASE("OnlyBG_T removes every foreground colour") {
    const auto g = generate_video(moving_spec(), 12);
    const auto out = composite_variant(g.video, g.gt, Variant::OnlyBG_T);
    for (int k = 0; k < g.video.t; k += 6) {
        std::set<std::array<float, 3>> bg;
        for (int y = 0; y < g.video.h; ++y)
            for (int x = 0; x < g.video.w; ++x)
                if (!g.gt.fg_mask.frames[k](y, x))
                    bg.insert({g.video.at(k, y, x, 0), g.video.at(k, y, x, 1), g.video.at(k, y, x, 2)});
        for (int y = 0; y < g.video.h; ++y)
            for (int x = 0; x < g.video.w; ++x)
                CHECK(bg.count({out.at(k, y, x, 0), out.at(k, y, x, 1), out.at(k, y, x, 2)}) == 1);
    }
}

TEST_CASE("mixed variants paste the source foreground and respect donor class rules") {
    VideoSpec s = moving_spec();
    auto src = generate_video(s, 20);
    src.gt.class_id = 1;
    VideoSpec ds;
    ds.shape = ShapeClass::Circle;
    ds.texture = Texture::Noise;
    ds.vx = 1.0;
    auto donor = generate_video(ds, 21);
    donor.gt.class_id = 3;

    const auto mixed = composite_variant(src.video, src.gt, Variant::MixedRand, Donor{donor.video, donor.gt}, 4);
    for (int k = 0; k < src.video.t; ++k)
        for (int y = 0; y < src.video.h; ++y)
            for (int x = 0; x < src.video.w; ++x)
                if (src.gt.fg_mask.frames[k](y, x))
                    for (int c = 0; c < 3; ++c) CHECK(mixed.at(k, y, x, c) == src.video.at(k, y, x, c));

    CHECK_THROWS_AS(composite_variant(src.video, src.gt, Variant::MixedRand), std::invalid_argument);
    CHECK_THROWS_AS(composite_variant(src.video, src.gt, Variant::MixedSame, Donor{donor.video, donor.gt}, 4),
                    std::invalid_argument);
    CHECK_THROWS_AS(composite_variant(src.video, src.gt, Variant::MixedNext, Donor{donor.video, donor.gt}, 4),
                    std::invalid_argument);
    donor.gt.class_id = 2;
    CHECK_NOTHROW(composite_variant(src.video, src.gt, Variant::MixedNext, Donor{donor.video, donor.gt}, 4));
    donor.gt.class_id = 1;
    CHECK_NOTHROW(composite_variant(src.video, src.gt, Variant::MixedSame, Donor{donor.video, donor.gt}, 4));
}

TEST_CASE("variant names round trip") {
    for (Variant v : kAllVariants) CHECK(parse_variant(variant_name(v)) == v);
    CHECK_THROWS(parse_variant("bogus"));
}

TEST_CASE("corpus build, reload and split") {
    CorpusConfig cfg;
    cfg.frames = 10;
    cfg.seed = 9;
    const auto dir = scratch("corpus_a");
    const auto m = build_corpus(cfg, dir);
    CHECK(m.entries.size() == 20);
    std::set<std::string> ids;
    for (const auto& e : m.entries) ids.insert(e.video_id);
    CHECK(ids.size() == 20);
    CHECK(m.num_classes() == 4);

    const auto loaded = CorpusManifest::load(dir);
    CHECK(loaded.entries.size() == 20);
    CHECK(loaded.seed == 9);
    const auto v = load_video(loaded, m.entries[3].video_id);
    CHECK(v.video.t == 10);
    CHECK(v.gt.class_id == m.entries[3].class_id);
    save_video(dir / "copy.pva", v.video, v.gt);
    const auto again = load_video_file(dir / "copy.pva");
    CHECK(again.video == v.video);
    CHECK(again.gt.fg_mask == v.gt.fg_mask);
    CHECK(again.gt.trajectory == v.gt.trajectory);

    CHECK_THROWS(load_video(loaded, "nope"));

    const auto split = split_corpus(loaded);
    CHECK(split.train.size() + split.test.size() == 20);
    CHECK(split.test.size() == 4);

    // Different seed: some video must differ.
    cfg.seed = 10;
    const auto dir_b = scratch("corpus_b");
    const auto mb = build_corpus(cfg, dir_b, 2);
    bool differs = false;
    for (const auto& e : m.entries) {
        differs = differs || !(load_video(m, e.video_id).video == load_video(mb, e.video_id).video);
    }
    CHECK(differs);

    // Parallel generation gives the same bytes as serial.
    cfg.seed = 9;
    const auto dir_c = scratch("corpus_c");
    build_corpus(cfg, dir_c, 3);
    for (const auto& e : m.entries) CHECK(load_video_file(dir_c / e.path).video == load_video(m, e.video_id).video);

    // Corruption is reported with the path.
    const auto victim = dir / m.entries[0].path;
    {
        std::fstream f(victim, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(40);
        f.put('\x7f');
    }
    try {
        load_video(loaded, m.entries[0].video_id);
        FAIL("expected corruption error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find(victim.filename().string()) != std::string::npos);
    }
}
