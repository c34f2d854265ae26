#include "previts/corpus.hpp"

#include "previts/array_store.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>

namespace previts {

namespace {

using Rgb = std::array<double, 3>;

constexpr std::array<Rgb, 6> kPalette = {{{0.85, 0.12, 0.12},
                                          {0.12, 0.75, 0.20},
                                          {0.15, 0.25, 0.90},
                                          {0.90, 0.85, 0.10},
                                          {0.80, 0.15, 0.80},
                                          {0.95, 0.50, 0.05}}};

// Backgrounds stay near mid-grey; the tint is per texture.
constexpr std::array<Rgb, kNumTextures> kTextureTint = {{{0.04, 0.0, -0.03},
                                                         {-0.03, 0.03, 0.0},
                                                         {0.0, -0.02, 0.04},
                                                         {0.03, 0.03, -0.04},
                                                         {-0.04, 0.0, 0.03},
                                                         {0.0, 0.04, 0.02}}};

// Half-extent of each shape's bounding box in units of its radius.
double shape_extent(ShapeClass s) {
    switch (s) {
        case ShapeClass::Circle: return 1.0;
        case ShapeClass::Square: return 0.886;
        case ShapeClass::Triangle: return 1.56;
        case ShapeClass::Cross: return 1.1;
        case ShapeClass::Diamond: return 1.25;
        case ShapeClass::Ring: return 1.1;
    }
    return 1.0;
}

float quantize(double v) {
    const long code = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
    return static_cast<float>(code) / 255.0f;
}

struct Background {
    int h, w;
    std::vector<Rgb> pixels;
    const Rgb& at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * w + x]; }
};

Background render_background(Texture texture, int h, int w, Rng& rng) {
    const double base = rng.uniform(0.35, 0.6);
    const double amp = rng.uniform(0.06, 0.1);
    const int period = static_cast<int>(rng.uniform_int(4, 8));
    const int phase = static_cast<int>(rng.uniform_int(0, period - 1));
    const Rgb tint = kTextureTint[static_cast<int>(texture)];
    Background bg{h, w, std::vector<Rgb>(static_cast<std::size_t>(h) * w)};

    // Value noise on a coarse lattice, sampled per pixel.
    const int cell = 3;
    const int lh = h / cell + 2, lw = w / cell + 2;
    std::vector<double> lattice;
    if (texture == Texture::Noise) {
        lattice.resize(static_cast<std::size_t>(lh) * lw);
        for (auto& v : lattice) v = rng.uniform(-1.0, 1.0);
    }

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            switch (texture) {
                case Texture::StripesH: s = ((y + phase) / (period / 2 + 1)) % 2 ? 1.0 : -1.0; break;
                case Texture::StripesV: s = ((x + phase) / (period / 2 + 1)) % 2 ? 1.0 : -1.0; break;
                case Texture::StripesDiag: s = ((x + y + phase) / (period / 2 + 1)) % 2 ? 1.0 : -1.0; break;
                case Texture::Checker:
                    s = (((y + phase) / period) + ((x + phase) / period)) % 2 ? 1.0 : -1.0;
                    break;
                case Texture::Dots: {
                    const double py = (y + phase) % period - period / 2.0 + 0.5;
                    const double px = (x + phase) % period - period / 2.0 + 0.5;
                    s = (py * py + px * px <= 2.5) ? 1.0 : -0.4;
                    break;
                }
                case Texture::Noise: s = lattice[static_cast<std::size_t>(y / cell) * lw + x / cell]; break;
            }
            Rgb& p = bg.pixels[static_cast<std::size_t>(y) * w + x];
            for (int c = 0; c < 3; ++c) p[c] = quantize(base + tint[c] + amp * s);
        }
    }
    return bg;
}

void validate(const VideoSpec& s) {
    if (s.frames < 1 || s.height < 8 || s.width < 8) {
        throw std::invalid_argument("video spec: need frames >= 1 and height, width >= 8");
    }
    if (!(s.radius > 0)) throw std::invalid_argument("video spec: radius must be positive");
    const double r_max = std::max(s.radius, s.radius * (1.0 + s.scale_rate * (s.frames - 1)));
    const double extent = 2.0 * r_max * shape_extent(s.shape);
    if (extent >= std::min(s.height, s.width)) {
        throw std::invalid_argument("video spec: object extent " + std::to_string(extent) +
                                    " px does not fit in a " + std::to_string(s.height) + "x" +
                                    std::to_string(s.width) + " frame");
    }
    if (s.cy < 0 || s.cy > s.height || s.cx < 0 || s.cx > s.width) {
        throw std::invalid_argument("video spec: initial centre outside the frame");
    }
}

int texture_count(int num_classes) { return std::clamp(num_classes, 4, kNumTextures); }

// Nearest background pixel (squared Euclidean, ties to row-major first) for each
// foreground pixel of one frame.
void fill_nearest_background(FrameVolume& out, const FrameVolume& src, int k, const Mask2D& fg) {
    std::vector<std::pair<int, int>> bg;
    for (int y = 0; y < src.h; ++y)
        for (int x = 0; x < src.w; ++x)
            if (!fg(y, x)) bg.emplace_back(y, x);
    if (bg.empty()) return;
    for (int y = 0; y < src.h; ++y) {
        for (int x = 0; x < src.w; ++x) {
            if (!fg(y, x)) continue;
            long best = std::numeric_limits<long>::max();
            std::pair<int, int> arg{};
            for (const auto& [by, bx] : bg) {
                const long d = long(by - y) * (by - y) + long(bx - x) * (bx - x);
                if (d < best) {
                    best = d;
                    arg = {by, bx};
                }
            }
            for (int c = 0; c < 3; ++c) out.at(k, y, x, c) = src.at(k, arg.first, arg.second, c);
        }
    }
}

// Fills the foreground by tiling a background patch taken from the region of the
// frame farthest from the object that does not overlap it.
void fill_tiled_background(FrameVolume& out, const FrameVolume& src, int k, const Mask2D& fg) {
    const auto box = mask_bbox(fg);
    if (!box) return;
    // Integral image of the mask for O(1) overlap tests.
    Eigen::ArrayXXi integral = Eigen::ArrayXXi::Zero(src.h + 1, src.w + 1);
    for (int y = 0; y < src.h; ++y)
        for (int x = 0; x < src.w; ++x)
            integral(y + 1, x + 1) = (fg(y, x) ? 1 : 0) + integral(y, x + 1) + integral(y + 1, x) - integral(y, x);
    auto overlap = [&](int y, int x, int ph, int pw) {
        return integral(y + ph, x + pw) - integral(y, x + pw) - integral(y + ph, x) + integral(y, x);
    };
    const double oy = (box->y0 + box->y1) / 2.0, ox = (box->x0 + box->x1) / 2.0;

    for (int ph = box->height(), pw = box->width(); ph >= 2 && pw >= 2; ph /= 2, pw /= 2) {
        double best = -1.0;
        int by = -1, bx = -1;
        for (int y = 0; y + ph <= src.h; ++y) {
            for (int x = 0; x + pw <= src.w; ++x) {
                if (overlap(y, x, ph, pw) != 0) continue;
                const double d = std::hypot(y + ph / 2.0 - oy, x + pw / 2.0 - ox);
                if (d > best) {
                    best = d;
                    by = y;
                    bx = x;
                }
            }
        }
        if (by < 0) continue;
        for (int y = box->y0; y < box->y1; ++y) {
            for (int x = box->x0; x < box->x1; ++x) {
                if (!fg(y, x)) continue;
                const int sy = by + (y - box->y0) % ph, sx = bx + (x - box->x0) % pw;
                for (int c = 0; c < 3; ++c) out.at(k, y, x, c) = src.at(k, sy, sx, c);
            }
        }
        return;
    }
    fill_nearest_background(out, src, k, fg);
}

}  // namespace

bool shape_contains(ShapeClass shape, double r, double dy, double dx) {
    switch (shape) {
        case ShapeClass::Circle: return dx * dx + dy * dy <= r * r;
        case ShapeClass::Square: return std::abs(dx) <= 0.886 * r && std::abs(dy) <= 0.886 * r;
        case ShapeClass::Triangle: {
            // Upward equilateral triangle with circumradius R, area matched to the circle.
            const double R = 1.555 * r;
            const double s3 = std::sqrt(3.0);
            return dy <= R / 2.0 && s3 * dx - dy <= R && -s3 * dx - dy <= R;
        }
        case ShapeClass::Cross: {
            const double arm = 0.42 * r, len = 1.1 * r;
            return (std::abs(dx) <= arm && std::abs(dy) <= len) || (std::abs(dy) <= arm && std::abs(dx) <= len);
        }
        case ShapeClass::Diamond: return std::abs(dx) + std::abs(dy) <= 1.25 * r;
        case ShapeClass::Ring: {
            const double d2 = dx * dx + dy * dy;
            return d2 <= 1.21 * r * r && d2 >= 0.36 * r * r;
        }
    }
    return false;
}

GeneratedVideo generate_video(const VideoSpec& spec, std::uint64_t seed) {
    validate(spec);
    Rng rng(seed);
    const Background bg = render_background(spec.texture, spec.height, spec.width, rng);

    Rgb color = kPalette[static_cast<std::size_t>(spec.palette_index) % kPalette.size()];
    for (auto& c : color) c = std::clamp(c + rng.uniform(-0.05, 0.05), 0.0, 1.0);
    std::array<float, 3> fg_color{};
    for (int c = 0; c < 3; ++c) fg_color[c] = quantize(color[c]);

    GeneratedVideo out{FrameVolume(spec.frames, spec.height, spec.width, spec.fps),
                       GroundTruth{MaskVolume(spec.frames, spec.height, spec.width),
                                   static_cast<int>(spec.shape), {}}};
    const double ext = shape_extent(spec.shape);
    double cy = spec.cy, cx = spec.cx, vy = spec.vy, vx = spec.vx;

    for (int k = 0; k < spec.frames; ++k) {
        const double r = std::max(1.5, spec.radius * (1.0 + spec.scale_rate * k));
        if (k > 0) {
            cy += vy;
            cx += vx;
            if (spec.motion == MotionMode::Bounce) {
                const double lo = ext * r, hy = spec.height - ext * r, hx = spec.width - ext * r;
                if (cy < lo) { cy = 2 * lo - cy; vy = -vy; }
                if (cy > hy) { cy = 2 * hy - cy; vy = -vy; }
                if (cx < lo) { cx = 2 * lo - cx; vx = -vx; }
                if (cx > hx) { cx = 2 * hx - cx; vx = -vx; }
            }
        }
        double py = cy, px = cx;
        if (spec.teleport_frame >= 0 && k >= spec.teleport_frame) {
            py = spec.height - cy;
            px = spec.width - cx;
        }
        out.gt.trajectory.push_back({py, px});

        Mask2D& mask = out.gt.fg_mask.frames[k];
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                const bool inside = shape_contains(spec.shape, r, y + 0.5 - py, x + 0.5 - px);
                mask(y, x) = inside ? 1 : 0;
                for (int c = 0; c < 3; ++c) {
                    out.video.at(k, y, x, c) = inside ? fg_color[c] : static_cast<float>(bg.at(y, x)[c]);
                }
            }
        }
    }
    return out;
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::Original: return "original";
        case Variant::OnlyFG: return "only_fg";
        case Variant::NoFG: return "no_fg";
        case Variant::OnlyBG_B: return "only_bg_b";
        case Variant::OnlyBG_T: return "only_bg_t";
        case Variant::MixedSame: return "mixed_same";
        case Variant::MixedRand: return "mixed_rand";
        case Variant::MixedNext: return "mixed_next";
    }
    return "?";
}

Variant parse_variant(const std::string& name) {
    for (Variant v : kAllVariants) {
        if (variant_name(v) == name) return v;
    }
    throw std::invalid_argument("unknown variant '" + name + "'");
}

bool variant_needs_donor(Variant v) {
    return v == Variant::MixedSame || v == Variant::MixedRand || v == Variant::MixedNext;
}

FrameVolume composite_variant(const FrameVolume& video, const GroundTruth& gt, Variant variant,
                              const std::optional<Donor>& donor, int num_classes) {
    if (gt.fg_mask.t != video.t || gt.fg_mask.h != video.h || gt.fg_mask.w != video.w) {
        throw std::invalid_argument("composite_variant: mask dims do not match video");
    }
    FrameVolume out = video;
    switch (variant) {
        case Variant::Original: return out;
        case Variant::OnlyFG:
        case Variant::OnlyBG_B: {
            const bool keep_fg = variant == Variant::OnlyFG;
            for (int k = 0; k < video.t; ++k)
                for (int y = 0; y < video.h; ++y)
                    for (int x = 0; x < video.w; ++x)
                        if ((gt.fg_mask.frames[k](y, x) != 0) != keep_fg)
                            for (int c = 0; c < 3; ++c) out.at(k, y, x, c) = 0.0f;
            return out;
        }
        case Variant::NoFG:
            for (int k = 0; k < video.t; ++k) fill_nearest_background(out, video, k, gt.fg_mask.frames[k]);
            return out;
        case Variant::OnlyBG_T:
            for (int k = 0; k < video.t; ++k) fill_tiled_background(out, video, k, gt.fg_mask.frames[k]);
            return out;
        case Variant::MixedSame:
        case Variant::MixedRand:
        case Variant::MixedNext: break;
    }

    if (!donor) throw std::invalid_argument(variant_name(variant) + " requires a donor video");
    const int dc = donor->gt.class_id;
    if (variant == Variant::MixedSame && dc != gt.class_id) {
        throw std::invalid_argument("mixed_same donor must share the class (" + std::to_string(gt.class_id) +
                                    "), got " + std::to_string(dc));
    }
    if (variant == Variant::MixedNext) {
        if (num_classes < 2) throw std::invalid_argument("mixed_next needs the class count");
        const int want = (gt.class_id + 1) % num_classes;
        if (dc != want) {
            throw std::invalid_argument("mixed_next donor must have class " + std::to_string(want) + ", got " +
                                        std::to_string(dc));
        }
    }
    if (donor->video.h != video.h || donor->video.w != video.w) {
        throw std::invalid_argument("donor frame size differs from the video");
    }
    const FrameVolume donor_bg = composite_variant(donor->video, donor->gt, Variant::NoFG);
    for (int k = 0; k < video.t; ++k) {
        const int dk = k % donor_bg.t;
        const Mask2D& fg = gt.fg_mask.frames[k];
        for (int y = 0; y < video.h; ++y)
            for (int x = 0; x < video.w; ++x)
                if (!fg(y, x))
                    for (int c = 0; c < 3; ++c) out.at(k, y, x, c) = donor_bg.at(dk, y, x, c);
    }
    return out;
}

VideoSpec random_video_spec(const CorpusConfig& config, int class_id, Rng& rng) {
    VideoSpec s;
    s.frames = config.frames;
    s.height = config.height;
    s.width = config.width;
    s.fps = config.fps;
    s.shape = static_cast<ShapeClass>(class_id);
    const int ntex = texture_count(config.num_classes);
    s.texture = rng.bernoulli(config.bias_strength) ? static_cast<Texture>(class_id % ntex)
                                                     : static_cast<Texture>(rng.uniform_int(0, ntex - 1));
    s.palette_index = class_id % static_cast<int>(kPalette.size());
    s.radius = rng.uniform(config.radius_min, config.radius_max);
    if (rng.bernoulli(config.scale_change_prob)) s.scale_rate = rng.uniform(-config.scale_rate_max, config.scale_rate_max);

    const double ext = shape_extent(s.shape);
    const double r_max = std::max(s.radius, s.radius * (1.0 + s.scale_rate * (s.frames - 1)));
    const double margin = ext * r_max + 1.0;
    s.cy = rng.uniform(margin, std::max(margin, s.height - margin));
    s.cx = rng.uniform(margin, std::max(margin, s.width - margin));
    const double speed = rng.uniform(0.3, config.speed_max);
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    s.vy = speed * std::sin(angle);
    s.vx = speed * std::cos(angle);
    return s;
}

const ManifestEntry& CorpusManifest::find(const std::string& video_id) const {
    for (const auto& e : entries) {
        if (e.video_id == video_id) return e;
    }
    throw std::out_of_range("unknown video id '" + video_id + "'");
}

int CorpusManifest::num_classes() const {
    int c = 0;
    for (const auto& e : entries) c = std::max(c, e.class_id + 1);
    return c;
}

void CorpusManifest::save() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : entries) {
        j["entries"].push_back({{"video_id", e.video_id},
                                {"path", e.path},
                                {"class_id", e.class_id},
                                {"t", e.t},
                                {"h", e.h},
                                {"w", e.w}});
    }
    std::filesystem::create_directories(root);
    std::ofstream os(root / "manifest.json");
    if (!os) throw std::runtime_error("cannot write " + (root / "manifest.json").string());
    os << j.dump(2) << '\n';
}

CorpusManifest CorpusManifest::load(const std::filesystem::path& root) {
    const auto path = root / "manifest.json";
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    CorpusManifest m;
    m.root = root;
    try {
        const auto j = nlohmann::json::parse(is);
        m.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& e : j.at("entries")) {
            m.entries.push_back({e.at("video_id").get<std::string>(), e.at("path").get<std::string>(),
                                 e.at("class_id").get<int>(), e.at("t").get<int>(), e.at("h").get<int>(),
                                 e.at("w").get<int>()});
        }
    } catch (const nlohmann::json::exception& ex) {
        throw std::runtime_error("corrupt manifest " + path.string() + ": " + ex.what());
    }
    return m;
}

void save_video(const std::filesystem::path& path, const FrameVolume& video, const GroundTruth& gt) {
    ArrayStore store;
    const std::vector<std::int64_t> dims{video.t, video.h, video.w, 3};
    // Generated pixels are exact multiples of 1/255 and are stored losslessly as bytes.
    std::vector<std::uint8_t> codes(static_cast<std::size_t>(video.pixels.size()));
    bool exact = true;
    for (std::ptrdiff_t i = 0; i < video.pixels.size() && exact; ++i) {
        const long code = std::lround(video.pixels[i] * 255.0f);
        exact = code >= 0 && code <= 255 && static_cast<float>(code) / 255.0f == video.pixels[i];
        codes[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(code);
    }
    if (exact) {
        store.put_u8("pixels", dims, codes);
    } else {
        store.put_f32("pixels", dims, std::span<const float>(video.pixels.data(), video.pixels.size()));
    }
    std::vector<std::uint8_t> mask;
    mask.reserve(static_cast<std::size_t>(video.t) * video.h * video.w);
    for (const auto& f : gt.fg_mask.frames) mask.insert(mask.end(), f.data(), f.data() + f.size());
    store.put_u8("fg_mask", {gt.fg_mask.t, gt.fg_mask.h, gt.fg_mask.w}, mask);
    std::vector<double> traj;
    for (const auto& p : gt.trajectory) traj.insert(traj.end(), p.begin(), p.end());
    store.put_f64("trajectory", {static_cast<std::int64_t>(gt.trajectory.size()), 2}, traj);
    const std::int32_t cls = gt.class_id;
    store.put_i32("class_id", {1}, std::span<const std::int32_t>(&cls, 1));
    const double fps = video.fps;
    store.put_f64("fps", {1}, std::span<const double>(&fps, 1));
    store.save(path);
}

GeneratedVideo load_video_file(const std::filesystem::path& path) {
    const ArrayStore store = ArrayStore::load(path);
    try {
        const auto& d = store.dims("pixels");
        if (d.size() != 4 || d[3] != 3) throw std::runtime_error("bad pixel dims");
        GeneratedVideo out{FrameVolume(static_cast<int>(d[0]), static_cast<int>(d[1]), static_cast<int>(d[2]),
                                       store.get_f64("fps").at(0)),
                           {}};
        if (store.entry("pixels").dtype == DType::U8) {
            const auto codes = store.get_u8("pixels");
            for (std::size_t i = 0; i < codes.size(); ++i) {
                out.video.pixels[static_cast<std::ptrdiff_t>(i)] = static_cast<float>(codes[i]) / 255.0f;
            }
        } else {
            const auto px = store.get_f32("pixels");
            out.video.pixels = Eigen::Map<const ArrayX<float>>(px.data(), static_cast<std::ptrdiff_t>(px.size()));
        }
        const auto& md = store.dims("fg_mask");
        out.gt.fg_mask = MaskVolume(static_cast<int>(md[0]), static_cast<int>(md[1]), static_cast<int>(md[2]));
        const auto mask = store.get_u8("fg_mask");
        const std::size_t plane = static_cast<std::size_t>(md[1] * md[2]);
        for (int k = 0; k < out.gt.fg_mask.t; ++k) {
            std::copy_n(mask.begin() + static_cast<std::ptrdiff_t>(k * plane), plane, out.gt.fg_mask.frames[k].data());
        }
        const auto traj = store.get_f64("trajectory");
        for (std::size_t i = 0; i + 1 < traj.size(); i += 2) out.gt.trajectory.push_back({traj[i], traj[i + 1]});
        out.gt.class_id = store.get_i32("class_id").at(0);
        return out;
    } catch (const std::out_of_range& e) {
        throw std::runtime_error("corrupt video file " + path.string() + ": " + e.what());
    }
}

GeneratedVideo load_video(const CorpusManifest& manifest, const std::string& video_id) {
    return load_video_file(manifest.root / manifest.find(video_id).path);
}

CorpusManifest build_corpus(const CorpusConfig& config, const std::filesystem::path& out_dir, int jobs) {
    if (config.num_classes < 2 || config.num_classes > kNumShapes) {
        throw std::invalid_argument("num_classes must be in [2, " + std::to_string(kNumShapes) + "]");
    }
    if (config.videos_per_class < 1) throw std::invalid_argument("videos_per_class must be >= 1");

    CorpusManifest manifest;
    manifest.seed = config.seed;
    manifest.root = out_dir;
    for (int c = 0; c < config.num_classes; ++c) {
        for (int i = 0; i < config.videos_per_class; ++i) {
            char id[32];
            std::snprintf(id, sizeof(id), "c%d_%04d", c, i);
            manifest.entries.push_back({id, std::string("videos/") + id + ".pva", c, config.frames, config.height,
                                        config.width});
        }
    }
    std::filesystem::create_directories(out_dir / "videos");

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < manifest.entries.size(); i = next++) {
            const auto& e = manifest.entries[i];
            Rng rng = Rng::derive(config.seed, e.video_id);
            const VideoSpec spec = random_video_spec(config, e.class_id, rng);
            const std::uint64_t video_seed = rng.next_u64();
            const auto gen = generate_video(spec, video_seed);
            save_video(out_dir / e.path, gen.video, gen.gt);

            nlohmann::json side = {{"video_id", e.video_id},    {"class_id", e.class_id},
                                   {"shape", static_cast<int>(spec.shape)},
                                   {"texture", static_cast<int>(spec.texture)},
                                   {"palette_index", spec.palette_index},
                                   {"radius", spec.radius},     {"scale_rate", spec.scale_rate},
                                   {"cy", spec.cy},             {"cx", spec.cx},
                                   {"vy", spec.vy},             {"vx", spec.vx},
                                   {"fps", spec.fps},           {"seed", video_seed}};
            std::ofstream os(out_dir / "videos" / (e.video_id + ".json"));
            os << side.dump(2) << '\n';
        }
    };
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    manifest.save();
    return manifest;
}

CorpusSplit split_corpus(const CorpusManifest& manifest, double train_fraction) {
    CorpusSplit split;
    const int classes = manifest.num_classes();
    for (int c = 0; c < classes; ++c) {
        std::vector<std::string> ids;
        for (const auto& e : manifest.entries)
            if (e.class_id == c) ids.push_back(e.video_id);
        const auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(ids.size())));
        for (std::size_t i = 0; i < ids.size(); ++i) (i < n_train ? split.train : split.test).push_back(ids[i]);
    }
    return split;
}

}  // namespace previts
