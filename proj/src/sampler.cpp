#include "previts/sampler.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace previts {

namespace {

// Summed-area table; area(y, x, h, w) in O(1).
class Integral {
public:
    explicit Integral(const Mask2D& m) : table_(Eigen::ArrayXXi::Zero(m.rows() + 1, m.cols() + 1)) {
        for (int y = 0; y < m.rows(); ++y)
            for (int x = 0; x < m.cols(); ++x)
                table_(y + 1, x + 1) = (m(y, x) ? 1 : 0) + table_(y, x + 1) + table_(y + 1, x) - table_(y, x);
    }
    long total() const { return table_(table_.rows() - 1, table_.cols() - 1); }
    long area(int y, int x, int h, int w) const {
        return table_(y + h, x + w) - table_(y, x + w) - table_(y + h, x) + table_(y, x);
    }

private:
    Eigen::ArrayXXi table_;
};

double overlap_of(const Integral& in, int y, int x, int size, OverlapMeasure measure) {
    const long total = in.total();
    const long inter = in.area(y, x, size, size);
    if (measure == OverlapMeasure::Coverage) return static_cast<double>(inter) / static_cast<double>(total);
    return static_cast<double>(inter) / static_cast<double>(total + long(size) * size - inter);
}

int active_span(const FrameVolume& video, const TrackingTube* tube) {
    return tube ? tube->active_length() : video.t;
}

std::vector<Mask2D> window_masks(const TrackingTube& tube, int start, int count, int stride) {
    std::vector<Mask2D> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) out.push_back(tube.masks.frames[static_cast<std::size_t>(start + k * stride)]);
    return out;
}

CropGeometry crop_window(const FrameVolume& video, const TrackingTube* tube, const SamplerConfig& config,
                         int start, int speed, Rng& rng, bool& fallback) {
    CropGeometry g{start, config.t_len, 0, 0, config.crop, config.crop, speed};
    if (tube) {
        const auto masks = window_masks(*tube, start, config.t_len, speed);
        const SpatialCrop c = sample_spatial_crop(masks, config.crop, config.mu, rng, config.max_tries, config.measure);
        g.y = c.y;
        g.x = c.x;
        fallback = c.fallback;
    } else {
        g.y = static_cast<int>(rng.uniform_int(0, video.h - config.crop));
        g.x = static_cast<int>(rng.uniform_int(0, video.w - config.crop));
        fallback = false;
    }
    return g;
}

void check_crop(const FrameVolume& video, const SamplerConfig& config) {
    if (config.crop > std::min(video.h, video.w)) {
        throw std::invalid_argument("crop size " + std::to_string(config.crop) + " exceeds the frame");
    }
}

}  // namespace

TemporalStrategy parse_temporal_strategy(const std::string& text) {
    if (text == "varying") return TemporalStrategy::varying();
    if (text == "zero") return TemporalStrategy::zero();
    if (text.rfind("constant:", 0) == 0) return TemporalStrategy::constant(std::stoi(text.substr(9)));
    throw std::invalid_argument("unknown delta strategy '" + text + "'");
}

std::string to_string(const TemporalStrategy& s) {
    switch (s.kind) {
        case DeltaKind::Varying: return "varying";
        case DeltaKind::Zero: return "zero";
        case DeltaKind::Constant: return "constant:" + std::to_string(s.delta);
    }
    return "?";
}

std::pair<int, int> sample_temporal_window(int active_length, int t_len, const TemporalStrategy& strategy, Rng& rng) {
    if (t_len < 1) throw std::invalid_argument("t_len must be >= 1");
    const int needed = strategy.kind == DeltaKind::Zero       ? t_len
                       : strategy.kind == DeltaKind::Constant ? t_len + std::max(strategy.delta, 1)
                                                              : t_len + 1;
    if (active_length < needed) {
        throw InsufficientTube("insufficient tube: " + std::to_string(active_length) + " active frames, need " +
                               std::to_string(needed));
    }
    const int last = active_length - t_len;
    switch (strategy.kind) {
        case DeltaKind::Zero: {
            const int t = static_cast<int>(rng.uniform_int(0, last));
            return {t, t};
        }
        case DeltaKind::Constant: {
            const int lo = static_cast<int>(rng.uniform_int(0, last - strategy.delta));
            return rng.bernoulli(0.5) ? std::pair{lo, lo + strategy.delta} : std::pair{lo + strategy.delta, lo};
        }
        case DeltaKind::Varying: break;
    }
    const int tq = static_cast<int>(rng.uniform_int(0, last));
    const int tk = static_cast<int>(rng.uniform_int(0, last));
    return {tq, tk};
}

std::pair<int, int> sample_temporal_window(const TrackingTube& tube, int t_len, const TemporalStrategy& strategy,
                                           Rng& rng) {
    return sample_temporal_window(tube.active_length(), t_len, strategy, rng);
}

double crop_overlap(const Mask2D& mask, int y, int x, int size, OverlapMeasure measure) {
    const Integral in(mask);
    if (in.total() == 0) throw std::invalid_argument("crop_overlap: empty mask");
    return overlap_of(in, y, x, size, measure);
}

SpatialCrop sample_spatial_crop(std::span<const Mask2D> masks, int size, double mu, Rng& rng, int max_tries,
                                OverlapMeasure measure) {
    if (masks.empty()) throw std::invalid_argument("sample_spatial_crop: no masks");
    const int h = static_cast<int>(masks[0].rows()), w = static_cast<int>(masks[0].cols());
    if (size > std::min(h, w) || size < 1) throw std::invalid_argument("crop size does not fit the frame");
    std::vector<Integral> tables;
    tables.reserve(masks.size());
    for (const auto& m : masks) {
        tables.emplace_back(m);
        if (tables.back().total() == 0) throw std::invalid_argument("sample_spatial_crop: empty mask");
    }
    auto worst = [&](int y, int x) {
        double o = 1.0;
        for (const auto& t : tables) o = std::min(o, overlap_of(t, y, x, size, measure));
        return o;
    };

    for (int i = 0; i < max_tries; ++i) {
        const int y = static_cast<int>(rng.uniform_int(0, h - size));
        const int x = static_cast<int>(rng.uniform_int(0, w - size));
        const double o = worst(y, x);
        if (o >= mu) return {y, x, false, o};
    }

    BBox u{h, w, 0, 0};
    for (const auto& m : masks) {
        const auto b = mask_bbox(m);
        u = {std::min(u.y0, b->y0), std::min(u.x0, b->x0), std::max(u.y1, b->y1), std::max(u.x1, b->x1)};
    }
    const int y = std::clamp((u.y0 + u.y1 - size) / 2, 0, h - size);
    const int x = std::clamp((u.x0 + u.x1 - size) / 2, 0, w - size);
    return {y, x, true, worst(y, x)};
}

SpatialCrop sample_spatial_crop(const Mask2D& mask, int size, double mu, Rng& rng, int max_tries,
                                OverlapMeasure measure) {
    return sample_spatial_crop(std::span<const Mask2D>(&mask, 1), size, mu, rng, max_tries, measure);
}

std::pair<FrameVolume, MaskVolume> crop_clip(const FrameVolume& video, const TrackingTube* tube,
                                             const CropGeometry& g) {
    FrameVolume clip = video.clip(g.t_start, g.t_len, g.speed, g.y, g.x, g.crop_h, g.crop_w);
    MaskVolume masks;
    if (tube) {
        masks = tube->masks.clip(g.t_start, g.t_len, g.speed, g.y, g.x, g.crop_h, g.crop_w);
    } else {
        masks = MaskVolume(g.t_len, g.crop_h, g.crop_w);
        for (auto& f : masks.frames) f.setOnes();
    }
    return {std::move(clip), std::move(masks)};
}

ClipPair sample_clip_pair(const FrameVolume& video, const TrackingTube* tube, const SamplerConfig& config, Rng& rng) {
    check_crop(video, config);
    const auto [tq, tk] = sample_temporal_window(active_span(video, tube), config.t_len, config.strategy, rng);
    ClipPair pair;
    pair.geom_q = crop_window(video, tube, config, tq, 1, rng, pair.fallback_q);
    pair.geom_k = crop_window(video, tube, config, tk, 1, rng, pair.fallback_k);
    std::tie(pair.x_q, pair.m_q) = crop_clip(video, tube, pair.geom_q);
    std::tie(pair.x_k, pair.m_k) = crop_clip(video, tube, pair.geom_k);
    pair.delta = std::abs(tk - tq);
    return pair;
}

SpeedTriplet sample_speed_triplet(const FrameVolume& video, const TrackingTube* tube, const SamplerConfig& config,
                                  Rng& rng) {
    check_crop(video, config);
    const int span = active_span(video, tube);
    const int fastest = *std::max_element(kSpeeds.begin(), kSpeeds.end());
    if (span < config.t_len * fastest + 1) {
        throw InsufficientTube("insufficient tube for speed triplet: " + std::to_string(span) + " active frames");
    }
    SpeedTriplet out;
    const int sa = kSpeeds[static_cast<std::size_t>(rng.uniform_int(0, kSpeeds.size() - 1))];
    const int sn = sa == kSpeeds[0] ? kSpeeds[1] : kSpeeds[0];
    out.speeds = {sa, sa, sn};

    const int last_a = span - config.t_len * sa;
    const int a_start = static_cast<int>(rng.uniform_int(0, last_a));
    int p_start = static_cast<int>(rng.uniform_int(0, last_a - 1));
    if (p_start >= a_start) ++p_start;  // distinct from the anchor
    const int n_start = static_cast<int>(rng.uniform_int(0, span - config.t_len * sn));

    const std::array<int, 3> starts{a_start, p_start, n_start};
    std::array<FrameVolume*, 3> clips{&out.anchor, &out.positive, &out.negative};
    for (int i = 0; i < 3; ++i) {
        bool fallback = false;
        out.geoms[i] = crop_window(video, tube, config, starts[i], out.speeds[i], rng, fallback);
        *clips[i] = crop_clip(video, tube, out.geoms[i]).first;
    }
    return out;
}

void apply_gaussian_blur(FrameVolume& clip, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double norm = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
        norm += kernel[static_cast<std::size_t>(i + radius)];
    }
    for (auto& k : kernel) k /= norm;
    auto reflect = [](int i, int n) {
        if (n == 1) return 0;
        while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
        return i;
    };
    FrameVolume tmp = clip;
    for (int k = 0; k < clip.t; ++k) {
        for (int y = 0; y < clip.h; ++y)
            for (int x = 0; x < clip.w; ++x)
                for (int c = 0; c < 3; ++c) {
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i)
                        acc += kernel[static_cast<std::size_t>(i + radius)] * clip.at(k, y, reflect(x + i, clip.w), c);
                    tmp.at(k, y, x, c) = static_cast<float>(acc);
                }
        for (int y = 0; y < clip.h; ++y)
            for (int x = 0; x < clip.w; ++x)
                for (int c = 0; c < 3; ++c) {
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i)
                        acc += kernel[static_cast<std::size_t>(i + radius)] * tmp.at(k, reflect(y + i, clip.h), x, c);
                    clip.at(k, y, x, c) = static_cast<float>(acc);
                }
    }
}

void apply_color_jitter(FrameVolume& clip, double brightness, double contrast, double saturation) {
    auto& p = clip.pixels;
    p *= static_cast<float>(brightness);
    if (contrast != 1.0) {
        double grey_sum = 0.0;
        for (std::ptrdiff_t i = 0; i < p.size(); i += 3) grey_sum += (p[i] + p[i + 1] + p[i + 2]) / 3.0;
        const float mean = static_cast<float>(grey_sum / static_cast<double>(p.size() / 3));
        p = (p - mean) * static_cast<float>(contrast) + mean;
    }
    if (saturation != 1.0) {
        for (std::ptrdiff_t i = 0; i < p.size(); i += 3) {
            const float grey = (p[i] + p[i + 1] + p[i + 2]) / 3.0f;
            for (int c = 0; c < 3; ++c) p[i + c] = grey + (p[i + c] - grey) * static_cast<float>(saturation);
        }
    }
}

FrameVolume augment(const FrameVolume& clip, Rng& rng, const AugmentConfig& config) {
    FrameVolume out = clip;
    if (rng.bernoulli(config.jitter_prob)) {
        const double b = rng.uniform(config.factor_min, config.factor_max);
        const double c = rng.uniform(config.factor_min, config.factor_max);
        const double s = rng.uniform(config.factor_min, config.factor_max);
        apply_color_jitter(out, b, c, s);
    }
    if (rng.bernoulli(config.blur_prob)) apply_gaussian_blur(out, rng.uniform(config.sigma_min, config.sigma_max));
    out.pixels = out.pixels.max(0.0f).min(1.0f);
    return out;
}

std::string sampling_record(const std::string& video_id, const ClipPair& pair) {
    auto geom = [](const CropGeometry& g) {
        return nlohmann::json{{"t_start", g.t_start}, {"t_len", g.t_len}, {"y", g.y},         {"x", g.x},
                              {"crop_h", g.crop_h},   {"crop_w", g.crop_w}, {"speed", g.speed}};
    };
    nlohmann::json row = {{"video_id", video_id},
                          {"geom_q", geom(pair.geom_q)},
                          {"geom_k", geom(pair.geom_k)},
                          {"delta", pair.delta},
                          {"fallback_used", pair.fallback_q || pair.fallback_k}};
    return row.dump();
}

}  // namespace previts
