#include "previts/tracking.hpp"

#include "previts/array_store.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

namespace previts {

namespace {

// Pixel colour in an opponent space: chroma (colour minus its grey level) plus a
// down-weighted luminance axis, so luminance-only texture variation reads as close
// to the background while saturated foreground reads as far.
constexpr double kLuminanceWeight = 0.25;

std::array<double, 4> opponent(const FrameVolume& v, int k, int y, int x) {
    const double r = v.at(k, y, x, 0), g = v.at(k, y, x, 1), b = v.at(k, y, x, 2);
    const double lum = (r + g + b) / 3.0;
    return {r - lum, g - lum, b - lum, kLuminanceWeight * lum};
}

void finalize(TrackingTube& tube) {
    for (int k = 0; k < tube.frames(); ++k) {
        tube.areas[k] = mask_area(tube.masks.frames[k]);
        tube.active[k] = tube.areas[k] > 0;
        tube.bboxes[k] = mask_bbox(tube.masks.frames[k]).value_or(BBox{});
    }
}

TrackingTube empty_tube(int t, int h, int w) {
    TrackingTube tube;
    tube.masks = MaskVolume(t, h, w);
    tube.active.assign(t, false);
    tube.areas.assign(t, 0);
    tube.bboxes.assign(t, BBox{});
    return tube;
}

}  // namespace

SaliencyBackend parse_saliency_backend(const std::string& name) {
    if (name == "oracle") return SaliencyBackend::Oracle;
    if (name == "contrast" || name == "color_contrast") return SaliencyBackend::ColorContrast;
    throw std::invalid_argument("unknown saliency backend '" + name + "'");
}

double otsu_threshold(const std::vector<double>& values, int bins) {
    const double hi = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
    if (!(hi > 0.0)) return 0.0;
    std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
    for (double v : values) {
        const int b = std::min(bins - 1, static_cast<int>(v / hi * bins));
        hist[static_cast<std::size_t>(b)] += 1.0;
    }
    const double total = static_cast<double>(values.size());
    double sum_all = 0.0;
    for (int b = 0; b < bins; ++b) sum_all += b * hist[static_cast<std::size_t>(b)];
    double w0 = 0.0, sum0 = 0.0, best = -1.0;
    int best_bin = 0;
    for (int b = 0; b < bins - 1; ++b) {
        w0 += hist[static_cast<std::size_t>(b)];
        sum0 += b * hist[static_cast<std::size_t>(b)];
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best) {
            best = between;
            best_bin = b;
        }
    }
    // Values strictly above the upper edge of the best bin are foreground.
    return (best_bin + 1) * hi / bins;
}

SaliencyMask compute_saliency(const FrameVolume& video, int k, SaliencyBackend backend, const GroundTruth* gt) {
    if (k < 0 || k >= video.t) throw std::out_of_range("saliency frame index out of range");
    if (backend == SaliencyBackend::Oracle) {
        if (!gt) throw std::invalid_argument("oracle saliency requires ground truth");
        const Mask2D& m = gt->fg_mask.frames.at(static_cast<std::size_t>(k));
        if (mask_area(m) == 0) throw NoSalientObject("no salient object in frame " + std::to_string(k));
        return {m, k};
    }

    // Modal background colour: most populated cell of a 16-level RGB histogram,
    // averaged over its members.
    std::map<int, std::pair<int, std::array<double, 4>>> cells;
    for (int y = 0; y < video.h; ++y) {
        for (int x = 0; x < video.w; ++x) {
            int key = 0;
            for (int c = 0; c < 3; ++c) key = key * 16 + std::min(15, static_cast<int>(video.at(k, y, x, c) * 16.0f));
            auto& [n, acc] = cells[key];
            const auto o = opponent(video, k, y, x);
            ++n;
            for (int i = 0; i < 4; ++i) acc[i] += o[i];
        }
    }
    auto mode = std::max_element(cells.begin(), cells.end(),
                                 [](const auto& a, const auto& b) { return a.second.first < b.second.first; });
    std::array<double, 4> modal = mode->second.second;
    for (auto& v : modal) v /= mode->second.first;

    std::vector<double> dist(static_cast<std::size_t>(video.h) * video.w);
    for (int y = 0; y < video.h; ++y) {
        for (int x = 0; x < video.w; ++x) {
            const auto o = opponent(video, k, y, x);
            double d2 = 0.0;
            for (int i = 0; i < 4; ++i) d2 += (o[i] - modal[i]) * (o[i] - modal[i]);
            dist[static_cast<std::size_t>(y) * video.w + x] = std::sqrt(d2);
        }
    }
    const double max_d = *std::max_element(dist.begin(), dist.end());
    if (max_d < 1e-6) throw NoSalientObject("uniform frame " + std::to_string(k) + " has no salient object");
    const double thr = otsu_threshold(dist);
    Mask2D raw(video.h, video.w);
    for (int y = 0; y < video.h; ++y)
        for (int x = 0; x < video.w; ++x) raw(y, x) = dist[static_cast<std::size_t>(y) * video.w + x] > thr ? 1 : 0;
    if (mask_area(raw) == 0) throw NoSalientObject("no pixel above threshold in frame " + std::to_string(k));
    return {largest_region(raw), k};
}

Mask2D largest_region(const Mask2D& mask) {
    const int h = static_cast<int>(mask.rows()), w = static_cast<int>(mask.cols());
    Eigen::ArrayXXi label = Eigen::ArrayXXi::Zero(h, w);
    int next = 0, best = 0;
    long best_area = 0;
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask(y, x) || label(y, x)) continue;
            ++next;
            long area = 0;
            stack.assign(1, {y, x});
            label(y, x) = next;
            while (!stack.empty()) {
                auto [cy, cx] = stack.back();
                stack.pop_back();
                ++area;
                constexpr int dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
                for (int d = 0; d < 4; ++d) {
                    const int ny = cy + dy[d], nx = cx + dx[d];
                    if (ny < 0 || ny >= h || nx < 0 || nx >= w || !mask(ny, nx) || label(ny, nx)) continue;
                    label(ny, nx) = next;
                    stack.emplace_back(ny, nx);
                }
            }
            if (area > best_area) {
                best_area = area;
                best = next;
            }
        }
    }
    if (best == 0) throw EmptyMask();
    return (label == best).cast<std::uint8_t>();
}

int TrackingTube::active_length() const {
    int n = 0;
    while (n < frames() && active[static_cast<std::size_t>(n)]) ++n;
    return n;
}

TrackingTube extract_tube(const FrameVolume& video, const SaliencyMask& seed_mask, SaliencyBackend backend,
                          const GroundTruth* gt, const TubeOptions& options) {
    if (seed_mask.mask.rows() != video.h || seed_mask.mask.cols() != video.w) {
        throw std::invalid_argument("seed mask dims do not match the video");
    }
    if (!(options.iou_gate > 0.0 && options.iou_gate <= 1.0)) {
        throw std::invalid_argument("iou_gate must lie in (0, 1]");
    }
    if (mask_area(seed_mask.mask) == 0) throw std::invalid_argument("seed mask is empty");

    TrackingTube tube = empty_tube(video.t, video.h, video.w);
    Mask2D previous = largest_region(seed_mask.mask);
    tube.masks.frames[0] = previous;
    for (int k = 1; k < video.t; ++k) {
        std::optional<Mask2D> candidate;
        try {
            candidate = compute_saliency(video, k, backend, gt).mask;
            candidate = largest_region(*candidate);
        } catch (const NoSalientObject&) {
            candidate.reset();
        }
        if (candidate && mask_iou(*candidate, previous) >= options.iou_gate) {
            tube.masks.frames[k] = *candidate;
            previous = *candidate;
        } else if (options.terminate_on_failure) {
            break;
        }
    }
    finalize(tube);
    return tube;
}

TrackingTube tube_from_ground_truth(const GroundTruth& gt) {
    TrackingTube tube = empty_tube(gt.fg_mask.t, gt.fg_mask.h, gt.fg_mask.w);
    tube.masks = gt.fg_mask;
    finalize(tube);
    return tube;
}

std::optional<TrackingTube> degrade_tube(const TrackingTube& tube, TubeDegradation mode) {
    if (mode == TubeDegradation::None) return std::nullopt;
    TrackingTube out = tube;
    for (int k = 0; k < out.frames(); ++k) {
        Mask2D& m = out.masks.frames[k];
        if (const auto box = mask_bbox(m)) {
            m.setZero();
            m.block(box->y0, box->x0, box->height(), box->width()).setOnes();
        }
    }
    finalize(out);
    return out;
}

void save_tube(const std::filesystem::path& path, const TrackingTube& tube) {
    ArrayStore store;
    const int t = tube.frames(), h = tube.masks.h, w = tube.masks.w;
    std::vector<std::uint8_t> masks;
    masks.reserve(static_cast<std::size_t>(t) * h * w);
    for (const auto& f : tube.masks.frames) masks.insert(masks.end(), f.data(), f.data() + f.size());
    store.put_u8("masks", {t, h, w}, masks);
    std::vector<std::uint8_t> active(tube.active.begin(), tube.active.end());
    store.put_u8("active", {t}, active);
    std::vector<std::int64_t> areas(tube.areas.begin(), tube.areas.end());
    store.put_i64("areas", {t}, areas);
    std::vector<std::int32_t> boxes;
    for (const auto& b : tube.bboxes) boxes.insert(boxes.end(), {b.y0, b.x0, b.y1, b.x1});
    store.put_i32("bboxes", {t, 4}, boxes);
    store.save(path);
}

TrackingTube load_tube(const std::filesystem::path& path) {
    const ArrayStore store = ArrayStore::load(path);
    try {
        const auto& d = store.dims("masks");
        const int t = static_cast<int>(d.at(0)), h = static_cast<int>(d.at(1)), w = static_cast<int>(d.at(2));
        TrackingTube tube = empty_tube(t, h, w);
        const auto masks = store.get_u8("masks");
        const auto plane = static_cast<std::ptrdiff_t>(h) * w;
        for (int k = 0; k < t; ++k) std::copy_n(masks.begin() + k * plane, plane, tube.masks.frames[k].data());
        finalize(tube);
        const auto areas = store.get_i64("areas");
        for (int k = 0; k < t; ++k) {
            if (areas.at(static_cast<std::size_t>(k)) != tube.areas[static_cast<std::size_t>(k)]) {
                throw std::runtime_error("areas disagree with masks");
            }
        }
        return tube;
    } catch (const std::exception& e) {
        throw std::runtime_error("corrupt tube file " + path.string() + ": " + e.what());
    }
}

}  // namespace previts
