#include "previts/video.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace previts {

namespace {

void check_window(int t, int h, int w, int start, int count, int stride, int y, int x, int sh, int sw) {
    const bool ok = count >= 1 && stride >= 1 && start >= 0 && start + (count - 1) * stride < t && y >= 0 &&
                    x >= 0 && sh >= 1 && sw >= 1 && y + sh <= h && x + sw <= w;
    if (!ok) {
        throw std::out_of_range("clip window out of bounds: start=" + std::to_string(start) +
                                " count=" + std::to_string(count) + " stride=" + std::to_string(stride) +
                                " y=" + std::to_string(y) + " x=" + std::to_string(x) + " size=" +
                                std::to_string(sh) + "x" + std::to_string(sw));
    }
}

}  // namespace

FrameVolume FrameVolume::clip(int start, int count, int stride, int y, int x, int size_h, int size_w) const {
    check_window(t, h, w, start, count, stride, y, x, size_h, size_w);
    FrameVolume out(count, size_h, size_w, fps / stride);
    for (int k = 0; k < count; ++k) {
        const int src = start + k * stride;
        for (int r = 0; r < size_h; ++r) {
            out.pixels.segment(out.index(k, r, 0), std::ptrdiff_t{size_w} * 3) =
                pixels.segment(index(src, y + r, x), std::ptrdiff_t{size_w} * 3);
        }
    }
    return out;
}

MaskVolume MaskVolume::clip(int start, int count, int stride, int y, int x, int size_h, int size_w) const {
    check_window(t, h, w, start, count, stride, y, x, size_h, size_w);
    MaskVolume out(count, size_h, size_w);
    for (int k = 0; k < count; ++k) out.frames[k] = frames[start + k * stride].block(y, x, size_h, size_w);
    return out;
}

bool MaskVolume::operator==(const MaskVolume& o) const {
    if (t != o.t || h != o.h || w != o.w) return false;
    for (int k = 0; k < t; ++k) {
        if (!(frames[k] == o.frames[k]).all()) return false;
    }
    return true;
}

std::optional<BBox> mask_bbox(const Mask2D& m) {
    BBox box{static_cast<int>(m.rows()), static_cast<int>(m.cols()), 0, 0};
    bool any = false;
    for (int y = 0; y < m.rows(); ++y) {
        for (int x = 0; x < m.cols(); ++x) {
            if (!m(y, x)) continue;
            any = true;
            box.y0 = std::min(box.y0, y);
            box.x0 = std::min(box.x0, x);
            box.y1 = std::max(box.y1, y + 1);
            box.x1 = std::max(box.x1, x + 1);
        }
    }
    if (!any) return std::nullopt;
    return box;
}

double mask_iou(const Mask2D& a, const Mask2D& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("mask_iou: size mismatch");
    const auto inter = ((a != 0) && (b != 0)).count();
    const auto uni = ((a != 0) || (b != 0)).count();
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

FrameVolume resize_frames(const FrameVolume& v, int out_h, int out_w) {
    if (out_h == v.h && out_w == v.w) return v;
    FrameVolume out(v.t, out_h, out_w, v.fps);
    const double sy = static_cast<double>(v.h) / out_h, sx = static_cast<double>(v.w) / out_w;
    for (int k = 0; k < v.t; ++k) {
        for (int y = 0; y < out_h; ++y) {
            const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, v.h - 1.0);
            const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, v.h - 1);
            const double ay = fy - y0;
            for (int x = 0; x < out_w; ++x) {
                const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, v.w - 1.0);
                const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, v.w - 1);
                const double ax = fx - x0;
                for (int c = 0; c < 3; ++c) {
                    const double top = (1 - ax) * v.at(k, y0, x0, c) + ax * v.at(k, y0, x1, c);
                    const double bot = (1 - ax) * v.at(k, y1, x0, c) + ax * v.at(k, y1, x1, c);
                    out.at(k, y, x, c) = static_cast<float>((1 - ay) * top + ay * bot);
                }
            }
        }
    }
    return out;
}

std::vector<std::uint8_t> to_rgb8(const FrameVolume& v, int k) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(v.frame_size()));
    const auto f = v.frame(k);
    for (std::ptrdiff_t i = 0; i < f.size(); ++i) {
        out[static_cast<std::size_t>(i)] =
            static_cast<std::uint8_t>(std::lround(std::clamp(f[i], 0.0f, 1.0f) * 255.0f));
    }
    return out;
}

}  // namespace previts
