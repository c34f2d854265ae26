#pragma once

#include "previts/tensor.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace previts {

// Single-frame binary mask, row-major so (y, x) indexing matches image layout.
using Mask2D = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Raw video pixels, shape (t, h, w, 3), values in [0, 1].
struct FrameVolume {
    int t = 0, h = 0, w = 0;
    double fps = 25.0;
    ArrayX<float> pixels;

    FrameVolume() = default;
    FrameVolume(int frames, int height, int width, double rate = 25.0)
        : t(frames), h(height), w(width), fps(rate),
          pixels(ArrayX<float>::Zero(std::ptrdiff_t{frames} * height * width * 3)) {}

    std::ptrdiff_t index(int k, int y, int x, int c = 0) const {
        return ((std::ptrdiff_t{k} * h + y) * w + x) * 3 + c;
    }
    float& at(int k, int y, int x, int c) { return pixels[index(k, y, x, c)]; }
    float at(int k, int y, int x, int c) const { return pixels[index(k, y, x, c)]; }

    std::ptrdiff_t frame_size() const { return std::ptrdiff_t{h} * w * 3; }
    auto frame(int k) { return pixels.segment(k * frame_size(), frame_size()); }
    auto frame(int k) const { return pixels.segment(k * frame_size(), frame_size()); }

    // Frames start, start + stride, ... (count of them), spatial window (y, x, size_h, size_w).
    FrameVolume clip(int start, int count, int stride, int y, int x, int size_h, int size_w) const;
    FrameVolume single_frame(int k) const { return clip(k, 1, 1, 0, 0, h, w); }

    bool operator==(const FrameVolume& o) const {
        return t == o.t && h == o.h && w == o.w && (pixels == o.pixels).all();
    }
};

// Binary mask volume, shape (t, h, w).
struct MaskVolume {
    int t = 0, h = 0, w = 0;
    std::vector<Mask2D> frames;

    MaskVolume() = default;
    MaskVolume(int count, int height, int width)
        : t(count), h(height), w(width), frames(count, Mask2D::Zero(height, width)) {}

    MaskVolume clip(int start, int count, int stride, int y, int x, int size_h, int size_w) const;

    bool operator==(const MaskVolume& o) const;
};

struct BBox {
    int y0 = 0, x0 = 0, y1 = 0, x1 = 0;  // half-open [y0, y1) × [x0, x1)
    int height() const { return y1 - y0; }
    int width() const { return x1 - x0; }
    bool empty() const { return y1 <= y0 || x1 <= x0; }
    bool operator==(const BBox&) const = default;
};

inline long mask_area(const Mask2D& m) { return (m != 0).count(); }

// Tight bounding box; empty box for an empty mask.
std::optional<BBox> mask_bbox(const Mask2D& m);

double mask_iou(const Mask2D& a, const Mask2D& b);

// Resize a frame (h, w, 3) to (out_h, out_w, 3) by bilinear sampling at pixel centres.
FrameVolume resize_frames(const FrameVolume& v, int out_h, int out_w);

// Per-frame Rgb8 conversion, used by previews.
std::vector<std::uint8_t> to_rgb8(const FrameVolume& v, int k);

}  // namespace previts
