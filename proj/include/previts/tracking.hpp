#pragma once

// Unsupervised single-object tracking tubes: saliency on each frame, largest
// 4-connected region, and IoU-gated propagation from frame 0.

#include "previts/corpus.hpp"
#include "previts/video.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

namespace previts {

enum class SaliencyBackend { Oracle, ColorContrast };

SaliencyBackend parse_saliency_backend(const std::string& name);

struct SaliencyMask {
    Mask2D mask;
    int frame_index = 0;
};

struct NoSalientObject : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyMask : std::invalid_argument {
    EmptyMask() : std::invalid_argument("empty mask") {}
};

// Frame `k` of `video`. Oracle reads the ground-truth mask (gt must be non-null).
// Throws NoSalientObject when nothing stands out.
SaliencyMask compute_saliency(const FrameVolume& video, int k, SaliencyBackend backend,
                              const GroundTruth* gt = nullptr);

// Largest 4-connected component; ties go to the component whose first pixel comes
// first in row-major order. Throws EmptyMask on an all-zero mask.
Mask2D largest_region(const Mask2D& mask);

// Otsu threshold for a sample of values, over `bins` equal-width bins in [0, max].
double otsu_threshold(const std::vector<double>& values, int bins = 256);

struct TrackingTube {
    MaskVolume masks;
    std::vector<bool> active;
    std::vector<long> areas;
    std::vector<BBox> bboxes;

    int frames() const { return masks.t; }
    // Length of the active prefix [0, L).
    int active_length() const;
};

struct TubeOptions {
    double iou_gate = 0.3;
    // When false, a failed frame is marked inactive and tracking resumes against the
    // last accepted mask instead of stopping.
    bool terminate_on_failure = true;
};

TrackingTube extract_tube(const FrameVolume& video, const SaliencyMask& seed_mask, SaliencyBackend backend,
                          const GroundTruth* gt = nullptr, const TubeOptions& options = {});

TrackingTube tube_from_ground_truth(const GroundTruth& gt);

enum class TubeDegradation { BoxOnly, None };

// BoxOnly fills each mask's bounding box; None drops tube supervision.
std::optional<TrackingTube> degrade_tube(const TrackingTube& tube, TubeDegradation mode);

void save_tube(const std::filesystem::path& path, const TrackingTube& tube);
TrackingTube load_tube(const std::filesystem::path& path);

}  // namespace previts
