#pragma once

// Query/key clip sampling under the tracking-tube temporal constraint and the
// object-coverage spatial constraint, speed triplets, and photometric augmentation.

#include "previts/rng.hpp"
#include "previts/tracking.hpp"
#include "previts/video.hpp"

#include <array>
#include <span>
#include <stdexcept>
#include <string>

namespace previts {

struct CropGeometry {
    int t_start = 0, t_len = 1;
    int y = 0, x = 0, crop_h = 1, crop_w = 1;
    int speed = 1;  // frame stride; the clip covers [t_start, t_start + t_len * speed)
    bool operator==(const CropGeometry&) const = default;
};

struct InsufficientTube : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class DeltaKind { Varying, Constant, Zero };

struct TemporalStrategy {
    DeltaKind kind = DeltaKind::Varying;
    int delta = 0;  // Constant only

    static TemporalStrategy varying() { return {DeltaKind::Varying, 0}; }
    static TemporalStrategy constant(int d) { return {DeltaKind::Constant, d}; }
    static TemporalStrategy zero() { return {DeltaKind::Zero, 0}; }
};

TemporalStrategy parse_temporal_strategy(const std::string& text);  // "varying", "zero", "constant:42"
std::string to_string(const TemporalStrategy& s);

// Start frames (t_q, t_k) of two t_len windows inside [0, active_length).
std::pair<int, int> sample_temporal_window(int active_length, int t_len, const TemporalStrategy& strategy, Rng& rng);
std::pair<int, int> sample_temporal_window(const TrackingTube& tube, int t_len, const TemporalStrategy& strategy,
                                           Rng& rng);

enum class OverlapMeasure { Coverage, StrictIoU };

// Fraction of the mask inside the crop (Coverage) or mask/crop IoU (StrictIoU).
double crop_overlap(const Mask2D& mask, int y, int x, int size, OverlapMeasure measure = OverlapMeasure::Coverage);

struct SpatialCrop {
    int y = 0, x = 0;
    bool fallback = false;
    double overlap = 1.0;  // worst overlap across the supplied masks
};

// Square crop of side `size` whose overlap with every mask is at least mu, found by
// rejection sampling; after max_tries the crop centred on the masks' union bbox.
SpatialCrop sample_spatial_crop(std::span<const Mask2D> masks, int size, double mu, Rng& rng, int max_tries = 50,
                                OverlapMeasure measure = OverlapMeasure::Coverage);
SpatialCrop sample_spatial_crop(const Mask2D& mask, int size, double mu, Rng& rng, int max_tries = 50,
                                OverlapMeasure measure = OverlapMeasure::Coverage);

struct SamplerConfig {
    int t_len = 4;
    int crop = 32;
    double mu = 0.3;
    TemporalStrategy strategy = TemporalStrategy::varying();
    int max_tries = 50;
    OverlapMeasure measure = OverlapMeasure::Coverage;
};

struct ClipPair {
    FrameVolume x_q, x_k;
    MaskVolume m_q, m_k;
    CropGeometry geom_q, geom_k;
    int delta = 0;
    bool fallback_q = false, fallback_k = false;
};

// Crops pixels and (when present) tube masks with one geometry. Without a tube the
// mask volume is all ones.
std::pair<FrameVolume, MaskVolume> crop_clip(const FrameVolume& video, const TrackingTube* tube,
                                             const CropGeometry& geom);

// `tube == nullptr` means no tracking supervision: the whole video is eligible and
// crops are unconstrained.
ClipPair sample_clip_pair(const FrameVolume& video, const TrackingTube* tube, const SamplerConfig& config, Rng& rng);

struct SpeedTriplet {
    FrameVolume anchor, positive, negative;
    std::array<int, 3> speeds{1, 1, 2};
    std::array<CropGeometry, 3> geoms{};
};

inline constexpr std::array<int, 2> kSpeeds = {1, 2};

SpeedTriplet sample_speed_triplet(const FrameVolume& video, const TrackingTube* tube, const SamplerConfig& config,
                                  Rng& rng);

struct AugmentConfig {
    double blur_prob = 0.5;
    double jitter_prob = 0.8;
    double sigma_min = 0.1, sigma_max = 2.0;
    double factor_min = 0.6, factor_max = 1.4;
};

FrameVolume augment(const FrameVolume& clip, Rng& rng, const AugmentConfig& config = {});

// Building blocks of augment(), exposed for testing. Neither clamps.
void apply_gaussian_blur(FrameVolume& clip, double sigma);
void apply_color_jitter(FrameVolume& clip, double brightness, double contrast, double saturation);

// One JSONL row of the optional sampling manifest.
std::string sampling_record(const std::string& video_id, const ClipPair& pair);

}  // namespace previts
