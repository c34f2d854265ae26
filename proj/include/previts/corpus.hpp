#pragma once

// Synthetic video corpus: moving foreground shapes over procedural background
// textures, with exact ground-truth masks and backgrounds-challenge compositing.

#include "previts/rng.hpp"
#include "previts/video.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace previts {

enum class ShapeClass { Circle = 0, Square, Triangle, Cross, Diamond, Ring };
inline constexpr int kNumShapes = 6;

enum class Texture { StripesH = 0, Checker, Noise, StripesDiag, Dots, StripesV };
inline constexpr int kNumTextures = 6;

enum class MotionMode { Bounce, Exit };

struct VideoSpec {
    int frames = 24, height = 48, width = 48;
    double fps = 25.0;

    ShapeClass shape = ShapeClass::Circle;
    double radius = 6.0;
    double scale_rate = 0.0;  // relative radius change per frame
    double cy = 24.0, cx = 24.0;  // initial centre (pixel units, image coordinates)
    double vy = 0.0, vx = 0.0;    // pixels per frame
    MotionMode motion = MotionMode::Bounce;
    int teleport_frame = -1;  // from this frame on, the centre is mirrored through the frame centre

    Texture texture = Texture::StripesH;
    int palette_index = 0;  // foreground colour family; the corpus uses the class id
};

struct GroundTruth {
    MaskVolume fg_mask;
    int class_id = 0;
    std::vector<std::array<double, 2>> trajectory;  // (row, col) centre per frame
};

struct GeneratedVideo {
    FrameVolume video;
    GroundTruth gt;
};

// Deterministic in (spec, seed). Throws std::invalid_argument when the object
// cannot fit in the frame.
GeneratedVideo generate_video(const VideoSpec& spec, std::uint64_t seed);

// Whether the pixel centre (y + 0.5, x + 0.5) lies inside the shape.
bool shape_contains(ShapeClass shape, double radius, double dy, double dx);

enum class Variant { Original, OnlyFG, NoFG, OnlyBG_B, OnlyBG_T, MixedSame, MixedRand, MixedNext };
inline constexpr std::array<Variant, 8> kAllVariants = {Variant::Original,  Variant::OnlyFG,   Variant::NoFG,
                                                        Variant::OnlyBG_B,  Variant::OnlyBG_T, Variant::MixedSame,
                                                        Variant::MixedRand, Variant::MixedNext};

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);
bool variant_needs_donor(Variant v);

struct Donor {
    const FrameVolume& video;
    const GroundTruth& gt;
};

// Backgrounds-challenge compositing. `num_classes` is needed for the MixedNext rule.
FrameVolume composite_variant(const FrameVolume& video, const GroundTruth& gt, Variant variant,
                              const std::optional<Donor>& donor = std::nullopt, int num_classes = 0);

struct CorpusConfig {
    int num_classes = 4;
    int videos_per_class = 5;
    int frames = 24, height = 48, width = 48;
    double fps = 25.0;
    double bias_strength = 0.8;  // probability that a video's texture is its class texture
    double radius_min = 5.0, radius_max = 7.5;
    double speed_max = 1.5;
    double scale_change_prob = 0.5;
    double scale_rate_max = 0.01;
    std::uint64_t seed = 0;
};

// Draws the per-video parameters (shape from class, texture via the bias knob, motion).
VideoSpec random_video_spec(const CorpusConfig& config, int class_id, Rng& rng);

struct ManifestEntry {
    std::string video_id;
    std::string path;  // relative to the corpus root
    int class_id = 0;
    int t = 0, h = 0, w = 0;
};

struct CorpusManifest {
    std::vector<ManifestEntry> entries;
    std::uint64_t seed = 0;
    std::filesystem::path root;  // not serialised

    const ManifestEntry& find(const std::string& video_id) const;
    int num_classes() const;

    void save() const;
    static CorpusManifest load(const std::filesystem::path& root);
};

// Generates C × videos_per_class videos into `out_dir` (manifest.json + videos/).
// `jobs` > 1 generates in parallel; output is identical either way.
CorpusManifest build_corpus(const CorpusConfig& config, const std::filesystem::path& out_dir, int jobs = 1);

void save_video(const std::filesystem::path& path, const FrameVolume& video, const GroundTruth& gt);
GeneratedVideo load_video(const CorpusManifest& manifest, const std::string& video_id);
GeneratedVideo load_video_file(const std::filesystem::path& path);

// Deterministic per-class split used by evaluation: the first `train_fraction` of
// each class (manifest order) is train, the rest test.
struct CorpusSplit {
    std::vector<std::string> train, test;
};
CorpusSplit split_corpus(const CorpusManifest& manifest, double train_fraction = 0.7);

}  // namespace previts
