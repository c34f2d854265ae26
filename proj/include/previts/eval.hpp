#pragma once

// Evaluation protocols over a frozen encoder: linear probe across the
// backgrounds-challenge variants, nearest-neighbour retrieval, and Grad-CAM
// tracking with region-similarity metrics.

#include "previts/corpus.hpp"
#include "previts/model.hpp"

#include <map>
#include <string>
#include <vector>

namespace previts {

// Pooled conv5 features averaged over a grid of crops: temporal windows spread
// across the video and spatial tiles (corners and centre) at native scale.
enum class FeatureLayer { Pooled, Embedding };

struct FeatureConfig {
    int temporal_windows = 5;
    bool centre_tile = true;
    FeatureLayer layer = FeatureLayer::Pooled;
};

VectorX<> video_features(const EncoderParams& params, const FrameVolume& video, const FeatureConfig& config = {});
MatrixX<> video_features(const EncoderParams& params, const std::vector<FrameVolume>& videos,
                         const FeatureConfig& config = {});

// Multinomial logistic regression on standardised features, full-batch gradient descent.
struct ProbeConfig {
    int iterations = 400;
    double learning_rate = 0.5;
    double l2 = 1e-3;
};

struct LinearClassifier {
    MatrixX<> weights;  // [d, C]
    VectorX<> bias;     // [C]
    VectorX<> mean, scale;

    int predict(const VectorX<>& x) const;
    double accuracy(const MatrixX<>& x, const std::vector<int>& labels) const;
};

// Throws std::invalid_argument with fewer than two classes.
LinearClassifier train_linear_classifier(const MatrixX<>& x, const std::vector<int>& labels, int num_classes,
                                         const ProbeConfig& config = {});

struct LabeledVideo {
    std::string id;
    GeneratedVideo data;
};

std::vector<LabeledVideo> load_videos(const CorpusManifest& manifest, const std::vector<std::string>& ids);

// Trains on Original-variant train videos once and scores any variant of the test videos.
class ProbeSession {
public:
    ProbeSession(const EncoderParams& params, const CorpusManifest& manifest, const ProbeConfig& probe = {},
                 const FeatureConfig& features = {}, std::uint64_t seed = 0);

    double evaluate(Variant variant) const;
    int num_eval() const { return static_cast<int>(test_.size()); }

    // Deterministic donor for a Mixed* variant, drawn from the whole corpus.
    const LabeledVideo& donor_for(const LabeledVideo& video, Variant variant) const;

private:
    const EncoderParams& params_;
    int num_classes_ = 0;
    FeatureConfig features_;
    std::uint64_t seed_ = 0;
    std::vector<LabeledVideo> train_, test_;
    std::map<int, std::vector<const LabeledVideo*>> by_class_;
    LinearClassifier classifier_;
};

double linear_probe(const EncoderParams& params, const CorpusManifest& manifest, Variant variant,
                    const ProbeConfig& probe = {}, std::uint64_t seed = 0);

struct BackgroundsReport {
    std::map<std::string, double> accuracy;  // keyed by variant name
    int n_eval = 0;
};

BackgroundsReport backgrounds_eval(const EncoderParams& params, const CorpusManifest& manifest,
                                   const ProbeConfig& probe = {}, std::uint64_t seed = 0,
                                   const FeatureConfig& features = {});

struct RetrievalReport {
    std::map<int, double> top_k;
};

// Cosine nearest neighbours; a test item whose id also appears in train never
// retrieves itself. Throws std::invalid_argument when a k exceeds the train size.
RetrievalReport retrieval_from_features(const MatrixX<>& train, const std::vector<int>& train_labels,
                                        const std::vector<std::string>& train_ids, const MatrixX<>& test,
                                        const std::vector<int>& test_labels,
                                        const std::vector<std::string>& test_ids, const std::vector<int>& ks);

RetrievalReport retrieval_eval(const EncoderParams& params, const CorpusManifest& manifest,
                               const std::vector<int>& ks = {1, 5, 10, 20, 50});

struct TrackingReport {
    double mean_j = 0.0;
    double recall_o = 0.0;
    double decay_d = 0.0;
    std::vector<std::vector<double>> per_video;
    std::vector<std::string> video_ids;
    std::vector<double> first_frame_j;  // frame 0 scored against its own mask
};

// M = mean of all J; O = fraction of sequences whose mean exceeds the threshold;
// D = mean over sequences of (mean J over the first quarter - mean J over the last).
TrackingReport tracking_metrics(const std::vector<std::vector<double>>& per_frame_j, double recall_threshold = 0.5);

struct TrackConfig {
    double threshold = 0.5;  // fraction of the per-frame heatmap maximum
};

// Key foreground: frame 0 under `first_mask`, cropped around the mask and held
// still over the clip. Each frame k is queried the same way (held still, over
// corner tiles); the Grad-CAM map, averaged over t', is upsampled, stitched and
// binarised at a fraction of its maximum.
MaskVolume gradcam_track(const EncoderParams& params, const FrameVolume& video, const Mask2D& first_mask,
                         const TrackConfig& config = {});

std::vector<double> per_frame_iou(const MaskVolume& predicted, const MaskVolume& truth);

// Runs gradcam_track on each video with its ground-truth first mask; metrics use frames 1..t-1.
TrackingReport tracking_eval(const EncoderParams& params, const std::vector<LabeledVideo>& videos,
                             const TrackConfig& config = {});

// Bilinear upsampling of a grid, sampling at pixel centres.
MatrixX<> upsample_bilinear(const MatrixX<>& grid, int out_h, int out_w);

std::string to_json(const BackgroundsReport& r);
std::string to_json(const RetrievalReport& r);
std::string to_json(const TrackingReport& r);

}  // namespace previts
