#pragma once

// Training shell: flat key-value configuration, the SGD training loop with the
// momentum encoder and negative queue, checkpoints, the JSONL metrics stream,
// and the ablation runner.

#include "previts/corpus.hpp"
#include "previts/eval.hpp"
#include "previts/objective.hpp"
#include "previts/sampler.hpp"
#include "previts/tracking.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace previts {

enum class TrackingSupervision { Oracle, Contrast, Box, GroundTruth, None };

TrackingSupervision parse_tracking_supervision(const std::string& name);
std::string to_string(TrackingSupervision t);

struct TrainConfig {
    std::string corpus;
    std::string tubes;      // directory of precomputed <video_id>.pva tubes; empty computes them
    std::string out = "run";  // not part of the config identity
    int epochs = 30;
    int max_steps = 0;  // > 0 caps the run regardless of epochs
    int batch_size = 32;
    double lr = 0.05;
    bool cosine = true;
    double sgd_momentum = 0.9;
    double weight_decay = 1e-4;

    double tau = 0.07;
    double gamma = 0.15;
    double mu = 0.3;
    double lambda = 3.0;
    bool detach_alpha = false;
    bool speed_task = true;

    double momentum = 0.99;
    int queue_size = 1024;
    int t_len = 4;
    int crop = 32;
    std::string delta = "varying";
    std::string tracking = "oracle";
    double iou_gate = 0.3;

    double blur_prob = 0.5;
    double jitter_prob = 0.8;

    std::uint64_t seed = 0;
    int checkpoint_every = 100;

    // Canonical "key = value" text; its hash identifies the run configuration.
    std::string to_text() const;
    std::uint64_t hash() const;
    void validate() const;

    EncoderConfig encoder() const;
    SamplerConfig sampler() const;
    ObjectiveConfig objective() const;
    AugmentConfig augmentation() const;
};

// Flat "key = value" lines; '#' starts a comment, values may be double-quoted.
// Unknown keys and malformed values throw std::invalid_argument.
// Pairs keep file order; duplicate keys throw.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);
TrainConfig parse_train_config(const std::string& text);
void apply_override(TrainConfig& config, const std::string& key, const std::string& value);
// Reads the file and applies the PREVITS_SEED environment override.
TrainConfig load_train_config(const std::filesystem::path& path);
void apply_env_overrides(TrainConfig& config);

// Corpus generation settings in the same flat format (keys named as CorpusConfig fields).
CorpusConfig parse_corpus_config(const std::string& text);

struct RunRecord {
    int step = 0;
    int epoch = 0;
    double lr = 0.0;
    LossBreakdown losses;
    double fallback_rate = 0.0;
    double degenerate_rate = 0.0;
    int skipped = 0;
    double wall_time = 0.0;
};

struct TrainingAborted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CheckpointMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Trainer {
public:
    explicit Trainer(TrainConfig config);

    // One optimisation step. Throws TrainingAborted on a non-finite loss without
    // touching the model state.
    RunRecord step();

    // Trains to completion, writing metrics.jsonl, timing.jsonl and checkpoints
    // (including one at step 0) under config.out. Returns the final checkpoint path.
    std::filesystem::path run();

    void save_checkpoint(const std::filesystem::path& path) const;
    void load_checkpoint(const std::filesystem::path& path);

    const EncoderState& state() const { return state_; }
    EncoderState& mutable_state() { return state_; }
    const TrainConfig& config() const { return config_; }
    int current_step() const { return step_; }
    int steps_per_epoch() const;
    int total_steps() const;
    int usable_videos() const { return static_cast<int>(usable_.size()); }

private:
    double learning_rate(int step) const;
    int next_video();
    std::string record_json(const RunRecord& r) const;

    TrainConfig config_;
    CorpusManifest manifest_;
    std::vector<GeneratedVideo> videos_;
    std::vector<std::optional<TrackingTube>> tubes_;
    std::vector<int> usable_;  // indices with a long enough tube

    EncoderState state_;
    std::map<std::string, Tensor> velocity_;
    Rng rng_;        // sampling and augmentation
    Rng order_rng_;  // epoch shuffles
    std::vector<int> order_;
    int cursor_ = 0;
    int epoch_ = 0;
    int step_ = 0;
};

// Tubes for every manifest entry under a supervision mode (nullopt for None, or
// when saliency finds nothing in frame 0).
std::vector<std::optional<TrackingTube>> build_tubes(const CorpusManifest& manifest,
                                                     const std::vector<GeneratedVideo>& videos,
                                                     TrackingSupervision mode, double iou_gate);

// Checkpoints: header, config, step, both parameter sets, optimiser velocity,
// queue, and the sampling and data-order state.
struct Checkpoint {
    int step = 0;
    std::string config_text;
    std::uint64_t config_hash = 0;
    EncoderState state;
};
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Ablation over a grid of overrides. Grid files are flat key-value text where
// `base` names a train config and every other key holds a comma-separated list.
struct AblationGrid {
    std::string base;
    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
    std::string eval_corpus;  // held-out videos for tracking; empty skips tracking
    int eval_videos = 30;
};

AblationGrid parse_ablation_grid(const std::string& text);

struct AblationRow {
    std::map<std::string, std::string> overrides;
    bool failed = false;
    std::string error;
    double final_l_att = 0.0;
    std::map<std::string, double> backgrounds;
    std::optional<TrackingReport> tracking;
};

std::vector<AblationRow> ablate(const AblationGrid& grid, const std::filesystem::path& out_dir);
std::string ablation_table(const std::vector<AblationRow>& rows);
std::string to_json(const std::vector<AblationRow>& rows);

}  // namespace previts
