#include "previts/harness.hpp"

#include "previts/array_store.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <set>
#include <sstream>

namespace previts {

namespace fs = std::filesystem;
using nlohmann::json;

TrackingSupervision parse_tracking_supervision(const std::string& name) {
    if (name == "oracle") return TrackingSupervision::Oracle;
    if (name == "contrast") return TrackingSupervision::Contrast;
    if (name == "box") return TrackingSupervision::Box;
    if (name == "gt") return TrackingSupervision::GroundTruth;
    if (name == "none") return TrackingSupervision::None;
    throw std::invalid_argument("unknown tracking supervision '" + name + "' (oracle|contrast|box|gt|none)");
}

std::string to_string(TrackingSupervision t) {
    switch (t) {
        case TrackingSupervision::Oracle: return "oracle";
        case TrackingSupervision::Contrast: return "contrast";
        case TrackingSupervision::Box: return "box";
        case TrackingSupervision::GroundTruth: return "gt";
        case TrackingSupervision::None: return "none";
    }
    return "?";
}

// ---------------------------------------------------------------- config text

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) throw std::invalid_argument("bad value for " + key + ": '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("bad value for " + key + ": '" + v + "' (true|false)");
}

// Fisher-Yates over Rng (std::shuffle's sequence is implementation-defined).
void shuffle(std::vector<int>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
}

// Shortest text that reads back to the same double.
std::string fmt(double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::set<std::string> seen;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line.resize(i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::invalid_argument("line " + std::to_string(lineno) + ": empty key");
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        if (!seen.insert(key).second) throw std::invalid_argument("duplicate key '" + key + "'");
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

void apply_override(TrainConfig& c, const std::string& key, const std::string& v) {
    auto i = [&] { return parse_number<int>(key, v); };
    auto d = [&] { return parse_number<double>(key, v); };
    auto b = [&] { return parse_bool(key, v); };
    if (key == "corpus") c.corpus = v;
    else if (key == "tubes") c.tubes = v;
    else if (key == "out") c.out = v;
    else if (key == "epochs") c.epochs = i();
    else if (key == "max_steps") c.max_steps = i();
    else if (key == "batch_size") c.batch_size = i();
    else if (key == "lr") c.lr = d();
    else if (key == "cosine") c.cosine = b();
    else if (key == "sgd_momentum") c.sgd_momentum = d();
    else if (key == "weight_decay") c.weight_decay = d();
    else if (key == "tau") c.tau = d();
    else if (key == "gamma") c.gamma = d();
    else if (key == "mu") c.mu = d();
    else if (key == "lambda") c.lambda = d();
    else if (key == "detach_alpha") c.detach_alpha = b();
    else if (key == "speed_task") c.speed_task = b();
    else if (key == "momentum") c.momentum = d();
    else if (key == "queue_size") c.queue_size = i();
    else if (key == "t_len") c.t_len = i();
    else if (key == "crop") c.crop = i();
    else if (key == "delta") c.delta = v;
    else if (key == "tracking") c.tracking = v;
    else if (key == "iou_gate") c.iou_gate = d();
    else if (key == "blur_prob") c.blur_prob = d();
    else if (key == "jitter_prob") c.jitter_prob = d();
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
    else if (key == "checkpoint_every") c.checkpoint_every = i();
    else throw std::invalid_argument("unknown config key '" + key + "'");
}

TrainConfig parse_train_config(const std::string& text) {
    TrainConfig c;
    for (const auto& [k, v] : parse_key_values(text)) apply_override(c, k, v);
    c.validate();
    return c;
}

void apply_env_overrides(TrainConfig& config) {
    if (const char* s = std::getenv("PREVITS_SEED"); s && *s) apply_override(config, "seed", s);
}

TrainConfig load_train_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    TrainConfig c = parse_train_config(ss.str());
    apply_env_overrides(c);
    c.validate();
    return c;
}

CorpusConfig parse_corpus_config(const std::string& text) {
    CorpusConfig c;
    for (const auto& [key, v] : parse_key_values(text)) {
        if (key == "num_classes") c.num_classes = parse_number<int>(key, v);
        else if (key == "videos_per_class") c.videos_per_class = parse_number<int>(key, v);
        else if (key == "frames") c.frames = parse_number<int>(key, v);
        else if (key == "height") c.height = parse_number<int>(key, v);
        else if (key == "width") c.width = parse_number<int>(key, v);
        else if (key == "fps") c.fps = parse_number<double>(key, v);
        else if (key == "bias_strength") c.bias_strength = parse_number<double>(key, v);
        else if (key == "radius_min") c.radius_min = parse_number<double>(key, v);
        else if (key == "radius_max") c.radius_max = parse_number<double>(key, v);
        else if (key == "speed_max") c.speed_max = parse_number<double>(key, v);
        else if (key == "scale_change_prob") c.scale_change_prob = parse_number<double>(key, v);
        else if (key == "scale_rate_max") c.scale_rate_max = parse_number<double>(key, v);
        else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
        else throw std::invalid_argument("unknown corpus key '" + key + "'");
    }
    return c;
}

std::string TrainConfig::to_text() const {
    std::ostringstream os;
    os << "corpus = \"" << corpus << "\"\n"
       << "tubes = \"" << tubes << "\"\n"
       << "epochs = " << epochs << "\n"
       << "max_steps = " << max_steps << "\n"
       << "batch_size = " << batch_size << "\n"
       << "lr = " << fmt(lr) << "\n"
       << "cosine = " << (cosine ? "true" : "false") << "\n"
       << "sgd_momentum = " << fmt(sgd_momentum) << "\n"
       << "weight_decay = " << fmt(weight_decay) << "\n"
       << "tau = " << fmt(tau) << "\n"
       << "gamma = " << fmt(gamma) << "\n"
       << "mu = " << fmt(mu) << "\n"
       << "lambda = " << fmt(lambda) << "\n"
       << "detach_alpha = " << (detach_alpha ? "true" : "false") << "\n"
       << "speed_task = " << (speed_task ? "true" : "false") << "\n"
       << "momentum = " << fmt(momentum) << "\n"
       << "queue_size = " << queue_size << "\n"
       << "t_len = " << t_len << "\n"
       << "crop = " << crop << "\n"
       << "delta = \"" << delta << "\"\n"
       << "tracking = \"" << tracking << "\"\n"
       << "iou_gate = " << fmt(iou_gate) << "\n"
       << "blur_prob = " << fmt(blur_prob) << "\n"
       << "jitter_prob = " << fmt(jitter_prob) << "\n"
       << "seed = " << seed << "\n"
       << "checkpoint_every = " << checkpoint_every << "\n";
    return os.str();
}

std::uint64_t TrainConfig::hash() const { return fnv1a(to_text()); }

void TrainConfig::validate() const {
    auto need = [](bool ok, const std::string& what) {
        if (!ok) throw std::invalid_argument("invalid config: " + what);
    };
    need(epochs > 0, "epochs must be positive");
    need(max_steps >= 0, "max_steps must be >= 0");
    need(batch_size > 0, "batch_size must be positive");
    need(lr >= 0.0 && std::isfinite(lr), "lr must be >= 0");
    need(sgd_momentum >= 0.0 && sgd_momentum < 1.0, "sgd_momentum must lie in [0, 1)");
    need(weight_decay >= 0.0, "weight_decay must be >= 0");
    need(tau > 0.0, "tau must be positive");
    need(gamma >= 0.0, "gamma must be >= 0");
    need(mu >= 0.0 && mu < 1.0, "mu must lie in [0, 1)");
    need(lambda >= 0.0, "lambda must be >= 0");
    need(momentum >= 0.0 && momentum <= 1.0, "momentum must lie in [0, 1]");
    need(queue_size > 0, "queue_size must be positive");
    need(t_len > 0, "t_len must be positive");
    need(crop > 0, "crop must be positive");
    need(iou_gate >= 0.0 && iou_gate <= 1.0, "iou_gate must lie in [0, 1]");
    need(blur_prob >= 0.0 && blur_prob <= 1.0, "blur_prob must lie in [0, 1]");
    need(jitter_prob >= 0.0 && jitter_prob <= 1.0, "jitter_prob must lie in [0, 1]");
    need(checkpoint_every >= 0, "checkpoint_every must be >= 0");
    parse_temporal_strategy(delta);
    parse_tracking_supervision(tracking);
}

EncoderConfig TrainConfig::encoder() const {
    EncoderConfig e;
    e.frames = t_len;
    e.size = crop;
    return e;
}

SamplerConfig TrainConfig::sampler() const {
    SamplerConfig s;
    s.t_len = t_len;
    s.crop = crop;
    s.mu = mu;
    s.strategy = parse_temporal_strategy(delta);
    return s;
}

ObjectiveConfig TrainConfig::objective() const { return {tau, gamma, lambda, detach_alpha}; }

AugmentConfig TrainConfig::augmentation() const {
    AugmentConfig a;
    a.blur_prob = blur_prob;
    a.jitter_prob = jitter_prob;
    return a;
}

// ---------------------------------------------------------------- tubes

std::vector<std::optional<TrackingTube>> build_tubes(const CorpusManifest& manifest,
                                                     const std::vector<GeneratedVideo>& videos,
                                                     TrackingSupervision mode, double iou_gate) {
    std::vector<std::optional<TrackingTube>> out(videos.size());
    if (mode == TrackingSupervision::None) return out;
    TubeOptions opts;
    opts.iou_gate = iou_gate;
    for (std::size_t i = 0; i < videos.size(); ++i) {
        const auto& v = videos[i];
        if (mode == TrackingSupervision::GroundTruth) {
            out[i] = tube_from_ground_truth(v.gt);
            continue;
        }
        const auto backend =
            mode == TrackingSupervision::Oracle ? SaliencyBackend::Oracle : SaliencyBackend::ColorContrast;
        try {
            const auto seed = compute_saliency(v.video, 0, backend, &v.gt);
            auto tube = extract_tube(v.video, seed, backend, &v.gt, opts);
            out[i] = mode == TrackingSupervision::Box ? degrade_tube(tube, TubeDegradation::BoxOnly) : tube;
        } catch (const NoSalientObject&) {
            // left empty; the trainer skips the video
        }
    }
    (void)manifest;
    return out;
}

// ---------------------------------------------------------------- trainer

Trainer::Trainer(TrainConfig config) : config_(std::move(config)) {
    config_.validate();
    manifest_ = CorpusManifest::load(config_.corpus);
    videos_.reserve(manifest_.entries.size());
    for (const auto& e : manifest_.entries) videos_.push_back(load_video(manifest_, e.video_id));

    const auto mode = parse_tracking_supervision(config_.tracking);
    if (!config_.tubes.empty() && mode != TrackingSupervision::None) {
        tubes_.resize(videos_.size());
        for (std::size_t i = 0; i < videos_.size(); ++i) {
            const fs::path p = fs::path(config_.tubes) / (manifest_.entries[i].video_id + ".pva");
            if (fs::exists(p)) tubes_[i] = load_tube(p);
        }
    } else {
        tubes_ = build_tubes(manifest_, videos_, mode, config_.iou_gate);
    }

    const int need = config_.speed_task ? 2 * config_.t_len + 1 : config_.t_len;
    for (std::size_t i = 0; i < videos_.size(); ++i) {
        const int span = mode == TrackingSupervision::None ? videos_[i].video.t
                                                           : (tubes_[i] ? tubes_[i]->active_length() : 0);
        if (span >= need && videos_[i].video.h >= config_.crop && videos_[i].video.w >= config_.crop) {
            usable_.push_back(static_cast<int>(i));
        }
    }
    if (usable_.empty()) throw std::runtime_error("no video in " + config_.corpus + " has a usable tube");

    Rng init = Rng::derive(config_.seed, "init");
    state_ = init_state(config_.encoder(), config_.momentum, config_.queue_size, init);
    state_.queue.restore(MatrixX<>::Zero(config_.queue_size, state_.queue.dim()), 0, 0);
    for (const auto& [name, t] : state_.theta_q.tensors) velocity_[name] = Tensor::zeros(t.shape);

    rng_ = Rng::derive(config_.seed, "sampling");
    order_rng_ = Rng::derive(config_.seed, "order");
    order_ = usable_;
    shuffle(order_, order_rng_);
}

int Trainer::steps_per_epoch() const {
    return (static_cast<int>(usable_.size()) + config_.batch_size - 1) / config_.batch_size;
}

int Trainer::total_steps() const {
    return config_.max_steps > 0 ? config_.max_steps : config_.epochs * steps_per_epoch();
}

double Trainer::learning_rate(int step) const {
    if (!config_.cosine) return config_.lr;
    const double progress = std::min(1.0, static_cast<double>(step) / std::max(1, total_steps()));
    return 0.5 * config_.lr * (1.0 + std::cos(std::numbers::pi * progress));
}

int Trainer::next_video() {
    if (cursor_ >= static_cast<int>(order_.size())) {
        order_ = usable_;
        shuffle(order_, order_rng_);
        cursor_ = 0;
        ++epoch_;
    }
    return order_[static_cast<std::size_t>(cursor_++)];
}

RunRecord Trainer::step() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto sampler = config_.sampler();
    const auto aug = config_.augmentation();
    const bool tracked = parse_tracking_supervision(config_.tracking) != TrackingSupervision::None;

    TrainingBatch batch;
    int fallbacks = 0;
    const int epoch_at_start = epoch_;
    for (int b = 0; b < config_.batch_size; ++b) {
        const int idx = next_video();
        const auto& video = videos_[static_cast<std::size_t>(idx)].video;
        const TrackingTube* tube = tracked ? &*tubes_[static_cast<std::size_t>(idx)] : nullptr;
        ClipPair pair = sample_clip_pair(video, tube, sampler, rng_);
        fallbacks += pair.fallback_q + pair.fallback_k;
        pair.x_q = augment(pair.x_q, rng_, aug);
        pair.x_k = augment(pair.x_k, rng_, aug);
        batch.pairs.push_back(std::move(pair));
        if (config_.speed_task) {
            SpeedTriplet tri = sample_speed_triplet(video, tube, sampler, rng_);
            tri.anchor = augment(tri.anchor, rng_, aug);
            tri.positive = augment(tri.positive, rng_, aug);
            tri.negative = augment(tri.negative, rng_, aug);
            batch.triplets.push_back(std::move(tri));
        }
    }

    const auto result = total_loss(batch, state_, config_.objective(), true);
    bool finite = std::isfinite(result.losses.total);
    for (const auto& [name, g] : result.grads) finite = finite && g.data.allFinite();
    if (!finite) {
        throw TrainingAborted("non-finite loss at step " + std::to_string(step_) + " (total " +
                              fmt(result.losses.total) + ")");
    }

    const double lr = learning_rate(step_);
    auto theta_next = state_.theta_q.tensors;
    auto velocity_next = velocity_;
    for (auto& [name, theta] : theta_next) {
        auto& v = velocity_next.at(name).data;
        v = config_.sgd_momentum * v + (result.grads.at(name).data + config_.weight_decay * theta.data);
        theta.data -= lr * v;
        if (!theta.data.allFinite() || !v.allFinite()) {
            throw TrainingAborted("non-finite parameters after step " + std::to_string(step_));
        }
    }
    state_.theta_q.tensors = std::move(theta_next);
    velocity_ = std::move(velocity_next);
    momentum_update(state_);
    state_.queue.enqueue(result.keys);

    RunRecord r;
    r.step = step_;
    r.epoch = epoch_at_start;
    r.lr = lr;
    r.losses = result.losses;
    r.fallback_rate = static_cast<double>(fallbacks) / (2.0 * config_.batch_size);
    r.degenerate_rate = static_cast<double>(result.losses.degenerate) / config_.batch_size;
    r.skipped = static_cast<int>(videos_.size() - usable_.size());
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ++step_;
    return r;
}

std::string Trainer::record_json(const RunRecord& r) const {
    json config = json::object();
    for (const auto& [k, v] : parse_key_values(config_.to_text())) config[k] = v;
    json j;
    j["step"] = r.step;
    j["epoch"] = r.epoch;
    j["lr"] = r.lr;
    j["l_moco"] = r.losses.l_moco;
    j["l_speed"] = r.losses.l_speed;
    j["l_att"] = r.losses.l_att;
    j["lambda"] = r.losses.lambda;
    j["total"] = r.losses.total;
    j["fallback_rate"] = r.fallback_rate;
    j["degenerate_rate"] = r.degenerate_rate;
    j["skipped"] = r.skipped;
    j["config_hash"] = config_.hash();
    j["config"] = config;
    return j.dump();
}

fs::path Trainer::run() {
    const fs::path out(config_.out);
    fs::create_directories(out);
    const auto mode = step_ == 0 ? std::ios::trunc : std::ios::app;
    std::ofstream metrics(out / "metrics.jsonl", std::ios::out | mode);
    std::ofstream timing(out / "timing.jsonl", std::ios::out | mode);
    if (!metrics || !timing) throw std::runtime_error("cannot write metrics under " + out.string());

    auto ckpt_path = [&](int s) {
        char name[32];
        std::snprintf(name, sizeof name, "ckpt_%06d.pva", s);
        return out / name;
    };
    fs::path last = ckpt_path(step_);
    save_checkpoint(last);

    const int total = total_steps();
    while (step_ < total) {
        RunRecord r;
        try {
            r = step();
        } catch (const TrainingAborted& e) {
            throw TrainingAborted(std::string(e.what()) + "; last good checkpoint " + last.string());
        }
        metrics << record_json(r) << '\n';
        metrics.flush();
        timing << json{{"step", r.step}, {"wall_time", r.wall_time}}.dump() << '\n';
        timing.flush();
        if (config_.checkpoint_every > 0 && step_ % config_.checkpoint_every == 0 && step_ < total) {
            last = ckpt_path(step_);
            save_checkpoint(last);
        }
    }
    const fs::path final_path = out / "final.pva";
    save_checkpoint(final_path);
    return final_path;
}

// ---------------------------------------------------------------- checkpoints

namespace {

constexpr const char* kCheckpointHeader = "previts-checkpoint 1";

void put_params(ArrayStore& store, const std::string& prefix, const std::map<std::string, Tensor>& tensors) {
    for (const auto& [name, t] : tensors) {
        std::vector<std::int64_t> dims(t.shape.begin(), t.shape.end());
        store.put_f64(prefix + name, dims, std::span<const double>(t.data.data(), static_cast<std::size_t>(t.numel())));
    }
}

void get_params(const ArrayStore& store, const std::string& prefix, std::map<std::string, Tensor>& tensors) {
    for (auto& [name, t] : tensors) {
        const std::string key = prefix + name;
        if (!store.contains(key)) throw CheckpointMismatch("checkpoint lacks " + key);
        const auto& dims = store.dims(key);
        if (!std::equal(dims.begin(), dims.end(), t.shape.begin(), t.shape.end())) {
            throw CheckpointMismatch("checkpoint shape mismatch for " + key);
        }
        const auto v = store.get_f64(key);
        t.data = Eigen::Map<const ArrayX<>>(v.data(), static_cast<std::ptrdiff_t>(v.size()));
    }
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::uint64_t get_u64(const ArrayStore& s, const std::string& name) {
    return static_cast<std::uint64_t>(s.get_i64(name).at(0));
}

struct LoadedState {
    ArrayStore store;
    TrainConfig config;
    EncoderState state;
    int step = 0;
};

LoadedState load_state(const fs::path& path) {
    LoadedState out{ArrayStore::load(path), {}, {}, 0};
    const auto& s = out.store;
    if (!s.contains("header") || s.get_text("header") != kCheckpointHeader) {
        throw CheckpointMismatch(path.string() + " is not a checkpoint of this version");
    }
    out.config = parse_train_config(s.get_text("config"));
    if (out.config.hash() != get_u64(s, "config_hash")) throw CheckpointMismatch(path.string() + ": config hash mismatch");
    const EncoderConfig ec = out.config.encoder();
    if (ec.arch_hash() != get_u64(s, "arch_hash")) throw CheckpointMismatch(path.string() + ": architecture mismatch");
    out.step = static_cast<int>(s.get_i64("step").at(0));

    out.state.theta_q = zero_params(ec);
    out.state.theta_k = zero_params(ec);
    get_params(s, "theta_q/", out.state.theta_q.tensors);
    get_params(s, "theta_k/", out.state.theta_k.tensors);
    out.state.momentum = s.get_f64("momentum").at(0);
    const auto& qd = s.dims("queue/buffer");
    const auto qv = s.get_f64("queue/buffer");
    RowMajor buf = Eigen::Map<const RowMajor>(qv.data(), qd.at(0), qd.at(1));
    const auto meta = s.get_i64("queue/meta");
    out.state.queue = NegativeQueue(static_cast<int>(qd.at(0)), static_cast<int>(qd.at(1)));
    out.state.queue.restore(MatrixX<>(buf), static_cast<int>(meta.at(0)), static_cast<int>(meta.at(1)));
    return out;
}

}  // namespace

void Trainer::save_checkpoint(const fs::path& path) const {
    ArrayStore s;
    s.put_text("header", kCheckpointHeader);
    s.put_text("config", config_.to_text());
    const std::int64_t ch = static_cast<std::int64_t>(config_.hash());
    const std::int64_t ah = static_cast<std::int64_t>(state_.theta_q.config.arch_hash());
    s.put_i64("config_hash", {1}, std::span(&ch, 1));
    s.put_i64("arch_hash", {1}, std::span(&ah, 1));
    const std::int64_t counters[3] = {step_, epoch_, cursor_};
    s.put_i64("step", {1}, std::span(counters, 1));
    s.put_i64("epoch", {1}, std::span(counters + 1, 1));
    s.put_i64("cursor", {1}, std::span(counters + 2, 1));
    put_params(s, "theta_q/", state_.theta_q.tensors);
    put_params(s, "theta_k/", state_.theta_k.tensors);
    put_params(s, "velocity/", velocity_);
    s.put_f64("momentum", {1}, std::span(&state_.momentum, 1));
    const RowMajor buf = state_.queue.buffer();
    s.put_f64("queue/buffer", {buf.rows(), buf.cols()},
              std::span<const double>(buf.data(), static_cast<std::size_t>(buf.size())));
    const std::int64_t meta[2] = {state_.queue.head(), state_.queue.size()};
    s.put_i64("queue/meta", {2}, meta);
    s.put_text("rng/sampling", rng_.state());
    s.put_text("rng/order", order_rng_.state());
    const std::vector<std::int64_t> order(order_.begin(), order_.end());
    s.put_i64("order", {static_cast<std::int64_t>(order.size())}, order);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    s.save(tmp);
    fs::rename(tmp, path);
}

void Trainer::load_checkpoint(const fs::path& path) {
    auto loaded = load_state(path);
    if (loaded.config.hash() != config_.hash()) {
        throw CheckpointMismatch(path.string() + " was written under a different configuration");
    }
    const auto& s = loaded.store;
    state_ = std::move(loaded.state);
    step_ = loaded.step;
    epoch_ = static_cast<int>(s.get_i64("epoch").at(0));
    cursor_ = static_cast<int>(s.get_i64("cursor").at(0));
    for (auto& [name, t] : velocity_) t = Tensor::zeros(t.shape);
    get_params(s, "velocity/", velocity_);
    rng_.restore(s.get_text("rng/sampling"));
    order_rng_.restore(s.get_text("rng/order"));
    const auto order = s.get_i64("order");
    order_.assign(order.begin(), order.end());
}

Checkpoint read_checkpoint(const fs::path& path) {
    auto loaded = load_state(path);
    Checkpoint c;
    c.step = loaded.step;
    c.config_text = loaded.store.get_text("config");
    c.config_hash = loaded.config.hash();
    c.state = std::move(loaded.state);
    return c;
}

// ---------------------------------------------------------------- ablation

AblationGrid parse_ablation_grid(const std::string& text) {
    AblationGrid g;
    TrainConfig probe;
    for (const auto& [k, v] : parse_key_values(text)) {
        if (k == "base") {
            g.base = v;
        } else if (k == "eval_corpus") {
            g.eval_corpus = v;
        } else if (k == "eval_videos") {
            g.eval_videos = parse_number<int>(k, v);
        } else {
            std::vector<std::string> values;
            std::stringstream ss(v);
            std::string item;
            while (std::getline(ss, item, ',')) {
                item = trim(item);
                if (item.empty()) throw std::invalid_argument("empty value in grid axis '" + k + "'");
                apply_override(probe, k, item);  // rejects unknown keys and malformed values early
                values.push_back(item);
            }
            if (values.empty()) throw std::invalid_argument("grid axis '" + k + "' has no values");
            g.axes.emplace_back(k, std::move(values));
        }
    }
    if (g.base.empty()) throw std::invalid_argument("grid needs a base config");
    return g;
}

namespace {

double final_attention_loss(const fs::path& metrics) {
    std::ifstream in(metrics);
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) values.push_back(json::parse(line).at("l_att").get<double>());
    if (values.empty()) return 0.0;
    const std::size_t n = std::min<std::size_t>(10, values.size());
    double s = 0.0;
    for (std::size_t i = values.size() - n; i < values.size(); ++i) s += values[i];
    return s / static_cast<double>(n);
}

}  // namespace

std::vector<AblationRow> ablate(const AblationGrid& grid, const fs::path& out_dir) {
    std::vector<std::map<std::string, std::string>> cells{{}};
    for (const auto& [key, values] : grid.axes) {
        std::vector<std::map<std::string, std::string>> next;
        for (const auto& cell : cells) {
            for (const auto& v : values) {
                auto c = cell;
                c[key] = v;
                next.push_back(std::move(c));
            }
        }
        cells = std::move(next);
    }

    std::vector<LabeledVideo> held_out;
    if (!grid.eval_corpus.empty()) {
        const auto m = CorpusManifest::load(grid.eval_corpus);
        std::vector<std::string> ids;
        for (const auto& e : m.entries) {
            if (static_cast<int>(ids.size()) >= grid.eval_videos) break;
            ids.push_back(e.video_id);
        }
        held_out = load_videos(m, ids);
    }

    std::vector<AblationRow> rows;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        AblationRow row;
        row.overrides = cells[i];
        try {
            TrainConfig c = load_train_config(grid.base);
            for (const auto& [k, v] : cells[i]) apply_override(c, k, v);
            c.out = (out_dir / ("cell_" + std::to_string(i))).string();
            c.validate();
            Trainer trainer(c);
            trainer.run();
            row.final_l_att = final_attention_loss(fs::path(c.out) / "metrics.jsonl");
            const auto manifest = CorpusManifest::load(c.corpus);
            row.backgrounds = backgrounds_eval(trainer.state().theta_q, manifest).accuracy;
            if (!held_out.empty()) row.tracking = tracking_eval(trainer.state().theta_q, held_out);
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
    std::vector<std::string> keys;
    for (const auto& r : rows)
        for (const auto& [k, v] : r.overrides)
            if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    std::vector<std::string> variants;
    for (Variant v : kAllVariants) variants.push_back(variant_name(v));

    std::ostringstream os;
    os << "|";
    for (const auto& k : keys) os << ' ' << k << " |";
    os << " l_att |";
    for (const auto& v : variants) os << ' ' << v << " |";
    os << " J | O | D | status |\n|";
    for (std::size_t i = 0; i < keys.size() + variants.size() + 5; ++i) os << "---|";
    os << '\n';
    char buf[32];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.3f", v);
        return std::string(buf);
    };
    for (const auto& r : rows) {
        os << "|";
        for (const auto& k : keys) os << ' ' << (r.overrides.count(k) ? r.overrides.at(k) : "") << " |";
        if (r.failed) {
            for (std::size_t i = 0; i < variants.size() + 4; ++i) os << " - |";
            os << " failed: " << r.error << " |\n";
            continue;
        }
        os << ' ' << num(r.final_l_att) << " |";
        for (const auto& v : variants) os << ' ' << num(r.backgrounds.at(v)) << " |";
        if (r.tracking) {
            os << ' ' << num(r.tracking->mean_j) << " | " << num(r.tracking->recall_o) << " | "
               << num(r.tracking->decay_d) << " |";
        } else {
            os << " - | - | - |";
        }
        os << " ok |\n";
    }
    return os.str();
}

std::string to_json(const std::vector<AblationRow>& rows) {
    json out = json::array();
    for (const auto& r : rows) {
        json j;
        j["overrides"] = r.overrides;
        j["failed"] = r.failed;
        if (r.failed) {
            j["error"] = r.error;
        } else {
            j["final_l_att"] = r.final_l_att;
            j["backgrounds"] = r.backgrounds;
            if (r.tracking) j["tracking"] = json::parse(to_json(*r.tracking));
        }
        out.push_back(std::move(j));
    }
    return out.dump(2);
}

}  // namespace previts
