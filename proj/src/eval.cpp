#include "previts/eval.hpp"

#include "previts/objective.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace previts {

namespace {

std::vector<int> window_starts(int frames, int t_len, int count) {
    if (frames < t_len) throw std::invalid_argument("video shorter than the encoder clip length");
    std::vector<int> starts;
    if (count <= 1 || frames == t_len) return {0};
    for (int i = 0; i < count; ++i) {
        const int s = static_cast<int>(std::lround(static_cast<double>(i) * (frames - t_len) / (count - 1)));
        if (starts.empty() || starts.back() != s) starts.push_back(s);
    }
    return starts;
}

std::vector<std::pair<int, int>> corner_tiles(int h, int w, int size) {
    if (h < size || w < size) throw std::invalid_argument("frame smaller than the encoder input");
    std::vector<std::pair<int, int>> tiles;
    for (int y : {0, h - size})
        for (int x : {0, w - size})
            if (std::find(tiles.begin(), tiles.end(), std::make_pair(y, x)) == tiles.end()) tiles.emplace_back(y, x);
    return tiles;
}

// Frame k's crop repeated over a clip of `frames`.
FrameVolume held_clip(const FrameVolume& video, int k, int y, int x, int frames, int size) {
    const FrameVolume still = video.clip(k, 1, 1, y, x, size, size);
    FrameVolume out(frames, size, size, video.fps);
    for (int f = 0; f < frames; ++f) out.frame(f) = still.frame(0);
    return out;
}

}  // namespace

VectorX<> video_features(const EncoderParams& params, const FrameVolume& video, const FeatureConfig& config) {
    const EncoderConfig& c = params.config;
    auto tiles = corner_tiles(video.h, video.w, c.size);
    if (config.centre_tile && tiles.size() > 1) tiles.emplace_back((video.h - c.size) / 2, (video.w - c.size) / 2);
    const bool embed = config.layer == FeatureLayer::Embedding;
    VectorX<> sum = VectorX<>::Zero(embed ? c.proj_dim : c.channels[2]);
    int n = 0;
    for (int s : window_starts(video.t, c.frames, config.temporal_windows)) {
        for (const auto& [y, x] : tiles) {
            const auto r = encode(params, video.clip(s, c.frames, 1, y, x, c.size, c.size));
            sum += embed ? r.embedding : r.pooled;
            ++n;
        }
    }
    return sum / n;
}

MatrixX<> video_features(const EncoderParams& params, const std::vector<FrameVolume>& videos,
                         const FeatureConfig& config) {
    MatrixX<> out(static_cast<std::ptrdiff_t>(videos.size()),
                  config.layer == FeatureLayer::Embedding ? params.config.proj_dim : params.config.channels[2]);
    for (std::size_t i = 0; i < videos.size(); ++i) {
        out.row(static_cast<std::ptrdiff_t>(i)) = video_features(params, videos[i], config).transpose();
    }
    return out;
}

int LinearClassifier::predict(const VectorX<>& x) const {
    const VectorX<> z = weights.transpose() * ((x - mean).cwiseProduct(scale)) + bias;
    Eigen::Index best = 0;
    z.maxCoeff(&best);
    return static_cast<int>(best);
}

double LinearClassifier::accuracy(const MatrixX<>& x, const std::vector<int>& labels) const {
    if (labels.empty()) return 0.0;
    int hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        hits += predict(x.row(static_cast<std::ptrdiff_t>(i)).transpose()) == labels[i];
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

LinearClassifier train_linear_classifier(const MatrixX<>& x, const std::vector<int>& labels, int num_classes,
                                         const ProbeConfig& config) {
    if (num_classes < 2) throw std::invalid_argument("linear probe needs at least two classes");
    if (x.rows() != static_cast<std::ptrdiff_t>(labels.size()) || x.rows() == 0) {
        throw std::invalid_argument("linear probe: features and labels disagree");
    }
    const auto n = x.rows();
    const auto d = x.cols();
    LinearClassifier clf;
    clf.mean = x.colwise().mean().transpose();
    clf.scale.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        const double sd = std::sqrt((x.col(j).array() - clf.mean[j]).square().mean());
        clf.scale[j] = sd > 1e-12 ? 1.0 / sd : 0.0;
    }
    const MatrixX<> xs = (x.rowwise() - clf.mean.transpose()) * clf.scale.asDiagonal();
    MatrixX<> y = MatrixX<>::Zero(n, num_classes);
    for (Eigen::Index i = 0; i < n; ++i) y(i, labels[static_cast<std::size_t>(i)]) = 1.0;

    clf.weights = MatrixX<>::Zero(d, num_classes);
    clf.bias = VectorX<>::Zero(num_classes);
    for (int it = 0; it < config.iterations; ++it) {
        MatrixX<> z = (xs * clf.weights).rowwise() + clf.bias.transpose();
        const VectorX<> zmax = z.rowwise().maxCoeff();
        z = (z.colwise() - zmax).array().exp().matrix();
        const VectorX<> zsum = z.rowwise().sum();
        const MatrixX<> p = zsum.cwiseInverse().asDiagonal() * z;
        const MatrixX<> diff = (p - y) / static_cast<double>(n);
        clf.weights -= config.learning_rate * (xs.transpose() * diff + config.l2 * clf.weights);
        clf.bias -= config.learning_rate * diff.colwise().sum().transpose();
    }
    return clf;
}

std::vector<LabeledVideo> load_videos(const CorpusManifest& manifest, const std::vector<std::string>& ids) {
    std::vector<LabeledVideo> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back({id, load_video(manifest, id)});
    return out;
}

ProbeSession::ProbeSession(const EncoderParams& params, const CorpusManifest& manifest, const ProbeConfig& probe,
                           const FeatureConfig& features, std::uint64_t seed)
    : params_(params), num_classes_(manifest.num_classes()), features_(features), seed_(seed) {
    if (num_classes_ < 2) throw std::invalid_argument("linear probe needs at least two classes");
    const CorpusSplit split = split_corpus(manifest);
    train_ = load_videos(manifest, split.train);
    test_ = load_videos(manifest, split.test);
    for (const auto* set : {&train_, &test_})
        for (const auto& v : *set) by_class_[v.data.gt.class_id].push_back(&v);

    std::vector<FrameVolume> clips;
    std::vector<int> labels;
    for (const auto& v : train_) {
        clips.push_back(v.data.video);
        labels.push_back(v.data.gt.class_id);
    }
    classifier_ = train_linear_classifier(video_features(params_, clips, features_), labels, num_classes_, probe);
}

const LabeledVideo& ProbeSession::donor_for(const LabeledVideo& video, Variant variant) const {
    const int c = video.data.gt.class_id;
    std::vector<const LabeledVideo*> pool;
    if (variant == Variant::MixedSame) {
        pool = by_class_.at(c);
    } else if (variant == Variant::MixedNext) {
        pool = by_class_.at((c + 1) % num_classes_);
    } else {
        for (const auto& [_, vs] : by_class_) pool.insert(pool.end(), vs.begin(), vs.end());
    }
    pool.erase(std::remove_if(pool.begin(), pool.end(), [&](const LabeledVideo* v) { return v->id == video.id; }),
               pool.end());
    if (pool.empty()) throw std::runtime_error("no donor available for " + video.id);
    Rng rng = Rng::derive(seed_, video.id + "/" + variant_name(variant));
    return *pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
}

double ProbeSession::evaluate(Variant variant) const {
    std::vector<FrameVolume> clips;
    std::vector<int> labels;
    for (const auto& v : test_) {
        std::optional<Donor> donor;
        if (variant_needs_donor(variant)) {
            const LabeledVideo& d = donor_for(v, variant);
            donor.emplace(Donor{d.data.video, d.data.gt});
        }
        clips.push_back(composite_variant(v.data.video, v.data.gt, variant, donor, num_classes_));
        labels.push_back(v.data.gt.class_id);
    }
    return classifier_.accuracy(video_features(params_, clips, features_), labels);
}

double linear_probe(const EncoderParams& params, const CorpusManifest& manifest, Variant variant,
                    const ProbeConfig& probe, std::uint64_t seed) {
    return ProbeSession(params, manifest, probe, {}, seed).evaluate(variant);
}

BackgroundsReport backgrounds_eval(const EncoderParams& params, const CorpusManifest& manifest,
                                   const ProbeConfig& probe, std::uint64_t seed, const FeatureConfig& features) {
    const ProbeSession session(params, manifest, probe, features, seed);
    BackgroundsReport r;
    r.n_eval = session.num_eval();
    for (Variant v : kAllVariants) r.accuracy[variant_name(v)] = session.evaluate(v);
    return r;
}

RetrievalReport retrieval_from_features(const MatrixX<>& train, const std::vector<int>& train_labels,
                                        const std::vector<std::string>& train_ids, const MatrixX<>& test,
                                        const std::vector<int>& test_labels,
                                        const std::vector<std::string>& test_ids, const std::vector<int>& ks) {
    for (int k : ks) {
        if (k < 1 || k > train.rows()) {
            throw std::invalid_argument("retrieval: k = " + std::to_string(k) + " but the train set has " +
                                        std::to_string(train.rows()) + " items");
        }
    }
    const MatrixX<> a = train.rowwise().normalized();
    const MatrixX<> b = test.rowwise().normalized();
    const MatrixX<> sims = b * a.transpose();
    RetrievalReport r;
    std::map<int, int> hits;
    for (Eigen::Index i = 0; i < b.rows(); ++i) {
        std::vector<int> order;
        for (Eigen::Index j = 0; j < a.rows(); ++j) {
            if (train_ids[static_cast<std::size_t>(j)] != test_ids[static_cast<std::size_t>(i)]) {
                order.push_back(static_cast<int>(j));
            }
        }
        std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return sims(i, x) > sims(i, y); });
        int first_hit = -1;
        for (std::size_t rank = 0; rank < order.size(); ++rank) {
            if (train_labels[static_cast<std::size_t>(order[rank])] == test_labels[static_cast<std::size_t>(i)]) {
                first_hit = static_cast<int>(rank);
                break;
            }
        }
        for (int k : ks) hits[k] += first_hit >= 0 && first_hit < k;
    }
    for (int k : ks) r.top_k[k] = b.rows() ? static_cast<double>(hits[k]) / static_cast<double>(b.rows()) : 0.0;
    return r;
}

RetrievalReport retrieval_eval(const EncoderParams& params, const CorpusManifest& manifest,
                               const std::vector<int>& ks) {
    const CorpusSplit split = split_corpus(manifest);
    auto featurize = [&](const std::vector<std::string>& ids, std::vector<int>& labels) {
        const auto videos = load_videos(manifest, ids);
        std::vector<FrameVolume> clips;
        for (const auto& v : videos) {
            clips.push_back(v.data.video);
            labels.push_back(v.data.gt.class_id);
        }
        return video_features(params, clips);
    };
    std::vector<int> train_labels, test_labels;
    const MatrixX<> train = featurize(split.train, train_labels);
    const MatrixX<> test = featurize(split.test, test_labels);
    return retrieval_from_features(train, train_labels, split.train, test, test_labels, split.test, ks);
}

TrackingReport tracking_metrics(const std::vector<std::vector<double>>& per_frame_j, double recall_threshold) {
    if (per_frame_j.empty()) throw std::invalid_argument("tracking metrics need at least one sequence");
    TrackingReport r;
    r.per_video = per_frame_j;
    double total = 0.0, decay = 0.0;
    long count = 0;
    int recalled = 0;
    for (const auto& seq : per_frame_j) {
        if (seq.empty()) throw std::invalid_argument("tracking metrics: empty sequence");
        const double sum = std::accumulate(seq.begin(), seq.end(), 0.0);
        total += sum;
        count += static_cast<long>(seq.size());
        recalled += sum / static_cast<double>(seq.size()) > recall_threshold;
        const std::size_t q = std::max<std::size_t>(1, seq.size() / 4);
        const double first = std::accumulate(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(q), 0.0) / q;
        const double last = std::accumulate(seq.end() - static_cast<std::ptrdiff_t>(q), seq.end(), 0.0) / q;
        decay += first - last;
    }
    r.mean_j = total / static_cast<double>(count);
    r.recall_o = static_cast<double>(recalled) / static_cast<double>(per_frame_j.size());
    r.decay_d = decay / static_cast<double>(per_frame_j.size());
    return r;
}

MatrixX<> upsample_bilinear(const MatrixX<>& grid, int out_h, int out_w) {
    const int in_h = static_cast<int>(grid.rows()), in_w = static_cast<int>(grid.cols());
    MatrixX<> out(out_h, out_w);
    auto coord = [](int o, int in, int outn, int& i0, int& i1, double& f) {
        double s = (o + 0.5) * in / outn - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(in - 1));
        i0 = static_cast<int>(std::floor(s));
        i1 = std::min(i0 + 1, in - 1);
        f = s - i0;
    };
    for (int y = 0; y < out_h; ++y) {
        int y0, y1;
        double fy;
        coord(y, in_h, out_h, y0, y1, fy);
        for (int x = 0; x < out_w; ++x) {
            int x0, x1;
            double fx;
            coord(x, in_w, out_w, x0, x1, fx);
            out(y, x) = (1 - fy) * ((1 - fx) * grid(y0, x0) + fx * grid(y0, x1)) +
                        fy * ((1 - fx) * grid(y1, x0) + fx * grid(y1, x1));
        }
    }
    return out;
}

MaskVolume gradcam_track(const EncoderParams& params, const FrameVolume& video, const Mask2D& first_mask,
                         const TrackConfig& config) {
    const EncoderConfig& c = params.config;
    const auto box = mask_bbox(first_mask);
    if (mask_area(first_mask) == 0 || !box) throw std::invalid_argument("gradcam_track: empty first mask");
    if (first_mask.rows() != video.h || first_mask.cols() != video.w) {
        throw std::invalid_argument("gradcam_track: mask dims do not match the video");
    }
    if (video.t < c.frames) throw std::invalid_argument("gradcam_track: video shorter than the clip length");
    const auto tiles = corner_tiles(video.h, video.w, c.size);

    // Key foreground: frame 0 masked, cropped around the object, held still.
    const int ky = std::clamp((box->y0 + box->y1 - c.size) / 2, 0, video.h - c.size);
    const int kx = std::clamp((box->x0 + box->x1 - c.size) / 2, 0, video.w - c.size);
    const FrameVolume key = held_clip(video, 0, ky, kx, c.frames, c.size);
    MaskVolume key_mask(c.frames, c.size, c.size);
    for (auto& f : key_mask.frames) f = first_mask.block(ky, kx, c.size, c.size);
    const VectorX<> km = encode(params, mask_key_foreground(key, key_mask)).embedding;

    MaskVolume out(video.t, video.h, video.w);
    for (int k = 0; k < video.t; ++k) {
        MatrixX<> acc = MatrixX<>::Zero(video.h, video.w), cnt = MatrixX<>::Zero(video.h, video.w);
        for (const auto& [ty, tx] : tiles) {
            const Tensor g = gradcam(params, held_clip(video, k, ty, tx, c.frames, c.size), km).grid;
            const int tp = g.shape[0], gh = g.shape[1], gw = g.shape[2];
            MatrixX<> plane = MatrixX<>::Zero(gh, gw);
            for (int t = 0; t < tp; ++t)
                for (int y = 0; y < gh; ++y)
                    for (int x = 0; x < gw; ++x) plane(y, x) += g.data[(t * gh + y) * gw + x] / tp;
            acc.block(ty, tx, c.size, c.size) += upsample_bilinear(plane, c.size, c.size);
            cnt.block(ty, tx, c.size, c.size).array() += 1.0;
        }
        const MatrixX<> heat = acc.cwiseQuotient(cnt);
        const double peak = heat.maxCoeff();
        if (!(peak > 0.0)) continue;
        const double cut = config.threshold * peak;
        for (int y = 0; y < video.h; ++y)
            for (int x = 0; x < video.w; ++x) out.frames[static_cast<std::size_t>(k)](y, x) = heat(y, x) >= cut;
    }
    return out;
}

std::vector<double> per_frame_iou(const MaskVolume& predicted, const MaskVolume& truth) {
    if (predicted.t != truth.t || predicted.h != truth.h || predicted.w != truth.w) {
        throw std::invalid_argument("per_frame_iou: volume dims differ");
    }
    std::vector<double> j;
    for (int k = 0; k < truth.t; ++k) {
        j.push_back(mask_iou(predicted.frames[static_cast<std::size_t>(k)], truth.frames[static_cast<std::size_t>(k)]));
    }
    return j;
}

TrackingReport tracking_eval(const EncoderParams& params, const std::vector<LabeledVideo>& videos,
                             const TrackConfig& config) {
    std::vector<std::vector<double>> seqs;
    std::vector<double> first;
    std::vector<std::string> ids;
    for (const auto& v : videos) {
        const MaskVolume pred = gradcam_track(params, v.data.video, v.data.gt.fg_mask.frames[0], config);
        const auto j = per_frame_iou(pred, v.data.gt.fg_mask);
        first.push_back(j.front());
        seqs.emplace_back(j.begin() + 1, j.end());
        ids.push_back(v.id);
    }
    TrackingReport r = tracking_metrics(seqs);
    r.first_frame_j = std::move(first);
    r.video_ids = std::move(ids);
    return r;
}

std::string to_json(const BackgroundsReport& r) {
    nlohmann::json j;
    j["n_eval"] = r.n_eval;
    j["accuracy"] = r.accuracy;
    return j.dump(2);
}

std::string to_json(const RetrievalReport& r) {
    nlohmann::json j, tk;
    for (const auto& [k, v] : r.top_k) tk[std::to_string(k)] = v;
    j["top_k"] = tk;
    return j.dump(2);
}

std::string to_json(const TrackingReport& r) {
    nlohmann::json j;
    j["mean_j"] = r.mean_j;
    j["recall_o"] = r.recall_o;
    j["decay_d"] = r.decay_d;
    j["video_ids"] = r.video_ids;
    j["first_frame_j"] = r.first_frame_j;
    j["per_video"] = r.per_video;
    return j.dump(2);
}

}  // namespace previts
