#include "doctest.h"

#include "previts/eval.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>

using namespace previts;

TEST_CASE("tracking metrics on fixtures") {
    const auto ones = tracking_metrics({{1.0, 1.0, 1.0}, {1.0, 1.0}});
    CHECK(ones.mean_j == 1.0);
    CHECK(ones.recall_o == 1.0);
    CHECK(ones.decay_d == 0.0);

    const auto decay = tracking_metrics({{0.8, 0.6, 0.4, 0.2}});
    CHECK(decay.decay_d == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(decay.mean_j == doctest::Approx(0.5).epsilon(1e-15));

    const auto recall = tracking_metrics({{0.6, 0.6}, {0.4, 0.4}}, 0.5);
    CHECK(recall.recall_o == 0.5);
    CHECK(recall.mean_j == doctest::Approx(0.5));

    // Quarters of eight frames are pairs.
    const auto eight = tracking_metrics({{0.2, 0.4, 0.5, 0.5, 0.5, 0.5, 0.9, 0.7}});
    CHECK(eight.decay_d == doctest::Approx(0.3 - 0.8));
    CHECK(eight.decay_d <= 0.0);

    CHECK_THROWS(tracking_metrics({}));
}

TEST_CASE("retrieval protocol") {
    Rng rng(1);
    const int n = 12, d = 5, classes = 3;
    MatrixX<> feats(n, d);
    std::vector<int> labels;
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) feats(i, j) = rng.normal();
        labels.push_back(i % classes);
        ids.push_back("v" + std::to_string(i));
    }
    // k = train size: every class is present, so every query hits.
    const auto all = retrieval_from_features(feats, labels, ids, feats.topRows(4),
                                             {labels.begin(), labels.begin() + 4}, {"q0", "q1", "q2", "q3"}, {n});
    CHECK(all.top_k.at(n) == 1.0);

    // Duplicated set: the copy is the nearest neighbour once self is excluded.
    MatrixX<> doubled(2 * n, d);
    doubled << feats, feats;
    std::vector<int> dl = labels;
    dl.insert(dl.end(), labels.begin(), labels.end());
    std::vector<std::string> di = ids;
    for (int i = 0; i < n; ++i) di.push_back("copy" + std::to_string(i));
    const auto dup = retrieval_from_features(doubled, dl, di, doubled, dl, di, {1});
    CHECK(dup.top_k.at(1) == 1.0);

    CHECK_THROWS_AS(retrieval_from_features(feats, labels, ids, feats, labels, ids, {n + 1}), std::invalid_argument);
}

TEST_CASE("retrieval with random embeddings sits near chance and is monotone in k") {
    Rng rng(2);
    const int classes = 4, n_train = 400, n_test = 400, d = 16;
    MatrixX<> tr(n_train, d), te(n_test, d);
    std::vector<int> ltr, lte;
    std::vector<std::string> itr, ite;
    for (int i = 0; i < n_train; ++i) {
        for (int j = 0; j < d; ++j) tr(i, j) = rng.normal();
        ltr.push_back(i % classes);
        itr.push_back("a" + std::to_string(i));
    }
    for (int i = 0; i < n_test; ++i) {
        for (int j = 0; j < d; ++j) te(i, j) = rng.normal();
        lte.push_back(i % classes);
        ite.push_back("b" + std::to_string(i));
    }
    const auto r = retrieval_from_features(tr, ltr, itr, te, lte, ite, {1, 5, 10, 20, 50});
    // Binomial(400, 1/4): 3 sigma is about 0.065.
    CHECK(std::abs(r.top_k.at(1) - 0.25) < 0.065);
    double prev = 0.0;
    for (const auto& [k, acc] : r.top_k) {
        CHECK(acc >= prev);
        prev = acc;
    }
}

TEST_CASE("linear classifier") {
    Rng rng(3);
    const int n = 120, d = 6, classes = 3;
    MatrixX<> x(n, d);
    std::vector<int> y;
    for (int i = 0; i < n; ++i) {
        const int c = i % classes;
        for (int j = 0; j < d; ++j) x(i, j) = rng.normal() * 0.3 + (j == c ? 3.0 : 0.0);
        y.push_back(c);
    }
    const auto clf = train_linear_classifier(x, y, classes);
    CHECK(clf.accuracy(x, y) == 1.0);
    CHECK_THROWS_AS(train_linear_classifier(x, y, 1), std::invalid_argument);

    // Pure noise labels: training accuracy can memorise but fresh noise is at chance.
    MatrixX<> noise(400, d), fresh(400, d);
    std::vector<int> ny, fy;
    for (int i = 0; i < 400; ++i) {
        for (int j = 0; j < d; ++j) {
            noise(i, j) = rng.normal();
            fresh(i, j) = rng.normal();
        }
        ny.push_back(static_cast<int>(rng.uniform_int(0, 3)));
        fy.push_back(static_cast<int>(rng.uniform_int(0, 3)));
    }
    const auto nclf = train_linear_classifier(noise, ny, 4);
    CHECK(std::abs(nclf.accuracy(fresh, fy) - 0.25) < 0.065);
}

TEST_CASE("bilinear upsampling") {
    MatrixX<> g = MatrixX<>::Constant(7, 7, 2.5);
    CHECK((upsample_bilinear(g, 32, 32).array() == 2.5).all());
    MatrixX<> ramp(1, 2);
    ramp << 0.0, 1.0;
    const auto u = upsample_bilinear(ramp, 1, 4);
    CHECK(u(0, 0) == 0.0);
    CHECK(u(0, 1) == doctest::Approx(0.25));
    CHECK(u(0, 2) == doctest::Approx(0.75));
    CHECK(u(0, 3) == 1.0);
}

TEST_CASE("Grad-CAM tracking on synthetic videos") {
    EncoderConfig c;
    Rng rng(4);
    const auto p = init_params(c, rng);
    VideoSpec s;
    s.frames = 8;
    s.vx = 1.0;
    const auto g = generate_video(s, 5);
    const auto pred = gradcam_track(p, g.video, g.gt.fg_mask.frames[0]);
    CHECK(pred.t == 8);
    const auto j = per_frame_iou(pred, g.gt.fg_mask);
    for (double v : j) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK_THROWS_AS(gradcam_track(p, g.video, Mask2D::Zero(48, 48)), std::invalid_argument);

    // Static video: every frame yields the same prediction, so D is exactly 0.
    VideoSpec still;
    still.frames = 8;
    const auto sv = generate_video(still, 6);
    const auto sp = gradcam_track(p, sv.video, sv.gt.fg_mask.frames[0]);
    for (int k = 1; k < 8; ++k) CHECK((sp.frames[k] == sp.frames[0]).all());
    const auto report = tracking_eval(p, {{"still", sv}});
    CHECK(report.decay_d == 0.0);
    CHECK(report.first_frame_j.size() == 1);
    CHECK(report.per_video[0].size() == 7);
    const auto j2 = nlohmann::json::parse(to_json(report));
    CHECK(j2["mean_j"].get<double>() == report.mean_j);
}

TEST_CASE("backgrounds grid and retrieval on a small corpus") {
    CorpusConfig cfg;
    cfg.frames = 8;
    cfg.videos_per_class = 5;
    cfg.seed = 21;
    const auto dir = std::filesystem::temp_directory_path() / "previts_test_eval_corpus";
    std::filesystem::remove_all(dir);
    const auto m = build_corpus(cfg, dir);
    EncoderConfig ec;
    Rng rng(7);
    const auto p = init_params(ec, rng);

    const auto report = backgrounds_eval(p, m);
    CHECK(report.accuracy.size() == 8);
    for (Variant v : kAllVariants) {
        REQUIRE(report.accuracy.count(variant_name(v)) == 1);
        CHECK(report.accuracy.at(variant_name(v)) >= 0.0);
        CHECK(report.accuracy.at(variant_name(v)) <= 1.0);
    }
    CHECK(report.accuracy.at("original") == linear_probe(p, m, Variant::Original));
    CHECK(report.n_eval == 4);

    // Donor rules hold for every test video.
    const ProbeSession session(p, m);
    for (const auto& e : m.entries) {
        const LabeledVideo v{e.video_id, load_video(m, e.video_id)};
        CHECK(session.donor_for(v, Variant::MixedSame).data.gt.class_id == e.class_id);
        CHECK(session.donor_for(v, Variant::MixedNext).data.gt.class_id == (e.class_id + 1) % 4);
        CHECK(session.donor_for(v, Variant::MixedRand).id != e.video_id);
        CHECK(&session.donor_for(v, Variant::MixedRand) == &session.donor_for(v, Variant::MixedRand));
    }

    const auto r = retrieval_eval(p, m, {1, 5, 10, 16});
    CHECK(r.top_k.at(16) == 1.0);
    double prev = 0.0;
    for (const auto& [k, acc] : r.top_k) {
        CHECK(acc >= prev);
        prev = acc;
    }
    CHECK_THROWS(retrieval_eval(p, m, {1, 17}));
    const auto j = nlohmann::json::parse(to_json(report));
    CHECK(j["accuracy"].size() == 8);
}
