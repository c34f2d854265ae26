#include "commands.hpp"

#include "previts/eval.hpp"
#include "previts/harness.hpp"
#include "previts/image_io.hpp"
#include "previts/plot.hpp"
#include "previts/tracking.hpp"

#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace previts::cli {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

// Deterministic donor for previews: first eligible video after `self` in manifest order.
const ManifestEntry& preview_donor(const CorpusManifest& m, const ManifestEntry& self, Variant v) {
    const int classes = m.num_classes();
    const auto n = m.entries.size();
    std::size_t start = 0;
    while (&m.entries[start] != &self) ++start;
    for (std::size_t i = 1; i <= n; ++i) {
        const auto& e = m.entries[(start + i) % n];
        if (&e == &self) continue;
        if (v == Variant::MixedSame && e.class_id != self.class_id) continue;
        if (v == Variant::MixedNext && e.class_id != (self.class_id + 1) % classes) continue;
        return e;
    }
    throw std::runtime_error("no donor video for " + variant_name(v));
}

}  // namespace

void add_corpus_commands(CLI::App& app) {
    auto* build = app.add_subcommand("build", "Generate a synthetic corpus");
    auto config = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto jobs = std::make_shared<int>(1);
    build->add_option("--config", *config, "Corpus config (flat key = value)");
    build->add_option("--out", *out, "Output directory")->required();
    build->add_option("--jobs", *jobs, "Parallel generation workers")->check(CLI::PositiveNumber);
    build->callback([=] {
        const CorpusConfig c = config->empty() ? CorpusConfig{} : parse_corpus_config(read_text(*config));
        const auto m = build_corpus(c, *out, *jobs);
        std::cout << "wrote " << m.entries.size() << " videos to " << *out << "\n";
    });

    auto* preview = app.add_subcommand("preview", "Write PNG frames of one video under a variant");
    auto corpus = std::make_shared<std::string>(".");
    auto id = std::make_shared<std::string>();
    auto variant = std::make_shared<std::string>("original");
    auto png_dir = std::make_shared<std::string>();
    preview->add_option("--corpus", *corpus, "Corpus directory");
    preview->add_option("--id", *id, "Video id")->required();
    preview->add_option("--variant", *variant, "Backgrounds variant");
    preview->add_option("--out", *png_dir, "PNG directory")->required();
    preview->callback([=] {
        const auto m = CorpusManifest::load(*corpus);
        const auto& entry = m.find(*id);
        const Variant v = parse_variant(*variant);
        const auto g = load_video(m, *id);
        FrameVolume frames;
        if (variant_needs_donor(v)) {
            const auto& donor_entry = preview_donor(m, entry, v);
            const auto d = load_video(m, donor_entry.video_id);
            frames = composite_variant(g.video, g.gt, v, Donor{d.video, d.gt}, m.num_classes());
        } else {
            frames = composite_variant(g.video, g.gt, v);
        }
        const auto files = write_frames_png(frames, *png_dir, *id + "_" + variant_name(v));
        std::cout << "wrote " << files.size() << " frames to " << *png_dir << "\n";
    });
    app.require_subcommand(1);
}

void add_track_commands(CLI::App& app) {
    auto* run = app.add_subcommand("run", "Extract tracking tubes for every video of a corpus");
    auto corpus = std::make_shared<std::string>();
    auto backend = std::make_shared<std::string>("contrast");
    auto gate = std::make_shared<double>(0.3);
    auto out = std::make_shared<std::string>();
    run->add_option("--corpus", *corpus, "Corpus directory")->required();
    run->add_option("--backend", *backend, "oracle|contrast");
    run->add_option("--iou-gate", *gate, "Minimum IoU between consecutive masks")->check(CLI::Range(0.0, 1.0));
    run->add_option("--out", *out, "Tube directory")->required();
    run->callback([=] {
        const auto m = CorpusManifest::load(*corpus);
        const SaliencyBackend b = parse_saliency_backend(*backend);
        fs::create_directories(*out);
        TubeOptions opts;
        opts.iou_gate = *gate;
        nlohmann::json summary = nlohmann::json::array();
        double iou_sum = 0.0;
        long iou_n = 0;
        for (const auto& e : m.entries) {
            const auto g = load_video(m, e.video_id);
            nlohmann::json row{{"video_id", e.video_id}};
            try {
                const auto seed = compute_saliency(g.video, 0, b, &g.gt);
                const auto tube = extract_tube(g.video, seed, b, &g.gt, opts);
                save_tube(fs::path(*out) / (e.video_id + ".pva"), tube);
                double s = 0.0;
                const int len = tube.active_length();
                for (int k = 0; k < len; ++k) s += mask_iou(tube.masks.frames[k], g.gt.fg_mask.frames[k]);
                iou_sum += s;
                iou_n += len;
                row["active_length"] = len;
                row["mean_iou"] = len ? s / len : 0.0;
            } catch (const NoSalientObject& ex) {
                row["error"] = ex.what();
            }
            summary.push_back(row);
        }
        write_text(fs::path(*out) / "tubes.json", summary.dump(2));
        std::cout << "tracked " << m.entries.size() << " videos; mean IoU over active frames "
                  << (iou_n ? iou_sum / static_cast<double>(iou_n) : 0.0) << "\n";
    });
    app.require_subcommand(1);
}

void add_training_commands(CLI::App& app) {
    auto* train = app.add_subcommand("train", "Pretrain an encoder");
    auto config = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto resume = std::make_shared<std::string>();
    train->add_option("--config", *config, "Training config (flat key = value)")->required();
    train->add_option("--out", *out, "Run directory (overrides the config)");
    train->add_option("--resume", *resume, "Checkpoint to continue from");
    train->callback([=] {
        TrainConfig c = load_train_config(*config);
        if (!out->empty()) c.out = *out;
        Trainer t(c);
        if (!resume->empty()) t.load_checkpoint(*resume);
        std::cout << "config hash " << c.hash() << ", " << t.usable_videos() << " usable videos, "
                  << t.total_steps() << " steps\n";
        const auto final_path = t.run();
        std::cout << "final checkpoint " << final_path.string() << "\n";
    });

    auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate every cell of a grid");
    auto grid = std::make_shared<std::string>();
    auto ablate_out = std::make_shared<std::string>("ablation");
    ablate_cmd->add_option("--grid", *grid, "Grid file")->required();
    ablate_cmd->add_option("--out", *ablate_out, "Output directory");
    ablate_cmd->callback([=] {
        const auto g = parse_ablation_grid(read_text(*grid));
        const auto rows = ablate(g, *ablate_out);
        const std::string table = ablation_table(rows);
        write_text(fs::path(*ablate_out) / "ablation.md", table);
        write_text(fs::path(*ablate_out) / "ablation.json", to_json(rows));
        std::cout << table;
    });

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    auto kind = std::make_shared<std::string>();
    auto checkpoint = std::make_shared<std::string>();
    auto corpus = std::make_shared<std::string>();
    auto report = std::make_shared<std::string>("report.json");
    auto videos = std::make_shared<int>(0);
    auto ks = std::make_shared<std::vector<int>>();
    eval->add_option("kind", *kind, "backgrounds|tracking|retrieval")
        ->required()
        ->check(CLI::IsMember({"backgrounds", "tracking", "retrieval"}));
    eval->add_option("--checkpoint", *checkpoint, "Checkpoint file")->required();
    eval->add_option("--corpus", *corpus, "Corpus directory")->required();
    eval->add_option("--out", *report, "Report path");
    eval->add_option("--videos", *videos, "Tracking: use only the first N videos (0 = all)");
    eval->add_option("--k", *ks, "Retrieval: neighbourhood sizes (default 1 5 10 20 50, capped at the train size)");
    eval->callback([=] {
        const auto ck = read_checkpoint(*checkpoint);
        const auto& params = ck.state.theta_q;
        const auto m = CorpusManifest::load(*corpus);
        std::string text;
        if (*kind == "backgrounds") {
            text = to_json(backgrounds_eval(params, m));
        } else if (*kind == "retrieval") {
            std::vector<int> use = *ks;
            if (use.empty()) {
                const auto train_size = static_cast<int>(split_corpus(m).train.size());
                for (int k : {1, 5, 10, 20, 50}) {
                    if (k <= train_size) use.push_back(k);
                    else std::cerr << "skipping k = " << k << ": only " << train_size << " train videos\n";
                }
            }
            text = to_json(retrieval_eval(params, m, use));
        } else {
            std::vector<std::string> ids;
            for (const auto& e : m.entries) {
                if (*videos > 0 && static_cast<int>(ids.size()) >= *videos) break;
                ids.push_back(e.video_id);
            }
            text = to_json(tracking_eval(params, load_videos(m, ids)));
        }
        write_text(*report, text);
        std::cout << text << "\n";
    });

    auto* plot = app.add_subcommand("plot", "Render reports and metrics streams as SVG");
    auto inputs = std::make_shared<std::vector<std::string>>();
    auto plot_out = std::make_shared<std::string>("plots");
    plot->add_option("reports", *inputs, "Report JSON or metrics.jsonl files")->required();
    plot->add_option("--out", *plot_out, "Output directory");
    plot->callback([=] {
        std::vector<fs::path> paths(inputs->begin(), inputs->end());
        for (const auto& p : plot_reports(paths, *plot_out)) std::cout << p.string() << "\n";
    });
    app.require_subcommand(1);
}

int run(CLI::App& app, int argc, char** argv) {
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace previts::cli
