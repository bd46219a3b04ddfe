// trajcap: train, caption, and inspect bidirectional-trajectory captioning
// models from the command line. Subcommands bind the library modules to file
// formats; all randomness flows from --seed (or TRAJCAP_SEED).
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "trajcap/btg.hpp"
#include "trajcap/dataio.hpp"
#include "trajcap/error.hpp"
#include "trajcap/inference.hpp"
#include "trajcap/metrics.hpp"
#include "trajcap/model.hpp"
#include "trajcap/training.hpp"

using nlohmann::json;
using namespace trajcap;

namespace {

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw std::invalid_argument("cannot read config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Output stream that is either stdout or an owned file.
class OutSink {
public:
    explicit OutSink(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
            if (!file_->good()) throw DataError("cannot open output file: " + path);
        }
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

/// Parsed TRAJCAP_SEED, or nullopt when the variable is unset.
std::optional<std::uint64_t> seed_from_env() {
    const char* env = std::getenv("TRAJCAP_SEED");
    if (env == nullptr) return std::nullopt;
    try {
        std::size_t used = 0;
        std::uint64_t seed = std::stoull(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument("");
        return seed;
    } catch (const std::exception&) {
        throw std::invalid_argument("TRAJCAP_SEED must be an unsigned integer, got: " +
                                    std::string(env));
    }
}

/// TrainConfig flags shared by the subcommands, resolved with precedence
/// flags > TRAJCAP_SEED > --config file > built-in defaults.
struct ConfigCli {
    CLI::App* cmd = nullptr;
    std::string config_path;
    train::TrainConfig base;   // subcommand-specific defaults
    train::TrainConfig flags;  // bound storage; defaults feed --help
    std::string direction = "both";
    std::string fusion = "mean";

    void attach(CLI::App* sub) {
        cmd = sub;
        flags = base;
        sub->add_option("--config", config_path, "JSON config file; flags override its values");
        sub->add_option("--lr", flags.learning_rate, "Adam learning rate")
            ->capture_default_str();
        sub->add_option("--batch-size", flags.batch_size, "examples per optimizer step")
            ->capture_default_str();
        sub->add_option("--dropout", flags.dropout, "decoder-state dropout rate")
            ->capture_default_str();
        sub->add_option("--grad-clip", flags.grad_clip, "elementwise gradient clip")
            ->capture_default_str();
        sub->add_option("--max-len", flags.max_sentence_len, "max caption length in words")
            ->capture_default_str();
        sub->add_option("--frames", flags.frames, "frames sampled per video (T)")
            ->capture_default_str();
        sub->add_option("--regions", flags.regions, "object regions per frame (N)")
            ->capture_default_str();
        sub->add_option("--clusters", flags.clusters, "VLAD clusters (K)")
            ->capture_default_str();
        sub->add_option("--hidden", flags.hidden, "encoder/decoder hidden size")
            ->capture_default_str();
        sub->add_option("--embed", flags.embed, "word embedding size")->capture_default_str();
        sub->add_option("--attention", flags.attention, "attention projection size")
            ->capture_default_str();
        sub->add_option("--beam", flags.beam, "beam width for decoding")->capture_default_str();
        sub->add_option("--kernel-size", flags.kernel_size, "C-GRU conv kernel size")
            ->capture_default_str();
        sub->add_option("--seed", flags.seed, "master RNG seed")->capture_default_str();
        sub->add_option("--direction", direction, "temporal directions: forward|backward|both")
            ->capture_default_str();
        sub->add_option("--fusion", fusion, "direction fusion: mean|geometric")
            ->capture_default_str();
        sub->add_flag("--assignment-softmax,!--no-assignment-softmax", flags.assignment_softmax,
                      "soften VLAD assignments over clusters");
        sub->add_flag("--share-vlad,!--no-share-vlad", flags.share_vlad,
                      "share VLAD parameters across directions");
    }

    train::TrainConfig resolve() const {
        train::TrainConfig cfg = base;
        if (cmd->count("--config")) cfg = train::config_from_json(read_text_file(config_path));
        if (auto env_seed = seed_from_env()) cfg.seed = *env_seed;
        if (cmd->count("--lr")) cfg.learning_rate = flags.learning_rate;
        if (cmd->count("--batch-size")) cfg.batch_size = flags.batch_size;
        if (cmd->count("--dropout")) cfg.dropout = flags.dropout;
        if (cmd->count("--grad-clip")) cfg.grad_clip = flags.grad_clip;
        if (cmd->count("--max-len")) cfg.max_sentence_len = flags.max_sentence_len;
        if (cmd->count("--frames")) cfg.frames = flags.frames;
        if (cmd->count("--regions")) cfg.regions = flags.regions;
        if (cmd->count("--clusters")) cfg.clusters = flags.clusters;
        if (cmd->count("--hidden")) cfg.hidden = flags.hidden;
        if (cmd->count("--embed")) cfg.embed = flags.embed;
        if (cmd->count("--attention")) cfg.attention = flags.attention;
        if (cmd->count("--beam")) cfg.beam = flags.beam;
        if (cmd->count("--kernel-size")) cfg.kernel_size = flags.kernel_size;
        if (cmd->count("--seed")) cfg.seed = flags.seed;
        if (cmd->count("--direction")) cfg.direction = train::run_direction_from_string(direction);
        if (cmd->count("--fusion")) cfg.fusion = train::fusion_mode_from_string(fusion);
        if (cmd->count("--assignment-softmax")) cfg.assignment_softmax = flags.assignment_softmax;
        if (cmd->count("--share-vlad")) cfg.share_vlad = flags.share_vlad;
        cfg.validate();
        return cfg;
    }
};

int channels_of(const dataio::FeatureManifest& manifest, const std::vector<std::string>& ids) {
    int channels = 0;
    for (const std::string& id : ids) {
        const dataio::ManifestEntry* entry = manifest.find(id);
        if (entry == nullptr) throw DataError("video not in manifest: " + id);
        if (channels == 0) channels = entry->map_channels;
        if (entry->map_channels != channels)
            throw DataError("video " + id + " has " + std::to_string(entry->map_channels) +
                            " feature channels, expected " + std::to_string(channels));
    }
    if (channels == 0) throw DataError("empty training split");
    return channels;
}

std::map<std::string, train::VideoFeatures> load_split_features(
    const dataio::FeatureManifest& manifest, const std::vector<std::string>& ids, int regions) {
    std::map<std::string, train::VideoFeatures> features;
    for (const std::string& id : ids) {
        const dataio::ManifestEntry* entry = manifest.find(id);
        if (entry == nullptr) throw DataError("video not in manifest: " + id);
        btg::VideoSample video = dataio::load_video(manifest, *entry, regions);
        features.emplace(id, train::gather_features(video));
    }
    return features;
}

struct TrainArgs {
    std::string manifest, captions, split, checkpoint, log, resume;
    int steps = 100;
    int checkpoint_every = 0;
    int min_count = 1;
};

int cmd_train(const ConfigCli& config_cli, const TrainArgs& args) {
    dataio::FeatureManifest manifest = dataio::load_manifest(args.manifest);
    std::vector<dataio::CaptionRecord> all_records = dataio::load_captions(args.captions);
    std::vector<std::string> split = dataio::load_split(args.split);

    std::set<std::string> split_ids(split.begin(), split.end());
    std::vector<dataio::CaptionRecord> records;
    for (const dataio::CaptionRecord& rec : all_records)
        if (split_ids.count(rec.video_id)) records.push_back(rec);

    train::Checkpoint ckpt;
    if (args.resume.empty()) {
        train::TrainConfig cfg = config_cli.resolve();
        ckpt.config = cfg;
        ckpt.vocab = dataio::build_vocabulary(records, args.min_count);
        ckpt.channels = channels_of(manifest, split);
        ckpt.step = 0;
        ckpt.model = model::CaptionModel::init(
            train::dims_for(cfg, ckpt.channels, ckpt.vocab.size()), cfg.seed, cfg.share_vlad);
    } else {
        // Resume keeps the checkpoint's config, vocabulary, and weights;
        // only --steps / --checkpoint-every / output paths apply.
        ckpt = train::load_checkpoint(args.resume);
    }
    const train::TrainConfig& cfg = ckpt.config;

    std::vector<dataio::EncodedCaption> encoded =
        dataio::prepare_training_sentences(records, ckpt.vocab, cfg.max_sentence_len);
    std::map<std::string, train::VideoFeatures> features =
        load_split_features(manifest, split, cfg.regions);

    std::vector<train::TrainExample> examples;
    for (const dataio::EncodedCaption& ec : encoded) {
        auto it = features.find(ec.video_id);
        if (it == features.end()) continue;
        examples.push_back({&it->second, ec.tokens, ec.mask});
    }
    if (examples.empty()) throw DataError("no usable training examples in split");

    OutSink log(args.log);
    train::AdamOptimizer opt(cfg.learning_rate);
    Rng dropout_rng(cfg.seed);
    Rng order_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);  // distinct stream per role
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();

    auto start = std::chrono::steady_clock::now();
    for (int s = 0; s < args.steps; ++s) {
        std::vector<train::TrainExample> batch;
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (cursor == order.size()) {
                order_rng.shuffle(order);
                cursor = 0;
            }
            batch.push_back(examples[order[cursor++]]);
        }
        double loss = train::train_step(ckpt.model, batch, cfg, opt, dropout_rng);
        ++ckpt.step;
        double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log.stream() << json{{"step", ckpt.step},
                             {"loss", loss},
                             {"lr", cfg.learning_rate},
                             {"elapsed_s", elapsed}}
                            .dump()
                     << "\n"
                     << std::flush;
        if (args.checkpoint_every > 0 && ckpt.step % args.checkpoint_every == 0)
            train::save_checkpoint(args.checkpoint + ".step" + std::to_string(ckpt.step), ckpt);
    }
    train::save_checkpoint(args.checkpoint, ckpt);
    return 0;
}

struct CaptionArgs {
    std::string checkpoint, manifest, split, out;
};

int cmd_caption(const ConfigCli& config_cli, const CaptionArgs& args) {
    train::Checkpoint ckpt = train::load_checkpoint(args.checkpoint);
    dataio::FeatureManifest manifest = dataio::load_manifest(args.manifest);

    std::vector<std::string> ids;
    if (args.split.empty())
        for (const dataio::ManifestEntry& e : manifest.entries) ids.push_back(e.video_id);
    else
        ids = dataio::load_split(args.split);

    // Decode-time settings default to the checkpoint's training config.
    train::RunDirection direction = ckpt.config.direction;
    train::FusionMode fusion = ckpt.config.fusion;
    int beam = ckpt.config.beam;
    int max_words = ckpt.config.max_sentence_len;
    if (config_cli.cmd->count("--direction"))
        direction = train::run_direction_from_string(config_cli.direction);
    if (config_cli.cmd->count("--fusion"))
        fusion = train::fusion_mode_from_string(config_cli.fusion);
    if (config_cli.cmd->count("--beam")) beam = config_cli.flags.beam;
    if (config_cli.cmd->count("--max-len")) max_words = config_cli.flags.max_sentence_len;

    OutSink out(args.out);
    for (const std::string& id : ids) {
        const dataio::ManifestEntry* entry = manifest.find(id);
        if (entry == nullptr) throw DataError("video not in manifest: " + id);
        btg::VideoSample video = dataio::load_video(manifest, *entry, ckpt.config.regions);
        infer::CaptionResult res = infer::caption_video(ckpt, video, direction, fusion, beam, max_words);
        out.stream() << json{{"video_id", res.video_id},
                             {"caption", res.caption},
                             {"log_prob", res.log_prob},
                             {"tokens", res.tokens}}
                            .dump()
                     << "\n";
    }
    return 0;
}

struct EvalArgs {
    std::string candidates, captions, split, out;
};

int cmd_eval(const EvalArgs& args) {
    std::map<std::string, std::vector<std::string>> candidates;
    std::ifstream in(args.candidates, std::ios::binary);
    if (!in.good()) throw DataError("cannot open candidates file: " + args.candidates);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
            candidates[rec.at("video_id").get<std::string>()] =
                dataio::tokenize(rec.at("caption").get<std::string>());
        } catch (const json::exception& e) {
            throw DataError(args.candidates + " line " + std::to_string(line_no) + ": " +
                            e.what());
        }
    }

    if (!args.split.empty()) {
        std::vector<std::string> split = dataio::load_split(args.split);
        std::set<std::string> keep(split.begin(), split.end());
        std::erase_if(candidates, [&](const auto& kv) { return !keep.count(kv.first); });
    }

    std::map<std::string, std::vector<std::vector<std::string>>> references;
    for (const dataio::CaptionRecord& rec : dataio::load_captions(args.captions))
        for (const std::string& sentence : rec.sentences)
            references[rec.video_id].push_back(dataio::tokenize(sentence));

    metrics::EvalReport report = metrics::bleu4(candidates, references);
    OutSink out(args.out);
    out.stream() << json{{"bleu4", report.bleu4}, {"n_videos", report.n_videos}}.dump() << "\n";
    return 0;
}

struct TraceArgs {
    std::string manifest, split, out;
};

int cmd_trace_graph(const ConfigCli& config_cli, const TraceArgs& args) {
    train::TrainConfig cfg = config_cli.resolve();
    dataio::FeatureManifest manifest = dataio::load_manifest(args.manifest);
    std::vector<std::string> ids;
    if (args.split.empty())
        for (const dataio::ManifestEntry& e : manifest.entries) ids.push_back(e.video_id);
    else
        ids = dataio::load_split(args.split);

    OutSink out(args.out);
    for (const std::string& id : ids) {
        const dataio::ManifestEntry* entry = manifest.find(id);
        if (entry == nullptr) throw DataError("video not in manifest: " + id);
        btg::VideoSample video = dataio::load_video(manifest, *entry, cfg.regions);
        btg::TrajectorySet set = btg::build_bidirectional_trajectories(video);
        out.stream() << btg::trajectory_set_to_json(id, set) << "\n";
    }
    return 0;
}

struct GradcheckArgs {
    int channels = 3;
    int vocab = 5;
    int map_height = 2;
    int map_width = 2;
    int appearance_dim = 3;
    double eps = 1e-5;
    double tolerance = 1e-4;
};

btg::VideoSample random_video(Rng& rng, int T, int N, int H, int W, int D, int G) {
    btg::VideoSample video;
    video.video_id = "gradcheck";
    for (int t = 1; t <= T; ++t) {
        btg::FrameDetections frame;
        frame.frame_index = t;
        for (int n = 0; n < N; ++n) {
            double x0 = rng.uniform(0.0, 10.0);
            double y0 = rng.uniform(0.0, 10.0);
            frame.regions.push_back({btg::BoundingBox(x0, y0, x0 + rng.uniform(1.0, 3.0),
                                                      y0 + rng.uniform(1.0, 3.0)),
                                     uniform_tensor({G}, 1.0, rng),
                                     uniform_tensor({H, W, D}, 1.0, rng)});
        }
        frame.global_feature_map = uniform_tensor({H, W, D}, 1.0, rng);
        video.frames.push_back(std::move(frame));
    }
    video.validate();
    return video;
}

int cmd_gradcheck(const ConfigCli& config_cli, const GradcheckArgs& args) {
    train::TrainConfig cfg = config_cli.resolve();
    cfg.dropout = 0.0;  // finite differences need a deterministic loss

    Rng rng(cfg.seed);
    std::vector<btg::VideoSample> videos;
    videos.push_back(random_video(rng, cfg.frames, cfg.regions, args.map_height, args.map_width,
                                  args.channels, args.appearance_dim));
    videos.push_back(random_video(rng, cfg.frames, cfg.regions, args.map_height, args.map_width,
                                  args.channels, args.appearance_dim));
    std::vector<train::VideoFeatures> features;
    features.reserve(videos.size());
    for (const btg::VideoSample& v : videos) features.push_back(train::gather_features(v));

    if (args.vocab <= kNumReservedTokens)
        throw std::invalid_argument("--vocab must exceed the reserved token count");
    std::vector<train::TrainExample> batch;
    for (std::size_t i = 0; i < features.size(); ++i) {
        train::TrainExample ex;
        ex.features = &features[i];
        ex.tokens.push_back(kBosToken);
        int words = 1 + static_cast<int>(i);
        for (int w = 0; w < words; ++w)
            ex.tokens.push_back(kNumReservedTokens +
                                rng.uniform_int(args.vocab - kNumReservedTokens));
        ex.tokens.push_back(kEosToken);
        ex.mask.assign(ex.tokens.size() - 1, true);
        batch.push_back(std::move(ex));
    }

    model::CaptionModel m = model::CaptionModel::init(
        train::dims_for(cfg, args.channels, args.vocab), cfg.seed, cfg.share_vlad);
    train::FdReport report = train::finite_difference_check(m, batch, cfg, args.eps);

    for (const train::FdGroupReport& g : report.groups) {
        std::ostringstream row;
        row.setf(std::ios::scientific);
        row.precision(3);
        row << g.name;
        for (std::size_t pad = g.name.size(); pad < 34; ++pad) row << ' ';
        row << " max_rel " << g.max_rel_error << "  max_abs " << g.max_abs_error;
        std::cout << row.str() << "\n";
    }
    bool ok = report.passed(args.tolerance);
    std::cout << "gradcheck " << (ok ? "PASS" : "FAIL") << " (max_rel "
              << report.max_rel_error << (ok ? " < " : " >= ") << args.tolerance << ")\n";
    if (!ok) throw NumericError("analytic gradients disagree with finite differences");
    return 0;
}

struct SynthArgs {
    std::string out;
    dataio::SynthesisConfig cfg;
};

int cmd_synth(const SynthArgs& args) {
    std::vector<dataio::CaptionRecord> records = dataio::synthesize_dataset(args.out, args.cfg);
    std::cout << json{{"out", args.out}, {"videos", records.size()}}.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trajcap: video captioning with bidirectional object trajectories"};
    app.require_subcommand(1);

    ConfigCli train_cfg, caption_cfg, trace_cfg, grad_cfg;
    TrainArgs train_args;
    CaptionArgs caption_args;
    EvalArgs eval_args;
    TraceArgs trace_args;
    GradcheckArgs grad_args;
    SynthArgs synth_args;

    CLI::App* train_cmd = app.add_subcommand("train", "train a captioning model");
    train_cfg.attach(train_cmd);
    train_cmd->add_option("--manifest", train_args.manifest, "feature manifest JSON")->required();
    train_cmd->add_option("--captions", train_args.captions, "reference captions JSONL")
        ->required();
    train_cmd->add_option("--split", train_args.split, "video id list to train on")->required();
    train_cmd->add_option("--out", train_args.checkpoint, "checkpoint output path")->required();
    train_cmd->add_option("--log", train_args.log, "training log JSONL (default stdout)");
    train_cmd->add_option("--steps", train_args.steps, "optimizer steps to run")
        ->capture_default_str();
    train_cmd
        ->add_option("--checkpoint-every", train_args.checkpoint_every,
                     "also save every K steps (0 = final only)")
        ->capture_default_str();
    train_cmd->add_option("--min-count", train_args.min_count, "vocabulary frequency threshold")
        ->capture_default_str();
    train_cmd->add_option("--resume", train_args.resume, "continue from an existing checkpoint");

    CLI::App* caption_cmd = app.add_subcommand("caption", "generate captions from a checkpoint");
    caption_cfg.attach(caption_cmd);
    caption_cmd->add_option("--checkpoint", caption_args.checkpoint, "trained model")->required();
    caption_cmd->add_option("--manifest", caption_args.manifest, "feature manifest JSON")
        ->required();
    caption_cmd->add_option("--split", caption_args.split,
                            "video id list (default: whole manifest)");
    caption_cmd->add_option("--out", caption_args.out, "captions JSONL (default stdout)");

    CLI::App* eval_cmd = app.add_subcommand("eval", "score candidate captions with BLEU@4");
    eval_cmd->add_option("--candidates", eval_args.candidates, "caption-command output JSONL")
        ->required();
    eval_cmd->add_option("--captions", eval_args.captions, "reference captions JSONL")
        ->required();
    eval_cmd->add_option("--split", eval_args.split, "restrict scoring to these video ids");
    eval_cmd->add_option("--out", eval_args.out, "report JSON (default stdout)");

    CLI::App* trace_cmd =
        app.add_subcommand("trace-graph", "dump per-video object trajectories as JSON");
    trace_cfg.attach(trace_cmd);
    trace_cmd->add_option("--manifest", trace_args.manifest, "feature manifest JSON")->required();
    trace_cmd->add_option("--split", trace_args.split, "video id list (default: whole manifest)");
    trace_cmd->add_option("--out", trace_args.out, "trajectory JSONL (default stdout)");

    CLI::App* grad_cmd =
        app.add_subcommand("gradcheck", "verify analytic gradients against finite differences");
    grad_cfg.base.frames = 2;  // small instance keeps central differences cheap
    grad_cfg.base.regions = 2;
    grad_cfg.base.clusters = 2;
    grad_cfg.base.hidden = 3;
    grad_cfg.base.embed = 3;
    grad_cfg.base.attention = 2;
    grad_cfg.base.dropout = 0.0;
    grad_cfg.attach(grad_cmd);
    grad_cmd->add_option("--channels", grad_args.channels, "feature map depth (D)")
        ->capture_default_str();
    grad_cmd->add_option("--vocab", grad_args.vocab, "vocabulary size incl. reserved tokens")
        ->capture_default_str();
    grad_cmd->add_option("--map-height", grad_args.map_height, "feature map height")
        ->capture_default_str();
    grad_cmd->add_option("--map-width", grad_args.map_width, "feature map width")
        ->capture_default_str();
    grad_cmd->add_option("--appearance-dim", grad_args.appearance_dim, "appearance vector size")
        ->capture_default_str();
    grad_cmd->add_option("--eps", grad_args.eps, "finite-difference step")->capture_default_str();
    grad_cmd->add_option("--tolerance", grad_args.tolerance, "max relative error allowed")
        ->capture_default_str();

    CLI::App* synth_cmd = app.add_subcommand("synth", "write a synthetic captioning corpus");
    synth_cmd->add_option("--out", synth_args.out, "output directory")->required();
    synth_cmd->add_option("--seed", synth_args.cfg.seed, "generator seed")->capture_default_str();
    synth_cmd->add_option("--videos", synth_args.cfg.num_videos, "number of videos")
        ->capture_default_str();
    synth_cmd->add_option("--frames", synth_args.cfg.frames, "frames per video (T)")
        ->capture_default_str();
    synth_cmd->add_option("--regions", synth_args.cfg.regions, "objects per video (N)")
        ->capture_default_str();
    synth_cmd->add_option("--map-height", synth_args.cfg.map_height, "feature map height")
        ->capture_default_str();
    synth_cmd->add_option("--map-width", synth_args.cfg.map_width, "feature map width")
        ->capture_default_str();
    synth_cmd->add_option("--channels", synth_args.cfg.map_channels, "feature map depth (D)")
        ->capture_default_str();
    synth_cmd
        ->add_option("--appearance-dim", synth_args.cfg.appearance_dim, "appearance vector size")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
        if (*train_cmd) return cmd_train(train_cfg, train_args);
        if (*caption_cmd) return cmd_caption(caption_cfg, caption_args);
        if (*eval_cmd) return cmd_eval(eval_args);
        if (*trace_cmd) return cmd_trace_graph(trace_cfg, trace_args);
        if (*grad_cmd) return cmd_gradcheck(grad_cfg, grad_args);
        if (*synth_cmd) {
            if (!synth_cmd->count("--seed"))
                if (auto env_seed = seed_from_env()) synth_args.cfg.seed = *env_seed;
            return cmd_synth(synth_args);
        }
        return 2;
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }
}
