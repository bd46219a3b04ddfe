#include "trajcap/dataio.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "trajcap/error.hpp"
#include "trajcap/tensor.hpp"

namespace trajcap::dataio {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::string> tokenize(const std::string& sentence) {
    std::string cleaned;
    cleaned.reserve(sentence.size());
    for (char ch : sentence) {
        unsigned char u = static_cast<unsigned char>(ch);
        if (std::ispunct(u)) continue;
        cleaned.push_back(static_cast<char>(std::tolower(u)));
    }
    std::istringstream ss(cleaned);
    std::vector<std::string> tokens;
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
    return tokens;
}

Vocabulary build_vocabulary(const std::vector<CaptionRecord>& records, int min_count) {
    if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
    std::map<std::string, int> counts;
    for (const CaptionRecord& rec : records) {
        for (const std::string& sentence : rec.sentences) {
            for (const std::string& tok : tokenize(sentence)) ++counts[tok];
        }
    }
    if (counts.empty()) throw std::invalid_argument("empty caption corpus");
    std::vector<std::pair<std::string, int>> kept;
    for (const auto& [tok, n] : counts) {
        if (n >= min_count) kept.emplace_back(tok, n);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocabulary vocab;
    for (const auto& [tok, n] : kept) vocab.add(tok);
    return vocab;
}

std::vector<EncodedCaption> prepare_training_sentences(
    const std::vector<CaptionRecord>& records, const Vocabulary& vocab, int max_len) {
    if (max_len < 1) throw std::invalid_argument("max_len must be positive");
    std::vector<EncodedCaption> out;
    for (const CaptionRecord& rec : records) {
        for (const std::string& sentence : rec.sentences) {
            std::vector<std::string> toks = tokenize(sentence);
            if (static_cast<int>(toks.size()) > max_len) continue;
            EncodedCaption ec;
            ec.video_id = rec.video_id;
            ec.tokens.push_back(kBosToken);
            for (const std::string& tok : toks) ec.tokens.push_back(vocab.encode(tok));
            ec.tokens.push_back(kEosToken);
            ec.tokens.resize(static_cast<std::size_t>(max_len) + 2, kPadToken);
            for (std::size_t l = 0; l + 1 < ec.tokens.size(); ++l) {
                ec.mask.push_back(ec.tokens[l + 1] != kPadToken);
            }
            out.push_back(std::move(ec));
        }
    }
    return out;
}

namespace {

struct RegionInfo {
    double box[4];
    double confidence;
};

struct RegionMeta {
    double frame_w = 0.0, frame_h = 0.0;
    std::vector<std::vector<RegionInfo>> frames;
};

std::string resolve(const std::string& root, const std::string& rel) {
    return (fs::path(root) / rel).string();
}

json parse_json_file(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw DataError(std::string(what) + " missing: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError(std::string(what) + " is not valid JSON: " + path + " (" + e.what() +
                        ")");
    }
    return j;
}

RegionMeta parse_region_meta(const std::string& path, int expect_frames) {
    json j = parse_json_file(path, "region metadata");
    RegionMeta meta;
    try {
        meta.frame_w = j.at("frame_size").at(0);
        meta.frame_h = j.at("frame_size").at(1);
        int expected_index = 1;
        for (const json& f : j.at("frames")) {
            if (f.at("frame") != expected_index) {
                throw DataError("region metadata frames out of order in " + path);
            }
            ++expected_index;
            std::vector<RegionInfo> regions;
            for (const json& r : f.at("regions")) {
                RegionInfo info;
                const json& box = r.at("box");
                for (int i = 0; i < 4; ++i) info.box[i] = box.at(static_cast<std::size_t>(i));
                info.confidence = r.at("confidence");
                regions.push_back(info);
            }
            meta.frames.push_back(std::move(regions));
        }
    } catch (const json::exception& e) {
        throw DataError("malformed region metadata " + path + ": " + e.what());
    }
    if (meta.frame_w <= 0.0 || meta.frame_h <= 0.0) {
        throw DataError("bad frame_size in " + path);
    }
    if (static_cast<int>(meta.frames.size()) != expect_frames) {
        throw DataError("region metadata lists " + std::to_string(meta.frames.size()) +
                        " frames, manifest declares " + std::to_string(expect_frames) + ": " +
                        path);
    }
    return meta;
}

void check_file_size(const std::string& path, std::int64_t expected_bytes) {
    std::error_code ec;
    auto size = fs::file_size(path, ec);
    if (ec) throw DataError("cannot stat feature file: " + path);
    if (static_cast<std::int64_t>(size) != expected_bytes) {
        throw DataError("feature file " + path + " holds " + std::to_string(size) +
                        " bytes, expected " + std::to_string(expected_bytes));
    }
}

std::vector<float> read_floats(const std::string& path, std::int64_t count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open feature file: " + path);
    std::vector<float> out(static_cast<std::size_t>(count));
    in.read(reinterpret_cast<char*>(out.data()), count * 4);
    if (in.gcount() != count * 4) throw DataError("feature file truncated: " + path);
    return out;
}

void write_floats(const std::string& path, const std::vector<float>& values) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write feature file: " + path);
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * 4));
    if (!out) throw DataError("failed writing feature file: " + path);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + path);
    out << text;
    if (!out) throw DataError("failed writing file: " + path);
}

std::int64_t total_regions(const RegionMeta& meta) {
    std::int64_t total = 0;
    for (const auto& frame : meta.frames) total += static_cast<std::int64_t>(frame.size());
    return total;
}

}  // namespace

const ManifestEntry* FeatureManifest::find(const std::string& video_id) const {
    for (const ManifestEntry& e : entries) {
        if (e.video_id == video_id) return &e;
    }
    return nullptr;
}

FeatureManifest load_manifest(const std::string& path) {
    json j = parse_json_file(path, "manifest");
    FeatureManifest manifest;
    manifest.root = fs::path(path).parent_path().string();
    try {
        if (j.at("format") != "trajcap-manifest" || j.at("version") != 1) {
            throw DataError("not a supported manifest: " + path);
        }
        for (const json& v : j.at("videos")) {
            ManifestEntry e;
            e.video_id = v.at("video_id");
            e.num_frames = v.at("num_frames");
            e.map_height = v.at("map_height");
            e.map_width = v.at("map_width");
            e.map_channels = v.at("map_channels");
            e.appearance_dim = v.at("appearance_dim");
            e.num_regions = v.at("num_regions");
            e.frame_features = v.at("frame_features");
            e.region_features = v.at("region_features");
            e.region_meta = v.at("region_meta");
            manifest.entries.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw DataError("malformed manifest " + path + ": " + e.what());
    }

    std::set<std::string> seen;
    for (const ManifestEntry& e : manifest.entries) {
        if (e.video_id.empty() || !seen.insert(e.video_id).second) {
            throw DataError("duplicate or empty video_id in manifest: " + path);
        }
        if (e.num_frames < 1 || e.map_height < 1 || e.map_width < 1 || e.map_channels < 1 ||
            e.appearance_dim < 1 || e.num_regions < 1) {
            throw DataError("non-positive dimensions for video " + e.video_id);
        }
        std::int64_t map_size =
            static_cast<std::int64_t>(e.map_height) * e.map_width * e.map_channels;
        check_file_size(resolve(manifest.root, e.frame_features),
                        e.num_frames * map_size * 4);
        RegionMeta meta = parse_region_meta(resolve(manifest.root, e.region_meta),
                                            e.num_frames);
        check_file_size(resolve(manifest.root, e.region_features),
                        total_regions(meta) * (e.appearance_dim + map_size) * 4);
    }
    return manifest;
}

btg::VideoSample load_video(const FeatureManifest& manifest, const ManifestEntry& entry,
                            int target_regions) {
    if (target_regions < 1) throw std::invalid_argument("target_regions must be positive");
    const int T = entry.num_frames, H = entry.map_height, W = entry.map_width,
              D = entry.map_channels, G = entry.appearance_dim;
    const std::int64_t map_size = static_cast<std::int64_t>(H) * W * D;

    std::vector<float> frame_raw =
        read_floats(resolve(manifest.root, entry.frame_features), T * map_size);
    RegionMeta meta = parse_region_meta(resolve(manifest.root, entry.region_meta), T);
    std::vector<float> region_raw = read_floats(resolve(manifest.root, entry.region_features),
                                                total_regions(meta) * (G + map_size));

    btg::VideoSample video;
    video.video_id = entry.video_id;
    std::int64_t offset = 0;
    for (int t = 0; t < T; ++t) {
        btg::FrameDetections frame;
        frame.frame_index = t + 1;
        Tensor global({H, W, D});
        for (std::int64_t i = 0; i < map_size; ++i) {
            global[i] = static_cast<double>(frame_raw[static_cast<std::size_t>(t * map_size + i)]);
        }
        frame.global_feature_map = global;

        std::vector<btg::ObjectRegion> detected;
        std::vector<double> confidence;
        for (const RegionInfo& info : meta.frames[static_cast<std::size_t>(t)]) {
            Tensor app({G});
            for (int i = 0; i < G; ++i) {
                app[i] = static_cast<double>(region_raw[static_cast<std::size_t>(offset + i)]);
            }
            Tensor map({H, W, D});
            for (std::int64_t i = 0; i < map_size; ++i) {
                map[i] =
                    static_cast<double>(region_raw[static_cast<std::size_t>(offset + G + i)]);
            }
            offset += G + map_size;
            try {
                detected.push_back(btg::ObjectRegion{
                    btg::BoundingBox(info.box[0], info.box[1], info.box[2], info.box[3]),
                    std::move(app), std::move(map)});
            } catch (const std::invalid_argument& err) {
                throw DataError("video " + entry.video_id + " frame " + std::to_string(t + 1) +
                                ": " + err.what());
            }
            confidence.push_back(info.confidence);
        }

        if (detected.empty()) {
            // No detections: fall back to the whole frame. The appearance is
            // the global map's spatial mean, so its dimension is D, not G.
            Tensor app({D});
            for (int d = 0; d < D; ++d) {
                double sum = 0.0;
                for (int h = 0; h < H; ++h) {
                    for (int w = 0; w < W; ++w) sum += global.at(h, w, d);
                }
                app.at(d) = sum / (H * W);
            }
            btg::ObjectRegion whole{btg::BoundingBox(0.0, 0.0, meta.frame_w, meta.frame_h),
                                    app, global};
            frame.regions.assign(static_cast<std::size_t>(target_regions), whole);
        } else if (static_cast<int>(detected.size()) > target_regions) {
            // Keep the most confident detections, preserving file order.
            std::vector<int> idx(detected.size());
            std::iota(idx.begin(), idx.end(), 0);
            std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
                return confidence[static_cast<std::size_t>(a)] >
                       confidence[static_cast<std::size_t>(b)];
            });
            idx.resize(static_cast<std::size_t>(target_regions));
            std::sort(idx.begin(), idx.end());
            for (int i : idx) frame.regions.push_back(detected[static_cast<std::size_t>(i)]);
        } else {
            frame.regions = detected;
            std::size_t best = 0;
            for (std::size_t i = 1; i < confidence.size(); ++i) {
                if (confidence[i] > confidence[best]) best = i;
            }
            while (static_cast<int>(frame.regions.size()) < target_regions) {
                frame.regions.push_back(detected[best]);
            }
        }
        video.frames.push_back(std::move(frame));
    }
    try {
        video.validate();
    } catch (const std::invalid_argument& err) {
        throw DataError("video " + entry.video_id + ": " + err.what());
    }
    return video;
}

std::vector<CaptionRecord> load_captions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open captions file: " + path);
    std::vector<CaptionRecord> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            json j = json::parse(line);
            CaptionRecord rec;
            rec.video_id = j.at("video_id");
            rec.sentences = j.at("sentences").get<std::vector<std::string>>();
            out.push_back(std::move(rec));
        } catch (const json::exception& e) {
            throw DataError("captions file " + path + " line " + std::to_string(line_no) +
                            ": " + e.what());
        }
    }
    return out;
}

std::vector<std::string> load_split(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open split file: " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        std::size_t begin = line.find_first_not_of(" \t\r");
        if (begin == std::string::npos) continue;
        std::size_t end = line.find_last_not_of(" \t\r");
        out.push_back(line.substr(begin, end - begin + 1));
    }
    return out;
}

std::vector<CaptionRecord> synthesize_dataset(const std::string& out_dir,
                                              const SynthesisConfig& cfg) {
    if (cfg.num_videos < 1 || cfg.frames < 1 || cfg.regions < 1 || cfg.map_height < 1 ||
        cfg.map_width < 1 || cfg.map_channels < 1 || cfg.appearance_dim < 1) {
        throw std::invalid_argument("synthesis config fields must be positive");
    }
    const int T = cfg.frames, N = cfg.regions, H = cfg.map_height, W = cfg.map_width,
              D = cfg.map_channels, G = cfg.appearance_dim;
    const std::int64_t map_size = static_cast<std::int64_t>(H) * W * D;
    const double frame_w = 200.0, frame_h = 20.0 * N + 20.0;

    static const char* kPhrases[3] = {"moves left", "moves right", "stands still"};
    static const double kSpeeds[3] = {-0.35, 0.35, 0.0};

    Rng rng(cfg.seed);
    fs::create_directories(fs::path(out_dir) / "features");

    json manifest_videos = json::array();
    json planted_videos = json::array();
    std::vector<CaptionRecord> records;
    std::string captions_text, split_text;

    struct Identity {
        int id;
        Tensor app_base;   // [G], pairwise distance >= 3 within a video
        Tensor map_base;   // [H,W,D], phrase imprinted on one channel
        int phrase;
        double x0, dx, size, y0;
    };

    for (int v = 0; v < cfg.num_videos; ++v) {
        std::string vid = "synth" + std::to_string(v);

        std::vector<Identity> ids;
        for (int n = 0; n < N; ++n) {
            Identity idn;
            idn.id = v * N + n;
            for (int attempt = 0;; ++attempt) {
                if (attempt > 1000) {
                    throw std::invalid_argument(
                        "cannot separate synthetic identities; raise appearance_dim or lower "
                        "regions");
                }
                Tensor cand = uniform_tensor({G}, 3.0, rng);
                bool ok = true;
                for (const Identity& prev : ids) {
                    double dist2 = 0.0;
                    for (int i = 0; i < G; ++i) {
                        double d = cand[i] - prev.app_base[i];
                        dist2 += d * d;
                    }
                    if (dist2 < 9.0) ok = false;
                }
                if (ok) {
                    idn.app_base = std::move(cand);
                    break;
                }
            }
            idn.phrase = rng.uniform_int(3);
            idn.map_base = uniform_tensor({H, W, D}, 1.0, rng);
            for (int h = 0; h < H; ++h) {
                for (int w = 0; w < W; ++w) idn.map_base.at(h, w, idn.phrase % D) += 1.5;
            }
            idn.size = 8.0 + 2.0 * (n % 4);      // distinct areas within a video
            idn.y0 = 20.0 * n + 2.0;             // disjoint lanes: zero cross IoU
            idn.x0 = rng.uniform(20.0, 90.0);
            idn.dx = kSpeeds[idn.phrase];
            ids.push_back(std::move(idn));
        }

        std::vector<float> frames_bin, regions_bin;
        frames_bin.reserve(static_cast<std::size_t>(T * map_size));
        json meta_frames = json::array();
        std::vector<std::vector<int>> slots(static_cast<std::size_t>(T));
        for (int t = 0; t < T; ++t) {
            std::vector<int> perm(static_cast<std::size_t>(N));
            std::iota(perm.begin(), perm.end(), 0);
            rng.shuffle(perm);

            Tensor global({H, W, D});
            json meta_regions = json::array();
            for (int r = 0; r < N; ++r) {
                const Identity& idn = ids[static_cast<std::size_t>(perm[static_cast<std::size_t>(r)])];
                slots[static_cast<std::size_t>(t)].push_back(idn.id);
                for (int i = 0; i < G; ++i) {
                    regions_bin.push_back(static_cast<float>(idn.app_base[i] +
                                                             rng.uniform(-0.05, 0.05)));
                }
                for (std::int64_t i = 0; i < map_size; ++i) {
                    regions_bin.push_back(static_cast<float>(idn.map_base[i]));
                    global[i] += idn.map_base[i] / N;
                }
                double x0 = idn.x0 + t * idn.dx;
                meta_regions.push_back(
                    {{"box", {x0, idn.y0, x0 + idn.size, idn.y0 + idn.size}},
                     {"confidence", 0.9 - 0.05 * r}});
            }
            for (std::int64_t i = 0; i < map_size; ++i) {
                frames_bin.push_back(static_cast<float>(global[i]));
            }
            meta_frames.push_back({{"frame", t + 1}, {"regions", meta_regions}});
        }

        std::string frames_rel = "features/" + vid + "_frames.bin";
        std::string regions_rel = "features/" + vid + "_regions.bin";
        std::string meta_rel = "features/" + vid + "_meta.json";
        write_floats(resolve(out_dir, frames_rel), frames_bin);
        write_floats(resolve(out_dir, regions_rel), regions_bin);
        json meta = {{"frame_size", {frame_w, frame_h}}, {"frames", meta_frames}};
        write_text(resolve(out_dir, meta_rel), meta.dump() + "\n");

        manifest_videos.push_back({{"video_id", vid},
                                   {"num_frames", T},
                                   {"map_height", H},
                                   {"map_width", W},
                                   {"map_channels", D},
                                   {"appearance_dim", G},
                                   {"num_regions", N},
                                   {"frame_features", frames_rel},
                                   {"region_features", regions_rel},
                                   {"region_meta", meta_rel}});
        planted_videos.push_back({{"video_id", vid}, {"slots", slots}});

        std::string caption;
        if (N == 1) {
            caption = "obj" + std::to_string(ids[0].id) + " " + kPhrases[ids[0].phrase];
        } else {
            caption = "obj" + std::to_string(ids[0].id) + " " + kPhrases[ids[0].phrase] +
                      " and obj" + std::to_string(ids[1].id) + " " + kPhrases[ids[1].phrase];
        }
        records.push_back(CaptionRecord{vid, {caption}});
        captions_text +=
            json{{"video_id", vid}, {"sentences", {caption}}}.dump() + "\n";
        split_text += vid + "\n";
    }

    json manifest = {{"format", "trajcap-manifest"}, {"version", 1},
                     {"videos", manifest_videos}};
    write_text(resolve(out_dir, "manifest.json"), manifest.dump() + "\n");
    write_text(resolve(out_dir, "planted.json"),
               json{{"videos", planted_videos}}.dump() + "\n");
    write_text(resolve(out_dir, "captions.jsonl"), captions_text);
    write_text(resolve(out_dir, "train.txt"), split_text);
    return records;
}

PlantedTruth load_planted(const std::string& path) {
    json j = parse_json_file(path, "planted ground truth");
    PlantedTruth truth;
    try {
        for (const json& v : j.at("videos")) {
            truth.slots[v.at("video_id")] =
                v.at("slots").get<std::vector<std::vector<int>>>();
        }
    } catch (const json::exception& e) {
        throw DataError("malformed planted file " + path + ": " + e.what());
    }
    return truth;
}

}  // namespace trajcap::dataio
