#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trajcap/btg.hpp"
#include "trajcap/vocab.hpp"

namespace trajcap::dataio {

/// Lowercase, strip ASCII punctuation, split on whitespace.
std::vector<std::string> tokenize(const std::string& sentence);

struct CaptionRecord {
    std::string video_id;
    std::vector<std::string> sentences;
};

/// Reserved tokens plus every corpus token occurring at least min_count
/// times, ordered by frequency descending then lexicographically.
Vocabulary build_vocabulary(const std::vector<CaptionRecord>& records, int min_count = 1);

struct EncodedCaption {
    std::string video_id;
    std::vector<int> tokens;  // BOS ... EOS PAD..., length max_len + 2
    std::vector<bool> mask;   // mask[l]: position l+1 is a real target
};

/// Drops sentences longer than max_len tokens, encodes and pads the rest.
std::vector<EncodedCaption> prepare_training_sentences(
    const std::vector<CaptionRecord>& records, const Vocabulary& vocab, int max_len = 16);

struct ManifestEntry {
    std::string video_id;
    int num_frames = 0;    // T
    int map_height = 0;    // H
    int map_width = 0;     // W
    int map_channels = 0;  // D
    int appearance_dim = 0;  // G
    int num_regions = 0;     // declared nominal detections per frame
    std::string frame_features;  // paths relative to the manifest directory
    std::string region_features;
    std::string region_meta;
};

struct FeatureManifest {
    std::string root;
    std::vector<ManifestEntry> entries;

    const ManifestEntry* find(const std::string& video_id) const;
};

/// Parses manifest.json and verifies every declared shape against the actual
/// feature file sizes (frame features: T*H*W*D floats; region features: one
/// G + H*W*D block per detection listed in the region metadata).
FeatureManifest load_manifest(const std::string& path);

/// Loads one video with exactly target_regions regions per frame: shortfall
/// duplicates the highest-confidence detection, zero detections fall back to
/// a whole-frame box over the global feature map, overflow keeps the
/// target_regions most confident detections in file order.
btg::VideoSample load_video(const FeatureManifest& manifest, const ManifestEntry& entry,
                            int target_regions);

/// JSON lines: {"video_id": ..., "sentences": [...]}.
std::vector<CaptionRecord> load_captions(const std::string& path);

/// One video_id per line; blank lines ignored.
std::vector<std::string> load_split(const std::string& path);

struct SynthesisConfig {
    std::uint64_t seed = 1;
    int num_videos = 5;
    int frames = 6;         // T
    int regions = 2;        // N
    int map_height = 2;     // H
    int map_width = 2;      // W
    int map_channels = 8;   // D
    int appearance_dim = 6; // G
};

/// Identity occupying each region slot: slots[video_id][t][r] for frame t+1,
/// region r+1.
struct PlantedTruth {
    std::map<std::string, std::vector<std::vector<int>>> slots;
};

/// Writes a deterministic toy corpus under out_dir: manifest.json plus
/// feature binaries, captions.jsonl, train.txt, and planted.json recording
/// the ground-truth region identities. Objects are well-separated in
/// appearance, move in disjoint lanes, and captions are templated from the
/// planted identities, so trajectory alignment is exactly recoverable and a
/// small model can overfit the captions.
std::vector<CaptionRecord> synthesize_dataset(const std::string& out_dir,
                                              const SynthesisConfig& config);

PlantedTruth load_planted(const std::string& path);

}  // namespace trajcap::dataio
