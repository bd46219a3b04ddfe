#pragma once

#include <string>
#include <vector>

#include "trajcap/btg.hpp"
#include "trajcap/decoder.hpp"
#include "trajcap/model.hpp"
#include "trajcap/tensor.hpp"
#include "trajcap/training.hpp"
#include "trajcap/vocab.hpp"

namespace trajcap::infer {

/// VLAD descriptors for one direction of a whole video, flattened to [K*D]
/// in decoder order.
struct EncodedDirection {
    std::vector<std::vector<Tensor>> object_vlads;  // [N][T]
    std::vector<Tensor> frame_vlads;                // [T]
};

struct EncodedVideo {
    EncodedDirection forward;
    EncodedDirection backward;
};

/// Trajectory construction plus value-level VLAD encoding for both directions.
/// Throws std::invalid_argument when the video's feature depth does not match
/// the model.
EncodedVideo encode_video(const model::CaptionModel& m, const btg::VideoSample& video,
                          bool assignment_softmax);

/// Combines two word distributions: elementwise arithmetic mean, or
/// renormalized elementwise geometric mean.
Tensor fuse_word_scores(const Tensor& p_fwd, const Tensor& p_bwd, train::FusionMode mode);

struct BeamHypothesis {
    std::vector<int> tokens;  // starts with BOS; finished ones end with EOS
    double log_prob = 0.0;
    dec::DecoderState forward_state;
    dec::DecoderState backward_state;
    bool finished = false;
};

struct BeamResult {
    std::vector<int> tokens;  // BOS ... EOS
    double log_prob = 0.0;
};

/// Beam search over per-step fused distributions. Both directional decoders
/// advance with the same emitted token; PAD and BOS are never candidates; a
/// hypothesis reaching max_words content tokens is closed with EOS at its true
/// log probability. Ties break toward the lexicographically smaller token
/// sequence.
BeamResult beam_search(const model::CaptionModel& m, const EncodedVideo& enc,
                       train::RunDirection direction, train::FusionMode fusion, int beam_size,
                       int max_words);

/// Log probability of a complete BOS...EOS sequence under the same fused
/// per-step distributions beam_search scores with.
double sequence_log_prob(const model::CaptionModel& m, const EncodedVideo& enc,
                         train::RunDirection direction, train::FusionMode fusion,
                         const std::vector<int>& tokens);

/// Space-joined caption with BOS, EOS, and PAD stripped.
std::string detokenize(const std::vector<int>& tokens, const Vocabulary& vocab);

struct CaptionResult {
    std::string video_id;
    std::string caption;
    double log_prob = 0.0;
    std::vector<int> tokens;
};

/// Full pipeline under the checkpoint's own config.
CaptionResult caption_video(const train::Checkpoint& ckpt, const btg::VideoSample& video);
/// Same, with decode-time settings overridden.
CaptionResult caption_video(const train::Checkpoint& ckpt, const btg::VideoSample& video,
                            train::RunDirection direction, train::FusionMode fusion,
                            int beam_size, int max_words);

}  // namespace trajcap::infer
