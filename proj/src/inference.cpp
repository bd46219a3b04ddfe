#include "trajcap/inference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "trajcap/aggregation.hpp"

namespace trajcap::infer {

namespace {

EncodedDirection encode_direction(const model::CaptionModel& m,
                                  const train::DirectionFeatures& feats, btg::Direction d,
                                  bool assignment_softmax) {
    const model::VladModel& obj = m.object_vlad(d);
    const model::VladModel& frm = m.frame_vlad(d);
    int flat = m.dims.feat();
    auto encode = [&](const model::VladModel& vm, const std::vector<Tensor>& maps) {
        std::vector<Tensor> descs =
            agg::encode_trajectory(maps, vm.cgru, vm.codebook, assignment_softmax);
        std::vector<Tensor> out;
        out.reserve(descs.size());
        for (Tensor& t : descs) out.push_back(t.reshaped({flat}));
        return out;
    };
    EncodedDirection out;
    out.object_vlads.reserve(feats.objects.size());
    for (const auto& traj : feats.objects) out.object_vlads.push_back(encode(obj, traj));
    out.frame_vlads = encode(frm, feats.frames);
    return out;
}

}  // namespace

EncodedVideo encode_video(const model::CaptionModel& m, const btg::VideoSample& video,
                          bool assignment_softmax) {
    video.validate();
    const Tensor& map = video.frames.front().global_feature_map;
    if (map.dim(2) != m.dims.channels) {
        throw std::invalid_argument("video feature depth " + std::to_string(map.dim(2)) +
                                    " does not match model depth " +
                                    std::to_string(m.dims.channels));
    }
    btg::TrajectorySet set = btg::build_bidirectional_trajectories(video);
    EncodedVideo out;
    out.forward = encode_direction(
        m, train::gather_direction(video, set, btg::Direction::forward),
        btg::Direction::forward, assignment_softmax);
    out.backward = encode_direction(
        m, train::gather_direction(video, set, btg::Direction::backward),
        btg::Direction::backward, assignment_softmax);
    return out;
}

Tensor fuse_word_scores(const Tensor& p_fwd, const Tensor& p_bwd, train::FusionMode mode) {
    if (p_fwd.rank() != 1 || !p_fwd.same_shape(p_bwd)) {
        throw std::invalid_argument("fuse_word_scores: distribution shapes disagree");
    }
    Tensor out({p_fwd.dim(0)});
    if (mode == train::FusionMode::mean) {
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (p_fwd[i] + p_bwd[i]);
        return out;
    }
    double z = 0.0;
    for (std::int64_t i = 0; i < out.size(); ++i) {
        out[i] = std::sqrt(p_fwd[i] * p_bwd[i]);
        z += out[i];
    }
    if (z <= 0.0) throw std::invalid_argument("fuse_word_scores: degenerate geometric fusion");
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] /= z;
    return out;
}

namespace {

struct StepDistribution {
    dec::DecoderState forward_state;
    dec::DecoderState backward_state;
    Tensor probs;
};

// Advances the configured direction(s) by one token and returns the fused
// word distribution.
StepDistribution advance(const model::CaptionModel& m, const EncodedVideo& enc,
                         train::RunDirection direction, train::FusionMode fusion,
                         const dec::DecoderState& fwd, const dec::DecoderState& bwd,
                         int token) {
    StepDistribution out;
    out.forward_state = fwd;
    out.backward_state = bwd;
    Tensor p_fwd, p_bwd;
    if (direction != train::RunDirection::backward) {
        auto [state, logits] = dec::decode_step_full(m.dec_fwd, fwd, enc.forward.object_vlads,
                                                     enc.forward.frame_vlads, token);
        out.forward_state = std::move(state);
        p_fwd = dec::word_distribution(logits);
    }
    if (direction != train::RunDirection::forward) {
        auto [state, logits] = dec::decode_step_full(m.dec_bwd, bwd, enc.backward.object_vlads,
                                                     enc.backward.frame_vlads, token);
        out.backward_state = std::move(state);
        p_bwd = dec::word_distribution(logits);
    }
    switch (direction) {
        case train::RunDirection::forward: out.probs = std::move(p_fwd); break;
        case train::RunDirection::backward: out.probs = std::move(p_bwd); break;
        case train::RunDirection::both: out.probs = fuse_word_scores(p_fwd, p_bwd, fusion);
    }
    return out;
}

dec::DecoderState initial_state(const model::CaptionModel& m) {
    return dec::DecoderState{Tensor({m.dims.hidden}), 0};
}

// Score-descending, then lexicographically smaller token sequence.
bool beam_less(const BeamHypothesis& a, const BeamHypothesis& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return std::lexicographical_compare(a.tokens.begin(), a.tokens.end(), b.tokens.begin(),
                                        b.tokens.end());
}

}  // namespace

BeamResult beam_search(const model::CaptionModel& m, const EncodedVideo& enc,
                       train::RunDirection direction, train::FusionMode fusion, int beam_size,
                       int max_words) {
    if (beam_size < 1) throw std::invalid_argument("beam size must be positive");
    if (max_words < 0) throw std::invalid_argument("max_words must be >= 0");
    if (m.dims.vocab <= kNumReservedTokens) {
        throw std::invalid_argument("vocabulary has no content tokens to decode");
    }

    std::vector<BeamHypothesis> beam;
    beam.push_back(BeamHypothesis{{kBosToken}, 0.0, initial_state(m), initial_state(m), false});

    // Every unfinished hypothesis gains one token per round; at max_words it
    // is forced onto EOS, so the loop always terminates.
    for (int round = 0; round <= max_words; ++round) {
        bool any_open = false;
        std::vector<BeamHypothesis> pool;
        for (const BeamHypothesis& hyp : beam) {
            if (hyp.finished) {
                pool.push_back(hyp);
                continue;
            }
            any_open = true;
            StepDistribution step =
                advance(m, enc, direction, fusion, hyp.forward_state, hyp.backward_state,
                        hyp.tokens.back());
            // PAD and BOS sit below EOS in the index space and are never
            // emitted; a hypothesis at the length cap may only close with EOS.
            int content_len = static_cast<int>(hyp.tokens.size()) - 1;
            int last = content_len >= max_words ? kEosToken : m.dims.vocab - 1;
            for (int tok = kEosToken; tok <= last; ++tok) {
                BeamHypothesis child;
                child.tokens = hyp.tokens;
                child.tokens.push_back(tok);
                child.log_prob = hyp.log_prob + std::log(step.probs[tok]);
                child.forward_state = step.forward_state;
                child.backward_state = step.backward_state;
                child.finished = tok == kEosToken;
                pool.push_back(std::move(child));
            }
        }
        if (!any_open) break;
        std::sort(pool.begin(), pool.end(), beam_less);
        if (static_cast<int>(pool.size()) > beam_size) {
            pool.resize(static_cast<std::size_t>(beam_size));
        }
        beam = std::move(pool);
    }

    const BeamHypothesis* best = nullptr;
    for (const BeamHypothesis& hyp : beam) {
        if (hyp.finished && (best == nullptr || beam_less(hyp, *best))) best = &hyp;
    }
    if (best == nullptr) throw std::logic_error("beam search ended without a finished hypothesis");
    return BeamResult{best->tokens, best->log_prob};
}

double sequence_log_prob(const model::CaptionModel& m, const EncodedVideo& enc,
                         train::RunDirection direction, train::FusionMode fusion,
                         const std::vector<int>& tokens) {
    if (tokens.size() < 2 || tokens.front() != kBosToken || tokens.back() != kEosToken) {
        throw std::invalid_argument("sequence must run BOS ... EOS");
    }
    for (std::size_t i = 1; i + 1 < tokens.size(); ++i) {
        if (tokens[i] == kBosToken || tokens[i] == kPadToken || tokens[i] == kEosToken) {
            throw std::invalid_argument("interior tokens must be content words");
        }
    }
    dec::DecoderState fwd = initial_state(m);
    dec::DecoderState bwd = initial_state(m);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        StepDistribution step = advance(m, enc, direction, fusion, fwd, bwd, tokens[i]);
        total += std::log(step.probs[tokens[i + 1]]);
        fwd = std::move(step.forward_state);
        bwd = std::move(step.backward_state);
    }
    return total;
}

std::string detokenize(const std::vector<int>& tokens, const Vocabulary& vocab) {
    std::string out;
    for (int tok : tokens) {
        if (tok == kBosToken || tok == kEosToken || tok == kPadToken) continue;
        if (!out.empty()) out += ' ';
        out += vocab.decode(tok);
    }
    return out;
}

CaptionResult caption_video(const train::Checkpoint& ckpt, const btg::VideoSample& video) {
    return caption_video(ckpt, video, ckpt.config.direction, ckpt.config.fusion,
                         ckpt.config.beam, ckpt.config.max_sentence_len);
}

CaptionResult caption_video(const train::Checkpoint& ckpt, const btg::VideoSample& video,
                            train::RunDirection direction, train::FusionMode fusion,
                            int beam_size, int max_words) {
    EncodedVideo enc = encode_video(ckpt.model, video, ckpt.config.assignment_softmax);
    BeamResult best = beam_search(ckpt.model, enc, direction, fusion, beam_size, max_words);
    CaptionResult out;
    out.video_id = video.video_id;
    out.caption = detokenize(best.tokens, ckpt.vocab);
    out.log_prob = best.log_prob;
    out.tokens = best.tokens;
    return out;
}

}  // namespace trajcap::infer
