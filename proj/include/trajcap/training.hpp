#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "trajcap/autodiff.hpp"
#include "trajcap/btg.hpp"
#include "trajcap/model.hpp"
#include "trajcap/tensor.hpp"
#include "trajcap/vocab.hpp"

namespace trajcap::train {

/// Which temporal graph(s) to train and decode with.
enum class RunDirection { forward, backward, both };

/// How forward and backward word distributions combine at decode time: plain
/// arithmetic mean, or renormalized geometric mean.
enum class FusionMode { mean, geometric };

std::string to_string(RunDirection d);
std::string to_string(FusionMode m);
RunDirection run_direction_from_string(const std::string& s);
FusionMode fusion_mode_from_string(const std::string& s);

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 16;
    double dropout = 0.5;
    double grad_clip = 10.0;
    int max_sentence_len = 16;
    int frames = 40;    // T
    int regions = 5;    // N
    int clusters = 64;  // K
    int hidden = 512;
    int embed = 512;
    int attention = 100;
    int beam = 5;
    int kernel_size = 3;
    std::uint64_t seed = 1;
    RunDirection direction = RunDirection::both;
    FusionMode fusion = FusionMode::mean;
    bool assignment_softmax = false;
    bool share_vlad = false;

    void validate() const;
};

/// Serialized as a flat JSON object. Parsing starts from defaults and
/// overrides whatever keys are present; unknown keys are rejected so config
/// typos fail loudly.
std::string to_json(const TrainConfig& config);
TrainConfig config_from_json(const std::string& text);

/// Model dimensions implied by a config plus the two data-dependent sizes
/// (feature-map depth and vocabulary).
model::ModelDims dims_for(const TrainConfig& config, int channels, int vocab_size);

/// Feature maps for one temporal direction, ordered as the encoders consume
/// them: objects[n] follows trajectory n step by step, frames follows the
/// direction's global frame ordering.
struct DirectionFeatures {
    std::vector<std::vector<Tensor>> objects;  // [N][T], each [H,W,D]
    std::vector<Tensor> frames;                // [T], each [H,W,D]
};

struct VideoFeatures {
    std::string video_id;
    DirectionFeatures forward;
    DirectionFeatures backward;
};

DirectionFeatures gather_direction(const btg::VideoSample& video,
                                   const btg::TrajectorySet& trajectories, btg::Direction d);

/// Builds the bidirectional trajectories and gathers both directions.
VideoFeatures gather_features(const btg::VideoSample& video);

/// One training example. tokens is the padded BOS ... EOS PAD* layout from
/// dataio; mask[l] marks whether position l+1 is a real prediction target.
struct TrainExample {
    const VideoFeatures* features = nullptr;
    std::vector<int> tokens;
    std::vector<bool> mask;
};

/// Mean of -log p(gold) over unmasked positions, pooled across the batch.
/// Throws std::invalid_argument when every position is masked.
ad::Var masked_cross_entropy(ad::Tape& tape,
                             const std::vector<std::vector<ad::Var>>& logit_rows,
                             const std::vector<std::vector<int>>& targets,
                             const std::vector<std::vector<bool>>& masks);
double masked_cross_entropy(const std::vector<std::vector<Tensor>>& logit_rows,
                            const std::vector<std::vector<int>>& targets,
                            const std::vector<std::vector<bool>>& masks);

/// Elementwise clamp to [-limit, limit], in place. Idempotent.
void clip_gradients(std::vector<Tensor>& grads, double limit);

/// Adam with conventional defaults. Moments are lazily allocated on the first
/// step and are not serialized with checkpoints.
class AdamOptimizer {
public:
    explicit AdamOptimizer(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                           double epsilon = 1e-8);

    void step(const std::vector<std::pair<std::string, Tensor*>>& params,
              const std::vector<Tensor>& grads);

    std::int64_t steps_taken() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

/// Tape handles for one direction's full pipeline.
struct BoundDirection {
    agg::CGruVars object_cgru;
    ad::Var object_centers;
    agg::CGruVars frame_cgru;
    ad::Var frame_centers;
    dec::DecVars decoder;
};

struct BoundModel {
    std::vector<ad::Var> leaves;  // registry order, one per model parameter
    BoundDirection forward;
    BoundDirection backward;
};

/// Leafs every parameter in registry order and wires up both directions (with
/// share_vlad the directions alias the same VLAD leaves).
BoundModel bind_model(ad::Tape& tape, model::CaptionModel& m, bool needs_grad);

/// VLAD descriptors for every trajectory and frame position, flattened to
/// [K*D] as the decoder consumes them.
struct EncodedDirectionVars {
    std::vector<std::vector<ad::Var>> object_vlads;  // [N][T]
    std::vector<ad::Var> frame_vlads;                // [T]
};

EncodedDirectionVars encode_direction(ad::Tape& tape, const BoundDirection& bound,
                                      const DirectionFeatures& feats, bool assignment_softmax);

/// Full training loss for one batch: per-direction pooled masked cross-entropy,
/// summed over the configured direction(s). dropout_rng may be null (no
/// dropout); masks are drawn example-major, forward direction first.
ad::Var batch_loss(ad::Tape& tape, const BoundModel& bound,
                   const std::vector<TrainExample>& batch, const TrainConfig& config,
                   Rng* dropout_rng);

/// batch_loss evaluated without gradients on a throwaway tape, dropout off.
double batch_loss_value(model::CaptionModel& m, const std::vector<TrainExample>& batch,
                        const TrainConfig& config);

/// One optimizer update: forward, backward, clip, Adam. Throws NumericError on
/// a non-finite loss or gradient.
double train_step(model::CaptionModel& m, const std::vector<TrainExample>& batch,
                  const TrainConfig& config, AdamOptimizer& opt, Rng& dropout_rng);

struct Checkpoint {
    TrainConfig config;
    Vocabulary vocab;
    int channels = 0;  // feature-map depth D, fixed by the dataset
    std::int64_t step = 0;
    model::CaptionModel model;
};

/// Container format: one JSON header line (config, dims, vocab, declared
/// parameter list), then each parameter as raw little-endian float32 in
/// declared order. Round-trips byte-exactly.
void save_checkpoint(const std::string& path, Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

struct FdGroupReport {
    std::string name;
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
};

struct FdReport {
    std::vector<FdGroupReport> groups;
    double max_rel_error = 0.0;

    bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

/// Central finite differences vs the analytic gradient of batch_loss (dropout
/// off), per parameter group. Relative error uses an absolute floor of 1e-4 in
/// the denominator so near-zero gradients are compared absolutely.
FdReport finite_difference_check(model::CaptionModel& m, const std::vector<TrainExample>& batch,
                                 const TrainConfig& config, double eps = 1e-5);

}  // namespace trajcap::train
