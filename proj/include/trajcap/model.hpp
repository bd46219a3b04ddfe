#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "trajcap/aggregation.hpp"
#include "trajcap/btg.hpp"
#include "trajcap/decoder.hpp"
#include "trajcap/tensor.hpp"

namespace trajcap::model {

/// Hyperparameter bundle for one full caption model. The decoder consumes
/// flattened K*D VLAD descriptors, so the attention feature width is derived
/// rather than stored.
struct ModelDims {
    int clusters = 64;  // K
    int channels = 8;   // D, depth of the region / frame feature maps
    int hidden = 512;
    int embed = 512;
    int attention = 100;
    int vocab = 0;
    int kernel_size = 3;

    int feat() const { return clusters * channels; }
    void validate() const;
};

/// Learnable VLAD stage: assignment C-GRU plus cluster codebook.
struct VladModel {
    agg::CGruParameters cgru;
    agg::ClusterCodebook codebook;

    static VladModel init(const ModelDims& dims, Rng& rng);
};

/// The full captioner: object and frame VLAD models for each temporal
/// direction plus one decoder per direction. With share_vlad the two
/// directions reuse a single object and a single frame VLAD model.
struct CaptionModel {
    ModelDims dims;
    bool share_vlad = false;
    std::vector<VladModel> vlads;  // access through object_vlad()/frame_vlad()
    dec::DecoderParameters dec_fwd;
    dec::DecoderParameters dec_bwd;

    static CaptionModel init(const ModelDims& dims, std::uint64_t seed,
                             bool share_vlad = false);

    VladModel& object_vlad(btg::Direction d);
    VladModel& frame_vlad(btg::Direction d);
    const VladModel& object_vlad(btg::Direction d) const;
    const VladModel& frame_vlad(btg::Direction d) const;

    /// Ordered (name, tensor) registry. Checkpoints, the optimizer, and tape
    /// binding all walk parameters in exactly this order.
    std::vector<std::pair<std::string, Tensor*>> parameters();

    std::int64_t parameter_count();
    void validate() const;
};

}  // namespace trajcap::model
