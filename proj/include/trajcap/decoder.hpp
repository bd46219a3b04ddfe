#pragma once

#include <string>
#include <utility>
#include <vector>

#include "trajcap/autodiff.hpp"
#include "trajcap/tensor.hpp"

namespace trajcap::dec {

/// One additive-attention block: e_m = w^T tanh(W_h h + U_f feat_m + b).
struct AttentionParameters {
    Tensor w;    // [A]
    Tensor w_h;  // [A, hidden]
    Tensor u_f;  // [A, F]
    Tensor b;    // [A], zero-initialized

    static AttentionParameters init(int attention, int hidden, int feat, Rng& rng);
};

/// GRU caption decoder: word embeddings, the eleven gate/candidate matrices
/// (no biases), a biased output projection, and three independent attention
/// blocks (frame-temporal, object-temporal, object-level).
struct DecoderParameters {
    Tensor embedding;  // [V, E]

    Tensor w_vz, w_oz, w_dz, u_dz;  // update gate: frame feat, object feat, word, recurrent
    Tensor w_vr, w_or, w_dr, u_dr;  // reset gate
    Tensor w_vh, w_oh, u_dh;        // candidate (no word-embedding term)

    Tensor out_w;  // [V, hidden]
    Tensor out_b;  // [V]

    AttentionParameters att_frame;
    AttentionParameters att_obj_temp;
    AttentionParameters att_obj;

    static DecoderParameters init(int vocab, int embed, int hidden, int attention,
                                  int feat, Rng& rng);

    int vocab() const { return embedding.dim(0); }
    int embed() const { return embedding.dim(1); }
    int hidden() const { return u_dz.dim(0); }
    int feat() const { return w_vz.dim(1); }
    void validate() const;
};

struct AttVars {
    ad::Var w, w_h, u_f, b;
};

struct DecVars {
    ad::Var embedding;
    ad::Var w_vz, w_oz, w_dz, u_dz;
    ad::Var w_vr, w_or, w_dr, u_dr;
    ad::Var w_vh, w_oh, u_dh;
    ad::Var out_w, out_b;
    AttVars att_frame, att_obj_temp, att_obj;
};

/// Stable enumeration order shared by checkpoints, the optimizer, and tape
/// binding. dec_vars() consumes leaves in exactly this order.
std::vector<std::pair<std::string, Tensor*>> named_tensors(AttentionParameters& p,
                                                           const std::string& prefix);
std::vector<std::pair<std::string, Tensor*>> named_tensors(DecoderParameters& p);

DecVars dec_vars(const std::vector<ad::Var>& vars, std::size_t offset);

DecVars bind(ad::Tape& tape, const DecoderParameters& p, bool needs_grad);

/// Per-feature projections U_f * feat_m, computable once per sequence because
/// they do not depend on the evolving hidden state.
std::vector<ad::Var> project_feats(ad::Tape& tape, const AttVars& p,
                                   const std::vector<ad::Var>& feats);

/// Softmaxed attention over pre-projected features.
ad::Var attention_scores(ad::Tape& tape, const AttVars& p, ad::Var h_prev,
                         const std::vector<ad::Var>& projected);

ad::Var attention_weights(ad::Tape& tape, const AttVars& p, ad::Var h_prev,
                          const std::vector<ad::Var>& feats);

/// Convex combination of feats under attention_weights.
ad::Var attend(ad::Tape& tape, const AttVars& p, ad::Var h_prev,
               const std::vector<ad::Var>& feats);

/// One GRU step. Returns (h_l, logits). A valid dropout_mask is multiplied
/// into h_l before the output projection only (the recurrent state stays
/// undropped).
std::pair<ad::Var, ad::Var> decoder_step(ad::Tape& tape, const DecVars& p, ad::Var h_prev,
                                         ad::Var phi_f, ad::Var phi_o, int word_in,
                                         ad::Var dropout_mask = {});

/// Teacher-forced pass. gold_inputs must begin with BOS; one logits row per
/// input token. object_vlads is indexed [object][timestep], frame_vlads
/// [timestep]; dropout_masks is empty (inference) or one mask per step.
std::vector<ad::Var> decode_train_sequence(ad::Tape& tape, const DecVars& p,
                                           const std::vector<std::vector<ad::Var>>& object_vlads,
                                           const std::vector<ad::Var>& frame_vlads,
                                           const std::vector<int>& gold_inputs,
                                           int max_steps,
                                           const std::vector<ad::Var>& dropout_masks = {});

// Value-level wrappers.

struct DecoderState {
    Tensor h;
    int step_index = 0;
};

Tensor attention_weights(const AttentionParameters& p, const Tensor& h_prev,
                         const std::vector<Tensor>& feats);
Tensor temporal_attend(const AttentionParameters& p, const Tensor& h_prev,
                       const std::vector<Tensor>& vlads);
Tensor object_attend(const AttentionParameters& p, const Tensor& h_prev,
                     const std::vector<Tensor>& phis);
std::pair<DecoderState, Tensor> decoder_step(const DecoderParameters& p,
                                             const DecoderState& state, const Tensor& phi_f,
                                             const Tensor& phi_o, int word_in);
/// Hierarchical attention + GRU step in one call (what beam search advances).
std::pair<DecoderState, Tensor> decode_step_full(const DecoderParameters& p,
                                                 const DecoderState& state,
                                                 const std::vector<std::vector<Tensor>>& object_vlads,
                                                 const std::vector<Tensor>& frame_vlads,
                                                 int word_in);
Tensor word_distribution(const Tensor& logits);
std::vector<Tensor> decode_train_sequence(const DecoderParameters& p,
                                          const std::vector<std::vector<Tensor>>& object_vlads,
                                          const std::vector<Tensor>& frame_vlads,
                                          const std::vector<int>& gold_inputs, int max_steps);

}  // namespace trajcap::dec
