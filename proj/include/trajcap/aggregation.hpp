#pragma once

#include <string>
#include <utility>
#include <vector>

#include "trajcap/autodiff.hpp"
#include "trajcap/tensor.hpp"

namespace trajcap::agg {

/// Convolutional GRU kernels. W_* map the D input channels to K assignment
/// channels, U_* map K to K. No bias terms anywhere.
struct CGruParameters {
    Tensor w_z, w_r, w_a;  // [ks,ks,D,K]
    Tensor u_z, u_r, u_a;  // [ks,ks,K,K]

    static CGruParameters init(int kernel_size, int channels, int clusters, Rng& rng);

    int kernel_size() const { return w_z.dim(0); }
    int channels() const { return w_z.dim(2); }
    int clusters() const { return w_z.dim(3); }
    void validate() const;
};

/// K learnable cluster centers of dimension D, stored as [K,D].
struct ClusterCodebook {
    Tensor centers;

    static ClusterCodebook init(int clusters, int channels, Rng& rng);

    int clusters() const { return centers.dim(0); }
    int channels() const { return centers.dim(1); }
};

/// Tape handles for one C-GRU parameter set.
struct CGruVars {
    ad::Var w_z, w_r, w_a, u_z, u_r, u_a;
};

/// Stable enumeration order shared by checkpoints, the optimizer, and tape
/// binding. cgru_vars() consumes leaves in exactly this order.
std::vector<std::pair<std::string, Tensor*>> named_tensors(CGruParameters& p);

CGruVars cgru_vars(const std::vector<ad::Var>& vars, std::size_t offset);

CGruVars bind(ad::Tape& tape, const CGruParameters& p, bool needs_grad);

/// One recurrence step: z and r gates, candidate map, convex update.
/// x_t is [H,W,D], a_prev is [H,W,K]; returns [H,W,K].
ad::Var cgru_step(ad::Tape& tape, const CGruVars& p, ad::Var x_t, ad::Var a_prev);

/// All T hidden states starting from a zero initial state.
std::vector<ad::Var> assign_sequence(ad::Tape& tape, const CGruVars& p,
                                     const std::vector<ad::Var>& xs);

/// vl[k,:] = sum_{h,w} a(h,w,k) * (x(h,w,:) - c_k). With assignment_softmax
/// the assignment map is first normalized over K at each location.
ad::Var vlad_encode_step(ad::Tape& tape, ad::Var x_t, ad::Var a_t, ad::Var centers,
                         bool assignment_softmax);

/// C-GRU pass followed by per-timestep VLAD encoding; returns T descriptors
/// of shape [K,D].
std::vector<ad::Var> encode_sequence(ad::Tape& tape, const CGruVars& p, ad::Var centers,
                                     const std::vector<ad::Var>& xs,
                                     bool assignment_softmax);

// Value-level wrappers (no gradients) over the tape builders.
Tensor cgru_step(const CGruParameters& p, const Tensor& x_t, const Tensor& a_prev);
std::vector<Tensor> assign_sequence(const CGruParameters& p, const std::vector<Tensor>& xs);
Tensor vlad_encode_step(const Tensor& x_t, const Tensor& a_t, const ClusterCodebook& codebook,
                        bool assignment_softmax = false);
std::vector<Tensor> encode_trajectory(const std::vector<Tensor>& features,
                                      const CGruParameters& p, const ClusterCodebook& codebook,
                                      bool assignment_softmax = false);

}  // namespace trajcap::agg
