#include "trajcap/aggregation.hpp"

#include <cmath>
#include <stdexcept>

namespace trajcap::agg {

using ad::Tape;
using ad::Var;

CGruParameters CGruParameters::init(int kernel_size, int channels, int clusters,
                                    Rng& rng) {
    if (kernel_size < 1 || kernel_size % 2 == 0) {
        throw std::invalid_argument("kernel size must be odd and positive");
    }
    if (channels < 1 || clusters < 1) {
        throw std::invalid_argument("channel and cluster counts must be positive");
    }
    double hw_in = 1.0 / std::sqrt(static_cast<double>(kernel_size * kernel_size * channels));
    double hw_rec = 1.0 / std::sqrt(static_cast<double>(kernel_size * kernel_size * clusters));
    CGruParameters p;
    p.w_z = uniform_tensor({kernel_size, kernel_size, channels, clusters}, hw_in, rng);
    p.w_r = uniform_tensor({kernel_size, kernel_size, channels, clusters}, hw_in, rng);
    p.w_a = uniform_tensor({kernel_size, kernel_size, channels, clusters}, hw_in, rng);
    p.u_z = uniform_tensor({kernel_size, kernel_size, clusters, clusters}, hw_rec, rng);
    p.u_r = uniform_tensor({kernel_size, kernel_size, clusters, clusters}, hw_rec, rng);
    p.u_a = uniform_tensor({kernel_size, kernel_size, clusters, clusters}, hw_rec, rng);
    return p;
}

void CGruParameters::validate() const {
    if (w_z.rank() != 4 || u_z.rank() != 4) {
        throw std::invalid_argument("C-GRU kernels must be rank-4");
    }
    if (!w_r.same_shape(w_z) || !w_a.same_shape(w_z) || !u_r.same_shape(u_z) ||
        !u_a.same_shape(u_z)) {
        throw std::invalid_argument("C-GRU kernel shapes inconsistent");
    }
    if (u_z.dim(2) != w_z.dim(3) || u_z.dim(3) != w_z.dim(3) ||
        u_z.dim(0) != w_z.dim(0) || u_z.dim(1) != w_z.dim(1)) {
        throw std::invalid_argument("recurrent kernels must map K to K channels");
    }
}

ClusterCodebook ClusterCodebook::init(int clusters, int channels, Rng& rng) {
    if (clusters < 1 || channels < 1) {
        throw std::invalid_argument("cluster and channel counts must be positive");
    }
    double hw = 1.0 / std::sqrt(static_cast<double>(channels));
    return ClusterCodebook{uniform_tensor({clusters, channels}, hw, rng)};
}

std::vector<std::pair<std::string, Tensor*>> named_tensors(CGruParameters& p) {
    return {{"w_z", &p.w_z}, {"w_r", &p.w_r}, {"w_a", &p.w_a},
            {"u_z", &p.u_z}, {"u_r", &p.u_r}, {"u_a", &p.u_a}};
}

// Must consume in the same order named_tensors() lists.
CGruVars cgru_vars(const std::vector<ad::Var>& vars, std::size_t offset) {
    return CGruVars{vars.at(offset),     vars.at(offset + 1), vars.at(offset + 2),
                    vars.at(offset + 3), vars.at(offset + 4), vars.at(offset + 5)};
}

CGruVars bind(Tape& tape, const CGruParameters& p, bool needs_grad) {
    p.validate();
    return CGruVars{tape.leaf(p.w_z, needs_grad), tape.leaf(p.w_r, needs_grad),
                    tape.leaf(p.w_a, needs_grad), tape.leaf(p.u_z, needs_grad),
                    tape.leaf(p.u_r, needs_grad), tape.leaf(p.u_a, needs_grad)};
}

Var cgru_step(Tape& tape, const CGruVars& p, Var x_t, Var a_prev) {
    Var z = tape.sigmoid(tape.add(tape.conv2d_same(x_t, p.w_z),
                                  tape.conv2d_same(a_prev, p.u_z)));
    Var r = tape.sigmoid(tape.add(tape.conv2d_same(x_t, p.w_r),
                                  tape.conv2d_same(a_prev, p.u_r)));
    Var candidate = tape.tanh(tape.add(tape.conv2d_same(x_t, p.w_a),
                                       tape.conv2d_same(tape.mul(r, a_prev), p.u_a)));
    return tape.add(tape.mul(tape.affine(z, -1.0, 1.0), a_prev),
                    tape.mul(z, candidate));
}

std::vector<Var> assign_sequence(Tape& tape, const CGruVars& p,
                                 const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("assign_sequence: empty input sequence");
    const Tensor& x0 = tape.value(xs[0]);
    if (x0.rank() != 3) throw std::invalid_argument("feature maps must be [H,W,D]");
    int clusters = tape.value(p.w_z).dim(3);
    Var state = tape.leaf(Tensor({x0.dim(0), x0.dim(1), clusters}));
    std::vector<Var> states;
    states.reserve(xs.size());
    for (Var x : xs) {
        state = cgru_step(tape, p, x, state);
        states.push_back(state);
    }
    return states;
}

Var vlad_encode_step(Tape& tape, Var x_t, Var a_t, Var centers,
                     bool assignment_softmax) {
    Var a = assignment_softmax ? tape.softmax_last(a_t) : a_t;
    return tape.vlad(x_t, a, centers);
}

std::vector<Var> encode_sequence(Tape& tape, const CGruVars& p, Var centers,
                                 const std::vector<Var>& xs, bool assignment_softmax) {
    std::vector<Var> assigns = assign_sequence(tape, p, xs);
    std::vector<Var> descriptors;
    descriptors.reserve(xs.size());
    for (std::size_t t = 0; t < xs.size(); ++t) {
        descriptors.push_back(vlad_encode_step(tape, xs[t], assigns[t], centers,
                                               assignment_softmax));
    }
    return descriptors;
}

Tensor cgru_step(const CGruParameters& p, const Tensor& x_t, const Tensor& a_prev) {
    Tape tape;
    CGruVars vars = bind(tape, p, false);
    Var out = cgru_step(tape, vars, tape.leaf(x_t), tape.leaf(a_prev));
    return tape.value(out);
}

std::vector<Tensor> assign_sequence(const CGruParameters& p, const std::vector<Tensor>& xs) {
    Tape tape;
    CGruVars vars = bind(tape, p, false);
    std::vector<Var> in;
    in.reserve(xs.size());
    for (const Tensor& x : xs) in.push_back(tape.leaf(x));
    std::vector<Tensor> out;
    for (Var v : assign_sequence(tape, vars, in)) out.push_back(tape.value(v));
    return out;
}

Tensor vlad_encode_step(const Tensor& x_t, const Tensor& a_t, const ClusterCodebook& codebook,
                        bool assignment_softmax) {
    Tape tape;
    Var out = vlad_encode_step(tape, tape.leaf(x_t), tape.leaf(a_t),
                               tape.leaf(codebook.centers), assignment_softmax);
    return tape.value(out);
}

std::vector<Tensor> encode_trajectory(const std::vector<Tensor>& features,
                                      const CGruParameters& p, const ClusterCodebook& codebook,
                                      bool assignment_softmax) {
    Tape tape;
    CGruVars vars = bind(tape, p, false);
    Var centers = tape.leaf(codebook.centers);
    std::vector<Var> in;
    in.reserve(features.size());
    for (const Tensor& x : features) in.push_back(tape.leaf(x));
    std::vector<Tensor> out;
    for (Var v : encode_sequence(tape, vars, centers, in, assignment_softmax)) {
        out.push_back(tape.value(v));
    }
    return out;
}

}  // namespace trajcap::agg
