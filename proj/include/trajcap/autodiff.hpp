#pragma once

#include <functional>
#include <vector>

#include "trajcap/tensor.hpp"

namespace trajcap::ad {

/// Handle to a node on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode autodiff tape. Ops append nodes in evaluation order; backward()
/// walks the tape in reverse, accumulating gradients into every node that
/// (transitively) depends on a grad-enabled leaf. A tape is built, run backward
/// at most once, and discarded.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool needs_grad = false);

    const Tensor& value(Var v) const { return node(v).value; }
    /// Gradient of the last backward() target w.r.t. v. Zero tensor when no
    /// gradient reached v.
    const Tensor& grad(Var v) const;
    void backward(Var scalar_loss);

    std::size_t num_nodes() const { return nodes_.size(); }

    // Elementwise.
    Var add(Var a, Var b);
    Var add(const std::vector<Var>& xs);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var affine(Var a, double scale, double shift);
    Var sigmoid(Var a);
    Var tanh(Var a);

    // Linear algebra.
    Var matvec(Var w, Var x);  // [m,n] * [n] -> [m]
    Var dot(Var a, Var b);     // -> [1]

    /// 2-D convolution with zero same-padding: [H,W,Ci] * [ks,ks,Ci,Co] ->
    /// [H,W,Co]. Kernel spatial size must be odd.
    Var conv2d_same(Var x, Var k);

    // Shape plumbing.
    Var reshape(Var a, std::vector<int> shape);
    Var concat(const std::vector<Var>& xs);  // row-major flatten + join -> 1-D
    Var row(Var m, int r);                   // [R,C] -> [C]

    // Softmax family.
    Var softmax(Var a);       // 1-D
    Var softmax_last(Var a);  // [H,W,K]: softmax over trailing axis per location
    Var cross_entropy(Var logits, int target);  // -log softmax(logits)[target] -> [1]

    /// sum_m weights[m] * feats[m]; weights is [M], each feat the same shape.
    Var convex_combine(Var weights, const std::vector<Var>& feats);

    /// Per-cluster residual accumulation: out[k,d] = sum_{h,w} a[h,w,k] *
    /// (x[h,w,d] - c[k,d]) for x [H,W,D], a [H,W,K], c [K,D].
    Var vlad(Var x, Var assign, Var centers);

private:
    struct Node {
        Tensor value;
        Tensor grad;  // allocated on first contribution during backward
        bool needs_grad = false;
        std::function<void(Tape&)> back;
    };

    Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
    const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(v.id)]; }
    Tensor& grad_buf(int id);
    Var push(Tensor value, bool needs_grad, std::function<void(Tape&)> back);
    bool any_needs_grad(const std::vector<Var>& xs) const;

    std::vector<Node> nodes_;
    bool ran_backward_ = false;
};

}  // namespace trajcap::ad
