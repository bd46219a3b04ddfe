#include "trajcap/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace trajcap::ad {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

double stable_logsumexp(const Tensor& v) {
    double m = v[0];
    for (std::int64_t i = 1; i < v.size(); ++i) m = std::max(m, v[i]);
    double s = 0.0;
    for (std::int64_t i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
    return m + std::log(s);
}

}  // namespace

Var Tape::push(Tensor value, bool needs_grad, std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    if (needs_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Tensor value, bool needs_grad) {
    return push(std::move(value), needs_grad, nullptr);
}

const Tensor& Tape::grad(Var v) const {
    const Node& n = node(v);
    if (n.grad.empty()) {
        static thread_local Tensor zero;
        zero = Tensor::zeros_like(n.value);
        return zero;
    }
    return n.grad;
}

Tensor& Tape::grad_buf(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) n.grad = Tensor::zeros_like(n.value);
    return n.grad;
}

bool Tape::any_needs_grad(const std::vector<Var>& xs) const {
    for (Var v : xs) {
        if (node(v).needs_grad) return true;
    }
    return false;
}

void Tape::backward(Var scalar_loss) {
    require(!ran_backward_, "tape backward() may run only once");
    ran_backward_ = true;
    require(node(scalar_loss).value.size() == 1, "backward target must be scalar");
    grad_buf(scalar_loss.id)[0] = 1.0;
    for (int id = scalar_loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.needs_grad && n.back && !n.grad.empty()) n.back(*this);
    }
}

Var Tape::add(Var a, Var b) { return add(std::vector<Var>{a, b}); }

Var Tape::add(const std::vector<Var>& xs) {
    require(!xs.empty(), "add: empty operand list");
    const Tensor& v0 = value(xs[0]);
    Tensor out = v0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
        const Tensor& vi = value(xs[i]);
        require(vi.same_shape(v0), "add: shape mismatch");
        for (std::int64_t j = 0; j < out.size(); ++j) out[j] += vi[j];
    }
    bool ng = any_needs_grad(xs);
    std::vector<int> ids;
    for (Var v : xs) ids.push_back(v.id);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int self = r.id;
        node(r).back = [self, ids](Tape& t) {
            const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
            for (int pid : ids) {
                if (!t.nodes_[static_cast<std::size_t>(pid)].needs_grad) continue;
                Tensor& pg = t.grad_buf(pid);
                for (std::int64_t j = 0; j < g.size(); ++j) pg[j] += g[j];
            }
        };
    }
    return r;
}

Var Tape::sub(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    require(va.same_shape(vb), "sub: shape mismatch");
    Tensor out = va;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
    bool ng = node(a).needs_grad || node(b).needs_grad;
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int self = r.id, ia = a.id, ib = b.id;
        node(r).back = [self, ia, ib](Tape& t) {
            const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
            if (t.nodes_[static_cast<std::size_t>(ia)].needs_grad) {
                Tensor& ga = t.grad_buf(ia);
                for (std::int64_t j = 0; j < g.size(); ++j) ga[j] += g[j];
            }
            if (t.nodes_[static_cast<std::size_t>(ib)].needs_grad) {
                Tensor& gb = t.grad_buf(ib);
                for (std::int64_t j = 0; j < g.size(); ++j) gb[j] -= g[j];
            }
        };
    }
    return r;
}

Var Tape::mul(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    require(va.same_shape(vb), "mul: shape mismatch");
    Tensor out = va;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
    bool ng = node(a).needs_grad || node(b).needs_grad;
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int self = r.id, ia = a.id, ib = b.id;
        node(r).back = [self, ia, ib](Tape& t) {
            const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
            const Tensor& va2 = t.nodes_[static_cast<std::size_t>(ia)].value;
            const Tensor& vb2 = t.nodes_[static_cast<std::size_t>(ib)].value;
            if (t.nodes_[static_cast<std::size_t>(ia)].needs_grad) {
                Tensor& ga = t.grad_buf(ia);
                for (std::int64_t j = 0; j < g.size(); ++j) ga[j] += g[j] * vb2[j];
            }
            if (t.nodes_[static_cast<std::size_t>(ib)].needs_grad) {
                Tensor& gb = t.grad_buf(ib);
                for (std::int64_t j = 0; j < g.size(); ++j) gb[j] += g[j] * va2[j];
            }
        };
    }
    return r;
}

Var Tape::affine(Var a, double scale, double shift) {
    Tensor out = value(a);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = scale * out[i] + shift;
    bool ng = node(a).needs_grad;
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int self = r.id, ia = a.id;
        node(r).back = [self, ia, scale](Tape& t) {
            const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
            Tensor& ga = t.grad_buf(ia);
            for (std::int64_t j = 0; j < g.size(); ++j) ga[j] += scale * g[j];
        };
    }
    return r;
}

Var Tape::sigmoid(Var a) {
    Tensor out = value(a);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
    bool ng = node(a).needs_grad;
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int self = r.id, ia = a.id;
        node(r).back = [self, ia](Tape& t) {
            const Node& n = t.nodes_[static_cast<std::size_t>(self)];
            Tensor& ga = t.grad_buf(ia);
            for (std::int64_t j = 0; j < n.grad.size(); ++j) {
                double y = n.value[j];
                ga[j] += n.grad[j] * y * (1.0 - y);
            }
        };
    }
    return r;
}

Var Tape::tanh(Var a) {
    Tensor out = value(a);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    bool ng = node(a).needs_grad;
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int self = r.id, ia = a.id;
        node(r).back = [self, ia](Tape& t) {
            const Node& n = t.nodes_[static_cast<std::size_t>(self)];
            Tensor& ga = t.grad_buf(ia);
            for (std::int64_t j = 0; j < n.grad.size(); ++j) {
                double y = n.value[j];
                ga[j] += n.grad[j] * (1.0 - y * y);
            }
        };
    }
    return r;
}

Var Tape::matvec(Var w, Var x) {
    const Tensor& vw = value(w);
    const Tensor& vx = value(x);
    require(vw.rank() == 2 && vx.rank() == 1, "matvec: expects matrix and vector");
    require(vw.dim(1) == vx.dim(0), "matvec: inner dimension mismatch");
    int m = vw.dim(0), n = vw.dim(1);
    Tensor out(std::vector<int>{m});
    for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += vw.at(i, j) * vx.at(j);
        out.at(i) = s;
    }
    bool ng = node(w).needs_grad || node(x).needs_grad;
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int self = r.id, iw = w.id, ix = x.id;
        node(r).back = [self, iw, ix, m, n](Tape& t) {
            const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
            const Tensor& vw2 = t.nodes_[static_cast<std::size_t>(iw)].value;
            const Tensor& vx2 = t.nodes_[static_cast<std::size_t>(ix)].value;
            if (t.nodes_[static_cast<std::size_t>(iw)].needs_grad) {
                Tensor& gw = t.grad_buf(iw);
                for (int i = 0; i < m; ++i) {
                    double gi = g.at(i);
                    for (int j = 0; j < n; ++j) gw.at(i, j) += gi * vx2.at(j);
                }
            }
            if (t.nodes_[static_cast<std::size_t>(ix)].needs_grad) {
                Tensor& gx = t.grad_buf(ix);
                for (int i = 0; i < m; ++i) {
                    double gi = g.at(i);
                    for (int j = 0; j < n; ++j) gx.at(j) += gi * vw2.at(i, j);
                }
            }
        };
    }
    return r;
}

Var Tape::dot(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    require(va.size() == vb.size(), "dot: size mismatch");
    double s = 0.0;
    for (std::int64_t i = 0; i < va.size(); ++i) s += va[i] * vb[i];
    bool ng = node(a).needs_grad || node(b).needs_grad;
    Var r = push(Tensor::scalar(s), ng, nullptr);
    if (ng) {
        int self = r.id, ia = a.id, ib = b.id;
        node(r).back = [self, ia, ib](Tape& t) {
            double g = t.nodes_[static_cast<std::size_t>(self)].grad[0];
            const Tensor& va2 = t.nodes_[static_cast<std::size_t>(ia)].value;
            const Tensor& vb2 = t.nodes_[static_cast<std::size_t>(ib)].value;
            if (t.nodes_[static_cast<std::size_t>(ia)].needs_grad) {
                Tensor& ga = t.grad_buf(ia);
                for (std::int64_t j = 0; j < va2.size(); ++j) ga[j] += g * vb2[j];
            }
            if (t.nodes_[static_cast<std::size_t>(ib)].needs_grad) {
                Tensor& gb = t.grad_buf(ib);
                for (std::int64_t j = 0; j < vb2.size(); ++j) gb[j] += g * va2[j];
            }
        };
    }
    return r;
}

Var Tape::conv2d_same(Var x, Var k) {
    const Tensor& vx = value(x);
    const Tensor& vk = value(k);
    require(vx.rank() == 3, "conv2d_same: input must be [H,W,Cin]");
    require(vk.rank() == 4, "conv2d_same: kernel must be [ks,ks,Cin,Cout]");
    require(vk.dim(0) == vk.dim(1), "conv2d_same: kernel must be square");
    require(vk.dim(0) % 2 == 1, "conv2d_same: kernel size must be odd");
    require(vk.dim(2) == vx.dim(2), "conv2d_same: channel mismatch");
    int H = vx.dim(0), W = vx.dim(1), Ci = vx.dim(2);
    int ks = vk.dim(0), Co = vk.dim(3);
    int pad = ks / 2;
    Tensor out(std::vector<int>{H, W, Co});
    for (int h = 0; h < H; ++h) {
        for (int w = 0; w < W; ++w) {
            for (int a = 0; a < ks; ++a) {
                int hh = h + a - pad;
                if (hh < 0 || hh >= H) continue;
                for (int b = 0; b < ks; ++b) {
                    int ww = w + b - pad;
                    if (ww < 0 || ww >= W) continue;
                    for (int co = 0; co < Co; ++co) {
                        double s = 0.0;
                        for (int ci = 0; ci < Ci; ++ci) {
                            s += vx.at(hh, ww, ci) * vk.at(a, b, ci, co);
                        }
                        out.at(h, w, co) += s;
                    }
                }
            }
        }
    }
    bool ng = node(x).needs_grad || node(k).needs_grad;
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int self = r.id, ix = x.id, ik = k.id;
        node(r).back = [self, ix, ik, H, W, Ci, ks, Co, pad](Tape& t) {
            const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
            const Tensor& vx2 = t.nodes_[static_cast<std::size_t>(ix)].value;
            const Tensor& vk2 = t.nodes_[static_cast<std::size_t>(ik)].value;
            bool need_x = t.nodes_[static_cast<std::size_t>(ix)].needs_grad;
            bool need_k = t.nodes_[static_cast<std::size_t>(ik)].needs_grad;
            Tensor* gx = need_x ? &t.grad_buf(ix) : nullptr;
            Tensor* gk = need_k ? &t.grad_buf(ik) : nullptr;
            for (int h = 0; h < H; ++h) {
                for (int w = 0; w < W; ++w) {
                    for (int a = 0; a < ks; ++a) {
                        int hh = h + a - pad;
                        if (hh < 0 || hh >= H) continue;
                        for (int b = 0; b < ks; ++b) {
                            int ww = w + b - pad;
                            if (ww < 0 || ww >= W) continue;
                            for (int co = 0; co < Co; ++co) {
                                double go = g.at(h, w, co);
                                if (go == 0.0) continue;
                                for (int ci = 0; ci < Ci; ++ci) {
                                    if (need_k) gk->at(a, b, ci, co) += vx2.at(hh, ww, ci) * go;
                                    if (need_x) gx->at(hh, ww, ci) += vk2.at(a, b, ci, co) * go;
                                }
                            }
                        }
                    }
                }
            }
        };
    }
    return r;
}

Var Tape::reshape(Var a, std::vector<int> shape) {
    Tensor out = value(a).reshaped(shape);
    bool ng = node(a).needs_grad;
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int self = r.id, ia = a.id;
        node(r).back = [self, ia](Tape& t) {
            const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
            Tensor& ga = t.grad_buf(ia);
            for (std::int64_t j = 0; j < g.size(); ++j) ga[j] += g[j];
        };
    }
    return r;
}

Var Tape::concat(const std::vector<Var>& xs) {
    require(!xs.empty(), "concat: empty operand list");
    std::int64_t total = 0;
    for (Var v : xs) total += value(v).size();
    Tensor out(std::vector<int>{static_cast<int>(total)});
    std::int64_t off = 0;
    for (Var v : xs) {
        const Tensor& t = value(v);
        for (std::int64_t j = 0; j < t.size(); ++j) out[off + j] = t[j];
        off += t.size();
    }
    bool ng = any_needs_grad(xs);
    std::vector<int> ids;
    for (Var v : xs) ids.push_back(v.id);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int self = r.id;
        node(r).back = [self, ids](Tape& t) {
            const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
            std::int64_t off2 = 0;
            for (int pid : ids) {
                const Node& p = t.nodes_[static_cast<std::size_t>(pid)];
                std::int64_t n = p.value.size();
                if (p.needs_grad) {
                    Tensor& pg = t.grad_buf(pid);
                    for (std::int64_t j = 0; j < n; ++j) pg[j] += g[off2 + j];
                }
                off2 += n;
            }
        };
    }
    return r;
}

Var Tape::row(Var m, int r) {
    const Tensor& vm = value(m);
    require(vm.rank() == 2, "row: expects matrix");
    require(r >= 0 && r < vm.dim(0), "row: index out of range");
    int cols = vm.dim(1);
    Tensor out(std::vector<int>{cols});
    for (int j = 0; j < cols; ++j) out.at(j) = vm.at(r, j);
    bool ng = node(m).needs_grad;
    Var res = push(std::move(out), ng, nullptr);
    if (ng) {
        int self = res.id, im = m.id;
        node(res).back = [self, im, r, cols](Tape& t) {
            const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
            Tensor& gm = t.grad_buf(im);
            for (int j = 0; j < cols; ++j) gm.at(r, j) += g.at(j);
        };
    }
    return res;
}

Var Tape::softmax(Var a) {
    const Tensor& va = value(a);
    require(va.rank() == 1, "softmax: expects 1-D input");
    Tensor out = va;
    double m = out[0];
    for (std::int64_t i = 1; i < out.size(); ++i) m = std::max(m, out[i]);
    double s = 0.0;
    for (std::int64_t i = 0; i < out.size(); ++i) {
        out[i] = std::exp(out[i] - m);
        s += out[i];
    }
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] /= s;
    bool ng = node(a).needs_grad;
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int self = r.id, ia = a.id;
        node(r).back = [self, ia](Tape& t) {
            const Node& n = t.nodes_[static_cast<std::size_t>(self)];
            Tensor& ga = t.grad_buf(ia);
            double inner = 0.0;
            for (std::int64_t j = 0; j < n.grad.size(); ++j) inner += n.grad[j] * n.value[j];
            for (std::int64_t j = 0; j < n.grad.size(); ++j) {
                ga[j] += n.value[j] * (n.grad[j] - inner);
            }
        };
    }
    return r;
}

Var Tape::softmax_last(Var a) {
    const Tensor& va = value(a);
    require(va.rank() == 3, "softmax_last: expects [H,W,K] input");
    int H = va.dim(0), W = va.dim(1), K = va.dim(2);
    Tensor out = va;
    for (int h = 0; h < H; ++h) {
        for (int w = 0; w < W; ++w) {
            double m = out.at(h, w, 0);
            for (int k = 1; k < K; ++k) m = std::max(m, out.at(h, w, k));
            double s = 0.0;
            for (int k = 0; k < K; ++k) {
                double e = std::exp(out.at(h, w, k) - m);
                out.at(h, w, k) = e;
                s += e;
            }
            for (int k = 0; k < K; ++k) out.at(h, w, k) /= s;
        }
    }
    bool ng = node(a).needs_grad;
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int self = r.id, ia = a.id;
        node(r).back = [self, ia, H, W, K](Tape& t) {
            const Node& n = t.nodes_[static_cast<std::size_t>(self)];
            Tensor& ga = t.grad_buf(ia);
            for (int h = 0; h < H; ++h) {
                for (int w = 0; w < W; ++w) {
                    double inner = 0.0;
                    for (int k = 0; k < K; ++k) inner += n.grad.at(h, w, k) * n.value.at(h, w, k);
                    for (int k = 0; k < K; ++k) {
                        ga.at(h, w, k) += n.value.at(h, w, k) * (n.grad.at(h, w, k) - inner);
                    }
                }
            }
        };
    }
    return r;
}

Var Tape::cross_entropy(Var logits, int target) {
    const Tensor& vl = value(logits);
    require(vl.rank() == 1, "cross_entropy: expects 1-D logits");
    require(target >= 0 && target < vl.dim(0), "cross_entropy: target out of range");
    double lse = stable_logsumexp(vl);
    double loss = lse - vl.at(target);
    bool ng = node(logits).needs_grad;
    Var r = push(Tensor::scalar(loss), ng, nullptr);
    if (ng) {
        int self = r.id, il = logits.id;
        node(r).back = [self, il, target, lse](Tape& t) {
            double g = t.nodes_[static_cast<std::size_t>(self)].grad[0];
            const Tensor& vl2 = t.nodes_[static_cast<std::size_t>(il)].value;
            Tensor& gl = t.grad_buf(il);
            for (std::int64_t j = 0; j < vl2.size(); ++j) {
                double p = std::exp(vl2[j] - lse);
                gl[j] += g * (p - (j == target ? 1.0 : 0.0));
            }
        };
    }
    return r;
}

Var Tape::convex_combine(Var weights, const std::vector<Var>& feats) {
    const Tensor& vw = value(weights);
    require(vw.rank() == 1, "convex_combine: weights must be 1-D");
    require(static_cast<std::size_t>(vw.dim(0)) == feats.size(),
            "convex_combine: weight count must match feature count");
    require(!feats.empty(), "convex_combine: empty feature list");
    const Tensor& f0 = value(feats[0]);
    Tensor out = Tensor::zeros_like(f0);
    for (std::size_t m = 0; m < feats.size(); ++m) {
        const Tensor& fm = value(feats[m]);
        require(fm.same_shape(f0), "convex_combine: feature shape mismatch");
        double wm = vw[static_cast<std::int64_t>(m)];
        for (std::int64_t j = 0; j < out.size(); ++j) out[j] += wm * fm[j];
    }
    bool ng = node(weights).needs_grad || any_needs_grad(feats);
    std::vector<int> ids;
    for (Var v : feats) ids.push_back(v.id);
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int self = r.id, iw = weights.id;
        node(r).back = [self, iw, ids](Tape& t) {
            const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
            const Tensor& vw2 = t.nodes_[static_cast<std::size_t>(iw)].value;
            bool need_w = t.nodes_[static_cast<std::size_t>(iw)].needs_grad;
            for (std::size_t m = 0; m < ids.size(); ++m) {
                const Node& p = t.nodes_[static_cast<std::size_t>(ids[m])];
                if (need_w) {
                    double s = 0.0;
                    for (std::int64_t j = 0; j < g.size(); ++j) s += g[j] * p.value[j];
                    t.grad_buf(iw)[static_cast<std::int64_t>(m)] += s;
                }
                if (p.needs_grad) {
                    Tensor& pg = t.grad_buf(ids[m]);
                    double wm = vw2[static_cast<std::int64_t>(m)];
                    for (std::int64_t j = 0; j < g.size(); ++j) pg[j] += wm * g[j];
                }
            }
        };
    }
    return r;
}

Var Tape::vlad(Var x, Var assign, Var centers) {
    const Tensor& vx = value(x);
    const Tensor& va = value(assign);
    const Tensor& vc = value(centers);
    require(vx.rank() == 3, "vlad: features must be [H,W,D]");
    require(va.rank() == 3, "vlad: assignments must be [H,W,K]");
    require(vc.rank() == 2, "vlad: centers must be [K,D]");
    require(vx.dim(0) == va.dim(0) && vx.dim(1) == va.dim(1), "vlad: spatial extent mismatch");
    require(va.dim(2) == vc.dim(0), "vlad: cluster count mismatch");
    require(vx.dim(2) == vc.dim(1), "vlad: channel count mismatch");
    int H = vx.dim(0), W = vx.dim(1), D = vx.dim(2), K = vc.dim(0);
    Tensor out(std::vector<int>{K, D});
    for (int h = 0; h < H; ++h) {
        for (int w = 0; w < W; ++w) {
            for (int k = 0; k < K; ++k) {
                double a = va.at(h, w, k);
                if (a == 0.0) continue;
                for (int d = 0; d < D; ++d) {
                    out.at(k, d) += a * (vx.at(h, w, d) - vc.at(k, d));
                }
            }
        }
    }
    bool ng = node(x).needs_grad || node(assign).needs_grad || node(centers).needs_grad;
    Var r = push(std::move(out), ng, nullptr);
    if (ng) {
        int self = r.id, ix = x.id, ia = assign.id, ic = centers.id;
        node(r).back = [self, ix, ia, ic, H, W, D, K](Tape& t) {
            const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
            const Tensor& vx2 = t.nodes_[static_cast<std::size_t>(ix)].value;
            const Tensor& va2 = t.nodes_[static_cast<std::size_t>(ia)].value;
            const Tensor& vc2 = t.nodes_[static_cast<std::size_t>(ic)].value;
            bool need_x = t.nodes_[static_cast<std::size_t>(ix)].needs_grad;
            bool need_a = t.nodes_[static_cast<std::size_t>(ia)].needs_grad;
            bool need_c = t.nodes_[static_cast<std::size_t>(ic)].needs_grad;
            Tensor* gx = need_x ? &t.grad_buf(ix) : nullptr;
            Tensor* ga = need_a ? &t.grad_buf(ia) : nullptr;
            Tensor* gc = need_c ? &t.grad_buf(ic) : nullptr;
            for (int h = 0; h < H; ++h) {
                for (int w = 0; w < W; ++w) {
                    for (int k = 0; k < K; ++k) {
                        double a = va2.at(h, w, k);
                        double s_ga = 0.0;
                        for (int d = 0; d < D; ++d) {
                            double gkd = g.at(k, d);
                            if (need_a) s_ga += gkd * (vx2.at(h, w, d) - vc2.at(k, d));
                            if (need_x) gx->at(h, w, d) += a * gkd;
                            if (need_c) gc->at(k, d) -= a * gkd;
                        }
                        if (need_a) ga->at(h, w, k) += s_ga;
                    }
                }
            }
        };
    }
    return r;
}

}  // namespace trajcap::ad
