#include "trajcap/decoder.hpp"

#include <cmath>
#include <stdexcept>

#include "trajcap/vocab.hpp"

namespace trajcap::dec {

using ad::Tape;
using ad::Var;

AttentionParameters AttentionParameters::init(int attention, int hidden, int feat,
                                              Rng& rng) {
    if (attention < 1 || hidden < 1 || feat < 1) {
        throw std::invalid_argument("attention dimensions must be positive");
    }
    AttentionParameters p;
    p.w = uniform_tensor({attention}, 1.0 / std::sqrt(attention), rng);
    p.w_h = uniform_tensor({attention, hidden}, 1.0 / std::sqrt(hidden), rng);
    p.u_f = uniform_tensor({attention, feat}, 1.0 / std::sqrt(feat), rng);
    p.b = Tensor({attention});
    return p;
}

DecoderParameters DecoderParameters::init(int vocab, int embed, int hidden,
                                          int attention, int feat, Rng& rng) {
    if (vocab < kNumReservedTokens || embed < 1 || hidden < 1 || feat < 1) {
        throw std::invalid_argument("decoder dimensions are invalid");
    }
    auto mat = [&rng](int rows, int cols) {
        return uniform_tensor({rows, cols}, 1.0 / std::sqrt(cols), rng);
    };
    DecoderParameters p;
    p.embedding = mat(vocab, embed);
    p.w_vz = mat(hidden, feat);
    p.w_oz = mat(hidden, feat);
    p.w_dz = mat(hidden, embed);
    p.u_dz = mat(hidden, hidden);
    p.w_vr = mat(hidden, feat);
    p.w_or = mat(hidden, feat);
    p.w_dr = mat(hidden, embed);
    p.u_dr = mat(hidden, hidden);
    p.w_vh = mat(hidden, feat);
    p.w_oh = mat(hidden, feat);
    p.u_dh = mat(hidden, hidden);
    p.out_w = mat(vocab, hidden);
    p.out_b = Tensor({vocab});
    p.att_frame = AttentionParameters::init(attention, hidden, feat, rng);
    p.att_obj_temp = AttentionParameters::init(attention, hidden, feat, rng);
    p.att_obj = AttentionParameters::init(attention, hidden, feat, rng);
    return p;
}

void DecoderParameters::validate() const {
    int hid = u_dz.dim(0), f = w_vz.dim(1), e = embedding.dim(1), v = embedding.dim(0);
    auto expect = [](const Tensor& t, int rows, int cols, const char* what) {
        if (t.rank() != 2 || t.dim(0) != rows || t.dim(1) != cols) {
            throw std::invalid_argument(std::string("decoder parameter shape mismatch: ") + what);
        }
    };
    expect(w_vz, hid, f, "w_vz");
    expect(w_oz, hid, f, "w_oz");
    expect(w_dz, hid, e, "w_dz");
    expect(u_dz, hid, hid, "u_dz");
    expect(w_vr, hid, f, "w_vr");
    expect(w_or, hid, f, "w_or");
    expect(w_dr, hid, e, "w_dr");
    expect(u_dr, hid, hid, "u_dr");
    expect(w_vh, hid, f, "w_vh");
    expect(w_oh, hid, f, "w_oh");
    expect(u_dh, hid, hid, "u_dh");
    expect(out_w, v, hid, "out_w");
    if (out_b.rank() != 1 || out_b.dim(0) != v) {
        throw std::invalid_argument("decoder parameter shape mismatch: out_b");
    }
    for (const AttentionParameters* a : {&att_frame, &att_obj_temp, &att_obj}) {
        int att = a->w.dim(0);
        if (a->w_h.rank() != 2 || a->w_h.dim(0) != att || a->w_h.dim(1) != hid ||
            a->u_f.rank() != 2 || a->u_f.dim(0) != att || a->u_f.dim(1) != f ||
            a->b.dim(0) != att) {
            throw std::invalid_argument("attention parameter shape mismatch");
        }
    }
}

std::vector<std::pair<std::string, Tensor*>> named_tensors(AttentionParameters& p,
                                                           const std::string& prefix) {
    return {{prefix + ".w", &p.w},
            {prefix + ".w_h", &p.w_h},
            {prefix + ".u_f", &p.u_f},
            {prefix + ".b", &p.b}};
}

std::vector<std::pair<std::string, Tensor*>> named_tensors(DecoderParameters& p) {
    std::vector<std::pair<std::string, Tensor*>> out = {
        {"embedding", &p.embedding}, {"w_vz", &p.w_vz}, {"w_oz", &p.w_oz},
        {"w_dz", &p.w_dz},           {"u_dz", &p.u_dz}, {"w_vr", &p.w_vr},
        {"w_or", &p.w_or},           {"w_dr", &p.w_dr}, {"u_dr", &p.u_dr},
        {"w_vh", &p.w_vh},           {"w_oh", &p.w_oh}, {"u_dh", &p.u_dh},
        {"out_w", &p.out_w},         {"out_b", &p.out_b}};
    for (auto& [name, tensor] : named_tensors(p.att_frame, "att_frame")) {
        out.emplace_back(name, tensor);
    }
    for (auto& [name, tensor] : named_tensors(p.att_obj_temp, "att_obj_temp")) {
        out.emplace_back(name, tensor);
    }
    for (auto& [name, tensor] : named_tensors(p.att_obj, "att_obj")) {
        out.emplace_back(name, tensor);
    }
    return out;
}

// Must consume in the same order named_tensors() lists.
DecVars dec_vars(const std::vector<Var>& vars, std::size_t offset) {
    auto next = [&vars, &offset]() { return vars.at(offset++); };
    DecVars d;
    d.embedding = next();
    d.w_vz = next();
    d.w_oz = next();
    d.w_dz = next();
    d.u_dz = next();
    d.w_vr = next();
    d.w_or = next();
    d.w_dr = next();
    d.u_dr = next();
    d.w_vh = next();
    d.w_oh = next();
    d.u_dh = next();
    d.out_w = next();
    d.out_b = next();
    for (AttVars* a : {&d.att_frame, &d.att_obj_temp, &d.att_obj}) {
        a->w = next();
        a->w_h = next();
        a->u_f = next();
        a->b = next();
    }
    return d;
}

DecVars bind(Tape& tape, const DecoderParameters& p, bool needs_grad) {
    p.validate();
    std::vector<Var> vars;
    for (auto& [name, tensor] : named_tensors(const_cast<DecoderParameters&>(p))) {
        (void)name;
        vars.push_back(tape.leaf(*tensor, needs_grad));
    }
    return dec_vars(vars, 0);
}

std::vector<Var> project_feats(Tape& tape, const AttVars& p,
                               const std::vector<Var>& feats) {
    std::vector<Var> out;
    out.reserve(feats.size());
    for (Var f : feats) out.push_back(tape.matvec(p.u_f, f));
    return out;
}

Var attention_scores(Tape& tape, const AttVars& p, Var h_prev,
                     const std::vector<Var>& projected) {
    if (projected.empty()) throw std::invalid_argument("attention over empty feature list");
    Var hw = tape.matvec(p.w_h, h_prev);
    std::vector<Var> scores;
    scores.reserve(projected.size());
    for (Var pf : projected) {
        scores.push_back(tape.dot(p.w, tape.tanh(tape.add({hw, pf, p.b}))));
    }
    return tape.softmax(tape.concat(scores));
}

Var attention_weights(Tape& tape, const AttVars& p, Var h_prev,
                      const std::vector<Var>& feats) {
    return attention_scores(tape, p, h_prev, project_feats(tape, p, feats));
}

Var attend(Tape& tape, const AttVars& p, Var h_prev, const std::vector<Var>& feats) {
    return tape.convex_combine(attention_weights(tape, p, h_prev, feats), feats);
}

std::pair<Var, Var> decoder_step(Tape& tape, const DecVars& p, Var h_prev, Var phi_f,
                                 Var phi_o, int word_in, Var dropout_mask) {
    Var x_w = tape.row(p.embedding, word_in);
    Var z = tape.sigmoid(tape.add({tape.matvec(p.w_vz, phi_f), tape.matvec(p.w_oz, phi_o),
                                   tape.matvec(p.w_dz, x_w), tape.matvec(p.u_dz, h_prev)}));
    Var r = tape.sigmoid(tape.add({tape.matvec(p.w_vr, phi_f), tape.matvec(p.w_or, phi_o),
                                   tape.matvec(p.w_dr, x_w), tape.matvec(p.u_dr, h_prev)}));
    Var candidate = tape.tanh(tape.add({tape.matvec(p.w_vh, phi_f),
                                        tape.matvec(p.w_oh, phi_o),
                                        tape.matvec(p.u_dh, tape.mul(r, h_prev))}));
    Var h = tape.add(tape.mul(tape.affine(z, -1.0, 1.0), h_prev),
                     tape.mul(z, candidate));
    Var h_out = dropout_mask.valid() ? tape.mul(h, dropout_mask) : h;
    Var logits = tape.add(tape.matvec(p.out_w, h_out), p.out_b);
    return {h, logits};
}

std::vector<Var> decode_train_sequence(Tape& tape, const DecVars& p,
                                       const std::vector<std::vector<Var>>& object_vlads,
                                       const std::vector<Var>& frame_vlads,
                                       const std::vector<int>& gold_inputs, int max_steps,
                                       const std::vector<Var>& dropout_masks) {
    if (gold_inputs.empty() || gold_inputs.front() != kBosToken) {
        throw std::invalid_argument("gold sequence must begin with BOS");
    }
    if (static_cast<int>(gold_inputs.size()) > max_steps) {
        throw std::invalid_argument("gold sequence exceeds the decoder step limit");
    }
    if (!dropout_masks.empty() && dropout_masks.size() != gold_inputs.size()) {
        throw std::invalid_argument("need one dropout mask per decoding step");
    }
    if (frame_vlads.empty() || object_vlads.empty()) {
        throw std::invalid_argument("decoder requires frame and object features");
    }

    int hidden = tape.value(p.u_dz).dim(0);
    Var h = tape.leaf(Tensor({hidden}));

    // Feature projections are h-independent; hoist them out of the step loop.
    std::vector<Var> proj_frame = project_feats(tape, p.att_frame, frame_vlads);
    std::vector<std::vector<Var>> proj_obj;
    proj_obj.reserve(object_vlads.size());
    for (const std::vector<Var>& traj : object_vlads) {
        if (traj.size() != frame_vlads.size()) {
            throw std::invalid_argument("object and frame sequences must share T");
        }
        proj_obj.push_back(project_feats(tape, p.att_obj_temp, traj));
    }

    std::vector<Var> all_logits;
    all_logits.reserve(gold_inputs.size());
    for (std::size_t l = 0; l < gold_inputs.size(); ++l) {
        std::vector<Var> phis;
        phis.reserve(object_vlads.size());
        for (std::size_t i = 0; i < object_vlads.size(); ++i) {
            Var beta = attention_scores(tape, p.att_obj_temp, h, proj_obj[i]);
            phis.push_back(tape.convex_combine(beta, object_vlads[i]));
        }
        Var phi_o = attend(tape, p.att_obj, h, phis);
        Var beta_f = attention_scores(tape, p.att_frame, h, proj_frame);
        Var phi_f = tape.convex_combine(beta_f, frame_vlads);
        Var mask = dropout_masks.empty() ? Var{} : dropout_masks[l];
        auto [h_next, logits] = decoder_step(tape, p, h, phi_f, phi_o, gold_inputs[l], mask);
        h = h_next;
        all_logits.push_back(logits);
    }
    return all_logits;
}

Tensor attention_weights(const AttentionParameters& p, const Tensor& h_prev,
                         const std::vector<Tensor>& feats) {
    Tape tape;
    AttVars v{tape.leaf(p.w), tape.leaf(p.w_h), tape.leaf(p.u_f), tape.leaf(p.b)};
    std::vector<Var> fs;
    for (const Tensor& f : feats) fs.push_back(tape.leaf(f));
    return tape.value(attention_weights(tape, v, tape.leaf(h_prev), fs));
}

namespace {

Tensor attend_value(const AttentionParameters& p, const Tensor& h_prev,
                    const std::vector<Tensor>& feats) {
    Tape tape;
    AttVars v{tape.leaf(p.w), tape.leaf(p.w_h), tape.leaf(p.u_f), tape.leaf(p.b)};
    std::vector<Var> fs;
    for (const Tensor& f : feats) fs.push_back(tape.leaf(f));
    return tape.value(attend(tape, v, tape.leaf(h_prev), fs));
}

}  // namespace

Tensor temporal_attend(const AttentionParameters& p, const Tensor& h_prev,
                       const std::vector<Tensor>& vlads) {
    return attend_value(p, h_prev, vlads);
}

Tensor object_attend(const AttentionParameters& p, const Tensor& h_prev,
                     const std::vector<Tensor>& phis) {
    return attend_value(p, h_prev, phis);
}

std::pair<DecoderState, Tensor> decoder_step(const DecoderParameters& p,
                                             const DecoderState& state, const Tensor& phi_f,
                                             const Tensor& phi_o, int word_in) {
    Tape tape;
    DecVars v = bind(tape, p, false);
    Tensor h0 = state.h.empty() ? Tensor({p.hidden()}) : state.h;
    auto [h, logits] = decoder_step(tape, v, tape.leaf(h0), tape.leaf(phi_f),
                                    tape.leaf(phi_o), word_in);
    return {DecoderState{tape.value(h), state.step_index + 1}, tape.value(logits)};
}

std::pair<DecoderState, Tensor> decode_step_full(const DecoderParameters& p,
                                                 const DecoderState& state,
                                                 const std::vector<std::vector<Tensor>>& object_vlads,
                                                 const std::vector<Tensor>& frame_vlads,
                                                 int word_in) {
    Tape tape;
    DecVars v = bind(tape, p, false);
    Tensor h0 = state.h.empty() ? Tensor({p.hidden()}) : state.h;
    Var h = tape.leaf(h0);

    std::vector<Var> phis;
    for (const std::vector<Tensor>& traj : object_vlads) {
        std::vector<Var> fs;
        for (const Tensor& f : traj) fs.push_back(tape.leaf(f));
        phis.push_back(attend(tape, v.att_obj_temp, h, fs));
    }
    Var phi_o = attend(tape, v.att_obj, h, phis);
    std::vector<Var> frames;
    for (const Tensor& f : frame_vlads) frames.push_back(tape.leaf(f));
    Var phi_f = attend(tape, v.att_frame, h, frames);

    auto [h_next, logits] = decoder_step(tape, v, h, phi_f, phi_o, word_in);
    return {DecoderState{tape.value(h_next), state.step_index + 1}, tape.value(logits)};
}

Tensor word_distribution(const Tensor& logits) {
    if (logits.rank() != 1) throw std::invalid_argument("logits must be a vector");
    Tensor out = logits;
    double m = out[0];
    for (std::int64_t i = 1; i < out.size(); ++i) m = std::max(m, out[i]);
    double s = 0.0;
    for (std::int64_t i = 0; i < out.size(); ++i) {
        out[i] = std::exp(out[i] - m);
        s += out[i];
    }
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] /= s;
    return out;
}

std::vector<Tensor> decode_train_sequence(const DecoderParameters& p,
                                          const std::vector<std::vector<Tensor>>& object_vlads,
                                          const std::vector<Tensor>& frame_vlads,
                                          const std::vector<int>& gold_inputs, int max_steps) {
    Tape tape;
    DecVars v = bind(tape, p, false);
    std::vector<std::vector<Var>> objs;
    for (const std::vector<Tensor>& traj : object_vlads) {
        std::vector<Var> fs;
        for (const Tensor& f : traj) fs.push_back(tape.leaf(f));
        objs.push_back(std::move(fs));
    }
    std::vector<Var> frames;
    for (const Tensor& f : frame_vlads) frames.push_back(tape.leaf(f));
    std::vector<Tensor> out;
    for (Var l : decode_train_sequence(tape, v, objs, frames, gold_inputs, max_steps)) {
        out.push_back(tape.value(l));
    }
    return out;
}

}  // namespace trajcap::dec
