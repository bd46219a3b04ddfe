#include "trajcap/training.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "trajcap/decoder.hpp"
#include "trajcap/error.hpp"

namespace trajcap::train {

using nlohmann::json;

std::string to_string(RunDirection d) {
    switch (d) {
        case RunDirection::forward: return "forward";
        case RunDirection::backward: return "backward";
        case RunDirection::both: return "both";
    }
    throw std::invalid_argument("bad RunDirection");
}

std::string to_string(FusionMode m) {
    return m == FusionMode::mean ? "mean" : "geometric";
}

RunDirection run_direction_from_string(const std::string& s) {
    if (s == "forward") return RunDirection::forward;
    if (s == "backward") return RunDirection::backward;
    if (s == "both") return RunDirection::both;
    throw std::invalid_argument("direction must be forward, backward, or both (got '" + s +
                                "')");
}

FusionMode fusion_mode_from_string(const std::string& s) {
    if (s == "mean") return FusionMode::mean;
    if (s == "geometric") return FusionMode::geometric;
    throw std::invalid_argument("fusion must be mean or geometric (got '" + s + "')");
}

void TrainConfig::validate() const {
    // learning_rate 0 is allowed: it turns train_step into a loss probe.
    if (learning_rate < 0.0) throw std::invalid_argument("learning_rate must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0,1)");
    if (grad_clip <= 0.0) throw std::invalid_argument("grad_clip must be positive");
    if (max_sentence_len < 1) throw std::invalid_argument("max_sentence_len must be positive");
    if (frames < 1) throw std::invalid_argument("frames must be positive");
    if (regions < 1) throw std::invalid_argument("regions must be positive");
    if (clusters < 1) throw std::invalid_argument("clusters must be positive");
    if (hidden < 1) throw std::invalid_argument("hidden must be positive");
    if (embed < 1) throw std::invalid_argument("embed must be positive");
    if (attention < 1) throw std::invalid_argument("attention must be positive");
    if (beam < 1) throw std::invalid_argument("beam must be positive");
    if (kernel_size < 1 || kernel_size % 2 == 0) {
        throw std::invalid_argument("kernel_size must be odd and positive");
    }
}

std::string to_json(const TrainConfig& c) {
    json j;
    j["learning_rate"] = c.learning_rate;
    j["batch_size"] = c.batch_size;
    j["dropout"] = c.dropout;
    j["grad_clip"] = c.grad_clip;
    j["max_sentence_len"] = c.max_sentence_len;
    j["frames"] = c.frames;
    j["regions"] = c.regions;
    j["clusters"] = c.clusters;
    j["hidden"] = c.hidden;
    j["embed"] = c.embed;
    j["attention"] = c.attention;
    j["beam"] = c.beam;
    j["kernel_size"] = c.kernel_size;
    j["seed"] = c.seed;
    j["direction"] = to_string(c.direction);
    j["fusion"] = to_string(c.fusion);
    j["assignment_softmax"] = c.assignment_softmax;
    j["share_vlad"] = c.share_vlad;
    return j.dump();
}

TrainConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    TrainConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "learning_rate") c.learning_rate = value;
            else if (key == "batch_size") c.batch_size = value;
            else if (key == "dropout") c.dropout = value;
            else if (key == "grad_clip") c.grad_clip = value;
            else if (key == "max_sentence_len") c.max_sentence_len = value;
            else if (key == "frames") c.frames = value;
            else if (key == "regions") c.regions = value;
            else if (key == "clusters") c.clusters = value;
            else if (key == "hidden") c.hidden = value;
            else if (key == "embed") c.embed = value;
            else if (key == "attention") c.attention = value;
            else if (key == "beam") c.beam = value;
            else if (key == "kernel_size") c.kernel_size = value;
            else if (key == "seed") c.seed = value;
            else if (key == "direction") c.direction = run_direction_from_string(value);
            else if (key == "fusion") c.fusion = fusion_mode_from_string(value);
            else if (key == "assignment_softmax") c.assignment_softmax = value;
            else if (key == "share_vlad") c.share_vlad = value;
            else throw std::invalid_argument("unknown config field: " + key);
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config field has wrong type: ") + e.what());
    }
    c.validate();
    return c;
}

model::ModelDims dims_for(const TrainConfig& c, int channels, int vocab_size) {
    model::ModelDims dims;
    dims.clusters = c.clusters;
    dims.channels = channels;
    dims.hidden = c.hidden;
    dims.embed = c.embed;
    dims.attention = c.attention;
    dims.vocab = vocab_size;
    dims.kernel_size = c.kernel_size;
    return dims;
}

DirectionFeatures gather_direction(const btg::VideoSample& video,
                                   const btg::TrajectorySet& trajectories, btg::Direction d) {
    const auto& trajs =
        d == btg::Direction::forward ? trajectories.forward : trajectories.backward;
    const auto& order =
        d == btg::Direction::forward ? trajectories.frame_forward : trajectories.frame_backward;
    DirectionFeatures out;
    out.objects.reserve(trajs.size());
    for (const auto& traj : trajs) {
        std::vector<Tensor> maps;
        maps.reserve(traj.steps.size());
        for (const auto& step : traj.steps) {
            const auto& frame = video.frames[static_cast<std::size_t>(step.frame_index - 1)];
            maps.push_back(frame.regions[static_cast<std::size_t>(step.region_index - 1)]
                               .feature_map);
        }
        out.objects.push_back(std::move(maps));
    }
    out.frames.reserve(order.size());
    for (int f : order) {
        out.frames.push_back(video.frames[static_cast<std::size_t>(f - 1)].global_feature_map);
    }
    return out;
}

VideoFeatures gather_features(const btg::VideoSample& video) {
    btg::TrajectorySet set = btg::build_bidirectional_trajectories(video);
    VideoFeatures out;
    out.video_id = video.video_id;
    out.forward = gather_direction(video, set, btg::Direction::forward);
    out.backward = gather_direction(video, set, btg::Direction::backward);
    return out;
}

ad::Var masked_cross_entropy(ad::Tape& tape,
                             const std::vector<std::vector<ad::Var>>& logit_rows,
                             const std::vector<std::vector<int>>& targets,
                             const std::vector<std::vector<bool>>& masks) {
    if (logit_rows.size() != targets.size() || targets.size() != masks.size()) {
        throw std::invalid_argument("masked_cross_entropy: batch sizes disagree");
    }
    std::vector<ad::Var> terms;
    for (std::size_t s = 0; s < logit_rows.size(); ++s) {
        if (logit_rows[s].size() != targets[s].size() ||
            targets[s].size() != masks[s].size()) {
            throw std::invalid_argument("masked_cross_entropy: sequence lengths disagree");
        }
        for (std::size_t l = 0; l < logit_rows[s].size(); ++l) {
            if (masks[s][l]) {
                terms.push_back(tape.cross_entropy(logit_rows[s][l], targets[s][l]));
            }
        }
    }
    if (terms.empty()) {
        throw std::invalid_argument("masked_cross_entropy: every position is masked");
    }
    return tape.affine(tape.add(terms), 1.0 / static_cast<double>(terms.size()), 0.0);
}

double masked_cross_entropy(const std::vector<std::vector<Tensor>>& logit_rows,
                            const std::vector<std::vector<int>>& targets,
                            const std::vector<std::vector<bool>>& masks) {
    ad::Tape tape;
    std::vector<std::vector<ad::Var>> rows(logit_rows.size());
    for (std::size_t s = 0; s < logit_rows.size(); ++s) {
        for (const Tensor& t : logit_rows[s]) rows[s].push_back(tape.leaf(t));
    }
    return tape.value(masked_cross_entropy(tape, rows, targets, masks))[0];
}

void clip_gradients(std::vector<Tensor>& grads, double limit) {
    if (limit <= 0.0) throw std::invalid_argument("clip limit must be positive");
    for (Tensor& g : grads) {
        for (std::int64_t i = 0; i < g.size(); ++i) {
            if (g[i] > limit) g[i] = limit;
            else if (g[i] < -limit) g[i] = -limit;
        }
    }
}

AdamOptimizer::AdamOptimizer(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
    if (learning_rate < 0.0) throw std::invalid_argument("learning rate must be >= 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
        throw std::invalid_argument("Adam betas must be in [0,1)");
    }
    if (epsilon <= 0.0) throw std::invalid_argument("Adam epsilon must be positive");
}

void AdamOptimizer::step(const std::vector<std::pair<std::string, Tensor*>>& params,
                         const std::vector<Tensor>& grads) {
    if (params.size() != grads.size()) {
        throw std::invalid_argument("Adam: parameter/gradient count mismatch");
    }
    if (m_.empty()) {
        m_.reserve(params.size());
        v_.reserve(params.size());
        for (const auto& [name, t] : params) {
            m_.push_back(Tensor::zeros_like(*t));
            v_.push_back(Tensor::zeros_like(*t));
        }
    } else if (m_.size() != params.size()) {
        throw std::invalid_argument("Adam: parameter set changed between steps");
    }
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i].second;
        const Tensor& g = grads[i];
        if (!p.same_shape(g)) {
            throw std::invalid_argument("Adam: gradient shape mismatch for " + params[i].first);
        }
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (std::int64_t j = 0; j < p.size(); ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            double m_hat = m[j] / bc1;
            double v_hat = v[j] / bc2;
            p[j] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
        }
    }
}

BoundModel bind_model(ad::Tape& tape, model::CaptionModel& m, bool needs_grad) {
    m.validate();
    BoundModel b;
    auto params = m.parameters();
    b.leaves.reserve(params.size());
    for (auto& [name, t] : params) b.leaves.push_back(tape.leaf(*t, needs_grad));

    const std::size_t vlad_stride = 7;  // six C-GRU kernels + centers
    auto vlad_at = [&](std::size_t i, agg::CGruVars& cgru, ad::Var& centers) {
        std::size_t base = i * vlad_stride;
        cgru = agg::cgru_vars(b.leaves, base);
        centers = b.leaves[base + 6];
    };
    std::size_t n_vlads = m.vlads.size();
    std::size_t dec_base = n_vlads * vlad_stride;
    std::size_t dec_count = (params.size() - dec_base) / 2;

    vlad_at(0, b.forward.object_cgru, b.forward.object_centers);
    vlad_at(1, b.forward.frame_cgru, b.forward.frame_centers);
    vlad_at(m.share_vlad ? 0 : 2, b.backward.object_cgru, b.backward.object_centers);
    vlad_at(m.share_vlad ? 1 : 3, b.backward.frame_cgru, b.backward.frame_centers);
    b.forward.decoder = dec::dec_vars(b.leaves, dec_base);
    b.backward.decoder = dec::dec_vars(b.leaves, dec_base + dec_count);
    return b;
}

EncodedDirectionVars encode_direction(ad::Tape& tape, const BoundDirection& bound,
                                      const DirectionFeatures& feats, bool assignment_softmax) {
    auto encode = [&](const agg::CGruVars& cgru, ad::Var centers,
                      const std::vector<Tensor>& maps) {
        std::vector<ad::Var> xs;
        xs.reserve(maps.size());
        for (const Tensor& x : maps) xs.push_back(tape.leaf(x));
        std::vector<ad::Var> descs =
            agg::encode_sequence(tape, cgru, centers, xs, assignment_softmax);
        std::vector<ad::Var> flat;
        flat.reserve(descs.size());
        for (ad::Var d : descs) {
            flat.push_back(tape.reshape(d, {static_cast<int>(tape.value(d).size())}));
        }
        return flat;
    };
    EncodedDirectionVars out;
    out.object_vlads.reserve(feats.objects.size());
    for (const auto& traj : feats.objects) {
        out.object_vlads.push_back(encode(bound.object_cgru, bound.object_centers, traj));
    }
    out.frame_vlads = encode(bound.frame_cgru, bound.frame_centers, feats.frames);
    return out;
}

namespace {

// Inverted dropout mask: entries 0 with probability rate, otherwise
// 1/(1-rate). Draw order is fixed by the caller's loop structure.
Tensor draw_dropout_mask(int hidden, double rate, Rng& rng) {
    Tensor mask({hidden});
    double keep_scale = 1.0 / (1.0 - rate);
    for (int i = 0; i < hidden; ++i) {
        mask.at(i) = rng.uniform() < rate ? 0.0 : keep_scale;
    }
    return mask;
}

}  // namespace

ad::Var batch_loss(ad::Tape& tape, const BoundModel& bound,
                   const std::vector<TrainExample>& batch, const TrainConfig& config,
                   Rng* dropout_rng) {
    config.validate();
    if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");

    std::vector<btg::Direction> dirs;
    if (config.direction != RunDirection::backward) dirs.push_back(btg::Direction::forward);
    if (config.direction != RunDirection::forward) dirs.push_back(btg::Direction::backward);

    bool use_dropout = dropout_rng != nullptr && config.dropout > 0.0;
    int hidden = static_cast<int>(tape.value(bound.forward.decoder.u_dz).dim(0));

    std::vector<std::vector<std::vector<ad::Var>>> logit_rows(dirs.size());
    std::vector<std::vector<int>> targets;
    std::vector<std::vector<bool>> masks;

    for (const TrainExample& ex : batch) {
        if (ex.features == nullptr) throw std::invalid_argument("batch_loss: missing features");
        if (ex.tokens.size() < 2 || ex.tokens.size() != ex.mask.size() + 1) {
            throw std::invalid_argument("batch_loss: bad token/mask layout");
        }
        // Trim the padded tail: decode only up to the last real target.
        int last = -1;
        for (std::size_t l = 0; l < ex.mask.size(); ++l) {
            if (ex.mask[l]) last = static_cast<int>(l);
        }
        int len = last + 1;
        std::vector<int> inputs(ex.tokens.begin(), ex.tokens.begin() + len);
        targets.emplace_back(ex.tokens.begin() + 1, ex.tokens.begin() + 1 + len);
        masks.emplace_back(ex.mask.begin(), ex.mask.begin() + len);

        for (std::size_t di = 0; di < dirs.size(); ++di) {
            if (len == 0) {  // fully padded example: nothing to predict
                logit_rows[di].emplace_back();
                continue;
            }
            const DirectionFeatures& feats = dirs[di] == btg::Direction::forward
                                                 ? ex.features->forward
                                                 : ex.features->backward;
            const BoundDirection& bd =
                dirs[di] == btg::Direction::forward ? bound.forward : bound.backward;
            EncodedDirectionVars enc =
                encode_direction(tape, bd, feats, config.assignment_softmax);
            std::vector<ad::Var> dropout_masks;
            if (use_dropout) {
                dropout_masks.reserve(static_cast<std::size_t>(len));
                for (int l = 0; l < len; ++l) {
                    dropout_masks.push_back(
                        tape.leaf(draw_dropout_mask(hidden, config.dropout, *dropout_rng)));
                }
            }
            logit_rows[di].push_back(dec::decode_train_sequence(tape, bd.decoder,
                                                                enc.object_vlads,
                                                                enc.frame_vlads, inputs, len,
                                                                dropout_masks));
        }
    }

    std::vector<ad::Var> direction_losses;
    direction_losses.reserve(dirs.size());
    for (std::size_t di = 0; di < dirs.size(); ++di) {
        direction_losses.push_back(masked_cross_entropy(tape, logit_rows[di], targets, masks));
    }
    return tape.add(direction_losses);
}

double batch_loss_value(model::CaptionModel& m, const std::vector<TrainExample>& batch,
                        const TrainConfig& config) {
    ad::Tape tape;
    BoundModel bound = bind_model(tape, m, false);
    ad::Var loss = batch_loss(tape, bound, batch, config, nullptr);
    return tape.value(loss)[0];
}

double train_step(model::CaptionModel& m, const std::vector<TrainExample>& batch,
                  const TrainConfig& config, AdamOptimizer& opt, Rng& dropout_rng) {
    ad::Tape tape;
    BoundModel bound = bind_model(tape, m, true);
    Rng* rng = config.dropout > 0.0 ? &dropout_rng : nullptr;
    ad::Var loss = batch_loss(tape, bound, batch, config, rng);
    double loss_value = tape.value(loss)[0];
    if (!std::isfinite(loss_value)) throw NumericError("non-finite training loss");
    tape.backward(loss);

    auto params = m.parameters();
    std::vector<Tensor> grads;
    grads.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor g = tape.grad(bound.leaves[i]);
        if (!g.all_finite()) {
            throw NumericError("non-finite gradient in " + params[i].first);
        }
        grads.push_back(std::move(g));
    }
    clip_gradients(grads, config.grad_clip);
    opt.step(params, grads);
    return loss_value;
}

void save_checkpoint(const std::string& path, Checkpoint& ckpt) {
    ckpt.config.validate();
    ckpt.model.validate();
    auto params = ckpt.model.parameters();

    json header;
    header["format"] = "trajcap-checkpoint";
    header["version"] = 1;
    header["step"] = ckpt.step;
    header["channels"] = ckpt.channels;
    header["config"] = json::parse(to_json(ckpt.config));
    header["vocab"] = ckpt.vocab.tokens();
    json plist = json::array();
    for (auto& [name, t] : params) {
        plist.push_back({{"name", name}, {"shape", t->shape()}});
    }
    header["params"] = plist;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path);
    out << header.dump() << '\n';
    std::vector<char> buf;
    for (auto& [name, t] : params) {
        buf.resize(static_cast<std::size_t>(t->size()) * 4);
        for (std::int64_t i = 0; i < t->size(); ++i) {
            float f = static_cast<float>((*t)[i]);
            std::memcpy(buf.data() + 4 * i, &f, 4);
        }
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    if (!out) throw DataError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    std::string header_line;
    if (!std::getline(in, header_line)) throw DataError("checkpoint missing header: " + path);
    json header;
    try {
        header = json::parse(header_line);
    } catch (const json::exception&) {
        throw DataError("malformed checkpoint header: " + path);
    }

    Checkpoint ckpt;
    std::vector<std::pair<std::string, std::vector<int>>> declared;
    try {
        if (header.at("format") != "trajcap-checkpoint" || header.at("version") != 1) {
            throw DataError("not a supported checkpoint file: " + path);
        }
        ckpt.config = config_from_json(header.at("config").dump());
        ckpt.channels = header.at("channels");
        ckpt.step = header.at("step");
        ckpt.vocab =
            Vocabulary::from_token_list(header.at("vocab").get<std::vector<std::string>>());
        for (const auto& p : header.at("params")) {
            declared.emplace_back(p.at("name"), p.at("shape").get<std::vector<int>>());
        }
    } catch (const json::exception& e) {
        throw DataError("incomplete checkpoint header: " + std::string(e.what()));
    } catch (const std::invalid_argument& e) {
        throw DataError("invalid checkpoint header: " + std::string(e.what()));
    }

    model::ModelDims dims = dims_for(ckpt.config, ckpt.channels, ckpt.vocab.size());
    ckpt.model = model::CaptionModel::init(dims, 0, ckpt.config.share_vlad);
    auto params = ckpt.model.parameters();
    if (declared.size() != params.size()) {
        throw DataError("checkpoint declares " + std::to_string(declared.size()) +
                        " parameters, model has " + std::to_string(params.size()));
    }
    std::vector<char> buf;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& [name, t] = params[i];
        if (declared[i].first != name || declared[i].second != t->shape()) {
            throw DataError("checkpoint parameter mismatch at " + name);
        }
        buf.resize(static_cast<std::size_t>(t->size()) * 4);
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
            throw DataError("checkpoint truncated in " + name);
        }
        for (std::int64_t j = 0; j < t->size(); ++j) {
            float f;
            std::memcpy(&f, buf.data() + 4 * j, 4);
            (*t)[j] = static_cast<double>(f);
        }
    }
    char extra;
    in.read(&extra, 1);
    if (in.gcount() != 0) throw DataError("trailing bytes after checkpoint payload: " + path);
    return ckpt;
}

FdReport finite_difference_check(model::CaptionModel& m, const std::vector<TrainExample>& batch,
                                 const TrainConfig& config, double eps) {
    std::vector<Tensor> analytic;
    {
        ad::Tape tape;
        BoundModel bound = bind_model(tape, m, true);
        ad::Var loss = batch_loss(tape, bound, batch, config, nullptr);
        tape.backward(loss);
        auto params = m.parameters();
        analytic.reserve(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            analytic.push_back(tape.grad(bound.leaves[i]));
        }
    }

    auto params = m.parameters();
    FdReport report;
    for (std::size_t gi = 0; gi < params.size(); ++gi) {
        auto& [name, t] = params[gi];
        FdGroupReport gr;
        gr.name = name;
        for (std::int64_t j = 0; j < t->size(); ++j) {
            double orig = (*t)[j];
            (*t)[j] = orig + eps;
            double up = batch_loss_value(m, batch, config);
            (*t)[j] = orig - eps;
            double down = batch_loss_value(m, batch, config);
            (*t)[j] = orig;
            double numeric = (up - down) / (2.0 * eps);
            double ana = analytic[gi][j];
            double abs_err = std::fabs(ana - numeric);
            double denom = std::max({std::fabs(ana), std::fabs(numeric), 1e-4});
            gr.max_abs_error = std::max(gr.max_abs_error, abs_err);
            gr.max_rel_error = std::max(gr.max_rel_error, abs_err / denom);
        }
        report.max_rel_error = std::max(report.max_rel_error, gr.max_rel_error);
        report.groups.push_back(std::move(gr));
    }
    return report;
}

}  // namespace trajcap::train
