#include "trajcap/model.hpp"

#include <stdexcept>

#include "trajcap/vocab.hpp"

namespace trajcap::model {

void ModelDims::validate() const {
    if (clusters < 1 || channels < 1 || hidden < 1 || embed < 1 || attention < 1) {
        throw std::invalid_argument("model dimensions must be positive");
    }
    if (vocab < kNumReservedTokens) {
        throw std::invalid_argument("vocabulary smaller than the reserved token set");
    }
    if (kernel_size < 1 || kernel_size % 2 == 0) {
        throw std::invalid_argument("kernel size must be odd and positive");
    }
}

VladModel VladModel::init(const ModelDims& dims, Rng& rng) {
    VladModel m;
    m.cgru = agg::CGruParameters::init(dims.kernel_size, dims.channels, dims.clusters, rng);
    m.codebook = agg::ClusterCodebook::init(dims.clusters, dims.channels, rng);
    return m;
}

CaptionModel CaptionModel::init(const ModelDims& dims, std::uint64_t seed, bool share_vlad) {
    dims.validate();
    Rng rng(seed);
    CaptionModel m;
    m.dims = dims;
    m.share_vlad = share_vlad;
    int n_vlads = share_vlad ? 2 : 4;
    m.vlads.reserve(static_cast<std::size_t>(n_vlads));
    for (int i = 0; i < n_vlads; ++i) m.vlads.push_back(VladModel::init(dims, rng));
    m.dec_fwd = dec::DecoderParameters::init(dims.vocab, dims.embed, dims.hidden,
                                             dims.attention, dims.feat(), rng);
    m.dec_bwd = dec::DecoderParameters::init(dims.vocab, dims.embed, dims.hidden,
                                             dims.attention, dims.feat(), rng);
    return m;
}

// Storage order: shared -> {object, frame}; otherwise
// {object_forward, frame_forward, object_backward, frame_backward}.
VladModel& CaptionModel::object_vlad(btg::Direction d) {
    return vlads[(share_vlad || d == btg::Direction::forward) ? 0 : 2];
}

VladModel& CaptionModel::frame_vlad(btg::Direction d) {
    return vlads[(share_vlad || d == btg::Direction::forward) ? 1 : 3];
}

const VladModel& CaptionModel::object_vlad(btg::Direction d) const {
    return vlads[(share_vlad || d == btg::Direction::forward) ? 0 : 2];
}

const VladModel& CaptionModel::frame_vlad(btg::Direction d) const {
    return vlads[(share_vlad || d == btg::Direction::forward) ? 1 : 3];
}

std::vector<std::pair<std::string, Tensor*>> CaptionModel::parameters() {
    std::vector<std::pair<std::string, Tensor*>> out;
    const char* shared_prefixes[] = {"vlad.object.", "vlad.frame."};
    const char* split_prefixes[] = {"vlad.object_forward.", "vlad.frame_forward.",
                                    "vlad.object_backward.", "vlad.frame_backward."};
    for (std::size_t i = 0; i < vlads.size(); ++i) {
        std::string prefix = share_vlad ? shared_prefixes[i] : split_prefixes[i];
        for (auto& [name, t] : agg::named_tensors(vlads[i].cgru)) {
            out.emplace_back(prefix + name, t);
        }
        out.emplace_back(prefix + "centers", &vlads[i].codebook.centers);
    }
    for (auto& [name, t] : dec::named_tensors(dec_fwd)) {
        out.emplace_back("decoder.forward." + name, t);
    }
    for (auto& [name, t] : dec::named_tensors(dec_bwd)) {
        out.emplace_back("decoder.backward." + name, t);
    }
    return out;
}

std::int64_t CaptionModel::parameter_count() {
    std::int64_t n = 0;
    for (auto& [name, t] : parameters()) n += t->size();
    return n;
}

void CaptionModel::validate() const {
    dims.validate();
    if (vlads.size() != (share_vlad ? 2u : 4u)) {
        throw std::invalid_argument("unexpected VLAD model count");
    }
    for (const auto& v : vlads) {
        v.cgru.validate();
        if (v.cgru.kernel_size() != dims.kernel_size || v.cgru.channels() != dims.channels ||
            v.cgru.clusters() != dims.clusters) {
            throw std::invalid_argument("C-GRU shape inconsistent with model dims");
        }
        if (v.codebook.clusters() != dims.clusters || v.codebook.channels() != dims.channels) {
            throw std::invalid_argument("codebook shape inconsistent with model dims");
        }
    }
    for (const dec::DecoderParameters* d : {&dec_fwd, &dec_bwd}) {
        d->validate();
        if (d->vocab() != dims.vocab || d->embed() != dims.embed ||
            d->hidden() != dims.hidden || d->feat() != dims.feat()) {
            throw std::invalid_argument("decoder shape inconsistent with model dims");
        }
    }
}

}  // namespace trajcap::model
