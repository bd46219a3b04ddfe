#include "trajcap/btg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace trajcap::btg {

namespace {

double l2_distance(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b) || a.rank() != 1) {
        throw std::invalid_argument("appearance vectors must be 1-D with equal dimension");
    }
    double s = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace

BoundingBox::BoundingBox(double x0, double y0, double x1, double y1)
    : x_min(x0), y_min(y0), x_max(x1), y_max(y1) {
    if (!(x_max > x_min) || !(y_max > y_min)) {
        throw std::invalid_argument("bounding box must have positive extent");
    }
}

int VideoSample::num_regions() const {
    return frames.empty() ? 0 : static_cast<int>(frames.front().regions.size());
}

void VideoSample::validate() const {
    if (frames.empty()) throw std::invalid_argument("video has no frames");
    const FrameDetections& f0 = frames.front();
    if (f0.regions.empty()) throw std::invalid_argument("frames carry no regions");
    const Tensor& map0 = f0.regions.front().feature_map;
    const Tensor& app0 = f0.regions.front().appearance;
    if (map0.rank() != 3) throw std::invalid_argument("feature maps must be [H,W,D]");
    if (app0.rank() != 1) throw std::invalid_argument("appearance must be a vector");
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const FrameDetections& f = frames[t];
        if (f.frame_index != static_cast<int>(t) + 1) {
            throw std::invalid_argument("frame_index must run 1..T in order");
        }
        if (f.regions.size() != f0.regions.size()) {
            throw std::invalid_argument("region count differs across frames");
        }
        if (!f.global_feature_map.same_shape(map0)) {
            throw std::invalid_argument("global feature map dimensions differ across frames");
        }
        for (const ObjectRegion& r : f.regions) {
            if (!r.feature_map.same_shape(map0)) {
                throw std::invalid_argument("region feature map dimensions differ");
            }
            if (!r.appearance.same_shape(app0)) {
                throw std::invalid_argument("appearance dimension differs");
            }
        }
    }
}

double appearance_similarity(const Tensor& g_i, const Tensor& g_j,
                             double max_pair_distance) {
    if (max_pair_distance < 0.0) {
        throw std::invalid_argument("max_pair_distance must be non-negative");
    }
    double d = l2_distance(g_i, g_j);
    if (max_pair_distance == 0.0) return 1.0;
    return std::exp(-d / max_pair_distance);
}

double iou_similarity(const BoundingBox& a, const BoundingBox& b) {
    double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    double inter = ix * iy;
    return inter / (a.area() + b.area() - inter);
}

double area_similarity(const BoundingBox& a, const BoundingBox& b) {
    double lo = std::min(a.area(), b.area());
    double hi = std::max(a.area(), b.area());
    return std::exp(-std::fabs(lo / hi - 1.0));
}

double region_similarity(const ObjectRegion& r_i, const ObjectRegion& r_j,
                         double max_pair_distance) {
    return (appearance_similarity(r_i.appearance, r_j.appearance, max_pair_distance) +
            iou_similarity(r_i.box, r_j.box) + area_similarity(r_i.box, r_j.box)) /
           3.0;
}

double max_appearance_distance(const FrameDetections& a, const FrameDetections& b) {
    double m = 0.0;
    for (const ObjectRegion& ra : a.regions) {
        for (const ObjectRegion& rb : b.regions) {
            m = std::max(m, l2_distance(ra.appearance, rb.appearance));
        }
    }
    return m;
}

std::vector<int> align_to_anchors(const FrameDetections& anchor_frame,
                                  const FrameDetections& other_frame) {
    double maxd = max_appearance_distance(anchor_frame, other_frame);
    std::vector<int> assignment;
    assignment.reserve(anchor_frame.regions.size());
    for (const ObjectRegion& anchor : anchor_frame.regions) {
        int best = 0;
        double best_score = -1.0;
        for (std::size_t j = 0; j < other_frame.regions.size(); ++j) {
            double s = region_similarity(anchor, other_frame.regions[j], maxd);
            if (s > best_score) {
                best_score = s;
                best = static_cast<int>(j);
            }
        }
        assignment.push_back(best);
    }
    return assignment;
}

TrajectorySet build_bidirectional_trajectories(const VideoSample& video) {
    video.validate();
    int T = video.num_frames();
    int N = video.num_regions();
    TrajectorySet set;

    for (int i = 0; i < N; ++i) {
        set.forward.push_back(Trajectory{i + 1, Direction::forward,
                                         {TrajectoryStep{1, i + 1}}});
        set.backward.push_back(Trajectory{i + 1, Direction::backward,
                                          {TrajectoryStep{T, i + 1}}});
    }
    for (int t = 2; t <= T; ++t) {
        std::vector<int> assign = align_to_anchors(video.frames[0],
                                                   video.frames[static_cast<std::size_t>(t) - 1]);
        for (int i = 0; i < N; ++i) {
            set.forward[static_cast<std::size_t>(i)].steps.push_back(
                TrajectoryStep{t, assign[static_cast<std::size_t>(i)] + 1});
        }
    }
    for (int t = T - 1; t >= 1; --t) {
        std::vector<int> assign = align_to_anchors(video.frames[static_cast<std::size_t>(T) - 1],
                                                   video.frames[static_cast<std::size_t>(t) - 1]);
        for (int i = 0; i < N; ++i) {
            set.backward[static_cast<std::size_t>(i)].steps.push_back(
                TrajectoryStep{t, assign[static_cast<std::size_t>(i)] + 1});
        }
    }

    set.frame_forward.resize(static_cast<std::size_t>(T));
    set.frame_backward.resize(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        set.frame_forward[static_cast<std::size_t>(t)] = t + 1;
        set.frame_backward[static_cast<std::size_t>(t)] = T - t;
    }
    return set;
}

std::string trajectory_set_to_json(const std::string& video_id,
                                   const TrajectorySet& set) {
    nlohmann::json j;
    j["video_id"] = video_id;
    auto emit = [](const std::vector<Trajectory>& trajs) {
        nlohmann::json arr = nlohmann::json::array();
        for (const Trajectory& tr : trajs) {
            nlohmann::json steps = nlohmann::json::array();
            for (const TrajectoryStep& s : tr.steps) {
                steps.push_back({s.frame_index, s.region_index});
            }
            arr.push_back({{"anchor", tr.anchor_index}, {"steps", std::move(steps)}});
        }
        return arr;
    };
    j["forward"] = emit(set.forward);
    j["backward"] = emit(set.backward);
    return j.dump();
}

}  // namespace trajcap::btg
