#pragma once

#include <string>
#include <vector>

#include "trajcap/tensor.hpp"

namespace trajcap::btg {

/// Axis-aligned box in pixel coordinates. Construction enforces strictly
/// positive extent, so area() is always > 0.
struct BoundingBox {
    double x_min, y_min, x_max, y_max;

    BoundingBox(double x0, double y0, double x1, double y1);

    double area() const { return (x_max - x_min) * (y_max - y_min); }
};

struct ObjectRegion {
    BoundingBox box;
    Tensor appearance;   // [G] pooled descriptor used for similarity
    Tensor feature_map;  // [H,W,D] local conv features, consumed downstream
};

struct FrameDetections {
    int frame_index = 0;  // 1-based
    std::vector<ObjectRegion> regions;
    Tensor global_feature_map;  // [H,W,D]
};

struct VideoSample {
    std::string video_id;
    std::vector<FrameDetections> frames;  // ordered, frame_index 1..T

    int num_frames() const { return static_cast<int>(frames.size()); }
    int num_regions() const;
    /// Throws std::invalid_argument on inconsistent frame numbering, region
    /// counts, or feature dimensions.
    void validate() const;
};

enum class Direction { forward, backward };

struct TrajectoryStep {
    int frame_index;   // 1-based
    int region_index;  // 1-based
    bool operator==(const TrajectoryStep&) const = default;
};

struct Trajectory {
    int anchor_index = 0;  // 1-based
    Direction direction = Direction::forward;
    std::vector<TrajectoryStep> steps;  // T entries, anchor frame first for
                                        // backward, last frame first
};

struct TrajectorySet {
    std::vector<Trajectory> forward;   // N, anchored at frame 1
    std::vector<Trajectory> backward;  // N, anchored at frame T
    std::vector<int> frame_forward;    // 1..T
    std::vector<int> frame_backward;   // T..1
};

/// exp(-L2(g_i, g_j) / max_pair_distance); returns 1.0 when the normalizer is
/// zero (every pair identical).
double appearance_similarity(const Tensor& g_i, const Tensor& g_j,
                             double max_pair_distance);

double iou_similarity(const BoundingBox& a, const BoundingBox& b);

/// exp(-|min(A_a, A_b) / max(A_a, A_b) - 1|)
double area_similarity(const BoundingBox& a, const BoundingBox& b);

/// Arithmetic mean of appearance, IoU, and area similarities.
double region_similarity(const ObjectRegion& r_i, const ObjectRegion& r_j,
                         double max_pair_distance);

/// Max Euclidean distance over all region appearance pairs between two frames.
double max_appearance_distance(const FrameDetections& a, const FrameDetections& b);

/// For each anchor region, the 0-based index of the most similar region in
/// other_frame. Ties go to the lowest index; anchors are assigned
/// independently, so one region may serve several anchors.
std::vector<int> align_to_anchors(const FrameDetections& anchor_frame,
                                  const FrameDetections& other_frame);

/// N forward trajectories anchored at frame 1, N backward anchored at frame T,
/// plus the two global frame orderings.
TrajectorySet build_bidirectional_trajectories(const VideoSample& video);

/// {video_id, forward:[{anchor, steps:[[frame,region],...]}], backward:[...]},
/// 1-indexed throughout.
std::string trajectory_set_to_json(const std::string& video_id,
                                   const TrajectorySet& set);

}  // namespace trajcap::btg
