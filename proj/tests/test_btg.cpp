#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "trajcap/btg.hpp"
#include "trajcap/tensor.hpp"

#include "json.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace trajcap::btg;
using trajcap::Rng;
using trajcap::Tensor;

namespace {

ObjectRegion make_region(BoundingBox box, std::vector<double> app) {
    int g = static_cast<int>(app.size());
    return ObjectRegion{box, Tensor::from({g}, std::move(app)), Tensor({1, 1, 1})};
}

FrameDetections make_frame(int idx, std::vector<ObjectRegion> regions) {
    return FrameDetections{idx, std::move(regions), Tensor({1, 1, 1})};
}

FrameDetections random_frame(int idx, int n, int g, Rng& rng) {
    std::vector<ObjectRegion> regions;
    for (int i = 0; i < n; ++i) {
        double x0 = rng.uniform(0.0, 50.0), y0 = rng.uniform(0.0, 50.0);
        double w = rng.uniform(1.0, 30.0), h = rng.uniform(1.0, 30.0);
        std::vector<double> app;
        for (int d = 0; d < g; ++d) app.push_back(rng.uniform(-2.0, 2.0));
        regions.push_back(make_region(BoundingBox(x0, y0, x0 + w, y0 + h), std::move(app)));
    }
    return make_frame(idx, std::move(regions));
}

// Test-side re-derivation of the similarity score, written independently of
// the library (plain loops, no shared helpers).
double oracle_similarity(const ObjectRegion& a, const ObjectRegion& b, double maxd) {
    double dist = 0.0;
    for (std::int64_t i = 0; i < a.appearance.size(); ++i) {
        double d = a.appearance[i] - b.appearance[i];
        dist += d * d;
    }
    dist = std::sqrt(dist);
    double s_app = maxd == 0.0 ? 1.0 : std::exp(-dist / maxd);

    double ix0 = a.box.x_min > b.box.x_min ? a.box.x_min : b.box.x_min;
    double ix1 = a.box.x_max < b.box.x_max ? a.box.x_max : b.box.x_max;
    double iy0 = a.box.y_min > b.box.y_min ? a.box.y_min : b.box.y_min;
    double iy1 = a.box.y_max < b.box.y_max ? a.box.y_max : b.box.y_max;
    double inter = 0.0;
    if (ix1 > ix0 && iy1 > iy0) inter = (ix1 - ix0) * (iy1 - iy0);
    double area_a = (a.box.x_max - a.box.x_min) * (a.box.y_max - a.box.y_min);
    double area_b = (b.box.x_max - b.box.x_min) * (b.box.y_max - b.box.y_min);
    double s_iou = inter / (area_a + area_b - inter);

    double ratio = area_a < area_b ? area_a / area_b : area_b / area_a;
    double s_area = std::exp(-std::fabs(ratio - 1.0));
    return (s_app + s_iou + s_area) / 3.0;
}

std::vector<int> oracle_align(const FrameDetections& anchor, const FrameDetections& other) {
    double maxd = 0.0;
    for (const ObjectRegion& ra : anchor.regions) {
        for (const ObjectRegion& rb : other.regions) {
            double dist = 0.0;
            for (std::int64_t i = 0; i < ra.appearance.size(); ++i) {
                double d = ra.appearance[i] - rb.appearance[i];
                dist += d * d;
            }
            dist = std::sqrt(dist);
            if (dist > maxd) maxd = dist;
        }
    }
    std::vector<int> out;
    for (const ObjectRegion& ra : anchor.regions) {
        int best = 0;
        double best_s = oracle_similarity(ra, other.regions[0], maxd);
        for (std::size_t j = 1; j < other.regions.size(); ++j) {
            double s = oracle_similarity(ra, other.regions[j], maxd);
            if (s > best_s) {
                best_s = s;
                best = static_cast<int>(j);
            }
        }
        out.push_back(best);
    }
    return out;
}

}  // namespace

TEST_CASE("bounding box validation and area") {
    BoundingBox b(0, 0, 2, 3);
    CHECK(b.area() == 6.0);
    CHECK_THROWS_AS(BoundingBox(0, 0, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(BoundingBox(0, 2, 1, 1), std::invalid_argument);
}

TEST_CASE("appearance similarity hand values") {
    Tensor z = Tensor::from({2}, {0.0, 0.0});
    Tensor g = Tensor::from({2}, {3.0, 4.0});
    CHECK(appearance_similarity(z, z, 2.0) == 1.0);
    CHECK(appearance_similarity(z, g, 5.0) ==
          doctest::Approx(0.36787944117144233).epsilon(1e-12));
    CHECK(appearance_similarity(z, g, 0.0) == 1.0);
    CHECK_THROWS_AS(appearance_similarity(z, Tensor::from({3}, {1, 2, 3}), 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(appearance_similarity(z, g, -1.0), std::invalid_argument);
}

TEST_CASE("iou similarity hand values") {
    BoundingBox a(0, 0, 2, 2);
    CHECK(iou_similarity(a, a) == 1.0);
    CHECK(iou_similarity(a, BoundingBox(5, 5, 6, 6)) == 0.0);
    CHECK(iou_similarity(a, BoundingBox(1, 0, 3, 2)) ==
          doctest::Approx(0.3333333333333333).epsilon(1e-12));
    // Touching edges count as disjoint.
    CHECK(iou_similarity(a, BoundingBox(2, 0, 4, 2)) == 0.0);
}

TEST_CASE("area similarity hand values") {
    BoundingBox u(0, 0, 1, 1);
    CHECK(area_similarity(u, BoundingBox(7, 7, 8, 8)) == 1.0);
    CHECK(area_similarity(u, BoundingBox(0, 0, 1, 2)) ==
          doctest::Approx(0.6065306597126334).epsilon(1e-12));
    CHECK(area_similarity(u, BoundingBox(0, 0, 2, 2)) ==
          doctest::Approx(0.4723665527410147).epsilon(1e-12));
}

TEST_CASE("region similarity combines the three components") {
    // Components engineered to e^-1, 1/3, e^-0.5.
    ObjectRegion a = make_region(BoundingBox(0, 0, 2, 2), {0.0, 0.0});
    ObjectRegion b = make_region(BoundingBox(0.5, 0, 4.5, 2), {3.0, 4.0});
    CHECK(region_similarity(a, b, 5.0) ==
          doctest::Approx(0.4359144780724697).epsilon(1e-12));
    CHECK(region_similarity(a, a, 5.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(region_similarity(a, b, 5.0) > 0.0);
}

TEST_CASE("region similarity is symmetric under a shared normalizer") {
    Rng rng(101);
    for (int it = 0; it < 200; ++it) {
        FrameDetections f = random_frame(1, 2, 4, rng);
        double maxd = rng.uniform(0.5, 10.0);
        CHECK(region_similarity(f.regions[0], f.regions[1], maxd) ==
              doctest::Approx(region_similarity(f.regions[1], f.regions[0], maxd))
                  .epsilon(1e-12));
    }
}

TEST_CASE("box similarities are translation invariant") {
    Rng rng(102);
    for (int it = 0; it < 200; ++it) {
        double x0 = rng.uniform(0, 10), y0 = rng.uniform(0, 10);
        BoundingBox a(x0, y0, x0 + rng.uniform(1, 5), y0 + rng.uniform(1, 5));
        double u0 = rng.uniform(0, 10), v0 = rng.uniform(0, 10);
        BoundingBox b(u0, v0, u0 + rng.uniform(1, 5), v0 + rng.uniform(1, 5));
        double dx = rng.uniform(-20, 20), dy = rng.uniform(-20, 20);
        BoundingBox a2(a.x_min + dx, a.y_min + dy, a.x_max + dx, a.y_max + dy);
        BoundingBox b2(b.x_min + dx, b.y_min + dy, b.x_max + dx, b.y_max + dy);
        CHECK(iou_similarity(a, b) == doctest::Approx(iou_similarity(a2, b2)).epsilon(1e-12));
        CHECK(area_similarity(a, b) == doctest::Approx(area_similarity(a2, b2)).epsilon(1e-12));
    }
}

TEST_CASE("max appearance distance scans all pairs") {
    FrameDetections a = make_frame(
        1, {make_region(BoundingBox(0, 0, 1, 1), {0.0}),
            make_region(BoundingBox(0, 0, 1, 1), {10.0})});
    FrameDetections b = make_frame(
        2, {make_region(BoundingBox(0, 0, 1, 1), {2.0}),
            make_region(BoundingBox(0, 0, 1, 1), {-3.0})});
    CHECK(max_appearance_distance(a, b) == doctest::Approx(13.0));
}

TEST_CASE("align_to_anchors identity on a self-aligned frame") {
    Rng rng(103);
    FrameDetections f = random_frame(1, 4, 3, rng);
    std::vector<int> got = align_to_anchors(f, f);
    for (int i = 0; i < 4; ++i) CHECK(got[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("align_to_anchors breaks exact ties toward the lowest index") {
    // Identical candidates: every similarity equal, so every anchor takes
    // region 0.
    ObjectRegion r = make_region(BoundingBox(0, 0, 1, 1), {1.0, 1.0});
    FrameDetections anchor = make_frame(1, {r, make_region(BoundingBox(3, 3, 4, 4), {0.0, 1.0})});
    FrameDetections other = make_frame(2, {r, r, r});
    std::vector<int> got = align_to_anchors(anchor, other);
    CHECK(got == std::vector<int>{0, 0});
}

TEST_CASE("align_to_anchors matches a brute-force oracle") {
    Rng rng(104);
    for (int it = 0; it < 200; ++it) {
        int n = 1 + rng.uniform_int(4);
        int g = 1 + rng.uniform_int(5);
        FrameDetections anchor = random_frame(1, n, g, rng);
        FrameDetections other = random_frame(2, n, g, rng);
        CHECK(align_to_anchors(anchor, other) == oracle_align(anchor, other));
    }
}

TEST_CASE("alignment is invariant to a common appearance scale") {
    Rng rng(105);
    for (int it = 0; it < 50; ++it) {
        int n = 2 + rng.uniform_int(3);
        FrameDetections anchor = random_frame(1, n, 4, rng);
        FrameDetections other = random_frame(2, n, 4, rng);
        std::vector<int> base = align_to_anchors(anchor, other);
        double c = rng.uniform(0.1, 10.0);
        FrameDetections anchor2 = anchor, other2 = other;
        for (ObjectRegion& r : anchor2.regions) {
            for (std::int64_t i = 0; i < r.appearance.size(); ++i) r.appearance[i] *= c;
        }
        for (ObjectRegion& r : other2.regions) {
            for (std::int64_t i = 0; i < r.appearance.size(); ++i) r.appearance[i] *= c;
        }
        CHECK(align_to_anchors(anchor2, other2) == base);
    }
}

TEST_CASE("video validation rejects inconsistent inputs") {
    VideoSample v;
    v.video_id = "v";
    CHECK_THROWS_AS(v.validate(), std::invalid_argument);

    Rng rng(106);
    v.frames.push_back(random_frame(1, 2, 3, rng));
    v.frames.push_back(random_frame(3, 2, 3, rng));  // bad index
    CHECK_THROWS_AS(v.validate(), std::invalid_argument);
    v.frames[1].frame_index = 2;
    v.validate();

    v.frames[1].regions.pop_back();
    CHECK_THROWS_AS(v.validate(), std::invalid_argument);
}

TEST_CASE("single-frame video yields mirrored one-step trajectories") {
    Rng rng(107);
    VideoSample v{"v", {random_frame(1, 3, 4, rng)}};
    TrajectorySet set = build_bidirectional_trajectories(v);
    REQUIRE(set.forward.size() == 3);
    REQUIRE(set.backward.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(set.forward[static_cast<std::size_t>(i)].steps ==
              std::vector<TrajectoryStep>{{1, i + 1}});
        CHECK(set.backward[static_cast<std::size_t>(i)].steps ==
              std::vector<TrajectoryStep>{{1, i + 1}});
    }
    CHECK(set.frame_forward == std::vector<int>{1});
    CHECK(set.frame_backward == std::vector<int>{1});
}

TEST_CASE("single-region videos track region 1 everywhere") {
    Rng rng(108);
    VideoSample v{"v", {}};
    for (int t = 1; t <= 4; ++t) v.frames.push_back(random_frame(t, 1, 3, rng));
    TrajectorySet set = build_bidirectional_trajectories(v);
    CHECK(set.forward[0].steps ==
          std::vector<TrajectoryStep>{{1, 1}, {2, 1}, {3, 1}, {4, 1}});
    CHECK(set.backward[0].steps ==
          std::vector<TrajectoryStep>{{4, 1}, {3, 1}, {2, 1}, {1, 1}});
    CHECK(set.frame_forward == std::vector<int>{1, 2, 3, 4});
    CHECK(set.frame_backward == std::vector<int>{4, 3, 2, 1});
}

TEST_CASE("trajectories match a brute-force oracle on random videos") {
    Rng rng(109);
    for (int it = 0; it < 50; ++it) {
        int T = 1 + rng.uniform_int(5);
        int n = 1 + rng.uniform_int(4);
        VideoSample v{"v", {}};
        for (int t = 1; t <= T; ++t) v.frames.push_back(random_frame(t, n, 4, rng));
        TrajectorySet set = build_bidirectional_trajectories(v);

        REQUIRE(static_cast<int>(set.forward.size()) == n);
        REQUIRE(static_cast<int>(set.backward.size()) == n);
        for (int i = 0; i < n; ++i) {
            const Trajectory& fw = set.forward[static_cast<std::size_t>(i)];
            CHECK(fw.anchor_index == i + 1);
            CHECK(fw.direction == Direction::forward);
            REQUIRE(static_cast<int>(fw.steps.size()) == T);
            CHECK(fw.steps[0] == TrajectoryStep{1, i + 1});
            for (int t = 2; t <= T; ++t) {
                std::vector<int> expect =
                    oracle_align(v.frames[0], v.frames[static_cast<std::size_t>(t) - 1]);
                CHECK(fw.steps[static_cast<std::size_t>(t) - 1] ==
                      TrajectoryStep{t, expect[static_cast<std::size_t>(i)] + 1});
            }
            const Trajectory& bw = set.backward[static_cast<std::size_t>(i)];
            CHECK(bw.anchor_index == i + 1);
            CHECK(bw.direction == Direction::backward);
            REQUIRE(static_cast<int>(bw.steps.size()) == T);
            CHECK(bw.steps[0] == TrajectoryStep{T, i + 1});
            for (int t = T - 1; t >= 1; --t) {
                std::vector<int> expect =
                    oracle_align(v.frames[static_cast<std::size_t>(T) - 1],
                                 v.frames[static_cast<std::size_t>(t) - 1]);
                CHECK(bw.steps[static_cast<std::size_t>(T - t)] ==
                      TrajectoryStep{t, expect[static_cast<std::size_t>(i)] + 1});
            }
        }
    }
}

TEST_CASE("reversing the video swaps forward and backward membership") {
    Rng rng(110);
    for (int it = 0; it < 20; ++it) {
        int T = 2 + rng.uniform_int(4);
        int n = 1 + rng.uniform_int(3);
        VideoSample v{"v", {}};
        for (int t = 1; t <= T; ++t) v.frames.push_back(random_frame(t, n, 4, rng));

        VideoSample rev{"v-rev", {}};
        for (int t = T; t >= 1; --t) {
            FrameDetections f = v.frames[static_cast<std::size_t>(t) - 1];
            f.frame_index = T - t + 1;
            rev.frames.push_back(std::move(f));
        }

        TrajectorySet a = build_bidirectional_trajectories(v);
        TrajectorySet b = build_bidirectional_trajectories(rev);
        // forward(reverse(V)) visits the same (original frame, region) pairs
        // as backward(V); reversed frame t' corresponds to original T-t'+1.
        for (int i = 0; i < n; ++i) {
            const auto& fwd_rev = b.forward[static_cast<std::size_t>(i)].steps;
            const auto& bwd = a.backward[static_cast<std::size_t>(i)].steps;
            REQUIRE(fwd_rev.size() == bwd.size());
            for (std::size_t s = 0; s < bwd.size(); ++s) {
                CHECK(T - fwd_rev[s].frame_index + 1 == bwd[s].frame_index);
                CHECK(fwd_rev[s].region_index == bwd[s].region_index);
            }
        }
    }
}

TEST_CASE("trajectory set serializes to 1-indexed json") {
    Rng rng(111);
    VideoSample v{"clip42", {}};
    for (int t = 1; t <= 3; ++t) v.frames.push_back(random_frame(t, 2, 3, rng));
    TrajectorySet set = build_bidirectional_trajectories(v);
    nlohmann::json j = nlohmann::json::parse(trajectory_set_to_json(v.video_id, set));
    CHECK(j["video_id"] == "clip42");
    REQUIRE(j["forward"].size() == 2);
    REQUIRE(j["backward"].size() == 2);
    CHECK(j["forward"][0]["anchor"] == 1);
    CHECK(j["forward"][1]["anchor"] == 2);
    REQUIRE(j["forward"][0]["steps"].size() == 3);
    CHECK(j["forward"][0]["steps"][0][0] == 1);
    CHECK(j["forward"][0]["steps"][0][1] == 1);
    CHECK(j["backward"][0]["steps"][0][0] == 3);
    for (const auto& traj : j["forward"]) {
        for (const auto& s : traj["steps"]) {
            CHECK(s[0].get<int>() >= 1);
            CHECK(s[1].get<int>() >= 1);
        }
    }
}
