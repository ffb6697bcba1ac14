#pragma once

#include <deque>
#include <map>
#include <vector>

#include "mtmc/box3d.hpp"

namespace mtmc::fuse {

struct FuseParams {
    double thr = 0.1;          // IoA grouping threshold
    int yaw_period = 10;       // frames between yaw samples
    double yaw_min_dist = 0.15;  // meters of travel required to update yaw
};

// Intersection over the smaller volume, axis-aligned extents (fusion runs on
// pre-refinement boxes, so yaw is ignored here).
double ioa3d(const Box3D& a, const Box3D& b);

struct FuseOutput {
    std::vector<Box3D> boxes;
    std::vector<std::vector<int>> groups;  // input indices per fused box
};

// Volume-weighted duplicate merging: boxes sorted by descending volume seed
// greedy groups (membership tested against the seed), fused center/dims are
// volume-weighted means, identity fields come from the minimum global id in
// the group.
FuseOutput fuse(const std::vector<Box3D>& boxes, const FuseParams& params);

// Per-track world positions feeding trajectory-heading yaw estimation.
class TrackHistory {
public:
    // Records this frame's position, then returns the track's current yaw:
    // refreshed from the displacement over the last yaw_period frames when
    // the frame index is a period multiple and the travel exceeds the
    // distance threshold.
    double refine_yaw(int global_id, int frame, double x, double y, const FuseParams& params);

    double current_yaw(int global_id) const;

private:
    struct Entry {
        std::deque<std::tuple<int, double, double>> samples;  // (frame, x, y)
        double yaw = 0.0;
    };
    std::map<int, Entry> tracks_;
};

} // namespace mtmc::fuse
