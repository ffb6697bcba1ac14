#include "mtmc/fuse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mtmc::fuse {

namespace {

double interval_overlap(double ca, double ea, double cb, double eb) {
    // centers and full extents
    const double lo = std::max(ca - ea / 2.0, cb - eb / 2.0);
    const double hi = std::min(ca + ea / 2.0, cb + eb / 2.0);
    return std::max(0.0, hi - lo);
}

} // namespace

double ioa3d(const Box3D& a, const Box3D& b) {
    const double ix = interval_overlap(a.x, a.length, b.x, b.length);
    const double iy = interval_overlap(a.y, a.width, b.y, b.width);
    const double iz = interval_overlap(a.z, a.height, b.z, b.height);
    const double inter = ix * iy * iz;
    const double denom = std::min(a.volume(), b.volume());
    if (denom <= 0.0) return 0.0;
    return inter / denom;
}

FuseOutput fuse(const std::vector<Box3D>& boxes, const FuseParams& params) {
    FuseOutput out;
    const std::size_t n = boxes.size();
    if (n == 0) return out;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (boxes[a].volume() != boxes[b].volume()) return boxes[a].volume() > boxes[b].volume();
        return boxes[a].global_id < boxes[b].global_id;
    });

    std::vector<char> used(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t seed = order[i];
        if (used[seed]) continue;
        used[seed] = 1;
        std::vector<std::size_t> group{seed};
        for (std::size_t j = i + 1; j < n; ++j) {
            const std::size_t cand = order[j];
            if (used[cand]) continue;
            if (ioa3d(boxes[seed], boxes[cand]) > params.thr) {
                group.push_back(cand);
                used[cand] = 1;
            }
        }

        double vol_sum = 0.0;
        Box3D fused;
        fused.global_id = boxes[group.front()].global_id;
        for (std::size_t k : group) {
            const double v = boxes[k].volume();
            vol_sum += v;
            fused.x += v * boxes[k].x;
            fused.y += v * boxes[k].y;
            fused.z += v * boxes[k].z;
            fused.length += v * boxes[k].length;
            fused.width += v * boxes[k].width;
            fused.height += v * boxes[k].height;
            fused.global_id = std::min(fused.global_id, boxes[k].global_id);
        }
        fused.x /= vol_sum;
        fused.y /= vol_sum;
        fused.z /= vol_sum;
        fused.length /= vol_sum;
        fused.width /= vol_sum;
        fused.height /= vol_sum;
        // score, class and yaw follow the box carrying the fused id
        for (std::size_t k : group)
            if (boxes[k].global_id == fused.global_id) {
                fused.score = boxes[k].score;
                fused.class_id = boxes[k].class_id;
                fused.yaw = boxes[k].yaw;
                break;
            }
        std::vector<int> group_int(group.begin(), group.end());
        out.groups.push_back(std::move(group_int));
        out.boxes.push_back(fused);
    }
    return out;
}

double TrackHistory::refine_yaw(int global_id, int frame, double x, double y, const FuseParams& params) {
    Entry& e = tracks_[global_id];
    e.samples.emplace_back(frame, x, y);
    while (e.samples.size() > static_cast<std::size_t>(params.yaw_period + 1)) e.samples.pop_front();

    if (params.yaw_period > 0 && frame % params.yaw_period == 0) {
        for (const auto& [f, px, py] : e.samples) {
            if (f != frame - params.yaw_period) continue;
            const double dx = x - px;
            const double dy = y - py;
            if (std::sqrt(dx * dx + dy * dy) > params.yaw_min_dist) e.yaw = std::atan2(dy, dx);
            break;
        }
    }
    return e.yaw;
}

double TrackHistory::current_yaw(int global_id) const {
    auto it = tracks_.find(global_id);
    return it == tracks_.end() ? 0.0 : it->second.yaw;
}

} // namespace mtmc::fuse
