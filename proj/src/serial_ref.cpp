#include "mtmc/serial_ref.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>

#include "mtmc/geometry.hpp"

namespace mtmc::serial {

std::vector<int> dbscan(const std::vector<lift::CloudPoint>& points, double epsilon, int min_samples) {
    const std::size_t n = points.size();
    const double eps2 = epsilon * epsilon;
    std::vector<int> labels(n, -1);
    std::vector<char> visited(n, 0);

    auto region_query = [&](std::size_t i) {
        std::vector<std::size_t> nb;
        for (std::size_t j = 0; j < n; ++j) {
            const double dx = points[i].x - points[j].x;
            const double dy = points[i].y - points[j].y;
            const double dz = points[i].z - points[j].z;
            if (dx * dx + dy * dy + dz * dz <= eps2) nb.push_back(j);
        }
        return nb;
    };

    int cluster = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (visited[i]) continue;
        visited[i] = 1;
        auto seeds = region_query(i);
        if (seeds.size() < static_cast<std::size_t>(min_samples)) continue;  // noise (may become border)
        const int cid = cluster++;
        labels[i] = cid;
        std::deque<std::size_t> queue(seeds.begin(), seeds.end());
        while (!queue.empty()) {
            const std::size_t q = queue.front();
            queue.pop_front();
            if (labels[q] == -1) labels[q] = cid;
            if (visited[q]) continue;
            visited[q] = 1;
            auto q_nb = region_query(q);
            if (q_nb.size() >= static_cast<std::size_t>(min_samples))
                for (std::size_t r : q_nb) queue.push_back(r);
        }
    }
    return labels;
}

ingest::Bitmap erode(const ingest::Bitmap& bmp) {
    ingest::Bitmap out;
    out.width = bmp.width;
    out.height = bmp.height;
    out.data.assign(bmp.data.size(), 0);
    for (int y = 0; y < bmp.height; ++y)
        for (int x = 0; x < bmp.width; ++x) {
            bool all = true;
            for (int dy = -1; dy <= 1 && all; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= bmp.width || ny >= bmp.height || !bmp.at(nx, ny)) {
                        all = false;
                        break;
                    }
                }
            if (all) out.set(x, y, 1);
        }
    return out;
}

lift::TargetCloud lift_target(const std::vector<lift::LiftInput>& inputs, int class_id, int global_id,
                              const lift::LiftParams& params) {
    lift::TargetCloud cloud;
    cloud.class_id = class_id;
    cloud.global_id = global_id;
    std::vector<lift::LiftInput> ordered = inputs;
    std::sort(ordered.begin(), ordered.end(), [](const lift::LiftInput& a, const lift::LiftInput& b) {
        return a.calib->camera_id < b.calib->camera_id;
    });
    const int stride = std::max(1, params.pixel_stride);
    double score_sum = 0.0;
    for (const auto& in : ordered) {
        score_sum += in.detection->score;
        for (int y = 0; y < in.mask->height; y += stride)
            for (int x = 0; x < in.mask->width; x += stride) {
                const float z = in.depth->at(x, y);
                if (!in.mask->at(x, y) || !(z > 0.0f)) continue;
                const Vec3 cam = geom::backproject_pixel(x, y, z, *in.calib);
                const Vec3 world = geom::camera_to_world(cam, *in.calib);
                cloud.points.push_back({world.x, world.y, world.z, in.calib->camera_id});
            }
    }
    if (!ordered.empty()) cloud.score = score_sum / static_cast<double>(ordered.size());
    return cloud;
}

synth::RenderedFrame render_depth_frame(const geom::CameraCalibration& calib,
                                        const std::vector<synth::Obb>& target_boxes,
                                        const std::vector<char>& visible) {
    synth::RenderedFrame out;
    out.depth.camera_id = calib.camera_id;
    out.depth.width = calib.image_width;
    out.depth.height = calib.image_height;
    out.depth.values.assign(static_cast<std::size_t>(calib.image_width) * calib.image_height, 0.0f);
    out.winner.assign(out.depth.values.size(), -1);
    for (std::size_t ti = 0; ti < target_boxes.size(); ++ti) {
        if (!visible[ti]) continue;
        for (int y = 0; y < calib.image_height; ++y)
            for (int x = 0; x < calib.image_width; ++x) {
                const auto d = synth::obb_ray_depth(calib, x, y, target_boxes[ti]);
                if (!d) continue;
                const std::size_t idx = static_cast<std::size_t>(y) * calib.image_width + x;
                const float fz = static_cast<float>(*d);
                if (out.depth.values[idx] == 0.0f || fz < out.depth.values[idx]) {
                    out.depth.values[idx] = fz;
                    out.winner[idx] = static_cast<std::int16_t>(ti);
                }
            }
    }
    return out;
}

fuse::FuseOutput fuse_boxes(const std::vector<Box3D>& boxes, double thr) {
    fuse::FuseOutput out;
    const std::size_t n = boxes.size();
    if (n == 0) return out;

    // step 1: sort descending by volume
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double va = boxes[a].volume(), vb = boxes[b].volume();
        if (va != vb) return va > vb;
        return boxes[a].global_id < boxes[b].global_id;
    });

    // step 2: group/fused lists plus the used flags
    std::vector<char> used(n, 0);

    // steps 3-6: seed each group with the first unused box, absorb every
    // later box whose IoA with the seed exceeds thr, fuse volume-weighted
    bool all_used = false;
    while (!all_used) {
        all_used = true;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t bi = order[i];
            if (used[bi]) continue;
            all_used = false;
            used[bi] = 1;
            std::vector<std::size_t> group{bi};
            for (std::size_t j = i + 1; j < n; ++j) {
                const std::size_t bj = order[j];
                if (used[bj]) continue;
                const Box3D& a = boxes[bi];
                const Box3D& b = boxes[bj];
                const double ix =
                    std::max(0.0, std::min(a.x + a.length / 2, b.x + b.length / 2) -
                                      std::max(a.x - a.length / 2, b.x - b.length / 2));
                const double iy = std::max(0.0, std::min(a.y + a.width / 2, b.y + b.width / 2) -
                                                    std::max(a.y - a.width / 2, b.y - b.width / 2));
                const double iz = std::max(0.0, std::min(a.z + a.height / 2, b.z + b.height / 2) -
                                                    std::max(a.z - a.height / 2, b.z - b.height / 2));
                const double ioa = (ix * iy * iz) / std::min(a.volume(), b.volume());
                if (ioa > thr) {
                    group.push_back(bj);
                    used[bj] = 1;
                }
            }
            double vsum = 0.0;
            Box3D fused;
            int min_id = boxes[group.front()].global_id;
            for (std::size_t k : group) {
                const double v = boxes[k].volume();
                vsum += v;
                fused.x += v * boxes[k].x;
                fused.y += v * boxes[k].y;
                fused.z += v * boxes[k].z;
                fused.length += v * boxes[k].length;
                fused.width += v * boxes[k].width;
                fused.height += v * boxes[k].height;
                min_id = std::min(min_id, boxes[k].global_id);
            }
            fused.x /= vsum;
            fused.y /= vsum;
            fused.z /= vsum;
            fused.length /= vsum;
            fused.width /= vsum;
            fused.height /= vsum;
            fused.global_id = min_id;
            for (std::size_t k : group)
                if (boxes[k].global_id == min_id) {
                    fused.score = boxes[k].score;
                    fused.class_id = boxes[k].class_id;
                    fused.yaw = boxes[k].yaw;
                    break;
                }
            out.boxes.push_back(fused);
            out.groups.emplace_back(group.begin(), group.end());
            break;  // restart the scan after closing a group
        }
    }
    return out;
}

double iou3d_monte_carlo(const Box3D& a, const Box3D& b, std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    const double ca = std::cos(a.yaw), sa = std::sin(a.yaw);
    const double cb = std::cos(b.yaw), sb = std::sin(b.yaw);
    std::size_t inside = 0;
    for (std::size_t i = 0; i < samples; ++i) {
        // point uniform inside a, in a's local frame
        const double lx = u(rng) * a.length;
        const double ly = u(rng) * a.width;
        const double lz = u(rng) * a.height;
        const double wx = a.x + ca * lx - sa * ly;
        const double wy = a.y + sa * lx + ca * ly;
        const double wz = a.z + lz;
        // test membership in b
        const double dx = wx - b.x, dy = wy - b.y, dz = wz - b.z;
        const double bx = cb * dx + sb * dy;
        const double by = -sb * dx + cb * dy;
        if (std::abs(bx) <= b.length / 2 && std::abs(by) <= b.width / 2 && std::abs(dz) <= b.height / 2)
            ++inside;
    }
    const double inter = a.volume() * static_cast<double>(inside) / static_cast<double>(samples);
    const double uni = a.volume() + b.volume() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

} // namespace mtmc::serial
