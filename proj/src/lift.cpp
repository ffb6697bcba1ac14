#include "mtmc/lift.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>

#include "mtmc/errors.hpp"

namespace mtmc::lift {

TargetCloud lift_target(const std::vector<LiftInput>& inputs, int class_id, int global_id,
                        const LiftParams& params) {
    TargetCloud cloud;
    cloud.class_id = class_id;
    cloud.global_id = global_id;

    std::vector<LiftInput> ordered = inputs;
    std::sort(ordered.begin(), ordered.end(), [](const LiftInput& a, const LiftInput& b) {
        return a.calib->camera_id < b.calib->camera_id;
    });

    const int stride = std::max(1, params.pixel_stride);
    double score_sum = 0.0;
    for (const auto& in : ordered) {
        score_sum += in.detection->score;
        const auto& mask = *in.mask;
        const auto& depth = *in.depth;
        const auto& calib = *in.calib;
        if (mask.width != depth.width || mask.height != depth.height)
            throw DataError("mask and depth grids disagree for camera " +
                            std::to_string(calib.camera_id));

        // pass 1: usable pixels per row
        std::vector<std::size_t> row_counts(static_cast<std::size_t>(mask.height), 0);
#pragma omp parallel for schedule(static)
        for (int y = 0; y < mask.height; y += stride) {
            std::size_t n = 0;
            for (int x = 0; x < mask.width; x += stride)
                if (mask.at(x, y) && depth.at(x, y) > 0.0f) ++n;
            row_counts[static_cast<std::size_t>(y)] = n;
        }
        std::vector<std::size_t> row_offsets(row_counts.size() + 1, 0);
        for (std::size_t y = 0; y < row_counts.size(); ++y)
            row_offsets[y + 1] = row_offsets[y] + row_counts[y];

        const std::size_t base = cloud.points.size();
        cloud.points.resize(base + row_offsets.back());

        // pass 2: fill rows into their reserved slots (order stable)
#pragma omp parallel for schedule(static)
        for (int y = 0; y < mask.height; y += stride) {
            std::size_t w = base + row_offsets[static_cast<std::size_t>(y)];
            for (int x = 0; x < mask.width; x += stride) {
                const float z = depth.at(x, y);
                if (!mask.at(x, y) || !(z > 0.0f)) continue;
                const Vec3 cam = geom::backproject_pixel(static_cast<double>(x), static_cast<double>(y),
                                                         static_cast<double>(z), calib);
                const Vec3 world = geom::camera_to_world(cam, calib);
                cloud.points[w++] = CloudPoint{world.x, world.y, world.z, calib.camera_id};
            }
        }
    }
    if (!ordered.empty()) cloud.score = score_sum / static_cast<double>(ordered.size());
    return cloud;
}

namespace {

inline std::int64_t cell_key(int cx, int cy, int cz) {
    // pack three 21-bit signed cell coordinates
    auto enc = [](int v) { return static_cast<std::int64_t>(v + (1 << 20)) & ((1 << 21) - 1); };
    return enc(cx) | (enc(cy) << 21) | (enc(cz) << 42);
}

} // namespace

std::vector<int> dbscan(const std::vector<CloudPoint>& points, double epsilon, int min_samples) {
    if (!(epsilon > 0.0)) throw ValidationError("dbscan: epsilon must be positive");
    if (min_samples < 1) throw ValidationError("dbscan: min_samples must be >= 1");

    const std::size_t n = points.size();
    std::vector<int> labels(n, -1);
    if (n == 0) return labels;

    // uniform grid with cell size = epsilon
    std::unordered_map<std::int64_t, std::vector<std::uint32_t>> grid;
    grid.reserve(n);
    auto cell_of = [&](const CloudPoint& p) {
        return std::array<int, 3>{static_cast<int>(std::floor(p.x / epsilon)),
                                  static_cast<int>(std::floor(p.y / epsilon)),
                                  static_cast<int>(std::floor(p.z / epsilon))};
    };
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = cell_of(points[i]);
        grid[cell_key(c[0], c[1], c[2])].push_back(static_cast<std::uint32_t>(i));
    }

    const double eps2 = epsilon * epsilon;
    std::vector<std::vector<std::uint32_t>> neighbors(n);
    std::vector<char> core(n, 0);

#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        const auto c = cell_of(points[i]);
        auto& nb = neighbors[i];
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    auto it = grid.find(cell_key(c[0] + dx, c[1] + dy, c[2] + dz));
                    if (it == grid.end()) continue;
                    for (std::uint32_t j : it->second) {
                        const double ddx = points[i].x - points[j].x;
                        const double ddy = points[i].y - points[j].y;
                        const double ddz = points[i].z - points[j].z;
                        if (ddx * ddx + ddy * ddy + ddz * ddz <= eps2) nb.push_back(j);
                    }
                }
        std::sort(nb.begin(), nb.end());
        core[i] = nb.size() >= static_cast<std::size_t>(min_samples);
    }

    // serial expansion in index order: deterministic labels
    int next_label = 0;
    std::vector<std::uint32_t> queue;
    for (std::size_t i = 0; i < n; ++i) {
        if (!core[i] || labels[i] != -1) continue;
        const int cid = next_label++;
        labels[i] = cid;
        queue.clear();
        queue.push_back(static_cast<std::uint32_t>(i));
        while (!queue.empty()) {
            const std::uint32_t p = queue.back();
            queue.pop_back();
            for (std::uint32_t q : neighbors[p]) {
                if (labels[q] != -1) continue;
                labels[q] = cid;
                if (core[q]) queue.push_back(q);
            }
        }
    }
    return labels;
}

double epsilon_for_class(int class_id, const ingest::ClassStats& stats, const LiftParams& params) {
    const auto& e = stats.require(class_id);
    if (e.dbscan_epsilon > 0.0) return e.dbscan_epsilon;
    const double diag = std::sqrt(e.mean_length * e.mean_length + e.mean_width * e.mean_width +
                                  e.mean_height * e.mean_height);
    return std::clamp(params.eps_scale * diag, params.eps_min, params.eps_max);
}

namespace {

// linear interpolation between order statistics over a sorted vector
double percentile_sorted(const std::vector<double>& sorted, double q) {
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double pos = q / 100.0 * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= n) return sorted[n - 1];
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

} // namespace

FitResult fit_box(const TargetCloud& cloud, const std::vector<int>& labels,
                  const ingest::ClassStats& stats, const LiftParams& params, double fallback_x,
                  double fallback_y) {
    const auto& cls = stats.require(cloud.class_id);
    FitResult result;
    result.box.score = cloud.score;
    result.box.class_id = cloud.class_id;
    result.box.global_id = cloud.global_id;
    result.box.yaw = 0.0;

    // pick the largest cluster; ties go to the lowest label
    int best_label = -1;
    std::size_t best_count = 0;
    if (!cloud.points.empty()) {
        int max_label = -1;
        for (int l : labels) max_label = std::max(max_label, l);
        std::vector<std::size_t> counts(static_cast<std::size_t>(max_label + 1), 0);
        for (int l : labels)
            if (l >= 0) ++counts[static_cast<std::size_t>(l)];
        for (int l = 0; l <= max_label; ++l)
            if (counts[static_cast<std::size_t>(l)] > best_count) {
                best_label = l;
                best_count = counts[static_cast<std::size_t>(l)];
            }
    }

    if (best_label < 0) {
        result.fallback = true;
        result.box.x = fallback_x;
        result.box.y = fallback_y;
        result.box.length = cls.mean_length;
        result.box.width = cls.mean_width;
        result.box.height = cls.mean_height;
        result.box.z = cls.mean_height / 2.0;
        return result;
    }

    std::vector<double> xs, ys;
    double zmax = -std::numeric_limits<double>::infinity();
    double sx = 0.0, sy = 0.0;
    xs.reserve(best_count);
    ys.reserve(best_count);
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        if (labels[i] != best_label) continue;
        xs.push_back(cloud.points[i].x);
        ys.push_back(cloud.points[i].y);
        sx += cloud.points[i].x;
        sy += cloud.points[i].y;
        zmax = std::max(zmax, cloud.points[i].z);
    }
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());

    result.box.x = sx / static_cast<double>(xs.size());
    result.box.y = sy / static_cast<double>(ys.size());
    result.box.length = percentile_sorted(xs, 95.0) - percentile_sorted(xs, 5.0);
    result.box.width = percentile_sorted(ys, 95.0) - percentile_sorted(ys, 5.0);
    result.box.height = zmax;
    result.box.z = result.box.height / 2.0;

    const double volume = result.box.volume();
    if (volume < params.alpha_lower * cls.mean_volume || volume > params.alpha_upper * cls.mean_volume) {
        result.dims_replaced = true;
        result.box.length = cls.mean_length;
        result.box.width = cls.mean_width;
        result.box.height = cls.mean_height;
        result.box.z = cls.mean_height / 2.0;
    }
    return result;
}

} // namespace mtmc::lift
