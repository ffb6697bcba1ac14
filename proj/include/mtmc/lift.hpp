#pragma once

#include <vector>

#include "mtmc/box3d.hpp"
#include "mtmc/geometry.hpp"
#include "mtmc/ingest.hpp"

namespace mtmc::lift {

struct LiftParams {
    int min_samples = 50;      // DBSCAN core threshold, all classes
    int pixel_stride = 1;      // mask-pixel subsampling (>1 trades accuracy for speed)
    double eps_scale = 0.12;   // epsilon = clamp(eps_scale * mean dim diagonal, ...)
    double eps_min = 0.05;
    double eps_max = 0.5;
    double alpha_lower = 0.7;  // volume sanity bounds, relative to class mean volume
    double alpha_upper = 1.5;
};

struct CloudPoint {
    double x = 0.0, y = 0.0, z = 0.0;
    int camera_id = 0;
};

// World-frame point cloud of one globally-ID'd target at one frame.
struct TargetCloud {
    std::vector<CloudPoint> points;
    double score = 0.0;  // mean of the source detections' 2D scores
    int class_id = 0;
    int global_id = 0;
};

struct LiftInput {
    const ingest::Detection2D* detection = nullptr;
    const ingest::Bitmap* mask = nullptr;        // decoded (and eroded) mask
    const ingest::DepthMap* depth = nullptr;
    const geom::CameraCalibration* calib = nullptr;
};

// Back-projects every set mask pixel with non-sentinel depth into the world
// frame, concatenated across the target's cameras (ascending camera id,
// row-major pixel order). Returns an empty cloud when no pixel is usable.
TargetCloud lift_target(const std::vector<LiftInput>& inputs, int class_id, int global_id,
                        const LiftParams& params);

// DBSCAN over 3D points; label -1 = noise. Core point: >= min_samples points
// (self included) within epsilon. Uses a uniform grid for neighbor search and
// OpenMP for the per-point neighborhood pass; labels are deterministic
// (insertion-order BFS) regardless of thread count.
std::vector<int> dbscan(const std::vector<CloudPoint>& points, double epsilon, int min_samples);

// Class-specific epsilon: larger for smaller classes, from the mean-dims
// diagonal unless the stats file pins a value.
double epsilon_for_class(int class_id, const ingest::ClassStats& stats, const LiftParams& params);

struct FitResult {
    Box3D box;
    bool fallback = false;      // no usable cluster; class-mean box at the top-down location
    bool dims_replaced = false; // volume sanity swapped dims for class means
};

// Axis-aligned box fit over the largest DBSCAN cluster: mean x/y center,
// p95-p5 extents (linear interpolation), height = max z, z-center = height/2,
// followed by the volume sanity check against the class mean volume.
// (fallback_x, fallback_y) anchors the class-mean fallback box.
FitResult fit_box(const TargetCloud& cloud, const std::vector<int>& labels,
                  const ingest::ClassStats& stats, const LiftParams& params, double fallback_x,
                  double fallback_y);

} // namespace mtmc::lift
