#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtmc/geometry.hpp"
#include "mtmc/ingest.hpp"

namespace mtmc::synth {

struct ClassSpec {
    int class_id = 0;
    int count = 0;
    double length = 1.0, width = 1.0, height = 1.0;  // true cuboid dims, meters
    double speed = 1.0;                              // m/s along the path
    bool pedestrian = false;                         // emits keypoints, cosine clustering
};

struct OcclusionWindow {
    int target = 0;  // target index (0-based)
    int camera = 0;
    int from = 0, to = 0;  // [from, to) frames with no visibility in that camera
};

struct NoiseConfig {
    double miss_rate = 0.0;
    double box_jitter_px = 0.0;
    double embed_noise = 0.0;          // per-observation gaussian sigma before renorm
    double embed_inter_overlap = 0.0;  // blend toward a shared vector (raises inter-id cosine)
    double id_switch_rate = 0.0;       // per (camera, frame): persistent local-id swap injection
    std::vector<OcclusionWindow> occlusions;
};

// Fully seeds the scene: same config -> byte-identical output directory.
struct ScenarioConfig {
    std::uint64_t seed = 1;
    int frames = 100;
    double fps = 30.0;
    int image_width = 640;
    int image_height = 360;
    int embedding_dim = 64;
    int camera_count = 4;
    double camera_ring_radius = 80.0;
    double camera_height = 80.0;
    double camera_focal = 4100.0;
    double arena_half_x = 3.0;
    double arena_half_y = 2.25;
    bool axis_aligned_paths = true;  // Manhattan legs; headings stay axis-aligned
    double wander_radius = 0.6;      // waypoint spread around each target's home point
    double waypoint_grid = 0.0;      // > 0 snaps waypoints to this grid (leg lengths quantized)
    int waypoints = 8;
    std::vector<ClassSpec> classes;
    NoiseConfig noise;
    bool emit_depth = true;
    bool emit_masks = true;
    bool emit_keypoints = true;
    bool emit_local_ids = false;  // write stable per-camera local_track_id (bypass mode)
    double stats_epsilon = 0.0;       // optional overrides copied into the stats file
    double stats_spatial_gate = 0.0;
    double stats_cluster_cut = 0.0;

    static ScenarioConfig from_json_file(const std::string& path);
    void to_json_file(const std::string& path) const;
    void validate() const;
};

// Yaw-rotated cuboid resting on the ground plane.
struct Obb {
    double cx = 0.0, cy = 0.0, cz = 0.0;
    double hl = 0.0, hw = 0.0, hh = 0.0;  // half extents
    double yaw = 0.0;
};

struct TargetPose {
    double x = 0.0, y = 0.0;
    double yaw = 0.0;
};

// Piecewise-linear waypoint loop walked at constant speed.
class Trajectory {
public:
    Trajectory(std::vector<std::pair<double, double>> polyline, double speed, double fps);
    TargetPose pose(int frame) const;

private:
    std::vector<std::pair<double, double>> pts_;
    std::vector<double> cum_;  // cumulative arc length
    double speed_, fps_, total_ = 0.0;
};

struct Target {
    int index = 0;  // GT global id = index + 1
    ClassSpec cls;
    Trajectory traj;

    Obb obb_at(int frame) const;
};

std::vector<geom::CameraCalibration> make_cameras(const ScenarioConfig& cfg);
std::vector<Target> make_targets(const ScenarioConfig& cfg);

// Planar depth (camera-frame Z) of the ray through pixel (u, v) against one
// cuboid; empty when the ray misses.
std::optional<double> obb_ray_depth(const geom::CameraCalibration& calib, double u, double v,
                                    const Obb& obb);

struct RenderedFrame {
    ingest::DepthMap depth;           // sentinel 0 where no target is hit
    std::vector<std::int16_t> winner; // per-pixel target index, -1 = none
};

// Exact analytic z-buffer over the given targets. Row-parallel; output is
// independent of thread count.
RenderedFrame render_depth_frame(const geom::CameraCalibration& calib,
                                 const std::vector<Obb>& target_boxes,
                                 const std::vector<char>& visible);

struct GenSummary {
    int cameras = 0;
    int targets = 0;
    int frames = 0;
    int detections = 0;
};

// Writes calibration.json, detections.jsonl, masks.jsonl, class_stats.json,
// gt.txt, scenario.json and depth/*.dpth into out_dir.
GenSummary generate(const ScenarioConfig& cfg, const std::string& out_dir);

} // namespace mtmc::synth
