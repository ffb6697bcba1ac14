#pragma once

#include <array>
#include <vector>

#include "mtmc/ingest.hpp"

namespace mtmc::sct {

struct SctParams {
    double lambda = 0.7;         // weight of the IoU term in the match cost
    double iou_min = 0.1;
    double app_max = 0.4;        // max appearance cosine distance
    double alpha_ema = 0.9;      // appearance EMA retention
    int max_age = 30;            // frames a track may coast before retiring
    double process_noise_pos = 1.0;
    double process_noise_vel = 0.25;
    double meas_noise = 1.0;
    int pedestrian_class_id = 0;
    double kp_conf = 0.5;
    std::array<int, 2> ankle_indices{10, 11};  // CrowdPose layout
};

// Constant-velocity box state (cx, cy, w, h, vx, vy, vw, vh), unit time step.
struct LocalTrack {
    int camera_id = 0;
    int local_id = 0;
    std::array<double, 8> state{};
    std::array<double, 64> cov{};
    std::vector<double> appearance;  // unit norm
    int age = 0;
    int hits = 0;
    int misses = 0;
    double foot_u = 0.0, foot_v = 0.0;

    std::array<double, 4> predicted_box() const;  // x1,y1,x2,y2 from the state
};

// Foot point: ankle midpoint for pedestrians with confident ankles,
// bottom-middle of the box otherwise.
std::pair<double, double> select_foot_point(const ingest::Detection2D& det, const SctParams& params);

// One tracker instance per camera. Not thread safe; instances are
// independent and may run concurrently.
class CameraTracker {
public:
    CameraTracker(int camera_id, const SctParams& params) : camera_id_(camera_id), params_(params) {}

    // Associates this frame's detections with live tracks and returns
    // (detection index, local id) pairs covering every input detection.
    // When every detection carries local_track_id, those are passed through
    // untouched (bypass mode).
    std::vector<std::pair<int, int>> step(const std::vector<ingest::Detection2D>& detections);

    const std::vector<LocalTrack>& tracks() const { return tracks_; }
    int camera_id() const { return camera_id_; }

private:
    int camera_id_;
    SctParams params_;
    std::vector<LocalTrack> tracks_;
    int next_local_id_ = 1;
};

} // namespace mtmc::sct
