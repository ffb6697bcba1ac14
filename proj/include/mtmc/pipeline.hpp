#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "mtmc/fuse.hpp"
#include "mtmc/lift.hpp"
#include "mtmc/sct.hpp"
#include "mtmc/spatial.hpp"
#include "mtmc/temporal.hpp"

namespace mtmc::pipeline {

enum class Aggregation {
    Fixed,   // class-mean box at the track's top-down location
    Late3D,  // lift + DBSCAN + box fit + fusion
};

struct PipelineConfig {
    int embedding_dim = 0;  // 0 = infer from data and enforce consistency
    int pedestrian_class_id = 0;
    sct::SctParams sct;
    spatial::SpatialParams spatial;
    temporal::TemporalParams temporal;
    lift::LiftParams lift;
    fuse::FuseParams fuse;
    Aggregation aggregation = Aggregation::Late3D;
    bool yaw_refine = true;
    bool mask_erosion = true;
    bool bypass_sct = false;  // require precomputed local IDs
    double corrupt_cluster_rate = 0.0;  // stress knob: random member swaps after clustering
    std::uint64_t corrupt_seed = 0;
    int workers = 0;  // OpenMP threads; 0 = library default

    static PipelineConfig from_json_file(const std::string& path);
    static PipelineConfig from_json(const nlohmann::json& j);
    nlohmann::ordered_json to_json() const;
    void validate() const;
};

enum class RunMode { TwoD, ThreeD };

struct RunStats {
    int frames = 0;
    int detections = 0;
    int clusters = 0;
    int splits = 0;
    int reactivations = 0;
    int fusion_groups = 0;  // groups with >= 2 boxes
    int fallback_boxes = 0;
    int spawned = 0;
    int confirmed = 0;
    int removed = 0;
    int lost = 0;
    int rows_written = 0;
};

// Frame-ordered online run over a scene directory (calibration.json,
// detections.jsonl, class_stats.json, plus masks.jsonl and depth/ for 3D).
// Results are appended and flushed per frame so an interrupted run leaves a
// valid prefix. log_path, when nonempty, receives one JSON line per frame
// with counters and lifecycle events. inspect_frame >= 0 fills inspect_out
// with that frame's per-stage dump.
RunStats run_scene(const std::string& scene_dir, const PipelineConfig& cfg, RunMode mode,
                   const std::string& out_path, const std::string& log_path = "",
                   int inspect_frame = -1, nlohmann::json* inspect_out = nullptr);

} // namespace mtmc::pipeline
