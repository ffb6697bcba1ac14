#include "mtmc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mtmc/errors.hpp"
#include "mtmc/geometry.hpp"
#include "mtmc/ingest.hpp"
#include "mtmc/rng.hpp"

namespace mtmc::pipeline {

namespace {

Aggregation aggregation_from_string(const std::string& s) {
    if (s == "fixed") return Aggregation::Fixed;
    if (s == "late3d") return Aggregation::Late3D;
    throw ValidationError("config: aggregation must be \"fixed\" or \"late3d\", got \"" + s + "\"");
}

temporal::MatchMode mode_from_string(const std::string& s) {
    if (s == "mot_id") return temporal::MatchMode::MotIdConsistency;
    if (s == "appearance") return temporal::MatchMode::AppearanceOnly;
    throw ValidationError("config: temporal.mode must be \"mot_id\" or \"appearance\", got \"" + s +
                          "\"");
}

double normalize_yaw(double yaw) {
    constexpr double pi = 3.14159265358979323846;
    while (yaw > pi) yaw -= 2.0 * pi;
    while (yaw <= -pi) yaw += 2.0 * pi;
    return yaw;
}

} // namespace

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
    PipelineConfig c;
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    c.pedestrian_class_id = j.value("pedestrian_class_id", c.pedestrian_class_id);
    if (j.contains("sct")) {
        const auto& s = j["sct"];
        c.sct.lambda = s.value("lambda", c.sct.lambda);
        c.sct.iou_min = s.value("iou_min", c.sct.iou_min);
        c.sct.app_max = s.value("app_max", c.sct.app_max);
        c.sct.alpha_ema = s.value("alpha_ema", c.sct.alpha_ema);
        c.sct.max_age = s.value("max_age", c.sct.max_age);
        c.sct.process_noise_pos = s.value("process_noise_pos", c.sct.process_noise_pos);
        c.sct.process_noise_vel = s.value("process_noise_vel", c.sct.process_noise_vel);
        c.sct.meas_noise = s.value("meas_noise", c.sct.meas_noise);
        c.sct.kp_conf = s.value("kp_conf", c.sct.kp_conf);
        if (s.contains("ankle_indices")) {
            const auto v = s["ankle_indices"].get<std::vector<int>>();
            if (v.size() != 2) throw ValidationError("config: ankle_indices must have 2 entries");
            c.sct.ankle_indices = {v[0], v[1]};
        }
    }
    if (j.contains("spatial")) {
        const auto& s = j["spatial"];
        c.spatial.app_gate = s.value("app_gate", c.spatial.app_gate);
        c.spatial.spatial_gate = s.value("spatial_gate", c.spatial.spatial_gate);
        c.spatial.ped_cut = s.value("ped_cut", c.spatial.ped_cut);
        c.spatial.other_cut = s.value("other_cut", c.spatial.other_cut);
    }
    if (j.contains("temporal")) {
        const auto& s = j["temporal"];
        if (s.contains("mode")) c.temporal.mode = mode_from_string(s["mode"].get<std::string>());
        c.temporal.split_enabled = s.value("split", c.temporal.split_enabled);
        c.temporal.app_lost_max = s.value("app_lost_max", c.temporal.app_lost_max);
        c.temporal.r0 = s.value("r0", c.temporal.r0);
        c.temporal.r_rate = s.value("r_rate", c.temporal.r_rate);
        c.temporal.m0 = s.value("m0", c.temporal.m0);
        c.temporal.m_div = s.value("m_div", c.temporal.m_div);
        c.temporal.n_confirm = s.value("n_confirm", c.temporal.n_confirm);
        c.temporal.app_ema = s.value("app_ema", c.temporal.app_ema);
        c.temporal.app_baseline_max = s.value("app_baseline_max", c.temporal.app_baseline_max);
    }
    if (j.contains("lift")) {
        const auto& s = j["lift"];
        c.lift.min_samples = s.value("min_samples", c.lift.min_samples);
        c.lift.pixel_stride = s.value("pixel_stride", c.lift.pixel_stride);
        c.lift.eps_scale = s.value("eps_scale", c.lift.eps_scale);
        c.lift.eps_min = s.value("eps_min", c.lift.eps_min);
        c.lift.eps_max = s.value("eps_max", c.lift.eps_max);
        c.lift.alpha_lower = s.value("alpha_lower", c.lift.alpha_lower);
        c.lift.alpha_upper = s.value("alpha_upper", c.lift.alpha_upper);
    }
    if (j.contains("fuse")) {
        const auto& s = j["fuse"];
        c.fuse.thr = s.value("thr", c.fuse.thr);
        c.fuse.yaw_period = s.value("yaw_period", c.fuse.yaw_period);
        c.fuse.yaw_min_dist = s.value("yaw_min_dist", c.fuse.yaw_min_dist);
    }
    if (j.contains("aggregation"))
        c.aggregation = aggregation_from_string(j["aggregation"].get<std::string>());
    c.yaw_refine = j.value("yaw_refine", c.yaw_refine);
    c.mask_erosion = j.value("mask_erosion", c.mask_erosion);
    c.bypass_sct = j.value("bypass_sct", c.bypass_sct);
    c.corrupt_cluster_rate = j.value("corrupt_cluster_rate", c.corrupt_cluster_rate);
    c.corrupt_seed = j.value("corrupt_seed", c.corrupt_seed);
    c.workers = j.value("workers", c.workers);
    c.sct.pedestrian_class_id = c.pedestrian_class_id;
    c.spatial.pedestrian_class_id = c.pedestrian_class_id;
    c.validate();
    return c;
}

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ValidationError("config parse error in " + path + ": " + e.what());
    }
    return from_json(j);
}

nlohmann::ordered_json PipelineConfig::to_json() const {
    nlohmann::ordered_json j;
    j["embedding_dim"] = embedding_dim;
    j["pedestrian_class_id"] = pedestrian_class_id;
    j["sct"] = {{"lambda", sct.lambda},
                {"iou_min", sct.iou_min},
                {"app_max", sct.app_max},
                {"alpha_ema", sct.alpha_ema},
                {"max_age", sct.max_age},
                {"process_noise_pos", sct.process_noise_pos},
                {"process_noise_vel", sct.process_noise_vel},
                {"meas_noise", sct.meas_noise},
                {"kp_conf", sct.kp_conf},
                {"ankle_indices", sct.ankle_indices}};
    j["spatial"] = {{"app_gate", spatial.app_gate},
                    {"spatial_gate", spatial.spatial_gate},
                    {"ped_cut", spatial.ped_cut},
                    {"other_cut", spatial.other_cut}};
    j["temporal"] = {
        {"mode", temporal.mode == temporal::MatchMode::MotIdConsistency ? "mot_id" : "appearance"},
        {"split", temporal.split_enabled},
        {"app_lost_max", temporal.app_lost_max},
        {"r0", temporal.r0},
        {"r_rate", temporal.r_rate},
        {"m0", temporal.m0},
        {"m_div", temporal.m_div},
        {"n_confirm", temporal.n_confirm},
        {"app_ema", temporal.app_ema},
        {"app_baseline_max", temporal.app_baseline_max}};
    j["lift"] = {{"min_samples", lift.min_samples},   {"pixel_stride", lift.pixel_stride},
                 {"eps_scale", lift.eps_scale},       {"eps_min", lift.eps_min},
                 {"eps_max", lift.eps_max},           {"alpha_lower", lift.alpha_lower},
                 {"alpha_upper", lift.alpha_upper}};
    j["fuse"] = {{"thr", fuse.thr}, {"yaw_period", fuse.yaw_period}, {"yaw_min_dist", fuse.yaw_min_dist}};
    j["aggregation"] = aggregation == Aggregation::Fixed ? "fixed" : "late3d";
    j["yaw_refine"] = yaw_refine;
    j["mask_erosion"] = mask_erosion;
    j["bypass_sct"] = bypass_sct;
    j["corrupt_cluster_rate"] = corrupt_cluster_rate;
    j["corrupt_seed"] = corrupt_seed;
    j["workers"] = workers;
    return j;
}

void PipelineConfig::validate() const {
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (embedding_dim < 0) throw ValidationError("config: embedding_dim must be >= 0");
    if (!in01(sct.lambda)) throw ValidationError("config: sct.lambda must lie in [0,1]");
    if (!in01(sct.alpha_ema)) throw ValidationError("config: sct.alpha_ema must lie in [0,1]");
    if (sct.iou_min < 0.0 || sct.iou_min > 1.0) throw ValidationError("config: sct.iou_min in [0,1]");
    if (sct.app_max < 0.0 || sct.app_max > 2.0) throw ValidationError("config: sct.app_max in [0,2]");
    if (sct.max_age < 0) throw ValidationError("config: sct.max_age must be >= 0");
    if (sct.meas_noise <= 0.0 || sct.process_noise_pos <= 0.0 || sct.process_noise_vel <= 0.0)
        throw ValidationError("config: sct noise terms must be positive");
    if (spatial.app_gate < 0.0 || spatial.app_gate > 2.0)
        throw ValidationError("config: spatial.app_gate in [0,2]");
    if (spatial.spatial_gate <= 0.0) throw ValidationError("config: spatial.spatial_gate must be > 0");
    if (spatial.ped_cut <= 0.0 || spatial.other_cut <= 0.0)
        throw ValidationError("config: cluster cuts must be > 0");
    if (temporal.app_lost_max < 0.0 || temporal.app_lost_max > 2.0)
        throw ValidationError("config: temporal.app_lost_max in [0,2]");
    if (temporal.r0 <= 0.0 || temporal.r_rate < 0.0)
        throw ValidationError("config: lost radius parameters invalid");
    if (temporal.m0 < 1 || temporal.m_div < 1)
        throw ValidationError("config: reactivation counters must be >= 1");
    if (temporal.n_confirm < 1) throw ValidationError("config: n_confirm must be >= 1");
    if (!in01(temporal.app_ema)) throw ValidationError("config: temporal.app_ema in [0,1]");
    if (lift.min_samples < 1) throw ValidationError("config: lift.min_samples must be >= 1");
    if (lift.pixel_stride < 1) throw ValidationError("config: lift.pixel_stride must be >= 1");
    if (lift.eps_min <= 0.0 || lift.eps_max < lift.eps_min || lift.eps_scale <= 0.0)
        throw ValidationError("config: lift epsilon bounds invalid");
    if (lift.alpha_lower <= 0.0 || lift.alpha_upper <= lift.alpha_lower)
        throw ValidationError("config: volume sanity bounds invalid");
    if (fuse.thr < 0.0 || fuse.thr > 1.0) throw ValidationError("config: fuse.thr in [0,1]");
    if (fuse.yaw_period < 1) throw ValidationError("config: fuse.yaw_period must be >= 1");
    if (fuse.yaw_min_dist < 0.0) throw ValidationError("config: fuse.yaw_min_dist must be >= 0");
    if (!in01(corrupt_cluster_rate)) throw ValidationError("config: corrupt_cluster_rate in [0,1]");
    if (workers < 0) throw ValidationError("config: workers must be >= 0");
}

namespace {

nlohmann::ordered_json event_to_json(const temporal::Event& e) {
    nlohmann::ordered_json j;
    j["event"] = temporal::event_name(e.type);
    j["global_id"] = e.global_id;
    if (e.type == temporal::EventType::Split) {
        j["camera_id"] = e.camera_id;
        j["old_local"] = e.old_local;
        j["new_local"] = e.new_local;
    }
    if (!e.members.empty()) {
        nlohmann::ordered_json ms = nlohmann::ordered_json::array();
        for (const auto& [cam, lid] : e.members) ms.push_back({cam, lid});
        j["members"] = ms;
    }
    return j;
}

// deterministic post-clustering corruption: swap one member between two
// random clusters when the swap keeps camera sets valid
void corrupt_clusters(std::vector<spatial::Cluster>& clusters, double rate, std::uint64_t seed,
                      int frame) {
    if (rate <= 0.0 || clusters.size() < 2) return;
    auto rng = make_rng(seed, "cluster-corrupt", static_cast<std::uint64_t>(frame));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    if (u01(rng) >= rate) return;
    std::uniform_int_distribution<std::size_t> pick_cluster(0, clusters.size() - 1);
    for (int attempt = 0; attempt < 8; ++attempt) {
        const std::size_t a = pick_cluster(rng);
        const std::size_t b = pick_cluster(rng);
        if (a == b) continue;
        auto& ca = clusters[a];
        auto& cb = clusters[b];
        std::uniform_int_distribution<std::size_t> pick_a(0, ca.members.size() - 1);
        std::uniform_int_distribution<std::size_t> pick_b(0, cb.members.size() - 1);
        const std::size_t ma = pick_a(rng);
        const std::size_t mb = pick_b(rng);
        auto cam_clash = [](const spatial::Cluster& c, std::size_t skip, int cam) {
            for (std::size_t i = 0; i < c.members.size(); ++i)
                if (i != skip && c.members[i].camera_id == cam) return true;
            return false;
        };
        if (cam_clash(ca, ma, cb.members[mb].camera_id) || cam_clash(cb, mb, ca.members[ma].camera_id))
            continue;
        std::swap(ca.members[ma], cb.members[mb]);
        ca.recompute();
        cb.recompute();
        return;
    }
}

struct SceneData {
    std::vector<geom::CameraCalibration> calibs;
    std::map<int, const geom::CameraCalibration*> calib_by_id;
    ingest::DetectionTable detections;
    ingest::ClassStats stats;
    ingest::MaskTable masks;
    std::string depth_dir;
    bool has_masks = false;
    bool has_depth = false;
};

SceneData load_scene(const std::string& scene_dir, const PipelineConfig& cfg, RunMode mode) {
    namespace fs = std::filesystem;
    SceneData scene;
    scene.calibs = geom::load_calibration((fs::path(scene_dir) / "calibration.json").string());
    for (const auto& c : scene.calibs) scene.calib_by_id[c.camera_id] = &c;
    scene.detections =
        ingest::load_detections((fs::path(scene_dir) / "detections.jsonl").string(), cfg.embedding_dim);
    scene.stats = ingest::load_class_stats((fs::path(scene_dir) / "class_stats.json").string());

    // clamp boxes to their camera's image bounds
    for (auto& [frame, cams] : scene.detections)
        for (auto& [cam, dets] : cams) {
            auto it = scene.calib_by_id.find(cam);
            if (it == scene.calib_by_id.end())
                throw DataError("detections reference camera " + std::to_string(cam) +
                                " missing from calibration");
            const auto* calib = it->second;
            for (auto& d : dets) {
                d.x1 = std::clamp(d.x1, 0.0, static_cast<double>(calib->image_width) - 1.0);
                d.y1 = std::clamp(d.y1, 0.0, static_cast<double>(calib->image_height) - 1.0);
                d.x2 = std::clamp(d.x2, d.x1 + 1e-3, static_cast<double>(calib->image_width));
                d.y2 = std::clamp(d.y2, d.y1 + 1e-3, static_cast<double>(calib->image_height));
            }
        }

    if (mode == RunMode::ThreeD && cfg.aggregation == Aggregation::Late3D) {
        const auto mask_path = fs::path(scene_dir) / "masks.jsonl";
        if (fs::exists(mask_path)) {
            scene.masks = ingest::load_masks(mask_path.string());
            scene.has_masks = true;
        }
        const auto depth_dir = fs::path(scene_dir) / "depth";
        if (fs::exists(depth_dir)) {
            scene.depth_dir = depth_dir.string();
            scene.has_depth = true;
        }
    }
    return scene;
}

} // namespace

RunStats run_scene(const std::string& scene_dir, const PipelineConfig& cfg, RunMode mode,
                   const std::string& out_path, const std::string& log_path, int inspect_frame,
                   nlohmann::json* inspect_out) {
    namespace fs = std::filesystem;
    cfg.validate();
#ifdef _OPENMP
    if (cfg.workers > 0) omp_set_num_threads(cfg.workers);
#endif

    SceneData scene = load_scene(scene_dir, cfg, mode);

    std::ofstream out(out_path);
    if (!out) throw DataError("cannot write results file: " + out_path);
    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path);
        if (!log) throw DataError("cannot write log file: " + log_path);
    }

    std::map<int, sct::CameraTracker> trackers;
    for (const auto& c : scene.calibs) trackers.emplace(c.camera_id, sct::CameraTracker(c.camera_id, cfg.sct));

    temporal::TemporalAssociator assoc(cfg.temporal);
    fuse::TrackHistory history;
    RunStats stats;

    int max_frame = -1;
    for (const auto& [frame, cams] : scene.detections) max_frame = std::max(max_frame, frame);

    static const std::vector<ingest::Detection2D> kNoDetections;

    for (int frame = 0; frame <= max_frame; ++frame) {
        ++stats.frames;
        auto frame_it = scene.detections.find(frame);

        // --- single-camera tracking + snapshot construction ---
        std::vector<spatial::TargetSnapshot> snapshots;
        std::map<std::pair<int, int>, const ingest::Detection2D*> det_by_member;
        for (const auto& calib : scene.calibs) {
            const std::vector<ingest::Detection2D>* dets = &kNoDetections;
            if (frame_it != scene.detections.end()) {
                auto cam_it = frame_it->second.find(calib.camera_id);
                if (cam_it != frame_it->second.end()) dets = &cam_it->second;
            }
            if (cfg.bypass_sct)
                for (const auto& d : *dets)
                    if (!d.local_track_id)
                        throw DataError("bypass mode requires local_track_id on every detection (frame " +
                                        std::to_string(frame) + ", camera " +
                                        std::to_string(calib.camera_id) + ")");
            const auto pairs = trackers.at(calib.camera_id).step(*dets);
            stats.detections += static_cast<int>(pairs.size());
            for (const auto& [det_idx, local_id] : pairs) {
                const auto& d = (*dets)[static_cast<std::size_t>(det_idx)];
                spatial::TargetSnapshot snap;
                snap.camera_id = calib.camera_id;
                snap.local_id = local_id;
                snap.class_id = d.class_id;
                snap.embedding = d.embedding;
                std::tie(snap.foot_u, snap.foot_v) = sct::select_foot_point(d, cfg.sct);
                const auto map_pt = geom::homography_project(snap.foot_u, snap.foot_v, calib.H);
                snap.map_x = map_pt.u;
                snap.map_y = map_pt.v;
                snap.score = d.score;
                snap.det_index = det_idx;
                det_by_member[{snap.camera_id, snap.local_id}] = &d;
                snapshots.push_back(std::move(snap));
            }
        }

        // --- spatial association ---
        auto clusters = spatial::cluster_frame(snapshots, scene.stats, cfg.spatial);
        corrupt_clusters(clusters, cfg.corrupt_cluster_rate, cfg.corrupt_seed, frame);
        stats.clusters += static_cast<int>(clusters.size());

        // --- temporal association ---
        auto frame_assoc = assoc.update(frame, clusters);
        int frame_splits = 0, frame_reactivations = 0;
        for (const auto& e : frame_assoc.events) {
            switch (e.type) {
                case temporal::EventType::Split: ++stats.splits; ++frame_splits; break;
                case temporal::EventType::Reactivate: ++stats.reactivations; ++frame_reactivations; break;
                case temporal::EventType::Spawn: ++stats.spawned; break;
                case temporal::EventType::Confirm: ++stats.confirmed; break;
                case temporal::EventType::Remove: ++stats.removed; break;
                case temporal::EventType::Lost: ++stats.lost; break;
            }
        }

        std::vector<const temporal::Assignment*> emitted;
        for (const auto& a : frame_assoc.assignments)
            if (a.emit) emitted.push_back(&a);
        std::sort(emitted.begin(), emitted.end(),
                  [](const temporal::Assignment* a, const temporal::Assignment* b) {
                      return a->global_id < b->global_id;
                  });

        int frame_fusion_groups = 0, frame_fallbacks = 0;
        std::vector<ingest::ResultRow> rows;
        std::vector<Box3D> prefusion;
        fuse::FuseOutput fused;

        if (mode == RunMode::TwoD) {
            for (const auto* a : emitted) {
                for (const auto& m : a->cluster.members) {
                    auto it = det_by_member.find({m.camera_id, m.local_id});
                    if (it == det_by_member.end()) continue;
                    ingest::ResultRow2D row;
                    row.frame = frame;
                    row.camera_id = m.camera_id;
                    row.global_id = a->global_id;
                    row.x1 = it->second->x1;
                    row.y1 = it->second->y1;
                    row.x2 = it->second->x2;
                    row.y2 = it->second->y2;
                    out << ingest::format_result_row_2d(row) << "\n";
                    ++stats.rows_written;
                }
            }
            out.flush();
        } else {
            // --- 3D box recovery ---
            std::map<int, ingest::DepthMap> depth_cache;
            std::vector<std::unique_ptr<ingest::Bitmap>> bitmaps;  // keep alive for the frame
            std::vector<lift::TargetCloud> clouds;

            auto depth_for = [&](int cam) -> const ingest::DepthMap* {
                auto it = depth_cache.find(cam);
                if (it != depth_cache.end()) return &it->second;
                if (!scene.has_depth) return nullptr;
                const auto path = fs::path(scene.depth_dir) / ingest::depth_filename(cam, frame);
                if (!fs::exists(path)) return nullptr;
                auto loaded = ingest::load_depth(path.string(), cam, frame);
                return &depth_cache.emplace(cam, std::move(loaded)).first->second;
            };

            for (const auto* a : emitted) {
                Box3D box;
                bool need_fallback = false;
                if (cfg.aggregation == Aggregation::Fixed) {
                    need_fallback = true;  // fixed mode always uses the class-prior box
                } else {
                    std::vector<lift::LiftInput> inputs;
                    for (const auto& m : a->cluster.members) {
                        auto det_it = det_by_member.find({m.camera_id, m.local_id});
                        if (det_it == det_by_member.end()) continue;
                        auto mask_it =
                            scene.masks.find({frame, m.camera_id, m.det_index});
                        const ingest::DepthMap* depth = depth_for(m.camera_id);
                        if (mask_it == scene.masks.end() || depth == nullptr) continue;
                        auto bmp = std::make_unique<ingest::Bitmap>(ingest::decode_rle(mask_it->second));
                        if (cfg.mask_erosion) *bmp = ingest::erode(*bmp);
                        bitmaps.push_back(std::move(bmp));
                        inputs.push_back(lift::LiftInput{det_it->second, bitmaps.back().get(), depth,
                                                         scene.calib_by_id.at(m.camera_id)});
                    }
                    if (inputs.empty()) {
                        need_fallback = true;
                    } else {
                        auto cloud =
                            lift::lift_target(inputs, a->cluster.class_id, a->global_id, cfg.lift);
                        if (cloud.points.empty()) {
                            need_fallback = true;
                        } else {
                            const double eps =
                                lift::epsilon_for_class(a->cluster.class_id, scene.stats, cfg.lift);
                            const auto labels = lift::dbscan(cloud.points, eps, cfg.lift.min_samples);
                            const auto fit =
                                lift::fit_box(cloud, labels, scene.stats, cfg.lift,
                                              a->cluster.centroid_x, a->cluster.centroid_y);
                            box = fit.box;
                            if (fit.fallback) ++frame_fallbacks;
                            if (inspect_frame == frame) clouds.push_back(std::move(cloud));
                        }
                    }
                }
                if (need_fallback) {
                    const auto& cls = scene.stats.require(a->cluster.class_id);
                    box.x = a->cluster.centroid_x;
                    box.y = a->cluster.centroid_y;
                    box.length = cls.mean_length;
                    box.width = cls.mean_width;
                    box.height = cls.mean_height;
                    box.z = cls.mean_height / 2.0;
                    box.yaw = 0.0;
                    double score_sum = 0.0;
                    for (const auto& m : a->cluster.members) score_sum += m.score;
                    box.score = a->cluster.members.empty()
                                    ? 0.0
                                    : score_sum / static_cast<double>(a->cluster.members.size());
                    box.class_id = a->cluster.class_id;
                    box.global_id = a->global_id;
                    if (cfg.aggregation == Aggregation::Late3D) ++frame_fallbacks;
                }
                prefusion.push_back(box);
            }

            if (cfg.aggregation == Aggregation::Late3D) {
                fused = fuse::fuse(prefusion, cfg.fuse);
                for (const auto& g : fused.groups)
                    if (g.size() >= 2) ++frame_fusion_groups;
            } else {
                fused.boxes = prefusion;
                for (std::size_t i = 0; i < prefusion.size(); ++i)
                    fused.groups.push_back({static_cast<int>(i)});
            }

            for (auto& box : fused.boxes) {
                if (cfg.yaw_refine)
                    box.yaw = history.refine_yaw(box.global_id, frame, box.x, box.y, cfg.fuse);
                box.yaw = normalize_yaw(box.yaw);
                ingest::ResultRow row;
                row.frame = frame;
                row.class_id = box.class_id;
                row.global_id = box.global_id;
                row.box = box;
                rows.push_back(row);
            }
            std::sort(rows.begin(), rows.end(), [](const ingest::ResultRow& a, const ingest::ResultRow& b) {
                return a.global_id < b.global_id;
            });
            for (const auto& r : rows) {
                out << ingest::format_result_row(r) << "\n";
                ++stats.rows_written;
            }
            out.flush();

            if (inspect_frame == frame && inspect_out != nullptr) {
                nlohmann::ordered_json dump;
                dump["frame"] = frame;
                auto snaps_json = nlohmann::ordered_json::array();
                for (const auto& s : snapshots)
                    snaps_json.push_back({{"camera_id", s.camera_id},
                                          {"local_id", s.local_id},
                                          {"class_id", s.class_id},
                                          {"map", {s.map_x, s.map_y}},
                                          {"foot", {s.foot_u, s.foot_v}},
                                          {"score", s.score}});
                dump["snapshots"] = snaps_json;
                auto clusters_json = nlohmann::ordered_json::array();
                for (const auto& c : clusters) {
                    nlohmann::ordered_json cj;
                    cj["class_id"] = c.class_id;
                    cj["centroid"] = {c.centroid_x, c.centroid_y};
                    auto ms = nlohmann::ordered_json::array();
                    for (const auto& m : c.members) ms.push_back({m.camera_id, m.local_id});
                    cj["members"] = ms;
                    clusters_json.push_back(cj);
                }
                dump["clusters"] = clusters_json;
                auto assign_json = nlohmann::ordered_json::array();
                for (const auto& a : frame_assoc.assignments) {
                    nlohmann::ordered_json aj;
                    aj["global_id"] = a.global_id;
                    aj["emit"] = a.emit;
                    auto ms = nlohmann::ordered_json::array();
                    for (const auto& m : a.cluster.members) ms.push_back({m.camera_id, m.local_id});
                    aj["members"] = ms;
                    auto pairs_json = [](const std::vector<std::pair<int, int>>& pairs) {
                        auto arr = nlohmann::ordered_json::array();
                        for (const auto& [cam, lid] : pairs) arr.push_back({cam, lid});
                        return arr;
                    };
                    aj["expected"] = pairs_json(a.overlap.expected);
                    aj["unexpected"] = pairs_json(a.overlap.unexpected);
                    aj["vacated"] = pairs_json(a.overlap.vacated);
                    assign_json.push_back(aj);
                }
                dump["assignments"] = assign_json;
                auto events_json = nlohmann::ordered_json::array();
                for (const auto& e : frame_assoc.events) events_json.push_back(event_to_json(e));
                dump["events"] = events_json;
                auto clouds_json = nlohmann::ordered_json::array();
                for (const auto& c : clouds) {
                    nlohmann::ordered_json cj;
                    cj["global_id"] = c.global_id;
                    cj["points"] = c.points.size();
                    auto sample = nlohmann::ordered_json::array();
                    const std::size_t step = std::max<std::size_t>(1, c.points.size() / 200);
                    for (std::size_t i = 0; i < c.points.size(); i += step)
                        sample.push_back({c.points[i].x, c.points[i].y, c.points[i].z});
                    cj["sample"] = sample;
                    clouds_json.push_back(cj);
                }
                dump["clouds"] = clouds_json;
                auto box_json = [](const Box3D& b) {
                    return nlohmann::ordered_json{{"global_id", b.global_id}, {"class_id", b.class_id},
                                                  {"center", {b.x, b.y, b.z}},
                                                  {"dims", {b.length, b.width, b.height}},
                                                  {"yaw", b.yaw},       {"score", b.score}};
                };
                auto pre_json = nlohmann::ordered_json::array();
                for (const auto& b : prefusion) pre_json.push_back(box_json(b));
                dump["boxes_prefusion"] = pre_json;
                dump["fusion_groups"] = fused.groups;
                auto fused_json = nlohmann::ordered_json::array();
                for (const auto& r : rows) fused_json.push_back(box_json(r.box));
                dump["boxes_fused"] = fused_json;
                *inspect_out = dump;
            }
        }

        stats.fusion_groups += frame_fusion_groups;
        stats.fallback_boxes += frame_fallbacks;

        if (log.is_open()) {
            nlohmann::ordered_json lj;
            lj["frame"] = frame;
            lj["counters"] = {{"snapshots", snapshots.size()},
                              {"clusters", clusters.size()},
                              {"splits", frame_splits},
                              {"reactivations", frame_reactivations},
                              {"fusion_groups", frame_fusion_groups},
                              {"fallback_boxes", frame_fallbacks}};
            auto events_json = nlohmann::ordered_json::array();
            for (const auto& e : frame_assoc.events) events_json.push_back(event_to_json(e));
            lj["events"] = events_json;
            log << lj.dump() << "\n";
            log.flush();
        }
    }
    return stats;
}

} // namespace mtmc::pipeline
