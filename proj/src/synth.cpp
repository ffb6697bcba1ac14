#include "mtmc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "mtmc/errors.hpp"
#include "mtmc/rng.hpp"

namespace mtmc::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;

double normalize_yaw(double yaw) {
    while (yaw > kPi) yaw -= 2.0 * kPi;
    while (yaw <= -kPi) yaw += 2.0 * kPi;
    return yaw;
}

} // namespace

void ScenarioConfig::validate() const {
    if (frames < 0) throw ValidationError("scenario: frames must be >= 0");
    if (fps <= 0.0) throw ValidationError("scenario: fps must be positive");
    if (image_width < 8 || image_height < 8) throw ValidationError("scenario: image too small");
    if (embedding_dim < 2) throw ValidationError("scenario: embedding_dim must be >= 2");
    if (camera_count < 1) throw ValidationError("scenario: need at least one camera");
    if (camera_ring_radius <= 0.0 || camera_height <= 0.0 || camera_focal <= 0.0)
        throw ValidationError("scenario: camera geometry must be positive");
    if (classes.empty()) throw ValidationError("scenario: no target classes");
    for (const auto& c : classes) {
        if (c.count < 0) throw ValidationError("scenario: negative class count");
        if (c.length <= 0.0 || c.width <= 0.0 || c.height <= 0.0)
            throw ValidationError("scenario: class dims must be positive");
        if (c.speed < 0.0) throw ValidationError("scenario: negative speed");
    }
    for (double r : {noise.miss_rate, noise.id_switch_rate})
        if (r < 0.0 || r > 1.0) throw ValidationError("scenario: rates must lie in [0,1]");
    if (noise.box_jitter_px < 0.0 || noise.embed_noise < 0.0 || noise.embed_inter_overlap < 0.0)
        throw ValidationError("scenario: noise magnitudes must be >= 0");
    if (waypoint_grid < 0.0) throw ValidationError("scenario: waypoint_grid must be >= 0");
    if (waypoints < 2) throw ValidationError("scenario: need at least 2 waypoints");
}

ScenarioConfig ScenarioConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open scenario config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ValidationError("scenario parse error in " + path + ": " + e.what());
    }
    ScenarioConfig cfg;
    cfg.seed = j.value("seed", cfg.seed);
    cfg.frames = j.value("frames", cfg.frames);
    cfg.fps = j.value("fps", cfg.fps);
    cfg.image_width = j.value("image_width", cfg.image_width);
    cfg.image_height = j.value("image_height", cfg.image_height);
    cfg.embedding_dim = j.value("embedding_dim", cfg.embedding_dim);
    cfg.camera_count = j.value("camera_count", cfg.camera_count);
    cfg.camera_ring_radius = j.value("camera_ring_radius", cfg.camera_ring_radius);
    cfg.camera_height = j.value("camera_height", cfg.camera_height);
    cfg.camera_focal = j.value("camera_focal", cfg.camera_focal);
    cfg.arena_half_x = j.value("arena_half_x", cfg.arena_half_x);
    cfg.arena_half_y = j.value("arena_half_y", cfg.arena_half_y);
    cfg.axis_aligned_paths = j.value("axis_aligned_paths", cfg.axis_aligned_paths);
    cfg.wander_radius = j.value("wander_radius", cfg.wander_radius);
    cfg.waypoint_grid = j.value("waypoint_grid", cfg.waypoint_grid);
    cfg.waypoints = j.value("waypoints", cfg.waypoints);
    cfg.emit_depth = j.value("emit_depth", cfg.emit_depth);
    cfg.emit_masks = j.value("emit_masks", cfg.emit_masks);
    cfg.emit_keypoints = j.value("emit_keypoints", cfg.emit_keypoints);
    cfg.emit_local_ids = j.value("emit_local_ids", cfg.emit_local_ids);
    cfg.stats_epsilon = j.value("stats_epsilon", cfg.stats_epsilon);
    cfg.stats_spatial_gate = j.value("stats_spatial_gate", cfg.stats_spatial_gate);
    cfg.stats_cluster_cut = j.value("stats_cluster_cut", cfg.stats_cluster_cut);
    if (j.contains("classes")) {
        cfg.classes.clear();
        for (const auto& cj : j["classes"]) {
            ClassSpec c;
            c.class_id = cj.at("class_id").get<int>();
            c.count = cj.at("count").get<int>();
            c.length = cj.at("length").get<double>();
            c.width = cj.at("width").get<double>();
            c.height = cj.at("height").get<double>();
            c.speed = cj.value("speed", 1.0);
            c.pedestrian = cj.value("pedestrian", false);
            cfg.classes.push_back(c);
        }
    }
    if (j.contains("noise")) {
        const auto& nj = j["noise"];
        cfg.noise.miss_rate = nj.value("miss_rate", 0.0);
        cfg.noise.box_jitter_px = nj.value("box_jitter_px", 0.0);
        cfg.noise.embed_noise = nj.value("embed_noise", 0.0);
        cfg.noise.embed_inter_overlap = nj.value("embed_inter_overlap", 0.0);
        cfg.noise.id_switch_rate = nj.value("id_switch_rate", 0.0);
        if (nj.contains("occlusions"))
            for (const auto& oj : nj["occlusions"])
                cfg.noise.occlusions.push_back(OcclusionWindow{
                    oj.at("target").get<int>(), oj.at("camera").get<int>(), oj.at("from").get<int>(),
                    oj.at("to").get<int>()});
    }
    cfg.validate();
    return cfg;
}

void ScenarioConfig::to_json_file(const std::string& path) const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["frames"] = frames;
    j["fps"] = fps;
    j["image_width"] = image_width;
    j["image_height"] = image_height;
    j["embedding_dim"] = embedding_dim;
    j["camera_count"] = camera_count;
    j["camera_ring_radius"] = camera_ring_radius;
    j["camera_height"] = camera_height;
    j["camera_focal"] = camera_focal;
    j["arena_half_x"] = arena_half_x;
    j["arena_half_y"] = arena_half_y;
    j["axis_aligned_paths"] = axis_aligned_paths;
    j["wander_radius"] = wander_radius;
    j["waypoint_grid"] = waypoint_grid;
    j["waypoints"] = waypoints;
    j["emit_depth"] = emit_depth;
    j["emit_masks"] = emit_masks;
    j["emit_keypoints"] = emit_keypoints;
    j["emit_local_ids"] = emit_local_ids;
    j["stats_epsilon"] = stats_epsilon;
    j["stats_spatial_gate"] = stats_spatial_gate;
    j["stats_cluster_cut"] = stats_cluster_cut;
    j["classes"] = nlohmann::ordered_json::array();
    for (const auto& c : classes) {
        nlohmann::ordered_json cj;
        cj["class_id"] = c.class_id;
        cj["count"] = c.count;
        cj["length"] = c.length;
        cj["width"] = c.width;
        cj["height"] = c.height;
        cj["speed"] = c.speed;
        cj["pedestrian"] = c.pedestrian;
        j["classes"].push_back(cj);
    }
    nlohmann::ordered_json nj;
    nj["miss_rate"] = noise.miss_rate;
    nj["box_jitter_px"] = noise.box_jitter_px;
    nj["embed_noise"] = noise.embed_noise;
    nj["embed_inter_overlap"] = noise.embed_inter_overlap;
    nj["id_switch_rate"] = noise.id_switch_rate;
    nj["occlusions"] = nlohmann::ordered_json::array();
    for (const auto& o : noise.occlusions) {
        nlohmann::ordered_json oj;
        oj["target"] = o.target;
        oj["camera"] = o.camera;
        oj["from"] = o.from;
        oj["to"] = o.to;
        nj["occlusions"].push_back(oj);
    }
    j["noise"] = nj;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write scenario config: " + path);
    out << j.dump(2) << "\n";
}

Trajectory::Trajectory(std::vector<std::pair<double, double>> polyline, double speed, double fps)
    : pts_(std::move(polyline)), speed_(speed), fps_(fps) {
    cum_.push_back(0.0);
    for (std::size_t i = 1; i < pts_.size(); ++i) {
        const double dx = pts_[i].first - pts_[i - 1].first;
        const double dy = pts_[i].second - pts_[i - 1].second;
        cum_.push_back(cum_.back() + std::sqrt(dx * dx + dy * dy));
    }
    total_ = cum_.back();
}

TargetPose Trajectory::pose(int frame) const {
    TargetPose p;
    if (pts_.empty()) return p;
    if (total_ <= 0.0 || speed_ <= 0.0) {
        p.x = pts_.front().first;
        p.y = pts_.front().second;
        return p;
    }
    double s = std::fmod(speed_ * static_cast<double>(frame) / fps_, total_);
    std::size_t seg = 1;
    while (seg < cum_.size() && cum_[seg] < s) ++seg;
    if (seg >= cum_.size()) seg = cum_.size() - 1;
    // skip zero-length segments for the heading
    double dx = pts_[seg].first - pts_[seg - 1].first;
    double dy = pts_[seg].second - pts_[seg - 1].second;
    const double len = cum_[seg] - cum_[seg - 1];
    double f = len > 0.0 ? (s - cum_[seg - 1]) / len : 0.0;
    p.x = pts_[seg - 1].first + f * dx;
    p.y = pts_[seg - 1].second + f * dy;
    if (len > 0.0)
        p.yaw = normalize_yaw(std::atan2(dy, dx));
    else
        p.yaw = 0.0;
    return p;
}

Obb Target::obb_at(int frame) const {
    const TargetPose p = traj.pose(frame);
    return Obb{p.x, p.y, cls.height / 2.0, cls.length / 2.0, cls.width / 2.0, cls.height / 2.0, p.yaw};
}

std::vector<geom::CameraCalibration> make_cameras(const ScenarioConfig& cfg) {
    std::vector<geom::CameraCalibration> cams;
    for (int i = 0; i < cfg.camera_count; ++i) {
        const double az = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(cfg.camera_count);
        const Vec3 center{cfg.camera_ring_radius * std::cos(az), cfg.camera_ring_radius * std::sin(az),
                          cfg.camera_height};
        const Vec3 look{0.0, 0.0, 0.0};
        Vec3 fwd = look - center;
        const double fn = fwd.norm();
        fwd = fwd * (1.0 / fn);
        // camera x axis horizontal, y axis toward world-down: upright image
        Vec3 right{fwd.y, -fwd.x, 0.0};
        const double rn = right.norm();
        if (rn < 1e-12) throw ValidationError("camera looks straight down; tilt the ring");
        right = right * (1.0 / rn);
        const Vec3 down{fwd.y * right.z - fwd.z * right.y, fwd.z * right.x - fwd.x * right.z,
                        fwd.x * right.y - fwd.y * right.x};

        geom::CameraCalibration c;
        c.camera_id = i;
        c.fu = c.fv = cfg.camera_focal;
        c.cu = cfg.image_width / 2.0;
        c.cv = cfg.image_height / 2.0;
        c.R.m = {right.x, right.y, right.z, down.x, down.y, down.z, fwd.x, fwd.y, fwd.z};
        c.t = c.R * (Vec3{0, 0, 0} - center);
        c.image_width = cfg.image_width;
        c.image_height = cfg.image_height;

        // ground-plane homography: world (X, Y, 0) -> pixel is K [r1 r2 t];
        // H is its inverse (pixel -> ground)
        Mat3 K = Mat3::identity();
        K(0, 0) = c.fu;
        K(1, 1) = c.fv;
        K(0, 2) = c.cu;
        K(1, 2) = c.cv;
        Mat3 Rt;
        for (int r = 0; r < 3; ++r) {
            Rt(r, 0) = c.R(r, 0);
            Rt(r, 1) = c.R(r, 1);
        }
        Rt(0, 2) = c.t.x;
        Rt(1, 2) = c.t.y;
        Rt(2, 2) = c.t.z;
        const Mat3 world_to_image = K * Rt;
        c.H = world_to_image.inverse();
        c.validate();
        cams.push_back(c);
    }
    return cams;
}

std::vector<Target> make_targets(const ScenarioConfig& cfg) {
    int total = 0;
    for (const auto& c : cfg.classes) total += c.count;
    if (total == 0) return {};

    // home points on a grid; same-class targets are interleaved so that
    // same-class neighbors sit on grid diagonals
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(total))));
    const int rows = (total + cols - 1) / cols;
    std::vector<std::pair<double, double>> homes;
    for (int r = 0; r < rows; ++r)
        for (int q = 0; q < cols && static_cast<int>(homes.size()) < total; ++q) {
            const double fx = cols > 1 ? static_cast<double>(q) / (cols - 1) : 0.5;
            const double fy = rows > 1 ? static_cast<double>(r) / (rows - 1) : 0.5;
            homes.emplace_back((fx * 2.0 - 1.0) * cfg.arena_half_x, (fy * 2.0 - 1.0) * cfg.arena_half_y);
        }

    // assignment order alternates classes across consecutive grid slots
    std::vector<const ClassSpec*> slot_class;
    {
        std::vector<int> remaining;
        for (const auto& c : cfg.classes) remaining.push_back(c.count);
        std::size_t ci = 0;
        while (static_cast<int>(slot_class.size()) < total) {
            if (remaining[ci] > 0) {
                slot_class.push_back(&cfg.classes[ci]);
                --remaining[ci];
            }
            ci = (ci + 1) % cfg.classes.size();
        }
    }

    std::vector<Target> targets;
    for (int i = 0; i < total; ++i) {
        auto rng = make_rng(cfg.seed, "waypoints", static_cast<std::uint64_t>(i));
        std::uniform_real_distribution<double> u(-cfg.wander_radius, cfg.wander_radius);
        auto snap = [&](double v) {
            if (cfg.waypoint_grid <= 0.0) return v;
            return std::round(v / cfg.waypoint_grid) * cfg.waypoint_grid;
        };
        std::vector<std::pair<double, double>> wps;
        for (int w = 0; w < cfg.waypoints; ++w)
            wps.emplace_back(snap(homes[static_cast<std::size_t>(i)].first + u(rng)),
                             snap(homes[static_cast<std::size_t>(i)].second + u(rng)));
        wps.push_back(wps.front());  // close the loop
        std::vector<std::pair<double, double>> polyline;
        if (cfg.axis_aligned_paths) {
            for (std::size_t w = 0; w + 1 < wps.size(); ++w) {
                polyline.push_back(wps[w]);
                polyline.emplace_back(wps[w + 1].first, wps[w].second);  // x leg first
            }
            polyline.push_back(wps.back());
        } else {
            polyline = wps;
        }
        targets.push_back(Target{i, *slot_class[static_cast<std::size_t>(i)],
                                 Trajectory(std::move(polyline), slot_class[static_cast<std::size_t>(i)]->speed,
                                            cfg.fps)});
    }
    return targets;
}

std::optional<double> obb_ray_depth(const geom::CameraCalibration& calib, double u, double v,
                                    const Obb& obb) {
    const Vec3 origin = calib.center();
    const Vec3 dir_cam{(u - calib.cu) / calib.fu, (v - calib.cv) / calib.fv, 1.0};
    const Vec3 dir = calib.R.transposed() * dir_cam;

    // into the box frame (translate, rotate by -yaw about z)
    const double c = std::cos(obb.yaw), s = std::sin(obb.yaw);
    auto to_box = [&](const Vec3& p) {
        const double dx = p.x, dy = p.y, dz = p.z;
        return Vec3{c * dx + s * dy, -s * dx + c * dy, dz};
    };
    const Vec3 o = to_box(origin - Vec3{obb.cx, obb.cy, obb.cz});
    const Vec3 d = to_box(dir);

    double t_enter = -1e300, t_exit = 1e300;
    const double half[3] = {obb.hl, obb.hw, obb.hh};
    const double oc[3] = {o.x, o.y, o.z};
    const double dc[3] = {d.x, d.y, d.z};
    for (int axis = 0; axis < 3; ++axis) {
        if (std::abs(dc[axis]) < 1e-15) {
            if (std::abs(oc[axis]) > half[axis]) return std::nullopt;
            continue;
        }
        double t0 = (-half[axis] - oc[axis]) / dc[axis];
        double t1 = (half[axis] - oc[axis]) / dc[axis];
        if (t0 > t1) std::swap(t0, t1);
        t_enter = std::max(t_enter, t0);
        t_exit = std::min(t_exit, t1);
    }
    if (t_enter > t_exit || t_exit <= 0.0) return std::nullopt;
    const double t_hit = t_enter > 0.0 ? t_enter : t_exit;
    // parameter t along dir equals planar camera depth because dir_cam.z = 1
    return t_hit;
}

RenderedFrame render_depth_frame(const geom::CameraCalibration& calib,
                                 const std::vector<Obb>& target_boxes,
                                 const std::vector<char>& visible) {
    RenderedFrame out;
    out.depth.camera_id = calib.camera_id;
    out.depth.width = calib.image_width;
    out.depth.height = calib.image_height;
    out.depth.values.assign(static_cast<std::size_t>(calib.image_width) * calib.image_height, 0.0f);
    out.winner.assign(out.depth.values.size(), -1);

    for (std::size_t ti = 0; ti < target_boxes.size(); ++ti) {
        if (!visible[ti]) continue;
        const Obb& obb = target_boxes[ti];

        // project the 8 corners to bound the raster area
        double min_u = 1e18, max_u = -1e18, min_v = 1e18, max_v = -1e18;
        bool any_front = false;
        const double cs = std::cos(obb.yaw), sn = std::sin(obb.yaw);
        for (int corner = 0; corner < 8; ++corner) {
            const double lx = (corner & 1 ? obb.hl : -obb.hl);
            const double ly = (corner & 2 ? obb.hw : -obb.hw);
            const double lz = (corner & 4 ? obb.hh : -obb.hh);
            const Vec3 w{obb.cx + cs * lx - sn * ly, obb.cy + sn * lx + cs * ly, obb.cz + lz};
            const Vec3 pc = geom::world_to_camera(w, calib);
            if (pc.z <= 1e-6) continue;
            any_front = true;
            const auto px = geom::project_camera_to_pixel(pc, calib);
            min_u = std::min(min_u, px.u);
            max_u = std::max(max_u, px.u);
            min_v = std::min(min_v, px.v);
            max_v = std::max(max_v, px.v);
        }
        if (!any_front) continue;
        const int x0 = std::max(0, static_cast<int>(std::floor(min_u)) - 1);
        const int x1 = std::min(calib.image_width - 1, static_cast<int>(std::ceil(max_u)) + 1);
        const int y0 = std::max(0, static_cast<int>(std::floor(min_v)) - 1);
        const int y1 = std::min(calib.image_height - 1, static_cast<int>(std::ceil(max_v)) + 1);
        if (x0 > x1 || y0 > y1) continue;

#pragma omp parallel for schedule(static)
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const auto d = obb_ray_depth(calib, static_cast<double>(x), static_cast<double>(y), obb);
                if (!d) continue;
                const std::size_t idx = static_cast<std::size_t>(y) * calib.image_width + x;
                const float fz = static_cast<float>(*d);
                if (out.depth.values[idx] == 0.0f || fz < out.depth.values[idx]) {
                    out.depth.values[idx] = fz;
                    out.winner[idx] = static_cast<std::int16_t>(ti);
                }
            }
        }
    }
    return out;
}

namespace {

// CrowdPose-style 14 keypoints as (length, width, height) fractions of the
// cuboid, front face forward.
struct KpOffset {
    double fx, fy, fz;
};
constexpr KpOffset kKeypointOffsets[14] = {
    {0.0, 0.25, 0.82},  {0.0, -0.25, 0.82}, {0.0, 0.30, 0.65}, {0.0, -0.30, 0.65},
    {0.0, 0.32, 0.50},  {0.0, -0.32, 0.50}, {0.0, 0.16, 0.52}, {0.0, -0.16, 0.52},
    {0.0, 0.15, 0.28},  {0.0, -0.15, 0.28}, {0.05, 0.15, 0.04}, {0.05, -0.15, 0.04},
    {0.0, 0.0, 1.0},    {0.0, 0.0, 0.88},
};

std::vector<double> identity_embedding(const ScenarioConfig& cfg, int target_index) {
    auto rng = make_rng(cfg.seed, "embed-base", static_cast<std::uint64_t>(target_index));
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> base(static_cast<std::size_t>(cfg.embedding_dim));
    for (double& v : base) v = g(rng);
    if (cfg.noise.embed_inter_overlap > 0.0) {
        auto srng = make_rng(cfg.seed, "embed-shared");
        for (double& v : base) {
            const double shared = std::normal_distribution<double>(0.0, 1.0)(srng);
            v = (1.0 - cfg.noise.embed_inter_overlap) * v + cfg.noise.embed_inter_overlap * shared;
        }
    }
    double sq = 0.0;
    for (double v : base) sq += v * v;
    const double norm = std::sqrt(sq);
    for (double& v : base) v /= norm;
    return base;
}

} // namespace

GenSummary generate(const ScenarioConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    if (cfg.emit_depth) fs::create_directories(fs::path(out_dir) / "depth");

    const auto cameras = make_cameras(cfg);
    const auto targets = make_targets(cfg);

    geom::write_calibration(cameras, (fs::path(out_dir) / "calibration.json").string());
    cfg.to_json_file((fs::path(out_dir) / "scenario.json").string());

    // class stats from the true dims
    ingest::ClassStats stats;
    for (const auto& c : cfg.classes) {
        ingest::ClassStats::Entry e;
        e.mean_length = c.length;
        e.mean_width = c.width;
        e.mean_height = c.height;
        e.mean_volume = c.length * c.width * c.height;
        e.dbscan_epsilon = cfg.stats_epsilon;
        e.spatial_gate = cfg.stats_spatial_gate;
        e.cluster_cut = cfg.stats_cluster_cut;
        stats.per_class[c.class_id] = e;
    }
    ingest::write_class_stats(stats, (fs::path(out_dir) / "class_stats.json").string());

    std::vector<std::vector<double>> bases;
    for (const auto& t : targets) bases.push_back(identity_embedding(cfg, t.index));

    // per-camera target -> local id maps (mutated by id-switch injection)
    std::vector<std::vector<int>> local_ids(static_cast<std::size_t>(cfg.camera_count));
    for (auto& ids : local_ids) {
        ids.resize(targets.size());
        for (std::size_t i = 0; i < targets.size(); ++i) ids[i] = static_cast<int>(i) + 1;
    }

    auto occluded = [&](int target, int camera, int frame) {
        for (const auto& o : cfg.noise.occlusions)
            if (o.target == target && o.camera == camera && frame >= o.from && frame < o.to) return true;
        return false;
    };

    GenSummary summary;
    summary.cameras = cfg.camera_count;
    summary.targets = static_cast<int>(targets.size());
    summary.frames = cfg.frames;

    ingest::DetectionTable det_table;
    std::vector<ingest::InstanceMask> masks;
    std::vector<ingest::ResultRow> gt_rows;

    for (int frame = 0; frame < cfg.frames; ++frame) {
        std::vector<Obb> boxes;
        for (const auto& t : targets) boxes.push_back(t.obb_at(frame));

        for (const auto& t : targets) {
            ingest::ResultRow row;
            row.frame = frame;
            row.class_id = t.cls.class_id;
            row.global_id = t.index + 1;
            row.box.x = boxes[static_cast<std::size_t>(t.index)].cx;
            row.box.y = boxes[static_cast<std::size_t>(t.index)].cy;
            row.box.z = boxes[static_cast<std::size_t>(t.index)].cz;
            row.box.length = t.cls.length;
            row.box.width = t.cls.width;
            row.box.height = t.cls.height;
            row.box.yaw = boxes[static_cast<std::size_t>(t.index)].yaw;
            row.box.score = 1.0;
            gt_rows.push_back(row);
        }

        for (const auto& cam : cameras) {
            // id-switch injection: persistent swap of two targets' ids
            if (cfg.noise.id_switch_rate > 0.0 && targets.size() >= 2) {
                auto rng = make_rng(cfg.seed, "idswitch", static_cast<std::uint64_t>(frame),
                                    static_cast<std::uint64_t>(cam.camera_id));
                std::uniform_real_distribution<double> u01(0.0, 1.0);
                if (u01(rng) < cfg.noise.id_switch_rate) {
                    std::uniform_int_distribution<std::size_t> pick(0, targets.size() - 1);
                    const std::size_t a = pick(rng);
                    std::size_t b = pick(rng);
                    if (a != b)
                        std::swap(local_ids[static_cast<std::size_t>(cam.camera_id)][a],
                                  local_ids[static_cast<std::size_t>(cam.camera_id)][b]);
                }
            }

            std::vector<char> visible(targets.size(), 1);
            for (const auto& t : targets)
                if (occluded(t.index, cam.camera_id, frame)) visible[static_cast<std::size_t>(t.index)] = 0;

            const RenderedFrame rendered = render_depth_frame(cam, boxes, visible);
            if (cfg.emit_depth) {
                ingest::DepthMap depth = rendered.depth;
                depth.frame = frame;
                ingest::write_depth(depth, (fs::path(out_dir) / "depth" /
                                            ingest::depth_filename(cam.camera_id, frame))
                                               .string());
            }

            // per-target silhouette bounds and bitmaps
            std::vector<int> px_count(targets.size(), 0);
            std::vector<std::array<int, 4>> bounds(targets.size(),
                                                   {cfg.image_width, cfg.image_height, -1, -1});
            for (int y = 0; y < cfg.image_height; ++y)
                for (int x = 0; x < cfg.image_width; ++x) {
                    const std::int16_t w = rendered.winner[static_cast<std::size_t>(y) * cfg.image_width + x];
                    if (w < 0) continue;
                    ++px_count[static_cast<std::size_t>(w)];
                    auto& b = bounds[static_cast<std::size_t>(w)];
                    b[0] = std::min(b[0], x);
                    b[1] = std::min(b[1], y);
                    b[2] = std::max(b[2], x);
                    b[3] = std::max(b[3], y);
                }

            std::vector<ingest::Detection2D>& dets = det_table[frame][cam.camera_id];
            for (const auto& t : targets) {
                const std::size_t ti = static_cast<std::size_t>(t.index);
                if (!visible[ti] || px_count[ti] == 0) continue;
                auto miss_rng = make_rng(cfg.seed, "miss", static_cast<std::uint64_t>(frame),
                                         static_cast<std::uint64_t>(cam.camera_id),
                                         static_cast<std::uint64_t>(t.index));
                if (cfg.noise.miss_rate > 0.0 &&
                    std::uniform_real_distribution<double>(0.0, 1.0)(miss_rng) < cfg.noise.miss_rate)
                    continue;

                ingest::Detection2D det;
                det.camera_id = cam.camera_id;
                det.frame = frame;
                det.x1 = bounds[ti][0];
                det.y1 = bounds[ti][1];
                det.x2 = bounds[ti][2] + 1;
                det.y2 = bounds[ti][3] + 1;
                if (cfg.noise.box_jitter_px > 0.0) {
                    auto jrng = make_rng(cfg.seed, "jitter", static_cast<std::uint64_t>(frame),
                                         static_cast<std::uint64_t>(cam.camera_id),
                                         static_cast<std::uint64_t>(t.index));
                    std::normal_distribution<double> g(0.0, cfg.noise.box_jitter_px);
                    det.x1 += g(jrng);
                    det.y1 += g(jrng);
                    det.x2 += g(jrng);
                    det.y2 += g(jrng);
                    det.x1 = std::clamp(det.x1, 0.0, static_cast<double>(cfg.image_width - 2));
                    det.y1 = std::clamp(det.y1, 0.0, static_cast<double>(cfg.image_height - 2));
                    det.x2 = std::clamp(det.x2, det.x1 + 1.0, static_cast<double>(cfg.image_width));
                    det.y2 = std::clamp(det.y2, det.y1 + 1.0, static_cast<double>(cfg.image_height));
                }
                det.score = 1.0;
                det.class_id = t.cls.class_id;

                det.embedding = bases[ti];
                if (cfg.noise.embed_noise > 0.0) {
                    auto erng = make_rng(cfg.seed, "embed-obs", static_cast<std::uint64_t>(frame),
                                         static_cast<std::uint64_t>(cam.camera_id),
                                         static_cast<std::uint64_t>(t.index));
                    std::normal_distribution<double> g(0.0, cfg.noise.embed_noise);
                    for (double& v : det.embedding) v += g(erng);
                }
                double sq = 0.0;
                for (double v : det.embedding) sq += v * v;
                const double norm = std::sqrt(sq);
                for (double& v : det.embedding) v /= norm;

                if (cfg.emit_keypoints && t.cls.pedestrian) {
                    const Obb& obb = boxes[ti];
                    const double cs = std::cos(obb.yaw), sn = std::sin(obb.yaw);
                    for (const auto& off : kKeypointOffsets) {
                        const double lx = off.fx * t.cls.length;
                        const double ly = off.fy * t.cls.width;
                        const double lz = off.fz * t.cls.height;
                        const Vec3 w{obb.cx + cs * lx - sn * ly, obb.cy + sn * lx + cs * ly, lz};
                        const Vec3 pc = geom::world_to_camera(w, cam);
                        ingest::Keypoint kp;
                        if (pc.z > 1e-6) {
                            const auto px = geom::project_camera_to_pixel(pc, cam);
                            kp = {px.u, px.v, 1.0};
                        }
                        det.keypoints.push_back(kp);
                    }
                }

                if (cfg.emit_local_ids)
                    det.local_track_id = local_ids[static_cast<std::size_t>(cam.camera_id)][ti];

                if (cfg.emit_masks) {
                    ingest::Bitmap bmp;
                    bmp.width = cfg.image_width;
                    bmp.height = cfg.image_height;
                    bmp.data.assign(static_cast<std::size_t>(cfg.image_width) * cfg.image_height, 0);
                    for (int y = bounds[ti][1]; y <= bounds[ti][3]; ++y)
                        for (int x = bounds[ti][0]; x <= bounds[ti][2]; ++x)
                            if (rendered.winner[static_cast<std::size_t>(y) * cfg.image_width + x] ==
                                static_cast<std::int16_t>(ti))
                                bmp.set(x, y, 1);
                    masks.push_back(ingest::encode_rle(bmp, cam.camera_id, frame,
                                                       static_cast<int>(dets.size())));
                }
                dets.push_back(std::move(det));
                ++summary.detections;
            }
        }
    }

    ingest::write_detections(det_table, (fs::path(out_dir) / "detections.jsonl").string());
    if (cfg.emit_masks) ingest::write_masks(masks, (fs::path(out_dir) / "masks.jsonl").string());
    ingest::write_results(gt_rows, (fs::path(out_dir) / "gt.txt").string());
    return summary;
}

} // namespace mtmc::synth
