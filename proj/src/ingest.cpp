#include "mtmc/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "mtmc/errors.hpp"

namespace mtmc::ingest {

std::size_t Bitmap::count() const {
    return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

Bitmap decode_rle(const InstanceMask& mask) {
    Bitmap bmp;
    bmp.width = mask.width;
    bmp.height = mask.height;
    bmp.data.assign(static_cast<std::size_t>(mask.width) * mask.height, 0);
    const std::size_t total = bmp.data.size();
    std::size_t pos = 0;
    std::uint8_t value = 0;  // runs start with zeros
    for (std::uint32_t run : mask.counts) {
        if (pos + run > total) throw ValidationError("RLE mask overruns its grid");
        if (value) {
            for (std::uint32_t k = 0; k < run; ++k) {
                // column-major pixel order
                const std::size_t idx = pos + k;
                const std::size_t x = idx / mask.height;
                const std::size_t y = idx % mask.height;
                bmp.data[y * mask.width + x] = 1;
            }
        }
        pos += run;
        value ^= 1;
    }
    if (pos != total) throw ValidationError("RLE mask does not cover its grid");
    return bmp;
}

InstanceMask encode_rle(const Bitmap& bmp, int camera_id, int frame, int det_index) {
    InstanceMask mask;
    mask.camera_id = camera_id;
    mask.frame = frame;
    mask.det_index = det_index;
    mask.width = bmp.width;
    mask.height = bmp.height;
    const std::size_t total = static_cast<std::size_t>(bmp.width) * bmp.height;
    std::uint8_t value = 0;
    std::uint32_t run = 0;
    for (std::size_t idx = 0; idx < total; ++idx) {
        const std::size_t x = idx / bmp.height;
        const std::size_t y = idx % bmp.height;
        const std::uint8_t px = bmp.data[y * bmp.width + x];
        if (px == value) {
            ++run;
        } else {
            mask.counts.push_back(run);
            value = px;
            run = 1;
        }
    }
    mask.counts.push_back(run);
    return mask;
}

Bitmap erode(const Bitmap& bmp) {
    Bitmap out;
    out.width = bmp.width;
    out.height = bmp.height;
    out.data.assign(bmp.data.size(), 0);
    const int w = bmp.width, h = bmp.height;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        if (y == 0 || y == h - 1) continue;  // border neighbors are unset
        for (int x = 1; x < w - 1; ++x) {
            std::uint8_t all = 1;
            for (int dy = -1; dy <= 1 && all; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    if (!bmp.at(x + dx, y + dy)) {
                        all = 0;
                        break;
                    }
            out.data[static_cast<std::size_t>(y) * w + x] = all;
        }
    }
    return out;
}

InstanceMask erode_mask(const InstanceMask& mask) {
    return encode_rle(erode(decode_rle(mask)), mask.camera_id, mask.frame, mask.det_index);
}

const ClassStats::Entry& ClassStats::require(int class_id) const {
    auto it = per_class.find(class_id);
    if (it == per_class.end())
        throw DataError("no class stats for class " + std::to_string(class_id));
    return it->second;
}

namespace {

void check_finite(double v, const char* what, int line_no) {
    if (!std::isfinite(v))
        throw ValidationError(std::string("non-finite ") + what + " at line " + std::to_string(line_no));
}

Detection2D detection_from_json(const nlohmann::json& j, int line_no, int expected_dim) {
    Detection2D d;
    d.camera_id = j.at("camera_id").get<int>();
    d.frame = j.at("frame").get<int>();
    if (d.frame < 0) throw ValidationError("negative frame at line " + std::to_string(line_no));
    const auto& box = j.at("box");
    if (!box.is_array() || box.size() != 4)
        throw ValidationError("box must have 4 entries at line " + std::to_string(line_no));
    d.x1 = box[0].get<double>();
    d.y1 = box[1].get<double>();
    d.x2 = box[2].get<double>();
    d.y2 = box[3].get<double>();
    check_finite(d.x1, "box", line_no);
    check_finite(d.y1, "box", line_no);
    check_finite(d.x2, "box", line_no);
    check_finite(d.y2, "box", line_no);
    if (!(d.x1 < d.x2) || !(d.y1 < d.y2))
        throw ValidationError("degenerate box at line " + std::to_string(line_no));
    d.score = j.at("score").get<double>();
    check_finite(d.score, "score", line_no);
    if (d.score < 0.0 || d.score > 1.0)
        throw ValidationError("score outside [0,1] at line " + std::to_string(line_no));
    d.class_id = j.at("class_id").get<int>();
    if (d.class_id < 0) throw ValidationError("negative class_id at line " + std::to_string(line_no));
    d.embedding = j.at("embedding").get<std::vector<double>>();
    if (d.embedding.empty())
        throw ValidationError("empty embedding at line " + std::to_string(line_no));
    if (expected_dim > 0 && static_cast<int>(d.embedding.size()) != expected_dim)
        throw ValidationError("embedding dimension " + std::to_string(d.embedding.size()) +
                              " != expected " + std::to_string(expected_dim) + " at line " +
                              std::to_string(line_no));
    double sq = 0.0;
    for (double v : d.embedding) {
        check_finite(v, "embedding", line_no);
        sq += v * v;
    }
    const double norm = std::sqrt(sq);
    if (std::abs(norm - 1.0) >= 1e-3)
        throw ValidationError("embedding norm deviates by >= 1e-3 at line " + std::to_string(line_no));
    if (norm != 1.0)
        for (double& v : d.embedding) v /= norm;
    if (j.contains("keypoints") && !j["keypoints"].is_null()) {
        const auto& kps = j["keypoints"];
        if (!kps.is_array() || kps.size() != 14)
            throw ValidationError("keypoints must have 14 entries at line " + std::to_string(line_no));
        for (const auto& kp : kps) {
            if (!kp.is_array() || kp.size() != 3)
                throw ValidationError("keypoint must be [u,v,conf] at line " + std::to_string(line_no));
            Keypoint k{kp[0].get<double>(), kp[1].get<double>(), kp[2].get<double>()};
            check_finite(k.u, "keypoint", line_no);
            check_finite(k.v, "keypoint", line_no);
            check_finite(k.conf, "keypoint", line_no);
            d.keypoints.push_back(k);
        }
    }
    if (j.contains("local_track_id") && !j["local_track_id"].is_null())
        d.local_track_id = j["local_track_id"].get<int>();
    return d;
}

nlohmann::ordered_json detection_to_json(const Detection2D& d) {
    nlohmann::ordered_json j;
    j["camera_id"] = d.camera_id;
    j["frame"] = d.frame;
    j["box"] = {d.x1, d.y1, d.x2, d.y2};
    j["score"] = d.score;
    j["class_id"] = d.class_id;
    j["embedding"] = d.embedding;
    if (!d.keypoints.empty()) {
        nlohmann::ordered_json kps = nlohmann::ordered_json::array();
        for (const auto& k : d.keypoints) kps.push_back({k.u, k.v, k.conf});
        j["keypoints"] = kps;
    }
    if (d.local_track_id) j["local_track_id"] = *d.local_track_id;
    return j;
}

} // namespace

DetectionTable load_detections(const std::string& path, int expected_dim) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open detections file: " + path);
    DetectionTable table;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw ValidationError("detections parse error at line " + std::to_string(line_no) + ": " +
                                  e.what());
        }
        Detection2D d = detection_from_json(j, line_no, expected_dim);
        table[d.frame][d.camera_id].push_back(std::move(d));
    }
    return table;
}

void write_detections(const DetectionTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write detections file: " + path);
    for (const auto& [frame, cams] : table)
        for (const auto& [cam, dets] : cams)
            for (const auto& d : dets) out << detection_to_json(d).dump() << "\n";
}

std::string depth_filename(int camera_id, int frame) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "cam%03d_frame%06d.dpth", camera_id, frame);
    return buf;
}

DepthMap load_depth(const std::string& path, int camera_id, int frame) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open depth file: " + path);
    char magic[4];
    std::uint32_t w = 0, h = 0, reserved = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    in.read(reinterpret_cast<char*>(&reserved), 4);
    if (!in || std::memcmp(magic, "DPTH", 4) != 0)
        throw ValidationError("bad depth header in " + path);
    DepthMap d;
    d.camera_id = camera_id;
    d.frame = frame;
    d.width = static_cast<int>(w);
    d.height = static_cast<int>(h);
    d.values.resize(static_cast<std::size_t>(w) * h);
    in.read(reinterpret_cast<char*>(d.values.data()),
            static_cast<std::streamsize>(d.values.size() * sizeof(float)));
    if (!in) throw DataError("truncated depth file: " + path);
    for (float v : d.values)
        if (!(v == 0.0f || (std::isfinite(v) && v > 0.0f)))
            throw ValidationError("depth value must be 0 (sentinel) or positive finite: " + path);
    return d;
}

void write_depth(const DepthMap& depth, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write depth file: " + path);
    const std::uint32_t w = static_cast<std::uint32_t>(depth.width);
    const std::uint32_t h = static_cast<std::uint32_t>(depth.height);
    const std::uint32_t reserved = 0;
    out.write("DPTH", 4);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    out.write(reinterpret_cast<const char*>(&reserved), 4);
    out.write(reinterpret_cast<const char*>(depth.values.data()),
              static_cast<std::streamsize>(depth.values.size() * sizeof(float)));
    if (!out) throw DataError("failed writing depth file: " + path);
}

MaskTable load_masks(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open masks file: " + path);
    MaskTable table;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw ValidationError("masks parse error at line " + std::to_string(line_no) + ": " + e.what());
        }
        InstanceMask m;
        m.frame = j.at("frame").get<int>();
        m.camera_id = j.at("camera_id").get<int>();
        m.det_index = j.at("det_index").get<int>();
        const auto& size = j.at("size");
        m.height = size[0].get<int>();
        m.width = size[1].get<int>();
        m.counts = j.at("counts").get<std::vector<std::uint32_t>>();
        std::uint64_t total = 0;
        for (std::uint32_t c : m.counts) total += c;
        if (total != static_cast<std::uint64_t>(m.width) * m.height)
            throw ValidationError("RLE counts do not cover the grid at line " + std::to_string(line_no));
        table[{m.frame, m.camera_id, m.det_index}] = std::move(m);
    }
    return table;
}

void write_masks(const std::vector<InstanceMask>& masks, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write masks file: " + path);
    for (const auto& m : masks) {
        nlohmann::ordered_json j;
        j["frame"] = m.frame;
        j["camera_id"] = m.camera_id;
        j["det_index"] = m.det_index;
        j["size"] = {m.height, m.width};
        j["counts"] = m.counts;
        out << j.dump() << "\n";
    }
}

ClassStats load_class_stats(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open class stats file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw ValidationError("class stats parse error in " + path + ": " + e.what());
    }
    ClassStats stats;
    if (!doc.is_object() || !doc.contains("classes"))
        throw ValidationError("class stats must contain a \"classes\" array: " + path);
    for (const auto& j : doc["classes"]) {
        const int cid = j.at("class_id").get<int>();
        ClassStats::Entry e;
        e.mean_length = j.at("mean_length").get<double>();
        e.mean_width = j.at("mean_width").get<double>();
        e.mean_height = j.at("mean_height").get<double>();
        e.mean_volume = j.at("mean_volume").get<double>();
        if (j.contains("dbscan_epsilon")) e.dbscan_epsilon = j["dbscan_epsilon"].get<double>();
        if (j.contains("spatial_gate")) e.spatial_gate = j["spatial_gate"].get<double>();
        if (j.contains("cluster_cut")) e.cluster_cut = j["cluster_cut"].get<double>();
        for (double v : {e.mean_length, e.mean_width, e.mean_height, e.mean_volume})
            if (!(std::isfinite(v) && v > 0.0))
                throw ValidationError("class stats values must be positive finite: class " +
                                      std::to_string(cid));
        for (double v : {e.dbscan_epsilon, e.spatial_gate, e.cluster_cut})
            if (!(std::isfinite(v) && v >= 0.0))
                throw ValidationError("class stats overrides must be >= 0: class " + std::to_string(cid));
        stats.per_class[cid] = e;
    }
    if (stats.per_class.empty()) throw ValidationError("class stats file has no classes: " + path);
    return stats;
}

void write_class_stats(const ClassStats& stats, const std::string& path) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& [cid, e] : stats.per_class) {
        nlohmann::ordered_json j;
        j["class_id"] = cid;
        j["mean_length"] = e.mean_length;
        j["mean_width"] = e.mean_width;
        j["mean_height"] = e.mean_height;
        j["mean_volume"] = e.mean_volume;
        if (e.dbscan_epsilon > 0.0) j["dbscan_epsilon"] = e.dbscan_epsilon;
        if (e.spatial_gate > 0.0) j["spatial_gate"] = e.spatial_gate;
        if (e.cluster_cut > 0.0) j["cluster_cut"] = e.cluster_cut;
        arr.push_back(j);
    }
    nlohmann::ordered_json doc;
    doc["classes"] = arr;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write class stats file: " + path);
    out << doc.dump(2) << "\n";
}

std::string format_result_row(const ResultRow& row) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d %d %d %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f", row.frame,
                  row.class_id, row.global_id, row.box.x, row.box.y, row.box.z, row.box.length,
                  row.box.width, row.box.height, row.box.yaw, row.box.score);
    return buf;
}

void write_results(const std::vector<ResultRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write results file: " + path);
    for (const auto& r : rows) out << format_result_row(r) << "\n";
}

std::vector<ResultRow> load_results(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open results file: " + path);
    std::vector<ResultRow> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ResultRow r;
        std::istringstream ss(line);
        if (!(ss >> r.frame >> r.class_id >> r.global_id >> r.box.x >> r.box.y >> r.box.z >>
              r.box.length >> r.box.width >> r.box.height >> r.box.yaw >> r.box.score))
            throw ValidationError("malformed result row at line " + std::to_string(line_no) + " of " +
                                  path);
        for (double v : {r.box.x, r.box.y, r.box.z, r.box.length, r.box.width, r.box.height, r.box.yaw,
                         r.box.score})
            if (!std::isfinite(v))
                throw ValidationError("non-finite result value at line " + std::to_string(line_no));
        r.box.class_id = r.class_id;
        r.box.global_id = r.global_id;
        rows.push_back(r);
    }
    return rows;
}

std::string format_result_row_2d(const ResultRow2D& row) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d %d %d %.6f %.6f %.6f %.6f", row.frame, row.camera_id,
                  row.global_id, row.x1, row.y1, row.x2, row.y2);
    return buf;
}

} // namespace mtmc::ingest
