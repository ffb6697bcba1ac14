#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mtmc/box3d.hpp"

namespace mtmc::ingest {

struct Keypoint {
    double u = 0.0, v = 0.0, conf = 0.0;
};

// One per-camera 2D observation.
struct Detection2D {
    int camera_id = 0;
    int frame = 0;
    double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
    double score = 0.0;
    int class_id = 0;
    std::vector<double> embedding;               // unit norm
    std::vector<Keypoint> keypoints;             // empty or exactly 14
    std::optional<int> local_track_id;           // bypass mode
};

// Dense depth grid, meters. Value 0 is the "no sample" sentinel.
struct DepthMap {
    int camera_id = 0;
    int frame = 0;
    int width = 0;
    int height = 0;
    std::vector<float> values;  // row-major, width*height

    float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

// Binary instance mask stored as COCO-style uncompressed RLE
// (column-major runs, first count is zeros).
struct InstanceMask {
    int camera_id = 0;
    int frame = 0;
    int det_index = 0;  // index into the (frame, camera) detection list
    int width = 0;
    int height = 0;
    std::vector<std::uint32_t> counts;
};

// Dense bitmap used while processing a mask.
struct Bitmap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // row-major, 0/1

    std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    void set(int x, int y, std::uint8_t v) { data[static_cast<std::size_t>(y) * width + x] = v; }
    std::size_t count() const;
};

Bitmap decode_rle(const InstanceMask& mask);
InstanceMask encode_rle(const Bitmap& bmp, int camera_id, int frame, int det_index);

// Morphological 3x3 erosion, one iteration: a pixel survives iff itself and
// all 8 neighbors are set (out-of-image neighbors count as unset). OpenMP.
Bitmap erode(const Bitmap& bmp);
InstanceMask erode_mask(const InstanceMask& mask);

// Per-class statistics required by box recovery and association gates.
struct ClassStats {
    struct Entry {
        double mean_length = 0.0;
        double mean_width = 0.0;
        double mean_height = 0.0;
        double mean_volume = 0.0;     // stored independently of the dims
        double dbscan_epsilon = 0.0;  // 0 = derive from mean dims
        double spatial_gate = 0.0;    // 0 = use config default
        double cluster_cut = 0.0;     // 0 = use config default
    };
    std::map<int, Entry> per_class;

    const Entry& require(int class_id) const;
    bool has(int class_id) const { return per_class.count(class_id) != 0; }
};

// Detections: JSON-lines, one detection per line, grouped on load by
// (frame, camera) and sorted by frame. Embeddings are renormalized when the
// norm deviates by < 1e-3, rejected otherwise.
//
// expected_dim > 0 enforces the embedding dimension.
using DetectionTable = std::map<int, std::map<int, std::vector<Detection2D>>>;  // frame -> camera -> dets
DetectionTable load_detections(const std::string& path, int expected_dim = 0);
void write_detections(const DetectionTable& table, const std::string& path);

// Depth files: 16-byte header (magic "DPTH", u32 width, u32 height,
// u32 reserved = 0), then width*height little-endian float32, row-major.
DepthMap load_depth(const std::string& path, int camera_id, int frame);
void write_depth(const DepthMap& depth, const std::string& path);
std::string depth_filename(int camera_id, int frame);

// Masks: JSON-lines, one RLE record per line keyed by (frame, camera_id,
// det_index).
using MaskTable = std::map<std::tuple<int, int, int>, InstanceMask>;  // (frame, camera, det) -> mask
MaskTable load_masks(const std::string& path);
void write_masks(const std::vector<InstanceMask>& masks, const std::string& path);

ClassStats load_class_stats(const std::string& path);
void write_class_stats(const ClassStats& stats, const std::string& path);

// Result rows, one 3D box per (frame, global_id):
//   frame class_id global_id x y z length width height yaw score
// space separated, reals with 6 decimals, yaw in (-pi, pi].
struct ResultRow {
    int frame = 0;
    int class_id = 0;
    int global_id = 0;
    Box3D box;
};

void write_results(const std::vector<ResultRow>& rows, const std::string& path);
std::vector<ResultRow> load_results(const std::string& path);
std::string format_result_row(const ResultRow& row);

// 2D-mode rows: frame camera_id global_id x1 y1 x2 y2 (reals, 6 decimals).
struct ResultRow2D {
    int frame = 0;
    int camera_id = 0;
    int global_id = 0;
    double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
};

std::string format_result_row_2d(const ResultRow2D& row);

} // namespace mtmc::ingest
