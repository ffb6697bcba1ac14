#pragma once

#include <cstdint>
#include <vector>

#include "mtmc/box3d.hpp"
#include "mtmc/fuse.hpp"
#include "mtmc/ingest.hpp"
#include "mtmc/lift.hpp"
#include "mtmc/synth.hpp"

// Single-threaded reference implementations. Tests compare the OpenMP
// kernels against these; the bench tool times both sides. Nothing here is
// linked into the pipeline.
namespace mtmc::serial {

// Textbook DBSCAN, O(n^2) (Ester et al. seed-set expansion), index order.
std::vector<int> dbscan(const std::vector<lift::CloudPoint>& points, double epsilon, int min_samples);

// Per-pixel 3x3 neighborhood check.
ingest::Bitmap erode(const ingest::Bitmap& bmp);

// Straight nested-loop mask lifting (single camera input set).
lift::TargetCloud lift_target(const std::vector<lift::LiftInput>& inputs, int class_id, int global_id,
                              const lift::LiftParams& params);

// Pixel-by-pixel z-buffer without the threaded row loop.
synth::RenderedFrame render_depth_frame(const geom::CameraCalibration& calib,
                                        const std::vector<synth::Obb>& target_boxes,
                                        const std::vector<char>& visible);

// Literal transcription of the volume-sorted greedy IoA fusion procedure,
// written independently of fuse::fuse.
fuse::FuseOutput fuse_boxes(const std::vector<Box3D>& boxes, double thr);

// Monte-Carlo rotated-box IoU estimate with `samples` points drawn inside
// box a (deterministic for a fixed seed).
double iou3d_monte_carlo(const Box3D& a, const Box3D& b, std::size_t samples, std::uint64_t seed);

} // namespace mtmc::serial
