#pragma once

#include <string>
#include <vector>

#include "mtmc/mat3.hpp"

namespace mtmc::geom {

// Calibration for one camera. Extrinsics follow the world->camera
// convention: X_c = R * X_w + t. H maps image pixels to top-down map
// coordinates on the ground plane (projective).
struct CameraCalibration {
    int camera_id = 0;
    double fu = 0.0, fv = 0.0;  // focal lengths, pixels
    double cu = 0.0, cv = 0.0;  // principal point, pixels
    Mat3 R;                     // world -> camera rotation
    Vec3 t;                     // translation, meters
    Mat3 H;                     // image -> top-down map homography
    int image_width = 0;
    int image_height = 0;

    // Throws ValidationError when R is not orthonormal, focal lengths are
    // not positive, or H is singular.
    void validate() const;

    // Camera center in world coordinates: -R^T t.
    Vec3 center() const { return R.transposed() * (Vec3{0, 0, 0} - t); }
};

struct Pixel {
    double u = 0.0, v = 0.0;
};

// Depth z is planar depth (camera-frame Z), not ray length.
Vec3 backproject_pixel(double u, double v, double z, const CameraCalibration& calib);

Vec3 camera_to_world(const Vec3& p_cam, const CameraCalibration& calib);
Vec3 world_to_camera(const Vec3& p_world, const CameraCalibration& calib);

// Throws ValidationError when Z_c <= 0 (point behind the camera).
Pixel project_camera_to_pixel(const Vec3& p_cam, const CameraCalibration& calib);

// Maps (u, v) through H and dehomogenizes. Throws ValidationError when the
// homogeneous w component vanishes (point at infinity).
Pixel homography_project(double u, double v, const Mat3& H);

// Calibration file: JSON array of per-camera records. Validates every entry.
std::vector<CameraCalibration> load_calibration(const std::string& path);
void write_calibration(const std::vector<CameraCalibration>& calibs, const std::string& path);

} // namespace mtmc::geom
