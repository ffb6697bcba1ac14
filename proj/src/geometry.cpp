#include "mtmc/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "mtmc/errors.hpp"

namespace mtmc::geom {

void CameraCalibration::validate() const {
    const Mat3 rtr = R.transposed() * R;
    const Mat3 eye = Mat3::identity();
    double max_dev = 0.0;
    for (int i = 0; i < 9; ++i) max_dev = std::max(max_dev, std::abs(rtr.m[i] - eye.m[i]));
    if (max_dev > 1e-9)
        throw ValidationError("camera " + std::to_string(camera_id) + ": R is not orthonormal");
    if (std::abs(R.det() - 1.0) > 1e-9)
        throw ValidationError("camera " + std::to_string(camera_id) + ": det(R) != 1");
    if (!(fu > 0.0) || !(fv > 0.0))
        throw ValidationError("camera " + std::to_string(camera_id) + ": focal lengths must be positive");
    if (std::abs(H.det()) <= 1e-12)
        throw ValidationError("camera " + std::to_string(camera_id) + ": homography is singular");
    if (image_width <= 0 || image_height <= 0)
        throw ValidationError("camera " + std::to_string(camera_id) + ": bad image size");
}

Vec3 backproject_pixel(double u, double v, double z, const CameraCalibration& calib) {
    if (!(z > 0.0)) throw ValidationError("backproject_pixel: depth must be positive");
    return {(u - calib.cu) * z / calib.fu, (v - calib.cv) * z / calib.fv, z};
}

Vec3 camera_to_world(const Vec3& p_cam, const CameraCalibration& calib) {
    return calib.R.transposed() * (p_cam - calib.t);
}

Vec3 world_to_camera(const Vec3& p_world, const CameraCalibration& calib) {
    return calib.R * p_world + calib.t;
}

Pixel project_camera_to_pixel(const Vec3& p_cam, const CameraCalibration& calib) {
    if (!(p_cam.z > 0.0)) throw ValidationError("project_camera_to_pixel: point behind camera");
    return {calib.fu * p_cam.x / p_cam.z + calib.cu, calib.fv * p_cam.y / p_cam.z + calib.cv};
}

Pixel homography_project(double u, double v, const Mat3& H) {
    const Vec3 q = H * Vec3{u, v, 1.0};
    if (std::abs(q.z) < 1e-12) throw ValidationError("homography_project: point at infinity");
    return {q.x / q.z, q.y / q.z};
}

namespace {

nlohmann::ordered_json calib_to_json(const CameraCalibration& c) {
    nlohmann::ordered_json j;
    j["camera_id"] = c.camera_id;
    j["fu"] = c.fu;
    j["fv"] = c.fv;
    j["cu"] = c.cu;
    j["cv"] = c.cv;
    j["R"] = c.R.m;
    j["t"] = std::array<double, 3>{c.t.x, c.t.y, c.t.z};
    j["H"] = c.H.m;
    j["width"] = c.image_width;
    j["height"] = c.image_height;
    return j;
}

CameraCalibration calib_from_json(const nlohmann::json& j) {
    CameraCalibration c;
    c.camera_id = j.at("camera_id").get<int>();
    c.fu = j.at("fu").get<double>();
    c.fv = j.at("fv").get<double>();
    c.cu = j.at("cu").get<double>();
    c.cv = j.at("cv").get<double>();
    auto R = j.at("R").get<std::array<double, 9>>();
    c.R.m = R;
    auto t = j.at("t").get<std::array<double, 3>>();
    c.t = {t[0], t[1], t[2]};
    auto H = j.at("H").get<std::array<double, 9>>();
    c.H.m = H;
    c.image_width = j.at("width").get<int>();
    c.image_height = j.at("height").get<int>();
    for (double v : R)
        if (!std::isfinite(v)) throw ValidationError("calibration: non-finite rotation entry");
    for (double v : H)
        if (!std::isfinite(v)) throw ValidationError("calibration: non-finite homography entry");
    if (!c.t.finite()) throw ValidationError("calibration: non-finite translation");
    c.validate();
    return c;
}

} // namespace

std::vector<CameraCalibration> load_calibration(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open calibration file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw ValidationError("calibration parse error in " + path + ": " + e.what());
    }
    if (!doc.is_array()) throw ValidationError("calibration file must be a JSON array: " + path);
    std::vector<CameraCalibration> out;
    out.reserve(doc.size());
    for (const auto& j : doc) out.push_back(calib_from_json(j));
    return out;
}

void write_calibration(const std::vector<CameraCalibration>& calibs, const std::string& path) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const auto& c : calibs) doc.push_back(calib_to_json(c));
    std::ofstream out(path);
    if (!out) throw DataError("cannot write calibration file: " + path);
    out << doc.dump(2) << "\n";
}

} // namespace mtmc::geom
