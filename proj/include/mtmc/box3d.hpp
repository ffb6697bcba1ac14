#pragma once

namespace mtmc {

// Oriented 3D bounding box: center, dimensions, yaw about the vertical axis.
struct Box3D {
    double x = 0.0, y = 0.0, z = 0.0;        // center, meters
    double length = 0.0, width = 0.0, height = 0.0;
    double yaw = 0.0;                        // radians, (-pi, pi]
    double score = 0.0;
    int class_id = 0;
    int global_id = 0;

    double volume() const { return length * width * height; }
};

} // namespace mtmc
