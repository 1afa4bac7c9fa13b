#pragma once

#include "flatpose/core/error.hpp"
#include "flatpose/core/types.hpp"

#include <nlohmann/json.hpp>

#include <vector>

namespace flatpose::raster {

/// Pinhole intrinsics in pixels. Pixel (u, v) covers [u, u+1) x [v, v+1);
/// its center is (u + 0.5, v + 0.5).
struct CameraIntrinsics {
    double fx = 600.0;
    double fy = 600.0;
    double cx = 320.0;
    double cy = 240.0;
    int width = 640;
    int height = 480;

    bool operator==(const CameraIntrinsics&) const = default;

    Mat3 K() const {
        Mat3 k;
        k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
        return k;
    }

    void validate() const {
        if (!(fx > 0.0 && fy > 0.0)) throw InvalidArgument("focal lengths must be > 0");
        if (width <= 0 || height <= 0) throw InvalidArgument("image size must be positive");
        if (!(cx > 0.0 && cx < width && cy > 0.0 && cy < height))
            throw InvalidArgument("principal point must lie inside the image");
    }

    /// Scale used by MSPD thresholds: image width / 640.
    double r() const { return static_cast<double>(width) / 640.0; }
};

inline CameraIntrinsics intrinsics_from_K(const Mat3& k, int width, int height) {
    CameraIntrinsics c{k(0, 0), k(1, 1), k(0, 2), k(1, 2), width, height};
    c.validate();
    return c;
}

/// A point at or behind the camera plane was projected.
class BehindCameraError : public GeometryError {
public:
    using GeometryError::GeometryError;
};

inline Vec2 project(const Vec3& p, const CameraIntrinsics& cam) {
    if (!(p.z() > 0.0)) throw BehindCameraError("cannot project a point with z <= 0");
    return {cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy};
}

/// Transforms by `pose` then projects every point.
inline std::vector<Vec2> project_all(const std::vector<Vec3>& pts, const Pose& pose, const CameraIntrinsics& cam) {
    std::vector<Vec2> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back(project(pose.apply(p), cam));
    return out;
}

/// Camera-frame point at optical-axis depth z seen through pixel position (u, v).
inline Vec3 backproject(double u, double v, double z, const CameraIntrinsics& cam) {
    return {(u - cam.cx) / cam.fx * z, (v - cam.cy) / cam.fy * z, z};
}

/**
 * World-to-camera pose for a camera at `eye` looking at `target`, in the
 * x-right / y-down / z-forward convention. `up` is a world direction that
 * should appear upwards in the image.
 */
inline Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
    const Vec3 z = (target - eye).normalized();
    Vec3 x = z.cross(up);
    if (x.norm() < 1e-12) throw GeometryError("look_at: up vector parallel to viewing direction");
    x.normalize();
    const Vec3 y = z.cross(x);
    Pose w2c;
    w2c.R.row(0) = x.transpose();
    w2c.R.row(1) = y.transpose();
    w2c.R.row(2) = z.transpose();
    w2c.t = -(w2c.R * eye);
    return w2c;
}

inline nlohmann::json k_to_json(const CameraIntrinsics& c) {
    const Mat3 k = c.K();
    auto arr = nlohmann::json::array();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) arr.push_back(k(i, j));
    return arr;
}

}  // namespace flatpose::raster
