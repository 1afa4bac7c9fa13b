#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace flatpose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

using Polygon2 = std::vector<Vec2>;

constexpr double kPi = std::numbers::pi;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Rotation about +z by `angle` radians.
inline Mat3 rotation_z(double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    Mat3 r;
    r << c, -s, 0.0,
         s, c, 0.0,
         0.0, 0.0, 1.0;
    return r;
}

/// 180 degree turn about a unit in-plane axis (ax, ay, 0). Built
/// element-wise so the z row/column stay exact.
inline Mat3 flip_about_inplane_axis(double ax, double ay) {
    Mat3 r;
    r << 2.0 * ax * ax - 1.0, 2.0 * ax * ay, 0.0,
         2.0 * ax * ay, 2.0 * ay * ay - 1.0, 0.0,
         0.0, 0.0, -1.0;
    return r;
}

inline Mat3 axis_angle(const Vec3& axis, double angle) {
    return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

/// Rigid transform x -> R x + t. Model frame to camera (or world) frame,
/// translation in millimeters.
struct Pose {
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();

    static Pose identity() { return {}; }

    Vec3 apply(const Vec3& x) const { return R * x + t; }

    Pose inverse() const {
        Pose p;
        p.R = R.transpose();
        p.t = -(p.R * t);
        return p;
    }

    /// (this * other)(x) = this(other(x))
    Pose operator*(const Pose& other) const {
        Pose p;
        p.R = R * other.R;
        p.t = R * other.t + t;
        return p;
    }

    bool is_valid(double tol = 1e-9) const {
        const Mat3 e = R.transpose() * R - Mat3::Identity();
        return e.cwiseAbs().maxCoeff() < tol && R.determinant() > 0.0 && t.allFinite();
    }
};

/// Angle of the relative rotation a^T b, in radians.
inline double rotation_angle_between(const Mat3& a, const Mat3& b) {
    const double c = std::clamp(((a.transpose() * b).trace() - 1.0) / 2.0, -1.0, 1.0);
    return std::acos(c);
}

}  // namespace flatpose
