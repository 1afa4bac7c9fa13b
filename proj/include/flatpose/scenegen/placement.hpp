#pragma once

#include "flatpose/core/error.hpp"
#include "flatpose/core/rng.hpp"
#include "flatpose/core/types.hpp"
#include "flatpose/geometry/mesh.hpp"
#include "flatpose/geometry/polygon.hpp"
#include "flatpose/raster/camera.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace flatpose::scenegen {

/// Extent of the mesh along its extrusion (z) axis.
inline double mesh_thickness(const geometry::TriMesh& mesh) {
    const auto [lo, hi] = geometry::mesh_bounds(mesh);
    return hi.z() - lo.z();
}

/// In-plane angle (radians, [0, 2 pi)) of a resting pose.
inline double resting_angle(const Pose& world_pose) {
    double a = std::atan2(world_pose.R(1, 0), world_pose.R(0, 0));
    if (a < 0.0) a += 2.0 * kPi;
    return a;
}

/**
 * Random world pose of a flat part lying on the z = 0 plane: bottom face
 * on the plane, uniform in-plane angle, uniform position in the square
 * [-extent/2, extent/2]^2, flipped upside down with probability 0.5.
 */
inline Pose sample_resting_pose(const geometry::TriMesh& mesh, double plane_extent, Rng& rng) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
    std::uniform_real_distribution<double> pos(-0.5 * plane_extent, 0.5 * plane_extent);
    std::bernoulli_distribution flip(0.5);
    const double theta = angle(rng);
    const double x = pos(rng);
    const double y = pos(rng);
    Pose p;
    p.R = rotation_z(theta);
    if (flip(rng)) p.R = p.R * Vec3(1.0, -1.0, -1.0).asDiagonal();
    p.t = Vec3(x, y, 0.5 * mesh_thickness(mesh));
    return p;
}

inline Pose sample_resting_pose(const geometry::TriMesh& mesh, double plane_extent, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    return sample_resting_pose(mesh, plane_extent, rng);
}

/// Convex hull of the part's projection onto the ground plane.
inline Polygon2 footprint(const geometry::TriMesh& mesh, const Pose& world_pose) {
    std::vector<Vec2> pts;
    pts.reserve(mesh.vertices.size());
    for (const auto& v : mesh.vertices) {
        const Vec3 w = world_pose.apply(v);
        pts.emplace_back(w.x(), w.y());
    }
    return geometry::convex_hull(std::move(pts));
}

/// Camera placement on a ring above the plane, looking at the origin.
struct CameraSampler {
    double distance_min = 600.0;   // mm
    double distance_max = 1200.0;  // mm
    double elevation_min_deg = 30.0;
    double elevation_max_deg = 80.0;
    double roll_jitter_deg = 10.0;
    raster::CameraIntrinsics intrinsics;

    void validate() const {
        intrinsics.validate();
        if (!(distance_min > 0.0 && distance_min <= distance_max)) throw InvalidArgument("bad camera distance range");
        if (!(elevation_min_deg > 0.0 && elevation_min_deg <= elevation_max_deg && elevation_max_deg < 90.0))
            throw InvalidArgument("camera elevation range must lie in (0, 90) degrees");
        if (roll_jitter_deg < 0.0) throw InvalidArgument("roll jitter must be >= 0");
    }
};

/**
 * Samples a world-to-camera pose. When the sampled distance is too short
 * for a sphere of `scene_radius` around the origin to fit in the field of
 * view, the camera backs off along the same ray until it does.
 */
inline Pose sample_camera(const CameraSampler& s, double scene_radius, Rng& rng) {
    std::uniform_real_distribution<double> dist(s.distance_min, s.distance_max);
    std::uniform_real_distribution<double> elev(deg2rad(s.elevation_min_deg), deg2rad(s.elevation_max_deg));
    std::uniform_real_distribution<double> azim(0.0, 2.0 * kPi);
    std::uniform_real_distribution<double> roll(-deg2rad(s.roll_jitter_deg), deg2rad(s.roll_jitter_deg));
    double d = dist(rng);
    const double el = elev(rng);
    const double az = azim(rng);
    const double rl = roll(rng);

    const auto& k = s.intrinsics;
    // smallest half-angle from the optical axis to an image border
    const double half = std::min({std::atan(k.cx / k.fx), std::atan((k.width - k.cx) / k.fx),
                                  std::atan(k.cy / k.fy), std::atan((k.height - k.cy) / k.fy)});
    d = std::max(d, scene_radius / std::sin(half));

    const Vec3 eye(d * std::cos(el) * std::cos(az), d * std::cos(el) * std::sin(az), d * std::sin(el));
    Pose w2c = raster::look_at(eye, Vec3::Zero(), Vec3::UnitZ());
    w2c.R = rotation_z(rl) * w2c.R;  // roll about the optical axis
    w2c.t = rotation_z(rl) * w2c.t;
    return w2c;
}

}  // namespace flatpose::scenegen
