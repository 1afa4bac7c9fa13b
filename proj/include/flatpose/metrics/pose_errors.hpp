#pragma once

// Symmetry-aware pose errors: MSSD (mm), MSPD (px) and VSD (fraction).

#include "flatpose/core/error.hpp"
#include "flatpose/core/types.hpp"
#include "flatpose/geometry/mesh.hpp"
#include "flatpose/geometry/symmetry.hpp"
#include "flatpose/raster/camera.hpp"
#include "flatpose/raster/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace flatpose::metrics {

/// min over S of max over vertices x of |est(x) - gt(S x)|.
inline double e_mssd(const Pose& est, const Pose& gt, const geometry::TriMesh& mesh, const geometry::SymmetrySet& syms) {
    double best = std::numeric_limits<double>::infinity();
    for (const Mat3& s : syms.transforms) {
        const Mat3 rg = gt.R * s;
        double worst = 0.0;
        for (const auto& x : mesh.vertices) {
            worst = std::max(worst, ((est.R * x + est.t) - (rg * x + gt.t)).squaredNorm());
            if (worst >= best * best) break;
        }
        best = std::min(best, std::sqrt(worst));
    }
    return best;
}

/// As e_mssd but on projected vertices, in pixels. Throws
/// raster::BehindCameraError if any vertex projects from z <= 0.
inline double e_mspd(const Pose& est, const Pose& gt, const geometry::TriMesh& mesh, const geometry::SymmetrySet& syms,
                     const raster::CameraIntrinsics& cam) {
    const auto pe = raster::project_all(mesh.vertices, est, cam);
    double best = std::numeric_limits<double>::infinity();
    for (const Mat3& s : syms.transforms) {
        Pose g = gt;
        g.R = gt.R * s;
        double worst = 0.0;
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
            worst = std::max(worst, (pe[i] - raster::project(g.apply(mesh.vertices[i]), cam)).squaredNorm());
        best = std::min(best, std::sqrt(worst));
    }
    return best;
}

/**
 * VSD from precomputed solo depth renders of the estimate and the ground
 * truth. Visibility of each is taken against the ground-truth scene depth.
 * A pixel of the union of both visibility masks is an error when it is not
 * in both masks or when the two depths differ by more than tau_mm.
 */
inline double e_vsd_from_depth(const raster::DepthMap& est_depth, const raster::DepthMap& gt_depth,
                               const raster::DepthMap& scene_depth, double tau_mm,
                               double delta = raster::kDefaultVisibilityDelta) {
    if (!est_depth.same_shape(gt_depth) || !est_depth.same_shape(scene_depth))
        throw InvalidArgument("e_vsd: depth maps differ in size");
    std::size_t uni = 0, bad = 0;
    for (std::size_t i = 0; i < scene_depth.size(); ++i) {
        const float d = scene_depth.data[i];
        const float e = est_depth.data[i];
        const float g = gt_depth.data[i];
        const bool ve = e > 0.0f && (d == 0.0f || e <= d + delta);
        const bool vg = g > 0.0f && (d == 0.0f || g <= d + delta);
        if (!ve && !vg) continue;
        ++uni;
        if (!(ve && vg) || std::abs(static_cast<double>(e) - static_cast<double>(g)) > tau_mm) ++bad;
    }
    return uni == 0 ? 0.0 : static_cast<double>(bad) / static_cast<double>(uni);
}

inline double e_vsd(const Pose& est, const Pose& gt, const geometry::TriMesh& mesh, const raster::DepthMap& scene_depth,
                    const raster::CameraIntrinsics& cam, double tau_mm, double delta = raster::kDefaultVisibilityDelta) {
    if (scene_depth.width != cam.width || scene_depth.height != cam.height)
        throw InvalidArgument("e_vsd: scene depth does not match the camera");
    const auto de = raster::render_depth(mesh, est, cam).depth;
    const auto dg = raster::render_depth(mesh, gt, cam).depth;
    return e_vsd_from_depth(de, dg, scene_depth, tau_mm, delta);
}

}  // namespace flatpose::metrics
