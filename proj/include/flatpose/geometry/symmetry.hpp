#pragma once

#include "flatpose/core/error.hpp"
#include "flatpose/core/types.hpp"
#include "flatpose/geometry/mesh.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

namespace flatpose::geometry {

inline constexpr double kDefaultSymmetryStepDeg = 1.0;
inline constexpr double kDefaultSymmetryTolerance = 0.05;  // mm

/// Discrete rotation group (about the model origin) mapping a mesh onto
/// itself. transforms[0] is the identity.
struct SymmetrySet {
    std::vector<Mat3> transforms{Mat3::Identity()};

    std::size_t size() const { return transforms.size(); }
};

/// Uniform hash grid answering "is any point within r of q".
class PointHash3 {
public:
    PointHash3(const std::vector<Vec3>& pts, double cell) : pts_(pts), cell_(cell) {
        for (std::uint32_t i = 0; i < pts.size(); ++i) cells_[key(cell_of(pts[i]))].push_back(i);
    }

    bool any_within(const Vec3& q, double r) const {
        const auto c = cell_of(q);
        const int reach = static_cast<int>(std::ceil(r / cell_));
        const double r2 = r * r;
        for (int dx = -reach; dx <= reach; ++dx)
            for (int dy = -reach; dy <= reach; ++dy)
                for (int dz = -reach; dz <= reach; ++dz) {
                    const auto it = cells_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
                    if (it == cells_.end()) continue;
                    for (const auto i : it->second)
                        if ((pts_[i] - q).squaredNorm() <= r2) return true;
                }
        return false;
    }

private:
    std::array<std::int64_t, 3> cell_of(const Vec3& p) const {
        return {static_cast<std::int64_t>(std::floor(p.x() / cell_)), static_cast<std::int64_t>(std::floor(p.y() / cell_)),
                static_cast<std::int64_t>(std::floor(p.z() / cell_))};
    }
    static std::uint64_t key(const std::array<std::int64_t, 3>& c) {
        const auto h = [](std::int64_t v) { return static_cast<std::uint64_t>(v) * 0x9e3779b97f4a7c15ULL; };
        return h(c[0]) ^ (h(c[1]) >> 1) ^ (h(c[2]) << 1) ^ (static_cast<std::uint64_t>(c[2]) * 0xc2b2ae3d27d4eb4fULL);
    }

    const std::vector<Vec3>& pts_;
    double cell_;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
};

/// Symmetric Hausdorff distance between V and R V is at most `tol`.
inline bool maps_onto_itself(const std::vector<Vec3>& v, const PointHash3& index, const Mat3& r, double tol) {
    for (const auto& p : v)
        if (!index.any_within(r * p, tol)) return false;
    const Mat3 rt = r.transpose();
    for (const auto& p : v)
        if (!index.any_within(rt * p, tol)) return false;
    return true;
}

/// Unit eigenvectors of the in-plane second-moment matrix about the origin.
inline std::array<Vec2, 2> inplane_principal_axes(const std::vector<Vec3>& v) {
    Mat2 m = Mat2::Zero();
    for (const auto& p : v) {
        m(0, 0) += p.x() * p.x();
        m(0, 1) += p.x() * p.y();
        m(1, 1) += p.y() * p.y();
    }
    m(1, 0) = m(0, 1);
    Eigen::SelfAdjointEigenSolver<Mat2> es(m);
    return {es.eigenvectors().col(0).normalized(), es.eigenvectors().col(1).normalized()};
}

/**
 * Finds rotations about the extrusion (z) axis at multiples of
 * `angular_step_deg` plus 180 degree flips about the two in-plane principal
 * axes that map the vertex set onto itself within `tolerance`.
 *
 * The rotations kept are the largest cyclic subgroup inside the accepted
 * angles; flips are kept only if every flip of the resulting dihedral coset
 * passes as well, so the output is closed under composition.
 */
inline SymmetrySet detect_symmetries(const TriMesh& mesh, double angular_step_deg = kDefaultSymmetryStepDeg,
                                     double tolerance = kDefaultSymmetryTolerance) {
    if (!(angular_step_deg > 0.0)) throw InvalidArgument("angular step must be > 0");
    if (!(tolerance > 0.0)) throw InvalidArgument("symmetry tolerance must be > 0");
    const double steps_f = 360.0 / angular_step_deg;
    const long steps = std::lround(steps_f);
    if (steps < 1 || std::abs(steps_f - static_cast<double>(steps)) > 1e-9)
        throw InvalidArgument("angular step must divide 360");

    const auto& v = mesh.vertices;
    const PointHash3 index(v, tolerance);
    auto rot = [&](long k) { return rotation_z(deg2rad(angular_step_deg * static_cast<double>(k))); };

    std::vector<bool> accepted(static_cast<std::size_t>(steps), false);
    accepted[0] = true;
    for (long k = 1; k < steps; ++k) accepted[static_cast<std::size_t>(k)] = maps_onto_itself(v, index, rot(k), tolerance);

    long generator = steps;  // subgroup {0, g, 2g, ...} with g | steps
    for (long g = 1; g < steps; ++g) {
        if (steps % g != 0) continue;
        bool all = true;
        for (long k = g; k < steps && all; k += g) all = accepted[static_cast<std::size_t>(k)];
        if (all) {
            generator = g;
            break;
        }
    }

    SymmetrySet out;
    for (long k = generator; k < steps; k += generator) out.transforms.push_back(rot(k));
    const std::size_t rotations = out.transforms.size();

    for (const auto& axis : inplane_principal_axes(v)) {
        const Mat3 flip = flip_about_inplane_axis(axis.x(), axis.y());
        if (!maps_onto_itself(v, index, flip, tolerance)) continue;
        std::vector<Mat3> coset;
        bool all = true;
        for (std::size_t i = 0; i < rotations && all; ++i) {
            const Mat3 f = out.transforms[i] * flip;
            all = (i == 0) || maps_onto_itself(v, index, f, tolerance);
            coset.push_back(f);
        }
        if (!all) continue;
        out.transforms.insert(out.transforms.end(), coset.begin(), coset.end());
        break;  // the coset already contains the other axis' flip when it is a symmetry
    }
    return out;
}

/// Every product of two elements is (within `tol`) again an element.
inline bool is_closed_under_composition(const SymmetrySet& s, double tol = 1e-6) {
    for (const auto& a : s.transforms)
        for (const auto& b : s.transforms) {
            const Mat3 p = a * b;
            bool found = false;
            for (const auto& c : s.transforms)
                if ((p - c).cwiseAbs().maxCoeff() < tol) {
                    found = true;
                    break;
                }
            if (!found) return false;
        }
    return true;
}

}  // namespace flatpose::geometry
