#pragma once

#include "flatpose/core/error.hpp"
#include "flatpose/core/types.hpp"
#include "flatpose/docparse/profile.hpp"
#include "flatpose/geometry/triangulate.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <utility>
#include <vector>

namespace flatpose::geometry {

inline constexpr double kDefaultSheetThickness = 1.0;  // mm

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;
    double diameter = 0.0;
    int category_id = 0;
};

/// Largest pairwise vertex distance, brute force.
inline double mesh_diameter(const std::vector<Vec3>& v) {
    double best = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j) best = std::max(best, (v[i] - v[j]).squaredNorm());
    return std::sqrt(best);
}

/// Enclosed volume via the divergence theorem; positive for outward winding.
inline double signed_volume(const TriMesh& m) {
    double acc = 0.0;
    for (const auto& t : m.triangles) acc += m.vertices[t[0]].dot(m.vertices[t[1]].cross(m.vertices[t[2]]));
    return acc / 6.0;
}

struct EdgeStats {
    std::size_t edge_count = 0;
    bool every_edge_twice = true;    // watertight
    bool consistently_oriented = true;  // each directed edge used once
};

inline EdgeStats edge_stats(const TriMesh& m) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> undirected;
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
    for (const auto& t : m.triangles) {
        for (int k = 0; k < 3; ++k) {
            const std::uint32_t a = t[k], b = t[(k + 1) % 3];
            ++undirected[{std::min(a, b), std::max(a, b)}];
            ++directed[{a, b}];
        }
    }
    EdgeStats s;
    s.edge_count = undirected.size();
    for (const auto& [e, c] : undirected)
        if (c != 2) s.every_edge_twice = false;
    for (const auto& [e, c] : directed)
        if (c != 1) s.consistently_oriented = false;
    return s;
}

inline long euler_characteristic(const TriMesh& m) {
    return static_cast<long>(m.vertices.size()) - static_cast<long>(edge_stats(m).edge_count) +
           static_cast<long>(m.triangles.size());
}

/**
 * Extrudes a profile into a closed prism of the given thickness.
 *
 * The model frame is centered on the outer loop's bounding box in x/y and
 * on the slab in z: caps at z = +/- thickness / 2. Vertex i of the profile
 * becomes vertex i (bottom) and i + n (top).
 */
inline TriMesh extrude(const docparse::Profile2D& profile, double thickness = kDefaultSheetThickness) {
    if (!(thickness > 0.0)) throw InvalidArgument("extrusion thickness must be > 0");
    const auto tris = triangulate(profile);
    const std::vector<Vec2> pts = profile_vertices(profile);
    const Vec2 center = bounds(profile.outer).center();
    const std::size_t n = pts.size();
    const double hz = 0.5 * thickness;

    TriMesh mesh;
    mesh.category_id = profile.category_id;
    mesh.vertices.reserve(2 * n);
    for (const auto& p : pts) mesh.vertices.emplace_back(p.x() - center.x(), p.y() - center.y(), -hz);
    for (const auto& p : pts) mesh.vertices.emplace_back(p.x() - center.x(), p.y() - center.y(), hz);

    const auto u32 = [](std::size_t v) { return static_cast<std::uint32_t>(v); };
    for (const auto& t : tris) {
        mesh.triangles.push_back({u32(t[0] + n), u32(t[1] + n), u32(t[2] + n)});  // top, faces +z
        mesh.triangles.push_back({u32(t[0]), u32(t[2]), u32(t[1])});              // bottom, faces -z
    }
    // Side walls. Every loop keeps the material on its left, so the right
    // side of each directed edge faces outwards.
    auto walls = [&](std::size_t first, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t a = first + i, b = first + (i + 1) % count;
            mesh.triangles.push_back({u32(a), u32(b), u32(b + n)});
            mesh.triangles.push_back({u32(a), u32(b + n), u32(a + n)});
        }
    };
    walls(0, profile.outer.size());
    std::size_t offset = profile.outer.size();
    for (const auto& h : profile.holes) {
        walls(offset, h.size());
        offset += h.size();
    }
    mesh.diameter = mesh_diameter(mesh.vertices);
    return mesh;
}

/// The profile translated into the model frame used by extrude().
inline docparse::Profile2D centered_profile(const docparse::Profile2D& profile) {
    const Vec2 center = bounds(profile.outer).center();
    docparse::Profile2D out = profile;
    for (auto& v : out.outer) v -= center;
    for (auto& h : out.holes)
        for (auto& v : h) v -= center;
    return out;
}

/// Axis-aligned bounds of the mesh vertices.
inline std::pair<Vec3, Vec3> mesh_bounds(const TriMesh& m) {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const auto& v : m.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    return {lo, hi};
}

}  // namespace flatpose::geometry
