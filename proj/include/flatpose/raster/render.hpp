#pragma once

// Z-buffer depth rasterizer. Depth is distance along the optical axis in
// millimeters, 0 where no surface was hit.

#include "flatpose/core/error.hpp"
#include "flatpose/core/image.hpp"
#include "flatpose/core/types.hpp"
#include "flatpose/geometry/mesh.hpp"
#include "flatpose/raster/camera.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace flatpose::raster {

using DepthMap = Image<float>;
using InstanceMask = Image<std::uint16_t>;  // 1-based instance index, 0 = background
using BinaryMask = Gray8;                   // 0 or 255

inline constexpr double kNearPlane = 1.0;                // mm
inline constexpr double kDefaultVisibilityDelta = 15.0;  // mm
inline constexpr double kDepthPngScale = 0.1;            // mm per PNG unit

struct PosedMesh {
    const geometry::TriMesh* mesh = nullptr;
    Pose pose;  // model -> camera
};

struct RenderResult {
    DepthMap depth;
    InstanceMask instances;
};

namespace detail {

struct Target {
    const CameraIntrinsics& cam;
    DepthMap& depth;
    InstanceMask& instances;
};

inline void draw_triangle(const Target& tg, const Vec3& a, const Vec3& b, const Vec3& c, std::uint16_t id) {
    const Vec2 s0 = project(a, tg.cam), s1 = project(b, tg.cam), s2 = project(c, tg.cam);
    const double area = (s1.x() - s0.x()) * (s2.y() - s0.y()) - (s1.y() - s0.y()) * (s2.x() - s0.x());
    if (std::abs(area) < 1e-12) return;

    const int W = tg.cam.width, H = tg.cam.height;
    const double minx = std::min({s0.x(), s1.x(), s2.x()}), maxx = std::max({s0.x(), s1.x(), s2.x()});
    const double miny = std::min({s0.y(), s1.y(), s2.y()}), maxy = std::max({s0.y(), s1.y(), s2.y()});
    const int x0 = std::max(0, static_cast<int>(std::ceil(minx - 0.5)));
    const int x1 = std::min(W - 1, static_cast<int>(std::floor(maxx - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(miny - 0.5)));
    const int y1 = std::min(H - 1, static_cast<int>(std::floor(maxy - 0.5)));
    if (x0 > x1 || y0 > y1) return;

    // Edge function e_i(p) = A_i px + B_i py + C_i is the doubled signed area
    // of the sub-triangle opposite vertex i.
    const double inv = 1.0 / area;
    const std::array<Vec2, 3> s{s0, s1, s2};
    double A[3], B[3], C[3];
    for (int i = 0; i < 3; ++i) {
        const Vec2& p = s[(i + 1) % 3];
        const Vec2& q = s[(i + 2) % 3];
        A[i] = (p.y() - q.y()) * inv;
        B[i] = (q.x() - p.x()) * inv;
        C[i] = (p.x() * q.y() - p.y() * q.x()) * inv;
    }
    const double iz0 = 1.0 / a.z(), iz1 = 1.0 / b.z(), iz2 = 1.0 / c.z();

    for (int y = y0; y <= y1; ++y) {
        const double py = y + 0.5;
        const double r0 = B[0] * py + C[0], r1 = B[1] * py + C[1], r2 = B[2] * py + C[2];
        float* drow = tg.depth.data.data() + static_cast<std::size_t>(y) * W;
        std::uint16_t* irow = tg.instances.data.data() + static_cast<std::size_t>(y) * W;
        // Narrow the scan to the span allowed by each edge, padded by one
        // pixel; the exact test below decides coverage.
        int xa = x0, xb = x1;
        const double rr[3] = {r0, r1, r2};
        bool empty = false;
        for (int i = 0; i < 3 && !empty; ++i) {
            if (A[i] > 0.0) {
                const double bound = -rr[i] / A[i] - 0.5;
                if (bound > x1 + 1) empty = true;
                else if (bound > xa) xa = std::max(xa, static_cast<int>(std::ceil(bound)) - 1);
            } else if (A[i] < 0.0) {
                const double bound = -rr[i] / A[i] - 0.5;
                if (bound < x0 - 1) empty = true;
                else if (bound < xb) xb = std::min(xb, static_cast<int>(std::floor(bound)) + 1);
            } else if (rr[i] < 0.0) {
                empty = true;
            }
        }
        if (empty) continue;
        for (int x = xa; x <= xb; ++x) {
            const double px = x + 0.5;
            const double w0 = A[0] * px + r0, w1 = A[1] * px + r1, w2 = A[2] * px + r2;
            if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
            const float z = static_cast<float>(1.0 / (w0 * iz0 + w1 * iz1 + w2 * iz2));
            float& d = drow[x];
            if (d == 0.0f || z < d) {
                d = z;
                irow[x] = id;
            }
        }
    }
}

// Clips a camera-space triangle to z >= near and rasterizes the pieces.
inline void draw_clipped(const Target& tg, const Vec3& a, const Vec3& b, const Vec3& c, std::uint16_t id) {
    const double n = kNearPlane;
    const bool ia = a.z() >= n, ib = b.z() >= n, ic = c.z() >= n;
    if (ia && ib && ic) {
        draw_triangle(tg, a, b, c, id);
        return;
    }
    if (!ia && !ib && !ic) return;
    const std::array<Vec3, 3> in{a, b, c};
    std::array<Vec3, 4> poly;
    int count = 0;
    for (int i = 0; i < 3; ++i) {
        const Vec3& p = in[i];
        const Vec3& q = in[(i + 1) % 3];
        const bool pin = p.z() >= n, qin = q.z() >= n;
        if (pin) poly[count++] = p;
        if (pin != qin) {
            const double t = (n - p.z()) / (q.z() - p.z());
            Vec3 m = p + t * (q - p);
            m.z() = n;
            poly[count++] = m;
        }
    }
    for (int i = 1; i + 1 < count; ++i) draw_triangle(tg, poly[0], poly[i], poly[i + 1], id);
}

}  // namespace detail

/**
 * Renders posed meshes into a depth map and an instance mask. Instance k of
 * `items` writes value k + 1. Pixels are covered when their center lies
 * inside or on the edge of a projected triangle; no back-face culling.
 */
inline RenderResult render_depth(const std::vector<PosedMesh>& items, const CameraIntrinsics& cam) {
    if (items.size() > std::numeric_limits<std::uint16_t>::max() - 1u)
        throw InvalidArgument("too many instances for a 16-bit instance mask");
    RenderResult out{DepthMap(cam.width, cam.height, 0.0f), InstanceMask(cam.width, cam.height, 0)};
    const detail::Target tg{cam, out.depth, out.instances};
    std::vector<Vec3> v;
    for (std::size_t k = 0; k < items.size(); ++k) {
        const auto& item = items[k];
        if (!item.mesh) throw InvalidArgument("render_depth: null mesh");
        v.resize(item.mesh->vertices.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = item.pose.apply(item.mesh->vertices[i]);
        const auto id = static_cast<std::uint16_t>(k + 1);
        for (const auto& t : item.mesh->triangles) detail::draw_clipped(tg, v[t[0]], v[t[1]], v[t[2]], id);
    }
    return out;
}

inline RenderResult render_depth(const geometry::TriMesh& mesh, const Pose& pose, const CameraIntrinsics& cam) {
    return render_depth(std::vector<PosedMesh>{{&mesh, pose}}, cam);
}

/// Pixels where the solo render is present and not hidden by more than
/// `delta` mm in the full scene render.
inline BinaryMask visibility_mask(const DepthMap& scene_depth, const DepthMap& solo_depth,
                                  double delta = kDefaultVisibilityDelta) {
    if (!scene_depth.same_shape(solo_depth)) throw InvalidArgument("visibility_mask: depth maps differ in size");
    BinaryMask m(solo_depth.width, solo_depth.height, 0);
    for (std::size_t i = 0; i < m.size(); ++i) {
        const float s = solo_depth.data[i];
        const float d = scene_depth.data[i];
        // a missing scene depth cannot occlude
        if (s > 0.0f && (d == 0.0f || s <= d + delta)) m.data[i] = 255;
    }
    return m;
}

inline BinaryMask coverage_mask(const DepthMap& depth) {
    BinaryMask m(depth.width, depth.height, 0);
    for (std::size_t i = 0; i < m.size(); ++i) m.data[i] = depth.data[i] > 0.0f ? 255 : 0;
    return m;
}

inline BinaryMask instance_mask(const InstanceMask& inst, std::uint16_t id) {
    BinaryMask m(inst.width, inst.height, 0);
    for (std::size_t i = 0; i < m.size(); ++i) m.data[i] = inst.data[i] == id ? 255 : 0;
    return m;
}

inline std::size_t count_nonzero(const BinaryMask& m) {
    return static_cast<std::size_t>(std::count_if(m.data.begin(), m.data.end(), [](std::uint8_t v) { return v != 0; }));
}

/// Tight (x, y, w, h) box of the nonzero pixels; nullopt for an empty mask.
inline std::optional<std::array<int, 4>> mask_bbox(const BinaryMask& m) {
    int x0 = m.width, y0 = m.height, x1 = -1, y1 = -1;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            if (m.at(x, y)) {
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
            }
    if (x1 < 0) return std::nullopt;
    return std::array<int, 4>{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

/// Quantizes depth to 16-bit units of `scale` mm (values saturate at 65535).
inline Gray16 depth_to_u16(const DepthMap& d, double scale = kDepthPngScale) {
    Gray16 out(d.width, d.height, 0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double v = std::round(d.data[i] / scale);
        out.data[i] = static_cast<std::uint16_t>(std::clamp(v, 0.0, 65535.0));
    }
    return out;
}

inline DepthMap depth_from_u16(const Gray16& g, double scale = kDepthPngScale) {
    DepthMap out(g.width, g.height, 0.0f);
    for (std::size_t i = 0; i < g.size(); ++i) out.data[i] = static_cast<float>(g.data[i] * scale);
    return out;
}

}  // namespace flatpose::raster
