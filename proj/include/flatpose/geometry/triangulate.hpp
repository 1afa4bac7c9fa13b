#pragma once

#include "flatpose/core/error.hpp"
#include "flatpose/docparse/profile.hpp"
#include "flatpose/geometry/polygon.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

namespace flatpose::geometry {

/// Counter-clockwise index triple into the profile's vertex list
/// (outer loop first, then each hole in order).
using TriangleIndices = std::array<std::size_t, 3>;

/// Profile vertices in the order referenced by TriangleIndices.
inline std::vector<Vec2> profile_vertices(const docparse::Profile2D& p) {
    std::vector<Vec2> v(p.outer.begin(), p.outer.end());
    for (const auto& h : p.holes) v.insert(v.end(), h.begin(), h.end());
    return v;
}

namespace detail {

// Ear clipping over a single weakly-simple polygon given as indices into
// `pts`. Bridged holes appear as duplicated vertices (same index twice).
class EarClipper {
public:
    EarClipper(const std::vector<Vec2>& pts, std::vector<std::size_t> ring) : pts_(pts), ring_(std::move(ring)) {}

    std::vector<TriangleIndices> run() {
        std::vector<TriangleIndices> tris;
        std::vector<std::size_t> r = ring_;
        drop_repeats(r);
        int relax = 0;
        std::size_t guard = 0;
        while (r.size() > 3) {
            bool clipped = false;
            const std::size_t n = r.size();
            for (std::size_t k = 0; k < n; ++k) {
                const std::size_t i0 = r[(k + n - 1) % n], i1 = r[k], i2 = r[(k + 1) % n];
                if (!is_ear(r, k, relax)) continue;
                tris.push_back({i0, i1, i2});
                r.erase(r.begin() + static_cast<std::ptrdiff_t>(k));
                drop_repeats(r);
                clipped = true;
                relax = 0;
                break;
            }
            if (!clipped) {
                if (++relax > 2) throw GeometryError("triangulation failed: no ear found");
            }
            if (++guard > 4 * ring_.size() * ring_.size() + 16) throw GeometryError("triangulation did not converge");
        }
        if (r.size() == 3) tris.push_back({r[0], r[1], r[2]});
        return tris;
    }

private:
    // Neighbouring entries with the same index arise when a bridge collapses.
    static void drop_repeats(std::vector<std::size_t>& r) {
        bool changed = true;
        while (changed && r.size() > 3) {
            changed = false;
            for (std::size_t k = 0; k < r.size() && r.size() > 3; ++k) {
                if (r[k] == r[(k + 1) % r.size()]) {
                    r.erase(r.begin() + static_cast<std::ptrdiff_t>(k));
                    changed = true;
                    break;
                }
            }
        }
    }

    // relax 0: strict convex ear, no vertex inside or on the triangle.
    // relax 1: allow zero-area (collinear) ears.
    // relax 2: allow other vertices on the triangle boundary.
    bool is_ear(const std::vector<std::size_t>& r, std::size_t k, int relax) const {
        const std::size_t n = r.size();
        const std::size_t i0 = r[(k + n - 1) % n], i1 = r[k], i2 = r[(k + 1) % n];
        const Vec2& a = pts_[i0];
        const Vec2& b = pts_[i1];
        const Vec2& c = pts_[i2];
        const double o = orient2d(a, b, c);
        if (o < 0.0) return false;
        if (o == 0.0) {
            // a collinear spike (b beyond both neighbours) is never an ear
            if (relax < 1) return false;
            return (a - b).dot(c - b) <= 0.0;
        }
        BBox2 box;
        box.extend(a);
        box.extend(b);
        box.extend(c);
        for (std::size_t m = 0; m < n; ++m) {
            const std::size_t j = r[m];
            if (j == i0 || j == i1 || j == i2) continue;
            const Vec2& p = pts_[j];
            if (p.x() < box.min.x() || p.x() > box.max.x() || p.y() < box.min.y() || p.y() > box.max.y()) continue;
            if (p == a || p == b || p == c) continue;
            const double d0 = orient2d(a, b, p), d1 = orient2d(b, c, p), d2 = orient2d(c, a, p);
            if (relax >= 2) {
                if (d0 > 0.0 && d1 > 0.0 && d2 > 0.0) return false;
            } else if (d0 >= 0.0 && d1 >= 0.0 && d2 >= 0.0) {
                return false;
            }
        }
        return true;
    }

    const std::vector<Vec2>& pts_;
    std::vector<std::size_t> ring_;
};

// Interior-angle cone test at ring position k for direction towards q.
inline bool in_cone(const std::vector<Vec2>& pts, const std::vector<std::size_t>& ring, std::size_t k, const Vec2& q) {
    const std::size_t n = ring.size();
    const Vec2& prev = pts[ring[(k + n - 1) % n]];
    const Vec2& cur = pts[ring[k]];
    const Vec2& next = pts[ring[(k + 1) % n]];
    if (orient2d(prev, cur, next) >= 0.0)  // convex corner
        return orient2d(cur, next, q) > 0.0 && orient2d(prev, cur, q) > 0.0;
    return !(orient2d(cur, next, q) <= 0.0 && orient2d(prev, cur, q) <= 0.0);
}

inline bool segment_blocked(const std::vector<Vec2>& pts, const std::vector<std::size_t>& ring, const Vec2& a,
                            const Vec2& b) {
    BBox2 sb;
    sb.extend(a);
    sb.extend(b);
    for (std::size_t m = 0, pm = ring.size() - 1; m < ring.size(); pm = m++) {
        const Vec2& e0 = pts[ring[pm]];
        const Vec2& e1 = pts[ring[m]];
        if (std::max(e0.x(), e1.x()) < sb.min.x() || std::min(e0.x(), e1.x()) > sb.max.x() ||
            std::max(e0.y(), e1.y()) < sb.min.y() || std::min(e0.y(), e1.y()) > sb.max.y())
            continue;
        if (e0 == a || e0 == b || e1 == a || e1 == b) continue;
        if (segments_intersect(a, b, e0, e1)) return true;
    }
    return false;
}

}  // namespace detail

/**
 * Triangulates the region outer-minus-holes.
 *
 * Each hole is spliced into the outer ring through a bridge from its
 * rightmost vertex to the nearest mutually visible ring vertex, then the
 * resulting weakly-simple ring is ear clipped. Emits V + 2H - 2 triangles
 * for V vertices and H holes.
 */
inline std::vector<TriangleIndices> triangulate(const docparse::Profile2D& profile) {
    if (profile.outer.size() < 3 || !(std::abs(profile.area()) > 0.0))
        throw GeometryError("cannot triangulate a degenerate (zero-area) profile");
    const std::vector<Vec2> pts = profile_vertices(profile);

    std::vector<std::size_t> ring(profile.outer.size());
    std::iota(ring.begin(), ring.end(), std::size_t{0});

    struct HoleRef {
        std::size_t first, count, rightmost;
    };
    std::vector<HoleRef> holes;
    std::size_t offset = profile.outer.size();
    for (const auto& h : profile.holes) {
        HoleRef ref{offset, h.size(), offset};
        for (std::size_t i = 0; i < h.size(); ++i) {
            const Vec2& p = pts[offset + i];
            const Vec2& best = pts[ref.rightmost];
            if (p.x() > best.x() || (p.x() == best.x() && p.y() < best.y())) ref.rightmost = offset + i;
        }
        holes.push_back(ref);
        offset += h.size();
    }
    std::sort(holes.begin(), holes.end(),
              [&](const HoleRef& a, const HoleRef& b) { return pts[a.rightmost].x() > pts[b.rightmost].x(); });

    for (std::size_t hi = 0; hi < holes.size(); ++hi) {
        const HoleRef& h = holes[hi];
        const Vec2& m = pts[h.rightmost];
        std::vector<std::size_t> order(ring.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double da = (pts[ring[a]] - m).squaredNorm(), db = (pts[ring[b]] - m).squaredNorm();
            return da != db ? da < db : a < b;
        });
        std::size_t chosen = ring.size();
        for (const std::size_t k : order) {
            const Vec2& c = pts[ring[k]];
            if (!detail::in_cone(pts, ring, k, m)) continue;
            if (detail::segment_blocked(pts, ring, m, c)) continue;
            bool blocked = false;
            for (std::size_t hj = hi; hj < holes.size() && !blocked; ++hj) {
                std::vector<std::size_t> hring(holes[hj].count);
                std::iota(hring.begin(), hring.end(), holes[hj].first);
                blocked = detail::segment_blocked(pts, hring, m, c);
            }
            if (blocked) continue;
            chosen = k;
            break;
        }
        if (chosen == ring.size()) throw GeometryError("no visible bridge vertex for hole");
        std::vector<std::size_t> splice;
        splice.reserve(h.count + 2);
        const std::size_t start = h.rightmost - h.first;
        for (std::size_t i = 0; i <= h.count; ++i) splice.push_back(h.first + (start + i) % h.count);
        splice.push_back(ring[chosen]);
        ring.insert(ring.begin() + static_cast<std::ptrdiff_t>(chosen) + 1, splice.begin(), splice.end());
    }
    return detail::EarClipper(pts, std::move(ring)).run();
}

/// Sum of triangle areas (each taken as signed, CCW positive).
inline double triangles_area(const std::vector<Vec2>& pts, const std::vector<TriangleIndices>& tris) {
    double a = 0.0;
    for (const auto& t : tris) a += 0.5 * orient2d(pts[t[0]], pts[t[1]], pts[t[2]]);
    return a;
}

}  // namespace flatpose::geometry
