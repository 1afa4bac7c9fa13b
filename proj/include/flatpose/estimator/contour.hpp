#pragma once

// Classical contour-matching estimator for flat parts resting on a known
// ground plane. Each connected mask component is back-projected onto the
// plane, registered against every library profile (and its mirror image)
// by a coarse rotation search plus 2D ICP, and lifted back to a 6D pose.

#include "flatpose/core/error.hpp"
#include "flatpose/core/image.hpp"
#include "flatpose/core/parallel.hpp"
#include "flatpose/core/types.hpp"
#include "flatpose/estimator/types.hpp"
#include "flatpose/geometry/polygon.hpp"
#include "flatpose/raster/camera.hpp"
#include "flatpose/scenegen/models.hpp"
#include "flatpose/scenegen/placement.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace flatpose::estimator {

struct ContourParams {
    int min_component_px = 50;
    double angle_step_deg = 1.0;
    int icp_iterations = 10;
    int foreground_threshold = 128;  // intensity path: pixels >= threshold are foreground
    double field_resolution_mm = 0.5;
    double model_spacing_mm = 0.5;
    std::size_t search_points = 400;  // per side, for the coarse rotation search
    unsigned threads = 0;             // library models matched in parallel; 0 = hardware concurrency

    void validate() const {
        if (min_component_px < 1) throw InvalidArgument("min_component_px must be >= 1");
        if (!(angle_step_deg > 0.0 && angle_step_deg <= 90.0)) throw InvalidArgument("angle_step_deg must lie in (0, 90]");
        if (icp_iterations < 0) throw InvalidArgument("icp_iterations must be >= 0");
        if (foreground_threshold < 1 || foreground_threshold > 255)
            throw InvalidArgument("foreground_threshold must lie in [1, 255]");
        if (!(field_resolution_mm > 0.0) || !(model_spacing_mm > 0.0)) throw InvalidArgument("resolutions must be > 0");
        if (search_points < 8) throw InvalidArgument("search_points must be >= 8");
    }
};

namespace contour_detail {

struct Component {
    std::uint16_t label = 0;
    std::vector<std::size_t> pixels;
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

/// 4-connected regions of equal nonzero label.
inline std::vector<Component> connected_components(const Image<std::uint16_t>& labels) {
    std::vector<Component> out;
    std::vector<char> seen(labels.size(), 0);
    std::vector<std::size_t> stack;
    const int w = labels.width, h = labels.height;
    for (std::size_t start = 0; start < labels.size(); ++start) {
        if (seen[start] || labels.data[start] == 0) continue;
        Component c;
        c.label = labels.data[start];
        c.x0 = w;
        c.y0 = h;
        c.x1 = c.y1 = -1;
        seen[start] = 1;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            c.pixels.push_back(i);
            const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
            c.x0 = std::min(c.x0, x);
            c.y0 = std::min(c.y0, y);
            c.x1 = std::max(c.x1, x);
            c.y1 = std::max(c.y1, y);
            const auto visit = [&](int nx, int ny) {
                if (nx < 0 || ny < 0 || nx >= w || ny >= h) return;
                const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
                if (!seen[j] && labels.data[j] == c.label) {
                    seen[j] = 1;
                    stack.push_back(j);
                }
            };
            visit(x - 1, y);
            visit(x + 1, y);
            visit(x, y - 1);
            visit(x, y + 1);
        }
        std::sort(c.pixels.begin(), c.pixels.end());
        out.push_back(std::move(c));
    }
    return out;
}

/// Midpoints of the pixel edges separating the component from everything else.
inline std::vector<Vec2> boundary_points(const Component& c, const Image<std::uint16_t>& labels) {
    std::vector<Vec2> out;
    const int w = labels.width, h = labels.height;
    const auto inside = [&](int x, int y) {
        return x >= 0 && y >= 0 && x < w && y < h && labels.at(x, y) == c.label;
    };
    // a same-label pixel that is not in this component cannot be 4-adjacent to it
    for (std::size_t i : c.pixels) {
        const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
        if (!inside(x - 1, y)) out.emplace_back(x, y + 0.5);
        if (!inside(x + 1, y)) out.emplace_back(x + 1.0, y + 0.5);
        if (!inside(x, y - 1)) out.emplace_back(x + 0.5, y);
        if (!inside(x, y + 1)) out.emplace_back(x + 0.5, y + 1.0);
    }
    return out;
}

/// Intersects pixel rays with the plane z = height of the plane frame.
class PlaneProjector {
public:
    PlaneProjector(const Pose& plane_to_cam, const raster::CameraIntrinsics& cam, double height)
        : cam_(cam), rt_(plane_to_cam.R.transpose()), origin_(-(plane_to_cam.R.transpose() * plane_to_cam.t)), h_(height) {}

    std::optional<Vec2> operator()(double u, double v) const {
        const Vec3 d = rt_ * Vec3((u - cam_.cx) / cam_.fx, (v - cam_.cy) / cam_.fy, 1.0);
        if (std::abs(d.z()) < 1e-12) return std::nullopt;
        const double s = (h_ - origin_.z()) / d.z();
        if (!(s > 0.0)) return std::nullopt;
        const Vec3 p = origin_ + s * d;
        return Vec2(p.x(), p.y());
    }

private:
    raster::CameraIntrinsics cam_;
    Mat3 rt_;
    Vec3 origin_;
    double h_;
};

// Squared-distance transform of one sampled row (Felzenszwalb-Huttenlocher).
// Empty samples hold kFar, which keeps the parabola arithmetic finite.
inline constexpr double kFar = 1e20;

inline void sq_distance_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * (q - v[k]));
        while (s <= z[k]) {
            --k;
            s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * (q - v[k]));
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

/// Euclidean distance to a point set, sampled on a grid and read back
/// bilinearly. Queries outside the grid add their distance to the grid.
class DistanceField2 {
public:
    DistanceField2() = default;

    DistanceField2(const std::vector<Vec2>& pts, double res, double margin) : res_(res) {
        if (pts.empty()) throw InvalidArgument("distance field of an empty point set");
        Vec2 lo = pts[0], hi = pts[0];
        for (const auto& p : pts) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        origin_ = lo - Vec2(margin, margin);
        w_ = static_cast<int>(std::ceil((hi.x() - lo.x() + 2 * margin) / res)) + 1;
        h_ = static_cast<int>(std::ceil((hi.y() - lo.y() + 2 * margin) / res)) + 1;
        std::vector<double> g(static_cast<std::size_t>(w_) * h_, kFar);
        for (const auto& p : pts) {
            const int x = std::clamp(static_cast<int>(std::lround((p.x() - origin_.x()) / res)), 0, w_ - 1);
            const int y = std::clamp(static_cast<int>(std::lround((p.y() - origin_.y()) / res)), 0, h_ - 1);
            g[static_cast<std::size_t>(y) * w_ + x] = 0.0;
        }
        const int n = std::max(w_, h_);
        std::vector<double> f(n), d(n), z(n + 1);
        std::vector<int> v(n);  // every grid holds a seed, so the row pass ends finite
        for (int x = 0; x < w_; ++x) {
            f.resize(h_);
            d.resize(h_);
            for (int y = 0; y < h_; ++y) f[y] = g[static_cast<std::size_t>(y) * w_ + x];
            sq_distance_1d(f, d, v, z);
            for (int y = 0; y < h_; ++y) g[static_cast<std::size_t>(y) * w_ + x] = d[y];
        }
        f.resize(w_);
        d.resize(w_);
        for (int y = 0; y < h_; ++y) {
            std::copy_n(g.begin() + static_cast<std::ptrdiff_t>(y) * w_, w_, f.begin());
            sq_distance_1d(f, d, v, z);
            for (int x = 0; x < w_; ++x) g[static_cast<std::size_t>(y) * w_ + x] = d[x];
        }
        d_.resize(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) d_[i] = static_cast<float>(std::sqrt(g[i]) * res);
    }

    double operator()(const Vec2& p) const {
        const double gx = (p.x() - origin_.x()) / res_, gy = (p.y() - origin_.y()) / res_;
        const double cx = std::clamp(gx, 0.0, double(w_ - 1)), cy = std::clamp(gy, 0.0, double(h_ - 1));
        const int x0 = std::min(static_cast<int>(cx), w_ - 2), y0 = std::min(static_cast<int>(cy), h_ - 2);
        const double fx = cx - x0, fy = cy - y0;
        const auto at = [&](int x, int y) { return double(d_[static_cast<std::size_t>(y) * w_ + x]); };
        const double v = (1 - fy) * ((1 - fx) * at(x0, y0) + fx * at(x0 + 1, y0)) +
                         fy * ((1 - fx) * at(x0, y0 + 1) + fx * at(x0 + 1, y0 + 1));
        return v + std::hypot(gx - cx, gy - cy) * res_;
    }

private:
    Vec2 origin_ = Vec2::Zero();
    double res_ = 1.0;
    int w_ = 0, h_ = 0;
    std::vector<float> d_;
};

/// Exact nearest neighbor over a fixed 2D point set via a uniform grid.
class NearestGrid2 {
public:
    NearestGrid2() = default;

    NearestGrid2(std::vector<Vec2> pts, double cell) : pts_(std::move(pts)), cell_(cell) {
        if (pts_.empty()) throw InvalidArgument("nearest-neighbor grid of an empty point set");
        Vec2 lo = pts_[0], hi = pts_[0];
        for (const auto& p : pts_) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        origin_ = lo;
        nx_ = static_cast<int>((hi.x() - lo.x()) / cell) + 1;
        ny_ = static_cast<int>((hi.y() - lo.y()) / cell) + 1;
        start_.assign(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
        std::vector<std::size_t> cell_of(pts_.size());
        for (std::size_t i = 0; i < pts_.size(); ++i) {
            cell_of[i] = index(cx(pts_[i]), cy(pts_[i]));
            ++start_[cell_of[i] + 1];
        }
        for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
        items_.resize(pts_.size());
        std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
        for (std::size_t i = 0; i < pts_.size(); ++i) items_[fill[cell_of[i]]++] = static_cast<std::uint32_t>(i);
    }

    const std::vector<Vec2>& points() const { return pts_; }

    /// Index of the nearest point and its distance.
    std::pair<std::size_t, double> nearest(const Vec2& q) const {
        const long qx = static_cast<long>(std::floor((q.x() - origin_.x()) / cell_));
        const long qy = static_cast<long>(std::floor((q.y() - origin_.y()) / cell_));
        // Chebyshev ring distance from the query cell to the grid
        const long r0 = std::max({0L, -qx, qx - (nx_ - 1), -qy, qy - (ny_ - 1)});
        const long rmax = std::max({qx, nx_ - 1 - qx, qy, ny_ - 1 - qy, 0L});
        double best2 = std::numeric_limits<double>::infinity();
        std::size_t who = 0;
        const auto scan = [&](long x, long y) {
            if (x < 0 || y < 0 || x >= nx_ || y >= ny_) return;
            const std::size_t c = index(static_cast<int>(x), static_cast<int>(y));
            for (std::size_t k = start_[c]; k < start_[c + 1]; ++k) {
                const double d2 = (pts_[items_[k]] - q).squaredNorm();
                if (d2 < best2 || (d2 == best2 && items_[k] < who)) {
                    best2 = d2;
                    who = items_[k];
                }
            }
        };
        for (long r = r0; r <= rmax; ++r) {
            // points in rings beyond r are at least r * cell away
            if (r > 0 && best2 < std::pow((r - 1) * cell_, 2)) break;
            if (r == 0) {
                scan(qx, qy);
                continue;
            }
            const long xa = std::max(qx - r, 0L), xb = std::min(qx + r, long(nx_ - 1));
            for (long x = xa; x <= xb; ++x) {
                scan(x, qy - r);
                scan(x, qy + r);
            }
            const long ya = std::max(qy - r + 1, 0L), yb = std::min(qy + r - 1, long(ny_ - 1));
            for (long y = ya; y <= yb; ++y) {
                scan(qx - r, y);
                scan(qx + r, y);
            }
        }
        return {who, std::sqrt(best2)};
    }

private:
    int cx(const Vec2& p) const { return std::clamp(static_cast<int>((p.x() - origin_.x()) / cell_), 0, nx_ - 1); }
    int cy(const Vec2& p) const { return std::clamp(static_cast<int>((p.y() - origin_.y()) / cell_), 0, ny_ - 1); }
    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * nx_ + x; }

    std::vector<Vec2> pts_;
    std::vector<std::uint32_t> items_;
    std::vector<std::size_t> start_;
    Vec2 origin_ = Vec2::Zero();
    double cell_ = 1.0;
    int nx_ = 0, ny_ = 0;
};

/// Every `stride`-th point so at most `cap` remain.
inline std::vector<Vec2> thin(const std::vector<Vec2>& pts, std::size_t cap) {
    if (pts.size() <= cap) return pts;
    std::vector<Vec2> out;
    const double step = double(pts.size()) / double(cap);
    for (std::size_t k = 0; k < cap; ++k) out.push_back(pts[static_cast<std::size_t>(k * step)]);
    return out;
}

inline Mat2 rot2(double a) {
    Mat2 r;
    r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    return r;
}

/// Area centroid of a profile with holes (holes carry negative signed area).
inline Vec2 profile_centroid(const docparse::Profile2D& p) {
    double a = geometry::signed_area(p.outer);
    Vec2 c = a * geometry::area_centroid(p.outer);
    for (const auto& h : p.holes) {
        const double ah = geometry::signed_area(h);
        a += ah;
        c += ah * geometry::area_centroid(h);
    }
    return c / a;
}

/// 2D similarity-free rigid map w = R(theta) F p + t, F = diag(1, +-1).
struct Planar {
    double theta = 0.0;
    bool mirror = false;
    Vec2 t = Vec2::Zero();

    Vec2 mirrored(const Vec2& p) const { return mirror ? Vec2(p.x(), -p.y()) : p; }
    Vec2 forward(const Vec2& p) const { return rot2(theta) * mirrored(p) + t; }
    Vec2 backward(const Vec2& w) const { return mirrored(rot2(-theta) * (w - t)); }
};

/// Library entry preprocessed for matching.
struct PreparedModel {
    const scenegen::ModelEntry* entry = nullptr;
    double thickness = 0.0;
    Vec2 centroid = Vec2::Zero();
    std::vector<Vec2> search_points;
    NearestGrid2 dense;
    DistanceField2 field;
};

inline PreparedModel prepare_model(const scenegen::ModelEntry& m, const ContourParams& prm) {
    PreparedModel pm;
    pm.entry = &m;
    pm.thickness = scenegen::mesh_thickness(m.mesh);
    pm.centroid = profile_centroid(m.profile);
    std::vector<Vec2> pts = geometry::resample_loop(m.profile.outer, prm.model_spacing_mm);
    for (const auto& h : m.profile.holes) {
        const auto hp = geometry::resample_loop(h, prm.model_spacing_mm);
        pts.insert(pts.end(), hp.begin(), hp.end());
    }
    pm.search_points = thin(pts, prm.search_points);
    pm.field = DistanceField2(pts, prm.field_resolution_mm, 10.0);
    pm.dense = NearestGrid2(std::move(pts), 2.0);
    return pm;
}

/// Observed component: boundary and area centroid on the plane.
struct Observation {
    std::vector<Vec2> contour;
    Vec2 centroid = Vec2::Zero();
    std::optional<NearestGrid2> grid;
    std::optional<DistanceField2> field;
};

inline std::optional<Observation> observe(const Component& c, const Image<std::uint16_t>& labels, const PlaneProjector& proj,
                                          const ContourParams& prm) {
    Observation ob;
    for (const Vec2& b : boundary_points(c, labels)) {
        const auto w = proj(b.x(), b.y());
        if (!w) return std::nullopt;
        ob.contour.push_back(*w);
    }
    double area = 0.0;
    Vec2 acc = Vec2::Zero();
    const int width = labels.width;
    for (std::size_t i : c.pixels) {
        const double x = double(i % width), y = double(i / width);
        const auto a = proj(x, y), b = proj(x + 1, y), d = proj(x, y + 1), m = proj(x + 0.5, y + 0.5);
        if (!a || !b || !d || !m) return std::nullopt;
        const double da = std::abs(geometry::cross2(*b - *a, *d - *a));
        area += da;
        acc += da * *m;
    }
    if (!(area > 0.0) || ob.contour.empty()) return std::nullopt;
    ob.centroid = acc / area;
    ob.field.emplace(ob.contour, prm.field_resolution_mm, 10.0);
    ob.grid.emplace(ob.contour, 2.0);
    return ob;
}

inline double coarse_cost(const Planar& T, const PreparedModel& pm, const std::vector<Vec2>& obs_pts, const Observation& ob) {
    double a = 0.0, b = 0.0;
    for (const auto& c : obs_pts) a += pm.field(T.backward(c));
    for (const auto& p : pm.search_points) b += (*ob.field)(T.forward(p));
    return 0.5 * (a / double(obs_pts.size()) + b / double(pm.search_points.size()));
}

/// Point-to-point ICP from observation to model; keeps theta/t, mirror fixed.
inline void icp(Planar& T, const PreparedModel& pm, const std::vector<Vec2>& obs_pts, int iterations) {
    for (int it = 0; it < iterations; ++it) {
        Vec2 qm = Vec2::Zero(), cm = Vec2::Zero();
        std::vector<Vec2> qs;
        qs.reserve(obs_pts.size());
        for (const auto& c : obs_pts) {
            const auto [j, d] = pm.dense.nearest(T.backward(c));
            qs.push_back(T.mirrored(pm.dense.points()[j]));
            qm += qs.back();
            cm += c;
        }
        qm /= double(qs.size());
        cm /= double(qs.size());
        double sc = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < qs.size(); ++i) {
            const Vec2 q = qs[i] - qm, c = obs_pts[i] - cm;
            sc += q.dot(c);
            ss += geometry::cross2(q, c);
        }
        const double theta = std::atan2(ss, sc);
        const Vec2 t = cm - rot2(theta) * qm;
        const bool done = std::abs(theta - T.theta) < 1e-9 && (t - T.t).norm() < 1e-9;
        T.theta = theta;
        T.t = t;
        if (done) break;
    }
}

/// Symmetric mean nearest-neighbor distance in mm.
inline double residual(const Planar& T, const PreparedModel& pm, const std::vector<Vec2>& obs_pts, const Observation& ob) {
    double a = 0.0, b = 0.0;
    for (const auto& c : obs_pts) a += pm.dense.nearest(T.backward(c)).second;
    const auto& mp = pm.dense.points();
    for (const auto& p : mp) b += ob.grid->nearest(T.forward(p)).second;
    return 0.5 * (a / double(obs_pts.size()) + b / double(mp.size()));
}

}  // namespace contour_detail

/**
 * Contour matcher. Requires a ground plane; the part is assumed to lie on
 * it with its bottom face down, so the silhouette is back-projected at half
 * the part thickness above the plane.
 */
class ContourEstimator : public Estimator {
public:
    ContourEstimator(scenegen::ModelLibrary library, ContourParams params = {})
        : library_(std::move(library)), params_(params) {
        params_.validate();
        if (library_.models.empty()) throw InvalidArgument("contour estimator needs a non-empty model library");
        for (const auto& m : library_.models) prepared_.push_back(contour_detail::prepare_model(m, params_));
    }

    ContourEstimator(const ContourEstimator&) = delete;
    ContourEstimator& operator=(const ContourEstimator&) = delete;

    std::string name() const override { return "contour"; }

    const ContourParams& params() const { return params_; }

    EstimatorOutput estimate(const EstimatorInput& input) const override {
        using namespace contour_detail;
        const auto t0 = std::chrono::steady_clock::now();
        input.validate();
        if (!input.plane) throw UnsupportedInputError("contour estimator needs a ground plane");
        EstimatorOutput out;
        out.frame_id = input.frame_id;

        Image<std::uint16_t> labels;
        if (input.instances) {
            labels = *input.instances;
        } else {
            const auto& g = *input.intensity;
            labels = Image<std::uint16_t>(g.width, g.height, 0);
            for (std::size_t i = 0; i < g.size(); ++i) labels.data[i] = g.data[i] >= params_.foreground_threshold ? 1 : 0;
        }

        std::map<double, PlaneProjector> projectors;
        for (const auto& pm : prepared_) projectors.try_emplace(pm.thickness, *input.plane, input.cam, 0.5 * pm.thickness);

        for (const auto& comp : connected_components(labels)) {
            if (comp.pixels.size() < static_cast<std::size_t>(params_.min_component_px)) {
                out.diagnostics.push_back("skipped component of " + std::to_string(comp.pixels.size()) + " px at (" +
                                          std::to_string(comp.x0) + ", " + std::to_string(comp.y0) + ")");
                continue;
            }
            if (auto d = match_component(comp, labels, projectors, *input.plane, out.diagnostics)) {
                d->bbox = {double(comp.x0), double(comp.y0), double(comp.x1 - comp.x0 + 1), double(comp.y1 - comp.y0 + 1)};
                out.detections.push_back(*d);
            }
        }
        out.sort_by_score();
        out.compute_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        return out;
    }

private:
    std::optional<Detection> match_component(const contour_detail::Component& comp, const Image<std::uint16_t>& labels,
                                             const std::map<double, contour_detail::PlaneProjector>& projectors,
                                             const Pose& plane, std::vector<std::string>& diag) const {
        using namespace contour_detail;
        std::map<double, Observation> observations;
        for (const auto& [th, proj] : projectors) {
            auto ob = observe(comp, labels, proj, params_);
            if (!ob) {
                diag.push_back("component at (" + std::to_string(comp.x0) + ", " + std::to_string(comp.y0) +
                               ") does not meet the ground plane");
                return std::nullopt;
            }
            observations.emplace(th, std::move(*ob));
        }

        const int steps = static_cast<int>(std::lround(360.0 / params_.angle_step_deg));
        struct Fit {
            double res = std::numeric_limits<double>::infinity();
            Planar T;
        };
        std::vector<Fit> fits(prepared_.size());
        parallel_for(
            prepared_.size(),
            [&](std::size_t i) {
                const PreparedModel& pm = prepared_[i];
                const Observation& ob = observations.at(pm.thickness);
                const auto obs_search = thin(ob.contour, params_.search_points);
                for (bool mirror : {false, true}) {
                    Planar T;
                    T.mirror = mirror;
                    double best_cost = std::numeric_limits<double>::infinity();
                    double best_theta = 0.0;
                    for (int s = 0; s < steps; ++s) {
                        T.theta = deg2rad(s * params_.angle_step_deg);
                        T.t = ob.centroid - rot2(T.theta) * T.mirrored(pm.centroid);
                        const double cost = coarse_cost(T, pm, obs_search, ob);
                        if (cost < best_cost) {
                            best_cost = cost;
                            best_theta = T.theta;
                        }
                    }
                    T.theta = best_theta;
                    T.t = ob.centroid - rot2(T.theta) * T.mirrored(pm.centroid);
                    icp(T, pm, ob.contour, params_.icp_iterations);
                    const double res = residual(T, pm, ob.contour, ob);
                    if (res < fits[i].res) fits[i] = {res, T};
                }
            },
            params_.threads);

        double best_res = std::numeric_limits<double>::infinity();
        const PreparedModel* best_model = nullptr;
        Planar best_T;
        for (std::size_t i = 0; i < fits.size(); ++i)
            if (fits[i].res < best_res) {
                best_res = fits[i].res;
                best_model = &prepared_[i];
                best_T = fits[i].T;
            }
        if (!best_model) return std::nullopt;

        // lift to the plane frame, then pick the symmetric equivalent closest to identity
        Pose world;
        world.R = rotation_z(best_T.theta);
        if (best_T.mirror) world.R = world.R * Vec3(1.0, -1.0, -1.0).asDiagonal();
        world.t = Vec3(best_T.t.x(), best_T.t.y(), 0.5 * best_model->thickness);
        Mat3 chosen = world.R;
        double chosen_angle = rotation_angle_between(Mat3::Identity(), world.R);
        for (const Mat3& s : best_model->entry->symmetries.transforms) {
            const Mat3 r = world.R * s;
            const double a = rotation_angle_between(Mat3::Identity(), r);
            if (a < chosen_angle - 1e-9) {
                chosen = r;
                chosen_angle = a;
            }
        }
        world.R = chosen;

        Detection d;
        d.category_id = best_model->entry->category_id;
        d.score = 1.0 / (1.0 + best_res);
        d.pose = plane * world;
        return d;
    }

    scenegen::ModelLibrary library_;  // prepared_ points into it; the class is neither copied nor moved
    ContourParams params_;
    std::vector<contour_detail::PreparedModel> prepared_;
};

}  // namespace flatpose::estimator
