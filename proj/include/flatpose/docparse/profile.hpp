#pragma once

#include "flatpose/core/error.hpp"
#include "flatpose/core/types.hpp"
#include "flatpose/docparse/svg_path.hpp"
#include "flatpose/docparse/xml.hpp"
#include "flatpose/geometry/polygon.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace flatpose::docparse {

inline constexpr double kDefaultFlatteningTolerance = 0.1;  // mm

/// Planar outline of a sheet part in millimeters. Outer loop is
/// counter-clockwise, holes clockwise.
struct Profile2D {
    Polygon2 outer;
    std::vector<Polygon2> holes;
    int category_id = 0;

    double area() const {
        double a = geometry::signed_area(outer);
        for (const auto& h : holes) a += geometry::signed_area(h);  // holes are negative
        return a;
    }

    std::size_t vertex_count() const {
        std::size_t n = outer.size();
        for (const auto& h : holes) n += h.size();
        return n;
    }
};

/// Returns the list of violated invariants; empty when the profile is valid.
inline std::vector<std::string> validate_profile(const Profile2D& p) {
    using namespace geometry;
    std::vector<std::string> problems;
    if (p.outer.size() < 3) {
        problems.emplace_back("outer loop has fewer than 3 vertices");
        return problems;
    }
    if (!is_simple(p.outer)) problems.emplace_back("outer loop is not simple");
    const double outer_area = signed_area(p.outer);
    if (outer_area <= 0.0) problems.emplace_back("outer loop is not counter-clockwise");
    if (std::abs(outer_area) < 1.0) problems.emplace_back("outer area below 1 mm^2");
    for (std::size_t i = 0; i < p.holes.size(); ++i) {
        const auto& h = p.holes[i];
        const std::string tag = "hole " + std::to_string(i);
        if (h.size() < 3) {
            problems.push_back(tag + " has fewer than 3 vertices");
            continue;
        }
        if (!is_simple(h)) problems.push_back(tag + " is not simple");
        if (signed_area(h) >= 0.0) problems.push_back(tag + " is not clockwise");
        if (!loop_strictly_inside(h, p.outer)) problems.push_back(tag + " is not strictly inside the outer loop");
        for (std::size_t j = i + 1; j < p.holes.size(); ++j)
            if (p.holes[j].size() >= 3 && polygons_overlap(h, p.holes[j]))
                problems.push_back(tag + " overlaps hole " + std::to_string(j));
    }
    return problems;
}

namespace detail {

inline Polygon2 clean_loop(std::vector<Vec2> pts) {
    Polygon2 out;
    out.reserve(pts.size());
    for (const auto& p : pts)
        if (out.empty() || (p - out.back()).norm() > 1e-9) out.push_back(p);
    while (out.size() > 1 && (out.front() - out.back()).norm() <= 1e-9) out.pop_back();
    return out;
}

/// Collects the `d` attribute of every path element in an SVG fragment.
inline std::vector<std::string> extract_path_data(std::string_view svg_source) {
    std::string wrapped = "<fragment>";
    wrapped.append(svg_source);
    wrapped += "</fragment>";
    const XmlTree tree = parse_xml(wrapped);
    std::vector<std::string> out;
    for (const auto& el : tree.elements) {
        if (el.local_name() != "path") continue;
        if (const auto* d = el.attribute("d")) out.push_back(*d);
    }
    return out;
}

}  // namespace detail

/**
 * Assembles closed loops into a profile: the loop with the largest
 * absolute area becomes the outer boundary, every other loop must sit
 * directly inside it and becomes a hole. Orientation is normalized.
 */
inline Profile2D build_profile(std::vector<Polygon2> loops, int category_id = 0) {
    using namespace geometry;
    if (loops.empty()) throw GeometryError("no closed loop found");
    std::size_t outer_idx = 0;
    for (std::size_t i = 1; i < loops.size(); ++i)
        if (std::abs(signed_area(loops[i])) > std::abs(signed_area(loops[outer_idx]))) outer_idx = i;
    Profile2D prof;
    prof.category_id = category_id;
    prof.outer = std::move(loops[outer_idx]);
    if (signed_area(prof.outer) < 0.0) std::reverse(prof.outer.begin(), prof.outer.end());

    std::vector<Polygon2> rest;
    for (std::size_t i = 0; i < loops.size(); ++i)
        if (i != outer_idx) rest.push_back(std::move(loops[i]));

    for (std::size_t i = 0; i < rest.size(); ++i) {
        if (!point_in_polygon(rest[i].front(), prof.outer))
            throw GeometryError("loop " + std::to_string(i + 1) + " lies outside the outer boundary");
        for (std::size_t j = 0; j < rest.size(); ++j) {
            if (i == j) continue;
            if (std::abs(signed_area(rest[j])) > std::abs(signed_area(rest[i])) &&
                point_in_polygon(rest[i].front(), rest[j]))
                throw GeometryError("loop nesting deeper than 2 (hole inside hole)");
        }
    }
    for (auto& h : rest) {
        if (signed_area(h) > 0.0) std::reverse(h.begin(), h.end());
        prof.holes.push_back(std::move(h));
    }
    return prof;
}

/**
 * Parses SVG path data, or an SVG fragment containing path elements, into
 * a Profile2D. Curves are flattened with maximum chord deviation `tolerance`
 * (mm). SVG user units are taken as millimeters; transforms are ignored.
 */
inline Profile2D parse_svg_path(std::string_view svg_source, double tolerance = kDefaultFlatteningTolerance,
                                int category_id = 0) {
    if (!(tolerance > 0.0)) throw InvalidArgument("tolerance must be > 0");
    std::vector<std::string> datas;
    if (svg_source.find('<') != std::string_view::npos)
        datas = detail::extract_path_data(svg_source);
    else
        datas.emplace_back(svg_source);

    std::vector<Polygon2> loops;
    for (const auto& d : datas) {
        for (auto& sp : flatten_path_data(d, tolerance)) {
            if (!sp.closed && (sp.points.front() - sp.points.back()).norm() > tolerance)
                throw ParseError("open subpath (no closepath and endpoints differ)", sp.source_offset);
            Polygon2 loop = detail::clean_loop(std::move(sp.points));
            if (loop.size() < 3 || std::abs(geometry::signed_area(loop)) == 0.0)
                throw ParseError("degenerate subpath encloses no area", sp.source_offset);
            loops.push_back(std::move(loop));
        }
    }
    if (loops.empty()) throw ParseError("svg source contains no closed subpath", 0);
    return build_profile(std::move(loops), category_id);
}

/// Axis-aligned (width, height) of the outer loop.
inline std::pair<double, double> profile_bbox(const Profile2D& p) {
    const auto b = geometry::bounds(p.outer);
    return {b.max.x() - b.min.x(), b.max.y() - b.min.y()};
}

inline double round6(double v) {
    const double r = std::round(v * 1e6) / 1e6;
    return r == 0.0 ? 0.0 : r;  // no negative zero
}

/// Path data "M x y L ... Z" per loop with 6 decimal places.
inline std::string to_svg_path(const Profile2D& p) {
    std::string out;
    char buf[64];
    auto emit_loop = [&](const Polygon2& loop) {
        for (std::size_t i = 0; i < loop.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%s%.6f %.6f ", i == 0 ? "M " : "L ", round6(loop[i].x()), round6(loop[i].y()));
            out += buf;
        }
        out += "Z ";
    };
    emit_loop(p.outer);
    for (const auto& h : p.holes) emit_loop(h);
    if (!out.empty()) out.pop_back();
    return out;
}

inline nlohmann::json loop_to_json(const Polygon2& loop) {
    auto arr = nlohmann::json::array();
    for (const auto& v : loop) arr.push_back({round6(v.x()), round6(v.y())});
    return arr;
}

inline nlohmann::json profile_to_json(const Profile2D& p) {
    nlohmann::json j;
    j["category_id"] = p.category_id;
    j["outer"] = loop_to_json(p.outer);
    j["holes"] = nlohmann::json::array();
    for (const auto& h : p.holes) j["holes"].push_back(loop_to_json(h));
    return j;
}

inline Profile2D profile_from_json(const nlohmann::json& j) {
    auto loop = [](const nlohmann::json& arr) {
        Polygon2 out;
        for (const auto& v : arr) out.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
        return out;
    };
    Profile2D p;
    p.category_id = j.value("category_id", 0);
    p.outer = loop(j.at("outer"));
    for (const auto& h : j.at("holes")) p.holes.push_back(loop(h));
    return p;
}

}  // namespace flatpose::docparse
