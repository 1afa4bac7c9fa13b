#pragma once

// SVG path-data tokenizer and curve flattener. Produces closed polylines
// whose deviation from the true curves is bounded by a chord tolerance.

#include "flatpose/core/error.hpp"
#include "flatpose/core/types.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

namespace flatpose::docparse {

namespace detail {

class PathLexer {
public:
    explicit PathLexer(std::string_view s) : s_(s) {}

    void skip_separators() {
        while (pos_ < s_.size() && (std::isspace(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == ',')) ++pos_;
    }

    bool at_end() {
        skip_separators();
        return pos_ >= s_.size();
    }

    std::size_t pos() const { return pos_; }

    /// Next non-separator character is a command letter.
    bool peek_command(char& c) {
        skip_separators();
        if (pos_ >= s_.size()) return false;
        const char ch = s_[pos_];
        if (std::isalpha(static_cast<unsigned char>(ch)) && ch != 'e' && ch != 'E') {
            c = ch;
            return true;
        }
        return false;
    }

    char take_command() {
        char c = 0;
        if (!peek_command(c)) throw ParseError("expected path command", pos_);
        ++pos_;
        return c;
    }

    bool peek_number() {
        skip_separators();
        if (pos_ >= s_.size()) return false;
        const char ch = s_[pos_];
        return std::isdigit(static_cast<unsigned char>(ch)) || ch == '-' || ch == '+' || ch == '.';
    }

    double number() {
        skip_separators();
        const std::size_t start = pos_;
        std::size_t i = pos_;
        if (i < s_.size() && (s_[i] == '+' || s_[i] == '-')) ++i;
        bool digits = false;
        while (i < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i]))) ++i, digits = true;
        if (i < s_.size() && s_[i] == '.') {
            ++i;
            while (i < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i]))) ++i, digits = true;
        }
        if (!digits) throw ParseError("expected number", start);
        if (i < s_.size() && (s_[i] == 'e' || s_[i] == 'E')) {
            std::size_t j = i + 1;
            if (j < s_.size() && (s_[j] == '+' || s_[j] == '-')) ++j;
            if (j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j]))) {
                while (j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j]))) ++j;
                i = j;
            }
        }
        std::size_t from = start;
        if (s_[from] == '+') ++from;  // from_chars rejects a leading '+'
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s_.data() + from, s_.data() + i, v);
        if (ec != std::errc() || ptr != s_.data() + i) throw ParseError("malformed number", start);
        pos_ = i;
        return v;
    }

    /// Arc flags may be written without separators ("a5 5 0 1010 10").
    bool flag() {
        skip_separators();
        if (pos_ < s_.size() && (s_[pos_] == '0' || s_[pos_] == '1')) return s_[pos_++] == '1';
        throw ParseError("expected arc flag", pos_);
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
};

inline double point_line_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len = ab.norm();
    if (len < 1e-300) return (p - a).norm();
    return std::abs(ab.x() * (p.y() - a.y()) - ab.y() * (p.x() - a.x())) / len;
}

// Recursive midpoint subdivision. The curve lies inside the control hull,
// so control-point distance to the chord bounds the chord deviation.
inline void flatten_cubic_rec(const Vec2& p0, const Vec2& p1, const Vec2& p2, const Vec2& p3, double tol, int depth,
                              std::vector<Vec2>& out) {
    const double d = std::max(point_line_distance(p1, p0, p3), point_line_distance(p2, p0, p3));
    if (d <= tol || depth >= 24) {
        out.push_back(p3);
        return;
    }
    const Vec2 p01 = 0.5 * (p0 + p1), p12 = 0.5 * (p1 + p2), p23 = 0.5 * (p2 + p3);
    const Vec2 p012 = 0.5 * (p01 + p12), p123 = 0.5 * (p12 + p23);
    const Vec2 mid = 0.5 * (p012 + p123);
    flatten_cubic_rec(p0, p01, p012, mid, tol, depth + 1, out);
    flatten_cubic_rec(mid, p123, p23, p3, tol, depth + 1, out);
}

}  // namespace detail

/// Appends the flattened cubic (excluding p0) to `out`.
inline void flatten_cubic(const Vec2& p0, const Vec2& p1, const Vec2& p2, const Vec2& p3, double tol,
                          std::vector<Vec2>& out) {
    detail::flatten_cubic_rec(p0, p1, p2, p3, tol, 0, out);
}

inline void flatten_quadratic(const Vec2& p0, const Vec2& c, const Vec2& p2, double tol, std::vector<Vec2>& out) {
    // exact degree elevation
    flatten_cubic(p0, p0 + (2.0 / 3.0) * (c - p0), p2 + (2.0 / 3.0) * (c - p2), p2, tol, out);
}

/**
 * Appends the flattened elliptical arc (excluding the start point) to `out`.
 *
 * Endpoint parameters are converted to center form; the sweep is cut into
 * a power-of-two number of equal parametric steps, the smallest for which
 * max(rx, ry) * (1 - cos(step / 2)) <= tol. Halving tol therefore only
 * ever adds vertices.
 */
inline void flatten_arc(const Vec2& from, double rx, double ry, double x_axis_rotation_deg, bool large_arc, bool sweep,
                        const Vec2& to, double tol, std::vector<Vec2>& out) {
    if ((from - to).norm() == 0.0) return;
    rx = std::abs(rx);
    ry = std::abs(ry);
    if (rx == 0.0 || ry == 0.0) {
        out.push_back(to);
        return;
    }
    const double phi = deg2rad(std::fmod(x_axis_rotation_deg, 360.0));
    const double cp = std::cos(phi), sp = std::sin(phi);
    const double dx = 0.5 * (from.x() - to.x());
    const double dy = 0.5 * (from.y() - to.y());
    const double x1 = cp * dx + sp * dy;
    const double y1 = -sp * dx + cp * dy;

    const double lambda = (x1 * x1) / (rx * rx) + (y1 * y1) / (ry * ry);
    if (lambda > 1.0) {
        const double s = std::sqrt(lambda);
        rx *= s;
        ry *= s;
    }
    const double rx2 = rx * rx, ry2 = ry * ry;
    const double num = rx2 * ry2 - rx2 * y1 * y1 - ry2 * x1 * x1;
    const double den = rx2 * y1 * y1 + ry2 * x1 * x1;
    double coef = den > 0.0 ? std::sqrt(std::max(0.0, num / den)) : 0.0;
    if (large_arc == sweep) coef = -coef;
    const double cxp = coef * rx * y1 / ry;
    const double cyp = -coef * ry * x1 / rx;
    const double cx = cp * cxp - sp * cyp + 0.5 * (from.x() + to.x());
    const double cy = sp * cxp + cp * cyp + 0.5 * (from.y() + to.y());

    const double ux = (x1 - cxp) / rx, uy = (y1 - cyp) / ry;
    const double vx = (-x1 - cxp) / rx, vy = (-y1 - cyp) / ry;
    const double theta1 = std::atan2(uy, ux);
    double dtheta = std::atan2(ux * vy - uy * vx, ux * vx + uy * vy);
    if (!sweep && dtheta > 0.0) dtheta -= 2.0 * kPi;
    if (sweep && dtheta < 0.0) dtheta += 2.0 * kPi;

    const double rmax = std::max(rx, ry);
    std::size_t n = 1;
    while (n < (std::size_t{1} << 20)) {
        const double step = std::abs(dtheta) / static_cast<double>(n);
        if (rmax * (1.0 - std::cos(0.5 * step)) <= tol) break;
        n *= 2;
    }
    for (std::size_t k = 1; k < n; ++k) {
        const double th = theta1 + dtheta * static_cast<double>(k) / static_cast<double>(n);
        const double ex = rx * std::cos(th), ey = ry * std::sin(th);
        out.emplace_back(cx + cp * ex - sp * ey, cy + sp * ex + cp * ey);
    }
    out.push_back(to);
}

/// One flattened subpath. `closed` is true when terminated by Z/z.
struct FlatSubpath {
    std::vector<Vec2> points;
    bool closed = false;
    std::size_t source_offset = 0;
};

/**
 * Flattens SVG path data into polylines.
 *
 * Supports M,L,H,V,C,S,Q,T,A,Z in absolute and relative forms, implicit
 * command repetition and the implicit lineto after moveto. Subpaths that
 * contain no drawing command are dropped.
 */
inline std::vector<FlatSubpath> flatten_path_data(std::string_view d, double tol) {
    if (!(tol > 0.0)) throw InvalidArgument("flattening tolerance must be > 0");
    detail::PathLexer lex(d);
    std::vector<FlatSubpath> subpaths;
    FlatSubpath current;
    Vec2 pen = Vec2::Zero();
    Vec2 start = Vec2::Zero();
    Vec2 last_cubic_ctrl = Vec2::Zero();
    Vec2 last_quad_ctrl = Vec2::Zero();
    char prev_cmd = 0;
    bool have_subpath = false;

    auto finish = [&](bool closed) {
        if (have_subpath && current.points.size() > 1) {
            current.closed = closed;
            subpaths.push_back(std::move(current));
        }
        current = FlatSubpath{};
        have_subpath = false;
    };

    char cmd = 0;
    while (!lex.at_end()) {
        char next = 0;
        const std::size_t cmd_offset = lex.pos();
        if (lex.peek_command(next)) {
            cmd = lex.take_command();
        } else if (cmd == 0) {
            throw ParseError("path data must begin with a moveto", cmd_offset);
        } else if (cmd == 'M') {
            cmd = 'L';  // extra pairs after a moveto are linetos
        } else if (cmd == 'm') {
            cmd = 'l';
        } else if (cmd == 'Z' || cmd == 'z') {
            throw ParseError("unexpected number after closepath", cmd_offset);
        }
        const bool rel = std::islower(static_cast<unsigned char>(cmd)) != 0;
        const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(cmd)));
        const Vec2 base = rel ? pen : Vec2::Zero();

        auto read_point = [&]() -> Vec2 {
            const double x = lex.number();
            const double y = lex.number();
            return Vec2(x, y) + base;
        };
        auto begin_if_needed = [&]() {
            if (!have_subpath) {
                current = FlatSubpath{};
                current.points.push_back(pen);
                current.source_offset = cmd_offset;
                start = pen;
                have_subpath = true;
            }
        };

        switch (up) {
            case 'M': {
                finish(false);
                pen = read_point();
                start = pen;
                current = FlatSubpath{};
                current.points.push_back(pen);
                current.source_offset = cmd_offset;
                have_subpath = true;
                break;
            }
            case 'L': {
                begin_if_needed();
                pen = read_point();
                current.points.push_back(pen);
                break;
            }
            case 'H': {
                begin_if_needed();
                const double x = lex.number();
                pen = Vec2(rel ? pen.x() + x : x, pen.y());
                current.points.push_back(pen);
                break;
            }
            case 'V': {
                begin_if_needed();
                const double y = lex.number();
                pen = Vec2(pen.x(), rel ? pen.y() + y : y);
                current.points.push_back(pen);
                break;
            }
            case 'C': {
                begin_if_needed();
                const Vec2 c1 = read_point();
                const Vec2 c2 = read_point();
                const Vec2 p = read_point();
                flatten_cubic(pen, c1, c2, p, tol, current.points);
                last_cubic_ctrl = c2;
                pen = p;
                break;
            }
            case 'S': {
                begin_if_needed();
                const char pu = static_cast<char>(std::toupper(static_cast<unsigned char>(prev_cmd)));
                const Vec2 c1 = (pu == 'C' || pu == 'S') ? Vec2(2.0 * pen - last_cubic_ctrl) : pen;
                const Vec2 c2 = read_point();
                const Vec2 p = read_point();
                flatten_cubic(pen, c1, c2, p, tol, current.points);
                last_cubic_ctrl = c2;
                pen = p;
                break;
            }
            case 'Q': {
                begin_if_needed();
                const Vec2 c = read_point();
                const Vec2 p = read_point();
                flatten_quadratic(pen, c, p, tol, current.points);
                last_quad_ctrl = c;
                pen = p;
                break;
            }
            case 'T': {
                begin_if_needed();
                const char pu = static_cast<char>(std::toupper(static_cast<unsigned char>(prev_cmd)));
                const Vec2 c = (pu == 'Q' || pu == 'T') ? Vec2(2.0 * pen - last_quad_ctrl) : pen;
                const Vec2 p = read_point();
                flatten_quadratic(pen, c, p, tol, current.points);
                last_quad_ctrl = c;
                pen = p;
                break;
            }
            case 'A': {
                begin_if_needed();
                const double rx = lex.number();
                const double ry = lex.number();
                const double rot = lex.number();
                const bool large = lex.flag();
                const bool sw = lex.flag();
                const Vec2 p = read_point();
                flatten_arc(pen, rx, ry, rot, large, sw, p, tol, current.points);
                pen = p;
                break;
            }
            case 'Z': {
                pen = start;
                finish(true);
                break;
            }
            default:
                throw ParseError(std::string("unsupported path command '") + cmd + "'", cmd_offset);
        }
        prev_cmd = cmd;
    }
    finish(false);
    return subpaths;
}

}  // namespace flatpose::docparse
