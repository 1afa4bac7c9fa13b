#pragma once

#include "flatpose/core/image.hpp"
#include "flatpose/docparse/document.hpp"
#include "flatpose/geometry/mesh.hpp"
#include "flatpose/geometry/symmetry.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace flatpose::testing {

inline std::filesystem::path fixture_path(const std::string& name) {
    return std::filesystem::path(FLATPOSE_FIXTURE_DIR) / name;
}

/// Table of outer dimensions (mm) for fixture parts 01..15.
inline constexpr std::array<std::pair<double, double>, 15> kFixtureDims{{
    {260, 35}, {191, 57}, {794, 81}, {92, 53}, {120, 60}, {150, 118}, {156, 117}, {364, 116},
    {159, 99}, {60, 38}, {394, 220}, {89, 20}, {125, 55}, {46, 49}, {609, 117},
}};

/// Hole count per fixture part, by construction of parts15.xml.
inline constexpr std::array<std::size_t, 15> kFixtureHoles{2, 1, 3, 1, 4, 0, 1, 1, 1, 1, 2, 1, 0, 1, 2};

inline const docparse::ManufacturingDoc& fixture_document() {
    static const docparse::ManufacturingDoc doc = docparse::parse_document(read_text_file(fixture_path("parts15.xml")));
    return doc;
}

inline const std::vector<docparse::Profile2D>& fixture_profiles() {
    static const std::vector<docparse::Profile2D> profiles = docparse::document_profiles(fixture_document());
    return profiles;
}

inline const std::vector<geometry::TriMesh>& fixture_meshes() {
    static const std::vector<geometry::TriMesh> meshes = [] {
        std::vector<geometry::TriMesh> out;
        for (const auto& p : fixture_profiles()) out.push_back(geometry::extrude(p, 1.0));
        return out;
    }();
    return meshes;
}

inline const std::vector<geometry::SymmetrySet>& fixture_symmetries() {
    static const std::vector<geometry::SymmetrySet> syms = [] {
        std::vector<geometry::SymmetrySet> out;
        for (const auto& m : fixture_meshes()) out.push_back(geometry::detect_symmetries(m));
        return out;
    }();
    return syms;
}

inline docparse::Profile2D rect_profile(double w, double h, int category = 1) {
    docparse::Profile2D p;
    p.category_id = category;
    p.outer = {Vec2(0, 0), Vec2(w, 0), Vec2(w, h), Vec2(0, h)};
    return p;
}

}  // namespace flatpose::testing
