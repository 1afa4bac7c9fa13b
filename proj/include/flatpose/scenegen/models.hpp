#pragma once

// Model library: meshes, model-frame profiles and symmetry groups, with the
// on-disk layout models/obj_XXXXXX.ply + models_info.json + sidecars.

#include "flatpose/core/error.hpp"
#include "flatpose/core/image.hpp"
#include "flatpose/docparse/document.hpp"
#include "flatpose/docparse/profile.hpp"
#include "flatpose/geometry/mesh.hpp"
#include "flatpose/geometry/ply.hpp"
#include "flatpose/geometry/symmetry.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace flatpose::scenegen {

struct ModelEntry {
    int category_id = 0;
    std::string name;
    geometry::TriMesh mesh;
    docparse::Profile2D profile;  // in the model frame
    geometry::SymmetrySet symmetries;
};

struct ModelLibrary {
    std::vector<ModelEntry> models;

    std::vector<geometry::TriMesh> meshes() const {
        std::vector<geometry::TriMesh> out;
        for (const auto& m : models) out.push_back(m.mesh);
        return out;
    }

    const ModelEntry& by_category(int category_id) const {
        for (const auto& m : models)
            if (m.category_id == category_id) return m;
        throw InvalidArgument("unknown category id " + std::to_string(category_id));
    }

    bool has_category(int category_id) const {
        for (const auto& m : models)
            if (m.category_id == category_id) return true;
        return false;
    }
};

struct ConvertOptions {
    double flattening_tolerance = docparse::kDefaultFlatteningTolerance;
    double thickness = geometry::kDefaultSheetThickness;
    double symmetry_step_deg = geometry::kDefaultSymmetryStepDeg;
    double symmetry_tolerance = geometry::kDefaultSymmetryTolerance;
};

inline ModelLibrary build_model_library(const docparse::ManufacturingDoc& doc, const ConvertOptions& opt = {}) {
    ModelLibrary lib;
    for (const auto& part : doc.parts) {
        ModelEntry e;
        e.category_id = part.category_id;
        e.name = part.name;
        const auto profile = docparse::parse_svg_path(part.svg_source, opt.flattening_tolerance, part.category_id);
        e.mesh = geometry::extrude(profile, opt.thickness);
        e.profile = geometry::centered_profile(profile);
        e.symmetries = geometry::detect_symmetries(e.mesh, opt.symmetry_step_deg, opt.symmetry_tolerance);
        lib.models.push_back(std::move(e));
    }
    return lib;
}

inline std::string obj_stem(int category_id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "obj_%06d", category_id);
    return buf;
}

/// Symmetries as BOP 4x4 row-major transforms, identity excluded.
inline nlohmann::json bop_symmetries(const geometry::SymmetrySet& s) {
    auto arr = nlohmann::json::array();
    for (std::size_t i = 1; i < s.transforms.size(); ++i) {
        const Mat3& r = s.transforms[i];
        arr.push_back({r(0, 0), r(0, 1), r(0, 2), 0.0, r(1, 0), r(1, 1), r(1, 2), 0.0, r(2, 0), r(2, 1), r(2, 2), 0.0,
                       0.0, 0.0, 0.0, 1.0});
    }
    return arr;
}

/// Edge data for overlay drawing: the 12 edges of the model bounding box
/// plus the top-face outline loops.
inline nlohmann::json model_edges_json(const ModelLibrary& lib) {
    auto models = nlohmann::json::array();
    for (const auto& m : lib.models) {
        const auto [lo, hi] = geometry::mesh_bounds(m.mesh);
        auto corners = nlohmann::json::array();
        for (int i = 0; i < 8; ++i)
            corners.push_back({docparse::round6(i & 1 ? hi.x() : lo.x()), docparse::round6(i & 2 ? hi.y() : lo.y()),
                               docparse::round6(i & 4 ? hi.z() : lo.z())});
        auto edges = nlohmann::json::array();
        for (int i = 0; i < 8; ++i)
            for (int bit : {1, 2, 4})
                if (!(i & bit)) edges.push_back({i, i | bit});
        auto outline = nlohmann::json::array();
        auto add_loop = [&](const Polygon2& loop) {
            auto pts = nlohmann::json::array();
            for (const auto& v : loop) pts.push_back({docparse::round6(v.x()), docparse::round6(v.y()), docparse::round6(hi.z())});
            outline.push_back(std::move(pts));
        };
        add_loop(m.profile.outer);
        for (const auto& h : m.profile.holes) add_loop(h);
        models.push_back({{"obj_id", m.category_id},
                          {"name", m.name},
                          {"bbox_vertices", corners},
                          {"bbox_edges", edges},
                          {"outline", outline}});
    }
    return {{"models", models}};
}

inline void write_models(const ModelLibrary& lib, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json info = nlohmann::json::object();
    for (const auto& m : lib.models) {
        const std::string stem = obj_stem(m.category_id);
        geometry::export_ply(m.mesh, dir / (stem + ".ply"));
        const auto [lo, hi] = geometry::mesh_bounds(m.mesh);
        info[std::to_string(m.category_id)] = {
            {"diameter", m.mesh.diameter},
            {"min_x", lo.x()},
            {"min_y", lo.y()},
            {"min_z", lo.z()},
            {"size_x", hi.x() - lo.x()},
            {"size_y", hi.y() - lo.y()},
            {"size_z", hi.z() - lo.z()},
            {"symmetries_discrete", bop_symmetries(m.symmetries)},
        };
        const nlohmann::json side = {{"category_id", m.category_id},
                                     {"name", m.name},
                                     {"symmetries", geometry::symmetry_to_json(m.symmetries)},
                                     {"profile", docparse::profile_to_json(m.profile)}};
        write_text_file(dir / (stem + ".json"), side.dump(1) + "\n");
    }
    write_text_file(dir / "models_info.json", info.dump(1) + "\n");
    write_text_file(dir / "model_edges.json", model_edges_json(lib).dump() + "\n");
}

/// Loads a directory written by write_models. Models come back ordered by
/// category id.
inline ModelLibrary read_models(const std::filesystem::path& dir) {
    const auto info_path = dir / "models_info.json";
    if (!std::filesystem::exists(info_path)) throw IoError("missing " + info_path.string());
    nlohmann::json info;
    try {
        info = nlohmann::json::parse(read_text_file(info_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(info_path.string() + ": " + e.what(), e.byte);
    }
    std::vector<int> ids;
    for (const auto& [key, value] : info.items()) ids.push_back(std::stoi(key));
    std::sort(ids.begin(), ids.end());
    ModelLibrary lib;
    for (int id : ids) {
        const std::string stem = obj_stem(id);
        ModelEntry e;
        e.category_id = id;
        e.mesh = geometry::import_ply(dir / (stem + ".ply"));
        e.mesh.category_id = id;
        const auto side = nlohmann::json::parse(read_text_file(dir / (stem + ".json")));
        e.name = side.value("name", std::string());
        e.symmetries = geometry::symmetry_from_json(side.at("symmetries"));
        e.profile = docparse::profile_from_json(side.at("profile"));
        lib.models.push_back(std::move(e));
    }
    return lib;
}

}  // namespace flatpose::scenegen
