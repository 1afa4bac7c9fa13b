#pragma once

#include "flatpose/core/error.hpp"
#include "flatpose/core/image.hpp"
#include "flatpose/geometry/mesh.hpp"
#include "flatpose/geometry/symmetry.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace flatpose::geometry {

/// ASCII PLY text: float vertices in mm (6 decimals), uchar/int face lists.
inline std::string ply_text(const TriMesh& mesh) {
    std::string out;
    out += "ply\nformat ascii 1.0\ncomment units mm\n";
    out += "comment category_id " + std::to_string(mesh.category_id) + "\n";
    out += "element vertex " + std::to_string(mesh.vertices.size()) + "\n";
    out += "property float x\nproperty float y\nproperty float z\n";
    out += "element face " + std::to_string(mesh.triangles.size()) + "\n";
    out += "property list uchar int vertex_indices\nend_header\n";
    char buf[128];
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof buf, "%.6f %.6f %.6f\n", v.x(), v.y(), v.z());
        out += buf;
    }
    for (const auto& t : mesh.triangles) {
        std::snprintf(buf, sizeof buf, "3 %u %u %u\n", t[0], t[1], t[2]);
        out += buf;
    }
    return out;
}

inline void export_ply(const TriMesh& mesh, const std::filesystem::path& path) {
    write_text_file(path, ply_text(mesh));
}

/// Reads the ASCII subset written by export_ply. Diameter is recomputed.
inline TriMesh import_ply(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    std::size_t nv = 0, nf = 0;
    TriMesh mesh;
    if (!std::getline(in, line) || line != "ply") throw IoError("not a PLY file: " + path.string());
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "ascii") throw IoError("only ASCII PLY is supported: " + path.string());
        } else if (tok == "element") {
            std::string what;
            std::size_t count = 0;
            ls >> what >> count;
            if (what == "vertex") nv = count;
            else if (what == "face") nf = count;
        } else if (tok == "comment") {
            std::string key;
            ls >> key;
            if (key == "category_id") ls >> mesh.category_id;
        } else if (tok == "end_header") {
            break;
        }
    }
    mesh.vertices.reserve(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        double x, y, z;
        if (!(in >> x >> y >> z)) throw IoError("truncated PLY vertex list: " + path.string());
        mesh.vertices.emplace_back(x, y, z);
    }
    for (std::size_t i = 0; i < nf; ++i) {
        int k;
        std::uint32_t a, b, c;
        if (!(in >> k >> a >> b >> c) || k != 3) throw IoError("PLY faces must be triangles: " + path.string());
        if (a >= nv || b >= nv || c >= nv) throw IoError("PLY face index out of range: " + path.string());
        mesh.triangles.push_back({a, b, c});
    }
    mesh.diameter = mesh_diameter(mesh.vertices);
    return mesh;
}

inline nlohmann::json symmetry_to_json(const SymmetrySet& s) {
    auto arr = nlohmann::json::array();
    for (const auto& r : s.transforms) {
        auto m = nlohmann::json::array();
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m.push_back(r(i, j));
        arr.push_back(std::move(m));
    }
    return arr;
}

inline SymmetrySet symmetry_from_json(const nlohmann::json& j) {
    SymmetrySet s;
    s.transforms.clear();
    for (const auto& m : j) {
        if (m.size() != 9) throw SchemaError("symmetry entries must hold 9 values");
        Mat3 r;
        for (int i = 0; i < 9; ++i) r(i / 3, i % 3) = m.at(static_cast<std::size_t>(i)).get<double>();
        s.transforms.push_back(r);
    }
    if (s.transforms.empty() || (s.transforms.front() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-12)
        throw SchemaError("symmetry list must start with the identity");
    return s;
}

}  // namespace flatpose::geometry
