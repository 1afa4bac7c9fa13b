#include "fixtures.hpp"

#include "flatpose/core/rng.hpp"
#include "flatpose/geometry/mesh.hpp"
#include "flatpose/geometry/ply.hpp"
#include "flatpose/geometry/symmetry.hpp"
#include "flatpose/geometry/triangulate.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <numeric>
#include <random>

using namespace flatpose;
using namespace flatpose::geometry;
using flatpose::testing::fixture_meshes;
using flatpose::testing::fixture_profiles;
using flatpose::testing::fixture_symmetries;
using flatpose::testing::rect_profile;

namespace {

docparse::Profile2D regular_polygon(int n, double radius) {
    docparse::Profile2D p;
    p.category_id = 1;
    for (int i = 0; i < n; ++i) {
        const double a = 2 * kPi * i / n;
        p.outer.emplace_back(radius * std::cos(a), radius * std::sin(a));
    }
    return p;
}

// O(n^2) check that every vertex of R V has a partner in V and vice versa.
bool brute_force_maps(const std::vector<Vec3>& v, const Mat3& r, double tol) {
    auto covered = [&](const Mat3& m) {
        for (const auto& p : v) {
            const Vec3 q = m * p;
            bool hit = false;
            for (const auto& w : v)
                if ((w - q).norm() <= tol) {
                    hit = true;
                    break;
                }
            if (!hit) return false;
        }
        return true;
    };
    return covered(r) && covered(r.transpose());
}

bool contains(const SymmetrySet& s, const Mat3& m, double tol = 1e-9) {
    return std::any_of(s.transforms.begin(), s.transforms.end(),
                       [&](const Mat3& t) { return (t - m).cwiseAbs().maxCoeff() < tol; });
}

std::size_t count_z_rotations(const SymmetrySet& s) {
    return static_cast<std::size_t>(std::count_if(s.transforms.begin(), s.transforms.end(),
                                                  [](const Mat3& m) { return m(2, 2) > 0.5; }));
}

TriMesh shuffled(const TriMesh& m, std::uint64_t seed) {
    std::vector<std::uint32_t> perm(m.vertices.size());
    std::iota(perm.begin(), perm.end(), 0u);
    auto rng = make_rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    TriMesh out = m;
    for (std::size_t i = 0; i < perm.size(); ++i) out.vertices[perm[i]] = m.vertices[i];
    for (auto& t : out.triangles)
        for (auto& idx : t) idx = perm[idx];
    return out;
}

}  // namespace

TEST(Triangulate, SquareWithHoleGivesEightTriangles) {
    auto p = rect_profile(10, 10);
    p.holes.push_back({Vec2(3, 3), Vec2(3, 7), Vec2(7, 7), Vec2(7, 3)});
    const auto tris = triangulate(p);
    EXPECT_EQ(tris.size(), 8u);
    EXPECT_NEAR(triangles_area(profile_vertices(p), tris), 84.0, 1e-9);
}

TEST(Triangulate, LShape) {
    docparse::Profile2D p;
    p.outer = {Vec2(0, 0), Vec2(2, 0), Vec2(2, 1), Vec2(1, 1), Vec2(1, 2), Vec2(0, 2)};
    const auto tris = triangulate(p);
    EXPECT_EQ(tris.size(), 4u);
    EXPECT_NEAR(triangles_area(profile_vertices(p), tris), 3.0, 1e-12);
}

TEST(Triangulate, FixturesConserveAreaAndCount) {
    for (const auto& p : fixture_profiles()) {
        const auto tris = triangulate(p);
        const auto pts = profile_vertices(p);
        EXPECT_NEAR(triangles_area(pts, tris), p.area(), 1e-9 * std::max(1.0, p.area())) << "part " << p.category_id;
        EXPECT_EQ(tris.size(), pts.size() + 2 * p.holes.size() - 2) << "part " << p.category_id;
        for (const auto& t : tris) {
            EXPECT_GE(orient2d(pts[t[0]], pts[t[1]], pts[t[2]]), 0.0) << "part " << p.category_id;
        }
    }
}

TEST(Extrude, UnitSquare) {
    const auto m = extrude(rect_profile(10, 10), 1.0);
    EXPECT_EQ(m.vertices.size(), 8u);
    EXPECT_EQ(m.triangles.size(), 12u);
    EXPECT_NEAR(signed_volume(m), 100.0, 1e-9);
    EXPECT_NEAR(m.diameter, std::sqrt(201.0), 1e-9);
    const auto [lo, hi] = mesh_bounds(m);
    EXPECT_NEAR(lo.x(), -5, 1e-12);
    EXPECT_NEAR(hi.y(), 5, 1e-12);
    EXPECT_NEAR(lo.z(), -0.5, 1e-12);
    EXPECT_NEAR(hi.z(), 0.5, 1e-12);
}

TEST(Extrude, RejectsNonPositiveThickness) {
    EXPECT_THROW(extrude(rect_profile(10, 10), 0.0), InvalidArgument);
}

TEST(Extrude, FixturesAreClosedManifolds) {
    const auto& profiles = fixture_profiles();
    const auto& meshes = fixture_meshes();
    for (std::size_t i = 0; i < meshes.size(); ++i) {
        const auto& m = meshes[i];
        const auto s = edge_stats(m);
        EXPECT_TRUE(s.every_edge_twice) << "part " << i + 1;
        EXPECT_TRUE(s.consistently_oriented) << "part " << i + 1;
        const long genus = static_cast<long>(profiles[i].holes.size());
        EXPECT_EQ(euler_characteristic(m), 2 - 2 * genus) << "part " << i + 1;
        EXPECT_NEAR(signed_volume(m), profiles[i].area() * 1.0, 1e-6 * std::max(1.0, profiles[i].area()))
            << "part " << i + 1;
        EXPECT_EQ(m.category_id, static_cast<int>(i + 1));
    }
}

TEST(Extrude, DiameterAgreesWithIndependentBound) {
    for (std::size_t i = 0; i < fixture_meshes().size(); ++i) {
        const auto& m = fixture_meshes()[i];
        const auto [w, h] = flatpose::testing::kFixtureDims[i];
        // the bbox diagonal of the slab bounds the diameter from above
        EXPECT_LE(m.diameter, std::sqrt(w * w + h * h + 1.0) + 1e-9);
        EXPECT_GE(m.diameter, std::max(w, h));
    }
}

TEST(Symmetry, RectangleSlabHasKleinFourGroup) {
    const auto s = detect_symmetries(extrude(rect_profile(20, 10), 1.0));
    EXPECT_EQ(s.size(), 4u);
    EXPECT_TRUE((s.transforms[0] - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    EXPECT_TRUE(contains(s, rotation_z(kPi)));
    EXPECT_EQ(count_z_rotations(s), 2u);
    EXPECT_TRUE(is_closed_under_composition(s));
}

TEST(Symmetry, ScaleneTriangleHasOnlyIdentity) {
    docparse::Profile2D p;
    p.outer = {Vec2(0, 0), Vec2(30, 0), Vec2(7, 11)};
    const auto s = detect_symmetries(extrude(p, 1.0));
    EXPECT_EQ(s.size(), 1u);
}

TEST(Symmetry, HexagonRotationsMatchBruteForce) {
    const auto m = extrude(regular_polygon(6, 20), 1.0);
    const auto s = detect_symmetries(m, 5.0, 0.1);
    EXPECT_GE(count_z_rotations(s), 6u);
    for (int k = 0; k < 72; ++k) {
        const Mat3 r = rotation_z(deg2rad(5.0 * k));
        EXPECT_EQ(contains(s, r, 1e-9), brute_force_maps(m.vertices, r, 0.1)) << "angle " << 5 * k;
    }
    EXPECT_TRUE(is_closed_under_composition(s));
}

TEST(Symmetry, InvariantUnderVertexPermutation) {
    for (std::size_t i : {0u, 4u, 5u, 12u}) {
        const auto& m = fixture_meshes()[i];
        const auto a = fixture_symmetries()[i];
        const auto b = detect_symmetries(shuffled(m, 1234 + i));
        ASSERT_EQ(a.size(), b.size()) << "part " << i + 1;
        for (const auto& t : a.transforms) EXPECT_TRUE(contains(b, t, 1e-6)) << "part " << i + 1;
    }
}

TEST(Symmetry, FixtureGroupsAreClosedAndVerified) {
    const std::array<std::size_t, 15> expected{4, 1, 4, 1, 4, 2, 1, 1, 4, 1, 1, 4, 2, 1, 1};
    for (std::size_t i = 0; i < 15; ++i) {
        const auto& s = fixture_symmetries()[i];
        EXPECT_EQ(s.size(), expected[i]) << "part " << i + 1;
        EXPECT_TRUE(is_closed_under_composition(s)) << "part " << i + 1;
        for (const auto& t : s.transforms)
            EXPECT_TRUE(brute_force_maps(fixture_meshes()[i].vertices, t, kDefaultSymmetryTolerance)) << "part " << i + 1;
    }
}

TEST(Symmetry, BadArguments) {
    const auto m = extrude(rect_profile(2, 2), 1.0);
    EXPECT_THROW(detect_symmetries(m, 0.0), InvalidArgument);
    EXPECT_THROW(detect_symmetries(m, 7.0), InvalidArgument);
    EXPECT_THROW(detect_symmetries(m, 1.0, -1.0), InvalidArgument);
}

TEST(Ply, CountsAndRoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "flatpose_test_ply";
    std::filesystem::create_directories(dir);
    const auto m = extrude(rect_profile(10, 10), 1.0);
    const std::string text = ply_text(m);
    EXPECT_NE(text.find("element vertex 8\n"), std::string::npos);
    EXPECT_NE(text.find("element face 12\n"), std::string::npos);
    for (const auto& fm : fixture_meshes()) {
        const auto path = dir / ("obj_" + std::to_string(fm.category_id) + ".ply");
        export_ply(fm, path);
        const auto back = import_ply(path);
        EXPECT_EQ(back.vertices.size(), fm.vertices.size());
        EXPECT_EQ(back.triangles, fm.triangles);
        EXPECT_EQ(back.category_id, fm.category_id);
        EXPECT_NEAR(back.diameter, fm.diameter, 1e-5);
    }
    std::filesystem::remove_all(dir);
}

TEST(Ply, LargestFixtureDiameter) {
    EXPECT_GT(fixture_meshes()[10].diameter, 394.0);
}

TEST(Ply, SymmetryJsonRoundTrip) {
    const auto& s = fixture_symmetries()[0];
    const auto back = symmetry_from_json(nlohmann::json::parse(symmetry_to_json(s).dump()));
    ASSERT_EQ(back.size(), s.size());
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_LT((back.transforms[i] - s.transforms[i]).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_THROW(symmetry_from_json(nlohmann::json::parse("[[0,1,0,-1,0,0,0,0,1]]")), SchemaError);
}

TEST(GeometryPipeline, FifteenPartsUnderTenSeconds) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto doc = docparse::parse_document(read_text_file(flatpose::testing::fixture_path("parts15.xml")));
    for (const auto& p : docparse::document_profiles(doc)) {
        const auto m = extrude(p, 1.0);
        (void)detect_symmetries(m);
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_LT(s, 10.0);
}
