#include "fixtures.hpp"
#include "oracles.hpp"

#include "flatpose/raster/camera.hpp"
#include "flatpose/raster/render.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>

using namespace flatpose;
using namespace flatpose::raster;
using flatpose::testing::rect_profile;

namespace {

CameraIntrinsics small_cam(int size, double f) {
    return CameraIntrinsics{f, f, size / 2.0, size / 2.0, size, size};
}

Pose at(double x, double y, double z, const Mat3& R = Mat3::Identity()) {
    Pose p;
    p.R = R;
    p.t = Vec3(x, y, z);
    return p;
}

// Thin square plate with faces normal to the model z axis.
geometry::TriMesh plate(double side) {
    auto p = rect_profile(side, side);
    return geometry::extrude(p, 1.0);
}

}  // namespace

TEST(Project, OpticalAxisAndOffset) {
    const CameraIntrinsics cam{500, 500, 320, 240, 640, 480};
    EXPECT_EQ(project(Vec3(0, 0, 1000), cam), Vec2(320, 240));
    EXPECT_EQ(project(Vec3(100, 0, 1000), cam), Vec2(370, 240));
    EXPECT_THROW(project(Vec3(0, 0, 0), cam), BehindCameraError);
    EXPECT_THROW(project(Vec3(0, 0, -5), cam), GeometryError);
}

TEST(Project, BatchEqualsLoop) {
    const CameraIntrinsics cam;
    const auto& mesh = flatpose::testing::fixture_meshes()[2];
    const Pose pose = at(10, -20, 900, rotation_z(0.3));
    const auto batch = project_all(mesh.vertices, pose, cam);
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) EXPECT_EQ(batch[i], project(pose.apply(mesh.vertices[i]), cam));
}

TEST(Camera, IntrinsicsValidation) {
    EXPECT_NO_THROW(CameraIntrinsics{}.validate());
    EXPECT_THROW((CameraIntrinsics{0, 1, 1, 1, 2, 2}.validate()), InvalidArgument);
    EXPECT_THROW((CameraIntrinsics{1, 1, 5, 1, 2, 2}.validate()), InvalidArgument);
}

TEST(Camera, LookAtConvention) {
    const Pose w2c = look_at(Vec3(0, 0, 1000), Vec3::Zero(), Vec3(0, 1, 0));
    EXPECT_TRUE(w2c.is_valid());
    EXPECT_LT((w2c.apply(Vec3::Zero()) - Vec3(0, 0, 1000)).norm(), 1e-9);
    // world +y is up, so it maps to image -y
    EXPECT_LT(w2c.apply(Vec3(0, 10, 0)).y(), 0.0);
    EXPECT_THROW(look_at(Vec3(0, 0, 10), Vec3::Zero(), Vec3(0, 0, 1)), GeometryError);
}

TEST(RenderDepth, EmptySceneIsZero) {
    const auto r = render_depth(std::vector<PosedMesh>{}, small_cam(16, 20));
    EXPECT_TRUE(std::all_of(r.depth.data.begin(), r.depth.data.end(), [](float d) { return d == 0.0f; }));
}

TEST(RenderDepth, FrontoParallelPlate) {
    const auto m = plate(100);
    const CameraIntrinsics cam;
    // front face of the 1 mm slab at z = 500
    const auto r = render_depth(m, at(0, 0, 500.5), cam);
    std::size_t n = 0;
    for (std::size_t i = 0; i < r.depth.size(); ++i)
        if (r.depth.data[i] > 0) {
            ++n;
            EXPECT_NEAR(r.depth.data[i], 500.0, 0.01);
        }
    // 100 mm at f = 600, z = 500 spans 120 px
    EXPECT_EQ(n, 120u * 120u);
}

TEST(RenderDepth, NearerPlateWins) {
    const auto m = plate(100);
    const CameraIntrinsics cam;
    const auto r = render_depth(std::vector<PosedMesh>{{&m, at(-30, 0, 600.5)}, {&m, at(30, 0, 500.5)}}, cam);
    // image center is covered by both
    EXPECT_NEAR(r.depth.at(320, 240), 500.0, 0.01);
    EXPECT_EQ(r.instances.at(320, 240), 2);
    // far left only sees the farther plate
    const int u = static_cast<int>(std::floor(cam.fx * (-75.0) / 600.0 + cam.cx));
    EXPECT_EQ(r.instances.at(u, 240), 1);
    EXPECT_NEAR(r.depth.at(u, 240), 600.0, 0.01);
}

TEST(RenderDepth, TiltedPlateMatchesRayCast) {
    const auto m = plate(60);
    const auto cam = small_cam(32, 40);
    const Pose pose = at(3, -2, 120, axis_angle(Vec3(1, 1, 0).normalized(), deg2rad(50)));
    const std::vector<PosedMesh> items{{&m, pose}};
    const auto r = render_depth(items, cam);
    const auto o = flatpose::testing::raycast_scene(items, cam);
    for (std::size_t i = 0; i < o.depth.size(); ++i) {
        ASSERT_EQ(r.depth.data[i] > 0, o.depth[i] > 0) << "pixel " << i;
        if (o.depth[i] > 0) {
            EXPECT_NEAR(r.depth.data[i], o.depth[i], 0.05);
        }
    }
}

TEST(RenderDepth, RandomScenesMatchRayCast) {
    const auto& pool = flatpose::testing::fixture_meshes();
    const std::vector<geometry::TriMesh> small{pool[3], pool[9], pool[11], pool[13]};
    const auto cam = small_cam(64, 80);
    auto rng = make_rng(42);
    for (int s = 0; s < 20; ++s) {
        const auto items = flatpose::testing::random_small_scene(small, rng);
        const auto r = render_depth(items, cam);
        const auto o = flatpose::testing::raycast_scene(items, cam);
        EXPECT_GE(flatpose::testing::raster_agreement(r, o, 0.05), 0.999) << "scene " << s;
    }
}

TEST(RenderDepth, NearPlaneClipping) {
    // plate spanning z from -50 to +50 in camera space, tilted about x
    const auto m = plate(200);
    const auto cam = small_cam(64, 32);
    const Pose pose = at(0, 0, 20, axis_angle(Vec3(1, 0, 0), deg2rad(60)));
    const std::vector<PosedMesh> items{{&m, pose}};
    const auto r = render_depth(items, cam);
    const auto o = flatpose::testing::raycast_scene(items, cam);
    for (float d : r.depth.data) EXPECT_TRUE(d == 0.0f || d >= kNearPlane - 1e-4);
    EXPECT_GE(flatpose::testing::raster_agreement(r, o, 0.05), 0.999);
}

TEST(RenderDepth, DoubleResolutionFlipsOnlyBoundaryPixels) {
    const auto& mesh = flatpose::testing::fixture_meshes()[10];
    const Pose pose = at(5, 8, 700, axis_angle(Vec3(0.3, 1, 0.2).normalized(), deg2rad(35)));
    const CameraIntrinsics lo{300, 300, 160, 120, 320, 240};
    const CameraIntrinsics hi{600, 600, 320, 240, 640, 480};
    const auto a = coverage_mask(render_depth(mesh, pose, lo).depth);
    const auto b = coverage_mask(render_depth(mesh, pose, hi).depth);
    auto is_boundary = [&](int x, int y) {
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int nx = std::clamp(x + dx, 0, lo.width - 1), ny = std::clamp(y + dy, 0, lo.height - 1);
                if (a.at(nx, ny) != a.at(x, y)) return true;
            }
        return false;
    };
    std::size_t flips = 0, covered = 0;
    for (int y = 0; y < lo.height; ++y)
        for (int x = 0; x < lo.width; ++x) {
            int kids = 0;
            for (int k = 0; k < 4; ++k) kids += b.at(2 * x + k % 2, 2 * y + k / 2) != 0;
            const bool on = a.at(x, y) != 0;
            covered += on;
            if ((on && kids == 0) || (!on && kids == 4)) {
                ++flips;
                EXPECT_TRUE(is_boundary(x, y)) << x << "," << y;
            }
        }
    EXPECT_GT(covered, 1000u);
}

TEST(Visibility, UnoccludedEqualsSolo) {
    const auto m = plate(50);
    const CameraIntrinsics cam;
    const std::vector<PosedMesh> items{{&m, at(-100, 0, 800)}, {&m, at(100, 0, 800)}};
    const auto scene = render_depth(items, cam);
    const auto solo = render_depth(m, items[0].pose, cam);
    EXPECT_EQ(visibility_mask(scene.depth, solo.depth), coverage_mask(solo.depth));
}

TEST(Visibility, FullyOccludedIsEmpty) {
    const auto small = plate(30);
    const auto big = plate(200);
    const CameraIntrinsics cam;
    const std::vector<PosedMesh> items{{&small, at(0, 0, 900)}, {&big, at(0, 0, 700)}};
    const auto scene = render_depth(items, cam);
    const auto solo = render_depth(small, items[0].pose, cam);
    EXPECT_EQ(count_nonzero(visibility_mask(scene.depth, solo.depth)), 0u);
    // within delta the occluder does not hide it
    EXPECT_EQ(visibility_mask(scene.depth, solo.depth, 250.0), coverage_mask(solo.depth));
}

TEST(Visibility, HalfOccludedAgainstRayCastCount) {
    const auto target = plate(100);
    const auto cover = plate(100);
    const CameraIntrinsics cam{400, 400, 160, 120, 320, 240};
    // occluder edge on the optical axis, which passes through the target's center
    const std::vector<PosedMesh> items{{&target, at(0, 0, 800)}, {&cover, at(-50, 0, 700)}};
    const auto scene = render_depth(items, cam);
    const auto solo = render_depth(target, items[0].pose, cam);
    const std::size_t vis = count_nonzero(visibility_mask(scene.depth, solo.depth));
    const std::size_t all = count_nonzero(coverage_mask(solo.depth));
    // oracle: pixels where the ray-cast winner is the target
    const auto o = flatpose::testing::raycast_scene(items, cam);
    const auto oracle = static_cast<std::size_t>(std::count(o.instance.begin(), o.instance.end(), 1));
    EXPECT_NEAR(static_cast<double>(vis), 0.5 * all, 0.05 * all);
    EXPECT_NEAR(static_cast<double>(vis), static_cast<double>(oracle), 0.01 * all);
}

TEST(Visibility, ShapeMismatchThrows) {
    EXPECT_THROW(visibility_mask(DepthMap(4, 4), DepthMap(4, 5)), InvalidArgument);
}

TEST(Masks, BboxAndDepthQuantization) {
    BinaryMask m(10, 10, 0);
    m.at(2, 3) = 255;
    m.at(5, 7) = 255;
    EXPECT_EQ(*mask_bbox(m), (std::array<int, 4>{2, 3, 4, 5}));
    EXPECT_FALSE(mask_bbox(BinaryMask(3, 3, 0)).has_value());
    DepthMap d(2, 1, 0.0f);
    d.data = {500.04f, 7000.0f};
    const auto q = depth_to_u16(d);
    EXPECT_EQ(q.data[0], 5000);
    EXPECT_EQ(q.data[1], 65535);
    const auto back = decode_png(encode_png(q).data(), encode_png(q).size());
    EXPECT_EQ(back.bit_depth, 16);
    EXPECT_EQ(back.gray16, q);
}

TEST(RenderPerformance, VgaTenThousandTriangles) {
    const auto disc = flatpose::testing::disc_mesh(2502, 150.0);
    ASSERT_GE(disc.triangles.size(), 10000u);
    const CameraIntrinsics cam;
    const std::vector<PosedMesh> items{{&disc, at(0, 0, 700, axis_angle(Vec3(1, 0, 0), deg2rad(40)))}};
    double best = 1e9;
    for (int i = 0; i < 5; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = render_depth(items, cam);
        best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        ASSERT_GT(count_nonzero(coverage_mask(r.depth)), 30000u);
    }
    EXPECT_LT(best, 50.0);
}
