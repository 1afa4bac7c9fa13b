#include "fixtures.hpp"

#include "flatpose/estimator/contour.hpp"
#include "flatpose/estimator/oracle.hpp"
#include "flatpose/estimator/registry.hpp"
#include "flatpose/metrics/evaluate.hpp"
#include "flatpose/metrics/pose_errors.hpp"
#include "flatpose/scenegen/models.hpp"
#include "flatpose/scenegen/placement.hpp"
#include "flatpose/scenegen/scene.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace flatpose;
using namespace flatpose::estimator;

namespace {

const scenegen::ModelLibrary& library() {
    static const scenegen::ModelLibrary lib = scenegen::build_model_library(flatpose::testing::fixture_document());
    return lib;
}

std::size_t index_of(int category) {
    for (std::size_t i = 0; i < library().models.size(); ++i)
        if (library().models[i].category_id == category) return i;
    throw std::runtime_error("no such category");
}

// One part at a chosen resting pose, seen by a fixed oblique camera.
scenegen::Scene single_part_scene(std::size_t model, double theta, bool flip, Vec2 xy, double az = 0.7, double el = 1.0,
                                  double dist = 800.0) {
    const auto& mesh = library().models[model].mesh;
    scenegen::Scene s;
    scenegen::SceneInstance inst;
    inst.category_id = mesh.category_id;
    inst.model_index = model;
    inst.world_pose.R = rotation_z(theta);
    if (flip) inst.world_pose.R = inst.world_pose.R * Vec3(1, -1, -1).asDiagonal();
    inst.world_pose.t = Vec3(xy.x(), xy.y(), 0.5 * scenegen::mesh_thickness(mesh));
    const Vec3 eye(dist * std::cos(el) * std::cos(az), dist * std::cos(el) * std::sin(az), dist * std::sin(el));
    s.world_to_cam = raster::look_at(eye, Vec3::Zero(), Vec3::UnitZ());
    inst.cam_pose = s.world_to_cam * inst.world_pose;
    s.instances.push_back(inst);
    scenegen::annotate_visibility(s, library().meshes(), raster::kDefaultVisibilityDelta);
    return s;
}

const ContourEstimator& contour() {
    static const ContourEstimator est(library());
    return est;
}

double angle_diff_deg(double a, double b) {
    double d = std::fmod(rad2deg(a - b), 360.0);
    if (d > 180.0) d -= 360.0;
    if (d < -180.0) d += 360.0;
    return std::abs(d);
}

}  // namespace

TEST(Oracle, ZeroNoiseIsExactAndScoresOne) {
    scenegen::ComposeOptions opts;
    const auto scenes = scenegen::generate_scenes(library().meshes(), opts, 3, 21, 0);
    for (const auto& s : scenes) {
        const auto out = oracle_estimate(s, {}, 5);
        ASSERT_EQ(out.detections.size(), s.instances.size());
        for (std::size_t k = 0; k < s.instances.size(); ++k) {
            EXPECT_EQ(out.detections[k].score, 1.0);
            const auto& m = library().by_category(s.instances[k].category_id);
            EXPECT_EQ(metrics::e_mssd(out.detections[k].pose, s.instances[k].cam_pose, m.mesh, m.symmetries), 0.0);
        }
    }
    const auto rep = metrics::evaluate(scenes, library(), oracle_estimates(scenes, {}, 5));
    EXPECT_EQ(rep.ar.bop, 1.0);
}

TEST(Oracle, TranslationNoiseMatchesChiMean) {
    // 1000 instances; mean MSSD of a pure N(0, 5^2 I) offset is 5 * 2 sqrt(2 / pi)
    std::vector<scenegen::Scene> scenes(250);
    const auto& m = library().models[0];
    for (int i = 0; i < 250; ++i) {
        scenes[i].scene_id = i;
        for (int k = 0; k < 4; ++k) {
            scenegen::SceneInstance inst;
            inst.category_id = m.category_id;
            inst.cam_pose.t = Vec3(10.0 * k, 0, 900);
            scenes[i].instances.push_back(inst);
        }
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : scenes) {
        const auto out = oracle_estimate(s, {0.0, 5.0, 0.0}, 77);
        for (std::size_t k = 0; k < out.detections.size(); ++k, ++n)
            sum += metrics::e_mssd(out.detections[k].pose, s.instances[k].cam_pose, m.mesh, m.symmetries);
    }
    ASSERT_EQ(n, 1000u);
    const double expected = 5.0 * 2.0 * std::sqrt(2.0 / kPi);
    EXPECT_NEAR(sum / double(n), expected, 0.05 * expected);
}

TEST(Oracle, RecallDoesNotIncreaseWithNoise) {
    scenegen::ComposeOptions opts;
    const auto scenes = scenegen::generate_scenes(library().meshes(), opts, 8, 22, 0);
    const auto ar_at = [&](OracleNoise nz, std::uint64_t seed) {
        return metrics::evaluate(scenes, library(), oracle_estimates(scenes, nz, seed));
    };
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        std::vector<metrics::EvalReport> rot, trans, drop;
        for (double s : {0.0, 3.0, 15.0}) rot.push_back(ar_at({s, 0.0, 0.0}, seed));
        for (double s : {0.0, 5.0, 20.0}) trans.push_back(ar_at({0.0, s, 0.0}, seed));
        for (double p : {0.0, 0.3, 0.7}) drop.push_back(ar_at({0.0, 0.0, p}, seed));
        for (const auto* grid : {&rot, &trans, &drop})
            for (std::size_t i = 1; i < grid->size(); ++i)
                for (auto k : metrics::kAllMetrics) {
                    const auto& lo = (*grid)[i - 1].recall.at(k);
                    const auto& hi = (*grid)[i].recall.at(k);
                    for (std::size_t j = 0; j < lo.size(); ++j) EXPECT_LE(hi[j], lo[j] + 1e-12);
                }
    }
}

TEST(Oracle, DeterministicAndValidated) {
    scenegen::ComposeOptions opts;
    const auto scenes = scenegen::generate_scenes(library().meshes(), opts, 2, 23, 0);
    const auto a = metrics::estimates_to_jsonl(oracle_estimates(scenes, {2.0, 3.0, 0.2}, 9));
    const auto b = metrics::estimates_to_jsonl(oracle_estimates(scenes, {2.0, 3.0, 0.2}, 9));
    const auto c = metrics::estimates_to_jsonl(oracle_estimates(scenes, {2.0, 3.0, 0.2}, 10));
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    EXPECT_THROW(oracle_estimate(scenes[0], {-1.0, 0.0, 0.0}, 1), InvalidArgument);
    EXPECT_THROW(oracle_estimate(scenes[0], {0.0, 0.0, 1.0}, 1), InvalidArgument);
    std::size_t kept = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) kept += oracle_estimates(scenes, {0, 0, 0.999}, seed).size();
    EXPECT_LE(kept, 2u);
}

TEST(ContourParts, ComponentsAndBoundary) {
    Image<std::uint16_t> lab(10, 8, 0);
    for (int y = 1; y < 4; ++y)
        for (int x = 1; x < 4; ++x) lab.at(x, y) = 1;
    lab.at(7, 6) = 1;  // separate component with the same label
    lab.at(8, 6) = 2;  // touching, different label
    const auto comps = contour_detail::connected_components(lab);
    ASSERT_EQ(comps.size(), 3u);
    EXPECT_EQ(comps[0].pixels.size(), 9u);
    EXPECT_EQ(comps[0].x0, 1);
    EXPECT_EQ(comps[0].x1, 3);
    const auto b = contour_detail::boundary_points(comps[0], lab);
    EXPECT_EQ(b.size(), 12u);  // perimeter of a 3x3 block in pixel edges
    for (const auto& p : b) {
        const bool on_x = p.x() == 1.0 || p.x() == 4.0;
        const bool on_y = p.y() == 1.0 || p.y() == 4.0;
        EXPECT_TRUE(on_x || on_y);
    }
}

TEST(ContourParts, DistanceFieldMatchesBruteForce) {
    Rng rng = make_rng(31);
    std::uniform_real_distribution<double> u(-40, 40);
    std::vector<Vec2> pts;
    for (int i = 0; i < 60; ++i) pts.emplace_back(u(rng), 0.3 * u(rng));
    const contour_detail::DistanceField2 f(pts, 0.5, 10.0);
    Vec2 lo = pts[0], hi = pts[0];
    for (const auto& x : pts) {
        lo = lo.cwiseMin(x);
        hi = hi.cwiseMax(x);
    }
    for (int q = 0; q < 500; ++q) {
        const Vec2 p(1.5 * u(rng), 1.5 * u(rng));
        double best = 1e300;
        for (const auto& x : pts) best = std::min(best, (x - p).norm());
        const bool inside = (p.array() >= lo.array() - 10.0).all() && (p.array() <= hi.array() + 10.0).all();
        // seeds snap to cell centers, plus bilinear interpolation error;
        // outside the grid the value is an upper bound
        if (inside)
            EXPECT_NEAR(f(p), best, 0.75) << p.transpose();
        else
            EXPECT_GE(f(p), best - 0.75) << p.transpose();
    }
}

TEST(ContourParts, NearestGridIsExact) {
    Rng rng = make_rng(32);
    std::uniform_real_distribution<double> u(-50, 50);
    std::vector<Vec2> pts;
    for (int i = 0; i < 300; ++i) pts.emplace_back(u(rng), 0.2 * u(rng));
    const contour_detail::NearestGrid2 g(pts, 2.0);
    for (int q = 0; q < 2000; ++q) {
        const Vec2 p(3.0 * u(rng), 3.0 * u(rng));
        double best = 1e300;
        for (const auto& x : pts) best = std::min(best, (x - p).norm());
        const auto [idx, d] = g.nearest(p);
        EXPECT_DOUBLE_EQ(d, best);
        EXPECT_DOUBLE_EQ((pts[idx] - p).norm(), best);
    }
}

TEST(ContourEstimator, RecoversSinglePartPoseAndClass) {
    for (int cat : {2, 5, 11, 15}) {
        const std::size_t mi = index_of(cat);
        const auto s = single_part_scene(mi, 0.9, cat % 2 == 0, Vec2(20, -15));
        const auto out = contour().estimate(input_from_scene(s));
        ASSERT_EQ(out.detections.size(), 1u) << cat;
        const auto& d = out.detections[0];
        EXPECT_EQ(d.category_id, cat);
        const auto& m = library().models[mi];
        const double mspd = metrics::e_mspd(d.pose, s.instances[0].cam_pose, m.mesh, m.symmetries, s.cam);
        EXPECT_LT(mspd, 5.0 * s.cam.r()) << cat;
        EXPECT_GT(d.score, 0.0);
        EXPECT_LE(d.score, 1.0);
        EXPECT_GT(d.bbox[2], 0.0);
    }
}

TEST(ContourEstimator, InPlaneRotationIsEquivariant) {
    // part 02 has a trivial symmetry group, so its angle is well defined
    const std::size_t mi = index_of(2);
    ASSERT_EQ(library().models[mi].symmetries.size(), 1u);
    const auto base = contour().estimate(input_from_scene(single_part_scene(mi, 0.4, false, Vec2(0, 0))));
    ASSERT_EQ(base.detections.size(), 1u);
    const auto plane = single_part_scene(mi, 0.0, false, Vec2(0, 0)).world_to_cam;
    const double a0 = scenegen::resting_angle(plane.inverse() * base.detections[0].pose);
    for (double beta_deg : {17.0, 95.0, 200.0, 311.5}) {
        const double beta = deg2rad(beta_deg);
        const auto out = contour().estimate(input_from_scene(single_part_scene(mi, 0.4 + beta, false, Vec2(0, 0))));
        ASSERT_EQ(out.detections.size(), 1u);
        const double a1 = scenegen::resting_angle(plane.inverse() * out.detections[0].pose);
        EXPECT_LT(angle_diff_deg(a1, a0 + beta), 2.0) << beta_deg;
    }
}

TEST(ContourEstimator, SymmetricPartAmbiguityIsAbsorbed) {
    // part 01 is a rectangle-like bar with a four-element group
    const std::size_t mi = index_of(1);
    const auto& m = library().models[mi];
    ASSERT_GE(m.symmetries.size(), 2u);
    for (double theta : {0.3, 0.3 + kPi}) {
        const auto s = single_part_scene(mi, theta, false, Vec2(-10, 5));
        const auto out = contour().estimate(input_from_scene(s));
        ASSERT_EQ(out.detections.size(), 1u);
        EXPECT_LT(metrics::e_mssd(out.detections[0].pose, s.instances[0].cam_pose, m.mesh, m.symmetries), 3.0);
    }
}

TEST(ContourEstimator, IntensityPathMatchesMaskPath) {
    const auto s = single_part_scene(index_of(9), 1.3, true, Vec2(5, 5));
    auto in = input_from_scene(s);
    Gray8 gray(in.cam.width, in.cam.height, 0);
    for (std::size_t i = 0; i < gray.size(); ++i) gray.data[i] = in.instances->data[i] ? 200 : 20;
    EstimatorInput g;
    g.cam = in.cam;
    g.plane = in.plane;
    g.intensity = gray;
    const auto a = contour().estimate(in);
    const auto b = contour().estimate(g);
    ASSERT_EQ(a.detections.size(), 1u);
    ASSERT_EQ(b.detections.size(), 1u);
    EXPECT_EQ(a.detections[0].category_id, b.detections[0].category_id);
    EXPECT_TRUE(a.detections[0].pose.R.isApprox(b.detections[0].pose.R, 1e-12));
}

TEST(ContourEstimator, EdgeCases) {
    EstimatorInput in;
    in.instances = raster::InstanceMask(in.cam.width, in.cam.height, 0);
    in.plane = Pose::identity();
    in.plane->t = Vec3(0, 0, 800);
    EXPECT_TRUE(contour().estimate(in).detections.empty());

    // a tiny blob is skipped with a diagnostic
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) in.instances->at(300 + x, 200 + y) = 1;
    const auto out = contour().estimate(in);
    EXPECT_TRUE(out.detections.empty());
    ASSERT_EQ(out.diagnostics.size(), 1u);

    EstimatorInput no_plane = in;
    no_plane.plane.reset();
    EXPECT_THROW(contour().estimate(no_plane), UnsupportedInputError);
    EstimatorInput both = in;
    both.intensity = Gray8(in.cam.width, in.cam.height, 0);
    EXPECT_THROW(contour().estimate(both), UnsupportedInputError);
    EstimatorInput wrong = in;
    wrong.instances = raster::InstanceMask(10, 10, 0);
    EXPECT_THROW(contour().estimate(wrong), UnsupportedInputError);
}

TEST(Registry, NamesAndParameters) {
    EXPECT_EQ(make_estimator("null", {}, library())->name(), "null");
    const auto c = make_estimator("contour", {{"angle_step_deg", "2"}, {"icp_iterations", "5"}}, library());
    EXPECT_EQ(c->name(), "contour");
    EXPECT_EQ(dynamic_cast<const ContourEstimator&>(*c).params().angle_step_deg, 2.0);
    try {
        make_estimator("yolo", {}, library());
        FAIL();
    } catch (const InvalidArgument& e) {
        EXPECT_NE(std::string(e.what()).find("contour, null"), std::string::npos);
    }
    EXPECT_THROW(make_estimator("contour", {{"angle_step_deg", "abc"}}, library()), InvalidArgument);
    EXPECT_THROW(make_estimator("contour", {{"bogus", "1"}}, library()), InvalidArgument);
    EXPECT_THROW(make_estimator("contour", {{"icp_iterations", "2.5"}}, library()), InvalidArgument);
    EXPECT_THROW(make_estimator("null", {{"x", "1"}}, library()), InvalidArgument);
}
