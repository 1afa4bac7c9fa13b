#pragma once

#include "flatpose/core/error.hpp"
#include "flatpose/core/parallel.hpp"
#include "flatpose/core/rng.hpp"
#include "flatpose/core/types.hpp"
#include "flatpose/geometry/mesh.hpp"
#include "flatpose/geometry/polygon.hpp"
#include "flatpose/raster/camera.hpp"
#include "flatpose/raster/render.hpp"
#include "flatpose/scenegen/placement.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

namespace flatpose::scenegen {

class PlacementError : public GeometryError {
public:
    using GeometryError::GeometryError;
};

struct SceneInstance {
    int category_id = 0;
    std::size_t model_index = 0;  // into the library passed to compose_scene
    Pose world_pose;              // model -> world (plane z = 0)
    Pose cam_pose;                // model -> camera
    std::size_t px_count_all = 0;
    std::size_t px_count_visib = 0;
    double visible_fraction = 0.0;
    std::optional<std::array<int, 4>> bbox_obj;
    std::optional<std::array<int, 4>> bbox_visib;
    raster::BinaryMask mask_visib;
};

/// One rendered image with ground truth.
struct Scene {
    int scene_id = 0;
    int image_id = 0;
    raster::CameraIntrinsics cam;
    Pose world_to_cam;
    std::vector<SceneInstance> instances;
    raster::DepthMap depth;
};

struct ComposeOptions {
    std::size_t count = 3;
    double plane_extent = 0.0;  // mm; 0 picks a size from the chosen parts
    int max_rejections = 1000;
    double visibility_delta = raster::kDefaultVisibilityDelta;
    CameraSampler camera;
};

/// Fills per-instance masks, pixel counts and visible fractions from renders.
inline void annotate_visibility(Scene& scene, const std::vector<geometry::TriMesh>& library, double delta) {
    std::vector<raster::PosedMesh> items;
    for (const auto& inst : scene.instances) items.push_back({&library.at(inst.model_index), inst.cam_pose});
    scene.depth = raster::render_depth(items, scene.cam).depth;
    for (std::size_t k = 0; k < scene.instances.size(); ++k) {
        auto& inst = scene.instances[k];
        const auto solo = raster::render_depth(std::vector<raster::PosedMesh>{items[k]}, scene.cam);
        const auto all = raster::coverage_mask(solo.depth);
        inst.mask_visib = raster::visibility_mask(scene.depth, solo.depth, delta);
        inst.px_count_all = raster::count_nonzero(all);
        inst.px_count_visib = raster::count_nonzero(inst.mask_visib);
        inst.visible_fraction = inst.px_count_all == 0 ? 0.0
                                                       : static_cast<double>(inst.px_count_visib) /
                                                             static_cast<double>(inst.px_count_all);
        inst.bbox_obj = raster::mask_bbox(all);
        inst.bbox_visib = raster::mask_bbox(inst.mask_visib);
    }
}

/**
 * Places `opts.count` parts drawn from `library` on the ground plane with
 * pairwise disjoint footprints, samples a camera and renders ground truth.
 * Parts are drawn without replacement while the library allows it.
 */
inline Scene compose_scene(const std::vector<geometry::TriMesh>& library, const ComposeOptions& opts, std::uint64_t seed) {
    if (opts.count < 1) throw InvalidArgument("scene part count must be >= 1");
    if (library.empty()) throw InvalidArgument("model library is empty");
    opts.camera.validate();
    Rng rng = make_rng(seed);

    std::vector<std::size_t> chosen;
    if (opts.count <= library.size()) {
        std::vector<std::size_t> idx(library.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t i = 0; i < opts.count; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
            std::swap(idx[i], idx[pick(rng)]);
            chosen.push_back(idx[i]);
        }
    } else {
        std::uniform_int_distribution<std::size_t> pick(0, library.size() - 1);
        for (std::size_t i = 0; i < opts.count; ++i) chosen.push_back(pick(rng));
    }

    double extent = opts.plane_extent;
    if (extent <= 0.0) {
        double sq = 0.0;
        for (auto i : chosen) sq += library[i].diameter * library[i].diameter;
        extent = std::max(100.0, 1.2 * std::sqrt(sq));
    }

    Scene scene;
    scene.cam = opts.camera.intrinsics;
    std::vector<Polygon2> placed;
    int rejections = 0;
    for (auto i : chosen) {
        const auto& mesh = library[i];
        while (true) {
            const Pose p = sample_resting_pose(mesh, extent, rng);
            Polygon2 fp = footprint(mesh, p);
            const bool clash = std::any_of(placed.begin(), placed.end(),
                                           [&](const Polygon2& q) { return geometry::polygons_overlap(fp, q); });
            if (!clash) {
                placed.push_back(std::move(fp));
                SceneInstance inst;
                inst.category_id = mesh.category_id;
                inst.model_index = i;
                inst.world_pose = p;
                scene.instances.push_back(std::move(inst));
                break;
            }
            if (++rejections > opts.max_rejections)
                throw PlacementError("could not place " + std::to_string(opts.count) + " parts without overlap after " +
                                     std::to_string(opts.max_rejections) + " rejections");
        }
    }

    double radius = 0.0;
    for (const auto& inst : scene.instances)
        radius = std::max(radius, inst.world_pose.t.head<2>().norm() + 0.5 * library[inst.model_index].diameter);
    scene.world_to_cam = sample_camera(opts.camera, 1.05 * radius, rng);
    for (auto& inst : scene.instances) inst.cam_pose = scene.world_to_cam * inst.world_pose;
    annotate_visibility(scene, library, opts.visibility_delta);
    return scene;
}

/**
 * Composes `n` scenes with ids 0..n-1. Scene i uses the seed
 * derive_seed(master_seed, i), so the output does not depend on `threads`.
 */
inline std::vector<Scene> generate_scenes(const std::vector<geometry::TriMesh>& library, const ComposeOptions& opts,
                                          std::size_t n, std::uint64_t master_seed, unsigned threads = 0) {
    if (n == 0) throw InvalidArgument("scene count must be >= 1");
    std::vector<Scene> scenes(n);
    parallel_for(
        n,
        [&](std::size_t i) {
            scenes[i] = compose_scene(library, opts, derive_seed(master_seed, i));
            scenes[i].scene_id = static_cast<int>(i);
        },
        threads);
    return scenes;
}

}  // namespace flatpose::scenegen
