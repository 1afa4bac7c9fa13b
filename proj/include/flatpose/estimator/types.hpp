#pragma once

#include "flatpose/core/error.hpp"
#include "flatpose/core/image.hpp"
#include "flatpose/core/types.hpp"
#include "flatpose/metrics/detection.hpp"
#include "flatpose/metrics/estimates.hpp"
#include "flatpose/raster/camera.hpp"
#include "flatpose/raster/render.hpp"
#include "flatpose/scenegen/scene.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace flatpose::estimator {

/// The input cannot be handled by this estimator (missing plane, wrong payload).
class UnsupportedInputError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

struct Detection {
    int category_id = 0;
    double score = 0.0;
    metrics::Box bbox{};  // x, y, w, h in pixels
    Pose pose;            // model -> camera
};

/**
 * One frame. Exactly one payload kind: an instance mask (synthetic path,
 * optionally with depth) or a single-channel intensity image (real path).
 * `plane` is the ground plane frame (plane z = 0) to camera transform.
 */
struct EstimatorInput {
    std::int64_t frame_id = 0;
    raster::CameraIntrinsics cam;
    std::optional<raster::InstanceMask> instances;
    std::optional<raster::DepthMap> depth;
    std::optional<Gray8> intensity;
    std::optional<Pose> plane;

    void validate() const {
        cam.validate();
        if (instances.has_value() == intensity.has_value())
            throw UnsupportedInputError("estimator input needs exactly one of instance mask or intensity image");
        if (depth && !instances) throw UnsupportedInputError("depth is only accepted with an instance mask");
        const auto check = [&](const auto& img, const char* what) {
            if (img.width != cam.width || img.height != cam.height)
                throw UnsupportedInputError(std::string(what) + " size does not match the intrinsics");
        };
        if (instances) check(*instances, "instance mask");
        if (depth) check(*depth, "depth map");
        if (intensity) check(*intensity, "intensity image");
    }
};

struct EstimatorOutput {
    std::int64_t frame_id = 0;
    std::vector<Detection> detections;  // score descending
    double compute_ms = 0.0;
    std::vector<std::string> diagnostics;

    void sort_by_score() {
        std::stable_sort(detections.begin(), detections.end(),
                         [](const Detection& a, const Detection& b) { return a.score > b.score; });
    }
};

/// Stateless after construction; estimate() may run concurrently.
class Estimator {
public:
    virtual ~Estimator() = default;
    virtual std::string name() const = 0;
    virtual EstimatorOutput estimate(const EstimatorInput& input) const = 0;
};

/// Synthetic-path input for a generated scene: visible-instance labels and
/// the scene depth, with the true ground plane.
inline EstimatorInput input_from_scene(const scenegen::Scene& scene) {
    EstimatorInput in;
    in.frame_id = scene.image_id;
    in.cam = scene.cam;
    raster::InstanceMask mask(scene.cam.width, scene.cam.height, 0);
    for (std::size_t k = 0; k < scene.instances.size(); ++k) {
        const auto& m = scene.instances[k].mask_visib;
        for (std::size_t i = 0; i < m.size(); ++i)
            if (m.data[i]) mask.data[i] = static_cast<std::uint16_t>(k + 1);
    }
    in.instances = std::move(mask);
    in.depth = scene.depth;
    in.plane = scene.world_to_cam;
    return in;
}

inline std::vector<metrics::PoseEstimate> to_estimates(const EstimatorOutput& out, int scene_id, int image_id) {
    std::vector<metrics::PoseEstimate> es;
    for (const auto& d : out.detections) es.push_back({scene_id, image_id, d.category_id, d.score, d.pose, d.bbox});
    return es;
}

}  // namespace flatpose::estimator
