#pragma once

// Noisy-oracle estimator: ground-truth poses with controlled perturbation.

#include "flatpose/core/error.hpp"
#include "flatpose/core/rng.hpp"
#include "flatpose/estimator/types.hpp"
#include "flatpose/scenegen/scene.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace flatpose::estimator {

struct OracleNoise {
    double rot_deg = 0.0;   // sigma of the perturbation angle
    double trans_mm = 0.0;  // sigma per translation axis
    double drop = 0.0;      // probability an instance is not reported

    void validate() const {
        if (!(rot_deg >= 0.0) || !(trans_mm >= 0.0)) throw InvalidArgument("oracle noise sigmas must be >= 0");
        if (!(drop >= 0.0 && drop < 1.0)) throw InvalidArgument("oracle drop probability must lie in [0, 1)");
    }
};

/**
 * Every instance draws the same random numbers regardless of the noise
 * level (drop uniform, axis, angle, translation), so larger sigmas or drop
 * rates perturb the same underlying samples further.
 */
inline EstimatorOutput oracle_estimate(const scenegen::Scene& scene, const OracleNoise& noise, std::uint64_t seed) {
    noise.validate();
    Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(scene.scene_id)),
                       static_cast<std::uint64_t>(scene.image_id));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> n(0.0, 1.0);
    EstimatorOutput out;
    out.frame_id = scene.image_id;
    for (const auto& inst : scene.instances) {
        const double keep = u(rng);
        Vec3 axis(n(rng), n(rng), n(rng));
        const double angle = std::abs(n(rng)) * deg2rad(noise.rot_deg);
        const Vec3 dt(n(rng), n(rng), n(rng));
        if (keep < noise.drop) continue;
        if (axis.norm() < 1e-12) axis = Vec3::UnitZ();
        Detection d;
        d.category_id = inst.category_id;
        d.score = 1.0 - noise.drop;
        d.pose.R = angle > 0.0 ? Mat3(axis_angle(axis.normalized(), angle) * inst.cam_pose.R) : inst.cam_pose.R;
        d.pose.t = inst.cam_pose.t + noise.trans_mm * dt;
        if (inst.bbox_obj) {
            const auto& b = *inst.bbox_obj;
            d.bbox = {double(b[0]), double(b[1]), double(b[2]), double(b[3])};
        }
        out.detections.push_back(d);
    }
    return out;
}

inline std::vector<metrics::PoseEstimate> oracle_estimates(const std::vector<scenegen::Scene>& scenes, const OracleNoise& noise,
                                                           std::uint64_t seed) {
    std::vector<metrics::PoseEstimate> all;
    for (const auto& s : scenes) {
        const auto es = to_estimates(oracle_estimate(s, noise, seed), s.scene_id, s.image_id);
        all.insert(all.end(), es.begin(), es.end());
    }
    return all;
}

}  // namespace flatpose::estimator
