#pragma once

// Dataset-level evaluation: matches estimates to ground-truth targets and
// aggregates MSSD / MSPD / VSD recall grids, BOP19 average recall, mAP and
// a class confusion table.

#include "flatpose/core/error.hpp"
#include "flatpose/core/parallel.hpp"
#include "flatpose/metrics/detection.hpp"
#include "flatpose/metrics/estimates.hpp"
#include "flatpose/metrics/pose_errors.hpp"
#include "flatpose/metrics/recall.hpp"
#include "flatpose/raster/camera.hpp"
#include "flatpose/raster/render.hpp"
#include "flatpose/scenegen/models.hpp"
#include "flatpose/scenegen/scene.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace flatpose::metrics {

/// Per-target errors for all three metrics.
struct TargetRecord {
    int scene_id = 0;
    int image_id = 0;
    int category_id = 0;
    double diameter = 0.0;
    double r = 1.0;
    bool matched = false;
    double vsd = std::numeric_limits<double>::infinity();
    double mssd = std::numeric_limits<double>::infinity();
    double mspd = std::numeric_limits<double>::infinity();

    TargetError as(MetricKind k) const {
        switch (k) {
            case MetricKind::VSD: return {vsd, diameter, r};
            case MetricKind::MSSD: return {mssd, diameter, r};
            case MetricKind::MSPD: return {mspd, diameter, r};
        }
        return {};
    }
};

struct EvalReport {
    EvalConfig config;
    std::size_t n_images = 0;
    std::size_t n_targets = 0;
    std::size_t n_estimates = 0;
    std::size_t n_matched = 0;
    std::map<MetricKind, std::vector<double>> recall;
    std::map<int, std::map<MetricKind, std::vector<double>>> per_object_recall;
    std::map<int, std::size_t> targets_per_object;
    AverageRecall ar;
    ApResult detection;
    std::map<int, std::map<int, std::size_t>> confusion;  // gt class -> predicted class (0 = missed)
    std::vector<TargetRecord> targets;
};

/// Axis-aligned box of the projected mesh vertices; nullopt if any vertex
/// lies behind the camera.
inline std::optional<Box> projected_bbox(const geometry::TriMesh& mesh, const Pose& pose, const raster::CameraIntrinsics& cam) {
    double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
    for (const auto& v : mesh.vertices) {
        const Vec3 c = pose.apply(v);
        if (!(c.z() > 0.0)) return std::nullopt;
        const Vec2 p = raster::project(c, cam);
        x0 = std::min(x0, p.x());
        y0 = std::min(y0, p.y());
        x1 = std::max(x1, p.x());
        y1 = std::max(y1, p.y());
    }
    return Box{x0, y0, x1 - x0, y1 - y0};
}

namespace detail {

struct ImageResult {
    std::vector<TargetRecord> targets;
    std::vector<BoxDetection> dets;
    std::vector<BoxTarget> gts;
    std::vector<std::pair<int, int>> confusion;
    std::size_t matched = 0;
};

inline double safe_mspd(const Pose& est, const Pose& gt, const scenegen::ModelEntry& m, const raster::CameraIntrinsics& cam) {
    try {
        return e_mspd(est, gt, m.mesh, m.symmetries, cam);
    } catch (const raster::BehindCameraError&) {
        return std::numeric_limits<double>::infinity();
    }
}

inline ImageResult evaluate_image(const scenegen::Scene& scene, const std::vector<const PoseEstimate*>& ests,
                                  const scenegen::ModelLibrary& lib, const EvalConfig& cfg) {
    ImageResult out;
    const double r = scene.cam.r();
    const auto& insts = scene.instances;
    for (const auto& inst : insts) {
        TargetRecord t;
        t.scene_id = scene.scene_id;
        t.image_id = scene.image_id;
        t.category_id = inst.category_id;
        t.diameter = lib.by_category(inst.category_id).mesh.diameter;
        t.r = r;
        out.targets.push_back(t);
    }

    // greedy by score within each class, pairing by minimal MSPD
    std::vector<const PoseEstimate*> order = ests;
    std::stable_sort(order.begin(), order.end(), [](const PoseEstimate* a, const PoseEstimate* b) { return a->score > b->score; });
    std::vector<bool> used(insts.size(), false);
    for (const PoseEstimate* e : order) {
        if (!lib.has_category(e->category_id)) continue;
        const auto& model = lib.by_category(e->category_id);
        std::size_t best = insts.size();
        double best_err = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < insts.size(); ++k) {
            if (used[k] || insts[k].category_id != e->category_id) continue;
            const double err = safe_mspd(e->pose, insts[k].cam_pose, model, scene.cam);
            if (best == insts.size() || err < best_err) {
                best = k;
                best_err = err;
            }
        }
        if (best == insts.size()) continue;
        used[best] = true;
        ++out.matched;
        auto& t = out.targets[best];
        t.matched = true;
        t.mspd = best_err;
        t.mssd = e_mssd(e->pose, insts[best].cam_pose, model.mesh, model.symmetries);
        const auto de = raster::render_depth(model.mesh, e->pose, scene.cam).depth;
        const auto dg = raster::render_depth(model.mesh, insts[best].cam_pose, scene.cam).depth;
        t.vsd = e_vsd_from_depth(de, dg, scene.depth, cfg.tau_mm(model.mesh.diameter), cfg.visibility_delta);
    }

    for (const PoseEstimate* e : ests) {
        std::optional<Box> b = e->bbox;
        if (!b && lib.has_category(e->category_id))
            b = projected_bbox(lib.by_category(e->category_id).mesh, e->pose, scene.cam);
        if (b && (*b)[2] > 0.0 && (*b)[3] > 0.0) out.dets.push_back({e->category_id, e->score, *b});
    }
    for (const auto& inst : insts)
        if (inst.bbox_obj)
            out.gts.push_back({inst.category_id,
                               Box{static_cast<double>((*inst.bbox_obj)[0]), static_cast<double>((*inst.bbox_obj)[1]),
                                   static_cast<double>((*inst.bbox_obj)[2]), static_cast<double>((*inst.bbox_obj)[3])}});
    // class-agnostic best-IoU assignment for the confusion table
    for (const auto& g : out.gts) {
        double best = 0.0;
        int pred = 0;
        for (const auto& d : out.dets) {
            const double v = iou(g.box, d.box);
            if (v >= cfg.map_iou && v > best) {
                best = v;
                pred = d.category_id;
            }
        }
        out.confusion.emplace_back(g.category_id, pred);
    }
    return out;
}

}  // namespace detail

/**
 * Evaluates `estimates` against every image of `scenes`. Each ground-truth
 * instance is one target; targets without a matched estimate count as
 * missed (+infinity error) for every metric.
 */
inline EvalReport evaluate(const std::vector<scenegen::Scene>& scenes, const scenegen::ModelLibrary& lib,
                           const std::vector<PoseEstimate>& estimates, const EvalConfig& cfg = {}, unsigned threads = 0) {
    cfg.validate();
    std::map<std::pair<int, int>, std::vector<const PoseEstimate*>> by_image;
    for (const auto& e : estimates) by_image[{e.scene_id, e.image_id}].push_back(&e);

    std::vector<detail::ImageResult> per_image(scenes.size());
    parallel_for(
        scenes.size(),
        [&](std::size_t i) {
            const auto it = by_image.find({scenes[i].scene_id, scenes[i].image_id});
            static const std::vector<const PoseEstimate*> none;
            per_image[i] = detail::evaluate_image(scenes[i], it == by_image.end() ? none : it->second, lib, cfg);
        },
        threads);

    EvalReport rep;
    rep.config = cfg;
    rep.n_images = scenes.size();
    rep.n_estimates = estimates.size();
    std::vector<std::vector<BoxDetection>> dets;
    std::vector<std::vector<BoxTarget>> gts;
    for (auto& res : per_image) {
        rep.targets.insert(rep.targets.end(), res.targets.begin(), res.targets.end());
        rep.n_matched += res.matched;
        dets.push_back(std::move(res.dets));
        gts.push_back(std::move(res.gts));
        for (const auto& [g, p] : res.confusion) ++rep.confusion[g][p];
    }
    rep.n_targets = rep.targets.size();
    if (rep.n_targets == 0) throw InvalidArgument("evaluation found no ground-truth targets");

    std::map<int, std::vector<const TargetRecord*>> per_obj;
    for (const auto& t : rep.targets) per_obj[t.category_id].push_back(&t);
    for (auto k : kAllMetrics) {
        std::vector<TargetError> all;
        for (const auto& t : rep.targets) all.push_back(t.as(k));
        rep.recall[k] = recall_curve(all, k, cfg.thresholds(k));
        for (const auto& [cls, list] : per_obj) {
            std::vector<TargetError> errs;
            for (const auto* t : list) errs.push_back(t->as(k));
            rep.per_object_recall[cls][k] = recall_curve(errs, k, cfg.thresholds(k));
        }
    }
    for (const auto& [cls, list] : per_obj) rep.targets_per_object[cls] = list.size();
    rep.ar = bop19_average_recall(rep.recall.at(MetricKind::VSD), rep.recall.at(MetricKind::MSSD),
                                  rep.recall.at(MetricKind::MSPD));
    rep.detection = map_at_iou(dets, gts, cfg.map_iou);
    return rep;
}

/// Row label for threshold row i of a grid of `n` rows: THR=05 ... THR=50
/// for the default grids (the MSSD fraction times 100).
inline std::string thr_label(const EvalConfig& cfg, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "THR=%02d", static_cast<int>(std::lround(cfg.mssd_thresholds[i] * 100.0)));
    return buf;
}

inline nlohmann::json report_to_json(const EvalReport& rep) {
    nlohmann::json j;
    const auto& cfg = rep.config;
    j["config"] = {{"mssd_thresholds", cfg.mssd_thresholds},
                   {"mspd_thresholds", cfg.mspd_thresholds},
                   {"vsd_thresholds", cfg.vsd_thresholds},
                   {"vsd_tau", cfg.vsd_tau},
                   {"vsd_tau_relative", cfg.vsd_tau_relative},
                   {"visibility_delta", cfg.visibility_delta},
                   {"map_iou", cfg.map_iou}};
    j["counts"] = {{"images", rep.n_images},
                   {"targets", rep.n_targets},
                   {"estimates", rep.n_estimates},
                   {"matched", rep.n_matched}};
    auto rows = nlohmann::json::array();
    for (std::size_t i = 0; i < cfg.mssd_thresholds.size(); ++i)
        rows.push_back({{"label", thr_label(cfg, i)},
                        {"vsd_threshold", cfg.vsd_thresholds[i]},
                        {"mssd_threshold", cfg.mssd_thresholds[i]},
                        {"mspd_threshold", cfg.mspd_thresholds[i]},
                        {"VSD", rep.recall.at(MetricKind::VSD)[i]},
                        {"MSSD", rep.recall.at(MetricKind::MSSD)[i]},
                        {"MSPD", rep.recall.at(MetricKind::MSPD)[i]}});
    j["thresholds"] = rows;
    j["average_recall"] = {{"VSD", rep.ar.vsd}, {"MSSD", rep.ar.mssd}, {"MSPD", rep.ar.mspd}, {"BOP19", rep.ar.bop}};
    nlohmann::json per_obj = nlohmann::json::object();
    for (const auto& [cls, m] : rep.per_object_recall) {
        nlohmann::json o;
        o["targets"] = rep.targets_per_object.at(cls);
        for (auto k : kAllMetrics) o[metric_name(k)] = m.at(k);
        per_obj[std::to_string(cls)] = o;
    }
    j["per_object"] = per_obj;
    nlohmann::json ap = nlohmann::json::object();
    for (const auto& [cls, v] : rep.detection.per_class) ap[std::to_string(cls)] = v;
    j["detection"] = {{"iou", cfg.map_iou},
                      {"ap", ap},
                      {"mAP", rep.detection.map},
                      {"classes_without_targets", rep.detection.classes_without_targets}};
    nlohmann::json conf = nlohmann::json::object();
    for (const auto& [g, row] : rep.confusion) {
        nlohmann::json r = nlohmann::json::object();
        for (const auto& [p, n] : row) r[p == 0 ? "missed" : std::to_string(p)] = n;
        conf[std::to_string(g)] = r;
    }
    j["confusion"] = conf;
    return j;
}

/// Plain-text table: one row per threshold, largest first, then averages.
inline std::string report_table(const EvalReport& rep) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "targets: %zu  estimates: %zu  matched: %zu  images: %zu\n", rep.n_targets,
                  rep.n_estimates, rep.n_matched, rep.n_images);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-8s %8s %8s %8s\n", "", "VSD", "MSSD", "MSPD");
    out += buf;
    const auto& cfg = rep.config;
    for (std::size_t i = cfg.mssd_thresholds.size(); i-- > 0;) {
        std::snprintf(buf, sizeof buf, "%-8s %8.4f %8.4f %8.4f\n", thr_label(cfg, i).c_str(),
                      rep.recall.at(MetricKind::VSD)[i], rep.recall.at(MetricKind::MSSD)[i],
                      rep.recall.at(MetricKind::MSPD)[i]);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "%-8s %8.4f %8.4f %8.4f\n", "AR", rep.ar.vsd, rep.ar.mssd, rep.ar.mspd);
    out += buf;
    std::snprintf(buf, sizeof buf, "AR_BOP19 %8.4f\nmAP@%.2f %8.4f\n", rep.ar.bop, cfg.map_iou, rep.detection.map);
    out += buf;
    return out;
}

}  // namespace flatpose::metrics
