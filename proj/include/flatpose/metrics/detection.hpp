#pragma once

// 2D detection average precision with all-point interpolation.

#include "flatpose/core/error.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <set>
#include <vector>

namespace flatpose::metrics {

using Box = std::array<double, 4>;  // x, y, w, h in pixels

inline double iou(const Box& a, const Box& b) {
    const double x0 = std::max(a[0], b[0]), y0 = std::max(a[1], b[1]);
    const double x1 = std::min(a[0] + a[2], b[0] + b[2]), y1 = std::min(a[1] + a[3], b[1] + b[3]);
    const double inter = std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0);
    const double uni = a[2] * a[3] + b[2] * b[3] - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

struct BoxDetection {
    int category_id = 0;
    double score = 0.0;
    Box box{};
};

struct BoxTarget {
    int category_id = 0;
    Box box{};
};

struct ApResult {
    std::map<int, double> per_class;      // classes with at least one target
    std::set<int> classes_without_targets;  // detected but never present; excluded from the mean
    double map = 0.0;
};

/**
 * Greedy matching per image: detections in descending score order take the
 * unmatched same-class target of highest IoU, if that IoU >= iou_threshold.
 * Returns one flag per detection (true = true positive), indexed like the input.
 */
inline std::vector<bool> match_image(const std::vector<BoxDetection>& dets, const std::vector<BoxTarget>& gts,
                                     double iou_threshold) {
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
    std::vector<bool> used(gts.size(), false), tp(dets.size(), false);
    for (std::size_t d : order) {
        double best = -1.0;
        std::size_t who = gts.size();
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (used[g] || gts[g].category_id != dets[d].category_id) continue;
            const double v = iou(dets[d].box, gts[g].box);
            if (v > best) {
                best = v;
                who = g;
            }
        }
        if (who < gts.size() && best >= iou_threshold) {
            used[who] = true;
            tp[d] = true;
        }
    }
    return tp;
}

/// Area under the precision envelope of a ranked list of TP/FP flags.
inline double average_precision(const std::vector<bool>& ranked_tp, std::size_t n_targets) {
    if (n_targets == 0) return 0.0;
    std::vector<double> prec, rec;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < ranked_tp.size(); ++i) {
        tp += ranked_tp[i];
        prec.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
        rec.push_back(static_cast<double>(tp) / static_cast<double>(n_targets));
    }
    for (std::size_t i = prec.size(); i-- > 1;) prec[i - 1] = std::max(prec[i - 1], prec[i]);
    double ap = 0.0, last_r = 0.0;
    for (std::size_t i = 0; i < prec.size(); ++i) {
        ap += (rec[i] - last_r) * prec[i];
        last_r = rec[i];
    }
    return ap;
}

/// Per-class AP and their unweighted mean. `detections[i]` and `targets[i]`
/// belong to image i.
inline ApResult map_at_iou(const std::vector<std::vector<BoxDetection>>& detections,
                           const std::vector<std::vector<BoxTarget>>& targets, double iou_threshold = 0.5) {
    if (detections.size() != targets.size()) throw InvalidArgument("map_at_iou: image counts differ");
    struct Ranked {
        double score;
        std::size_t image, index;
        bool tp;
    };
    std::map<int, std::vector<Ranked>> ranked;
    std::map<int, std::size_t> n_targets;
    for (std::size_t img = 0; img < targets.size(); ++img) {
        for (const auto& t : targets[img]) ++n_targets[t.category_id];
        const auto tp = match_image(detections[img], targets[img], iou_threshold);
        for (std::size_t d = 0; d < detections[img].size(); ++d)
            ranked[detections[img][d].category_id].push_back({detections[img][d].score, img, d, tp[d]});
    }
    ApResult out;
    for (auto& [cls, list] : ranked)
        if (!n_targets.count(cls)) out.classes_without_targets.insert(cls);
    for (const auto& [cls, n] : n_targets) {
        auto list = ranked[cls];
        std::stable_sort(list.begin(), list.end(), [](const Ranked& a, const Ranked& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.image != b.image ? a.image < b.image : a.index < b.index;
        });
        std::vector<bool> flags;
        for (const auto& r : list) flags.push_back(r.tp);
        out.per_class[cls] = average_precision(flags, n);
    }
    if (!out.per_class.empty()) {
        double s = 0.0;
        for (const auto& [cls, ap] : out.per_class) s += ap;
        out.map = s / static_cast<double>(out.per_class.size());
    }
    return out;
}

}  // namespace flatpose::metrics
