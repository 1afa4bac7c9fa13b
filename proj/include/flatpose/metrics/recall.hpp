#pragma once

#include "flatpose/core/error.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace flatpose::metrics {

enum class MetricKind { VSD, MSSD, MSPD };

inline constexpr std::array<MetricKind, 3> kAllMetrics{MetricKind::VSD, MetricKind::MSSD, MetricKind::MSPD};

inline const char* metric_name(MetricKind k) {
    switch (k) {
        case MetricKind::VSD: return "VSD";
        case MetricKind::MSSD: return "MSSD";
        case MetricKind::MSPD: return "MSPD";
    }
    return "?";
}

inline std::vector<double> default_fraction_grid() {
    std::vector<double> g;
    for (int i = 1; i <= 10; ++i) g.push_back(0.05 * i);
    return g;
}

inline std::vector<double> default_mspd_grid() {
    std::vector<double> g;
    for (int i = 1; i <= 10; ++i) g.push_back(5.0 * i);
    return g;
}

/**
 * Thresholds per metric. Row i of every grid is reported as one THR row.
 *   MSSD: fractions of the object diameter.
 *   MSPD: multiples of r = image_width / 640 pixels.
 *   VSD:  fractions; the VSD error itself is already a fraction.
 */
struct EvalConfig {
    std::vector<double> mssd_thresholds = default_fraction_grid();
    std::vector<double> mspd_thresholds = default_mspd_grid();
    std::vector<double> vsd_thresholds = default_fraction_grid();
    double vsd_tau = 0.15;
    bool vsd_tau_relative = true;  // tau_mm = vsd_tau * diameter, else tau_mm = vsd_tau
    double visibility_delta = 15.0;
    double map_iou = 0.5;

    const std::vector<double>& thresholds(MetricKind k) const {
        switch (k) {
            case MetricKind::VSD: return vsd_thresholds;
            case MetricKind::MSSD: return mssd_thresholds;
            case MetricKind::MSPD: return mspd_thresholds;
        }
        throw InvalidArgument("unknown metric");
    }

    double tau_mm(double diameter) const { return vsd_tau_relative ? vsd_tau * diameter : vsd_tau; }

    void validate() const {
        for (auto k : kAllMetrics) {
            const auto& g = thresholds(k);
            if (g.empty()) throw InvalidArgument(std::string(metric_name(k)) + " threshold grid is empty");
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (!(g[i] > 0.0)) throw InvalidArgument(std::string(metric_name(k)) + " thresholds must be > 0");
                if (i > 0 && !(g[i] > g[i - 1]))
                    throw InvalidArgument(std::string(metric_name(k)) + " thresholds must be strictly ascending");
            }
        }
        if (vsd_thresholds.back() > 1.0) throw InvalidArgument("VSD thresholds must lie in (0, 1]");
        if (mssd_thresholds.size() != mspd_thresholds.size() || mssd_thresholds.size() != vsd_thresholds.size())
            throw InvalidArgument("all threshold grids must have the same number of rows");
        if (!(vsd_tau > 0.0)) throw InvalidArgument("vsd_tau must be > 0");
        if (!(visibility_delta >= 0.0)) throw InvalidArgument("visibility_delta must be >= 0");
        if (!(map_iou > 0.0 && map_iou <= 1.0)) throw InvalidArgument("map_iou must lie in (0, 1]");
    }
};

/// One ground-truth target's error. Missed targets carry +infinity.
struct TargetError {
    double error = std::numeric_limits<double>::infinity();
    double diameter = 0.0;
    double r = 1.0;  // image_width / 640
};

/// Absolute acceptance bound for threshold `theta` of metric `kind`.
inline double acceptance_bound(MetricKind kind, double theta, const TargetError& t) {
    switch (kind) {
        case MetricKind::MSSD: return theta * t.diameter;
        case MetricKind::MSPD: return theta * t.r;
        case MetricKind::VSD: return theta;
    }
    return 0.0;
}

/// recall[i] = fraction of targets with error < bound(thresholds[i]).
inline std::vector<double> recall_curve(const std::vector<TargetError>& errors, MetricKind kind,
                                        const std::vector<double>& thresholds) {
    if (errors.empty()) throw InvalidArgument("recall_curve: no targets");
    std::vector<double> out;
    for (double th : thresholds) {
        std::size_t ok = 0;
        for (const auto& e : errors)
            if (e.error < acceptance_bound(kind, th, e)) ++ok;
        out.push_back(static_cast<double>(ok) / static_cast<double>(errors.size()));
    }
    return out;
}

inline double mean(const std::vector<double>& v) {
    if (v.empty()) throw InvalidArgument("mean of an empty grid");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct AverageRecall {
    double vsd = 0.0;
    double mssd = 0.0;
    double mspd = 0.0;
    double bop = 0.0;
};

/// AR per metric = mean of its recall grid; AR_BOP = mean of the three.
inline AverageRecall bop19_average_recall(const std::vector<double>& vsd_recall, const std::vector<double>& mssd_recall,
                                          const std::vector<double>& mspd_recall) {
    if (vsd_recall.empty() || mssd_recall.empty() || mspd_recall.empty())
        throw InvalidArgument("average recall needs all three recall grids");
    AverageRecall ar;
    ar.vsd = mean(vsd_recall);
    ar.mssd = mean(mssd_recall);
    ar.mspd = mean(mspd_recall);
    ar.bop = (ar.vsd + ar.mssd + ar.mspd) / 3.0;
    return ar;
}

}  // namespace flatpose::metrics
