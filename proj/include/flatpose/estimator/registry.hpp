#pragma once

// Estimator selection by name plus a string parameter map.

#include "flatpose/core/error.hpp"
#include "flatpose/estimator/contour.hpp"
#include "flatpose/estimator/types.hpp"
#include "flatpose/scenegen/models.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace flatpose::estimator {

/// Reports nothing, instantly. Useful for exercising the transport.
class NullEstimator : public Estimator {
public:
    std::string name() const override { return "null"; }

    EstimatorOutput estimate(const EstimatorInput& input) const override {
        input.validate();
        EstimatorOutput out;
        out.frame_id = input.frame_id;
        return out;
    }
};

using EstimatorParams = std::map<std::string, std::string>;

inline std::vector<std::string> estimator_names() { return {"contour", "null"}; }

namespace detail {

inline double param_number(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != value.size()) throw InvalidArgument("estimator parameter " + key + " is not a number: " + value);
    return v;
}

inline int param_int(const std::string& key, const std::string& value) {
    const double v = param_number(key, value);
    if (v != static_cast<double>(static_cast<int>(v))) throw InvalidArgument("estimator parameter " + key + " must be an integer");
    return static_cast<int>(v);
}

inline ContourParams contour_params(const EstimatorParams& p) {
    ContourParams c;
    for (const auto& [k, v] : p) {
        if (k == "min_component_px") c.min_component_px = param_int(k, v);
        else if (k == "angle_step_deg") c.angle_step_deg = param_number(k, v);
        else if (k == "icp_iterations") c.icp_iterations = param_int(k, v);
        else if (k == "foreground_threshold") c.foreground_threshold = param_int(k, v);
        else if (k == "field_resolution_mm") c.field_resolution_mm = param_number(k, v);
        else if (k == "model_spacing_mm") c.model_spacing_mm = param_number(k, v);
        else if (k == "threads") c.threads = static_cast<unsigned>(std::max(0, param_int(k, v)));
        else if (k == "search_points") c.search_points = static_cast<std::size_t>(std::max(0, param_int(k, v)));
        else throw InvalidArgument("unknown contour estimator parameter: " + k);
    }
    c.validate();
    return c;
}

}  // namespace detail

inline std::string joined_estimator_names() {
    std::string s;
    for (const auto& n : estimator_names()) s += (s.empty() ? "" : ", ") + n;
    return s;
}

/// Builds the named estimator; unknown names list the valid ones.
inline std::unique_ptr<Estimator> make_estimator(const std::string& name, const EstimatorParams& params,
                                                 const scenegen::ModelLibrary& library) {
    if (name == "contour") return std::make_unique<ContourEstimator>(library, detail::contour_params(params));
    if (name == "null") {
        if (!params.empty()) throw InvalidArgument("the null estimator takes no parameters");
        return std::make_unique<NullEstimator>();
    }
    throw InvalidArgument("unknown estimator '" + name + "'; valid names: " + joined_estimator_names());
}

}  // namespace flatpose::estimator
