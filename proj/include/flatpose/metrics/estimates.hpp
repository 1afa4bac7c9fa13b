#pragma once

// Pose estimates exchanged as JSON lines:
//   {"scene_id":0,"image_id":0,"category_id":3,"score":0.9,
//    "R":[9 floats, row-major],"t":[3 floats, mm],"bbox":[x,y,w,h]}
// scene_id defaults to 0 and bbox is optional.

#include "flatpose/core/error.hpp"
#include "flatpose/core/types.hpp"
#include "flatpose/metrics/detection.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace flatpose::metrics {

struct PoseEstimate {
    int scene_id = 0;
    int image_id = 0;
    int category_id = 0;
    double score = 1.0;
    Pose pose;
    std::optional<Box> bbox;
};

inline nlohmann::json estimate_to_json(const PoseEstimate& e) {
    nlohmann::json j;
    j["scene_id"] = e.scene_id;
    j["image_id"] = e.image_id;
    j["category_id"] = e.category_id;
    j["score"] = e.score;
    auto r = nlohmann::json::array();
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) r.push_back(e.pose.R(i, k));
    j["R"] = r;
    j["t"] = {e.pose.t.x(), e.pose.t.y(), e.pose.t.z()};
    if (e.bbox) j["bbox"] = {(*e.bbox)[0], (*e.bbox)[1], (*e.bbox)[2], (*e.bbox)[3]};
    return j;
}

inline PoseEstimate estimate_from_json(const nlohmann::json& j) {
    PoseEstimate e;
    e.scene_id = j.value("scene_id", 0);
    e.image_id = j.at("image_id").get<int>();
    e.category_id = j.at("category_id").get<int>();
    e.score = j.at("score").get<double>();
    const auto& r = j.at("R");
    const auto& t = j.at("t");
    if (!r.is_array() || r.size() != 9) throw SchemaError("estimate field R must hold 9 numbers");
    if (!t.is_array() || t.size() != 3) throw SchemaError("estimate field t must hold 3 numbers");
    for (int i = 0; i < 9; ++i) e.pose.R(i / 3, i % 3) = r[static_cast<std::size_t>(i)].get<double>();
    for (int i = 0; i < 3; ++i) e.pose.t[i] = t[static_cast<std::size_t>(i)].get<double>();
    if (j.contains("bbox") && !j["bbox"].is_null()) {
        const auto& b = j["bbox"];
        if (!b.is_array() || b.size() != 4) throw SchemaError("estimate field bbox must hold 4 numbers");
        e.bbox = Box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    }
    return e;
}

inline std::string estimates_to_jsonl(const std::vector<PoseEstimate>& es) {
    std::string out;
    for (const auto& e : es) out += estimate_to_json(e).dump() + "\n";
    return out;
}

/// Parses JSON lines; blank lines are skipped. Errors carry the byte offset
/// in the whole text.
inline std::vector<PoseEstimate> parse_estimates_jsonl(std::string_view text) {
    std::vector<PoseEstimate> out;
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        const std::string_view line = text.substr(pos, end - pos);
        if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
            try {
                out.push_back(estimate_from_json(nlohmann::json::parse(line)));
            } catch (const nlohmann::json::parse_error& e) {
                throw ParseError("estimates line " + std::to_string(line_no) + ": " + e.what(), pos + (e.byte > 0 ? e.byte - 1 : 0));
            } catch (const nlohmann::json::exception& e) {
                throw SchemaError("estimates line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        pos = end + 1;
    }
    return out;
}

}  // namespace flatpose::metrics
