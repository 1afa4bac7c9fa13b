#pragma once

// BOP-style dataset layout:
//   <root>/<split>/<scene_id:06>/scene_gt.json
//                               /scene_gt_info.json
//                               /scene_camera.json
//                               /depth/<image_id:06>.png          16-bit, 0.1 mm
//                               /mask_visib/<image_id>_<inst>.png  8-bit

#include "flatpose/core/error.hpp"
#include "flatpose/core/image.hpp"
#include "flatpose/core/types.hpp"
#include "flatpose/raster/camera.hpp"
#include "flatpose/raster/render.hpp"
#include "flatpose/scenegen/scene.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace flatpose::scenegen {

inline std::string pad6(int v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06d", v);
    return buf;
}

inline nlohmann::json mat_to_json(const Mat3& r) {
    auto a = nlohmann::json::array();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) a.push_back(r(i, j));
    return a;
}

inline nlohmann::json vec_to_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

inline Mat3 mat_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 9) throw SchemaError("rotation must be an array of 9 numbers");
    Mat3 r;
    for (int i = 0; i < 9; ++i) r(i / 3, i % 3) = j.at(static_cast<std::size_t>(i)).get<double>();
    return r;
}

inline Vec3 vec_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3) throw SchemaError("translation must be an array of 3 numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline nlohmann::json bbox_json(const std::optional<std::array<int, 4>>& b) {
    if (!b) return {-1, -1, -1, -1};
    return {(*b)[0], (*b)[1], (*b)[2], (*b)[3]};
}

inline std::optional<std::array<int, 4>> bbox_from_json(const nlohmann::json& j) {
    std::array<int, 4> b{j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(), j.at(3).get<int>()};
    if (b[2] < 0) return std::nullopt;
    return b;
}

inline std::filesystem::path scene_dir(const std::filesystem::path& root, int scene_id, const std::string& split = "test") {
    return root / split / pad6(scene_id);
}

/// Writes scenes grouped by scene_id. Images of one scene share a folder.
inline void write_bop_dataset(const std::vector<Scene>& scenes, const std::filesystem::path& root,
                              const std::string& split = "test") {
    if (scenes.empty()) throw InvalidArgument("no scenes to write");
    std::map<int, std::vector<const Scene*>> by_scene;
    for (const auto& s : scenes) by_scene[s.scene_id].push_back(&s);
    for (const auto& [sid, images] : by_scene) {
        const auto dir = scene_dir(root, sid, split);
        std::filesystem::create_directories(dir / "depth");
        std::filesystem::create_directories(dir / "mask_visib");
        nlohmann::json gt = nlohmann::json::object(), info = nlohmann::json::object(), camera = nlohmann::json::object();
        for (const Scene* s : images) {
            const std::string key = std::to_string(s->image_id);
            auto g = nlohmann::json::array(), gi = nlohmann::json::array();
            for (std::size_t k = 0; k < s->instances.size(); ++k) {
                const auto& inst = s->instances[k];
                g.push_back({{"cam_R_m2c", mat_to_json(inst.cam_pose.R)},
                             {"cam_t_m2c", vec_to_json(inst.cam_pose.t)},
                             {"obj_id", inst.category_id}});
                gi.push_back({{"bbox_obj", bbox_json(inst.bbox_obj)},
                              {"bbox_visib", bbox_json(inst.bbox_visib)},
                              {"px_count_all", inst.px_count_all},
                              {"px_count_visib", inst.px_count_visib},
                              {"visib_fract", inst.visible_fraction}});
                write_png(dir / "mask_visib" / (pad6(s->image_id) + "_" + pad6(static_cast<int>(k)) + ".png"),
                          inst.mask_visib);
            }
            gt[key] = std::move(g);
            info[key] = std::move(gi);
            camera[key] = {{"cam_K", raster::k_to_json(s->cam)},
                           {"depth_scale", raster::kDepthPngScale},
                           {"width", s->cam.width},
                           {"height", s->cam.height},
                           {"cam_R_w2c", mat_to_json(s->world_to_cam.R)},
                           {"cam_t_w2c", vec_to_json(s->world_to_cam.t)}};
            write_png(dir / "depth" / (pad6(s->image_id) + ".png"), raster::depth_to_u16(s->depth));
        }
        write_text_file(dir / "scene_gt.json", gt.dump(1) + "\n");
        write_text_file(dir / "scene_gt_info.json", info.dump(1) + "\n");
        write_text_file(dir / "scene_camera.json", camera.dump(1) + "\n");
    }
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), e.byte);
    }
}

/// Reads every scene of `split`, ordered by (scene_id, image_id). Instance
/// model_index is left at 0; callers map category ids to their library.
inline std::vector<Scene> read_bop_dataset(const std::filesystem::path& root, const std::string& split = "test",
                                           bool load_images = true) {
    const auto split_dir = root / split;
    if (!std::filesystem::is_directory(split_dir)) throw IoError("no dataset split at " + split_dir.string());
    std::vector<std::filesystem::path> dirs;
    for (const auto& e : std::filesystem::directory_iterator(split_dir))
        if (e.is_directory()) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    std::vector<Scene> out;
    for (const auto& dir : dirs) {
        const int sid = std::stoi(dir.filename().string());
        const auto gt = read_json_file(dir / "scene_gt.json");
        const auto info = read_json_file(dir / "scene_gt_info.json");
        const auto camera = read_json_file(dir / "scene_camera.json");
        std::vector<int> image_ids;
        for (const auto& [key, v] : gt.items()) image_ids.push_back(std::stoi(key));
        std::sort(image_ids.begin(), image_ids.end());
        for (int iid : image_ids) {
            const std::string key = std::to_string(iid);
            Scene s;
            s.scene_id = sid;
            s.image_id = iid;
            const auto& c = camera.at(key);
            s.cam = raster::intrinsics_from_K(mat_from_json(c.at("cam_K")), c.at("width").get<int>(),
                                              c.at("height").get<int>());
            s.world_to_cam.R = mat_from_json(c.at("cam_R_w2c"));
            s.world_to_cam.t = vec_from_json(c.at("cam_t_w2c"));
            const double scale = c.value("depth_scale", raster::kDepthPngScale);
            const auto& g = gt.at(key);
            const auto& gi = info.at(key);
            if (g.size() != gi.size()) throw SchemaError(dir.string() + ": scene_gt and scene_gt_info disagree");
            for (std::size_t k = 0; k < g.size(); ++k) {
                SceneInstance inst;
                inst.category_id = g[k].at("obj_id").get<int>();
                inst.cam_pose.R = mat_from_json(g[k].at("cam_R_m2c"));
                inst.cam_pose.t = vec_from_json(g[k].at("cam_t_m2c"));
                inst.world_pose = s.world_to_cam.inverse() * inst.cam_pose;
                inst.bbox_obj = bbox_from_json(gi[k].at("bbox_obj"));
                inst.bbox_visib = bbox_from_json(gi[k].at("bbox_visib"));
                inst.px_count_all = gi[k].at("px_count_all").get<std::size_t>();
                inst.px_count_visib = gi[k].at("px_count_visib").get<std::size_t>();
                inst.visible_fraction = gi[k].at("visib_fract").get<double>();
                if (load_images) {
                    const auto m = read_png(dir / "mask_visib" / (pad6(iid) + "_" + pad6(static_cast<int>(k)) + ".png"));
                    if (m.bit_depth != 8) throw SchemaError("mask images must be 8-bit");
                    inst.mask_visib = m.gray8;
                }
                s.instances.push_back(std::move(inst));
            }
            if (load_images) {
                const auto d = read_png(dir / "depth" / (pad6(iid) + ".png"));
                if (d.bit_depth != 16) throw SchemaError("depth images must be 16-bit");
                s.depth = raster::depth_from_u16(d.gray16, scale);
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

/// Re-links instances to library entries by category id.
inline void link_models(std::vector<Scene>& scenes, const std::vector<geometry::TriMesh>& library) {
    for (auto& s : scenes)
        for (auto& inst : s.instances) {
            auto it = std::find_if(library.begin(), library.end(),
                                   [&](const geometry::TriMesh& m) { return m.category_id == inst.category_id; });
            if (it == library.end())
                throw SchemaError("scene " + std::to_string(s.scene_id) + " references unknown object " +
                                  std::to_string(inst.category_id));
            inst.model_index = static_cast<std::size_t>(it - library.begin());
        }
}

}  // namespace flatpose::scenegen
