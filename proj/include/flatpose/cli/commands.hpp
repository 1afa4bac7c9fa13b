#pragma once

// Subcommand implementations behind the flatpose binary. Each command
// validates its options up front (bad values raise UsageError), writes its
// outputs under a caller-chosen path and records a manifest next to them.

#include "flatpose/core/error.hpp"
#include "flatpose/core/image.hpp"
#include "flatpose/docparse/document.hpp"
#include "flatpose/estimator/oracle.hpp"
#include "flatpose/estimator/registry.hpp"
#include "flatpose/metrics/estimates.hpp"
#include "flatpose/metrics/evaluate.hpp"
#include "flatpose/scenegen/bop.hpp"
#include "flatpose/scenegen/models.hpp"
#include "flatpose/scenegen/scene.hpp"
#include "flatpose/server/ws_server.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace flatpose::cli {

inline constexpr const char* kToolVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Bad flags, bad config values or missing inputs. Maps to exit code 2.
class UsageError : public Error {
public:
    using Error::Error;
};

namespace fs = std::filesystem;

/// Provenance record written beside every output. Holds no timestamps, so
/// identical runs produce identical manifests.
struct RunManifest {
    std::string subcommand;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::optional<std::uint64_t> seed;
    nlohmann::json config = nlohmann::json::object();

    nlohmann::json to_json() const {
        nlohmann::json j{{"subcommand", subcommand},
                         {"inputs", inputs},
                         {"outputs", outputs},
                         {"config", config},
                         {"tool_version", kToolVersion}};
        j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
        return j;
    }

    void write(const fs::path& path) const { write_text_file(path, to_json().dump(1) + "\n"); }
};

namespace detail {

// Runs a validator, turning InvalidArgument into UsageError.
template <typename Fn>
void check_usage(Fn&& fn) {
    try {
        fn();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
}

inline void require_file(const fs::path& p, const std::string& what) {
    if (!fs::is_regular_file(p)) throw UsageError(what + " not found: " + p.string());
}

inline void require_dir(const fs::path& p, const std::string& what) {
    if (!fs::is_directory(p)) throw UsageError(what + " not found: " + p.string());
}

inline scenegen::ModelLibrary load_library(const fs::path& dir) {
    require_dir(dir, "models directory");
    return scenegen::read_models(dir);
}

inline std::vector<scenegen::Scene> load_dataset(const fs::path& root, const scenegen::ModelLibrary& lib) {
    require_dir(root / "test", "dataset split");
    auto scenes = scenegen::read_bop_dataset(root, "test", true);
    scenegen::link_models(scenes, lib.meshes());
    return scenes;
}

/// "k=v" pairs into an estimator parameter map.
inline estimator::EstimatorParams parse_params(const std::vector<std::string>& kvs) {
    estimator::EstimatorParams p;
    for (const auto& kv : kvs) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError("estimator parameter must look like key=value, got '" + kv + "'");
        p[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return p;
}

/// 1-based line number of a byte offset.
inline std::size_t line_of(std::string_view text, std::size_t offset) {
    const auto end = text.begin() + static_cast<std::ptrdiff_t>(std::min(offset, text.size()));
    return 1 + static_cast<std::size_t>(std::count(text.begin(), end, '\n'));
}

}  // namespace detail

/// Twelve comma-separated numbers: R row-major, then t in mm.
inline Pose parse_plane(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        try {
            v.push_back(std::stod(item, &used));
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0) throw UsageError("plane pose has a non-numeric entry: '" + item + "'");
    }
    if (v.size() != 12) throw UsageError("plane pose needs 12 numbers (R row-major, then t), got " + std::to_string(v.size()));
    Pose p;
    for (int i = 0; i < 9; ++i) p.R(i / 3, i % 3) = v[static_cast<std::size_t>(i)];
    p.t = Vec3(v[9], v[10], v[11]);
    if (!p.is_valid(1e-6)) throw UsageError("plane rotation is not orthonormal with determinant +1");
    return p;
}

// ---------------------------------------------------------------- convert

struct ConvertArgs {
    fs::path xml;
    fs::path out;
    scenegen::ConvertOptions options;
};

/// Returns the number of models written.
inline std::size_t cmd_convert(const ConvertArgs& a, std::ostream& log = std::cerr) {
    detail::require_file(a.xml, "manufacturing document");
    if (!(a.options.thickness > 0.0)) throw UsageError("thickness must be > 0");
    if (!(a.options.flattening_tolerance > 0.0)) throw UsageError("flattening tolerance must be > 0");
    const std::string text = read_text_file(a.xml);
    docparse::ManufacturingDoc doc;
    try {
        doc = docparse::parse_document(text);
    } catch (const ParseError& e) {
        throw ParseError(a.xml.string() + ":" + std::to_string(detail::line_of(text, e.offset())) + ": " + e.what(), e.offset());
    } catch (const Error& e) {
        throw SchemaError(a.xml.string() + ": " + e.what());
    }
    if (doc.parts.empty()) log << "flatpose: warning: " << a.xml.string() << " contains no parts\n";
    const auto lib = scenegen::build_model_library(doc, a.options);
    scenegen::write_models(lib, a.out);
    RunManifest m;
    m.subcommand = "convert";
    m.inputs = {a.xml.string()};
    m.outputs = {a.out.string()};
    m.config = {{"thickness", a.options.thickness},
                {"flattening_tolerance", a.options.flattening_tolerance},
                {"symmetry_step_deg", a.options.symmetry_step_deg},
                {"symmetry_tolerance", a.options.symmetry_tolerance}};
    m.write(a.out / "manifest.json");
    return lib.models.size();
}

// ---------------------------------------------------------------- gen

struct GenArgs {
    fs::path models;
    fs::path out;
    std::size_t count = 0;
    std::uint64_t seed = 0;
    std::size_t parts_per_scene = 3;
    int width = 640;
    int height = 480;
    double focal = 600.0;
    unsigned threads = 0;
};

/// Writes a BOP-layout dataset plus a copy of the models under `out`.
inline std::size_t cmd_gen(const GenArgs& a) {
    if (a.count == 0) throw UsageError("count must be >= 1");
    scenegen::ComposeOptions opts;
    opts.count = a.parts_per_scene;
    opts.camera.intrinsics.width = a.width;
    opts.camera.intrinsics.height = a.height;
    opts.camera.intrinsics.fx = opts.camera.intrinsics.fy = a.focal;
    opts.camera.intrinsics.cx = 0.5 * a.width;
    opts.camera.intrinsics.cy = 0.5 * a.height;
    detail::check_usage([&] { opts.camera.validate(); });
    if (a.parts_per_scene == 0) throw UsageError("parts-per-scene must be >= 1");
    const auto lib = detail::load_library(a.models);
    if (lib.models.empty()) throw UsageError("models directory holds no models: " + a.models.string());
    const auto scenes = scenegen::generate_scenes(lib.meshes(), opts, a.count, a.seed, a.threads);
    scenegen::write_bop_dataset(scenes, a.out);
    scenegen::write_models(lib, a.out / "models");
    RunManifest m;
    m.subcommand = "gen";
    m.inputs = {a.models.string()};
    m.outputs = {a.out.string()};
    m.seed = a.seed;
    m.config = {{"count", a.count},
                {"parts_per_scene", a.parts_per_scene},
                {"width", a.width},
                {"height", a.height},
                {"focal", a.focal}};
    m.write(a.out / "manifest.json");
    return scenes.size();
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
    fs::path dataset;
    fs::path models;  // empty: <dataset>/models
    fs::path out;     // JSON lines
    std::string estimator = "oracle";
    std::vector<std::string> params;
    estimator::OracleNoise noise;
    std::uint64_t seed = 0;
};

/// Runs an estimator over every image of a dataset. "oracle" perturbs the
/// ground truth; any registered estimator sees only the rendered labels.
inline std::size_t cmd_estimate(const EstimateArgs& a) {
    detail::check_usage([&] { a.noise.validate(); });
    const auto params = detail::parse_params(a.params);
    const fs::path models = a.models.empty() ? a.dataset / "models" : a.models;
    const auto lib = detail::load_library(models);
    std::unique_ptr<estimator::Estimator> est;
    if (a.estimator == "oracle") {
        if (!params.empty()) throw UsageError("the oracle estimator takes noise flags, not parameters");
    } else {
        try {
            est = estimator::make_estimator(a.estimator, params, lib);
        } catch (const InvalidArgument& e) {
            throw UsageError(std::string(e.what()) + " (or 'oracle')");
        }
    }
    const auto scenes = detail::load_dataset(a.dataset, lib);
    std::vector<metrics::PoseEstimate> all;
    for (const auto& s : scenes) {
        const auto out = est ? est->estimate(estimator::input_from_scene(s)) : estimator::oracle_estimate(s, a.noise, a.seed);
        const auto es = estimator::to_estimates(out, s.scene_id, s.image_id);
        all.insert(all.end(), es.begin(), es.end());
    }
    if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
    write_text_file(a.out, metrics::estimates_to_jsonl(all));
    RunManifest m;
    m.subcommand = "estimate";
    m.inputs = {a.dataset.string(), models.string()};
    m.outputs = {a.out.string()};
    m.seed = a.seed;
    m.config = {{"estimator", a.estimator}, {"params", params}};
    if (a.estimator == "oracle")
        m.config["noise"] = {{"rot_deg", a.noise.rot_deg}, {"trans_mm", a.noise.trans_mm}, {"drop", a.noise.drop}};
    m.write(fs::path(a.out.string() + ".manifest.json"));
    return all.size();
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    fs::path dataset;
    fs::path estimates;
    fs::path models;  // empty: <dataset>/models
    fs::path out;
    metrics::EvalConfig config;
    unsigned threads = 0;
};

/// Writes report.json and report.txt under `out`; returns the report.
inline metrics::EvalReport cmd_eval(const EvalArgs& a) {
    detail::require_file(a.estimates, "estimates file");
    detail::check_usage([&] { a.config.validate(); });
    const fs::path models = a.models.empty() ? a.dataset / "models" : a.models;
    const auto lib = detail::load_library(models);
    const auto scenes = detail::load_dataset(a.dataset, lib);
    const auto estimates = metrics::parse_estimates_jsonl(read_text_file(a.estimates));
    const auto rep = metrics::evaluate(scenes, lib, estimates, a.config, a.threads);
    fs::create_directories(a.out);
    write_text_file(a.out / "report.json", metrics::report_to_json(rep).dump(1) + "\n");
    write_text_file(a.out / "report.txt", metrics::report_table(rep));
    RunManifest m;
    m.subcommand = "eval";
    m.inputs = {a.dataset.string(), a.estimates.string(), models.string()};
    m.outputs = {a.out.string()};
    m.config = {{"vsd_tau", a.config.vsd_tau},
                {"vsd_tau_relative", a.config.vsd_tau_relative},
                {"visibility_delta", a.config.visibility_delta},
                {"map_iou", a.config.map_iou}};
    m.write(a.out / "manifest.json");
    return rep;
}

// ---------------------------------------------------------------- serve

struct ServeArgs {
    std::string bind = "127.0.0.1:8765";
    double max_fps = server::kDefaultMaxFps;
    std::string estimator = "contour";
    std::vector<std::string> params;
    fs::path models_dir;
    std::string plane;  // empty: frames must carry one
    unsigned workers = 0;
};

/// Validates everything that can fail before binding.
inline server::ServerConfig serve_config(const ServeArgs& a) {
    server::ServerConfig cfg;
    cfg.bind = a.bind;
    cfg.session.max_fps = a.max_fps;
    if (!a.plane.empty()) cfg.session.plane = parse_plane(a.plane);
    cfg.models_dir = a.models_dir;
    cfg.worker_threads = a.workers;
    detail::check_usage([&] {
        server::parse_bind(cfg.bind);
        cfg.validate();
    });
    return cfg;
}

inline std::shared_ptr<const estimator::Estimator> serve_estimator(const ServeArgs& a) {
    const auto params = detail::parse_params(a.params);
    const auto names = estimator::estimator_names();
    if (std::find(names.begin(), names.end(), a.estimator) == names.end())
        throw UsageError("unknown estimator '" + a.estimator + "'; valid names: " + estimator::joined_estimator_names());
    scenegen::ModelLibrary lib;
    if (a.estimator != "null") {
        if (a.models_dir.empty()) throw UsageError("estimator '" + a.estimator + "' needs --models-dir");
        lib = detail::load_library(a.models_dir);
    }
    try {
        return estimator::make_estimator(a.estimator, params, lib);
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
}

/// Starts the service, logs the bound address and blocks in `wait` until
/// it returns; then shuts down.
inline void cmd_serve(const ServeArgs& a, const std::function<void()>& wait, std::ostream& log = std::cerr) {
    const auto cfg = serve_config(a);
    server::Server srv(cfg, serve_estimator(a));
    srv.start();
    const auto ep = srv.endpoint();
    log << "flatpose: listening on ws://" << ep.address().to_string() << ":" << ep.port() << " (estimator " << a.estimator
        << ", max_fps " << a.max_fps << ")";
    if (!a.models_dir.empty()) log << ", models at http://" << ep.address().to_string() << ":" << ep.port() << "/models/";
    log << std::endl;
    wait();
    srv.stop();
    log << "flatpose: stopped" << std::endl;
}

}  // namespace flatpose::cli
