// flatpose: convert documents to models, generate datasets, run estimators,
// evaluate results and serve poses.
//
// Every flag can also come from a FLATPOSE_<FLAG> environment variable or
// from an INI file passed with --config, e.g.
//
//   [gen]
//   count = 50
//   seed = 7
//
// Precedence: command line, then config file, then environment.

#include "flatpose/cli/commands.hpp"

#include <CLI11.hpp>
#include <boost/asio.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <iostream>

using namespace flatpose;
using namespace flatpose::cli;

namespace {

std::string env_name(const std::string& flag) {
    std::string s = "FLATPOSE_";
    for (char c : flag) s += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

// Adds --name with a FLATPOSE_NAME environment fallback.
template <typename T>
CLI::Option* opt(CLI::App* app, const std::string& name, T& target, const std::string& help) {
    return app->add_option("--" + name, target, help)->envname(env_name(name));
}

void wait_for_signal(int run_for_ms) {
    boost::asio::io_context ioc;
    boost::asio::signal_set signals(ioc, SIGINT, SIGTERM);
    boost::asio::steady_timer timer(ioc);
    signals.async_wait([&](const boost::system::error_code&, int) { ioc.stop(); });
    if (run_for_ms > 0) {
        timer.expires_after(std::chrono::milliseconds(run_for_ms));
        timer.async_wait([&](const boost::system::error_code&) { ioc.stop(); });
    }
    ioc.run();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flatpose: sheet-metal part models, synthetic pose datasets, evaluation and pose serving"};
    app.set_version_flag("--version", kToolVersion);
    app.set_config("--config", "", "INI file with one [subcommand] section per command");
    app.require_subcommand(1);

    ConvertArgs conv;
    std::string conv_xml, conv_out;
    auto* c = app.add_subcommand("convert", "Manufacturing XML to PLY models with symmetry sidecars");
    opt(c, "xml", conv_xml, "manufacturing document")->required();
    opt(c, "out", conv_out, "output models directory")->required();
    opt(c, "thickness", conv.options.thickness, "sheet thickness in mm")->capture_default_str();
    opt(c, "tolerance", conv.options.flattening_tolerance, "curve flattening tolerance in mm")->capture_default_str();

    GenArgs gen;
    std::string gen_models, gen_out;
    auto* g = app.add_subcommand("gen", "Render a synthetic BOP-layout dataset");
    opt(g, "models", gen_models, "models directory written by convert")->required();
    opt(g, "out", gen_out, "output dataset directory")->required();
    opt(g, "count", gen.count, "number of scenes")->required();
    opt(g, "seed", gen.seed, "master seed")->capture_default_str();
    opt(g, "parts-per-scene", gen.parts_per_scene, "parts placed in each scene")->capture_default_str();
    opt(g, "width", gen.width, "image width in px")->capture_default_str();
    opt(g, "height", gen.height, "image height in px")->capture_default_str();
    opt(g, "focal", gen.focal, "focal length in px")->capture_default_str();
    opt(g, "threads", gen.threads, "worker threads, 0 = all cores")->capture_default_str();

    EstimateArgs est;
    std::string est_dataset, est_models, est_out;
    auto* e = app.add_subcommand("estimate", "Run an estimator over a dataset and write JSON-lines estimates");
    opt(e, "dataset", est_dataset, "dataset directory")->required();
    opt(e, "models", est_models, "models directory (default <dataset>/models)");
    opt(e, "out", est_out, "estimates file")->required();
    opt(e, "estimator", est.estimator, "oracle, " + estimator::joined_estimator_names())->capture_default_str();
    opt(e, "param", est.params, "estimator parameter key=value (repeatable)");
    opt(e, "seed", est.seed, "oracle noise seed")->capture_default_str();
    opt(e, "noise-rot", est.noise.rot_deg, "oracle rotation noise sigma in degrees")->capture_default_str();
    opt(e, "noise-trans", est.noise.trans_mm, "oracle translation noise sigma in mm")->capture_default_str();
    opt(e, "drop", est.noise.drop, "oracle miss probability")->capture_default_str();

    EvalArgs ev;
    std::string ev_dataset, ev_estimates, ev_models, ev_out;
    auto* v = app.add_subcommand("eval", "Score estimates against a dataset");
    opt(v, "dataset", ev_dataset, "dataset directory")->required();
    opt(v, "estimates", ev_estimates, "JSON-lines estimates file")->required();
    opt(v, "models", ev_models, "models directory (default <dataset>/models)");
    opt(v, "out", ev_out, "report directory")->required();
    opt(v, "vsd-tau", ev.config.vsd_tau, "VSD tolerance as a fraction of the diameter")->capture_default_str();
    opt(v, "map-iou", ev.config.map_iou, "IoU for detection AP")->capture_default_str();
    opt(v, "threads", ev.threads, "worker threads, 0 = all cores")->capture_default_str();

    ServeArgs sv;
    std::string sv_models;
    int run_for_ms = 0;
    auto* s = app.add_subcommand("serve", "Serve poses over WebSocket");
    opt(s, "bind", sv.bind, "host:port")->capture_default_str();
    opt(s, "max-fps", sv.max_fps, "result rate limit per client")->capture_default_str();
    opt(s, "estimator", sv.estimator, estimator::joined_estimator_names())->capture_default_str();
    opt(s, "param", sv.params, "estimator parameter key=value (repeatable)");
    opt(s, "models-dir", sv_models, "models directory, also served at /models/");
    opt(s, "plane", sv.plane, "default ground plane to camera: 12 comma-separated numbers, R row-major then t mm");
    opt(s, "workers", sv.workers, "estimator threads, 0 = all cores")->capture_default_str();
    opt(s, "run-for-ms", run_for_ms, "stop after this long, 0 = until SIGINT/SIGTERM")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*c) {
            conv.xml = conv_xml;
            conv.out = conv_out;
            const auto n = cmd_convert(conv);
            std::cout << "wrote " << n << " models to " << conv.out.string() << "\n";
        } else if (*g) {
            gen.models = gen_models;
            gen.out = gen_out;
            const auto n = cmd_gen(gen);
            std::cout << "wrote " << n << " scenes to " << gen.out.string() << "\n";
        } else if (*e) {
            est.dataset = est_dataset;
            est.models = est_models;
            est.out = est_out;
            const auto n = cmd_estimate(est);
            std::cout << "wrote " << n << " estimates to " << est.out.string() << "\n";
        } else if (*v) {
            ev.dataset = ev_dataset;
            ev.estimates = ev_estimates;
            ev.models = ev_models;
            ev.out = ev_out;
            std::cout << metrics::report_table(cmd_eval(ev));
        } else if (*s) {
            sv.models_dir = sv_models;
            cmd_serve(sv, [&] { wait_for_signal(run_for_ms); });
        }
    } catch (const UsageError& err) {
        std::cerr << "flatpose: " << err.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& err) {
        std::cerr << "flatpose: error: " << err.what() << "\n";
        return kExitFailure;
    }
    return kExitOk;
}
