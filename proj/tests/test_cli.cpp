#include "fixtures.hpp"

#include "flatpose/cli/commands.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <map>

using namespace flatpose;
using namespace flatpose::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("flatpose_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

// Runs the flatpose binary with `args` (shell syntax) and captures output.
RunResult run_cli(const std::string& args, const fs::path& dir, const std::string& env = "") {
    const auto out = dir / "stdout.txt";
    const auto err = dir / "stderr.txt";
    const std::string cmd = env + " '" + std::string(FLATPOSE_CLI_PATH) + "' " + args + " >'" + out.string() + "' 2>'" +
                            err.string() + "'";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_text_file(out);
    r.err = read_text_file(err);
    return r;
}

// Relative path -> contents for every file under `root`.
std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) {
            const auto bytes = read_file_bytes(e.path());
            files[fs::relative(e.path(), root).string()] = std::string(bytes.begin(), bytes.end());
        }
    return files;
}

const fs::path& models_dir() {
    static const fs::path dir = [] {
        const auto d = scratch("models");
        cmd_convert({flatpose::testing::fixture_path("parts15.xml"), d, {}});
        return d;
    }();
    return dir;
}

}  // namespace

TEST(Convert, FixtureGivesFifteenModels) {
    std::size_t ply = 0;
    for (const auto& e : fs::directory_iterator(models_dir())) ply += e.path().extension() == ".ply";
    EXPECT_EQ(ply, 15u);
    EXPECT_TRUE(fs::exists(models_dir() / "models_info.json"));
    EXPECT_TRUE(fs::exists(models_dir() / "model_edges.json"));
    const auto manifest = nlohmann::json::parse(read_text_file(models_dir() / "manifest.json"));
    EXPECT_EQ(manifest["subcommand"], "convert");
    EXPECT_EQ(manifest["tool_version"], kToolVersion);
    EXPECT_EQ(scenegen::read_models(models_dir()).models.size(), 15u);
}

TEST(Convert, EmptyDocumentWarns) {
    const auto dir = scratch("empty");
    write_text_file(dir / "empty.xml", "<parts/>");
    std::ostringstream log;
    EXPECT_EQ(cmd_convert({dir / "empty.xml", dir / "models", {}}, log), 0u);
    EXPECT_NE(log.str().find("warning"), std::string::npos);
    for (const auto& e : fs::directory_iterator(dir / "models")) EXPECT_NE(e.path().extension(), ".ply");
}

TEST(Convert, CorruptXmlFailsWithLocation) {
    const auto dir = scratch("corrupt");
    write_text_file(dir / "bad.xml", "<parts>\n<part category=\"1\">\n");
    const auto r = run_cli("convert --xml '" + (dir / "bad.xml").string() + "' --out '" + (dir / "m").string() + "'", dir);
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("bad.xml:3"), std::string::npos) << r.err;
}

TEST(Gen, SameSeedIsByteIdentical) {
    const auto dir = scratch("gen");
    GenArgs a;
    a.models = models_dir();
    a.out = dir / "ds";
    a.count = 6;
    a.seed = 42;
    a.threads = 2;
    cmd_gen(a);
    const auto first = snapshot(a.out);
    fs::remove_all(a.out);
    a.threads = 1;
    cmd_gen(a);
    const auto second = snapshot(a.out);
    EXPECT_GT(first.size(), 20u);
    EXPECT_TRUE(first == second);

    fs::remove_all(a.out);
    a.seed = 43;
    cmd_gen(a);
    EXPECT_NE(snapshot(a.out).at("test/000000/scene_gt.json"), first.at("test/000000/scene_gt.json"));
}

TEST(Gen, RejectsBadOptions) {
    GenArgs a;
    a.models = models_dir();
    a.out = scratch("genbad");
    EXPECT_THROW(cmd_gen(a), UsageError);  // count 0
    a.count = 1;
    a.width = 0;
    EXPECT_THROW(cmd_gen(a), UsageError);
    a.width = 640;
    a.models = a.out / "missing";
    EXPECT_THROW(cmd_gen(a), UsageError);
}

TEST(Eval, OracleZeroNoiseThroughFiles) {
    const auto dir = scratch("eval");
    GenArgs g;
    g.models = models_dir();
    g.out = dir / "ds";
    g.count = 4;
    g.seed = 5;
    cmd_gen(g);
    EstimateArgs e;
    e.dataset = g.out;
    e.out = dir / "est.jsonl";
    cmd_estimate(e);
    EXPECT_TRUE(fs::exists(dir / "est.jsonl.manifest.json"));
    EvalArgs v;
    v.dataset = g.out;
    v.estimates = e.out;
    v.out = dir / "report";
    const auto rep = cmd_eval(v);
    EXPECT_EQ(rep.ar.bop, 1.0);
    const auto table = read_text_file(dir / "report" / "report.txt");
    std::size_t prev = 0;
    for (int thr = 50; thr >= 5; thr -= 5) {
        char label[16];
        std::snprintf(label, sizeof label, "THR=%02d", thr);
        const auto at = table.find(label);
        ASSERT_NE(at, std::string::npos) << label;
        EXPECT_GT(at, prev);
        prev = at;
    }
    const auto j = nlohmann::json::parse(read_text_file(dir / "report" / "report.json"));
    EXPECT_EQ(j["average_recall"]["BOP19"], 1.0);

    // missing estimates file is a usage error, exit code 2
    const auto r = run_cli("eval --dataset '" + g.out.string() + "' --estimates '" + (dir / "nope.jsonl").string() +
                               "' --out '" + (dir / "r2").string() + "'",
                           dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("nope.jsonl"), std::string::npos);
}

TEST(Serve, LogsBoundAddressAndRejectsBadEstimator) {
    const auto dir = scratch("serve");
    auto r = run_cli("serve --bind 127.0.0.1:0 --estimator null --run-for-ms 100", dir);
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("listening on ws://127.0.0.1:"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("max_fps 5"), std::string::npos);

    r = run_cli("serve --bind 127.0.0.1:0 --estimator magic", dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("valid names: contour, null"), std::string::npos) << r.err;

    r = run_cli("serve --bind nowhere --estimator null", dir);
    EXPECT_EQ(r.code, 2);
    r = run_cli("serve --estimator contour --bind 127.0.0.1:0", dir);
    EXPECT_EQ(r.code, 2);  // contour needs models
}

TEST(Serve, ConfigFromEnvironmentAndFile) {
    const auto dir = scratch("env");
    auto r = run_cli("serve --bind 127.0.0.1:0 --run-for-ms 50", dir, "FLATPOSE_ESTIMATOR=null FLATPOSE_MAX_FPS=2");
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("max_fps 2"), std::string::npos) << r.err;

    write_text_file(dir / "cfg.ini", "[serve]\nestimator = null\nmax-fps = 3\nbind = 127.0.0.1:0\nrun-for-ms = 50\n");
    r = run_cli("--config '" + (dir / "cfg.ini").string() + "' serve", dir, "FLATPOSE_MAX_FPS=9");
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("max_fps 3"), std::string::npos) << r.err;  // file beats environment

    r = run_cli("--config '" + (dir / "cfg.ini").string() + "' serve --max-fps 4", dir);
    EXPECT_NE(r.err.find("max_fps 4"), std::string::npos) << r.err;  // flag beats file
}

TEST(Cli, UsageErrorsExitTwo) {
    const auto dir = scratch("usage");
    EXPECT_EQ(run_cli("", dir).code, 2);
    EXPECT_EQ(run_cli("gen --models x", dir).code, 2);
    EXPECT_EQ(run_cli("gen --models '" + models_dir().string() + "' --out '" + (dir / "d").string() + "' --count 0", dir).code, 2);
    EXPECT_EQ(run_cli("--help", dir).code, 0);
}

TEST(Cli, PlaneParsing) {
    const Pose p = parse_plane("1,0,0,0,-1,0,0,0,-1,0,0,800");
    EXPECT_EQ(p.R(1, 1), -1.0);
    EXPECT_EQ(p.t.z(), 800.0);
    EXPECT_THROW(parse_plane("1,0,0"), UsageError);
    EXPECT_THROW(parse_plane("1,0,0,0,1,0,0,0,2,0,0,0"), UsageError);
    EXPECT_THROW(parse_plane("a,0,0,0,1,0,0,0,1,0,0,0"), UsageError);
}
