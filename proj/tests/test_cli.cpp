// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#include "artikin/cli.hpp"
#include "artikin/error.hpp"
#include "artikin/scene_io.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace artikin {
namespace {

namespace fs = std::filesystem;

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

CliResult run(std::vector<std::string> args)
{
    args.insert(args.begin(), "artikin");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out, err;
    CliResult r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

/// Synthesised scene shared by the tests of one binary run.
const fs::path& scene_dir(const std::string& preset)
{
    static std::map<std::string, fs::path> made;
    auto it = made.find(preset);
    if (it == made.end()) {
        const fs::path dir = testing::scratch_dir("cli_scene_" + preset);
        const auto r = run({"synth", "--preset", preset, "--out", dir.string(), "--seed", "3"});
        EXPECT_EQ(r.code, 0) << r.err;
        it = made.emplace(preset, dir).first;
    }
    return it->second;
}

TEST(RunConfig, JsonRoundTripIsLossless)
{
    RunConfig cfg;
    cfg.seed = 99;
    cfg.coarse.tau_mot = 0.125;
    cfg.refiner.view_choice = ViewChoice::nearest;
    cfg.refiner.max_depth = 2;
    cfg.pivot = PivotMethod::static_centroids;
    cfg.deform.epochs = 17;
    cfg.state_b = 2;
    cfg.provider = "fixed";
    cfg.fixed_parts = 3;
    const nlohmann::json doc = to_json(cfg);
    EXPECT_EQ(to_json(run_config_from_json(doc)), doc);
    EXPECT_EQ(to_json(RunConfig{}), to_json(run_config_from_json(nlohmann::json::object())));
    // Every registered key appears in the document.
    for (const ConfigKey& k : config_keys()) {
        std::string pointer = "/" + k.key;
        std::replace(pointer.begin(), pointer.end(), '.', '/');
        EXPECT_TRUE(doc.contains(nlohmann::json::json_pointer(pointer))) << k.key;
    }
}

TEST(RunConfig, HelpListsEveryKeyWithItsDefault)
{
    const std::string help = config_help();
    const RunConfig defaults;
    for (const ConfigKey& k : config_keys()) {
        const auto line_at = help.find("  " + k.key + " ");
        ASSERT_NE(line_at, std::string::npos) << k.key;
        const std::string line = help.substr(line_at, help.find('\n', line_at) - line_at);
        EXPECT_NE(line.find(k.get(defaults).dump()), std::string::npos) << line;
    }
    const auto r = run({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("refiner.max_depth"), std::string::npos);
}

TEST(RunConfig, StrictKeysAndRanges)
{
    EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"coarse": {"tau_motion": 0.1}})")), ValidationError);
    EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"coarse": {"tau_mot": 1.5}})")), ValidationError);
    EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"coarse": {"tau_mot": "high"}})")), ValidationError);
    EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"provider": "psychic"})")), ValidationError);

    RunConfig cfg;
    apply_override(cfg, "refiner.max_depth=7");
    apply_override(cfg, "kinematics.pivot=static_centroids");
    apply_override(cfg, "refiner.enabled=false");
    EXPECT_EQ(cfg.refiner.max_depth, 7u);
    EXPECT_EQ(cfg.pivot, PivotMethod::static_centroids);
    EXPECT_FALSE(cfg.refine);
    EXPECT_THROW(apply_override(cfg, "refiner.max_depth"), ValidationError);
    EXPECT_THROW(apply_override(cfg, "nope=1"), ValidationError);
    EXPECT_THROW(apply_override(cfg, "threads=0"), ValidationError);
}

TEST(RunConfig, ConfigFileIsReadStrictly)
{
    const auto dir = testing::scratch_dir("cli_config");
    std::ofstream(dir / "good.json") << R"({"seed": 5, "kinematics": {"tau_rank": 0.1}})";
    std::ofstream(dir / "bad.json") << R"({"seed": 5, "colour": "blue"})";
    const RunConfig cfg = load_run_config(dir / "good.json");
    EXPECT_EQ(cfg.seed, 5u);
    EXPECT_DOUBLE_EQ(cfg.tau_rank, 0.1);
    EXPECT_THROW(load_run_config(dir / "bad.json"), ValidationError);
    EXPECT_THROW(load_run_config(dir / "absent.json"), ValidationError);
}

TEST(Cli, ExitCodes)
{
    const auto dir = testing::scratch_dir("cli_exit");
    EXPECT_EQ(run({"synth", "--preset", "nope", "--out", dir.string()}).code, 1);
    EXPECT_EQ(run({"synth", "--preset", "static_box"}).code, 1);
    EXPECT_EQ(run({"frobnicate"}).code, 1);
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"segment", "--scene", (dir / "missing").string(), "--out", dir.string()}).code, 1);
    EXPECT_EQ(run({"--set", "coarse.tau_mot=2", "segment", "--scene", scene_dir("storage2").string(), "--out",
                   dir.string()})
                  .code,
              1);
    EXPECT_EQ(run({"--set", "nope=1", "segment", "--scene", scene_dir("storage2").string(), "--out", dir.string()})
                  .code,
              1);

    // An output path below a regular file cannot be created.
    std::ofstream(dir / "file") << "x";
    const auto r = run({"synth", "--preset", "static_box", "--out", (dir / "file" / "sub").string()});
    EXPECT_EQ(r.code, 2) << r.err;
    EXPECT_NE(r.err.find("output directory"), std::string::npos);
}

TEST(Cli, HttpProviderWithoutEndpointIsInvalidInput)
{
    ::unsetenv("ARTIKIN_VLM_URL");
    const auto dir = testing::scratch_dir("cli_http");
    const auto r =
        run({"--set", "provider=http", "segment", "--scene", scene_dir("storage2").string(), "--out", dir.string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("ARTIKIN_VLM_URL"), std::string::npos);
}

TEST(Cli, EvalWithoutGroundTruthNamesTheMissingBlock)
{
    const auto dir = testing::scratch_dir("cli_nogt");
    auto doc = read_json_file(scene_dir("storage2") / "scene.json");
    doc.erase("ground_truth");
    std::ofstream(dir / "scene.json") << doc.dump();
    const auto seg = run({"--set", "provider=fixed", "--set", "fixed_parts=2", "--set", "refiner.enabled=false",
                          "segment", "--scene", dir.string(), "--out", (dir / "out").string()});
    ASSERT_EQ(seg.code, 0) << seg.err;
    const auto kin = run({"kinematics", "--scene", dir.string(), "--labels", (dir / "out" / "labels.json").string(),
                          "--out", (dir / "out").string()});
    ASSERT_EQ(kin.code, 0) << kin.err;
    const auto ev = run({"eval", "--scene", dir.string(), "--labels", (dir / "out" / "labels.json").string(),
                         "--joints", (dir / "out" / "joints.json").string(), "--out", (dir / "out").string()});
    EXPECT_EQ(ev.code, 1);
    EXPECT_NE(ev.err.find("ground_truth"), std::string::npos);
}

TEST(Cli, PipelineIsByteReproducible)
{
    const auto a = testing::scratch_dir("cli_pipe_a");
    const auto b = testing::scratch_dir("cli_pipe_b");
    for (const auto& dir : {a, b}) {
        const auto r = run({"--seed", "11", "pipeline", "--scene", scene_dir("storage2").string(), "--out", dir.string()});
        ASSERT_EQ(r.code, 0) << r.err;
    }
    for (const char* name : {"report.json", "report.csv", "labels.json", "joints.json", "refined_field.json",
                             "config.json", "manifest.json"}) {
        ASSERT_TRUE(fs::exists(a / name)) << name;
        EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
    }
    const auto report = read_json_file(a / "report.json");
    EXPECT_GE(report["label_accuracy"].get<double>(), 0.99);
    // The manifest lists every artefact with its digest.
    const auto manifest = read_json_file(a / "manifest.json");
    EXPECT_TRUE(manifest["outputs"].contains("report.json"));
    EXPECT_EQ(manifest["seed"], 11);
}

TEST(Cli, InterpWritesOneStateAndImagePerWeight)
{
    const auto& scene = scene_dir("drawer1");
    const auto dir = testing::scratch_dir("cli_interp");
    const auto fit = run({"--set", "deform.epochs=20", "fit-deform", "--scene", scene.string(), "--out", dir.string()});
    ASSERT_EQ(fit.code, 0) << fit.err;
    const auto r = run({"interp", "--scene", scene.string(), "--checkpoint", (dir / "checkpoint.json").string(), "--t",
                        "0,0.5,1", "--part", "1", "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    std::size_t states = 0, images = 0;
    for (const auto& e : fs::directory_iterator(dir / "states")) {
        states += e.path().extension() == ".json" ? 1 : 0;
    }
    for (const auto& e : fs::directory_iterator(dir / "images")) {
        images += e.path().extension() == ".ppm" ? 1 : 0;
    }
    EXPECT_EQ(states, 3u);
    EXPECT_EQ(images, 3u);
    EXPECT_EQ(run({"interp", "--scene", scene.string(), "--checkpoint", (dir / "checkpoint.json").string(), "--t",
                   "1.5", "--out", dir.string()})
                  .code,
              1);
}

TEST(Cli, RenderWritesColourAndDepth)
{
    const auto dir = testing::scratch_dir("cli_render");
    const auto r =
        run({"render", "--scene", scene_dir("drawer1").string(), "--state", "2", "--view", "1", "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "images" / "state2_view001.ppm"));
    EXPECT_TRUE(fs::exists(dir / "images" / "state2_view001_depth.pgm"));
}

TEST(Cli, BinaryReportsTheSameExitCodes)
{
    const std::string bin = ARTIKIN_CLI_PATH;
    const auto status = [&](const std::string& args) {
        const int s = std::system((bin + " " + args + " >/dev/null 2>&1").c_str());
        return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    EXPECT_EQ(status("--version"), 0);
    EXPECT_EQ(status("frobnicate"), 1);
    const auto dir = testing::scratch_dir("cli_binary");
    EXPECT_EQ(status("synth --preset static_box --out " + dir.string()), 0);
    EXPECT_TRUE(fs::exists(dir / "scene.json"));
}

} // namespace
} // namespace artikin
