#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "scope/io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& root() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "scope_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run_cli(const std::string& args, const std::string& env = "") {
    std::string cmd = "cd " + root().string() + " && " + env + (env.empty() ? "" : " ") +
                      SCOPE_CLI_BINARY " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    REQUIRE(out.good());
    out << text;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// (relative path, checksum) snapshot of a directory tree
std::map<std::string, std::uint64_t> snapshot(const fs::path& dir) {
    std::map<std::string, std::uint64_t> sums;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file())
            sums[fs::relative(entry.path(), dir).string()] =
                scope::io::file_checksum(entry.path());
    return sums;
}

const char* kSynthConfig = R"({
  "out": "world",
  "base_classes": 3,
  "novel_classes": 2,
  "stages": 2,
  "k_shot": 2,
  "embed_dim": 8,
  "noise_sigma": 1.0,
  "base_scenes": 3,
  "test_scenes": 2,
  "support_points": 64,
  "points_per_scene": 256,
  "instances_per_scene": 2,
  "points_per_instance": 16,
  "distractors": true,
  "distractors_per_scene": 1,
  "seed": 11
})";

const char* kRunConfig = R"({
  "manifest": "world/manifest.json",
  "out": "run1",
  "hyperparams": {"tau": 0.6, "top_r": 10, "lambda": 0.5}
})";

const char* kSweepConfig = R"({
  "manifest": "world/manifest.json",
  "out": "sweep1",
  "hyperparams": {"tau": 0.6, "top_r": 10, "lambda": 0.5},
  "sweep": {"tau": [0.3, 0.9], "lambda": [0.25]}
})";

} // namespace

TEST_CASE("cli pipeline: synth, build-ipb, run, eval, sweep") {
    write_file(root() / "synth.json", kSynthConfig);
    write_file(root() / "run.json", kRunConfig);
    write_file(root() / "sweep.json", kSweepConfig);

    REQUIRE(run_cli("synth --config synth.json") == 0);
    REQUIRE(fs::exists(root() / "world/manifest.json"));
    CHECK(fs::exists(root() / "world/oracle.json"));

    SUBCASE("synth is byte-deterministic") {
        const auto before = snapshot(root() / "world");
        REQUIRE(run_cli("synth --config synth.json --out world2") == 0);
        const auto other = snapshot(root() / "world2");
        CHECK(before == other);
    }

    SUBCASE("run produces the full artifact tree") {
        REQUIRE(run_cli("run --config run.json") == 0);
        const fs::path run1 = root() / "run1";
        for (const char* name :
             {"config.json", "bank.ipbb", "metrics.csv", "summary.json",
              "predictions/stage_0.json", "predictions/stage_1.json",
              "predictions/stage_2.json"})
            CHECK(fs::exists(run1 / name));

        const std::string metrics = slurp(run1 / "metrics.csv");
        CHECK(metrics.rfind("stage,class_id,iou,miou,miou_b,miou_n,hm\n", 0) == 0);

        const auto summary = nlohmann::json::parse(slurp(run1 / "summary.json"));
        CHECK(summary.at("format") == "scope-summary-v1");
        CHECK(summary.at("stages").size() == 3);
        CHECK(summary.at("seed") == 11);
        CHECK(summary.contains("miou_i"));
        CHECK(summary.contains("fpp"));

        SUBCASE("a rerun rewrites an identical tree") {
            const auto before = snapshot(run1);
            fs::remove_all(run1);
            REQUIRE(run_cli("run --config run.json") == 0);
            CHECK(snapshot(run1) == before);
        }

        SUBCASE("a rerun into another directory matches except the echoed out path") {
            auto before = snapshot(run1);
            REQUIRE(run_cli("run --config run.json --out run2") == 0);
            auto other = snapshot(root() / "run2");
            before.erase("config.json"); // echoes the overridden out path
            other.erase("config.json");
            CHECK(before == other);
        }

        SUBCASE("eval reproduces the run metrics from predictions alone") {
            REQUIRE(run_cli("eval run1 --out eval1") == 0);
            CHECK(slurp(root() / "eval1/metrics.csv") == slurp(run1 / "metrics.csv"));
            const auto eval_summary =
                nlohmann::json::parse(slurp(root() / "eval1/summary.json"));
            CHECK(eval_summary.at("format") == "scope-eval-v1");
            CHECK(eval_summary.at("miou_i") == summary.at("miou_i"));
        }

        SUBCASE("build-ipb emits the same bank the run used") {
            REQUIRE(run_cli("build-ipb --config run.json --out ipb1") == 0);
            CHECK(scope::io::file_checksum(root() / "ipb1/bank.ipbb") ==
                  scope::io::file_checksum(run1 / "bank.ipbb"));
            CHECK(fs::exists(root() / "ipb1/build_ipb.log"));
        }

        SUBCASE("SCOPE_THREADS does not change results") {
            REQUIRE(run_cli("run --config run.json --out run_threads",
                            "SCOPE_THREADS=3") == 0);
            CHECK(slurp(root() / "run_threads/metrics.csv") == slurp(run1 / "metrics.csv"));
            CHECK(slurp(root() / "run_threads/summary.json") ==
                  slurp(run1 / "summary.json"));
        }

        SUBCASE("seed override changes the config echo and stays valid") {
            REQUIRE(run_cli("run --config run.json --out run_seed --seed 99") == 0);
            const auto echo =
                nlohmann::json::parse(slurp(root() / "run_seed/config.json"));
            CHECK(echo.at("seed") == 99);
            CHECK(nlohmann::json::parse(slurp(root() / "run_seed/summary.json"))
                      .at("seed") == 99);
        }
    }

    SUBCASE("sweep walks each list one parameter at a time") {
        REQUIRE(run_cli("sweep --config sweep.json") == 0);
        const fs::path sweep1 = root() / "sweep1";
        const std::string csv = slurp(sweep1 / "sweep.csv");
        CHECK(csv.rfind("param,value,stage,metric,score,error\n", 0) == 0);
        CHECK(csv.find("tau,0.3,") != std::string::npos);
        CHECK(csv.find("tau,0.9,") != std::string::npos);
        CHECK(csv.find("lambda,0.25,") != std::string::npos);
        CHECK(csv.find(",-1,miou_i,") != std::string::npos);
        CHECK(csv.find(",-1,fpp,") != std::string::npos);
        for (const char* name : {"runs/tau_0", "runs/tau_1", "runs/lambda_0"})
            CHECK(fs::is_directory(sweep1 / name));
        // one bank per distinct tau; 0.25-lambda reuses the default-tau bank
        CHECK(fs::exists(sweep1 / "banks/bank_tau_0.ipbb"));
        CHECK(fs::exists(sweep1 / "banks/bank_tau_1.ipbb"));
        CHECK(fs::exists(sweep1 / "banks/bank_tau_2.ipbb"));
        // lower tau keeps at least as many masks
        CHECK(fs::file_size(sweep1 / "banks/bank_tau_0.ipbb") >=
              fs::file_size(sweep1 / "banks/bank_tau_1.ipbb"));
    }

    SUBCASE("cli rejects bad invocations with exit code 2") {
        CHECK(run_cli("run --config does_not_exist.json") == 2);
        CHECK(run_cli("run") == 2);                   // missing --config
        CHECK(run_cli("frobnicate") == 2);            // unknown subcommand
        CHECK(run_cli("") == 2);                      // missing subcommand
        CHECK(run_cli("run --config run.json --tau 1.5 --out bad1") == 2);
        CHECK(run_cli("run --config run.json --k-shot 5 --out bad2") == 2);
        CHECK(run_cli("eval missing_run --out bad3") == 2);

        write_file(root() / "broken.json", "{ not json");
        CHECK(run_cli("run --config broken.json") == 2);

        write_file(root() / "no_manifest.json",
                   R"({"manifest": "nowhere/manifest.json", "out": "bad4"})");
        CHECK(run_cli("run --config no_manifest.json") == 2);
    }

    SUBCASE("help exits zero") {
        CHECK(run_cli("--help") == 0);
        CHECK(run_cli("run --help") == 0);
    }
}
