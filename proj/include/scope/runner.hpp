#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scope/evaluation.hpp"
#include "scope/provider.hpp"
#include "scope/types.hpp"

// Orchestration: JSON config + manifest loading, the staged run loop, sweeps,
// synthetic benchmark emission, and standalone metric recomputation. All
// artifact writes are atomic (temp file + rename) and deterministic: a rerun
// with identical config and seed produces byte-identical trees.
namespace scope::runner {

/// Parses a JSON file, mapping parse errors to BadConfig with the path.
nlohmann::json parse_json_file(const std::filesystem::path& path);

/// "fnv1a:" + 16 hex digits.
std::string checksum_string(std::uint64_t checksum);

struct SceneEntry {
    std::string id;
    std::string role; // "base" | "support" | "test"
    std::string scene_path;
    std::string hidden_path;    // optional, synthetic provider only
    std::string masks_path;     // optional, base scenes
    std::string embedding_path; // optional, file provider only
};

struct Manifest {
    std::filesystem::path root; // directory the manifest sits in
    std::uint64_t seed = 0;
    std::string provider_default; // "synthetic" | "file"
    std::size_t embed_dim = 0;
    double noise_sigma = 1.0;
    std::string oracle_path; // synthetic provider: class-means sidecar
    std::vector<ClassId> base_classes;
    std::optional<ClassId> clutter_class;
    std::vector<SceneEntry> scenes; // order defines bank assembly order
    StageSchedule schedule;
    std::map<std::string, std::string> checksums;
};

Manifest load_manifest(const std::filesystem::path& path);

struct RunConfig {
    std::filesystem::path config_dir; // relative paths resolve against this
    std::string manifest;
    std::string out;
    std::optional<std::string> bank; // prebuilt IPBB to load instead of building
    HyperParams hp;
    std::optional<std::uint64_t> seed; // default: manifest seed
    std::string provider;              // "" = manifest default
    std::string aggregation = evaluation::kAggregatePerRunHm;
    bool include_stage0 = true;
    std::optional<int> k_shot; // use only the first K supports per class
    std::vector<double> sweep_tau;
    std::vector<int> sweep_top_r;
    std::vector<double> sweep_lambda;

    std::filesystem::path resolve(const std::string& p) const;
};

struct CliOverrides {
    std::optional<double> tau;
    std::optional<int> top_r;
    std::optional<double> lambda;
    std::optional<int> k_shot;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

RunConfig load_run_config(const std::filesystem::path& config_path, const CliOverrides& ov);

struct BuildIpbResult {
    std::filesystem::path bank_file;
    std::size_t scenes = 0;
    std::size_t masks_seen = 0;
    std::size_t masks_kept = 0;
    std::size_t bank_size = 0;
};

/// Mines the base scenes into a frozen bank and writes <out>/bank.ipbb plus a
/// build log.
BuildIpbResult cmd_build_ipb(const RunConfig& config);

struct RunResult {
    evaluation::RunSummary summary;
    std::filesystem::path out_dir;
    std::size_t bank_size = 0;
    std::string bank_checksum;
};

/// Full staged protocol: bank, stage-0 base classifier, incremental
/// registration, per-stage evaluation over the test split restricted to the
/// classes known so far. Writes bank.ipbb, config.json, metrics.csv,
/// summary.json, and predictions/stage_<t>.json.
RunResult cmd_run(const RunConfig& config);

struct SweepResult {
    std::filesystem::path csv_file;
    std::size_t points = 0;
    std::size_t failures = 0;
};

/// One-at-a-time grid over the configured tau/top_r/lambda value lists; banks
/// are built once per distinct tau and shared. Per-point failures land in the
/// CSV error column and the sweep continues.
SweepResult cmd_sweep(const RunConfig& config);

struct SynthConfig {
    provider::SynthParams params;
    std::string out;
};

/// config_path may be null: defaults plus overrides then describe the world.
SynthConfig load_synth_config(const std::filesystem::path* config_path, const CliOverrides& ov);

/// Writes scenes, hidden-label twins, masks, embeddings, oracle.json, and a
/// checksummed manifest; returns the manifest path.
std::filesystem::path cmd_synth(const SynthConfig& config);

struct EvalResult {
    evaluation::RunSummary summary;
    std::filesystem::path out_dir;
};

/// Recomputes every metric from a run's stored predictions/stage_<t>.json
/// files; writes metrics.csv and summary.json under out_dir.
EvalResult cmd_eval(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir);

} // namespace scope::runner
