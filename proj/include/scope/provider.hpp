#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "scope/types.hpp"

// Embedding sources: precomputed EMBB files, or a deterministic synthetic
// encoder backed by Gaussian class clusters (nearest-prototype classification
// is Bayes-optimal there, so every downstream quantity has a closed form the
// tests can check against).
namespace scope::provider {

struct SyntheticWorldSpec {
    std::map<ClassId, std::vector<float>> class_means; // all share embed_dim
    double noise_sigma = 1.0; // 0 is legal and makes rows equal their means
    std::size_t embed_dim = 0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Loads an EMBB file and stamps it with scene_id; M must match the scene.
EmbeddingMatrix embed_from_file(const std::string& scene_id, const std::filesystem::path& path,
                                std::size_t expected_point_count);

/// Row i = class_means[hidden_labels[i]] + noise_sigma * g, with g drawn from
/// a generator keyed by (seed, scene_id, i): bitwise deterministic, and rows
/// may be produced in parallel or in any order.
EmbeddingMatrix embed_synthetic(const PointCloudScene& scene, const SyntheticWorldSpec& world,
                                const std::vector<std::int32_t>& hidden_labels);

struct SynthParams {
    int base_classes = 6;
    int novel_classes = 6;
    int stages = 3;   // incremental stages the novel classes are spread over
    int k_shot = 5;
    std::size_t embed_dim = 32;
    double noise_sigma = 1.0;
    int base_scenes = 20;
    int test_scenes = 8;
    int support_points = 512;   // points per support scene, half class-labelled
    int points_per_scene = 2048;
    int instances_per_scene = 4; // planted background instances per base scene
    int points_per_instance = 64;
    bool distractors = true;
    int distractors_per_scene = 2;
    std::uint64_t seed = 0;

    void validate() const;
};

/// One generated scene with everything derived from it.
struct SceneBundle {
    PointCloudScene scene;                  // visible labels (-1 on background)
    std::vector<std::int32_t> hidden_labels; // true class of every point
    std::vector<InstanceMask> masks;         // base scenes only
    EmbeddingMatrix embedding;
    std::string role; // "base" | "support" | "test"
};

struct SynthWorld {
    SyntheticWorldSpec world; // includes the clutter class mean
    StageSchedule schedule;
    std::vector<ClassId> base_ids;
    std::vector<ClassId> novel_ids;
    ClassId clutter_id = 0; // filler background texture, never registered
    std::vector<SceneBundle> bundles; // deterministic manifest order
    std::size_t planted_instances = 0; // ground-truth masks across base scenes
};

/// Builds the full benchmark in memory: base scenes with planted novel-class
/// instances (visibly -1, masked with confidence in (0.5, 1]) and optional
/// cross-class distractor masks (confidence in [0, 0.5)), per-class support
/// scenes, and fully labelled test scenes.
SynthWorld synth_generate(const SynthParams& params);

} // namespace scope::provider
