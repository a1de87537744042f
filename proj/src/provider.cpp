#include "scope/provider.hpp"

#include <cmath>
#include <cstring>

#include "scope/core.hpp"
#include "scope/det_rng.hpp"
#include "scope/io.hpp"

namespace scope::provider {
namespace {

std::vector<float> unit_mean(std::uint64_t seed, ClassId class_id, std::size_t dim) {
    rng::Stream stream(rng::mix(seed, rng::mix(rng::fnv1a("class-means"),
                                               static_cast<std::uint64_t>(class_id))));
    std::vector<double> raw(dim);
    double sq = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
        raw[j] = stream.next_normal();
        sq += raw[j] * raw[j];
    }
    // A D-dimensional standard normal is never this close to the origin in
    // practice, but regenerate rather than divide by ~0 if it happens.
    while (sq < 1e-12) {
        sq = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            raw[j] = stream.next_normal();
            sq += raw[j] * raw[j];
        }
    }
    const double inv = 1.0 / std::sqrt(sq);
    std::vector<float> mean(dim);
    for (std::size_t j = 0; j < dim; ++j) mean[j] = static_cast<float>(raw[j] * inv);
    return mean;
}

// Nine plausible point features: XYZ in the unit block, RGB, normalized XYZ.
void fill_point_features(PointCloudScene& scene, std::uint64_t seed) {
    const std::uint64_t key = rng::mix(rng::mix(seed, rng::fnv1a("points")),
                                       rng::fnv1a(scene.scene_id));
    const std::size_t d0 = scene.feature_dim;
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(scene.point_count); ++i) {
        rng::Stream stream(rng::mix(key, static_cast<std::uint64_t>(i)));
        float* row = scene.points.data() + static_cast<std::size_t>(i) * d0;
        for (int j = 0; j < 6; ++j) row[j] = static_cast<float>(stream.next_unit());
        row[6] = row[0];
        row[7] = row[1];
        row[8] = row[2];
    }
}

} // namespace

void SyntheticWorldSpec::validate() const {
    if (embed_dim < 1) raise(Errc::bad_config, "synthetic world: embed_dim must be >= 1");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
        raise(Errc::bad_config, "synthetic world: noise_sigma must be finite and >= 0");
    for (const auto& [class_id, mean] : class_means)
        if (mean.size() != embed_dim)
            raise(Errc::dim_mismatch, "synthetic world: mean of class " +
                                          std::to_string(class_id) + " has wrong dim");
}

EmbeddingMatrix embed_from_file(const std::string& scene_id, const std::filesystem::path& path,
                                std::size_t expected_point_count) {
    EmbeddingMatrix emb = io::load_embedding(path);
    if (emb.point_count != expected_point_count)
        raise(Errc::dim_mismatch, path.string() + ": embedding M " +
                                      std::to_string(emb.point_count) +
                                      " does not match scene M " +
                                      std::to_string(expected_point_count));
    emb.scene_id = scene_id;
    return emb;
}

EmbeddingMatrix embed_synthetic(const PointCloudScene& scene, const SyntheticWorldSpec& world,
                                const std::vector<std::int32_t>& hidden_labels) {
    world.validate();
    if (hidden_labels.size() != scene.point_count)
        raise(Errc::length_mismatch, "embed_synthetic: hidden label count does not match M");

    // Resolve means up front so the parallel loop cannot throw.
    std::vector<const float*> mean_of(scene.point_count);
    for (std::size_t i = 0; i < scene.point_count; ++i) {
        auto it = world.class_means.find(hidden_labels[i]);
        if (it == world.class_means.end())
            raise(Errc::unknown_class, "embed_synthetic: no mean for class " +
                                           std::to_string(hidden_labels[i]));
        mean_of[i] = it->second.data();
    }

    EmbeddingMatrix out;
    out.scene_id = scene.scene_id;
    out.point_count = scene.point_count;
    out.dim = world.embed_dim;
    out.data.resize(scene.point_count * world.embed_dim);

    const std::size_t d = world.embed_dim;
    const double sigma = world.noise_sigma;
    const std::uint64_t scene_key = rng::mix(rng::mix(world.seed, rng::fnv1a("embed")),
                                             rng::fnv1a(scene.scene_id));
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(scene.point_count); ++i) {
        const float* mean = mean_of[static_cast<std::size_t>(i)];
        float* row = out.data.data() + static_cast<std::size_t>(i) * d;
        if (sigma == 0.0) {
            std::memcpy(row, mean, d * sizeof(float));
            continue;
        }
        rng::Stream stream(rng::mix(scene_key, static_cast<std::uint64_t>(i)));
        for (std::size_t j = 0; j < d; ++j)
            row[j] = static_cast<float>(static_cast<double>(mean[j]) +
                                        sigma * stream.next_normal());
    }
    return out;
}

void SynthParams::validate() const {
    if (base_classes < 1) raise(Errc::insufficient_classes, "synth: need at least one base class");
    if (novel_classes < 0 || stages < 0) raise(Errc::bad_config, "synth: negative class/stage count");
    if (novel_classes > 0 && stages < 1)
        raise(Errc::insufficient_classes, "synth: novel classes need at least one stage");
    if (stages > novel_classes)
        raise(Errc::insufficient_classes, "synth: more stages than novel classes");
    if (k_shot < 1) raise(Errc::bad_config, "synth: k_shot must be >= 1");
    if (embed_dim < 1) raise(Errc::bad_config, "synth: embed_dim must be >= 1");
    if (!(noise_sigma >= 0.0)) raise(Errc::bad_config, "synth: noise_sigma must be >= 0");
    if (base_scenes < 1) raise(Errc::bad_config, "synth: need at least one base scene");
    if (test_scenes < 0) raise(Errc::bad_config, "synth: negative test scene count");
    if (support_points < 2) raise(Errc::bad_config, "synth: support scenes need >= 2 points");
    if (points_per_scene < 1) raise(Errc::bad_config, "synth: points_per_scene must be >= 1");
    if (instances_per_scene < 0 || points_per_instance < 1 || distractors_per_scene < 0)
        raise(Errc::bad_config, "synth: negative instance geometry");
    const long long planted =
        static_cast<long long>(instances_per_scene) * points_per_instance;
    if (planted > points_per_scene / 2)
        raise(Errc::bad_config, "synth: planted instances exceed half the scene");
    const long long base_region = (points_per_scene - planted) / 2;
    if (base_region < base_classes)
        raise(Errc::bad_config, "synth: not enough points to cover every base class");
}

SynthWorld synth_generate(const SynthParams& params) {
    params.validate();

    SynthWorld world;
    for (int b = 0; b < params.base_classes; ++b) world.base_ids.push_back(b);
    for (int n = 0; n < params.novel_classes; ++n)
        world.novel_ids.push_back(params.base_classes + n);
    world.clutter_id = params.base_classes + params.novel_classes;

    world.world.embed_dim = params.embed_dim;
    world.world.noise_sigma = params.noise_sigma;
    world.world.seed = params.seed;
    for (ClassId c : world.base_ids)
        world.world.class_means[c] = unit_mean(params.seed, c, params.embed_dim);
    for (ClassId c : world.novel_ids)
        world.world.class_means[c] = unit_mean(params.seed, c, params.embed_dim);
    world.world.class_means[world.clutter_id] =
        unit_mean(params.seed, world.clutter_id, params.embed_dim);

    // Novel classes in contiguous chunks over the stages, front-loaded.
    world.schedule.base_classes = world.base_ids;
    if (params.novel_classes > 0) {
        const int per = params.novel_classes / params.stages;
        const int extra = params.novel_classes % params.stages;
        int next = 0;
        for (int t = 0; t < params.stages; ++t) {
            StageSchedule::Stage stage;
            stage.k = params.k_shot;
            const int take = per + (t < extra ? 1 : 0);
            for (int j = 0; j < take; ++j) {
                StageSchedule::NovelClass nc;
                nc.class_id = world.novel_ids[static_cast<std::size_t>(next++)];
                for (int k = 0; k < params.k_shot; ++k)
                    nc.support_scene_ids.push_back("support_s" + std::to_string(t + 1) + "_c" +
                                                   std::to_string(nc.class_id) + "_k" +
                                                   std::to_string(k));
                stage.classes.push_back(std::move(nc));
            }
            world.schedule.stages.push_back(std::move(stage));
        }
    }
    world.schedule.validate();

    const auto m = static_cast<std::size_t>(params.points_per_scene);
    const auto ppi = static_cast<std::size_t>(params.points_per_instance);
    const auto planted = static_cast<std::size_t>(params.instances_per_scene) * ppi;

    for (int s = 0; s < params.base_scenes; ++s) {
        SceneBundle bundle;
        bundle.role = "base";
        bundle.scene.scene_id = "base_" + std::to_string(s);
        bundle.scene.point_count = m;
        bundle.scene.feature_dim = 9;
        bundle.scene.points.resize(m * 9);
        bundle.scene.labels.assign(m, kBackgroundLabel);
        bundle.hidden_labels.assign(m, world.clutter_id);

        rng::Stream mask_stream(rng::mix(rng::mix(params.seed, rng::fnv1a("masks")),
                                         rng::fnv1a(bundle.scene.scene_id)));
        for (int j = 0; j < params.instances_per_scene; ++j) {
            const ClassId planted_class =
                world.novel_ids.empty()
                    ? world.clutter_id
                    : world.novel_ids[static_cast<std::size_t>(
                          (static_cast<long long>(s) * params.instances_per_scene + j) %
                          params.novel_classes)];
            InstanceMask mask;
            mask.selection = Bitset(m);
            const std::size_t begin = static_cast<std::size_t>(j) * ppi;
            for (std::size_t i = begin; i < begin + ppi; ++i) {
                bundle.hidden_labels[i] = planted_class;
                mask.selection.set(i);
            }
            // Strictly above 0.5 so the tau = 0.5 operating point keeps every
            // planted instance under the strict > filter.
            mask.confidence = static_cast<float>(1.0 - 0.5 * mask_stream.next_unit());
            mask.mask_index = static_cast<std::uint32_t>(j);
            bundle.masks.push_back(std::move(mask));
            world.planted_instances += 1;
        }

        const std::size_t base_total = (m - planted) / 2;
        const std::size_t per_base = base_total / static_cast<std::size_t>(params.base_classes);
        for (int b = 0; b < params.base_classes; ++b) {
            const std::size_t begin = planted + static_cast<std::size_t>(b) * per_base;
            for (std::size_t i = begin; i < begin + per_base; ++i) {
                bundle.scene.labels[i] = world.base_ids[static_cast<std::size_t>(b)];
                bundle.hidden_labels[i] = world.base_ids[static_cast<std::size_t>(b)];
            }
        }

        if (params.distractors) {
            for (int j = 0; j < params.distractors_per_scene; ++j) {
                InstanceMask mask;
                mask.selection = Bitset(m);
                for (std::size_t k = 0; k < ppi; ++k)
                    mask.selection.set(mask_stream.next_below(m));
                mask.confidence = static_cast<float>(0.5 * mask_stream.next_unit());
                mask.mask_index =
                    static_cast<std::uint32_t>(params.instances_per_scene + j);
                bundle.masks.push_back(std::move(mask));
            }
        }

        fill_point_features(bundle.scene, params.seed);
        world.bundles.push_back(std::move(bundle));
    }

    for (std::size_t t = 0; t < world.schedule.stages.size(); ++t) {
        for (const StageSchedule::NovelClass& nc : world.schedule.stages[t].classes) {
            for (const std::string& support_id : nc.support_scene_ids) {
                SceneBundle bundle;
                bundle.role = "support";
                bundle.scene.scene_id = support_id;
                const auto ms = static_cast<std::size_t>(params.support_points);
                bundle.scene.point_count = ms;
                bundle.scene.feature_dim = 9;
                bundle.scene.points.resize(ms * 9);
                bundle.scene.labels.assign(ms, kBackgroundLabel);
                bundle.hidden_labels.assign(ms, world.clutter_id);
                for (std::size_t i = 0; i < ms / 2; ++i) {
                    bundle.scene.labels[i] = nc.class_id;
                    bundle.hidden_labels[i] = nc.class_id;
                }
                fill_point_features(bundle.scene, params.seed);
                world.bundles.push_back(std::move(bundle));
            }
        }
    }

    const std::size_t eval_classes =
        world.base_ids.size() + world.novel_ids.size();
    for (int s = 0; s < params.test_scenes; ++s) {
        SceneBundle bundle;
        bundle.role = "test";
        bundle.scene.scene_id = "test_" + std::to_string(s);
        bundle.scene.point_count = m;
        bundle.scene.feature_dim = 9;
        bundle.scene.points.resize(m * 9);
        bundle.scene.labels.assign(m, kBackgroundLabel);
        bundle.hidden_labels.assign(m, world.clutter_id);
        const std::size_t share = m / (eval_classes + 1); // +1 leaves a clutter tail
        std::size_t next = 0;
        for (std::size_t idx = 0; idx < eval_classes; ++idx) {
            const ClassId c = idx < world.base_ids.size()
                                  ? world.base_ids[idx]
                                  : world.novel_ids[idx - world.base_ids.size()];
            for (std::size_t i = next; i < next + share; ++i) {
                bundle.scene.labels[i] = c;
                bundle.hidden_labels[i] = c;
            }
            next += share;
        }
        fill_point_features(bundle.scene, params.seed);
        world.bundles.push_back(std::move(bundle));
    }

    for (SceneBundle& bundle : world.bundles)
        bundle.embedding = embed_synthetic(bundle.scene, world.world, bundle.hidden_labels);

    return world;
}

} // namespace scope::provider
