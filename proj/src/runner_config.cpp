#include <fstream>

#include "scope/runner.hpp"

namespace scope::runner {

nlohmann::json parse_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::io_failure, path.string() + ": cannot open");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        raise(Errc::bad_config, path.string() + ": " + e.what());
    }
}

std::string checksum_string(std::uint64_t checksum) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "fnv1a:%016llx",
                  static_cast<unsigned long long>(checksum));
    return buf;
}

Manifest load_manifest(const std::filesystem::path& path) {
    const nlohmann::json j = parse_json_file(path);
    Manifest m;
    m.root = path.parent_path();
    try {
        if (j.value("format", std::string()) != "scope-manifest-v1")
            raise(Errc::bad_config, path.string() + ": not a scope manifest");
        m.seed = j.value("seed", std::uint64_t{0});

        const auto& prov = j.at("provider");
        m.provider_default = prov.value("mode", std::string("synthetic"));
        m.embed_dim = prov.value("embed_dim", std::size_t{0});
        m.noise_sigma = prov.value("noise_sigma", 1.0);
        m.oracle_path = prov.value("oracle", std::string());

        for (const auto& c : j.at("base_classes")) m.base_classes.push_back(c.get<ClassId>());
        if (j.contains("clutter_class")) m.clutter_class = j.at("clutter_class").get<ClassId>();

        for (const auto& s : j.at("scenes")) {
            SceneEntry e;
            e.id = s.at("id").get<std::string>();
            e.role = s.at("role").get<std::string>();
            e.scene_path = s.at("scene").get<std::string>();
            e.hidden_path = s.value("hidden", std::string());
            e.masks_path = s.value("masks", std::string());
            e.embedding_path = s.value("embedding", std::string());
            if (e.role != "base" && e.role != "support" && e.role != "test")
                raise(Errc::bad_config, path.string() + ": scene " + e.id +
                                            " has unknown role " + e.role);
            m.scenes.push_back(std::move(e));
        }

        const auto& sched = j.at("schedule");
        const int k = sched.at("k").get<int>();
        m.schedule.base_classes = m.base_classes;
        for (const auto& st : sched.at("stages")) {
            StageSchedule::Stage stage;
            stage.k = k;
            for (const auto& c : st.at("classes")) {
                StageSchedule::NovelClass nc;
                nc.class_id = c.at("class_id").get<ClassId>();
                for (const auto& sid : c.at("supports"))
                    nc.support_scene_ids.push_back(sid.get<std::string>());
                stage.classes.push_back(std::move(nc));
            }
            m.schedule.stages.push_back(std::move(stage));
        }

        if (j.contains("checksums"))
            for (const auto& [rel, sum] : j.at("checksums").items())
                m.checksums[rel] = sum.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        raise(Errc::bad_config, path.string() + ": " + e.what());
    }

    m.schedule.validate();
    if (m.provider_default != "synthetic" && m.provider_default != "file")
        raise(Errc::bad_config, path.string() + ": provider mode must be synthetic or file");
    return m;
}

std::filesystem::path RunConfig::resolve(const std::string& p) const {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : config_dir / fp;
}

RunConfig load_run_config(const std::filesystem::path& config_path, const CliOverrides& ov) {
    const nlohmann::json j = parse_json_file(config_path);
    RunConfig c;
    c.config_dir = config_path.parent_path();
    try {
        c.manifest = j.value("manifest", std::string());
        c.out = j.value("out", std::string());
        if (j.contains("bank")) c.bank = j.at("bank").get<std::string>();
        if (j.contains("hyperparams")) {
            const auto& h = j.at("hyperparams");
            c.hp.tau = h.value("tau", c.hp.tau);
            c.hp.top_r = h.value("top_r", c.hp.top_r);
            c.hp.lambda = h.value("lambda", c.hp.lambda);
            c.hp.bg_overlap = h.value("bg_overlap", c.hp.bg_overlap);
            c.hp.norm_epsilon = h.value("norm_epsilon", c.hp.norm_epsilon);
        }
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        c.provider = j.value("provider", std::string());
        c.aggregation =
            j.value("aggregation", std::string(evaluation::kAggregatePerRunHm));
        c.include_stage0 = j.value("include_stage0_in_miou_i", true);
        if (j.contains("k_shot")) c.k_shot = j.at("k_shot").get<int>();
        if (j.contains("sweep")) {
            const auto& s = j.at("sweep");
            if (s.contains("tau"))
                for (const auto& v : s.at("tau")) c.sweep_tau.push_back(v.get<double>());
            if (s.contains("top_r"))
                for (const auto& v : s.at("top_r")) c.sweep_top_r.push_back(v.get<int>());
            if (s.contains("lambda"))
                for (const auto& v : s.at("lambda")) c.sweep_lambda.push_back(v.get<double>());
        }
    } catch (const nlohmann::json::exception& e) {
        raise(Errc::bad_config, config_path.string() + ": " + e.what());
    }

    if (ov.tau) c.hp.tau = *ov.tau;
    if (ov.top_r) c.hp.top_r = *ov.top_r;
    if (ov.lambda) c.hp.lambda = *ov.lambda;
    if (ov.k_shot) c.k_shot = *ov.k_shot;
    if (ov.seed) c.seed = *ov.seed;
    if (ov.out) c.out = *ov.out;

    if (c.manifest.empty())
        raise(Errc::bad_config, config_path.string() + ": manifest path required");
    if (c.out.empty())
        raise(Errc::bad_config,
              config_path.string() + ": output dir required (\"out\" field or --out)");
    if (!c.provider.empty() && c.provider != "synthetic" && c.provider != "file")
        raise(Errc::bad_config, config_path.string() + ": provider must be synthetic or file");
    if (c.aggregation != evaluation::kAggregatePerRunHm &&
        c.aggregation != evaluation::kAggregateAveragedHm)
        raise(Errc::bad_config, config_path.string() + ": unknown aggregation mode");
    if (c.k_shot && *c.k_shot < 1)
        raise(Errc::bad_config, config_path.string() + ": k_shot must be >= 1");
    c.hp.validate();
    return c;
}

SynthConfig load_synth_config(const std::filesystem::path* config_path, const CliOverrides& ov) {
    SynthConfig c;
    std::filesystem::path config_dir = std::filesystem::current_path();
    if (config_path) {
        config_dir = config_path->parent_path();
        const nlohmann::json j = parse_json_file(*config_path);
        try {
            provider::SynthParams& p = c.params;
            c.out = j.value("out", std::string());
            p.seed = j.value("seed", p.seed);
            p.base_classes = j.value("base_classes", p.base_classes);
            p.novel_classes = j.value("novel_classes", p.novel_classes);
            p.stages = j.value("stages", p.stages);
            p.k_shot = j.value("k_shot", p.k_shot);
            p.embed_dim = j.value("embed_dim", p.embed_dim);
            p.noise_sigma = j.value("noise_sigma", p.noise_sigma);
            p.base_scenes = j.value("base_scenes", p.base_scenes);
            p.test_scenes = j.value("test_scenes", p.test_scenes);
            p.support_points = j.value("support_points", p.support_points);
            p.points_per_scene = j.value("points_per_scene", p.points_per_scene);
            p.instances_per_scene = j.value("instances_per_scene", p.instances_per_scene);
            p.points_per_instance = j.value("points_per_instance", p.points_per_instance);
            p.distractors = j.value("distractors", p.distractors);
            p.distractors_per_scene = j.value("distractors_per_scene", p.distractors_per_scene);
        } catch (const nlohmann::json::exception& e) {
            raise(Errc::bad_config, config_path->string() + ": " + e.what());
        }
    }
    if (ov.seed) c.params.seed = *ov.seed;
    if (ov.k_shot) c.params.k_shot = *ov.k_shot;
    if (ov.out) c.out = *ov.out;
    if (c.out.empty()) raise(Errc::bad_config, "synth: output dir required (--out)");
    if (!std::filesystem::path(c.out).is_absolute())
        c.out = (config_dir / c.out).string();
    c.params.validate();
    return c;
}

} // namespace scope::runner
