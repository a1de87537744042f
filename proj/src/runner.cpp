#include "scope/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "scope/context.hpp"
#include "scope/io.hpp"
#include "scope/registration.hpp"

namespace scope::runner {
namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

provider::SyntheticWorldSpec load_world(const Manifest& manifest, std::uint64_t seed) {
    if (manifest.oracle_path.empty())
        raise(Errc::bad_config, "manifest: synthetic provider needs an oracle sidecar");
    const std::filesystem::path path = manifest.root / manifest.oracle_path;
    const nlohmann::json j = parse_json_file(path);

    provider::SyntheticWorldSpec world;
    world.seed = seed;
    try {
        world.embed_dim = j.at("embed_dim").get<std::size_t>();
        world.noise_sigma = j.at("noise_sigma").get<double>();
        for (const auto& [key, mean] : j.at("class_means").items())
            world.class_means[static_cast<ClassId>(std::stol(key))] =
                mean.get<std::vector<float>>();
    } catch (const std::exception& e) {
        raise(Errc::bad_config, path.string() + ": " + e.what());
    }
    world.validate();
    return world;
}

struct LoadedScene {
    SceneEntry entry;
    PointCloudScene scene;
    std::vector<std::int32_t> hidden;
    std::vector<InstanceMask> masks;
    EmbeddingMatrix embedding;
};

struct Bench {
    Manifest manifest;
    bool synthetic = true;
    std::uint64_t seed = 0;
    int k_effective = 0;
    std::vector<LoadedScene> scenes; // manifest order
    std::map<std::string, std::size_t> index;

    const LoadedScene& at(const std::string& id) const {
        const auto it = index.find(id);
        if (it == index.end())
            raise(Errc::bad_config, "manifest: scene " + id + " is referenced but not listed");
        return scenes[it->second];
    }
};

Bench load_bench(const RunConfig& config) {
    Bench bench;
    bench.manifest = load_manifest(config.resolve(config.manifest));
    const std::string mode =
        config.provider.empty() ? bench.manifest.provider_default : config.provider;
    bench.synthetic = mode == "synthetic";
    bench.seed = config.seed.value_or(bench.manifest.seed);

    int manifest_k = 1;
    for (const auto& stage : bench.manifest.schedule.stages) manifest_k = stage.k;
    bench.k_effective = config.k_shot.value_or(manifest_k);
    if (config.k_shot && !bench.manifest.schedule.stages.empty() &&
        *config.k_shot > manifest_k)
        raise(Errc::bad_config, "k_shot " + std::to_string(*config.k_shot) +
                                    " exceeds the manifest's " + std::to_string(manifest_k) +
                                    " supports per class");

    provider::SyntheticWorldSpec world;
    if (bench.synthetic) world = load_world(bench.manifest, bench.seed);

    for (const SceneEntry& entry : bench.manifest.scenes) {
        LoadedScene ls;
        ls.entry = entry;
        ls.scene = io::load_scene(bench.manifest.root / entry.scene_path);
        ls.scene.scene_id = entry.id;
        if (!entry.masks_path.empty())
            ls.masks = io::load_masks(bench.manifest.root / entry.masks_path,
                                      ls.scene.point_count);
        if (bench.synthetic) {
            if (entry.hidden_path.empty())
                raise(Errc::bad_config,
                      "scene " + entry.id + ": synthetic provider needs hidden labels");
            const PointCloudScene hidden =
                io::load_scene(bench.manifest.root / entry.hidden_path);
            if (hidden.point_count != ls.scene.point_count)
                raise(Errc::dim_mismatch, "scene " + entry.id +
                                              ": hidden twin has a different point count");
            ls.hidden = hidden.labels;
            ls.embedding = provider::embed_synthetic(ls.scene, world, ls.hidden);
            ls.embedding.scene_id = entry.id;
        } else {
            if (entry.embedding_path.empty())
                raise(Errc::bad_config,
                      "scene " + entry.id + ": file provider needs an embedding path");
            ls.embedding = provider::embed_from_file(
                entry.id, bench.manifest.root / entry.embedding_path, ls.scene.point_count);
        }
        bench.index[entry.id] = bench.scenes.size();
        bench.scenes.push_back(std::move(ls));
    }
    return bench;
}

context::FilterCriteria criteria_of(const HyperParams& hp) {
    return context::FilterCriteria{hp.tau, hp.bg_overlap};
}

PrototypeBank make_bank(const Bench& bench, const HyperParams& hp) {
    std::vector<context::SceneRecord> records;
    for (const LoadedScene& ls : bench.scenes)
        if (ls.entry.role == "base")
            records.push_back({&ls.scene, &ls.embedding, &ls.masks});
    return context::build_ipb(records, criteria_of(hp));
}

std::vector<registration::SupportShot> base_shots(const Bench& bench) {
    std::vector<registration::SupportShot> shots;
    for (const LoadedScene& ls : bench.scenes)
        if (ls.entry.role == "base") shots.push_back({&ls.embedding, &ls.scene.labels});
    return shots;
}

registration::StageSpec make_stage_spec(const Bench& bench, std::size_t stage_idx) {
    const StageSchedule::Stage& st = bench.manifest.schedule.stages[stage_idx - 1];
    registration::StageSpec spec;
    spec.stage = static_cast<int>(stage_idx);
    spec.k = bench.k_effective;
    for (const StageSchedule::NovelClass& nc : st.classes) {
        std::vector<registration::SupportShot> shots;
        for (int k = 0; k < bench.k_effective; ++k) {
            const LoadedScene& ls = bench.at(nc.support_scene_ids[static_cast<std::size_t>(k)]);
            shots.push_back({&ls.embedding, &ls.scene.labels});
        }
        spec.classes.emplace_back(nc.class_id, std::move(shots));
    }
    return spec;
}

struct StageEval {
    evaluation::MetricsReport report;
    nlohmann::json predictions;
    std::uint64_t ignored = 0;
    std::uint64_t total = 0;
};

StageEval evaluate_stage(const Bench& bench, const ClassifierMatrix& classifier, int stage,
                         const std::vector<ClassId>& base_ids,
                         const std::vector<ClassId>& novel_known, bool include_stage0) {
    std::vector<ClassId> known = base_ids;
    known.insert(known.end(), novel_known.begin(), novel_known.end());
    const std::set<ClassId> known_set(known.begin(), known.end());

    evaluation::ConfusionMatrix cm(known);
    nlohmann::json scenes = nlohmann::json::array();
    for (const LoadedScene& ls : bench.scenes) {
        if (ls.entry.role != "test") continue;
        const std::vector<ClassId> pred = registration::predict(ls.embedding, classifier);
        std::vector<ClassId> gt = ls.scene.labels;
        for (ClassId& g : gt)
            if (g != kBackgroundLabel && known_set.find(g) == known_set.end())
                g = kBackgroundLabel;
        cm.accumulate(gt, pred);
        scenes.push_back({{"id", ls.entry.id}, {"gt", gt}, {"pred", pred}});
    }

    StageEval out;
    out.report = evaluation::summarize(cm, base_ids, novel_known, stage);
    out.ignored = cm.ignored_points();
    out.total = cm.total_points();
    out.predictions = {{"format", "scope-predictions-v1"},
                       {"stage", stage},
                       {"base_classes", base_ids},
                       {"novel_classes", novel_known},
                       {"include_stage0_in_miou_i", include_stage0},
                       {"scenes", std::move(scenes)}};
    return out;
}

nlohmann::json hyperparams_json(const HyperParams& hp) {
    return {{"tau", hp.tau},
            {"top_r", hp.top_r},
            {"lambda", hp.lambda},
            {"bg_overlap", hp.bg_overlap},
            {"norm_epsilon", hp.norm_epsilon}};
}

nlohmann::json stage_json(const evaluation::MetricsReport& report, std::uint64_t ignored,
                          std::uint64_t total) {
    nlohmann::json classes(nlohmann::json::value_t::object);
    for (const auto& [class_id, value] : report.per_class_iou)
        classes[std::to_string(class_id)] = value;
    return {{"stage", report.stage}, {"miou", report.miou},
            {"miou_b", report.miou_b}, {"miou_n", report.miou_n},
            {"hm", report.hm},         {"per_class_iou", classes},
            {"ignored_points", ignored}, {"total_points", total}};
}

RunResult run_with(const Bench& bench, const PrototypeBank& bank, const RunConfig& config,
                   const std::filesystem::path& out_dir) {
    config.hp.validate();
    std::filesystem::create_directories(out_dir / "predictions");

    io::save_bank(bank, out_dir / "bank.ipbb");
    const std::uint64_t bank_sum = io::file_checksum(out_dir / "bank.ipbb");

    const std::vector<ClassId>& base_ids = bench.manifest.base_classes;
    ClassifierMatrix classifier = registration::base_classifier(base_shots(bench), base_ids);

    std::vector<evaluation::MetricsReport> reports;
    std::vector<StageEval> evals;
    evals.push_back(
        evaluate_stage(bench, classifier, 0, base_ids, {}, config.include_stage0));
    reports.push_back(evals.back().report);

    std::vector<ClassId> novel_known;
    const std::size_t total_stages = bench.manifest.schedule.stages.size();
    for (std::size_t t = 1; t <= total_stages; ++t) {
        const registration::StageSpec spec = make_stage_spec(bench, t);
        classifier = registration::register_stage(std::move(classifier), spec, bank, config.hp);
        for (const auto& [class_id, shots] : spec.classes) novel_known.push_back(class_id);
        evals.push_back(evaluate_stage(bench, classifier, static_cast<int>(t), base_ids,
                                       novel_known, config.include_stage0));
        reports.push_back(evals.back().report);
    }

    const evaluation::RunSummary summary =
        evaluation::finalize_run(reports, config.include_stage0);

    for (const StageEval& ev : evals) {
        const std::filesystem::path pred_path =
            out_dir / "predictions" /
            ("stage_" + std::to_string(ev.report.stage) + ".json");
        io::atomic_write(pred_path, ev.predictions.dump() + "\n");
    }

    io::atomic_write(out_dir / "metrics.csv", evaluation::reports_to_csv(reports));

    nlohmann::json stages = nlohmann::json::array();
    for (const StageEval& ev : evals) stages.push_back(stage_json(ev.report, ev.ignored, ev.total));
    const nlohmann::json summary_json = {
        {"format", "scope-summary-v1"},
        {"provider", bench.synthetic ? "synthetic" : "file"},
        {"seed", bench.seed},
        {"aggregation", config.aggregation},
        {"include_stage0_in_miou_i", config.include_stage0},
        {"hyperparams", hyperparams_json(config.hp)},
        {"k_shot", bench.k_effective},
        {"bank", {{"size", bank.size()}, {"checksum", checksum_string(bank_sum)}}},
        {"stages", stages},
        {"miou_i", summary.miou_i},
        {"fpp", summary.fpp}};
    io::atomic_write(out_dir / "summary.json", summary_json.dump(2) + "\n");

    nlohmann::json echo = {{"format", "scope-config-v1"},
                           {"manifest", config.manifest},
                           {"out", config.out},
                           {"provider", bench.synthetic ? "synthetic" : "file"},
                           {"seed", bench.seed},
                           {"aggregation", config.aggregation},
                           {"include_stage0_in_miou_i", config.include_stage0},
                           {"hyperparams", hyperparams_json(config.hp)},
                           {"k_shot", bench.k_effective}};
    if (config.bank) echo["bank"] = *config.bank;
    io::atomic_write(out_dir / "config.json", echo.dump(2) + "\n");

    RunResult result;
    result.summary = summary;
    result.out_dir = out_dir;
    result.bank_size = bank.size();
    result.bank_checksum = checksum_string(bank_sum);
    return result;
}

} // namespace

BuildIpbResult cmd_build_ipb(const RunConfig& config) {
    const Bench bench = load_bench(config);
    const std::filesystem::path out_dir = config.resolve(config.out);
    std::filesystem::create_directories(out_dir);

    BuildIpbResult result;
    for (const LoadedScene& ls : bench.scenes) {
        if (ls.entry.role != "base") continue;
        ++result.scenes;
        result.masks_seen += ls.masks.size();
        result.masks_kept +=
            context::filter_masks(ls.scene, ls.masks, criteria_of(config.hp)).size();
    }

    const PrototypeBank bank = make_bank(bench, config.hp);
    result.bank_size = bank.size();
    result.bank_file = out_dir / "bank.ipbb";
    io::save_bank(bank, result.bank_file);

    std::string log;
    log += "scenes processed: " + std::to_string(result.scenes) + "\n";
    log += "masks seen: " + std::to_string(result.masks_seen) + "\n";
    log += "masks retained: " + std::to_string(result.masks_kept) + "\n";
    log += "bank size: " + std::to_string(result.bank_size) + "\n";
    log += "tau: " + format_double(config.hp.tau) + "\n";
    log += "bg_overlap: " + format_double(config.hp.bg_overlap) + "\n";
    log += "bank file: bank.ipbb\n";
    log += "checksum: " + checksum_string(io::file_checksum(result.bank_file)) + "\n";
    io::atomic_write(out_dir / "build_ipb.log", log);
    return result;
}

RunResult cmd_run(const RunConfig& config) {
    const Bench bench = load_bench(config);
    const PrototypeBank bank = config.bank ? io::load_bank(config.resolve(*config.bank))
                                           : make_bank(bench, config.hp);
    return run_with(bench, bank, config, config.resolve(config.out));
}

SweepResult cmd_sweep(const RunConfig& config) {
    const std::size_t grid_size =
        config.sweep_tau.size() + config.sweep_top_r.size() + config.sweep_lambda.size();
    if (grid_size == 0)
        raise(Errc::bad_config, "sweep: empty grid (config has no sweep value lists)");

    const Bench bench = load_bench(config);
    const std::filesystem::path out_dir = config.resolve(config.out);
    std::filesystem::create_directories(out_dir / "banks");
    std::filesystem::create_directories(out_dir / "runs");

    // One bank build per distinct tau; each build is persisted once here and
    // re-saved identically inside every run directory that uses it.
    std::map<double, PrototypeBank> banks;
    const auto bank_for = [&](double tau, double bg_overlap) -> const PrototypeBank& {
        auto it = banks.find(tau);
        if (it == banks.end()) {
            HyperParams hp = config.hp;
            hp.tau = tau;
            hp.bg_overlap = bg_overlap;
            PrototypeBank bank = make_bank(bench, hp);
            const std::filesystem::path file =
                out_dir / "banks" / ("bank_tau_" + std::to_string(banks.size()) + ".ipbb");
            io::save_bank(bank, file);
            it = banks.emplace(tau, std::move(bank)).first;
        }
        return it->second;
    };

    SweepResult result;
    std::string csv = "param,value,stage,metric,score,error\n";
    const auto escape = [](std::string s) {
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += '"';
            out += c == '\n' ? ' ' : c;
        }
        out += "\"";
        return out;
    };

    const auto run_point = [&](const std::string& param, const std::string& value_str,
                               const RunConfig& point_config, std::size_t idx) {
        ++result.points;
        const std::filesystem::path point_dir =
            out_dir / "runs" / (param + "_" + std::to_string(idx));
        try {
            point_config.hp.validate();
            const PrototypeBank& bank =
                bank_for(point_config.hp.tau, point_config.hp.bg_overlap);
            const RunResult run = run_with(bench, bank, point_config, point_dir);
            for (const evaluation::MetricsReport& report : run.summary.per_stage) {
                const std::string prefix =
                    param + "," + value_str + "," + std::to_string(report.stage) + ",";
                csv += prefix + "miou," + format_double(report.miou) + ",\n";
                csv += prefix + "miou_b," + format_double(report.miou_b) + ",\n";
                csv += prefix + "miou_n," + format_double(report.miou_n) + ",\n";
                csv += prefix + "hm," + format_double(report.hm) + ",\n";
            }
            csv += param + "," + value_str + ",-1,miou_i," +
                   format_double(run.summary.miou_i) + ",\n";
            csv += param + "," + value_str + ",-1,fpp," + format_double(run.summary.fpp) +
                   ",\n";
        } catch (const Error& e) {
            ++result.failures;
            csv += param + "," + value_str + ",,,," + escape(e.what()) + "\n";
        }
    };

    for (std::size_t i = 0; i < config.sweep_tau.size(); ++i) {
        RunConfig point = config;
        point.hp.tau = config.sweep_tau[i];
        run_point("tau", format_double(config.sweep_tau[i]), point, i);
    }
    for (std::size_t i = 0; i < config.sweep_top_r.size(); ++i) {
        RunConfig point = config;
        point.hp.top_r = config.sweep_top_r[i];
        run_point("top_r", std::to_string(config.sweep_top_r[i]), point, i);
    }
    for (std::size_t i = 0; i < config.sweep_lambda.size(); ++i) {
        RunConfig point = config;
        point.hp.lambda = config.sweep_lambda[i];
        run_point("lambda", format_double(config.sweep_lambda[i]), point, i);
    }

    result.csv_file = out_dir / "sweep.csv";
    io::atomic_write(result.csv_file, csv);
    return result;
}

std::filesystem::path cmd_synth(const SynthConfig& config) {
    const provider::SynthWorld world = provider::synth_generate(config.params);
    const std::filesystem::path out_dir(config.out);
    std::filesystem::create_directories(out_dir / "scenes");
    std::filesystem::create_directories(out_dir / "masks");
    std::filesystem::create_directories(out_dir / "embeddings");

    std::map<std::string, std::string> checksums;
    const auto record = [&](const std::string& rel) {
        checksums[rel] = checksum_string(io::file_checksum(out_dir / rel));
    };

    nlohmann::json scenes = nlohmann::json::array();
    for (const provider::SceneBundle& bundle : world.bundles) {
        const std::string& id = bundle.scene.scene_id;
        nlohmann::json entry = {{"id", id}, {"role", bundle.role}};

        const std::string scene_rel = "scenes/" + id + ".scnb";
        io::save_scene(bundle.scene, out_dir / scene_rel);
        record(scene_rel);
        entry["scene"] = scene_rel;

        PointCloudScene hidden = bundle.scene;
        hidden.labels = bundle.hidden_labels;
        const std::string hidden_rel = "scenes/" + id + ".hidden.scnb";
        io::save_scene(hidden, out_dir / hidden_rel);
        record(hidden_rel);
        entry["hidden"] = hidden_rel;

        if (bundle.role == "base") {
            const std::string masks_rel = "masks/" + id + ".mskb";
            io::save_masks(bundle.masks, bundle.scene.point_count, out_dir / masks_rel);
            record(masks_rel);
            entry["masks"] = masks_rel;
        }

        const std::string emb_rel = "embeddings/" + id + ".embb";
        io::save_embedding(bundle.embedding, out_dir / emb_rel);
        record(emb_rel);
        entry["embedding"] = emb_rel;

        scenes.push_back(std::move(entry));
    }

    nlohmann::json means(nlohmann::json::value_t::object);
    for (const auto& [class_id, mean] : world.world.class_means)
        means[std::to_string(class_id)] = mean;
    const nlohmann::json oracle = {{"format", "scope-oracle-v1"},
                                   {"embed_dim", world.world.embed_dim},
                                   {"noise_sigma", world.world.noise_sigma},
                                   {"seed", config.params.seed},
                                   {"clutter_class", world.clutter_id},
                                   {"class_means", means}};
    io::atomic_write(out_dir / "oracle.json", oracle.dump(2) + "\n");
    record("oracle.json");

    nlohmann::json stages = nlohmann::json::array();
    for (std::size_t t = 0; t < world.schedule.stages.size(); ++t) {
        nlohmann::json classes = nlohmann::json::array();
        for (const StageSchedule::NovelClass& nc : world.schedule.stages[t].classes)
            classes.push_back(
                {{"class_id", nc.class_id}, {"supports", nc.support_scene_ids}});
        stages.push_back({{"stage", t + 1}, {"classes", classes}});
    }

    const nlohmann::json manifest = {
        {"format", "scope-manifest-v1"},
        {"seed", config.params.seed},
        {"provider",
         {{"mode", "synthetic"},
          {"embed_dim", world.world.embed_dim},
          {"noise_sigma", world.world.noise_sigma},
          {"oracle", "oracle.json"}}},
        {"base_classes", world.base_ids},
        {"novel_classes", world.novel_ids},
        {"clutter_class", world.clutter_id},
        {"planted_instances", world.planted_instances},
        {"schedule", {{"k", config.params.k_shot}, {"stages", stages}}},
        {"scenes", scenes},
        {"checksums", checksums}};
    const std::filesystem::path manifest_path = out_dir / "manifest.json";
    io::atomic_write(manifest_path, manifest.dump(2) + "\n");
    return manifest_path;
}

EvalResult cmd_eval(const std::filesystem::path& run_dir,
                    const std::filesystem::path& out_dir) {
    const std::filesystem::path pred_dir = run_dir / "predictions";
    if (!std::filesystem::is_directory(pred_dir))
        raise(Errc::bad_config, pred_dir.string() + ": no predictions directory");

    std::vector<evaluation::MetricsReport> reports;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> counts;
    bool include_stage0 = true;
    for (int stage = 0;; ++stage) {
        const std::filesystem::path path =
            pred_dir / ("stage_" + std::to_string(stage) + ".json");
        if (!std::filesystem::exists(path)) break;
        const nlohmann::json j = parse_json_file(path);
        try {
            if (j.value("format", std::string()) != "scope-predictions-v1")
                raise(Errc::bad_config, path.string() + ": not a predictions file");
            const auto base = j.at("base_classes").get<std::vector<ClassId>>();
            const auto novel = j.at("novel_classes").get<std::vector<ClassId>>();
            include_stage0 = j.value("include_stage0_in_miou_i", true);

            std::vector<ClassId> known = base;
            known.insert(known.end(), novel.begin(), novel.end());
            evaluation::ConfusionMatrix cm(known);
            for (const auto& scene : j.at("scenes")) {
                const auto gt = scene.at("gt").get<std::vector<ClassId>>();
                const auto pred = scene.at("pred").get<std::vector<ClassId>>();
                cm.accumulate(gt, pred);
            }
            reports.push_back(evaluation::summarize(cm, base, novel, stage));
            counts.emplace_back(cm.ignored_points(), cm.total_points());
        } catch (const nlohmann::json::exception& e) {
            raise(Errc::bad_config, path.string() + ": " + e.what());
        }
    }
    if (reports.empty()) raise(Errc::empty_run, pred_dir.string() + ": no stage files");

    const evaluation::RunSummary summary = evaluation::finalize_run(reports, include_stage0);

    std::filesystem::create_directories(out_dir);
    io::atomic_write(out_dir / "metrics.csv", evaluation::reports_to_csv(reports));
    nlohmann::json stages = nlohmann::json::array();
    for (std::size_t t = 0; t < reports.size(); ++t)
        stages.push_back(stage_json(reports[t], counts[t].first, counts[t].second));
    const nlohmann::json summary_json = {{"format", "scope-eval-v1"},
                                         {"source_run", run_dir.string()},
                                         {"include_stage0_in_miou_i", include_stage0},
                                         {"stages", stages},
                                         {"miou_i", summary.miou_i},
                                         {"fpp", summary.fpp}};
    io::atomic_write(out_dir / "summary.json", summary_json.dump(2) + "\n");

    EvalResult result;
    result.summary = summary;
    result.out_dir = out_dir;
    return result;
}

} // namespace scope::runner
