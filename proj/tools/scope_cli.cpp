#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "scope/error.hpp"
#include "scope/runner.hpp"

namespace {

struct Flags {
    std::string config;
    double tau = 0.0;
    int top_r = 0;
    double lambda = 0.0;
    int k_shot = 0;
    std::uint64_t seed = 0;
    std::string out;
};

void add_run_flags(CLI::App* cmd, Flags& f, bool config_required) {
    auto* config = cmd->add_option("--config", f.config, "JSON config file");
    if (config_required) config->required();
    cmd->add_option("--tau", f.tau, "mask confidence threshold override");
    cmd->add_option("--top-r", f.top_r, "retrieval depth override");
    cmd->add_option("--lambda", f.lambda, "enrichment blend weight override");
    cmd->add_option("--k-shot", f.k_shot, "supports per novel class override");
    cmd->add_option("--seed", f.seed, "seed override");
    cmd->add_option("--out", f.out, "output directory override");
}

bool passed(const CLI::App* cmd, const std::string& name) {
    const CLI::Option* opt = cmd->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
}

scope::runner::CliOverrides overrides_of(const CLI::App* cmd, const Flags& f) {
    scope::runner::CliOverrides ov;
    if (passed(cmd, "--tau")) ov.tau = f.tau;
    if (passed(cmd, "--top-r")) ov.top_r = f.top_r;
    if (passed(cmd, "--lambda")) ov.lambda = f.lambda;
    if (passed(cmd, "--k-shot")) ov.k_shot = f.k_shot;
    if (passed(cmd, "--seed")) ov.seed = f.seed;
    if (passed(cmd, "--out")) ov.out = std::filesystem::absolute(f.out).string();
    return ov;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SCOPE: incremental few-shot 3D segmentation"};
    app.require_subcommand(1);

    Flags build_flags;
    auto* build = app.add_subcommand(
        "build-ipb", "mine background pseudo-instances into a frozen prototype bank");
    add_run_flags(build, build_flags, true);

    Flags run_flags;
    auto* run = app.add_subcommand("run", "execute a full staged run");
    add_run_flags(run, run_flags, true);

    Flags sweep_flags;
    auto* sweep =
        app.add_subcommand("sweep", "run once per value in the config's sweep lists");
    add_run_flags(sweep, sweep_flags, true);

    Flags synth_flags;
    auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark directory");
    synth->add_option("--config", synth_flags.config, "JSON synth config file");
    synth->add_option("--seed", synth_flags.seed, "seed override");
    synth->add_option("--k-shot", synth_flags.k_shot, "supports per novel class override");
    synth->add_option("--out", synth_flags.out, "output directory override");

    std::string eval_run_dir;
    std::string eval_out;
    auto* eval =
        app.add_subcommand("eval", "recompute metrics from a run's saved predictions");
    eval->add_option("run_dir", eval_run_dir, "run directory holding predictions/")
        ->required();
    eval->add_option("--out", eval_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(build)) {
            const auto config = scope::runner::load_run_config(
                build_flags.config, overrides_of(build, build_flags));
            const auto result = scope::runner::cmd_build_ipb(config);
            std::printf("scenes: %zu\nmasks seen: %zu\nmasks retained: %zu\n"
                        "bank size: %zu\nbank file: %s\n",
                        result.scenes, result.masks_seen, result.masks_kept,
                        result.bank_size, result.bank_file.string().c_str());
        } else if (app.got_subcommand(run)) {
            const auto config = scope::runner::load_run_config(
                run_flags.config, overrides_of(run, run_flags));
            const auto result = scope::runner::cmd_run(config);
            std::printf("stages: %zu\nbank size: %zu\nbank checksum: %s\n"
                        "miou_i: %.9g\nfpp: %.9g\nout: %s\n",
                        result.summary.per_stage.size(), result.bank_size,
                        result.bank_checksum.c_str(), result.summary.miou_i,
                        result.summary.fpp, result.out_dir.string().c_str());
        } else if (app.got_subcommand(sweep)) {
            const auto config = scope::runner::load_run_config(
                sweep_flags.config, overrides_of(sweep, sweep_flags));
            const auto result = scope::runner::cmd_sweep(config);
            std::printf("points: %zu\nfailures: %zu\ncsv: %s\n", result.points,
                        result.failures, result.csv_file.string().c_str());
        } else if (app.got_subcommand(synth)) {
            const std::filesystem::path config_path = synth_flags.config;
            const auto config = scope::runner::load_synth_config(
                synth_flags.config.empty() ? nullptr : &config_path,
                overrides_of(synth, synth_flags));
            const auto manifest = scope::runner::cmd_synth(config);
            std::printf("manifest: %s\n", manifest.string().c_str());
        } else if (app.got_subcommand(eval)) {
            const auto result = scope::runner::cmd_eval(
                eval_run_dir, std::filesystem::absolute(eval_out));
            std::printf("stages: %zu\nmiou_i: %.9g\nfpp: %.9g\nout: %s\n",
                        result.summary.per_stage.size(), result.summary.miou_i,
                        result.summary.fpp, result.out_dir.string().c_str());
        }
        return 0;
    } catch (const scope::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.code() == scope::Errc::frozen_bank ? 3 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 3;
    }
}
