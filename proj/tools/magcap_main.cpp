// Command-line entry point: train / finetune / eval / field-map.
#include <CLI11.hpp>
#include <magcap/cli.hpp>

#include <cstdio>
#include <string>
#include <vector>

int main(int argc, char** argv) {
    CLI::App app{
        "magcap: desk-scale magnetic capsule simulator, trainer, and "
        "benchmark.\nExit codes: 0 ok, 2 config, 3 I/O, 4 divergence, "
        "5 incompatible checkpoint, 6 total evaluation failure.\nOutput "
        "root: --out, else $MAGCAP_OUT_ROOT (default ./runs)."};
    app.set_version_flag("--version", magcap::kVersion);
    app.require_subcommand(1);
    int jobs_ignored = 1;

    magcap::TrainOptions train_opt;
    CLI::App* train = app.add_subcommand(
        "train", "Train a policy on the randomized simulator");
    train->add_option("--config", train_opt.config_path, "Config file")
        ->required();
    train->add_option("--seed", train_opt.seed, "Root seed (default 0)");
    train->add_option("--out", train_opt.out_dir, "Output directory");
    train->add_option("--steps", train_opt.steps,
                      "Environment steps (default: train_steps from config)");
    train->add_option("--jobs", jobs_ignored,
                      "Accepted for interface uniformity; training is "
                      "single-threaded for reproducibility");

    magcap::FinetuneOptions ft_opt;
    CLI::App* ft = app.add_subcommand(
        "finetune", "Fine-tune a checkpoint on the perturbed real plant");
    ft->add_option("--config", ft_opt.config_path, "Config file")
        ->required();
    ft->add_option("--checkpoint", ft_opt.checkpoint,
                   "Pretrained checkpoint")
        ->required();
    ft->add_option("--seed", ft_opt.seed, "Root seed (default 0)");
    ft->add_option("--out", ft_opt.out_dir, "Output directory");
    ft->add_option("--steps", ft_opt.steps,
                   "Environment steps (default: finetune_steps from config)");
    ft->add_option("--jobs", jobs_ignored,
                   "Accepted for interface uniformity; fine-tuning is "
                   "single-threaded for reproducibility");

    magcap::EvalOptions ev_opt;
    CLI::App* ev = app.add_subcommand(
        "eval", "Run the controller comparison benchmark");
    ev->add_option("--config", ev_opt.config_path, "Config file")
        ->required();
    ev->add_option("--checkpoint", ev_opt.checkpoint,
                   "Checkpoint (required for fcc/drl)");
    ev->add_option("--seed", ev_opt.seed, "Root seed (default 0)");
    ev->add_option("--out", ev_opt.out_dir, "Output directory");
    ev->add_option("--trials", ev_opt.trials,
                   "Trials per controller+path (default: config)");
    ev->add_option("--controllers", ev_opt.controllers,
                   "Comma-separated: fcc,pid,drl,zero")
        ->delimiter(',');
    ev->add_option("--paths", ev_opt.paths,
                   "Comma-separated: square,circle,longpath")
        ->delimiter(',');
    ev->add_option("--plant", ev_opt.plant,
                   "Evaluation plant: nominal (default) or real");
    ev->add_option("--jobs", ev_opt.jobs, "Parallel trial workers");

    magcap::FieldMapOptions fm_opt;
    std::vector<double> fm_currents = {1.0, 1.0, 1.0, 1.0};
    CLI::App* fm = app.add_subcommand(
        "field-map", "Export the coil field over a capsule-plane grid");
    fm->add_option("--config", fm_opt.config_path, "Config file")
        ->required();
    fm->add_option("--seed", fm_opt.seed,
                   "Recorded in the manifest (the map is deterministic)");
    fm->add_option("--out", fm_opt.out_dir, "Output directory");
    fm->add_option("--grid", fm_opt.grid, "Points per axis (default 21)");
    fm->add_option("--extent", fm_opt.extent,
                   "Grid half-extent in meters (default: workspace bound)");
    fm->add_option("--currents", fm_currents, "Coil currents in amperes")
        ->expected(4);
    fm->add_option("--jobs", jobs_ignored,
                   "Accepted for interface uniformity");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : magcap::kExitConfig;
    }

    try {
        if (train->parsed()) return magcap::cmd_train(train_opt);
        if (ft->parsed()) return magcap::cmd_finetune(ft_opt);
        if (ev->parsed()) return magcap::cmd_eval(ev_opt);
        if (fm->parsed()) {
            for (int i = 0; i < 4; ++i)
                fm_opt.currents[i] = fm_currents[static_cast<std::size_t>(i)];
            return magcap::cmd_field_map(fm_opt);
        }
    } catch (const magcap::ConfigError& e) {
        if (e.key.empty())
            std::fprintf(stderr, "config error: %s\n", e.what());
        else
            std::fprintf(stderr, "config error [%s]: %s\n", e.key.c_str(),
                         e.what());
        return magcap::kExitConfig;
    } catch (const magcap::IncompatibleCheckpointError& e) {
        std::fprintf(stderr, "incompatible checkpoint: %s\n", e.what());
        return magcap::kExitIncompatible;
    } catch (const magcap::IoError& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return magcap::kExitIo;
    } catch (const magcap::IntegrationDivergedError& e) {
        std::fprintf(stderr, "physics diverged: %s\n", e.what());
        return magcap::kExitDivergence;
    } catch (const magcap::TrainingDivergedError& e) {
        std::fprintf(stderr, "training diverged: %s\n", e.what());
        return magcap::kExitDivergence;
    } catch (const magcap::SingularityError& e) {
        std::fprintf(stderr, "field singularity: %s\n", e.what());
        return magcap::kExitDivergence;
    } catch (const magcap::MeasurementError& e) {
        std::fprintf(stderr, "measurement failed: %s\n", e.what());
        return magcap::kExitDivergence;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return magcap::kExitOk;
}
