// Command orchestration: run manifests, artifact writers, controller
// assembly from names, and the train/finetune/eval/field-map entry points
// shared by the command-line binary and its tests.
#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <magcap/config.hpp>

namespace magcap {

// Exit codes, one per documented failure class.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;        ///< bad settings or flags
inline constexpr int kExitIo = 3;            ///< missing/unwritable files
inline constexpr int kExitDivergence = 4;    ///< physics or policy failure
inline constexpr int kExitIncompatible = 5;  ///< checkpoint/config mismatch
inline constexpr int kExitTotalFailure = 6;  ///< every evaluation trial died

/// Wall-clock stamp in UTC, ISO 8601. Lives only in manifests so that all
/// other artifacts stay byte-identical across reruns.
inline std::string iso8601_utc_now() {
    const std::time_t now =
        std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Record of one command invocation: the full config snapshot, the seeds
/// that were derived from the root, and every artifact the run produced.
struct RunManifest {
    std::string command;
    std::string tool_version = kVersion;
    std::string config_canonical;
    std::uint64_t config_fingerprint = 0;
    std::uint64_t root_seed = 0;
    std::string seed_scheme =
        "split_seed(root, label, index); trials of one trajectory share "
        "seeds across controllers";
    std::map<std::string, std::vector<std::uint64_t>> derived_seeds;
    std::map<std::string, std::string> artifacts;  ///< name -> relative path
    std::string started_utc;
    std::string finished_utc;

    bool operator==(const RunManifest&) const = default;
};

inline nlohmann::ordered_json manifest_to_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["tool"] = "magcap";
    j["version"] = m.tool_version;
    j["command"] = m.command;
    char fp[32];
    std::snprintf(fp, sizeof fp, "0x%016llx",
                  static_cast<unsigned long long>(m.config_fingerprint));
    j["config_fingerprint"] = fp;
    j["root_seed"] = m.root_seed;
    j["seed_scheme"] = m.seed_scheme;
    j["derived_seeds"] = m.derived_seeds;
    j["artifacts"] = m.artifacts;
    j["started_utc"] = m.started_utc;
    j["finished_utc"] = m.finished_utc;
    j["config"] = m.config_canonical;
    return j;
}

inline RunManifest manifest_from_json(const nlohmann::ordered_json& j) {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.tool_version = j.at("version").get<std::string>();
    m.config_canonical = j.at("config").get<std::string>();
    m.config_fingerprint = std::stoull(
        j.at("config_fingerprint").get<std::string>(), nullptr, 16);
    m.root_seed = j.at("root_seed").get<std::uint64_t>();
    m.seed_scheme = j.at("seed_scheme").get<std::string>();
    m.derived_seeds =
        j.at("derived_seeds")
            .get<std::map<std::string, std::vector<std::uint64_t>>>();
    m.artifacts =
        j.at("artifacts").get<std::map<std::string, std::string>>();
    m.started_utc = j.at("started_utc").get<std::string>();
    m.finished_utc = j.at("finished_utc").get<std::string>();
    return m;
}

/// Writes the manifest next to its artifacts after checking that every
/// referenced artifact actually exists.
inline void write_manifest(const RunManifest& m, const std::string& dir) {
    for (const auto& [name, rel] : m.artifacts) {
        const std::filesystem::path p = std::filesystem::path(dir) / rel;
        if (!std::filesystem::exists(p))
            throw IoError("manifest references a missing artifact '" + name +
                          "': " + p.string());
    }
    const std::string path =
        (std::filesystem::path(dir) / "manifest.json").string();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path);
    out << manifest_to_json(m).dump(2) << "\n";
    if (!out) throw IoError("manifest write failed: " + path);
}

inline RunManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest " + path + ": " + e.what());
    }
    return manifest_from_json(j);
}

/// Output directory resolution: an explicit --out wins; otherwise runs go
/// under $MAGCAP_OUT_ROOT (default "runs"), named by command and seed.
inline std::string resolve_out_dir(const std::string& explicit_out,
                                   const std::string& command,
                                   std::uint64_t seed) {
    if (!explicit_out.empty()) return explicit_out;
    const char* root = std::getenv("MAGCAP_OUT_ROOT");
    const std::string base = (root && *root) ? root : "runs";
    return base + "/" + command + "-seed" + std::to_string(seed);
}

inline void write_learning_curve_csv(const std::vector<LearningCurveRow>& c,
                                     const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write learning curve: " + path);
    os << "step,eval_return,alpha,critic_loss,actor_loss\n";
    for (const LearningCurveRow& r : c)
        os << r.step << ',' << detail::json_num(r.eval_return) << ','
           << detail::json_num(r.alpha) << ','
           << detail::json_num(r.critic_loss) << ','
           << detail::json_num(r.actor_loss) << "\n";
    if (!os) throw IoError("learning curve write failed: " + path);
}

/// Builds the named benchmark controllers. `fcc` and `drl` need the trained
/// agent; `fcc` measures its hold currents on the nominal evaluation plant.
/// `zero` is the no-current stub used for plumbing checks.
inline std::vector<ControllerSpec> build_controller_specs(
    const std::vector<std::string>& names, const FullConfig& cfg,
    const SacAgent* agent, std::uint64_t root_seed) {
    std::vector<ControllerSpec> out;
    for (const std::string& name : names) {
        ControllerSpec spec;
        spec.name = name;
        if (name == "pid") {
            spec.angle_tracked = false;
            spec.closed_path_mode = ArrayMode::kStatic;
            spec.open_path_mode = ArrayMode::kSupervisor;
            const PidGains gains = cfg.controllers.pid;
            const double dt = cfg.env.dt;
            const double reg = cfg.controllers.allocation_regularization;
            spec.make = [gains, dt, reg]() {
                return make_pid_trial_controller(gains, dt, reg);
            };
        } else if (name == "zero") {
            spec.angle_tracked = false;
            spec.closed_path_mode = ArrayMode::kStatic;
            spec.open_path_mode = ArrayMode::kSupervisor;
            spec.make = []() {
                return [](CapsuleEnv&, const ReferencePoint&) {
                    return CurrentCommand();
                };
            };
        } else if (name == "drl") {
            if (agent == nullptr)
                throw ConfigError(
                    "controller 'drl' needs --checkpoint", "eval.controllers");
            spec.angle_tracked = true;
            spec.closed_path_mode = ArrayMode::kStatic;
            spec.open_path_mode = ArrayMode::kSupervisor;
            const SacAgent agent_copy = *agent;
            const double imax = cfg.physics.max_current;
            spec.make = [agent_copy, imax]() {
                return make_drl_trial_controller(agent_copy, imax);
            };
        } else if (name == "fcc") {
            if (agent == nullptr)
                throw ConfigError(
                    "controller 'fcc' needs --checkpoint", "eval.controllers");
            spec.angle_tracked = true;
            spec.closed_path_mode = ArrayMode::kFollowReference;
            spec.open_path_mode = ArrayMode::kFollowReference;
            const CapsuleEnv rig = cfg.make_evaluation_env();
            const CurrentCommand hold = measure_hold_currents(
                *agent, rig, cfg.controllers.fcc_hold_steps,
                split_seed(root_seed, "fcc-hold"));
            spec.make = [hold]() { return make_fcc_trial_controller(hold); };
        } else {
            throw ConfigError("unknown controller '" + name +
                                  "' (expected fcc, pid, drl, or zero)",
                              "eval.controllers");
        }
        out.push_back(std::move(spec));
    }
    return out;
}

/// Builds the named benchmark trajectories from the tracking section.
inline std::vector<TrajectorySpec> build_path_specs(
    const std::vector<std::string>& names, const FullConfig& cfg) {
    std::vector<TrajectorySpec> out;
    for (const std::string& name : names) {
        if (name == "square") out.push_back(cfg.square_path());
        else if (name == "circle") out.push_back(cfg.circle_path());
        else if (name == "longpath") out.push_back(cfg.longpath());
        else
            throw ConfigError("unknown path '" + name +
                                  "' (expected square, circle, or longpath)",
                              "eval.paths");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Commands. Each returns a documented exit code; errors propagate as typed
// exceptions that the binary maps onto the remaining codes.

struct TrainOptions {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::int64_t steps = -1;  ///< <0: use train_steps from the config
};

inline int cmd_train(const TrainOptions& opt) {
    FullConfig cfg = load_config(opt.config_path);
    cfg.sac.seed = opt.seed;
    const std::int64_t steps =
        opt.steps >= 0 ? opt.steps : cfg.train_steps;
    const std::string dir = resolve_out_dir(opt.out_dir, "train", opt.seed);
    std::filesystem::create_directories(dir);

    RunManifest m;
    m.command = "train";
    m.config_canonical = canonical_config(cfg);
    m.config_fingerprint = config_fingerprint(cfg);
    m.root_seed = opt.seed;
    m.derived_seeds["init"] = {split_seed(opt.seed, "init")};
    m.started_utc = iso8601_utc_now();

    CapsuleEnv env = cfg.make_training_env();
    std::vector<LearningCurveRow> curve;
    if (steps == 0) {
        RngStream init(split_seed(cfg.sac.seed, "init"));
        SacAgent agent(env.obs_dim(), env.act_dim(), cfg.sac, init);
        save_checkpoint(agent, dir + "/checkpoint.bin");
    } else {
        auto [trainer, rows] = train(env, cfg.sac, steps);
        curve = std::move(rows);
        save_checkpoint(trainer.agent(), dir + "/checkpoint.bin");
    }
    write_learning_curve_csv(curve, dir + "/curve.csv");

    m.artifacts["checkpoint"] = "checkpoint.bin";
    m.artifacts["learning_curve"] = "curve.csv";
    m.finished_utc = iso8601_utc_now();
    write_manifest(m, dir);
    std::printf("trained %lld steps -> %s\n",
                static_cast<long long>(steps), dir.c_str());
    return kExitOk;
}

struct FinetuneOptions {
    std::string config_path;
    std::string checkpoint;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::int64_t steps = -1;  ///< <0: use finetune_steps from the config
};

namespace detail {

inline void write_entry_stats(std::ostream& os, const ComparisonEntry& e) {
    os << "{\"trials\": " << e.trials << ", \"diverged\": " << e.diverged
       << ", \"dist\": ";
    write_stats_json(os, e.dist);
    os << ", \"angle\": ";
    write_stats_json(os, e.angle);
    os << "}";
}

}  // namespace detail

inline int cmd_finetune(const FinetuneOptions& opt) {
    FullConfig cfg = load_config(opt.config_path);
    cfg.sac.seed = opt.seed;
    const std::int64_t steps =
        opt.steps >= 0 ? opt.steps : cfg.finetune_steps;
    const std::string dir =
        resolve_out_dir(opt.out_dir, "finetune", opt.seed);
    std::filesystem::create_directories(dir);

    SacAgent agent = load_checkpoint(opt.checkpoint, cfg.sac);

    RunManifest m;
    m.command = "finetune";
    m.config_canonical = canonical_config(cfg);
    m.config_fingerprint = config_fingerprint(cfg);
    m.root_seed = opt.seed;
    m.derived_seeds["finetune"] = {split_seed(opt.seed, "finetune")};
    m.derived_seeds["report-eval"] = {split_seed(opt.seed, "report-eval")};
    m.started_utc = iso8601_utc_now();

    // Before/after tracking quality on the perturbed plant, seed-matched so
    // the difference isolates the policy change.
    const CapsuleEnv real_proto = cfg.make_real_environment();
    const std::uint64_t eval_seed = split_seed(opt.seed, "report-eval");
    const std::vector<TrajectorySpec> square = {cfg.square_path()};
    const auto eval_agent = [&](const SacAgent& a) {
        const std::vector<ControllerSpec> drl =
            build_controller_specs({"drl"}, cfg, &a, opt.seed);
        return run_comparison(drl, square, cfg.tracking.trials, eval_seed,
                              real_proto);
    };
    const ComparisonTable before = eval_agent(agent);

    CapsuleEnv real_env = cfg.make_real_environment();
    SacTrainer trainer(std::move(agent));
    const std::vector<LearningCurveRow> curve =
        finetune(trainer, real_env, steps, split_seed(opt.seed, "finetune"));
    const ComparisonTable after = eval_agent(trainer.agent());

    save_checkpoint(trainer.agent(), dir + "/checkpoint.bin");
    write_learning_curve_csv(curve, dir + "/curve.csv");
    {
        const std::string path = dir + "/report.json";
        std::ofstream os(path);
        if (!os) throw IoError("cannot write report: " + path);
        os << "{\n  \"plant\": \"real\",\n  \"trajectory\": \"square\",\n"
           << "  \"finetune_steps\": " << steps << ",\n  \"before\": ";
        detail::write_entry_stats(os, before.entries.front());
        os << ",\n  \"after\": ";
        detail::write_entry_stats(os, after.entries.front());
        os << "\n}\n";
        if (!os) throw IoError("report write failed: " + path);
    }

    m.artifacts["checkpoint"] = "checkpoint.bin";
    m.artifacts["learning_curve"] = "curve.csv";
    m.artifacts["report"] = "report.json";
    m.finished_utc = iso8601_utc_now();
    write_manifest(m, dir);
    std::printf(
        "finetuned %lld steps; square dist rmse %.3f mm -> %.3f mm (%s)\n",
        static_cast<long long>(steps),
        before.entries.front().dist.rmse * 1e3,
        after.entries.front().dist.rmse * 1e3, dir.c_str());
    return kExitOk;
}

struct EvalOptions {
    std::string config_path;
    std::string checkpoint;  ///< required when controllers include fcc/drl
    std::string out_dir;
    std::uint64_t seed = 0;
    int trials = -1;  ///< <0: use trials from the config
    std::vector<std::string> controllers = {"fcc", "pid", "drl"};
    std::vector<std::string> paths = {"square", "circle"};
    std::string plant = "nominal";  ///< "nominal" or "real"
    int jobs = 1;
};

inline int cmd_eval(const EvalOptions& opt) {
    FullConfig cfg = load_config(opt.config_path);
    const int trials = opt.trials > 0 ? opt.trials : cfg.tracking.trials;
    if (opt.plant != "nominal" && opt.plant != "real")
        throw ConfigError("unknown plant '" + opt.plant +
                              "' (expected nominal or real)",
                          "eval.plant");
    const std::string dir = resolve_out_dir(opt.out_dir, "eval", opt.seed);
    std::filesystem::create_directories(dir);
    std::filesystem::create_directories(dir + "/trials");

    std::optional<SacAgent> agent;
    bool needs_agent = false;
    for (const std::string& c : opt.controllers)
        needs_agent = needs_agent || c == "fcc" || c == "drl";
    if (needs_agent) {
        if (opt.checkpoint.empty())
            throw ConfigError("fcc/drl evaluation needs --checkpoint",
                              "eval.controllers");
        agent.emplace(load_checkpoint(opt.checkpoint, cfg.sac));
    }

    RunManifest m;
    m.command = "eval";
    m.config_canonical = canonical_config(cfg);
    m.config_fingerprint = config_fingerprint(cfg);
    m.root_seed = opt.seed;
    m.started_utc = iso8601_utc_now();

    const std::vector<TrajectorySpec> specs =
        build_path_specs(opt.paths, cfg);
    std::vector<ControllerSpec> ctrls;
    try {
        ctrls = build_controller_specs(
            opt.controllers, cfg, agent ? &*agent : nullptr, opt.seed);
    } catch (const MeasurementError& e) {
        std::fprintf(stderr,
                     "hold-current measurement failed: %s\n", e.what());
        return kExitDivergence;
    }
    for (const TrajectorySpec& s : specs) {
        std::vector<std::uint64_t>& seeds = m.derived_seeds["trial|" + s.name];
        for (int i = 0; i < trials; ++i)
            seeds.push_back(split_seed(opt.seed, "trial|" + s.name,
                                       static_cast<std::uint64_t>(i)));
    }

    const CapsuleEnv proto = opt.plant == "real"
                                 ? cfg.make_real_environment()
                                 : cfg.make_evaluation_env();
    TrialOptions topt;
    topt.supervisor = cfg.controllers.supervisor;
    const ComparisonTable table = run_comparison(
        ctrls, specs, trials, opt.seed, proto, topt, opt.jobs);

    write_comparison_json(table, dir + "/comparison.json");
    m.artifacts["comparison"] = "comparison.json";
    {
        const std::string path = dir + "/table.txt";
        std::ofstream os(path);
        if (!os) throw IoError("cannot write table: " + path);
        os << "plant: " << opt.plant << "\n" << comparison_to_text(table);
        if (!os) throw IoError("table write failed: " + path);
        m.artifacts["table"] = "table.txt";
    }
    int total = 0;
    int diverged = 0;
    for (const ComparisonEntry& e : table.entries) {
        for (std::size_t i = 0; i < e.reports.size(); ++i) {
            const TrackingReport& rep = e.reports[i];
            const std::string stem = "trials/" + e.controller + "_" +
                                     e.trajectory + "_" + std::to_string(i);
            write_series_csv(rep, dir + "/" + stem + ".csv");
            write_report_json(rep, dir + "/" + stem + ".json");
            m.artifacts[stem + ".csv"] = stem + ".csv";
            m.artifacts[stem + ".json"] = stem + ".json";
            ++total;
            diverged += rep.diverged ? 1 : 0;
        }
    }
    m.finished_utc = iso8601_utc_now();
    write_manifest(m, dir);
    std::printf("%s", comparison_to_text(table).c_str());
    std::printf("wrote %d trial reports -> %s\n", total, dir.c_str());
    return diverged == total ? kExitTotalFailure : kExitOk;
}

struct FieldMapOptions {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    int grid = 21;          ///< points per axis
    double extent = -1.0;   ///< [m] half-extent; <0: workspace bound
    Vec4 currents = Vec4::Ones();
};

inline int cmd_field_map(const FieldMapOptions& opt) {
    const FullConfig cfg = load_config(opt.config_path);
    const PhysicsWorld world = cfg.world();
    const double extent =
        opt.extent >= 0.0 ? opt.extent : cfg.env.workspace_bound;
    if (opt.grid < 2)
        throw ConfigError("grid needs at least 2 points per axis",
                          "field-map.grid");
    if (extent > cfg.env.workspace_bound)
        throw ConfigError("grid extent exceeds the workspace bound",
                          "field-map.extent");
    const std::string dir =
        resolve_out_dir(opt.out_dir, "field-map", opt.seed);
    std::filesystem::create_directories(dir);

    RunManifest m;
    m.command = "field-map";
    m.config_canonical = canonical_config(cfg);
    m.config_fingerprint = config_fingerprint(cfg);
    m.root_seed = opt.seed;
    m.started_utc = iso8601_utc_now();

    const CurrentCommand currents(opt.currents);
    const auto coord = [&](int i) {
        return -extent + 2.0 * extent * i / (opt.grid - 1);
    };
    // The capsule-plane grid must keep clear of every coil's singularity
    // guard sphere before any field is evaluated.
    for (int iy = 0; iy < opt.grid; ++iy)
        for (int ix = 0; ix < opt.grid; ++ix) {
            const Vec3 p(coord(ix), coord(iy), 0.0);
            for (const Vec3& c : world.coils.positions)
                if ((p - c).norm() < kMinDipoleDistance)
                    throw ConfigError(
                        "grid point (" + std::to_string(p.x()) + ", " +
                            std::to_string(p.y()) +
                            ") lies inside the singularity guard radius of "
                            "a coil; shrink the grid or raise the coil "
                            "plane",
                        "field-map.grid");
        }

    const std::string path = dir + "/field_map.csv";
    std::ofstream os(path);
    if (!os) throw IoError("cannot write field map: " + path);
    os << "x,y,Bx,By,Bz,grad_norm\n";
    for (int iy = 0; iy < opt.grid; ++iy) {
        for (int ix = 0; ix < opt.grid; ++ix) {
            const Vec3 p(coord(ix), coord(iy), 0.0);
            const Vec3 b =
                total_field(world.coils, Vec2::Zero(), currents, p);
            const Mat3 j =
                field_jacobian(world.coils, Vec2::Zero(), currents, p);
            os << detail::json_num(p.x()) << ',' << detail::json_num(p.y())
               << ',' << detail::json_num(b.x()) << ','
               << detail::json_num(b.y()) << ',' << detail::json_num(b.z())
               << ',' << detail::json_num(j.norm()) << "\n";
        }
    }
    if (!os) throw IoError("field map write failed: " + path);

    m.artifacts["field_map"] = "field_map.csv";
    m.finished_utc = iso8601_utc_now();
    write_manifest(m, dir);
    std::printf("wrote %dx%d field map -> %s\n", opt.grid, opt.grid,
                path.c_str());
    return kExitOk;
}

} // namespace magcap
