// End-to-end tests for the command-line tool: exit codes, artifacts,
// manifests, and byte-level reproducibility.
#include <gtest/gtest.h>
#include <json.hpp>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "magcap/cli.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string kCli = MAGCAP_CLI;
const std::string kDefaultConfig =
    std::string(MAGCAP_REPO_DIR) + "/configs/default.cfg";

/// Fresh per-test scratch directory under the system temp root.
fs::path make_scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "magcap_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    EXPECT_TRUE(in.good()) << "missing file: " << path;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

/// Run a full shell command, capturing stdout/stderr and the exit code.
RunResult run_shell(const std::string& cmd, const fs::path& scratch) {
    const fs::path out = scratch / "stdout.txt";
    const fs::path err = scratch / "stderr.txt";
    const std::string full =
        cmd + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(full.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

RunResult run_cli(const std::string& args, const fs::path& scratch) {
    return run_shell(kCli + " " + args, scratch);
}

/// A trimmed config that keeps evaluation trials short.
fs::path write_fast_config(const fs::path& scratch) {
    const fs::path path = scratch / "fast.cfg";
    std::ofstream os(path);
    os << "[tracking]\n"
          "square_side = 0.020\n"
          "square_speed = 0.010\n"
          "trials = 1\n";
    return path;
}

struct FieldRow {
    double x, y, bx, by, bz, grad;
};

std::vector<FieldRow> read_field_map(const fs::path& path) {
    std::ifstream in(path);
    EXPECT_TRUE(in.good()) << "missing field map: " << path;
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "x,y,Bx,By,Bz,grad_norm");
    std::vector<FieldRow> rows;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        FieldRow r{};
        char comma;
        ss >> r.x >> comma >> r.y >> comma >> r.bx >> comma >> r.by >>
            comma >> r.bz >> comma >> r.grad;
        EXPECT_FALSE(ss.fail()) << "bad row: " << line;
        rows.push_back(r);
    }
    return rows;
}

}  // namespace

TEST(Manifest, RoundTripsLosslessly) {
    const fs::path dir = make_scratch("manifest_roundtrip");
    std::ofstream(dir / "a.csv") << "x\n";
    std::ofstream(dir / "b.bin") << "y";

    magcap::RunManifest m;
    m.command = "eval";
    m.config_canonical = "[sac]\ngamma = 0.92\n";
    m.config_fingerprint = 0x0123456789abcdefULL;
    m.root_seed = 42;
    m.derived_seeds["trial|square"] = {1, 2, 3};
    m.derived_seeds["fcc-hold"] = {99};
    m.artifacts["curve"] = "a.csv";
    m.artifacts["checkpoint"] = "b.bin";
    m.started_utc = "2026-01-02T03:04:05Z";
    m.finished_utc = "2026-01-02T03:09:59Z";

    magcap::write_manifest(m, dir.string());
    const magcap::RunManifest back =
        magcap::load_manifest((dir / "manifest.json").string());
    EXPECT_TRUE(m == back);
}

TEST(Manifest, RefusesToReferenceAMissingArtifact) {
    const fs::path dir = make_scratch("manifest_missing");
    magcap::RunManifest m;
    m.command = "train";
    m.artifacts["checkpoint"] = "ghost.bin";
    EXPECT_THROW(magcap::write_manifest(m, dir.string()), magcap::IoError);
}

TEST(Train, MissingConfigExitsWithIoCodeNamingThePath) {
    const fs::path dir = make_scratch("train_missing_config");
    const RunResult r =
        run_cli("train --config /no/such/file.cfg --out " +
                    (dir / "out").string(),
                dir);
    EXPECT_EQ(r.exit_code, magcap::kExitIo);
    EXPECT_NE(r.err.find("/no/such/file.cfg"), std::string::npos) << r.err;
}

TEST(Train, StepsZeroWritesALoadableUntrainedCheckpoint) {
    const fs::path dir = make_scratch("train_steps_zero");
    const RunResult r = run_cli("train --config " + kDefaultConfig +
                                    " --steps 0 --seed 7 --out " +
                                    (dir / "out").string(),
                                dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;

    magcap::FullConfig cfg;
    const magcap::SacAgent agent = magcap::load_checkpoint(
        (dir / "out" / "checkpoint.bin").string(), cfg.sac);
    EXPECT_EQ(agent.steps_trained(), 0);
    EXPECT_EQ(slurp(dir / "out" / "curve.csv"),
              "step,eval_return,alpha,critic_loss,actor_loss\n");

    const magcap::RunManifest m =
        magcap::load_manifest((dir / "out" / "manifest.json").string());
    EXPECT_EQ(m.command, "train");
    EXPECT_EQ(m.root_seed, 7u);
    EXPECT_EQ(m.config_fingerprint, magcap::config_fingerprint(cfg));
    for (const auto& [name, rel] : m.artifacts)
        EXPECT_TRUE(fs::exists(dir / "out" / rel)) << name << " -> " << rel;
}

TEST(Train, SameSeedProducesByteIdenticalArtifacts) {
    const fs::path dir = make_scratch("train_rerun");
    for (const char* sub : {"a", "b"}) {
        const RunResult r = run_cli("train --config " + kDefaultConfig +
                                        " --steps 0 --seed 11 --out " +
                                        (dir / sub).string(),
                                    dir);
        ASSERT_EQ(r.exit_code, 0) << r.err;
    }
    EXPECT_EQ(slurp(dir / "a" / "checkpoint.bin"),
              slurp(dir / "b" / "checkpoint.bin"));
    EXPECT_EQ(slurp(dir / "a" / "curve.csv"), slurp(dir / "b" / "curve.csv"));
}

TEST(Finetune, MissingCheckpointExitsWithIoCode) {
    const fs::path dir = make_scratch("finetune_missing_ckpt");
    const RunResult r = run_cli("finetune --config " + kDefaultConfig +
                                    " --checkpoint /no/such/ck.bin --out " +
                                    (dir / "out").string(),
                                dir);
    EXPECT_EQ(r.exit_code, magcap::kExitIo);
    EXPECT_NE(r.err.find("/no/such/ck.bin"), std::string::npos) << r.err;
}

TEST(Finetune, IncompatibleCheckpointExitsWithDistinctCode) {
    const fs::path dir = make_scratch("finetune_incompatible");
    magcap::SacConfig other;
    other.hidden = {32, 32};
    magcap::RngStream rng(1);
    const magcap::SacAgent agent(8, 4, other, rng);
    const fs::path ckpt = dir / "other.bin";
    magcap::save_checkpoint(agent, ckpt.string());

    const RunResult r = run_cli("finetune --config " + kDefaultConfig +
                                    " --checkpoint " + ckpt.string() +
                                    " --out " + (dir / "out").string(),
                                dir);
    EXPECT_EQ(r.exit_code, magcap::kExitIncompatible);
    EXPECT_NE(r.err.find("fingerprint"), std::string::npos) << r.err;
}

TEST(Eval, SingleTrialEmitsReportAndManifest) {
    const fs::path dir = make_scratch("eval_single");
    const fs::path cfg = write_fast_config(dir);
    const RunResult r = run_cli("eval --config " + cfg.string() +
                                    " --controllers pid --paths square"
                                    " --trials 1 --seed 3 --out " +
                                    (dir / "out").string(),
                                dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;

    const json comparison =
        json::parse(slurp(dir / "out" / "comparison.json"));
    ASSERT_EQ(comparison["entries"].size(), 1u);
    EXPECT_EQ(comparison["entries"][0]["controller"], "pid");
    EXPECT_EQ(comparison["entries"][0]["trajectory"], "square");

    EXPECT_EQ(slurp(dir / "out" / "table.txt").rfind("plant: nominal", 0),
              0u);
    EXPECT_TRUE(fs::exists(dir / "out" / "trials" / "pid_square_0.csv"));
    EXPECT_TRUE(fs::exists(dir / "out" / "trials" / "pid_square_0.json"));

    const magcap::RunManifest m =
        magcap::load_manifest((dir / "out" / "manifest.json").string());
    EXPECT_EQ(m.command, "eval");
    ASSERT_EQ(m.derived_seeds.count("trial|square"), 1u);
    EXPECT_EQ(m.derived_seeds.at("trial|square").size(), 1u);
    for (const auto& [name, rel] : m.artifacts)
        EXPECT_TRUE(fs::exists(dir / "out" / rel)) << name << " -> " << rel;
}

TEST(Eval, RerunsAndWorkerCountsAreByteIdentical) {
    const fs::path dir = make_scratch("eval_rerun");
    const fs::path cfg = write_fast_config(dir);
    const std::string common = "eval --config " + cfg.string() +
                               " --controllers pid,zero --paths square"
                               " --trials 2 --seed 5 --out ";
    for (const auto& [sub, jobs] :
         std::vector<std::pair<std::string, std::string>>{
             {"a", "1"}, {"b", "1"}, {"c", "3"}}) {
        const RunResult r =
            run_cli(common + (dir / sub).string() + " --jobs " + jobs, dir);
        ASSERT_EQ(r.exit_code, 0) << r.err;
    }
    const std::string base = slurp(dir / "a" / "comparison.json");
    EXPECT_EQ(base, slurp(dir / "b" / "comparison.json"));
    EXPECT_EQ(base, slurp(dir / "c" / "comparison.json"));
    for (const char* stem :
         {"pid_square_0", "pid_square_1", "zero_square_0", "zero_square_1"}) {
        const std::string rel = std::string("trials/") + stem + ".csv";
        EXPECT_EQ(slurp(dir / "a" / rel), slurp(dir / "c" / rel)) << rel;
    }
}

TEST(Eval, UnknownPlantIsAConfigError) {
    const fs::path dir = make_scratch("eval_bad_plant");
    const fs::path cfg = write_fast_config(dir);
    const RunResult r = run_cli("eval --config " + cfg.string() +
                                    " --controllers pid --plant mars --out " +
                                    (dir / "out").string(),
                                dir);
    EXPECT_EQ(r.exit_code, magcap::kExitConfig);
    EXPECT_NE(r.err.find("mars"), std::string::npos) << r.err;
}

TEST(Eval, DrlWithoutCheckpointIsAConfigError) {
    const fs::path dir = make_scratch("eval_no_ckpt");
    const fs::path cfg = write_fast_config(dir);
    const RunResult r = run_cli("eval --config " + cfg.string() +
                                    " --controllers drl --out " +
                                    (dir / "out").string(),
                                dir);
    EXPECT_EQ(r.exit_code, magcap::kExitConfig);
    EXPECT_NE(r.err.find("--checkpoint"), std::string::npos) << r.err;
}

TEST(FieldMap, TwoByTwoGridHasFourRowsAndAHeader) {
    const fs::path dir = make_scratch("fieldmap_2x2");
    const RunResult r = run_cli("field-map --config " + kDefaultConfig +
                                    " --grid 2 --out " +
                                    (dir / "out").string(),
                                dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto rows = read_field_map(dir / "out" / "field_map.csv");
    EXPECT_EQ(rows.size(), 4u);
}

TEST(FieldMap, ZeroCurrentsGiveExactlyZeroColumns) {
    const fs::path dir = make_scratch("fieldmap_zero");
    const RunResult r = run_cli("field-map --config " + kDefaultConfig +
                                    " --grid 3 --currents 0 0 0 0 --out " +
                                    (dir / "out").string(),
                                dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    for (const FieldRow& row : read_field_map(dir / "out" / "field_map.csv")) {
        EXPECT_EQ(row.bx, 0.0);
        EXPECT_EQ(row.by, 0.0);
        EXPECT_EQ(row.bz, 0.0);
        EXPECT_EQ(row.grad, 0.0);
    }
}

TEST(FieldMap, EqualCurrentsRespectTheArraySymmetries) {
    const fs::path dir = make_scratch("fieldmap_symmetry");
    const RunResult r = run_cli("field-map --config " + kDefaultConfig +
                                    " --grid 5 --extent 0.03 --out " +
                                    (dir / "out").string(),
                                dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto rows = read_field_map(dir / "out" / "field_map.csv");
    ASSERT_EQ(rows.size(), 25u);
    const auto find = [&](double x, double y) -> const FieldRow& {
        for (const FieldRow& row : rows)
            if (std::abs(row.x - x) < 1e-15 && std::abs(row.y - y) < 1e-15)
                return row;
        ADD_FAILURE() << "no row at (" << x << ", " << y << ")";
        return rows.front();
    };
    const double tol = 1e-12;
    for (const FieldRow& row : rows) {
        const FieldRow& mx = find(-row.x, row.y);
        EXPECT_NEAR(mx.bx, -row.bx, tol);
        EXPECT_NEAR(mx.by, row.by, tol);
        EXPECT_NEAR(mx.bz, row.bz, tol);
        EXPECT_NEAR(mx.grad, row.grad, tol);
        const FieldRow& my = find(row.x, -row.y);
        EXPECT_NEAR(my.bx, row.bx, tol);
        EXPECT_NEAR(my.by, -row.by, tol);
        EXPECT_NEAR(my.bz, row.bz, tol);
        const FieldRow& swapped = find(row.y, row.x);
        EXPECT_NEAR(swapped.bx, row.by, tol);
        EXPECT_NEAR(swapped.by, row.bx, tol);
        EXPECT_NEAR(swapped.bz, row.bz, tol);
    }
}

TEST(FieldMap, CoilPlaneInsideTheGuardIsRejectedAtLoad) {
    const fs::path dir = make_scratch("fieldmap_singular");
    const fs::path cfg = dir / "low_plane.cfg";
    std::ofstream(cfg) << "[physics]\ncoil_plane_offset = 0.0005\n";
    const RunResult r = run_cli("field-map --config " + cfg.string() +
                                    " --grid 3 --extent 0.03 --out " +
                                    (dir / "out").string(),
                                dir);
    EXPECT_EQ(r.exit_code, magcap::kExitConfig);
    EXPECT_NE(r.err.find("clear of the capsule plane"), std::string::npos)
        << r.err;
}

TEST(FieldMap, ExtentBeyondTheWorkspaceIsRejected) {
    const fs::path dir = make_scratch("fieldmap_extent");
    const RunResult r = run_cli("field-map --config " + kDefaultConfig +
                                    " --grid 3 --extent 0.2 --out " +
                                    (dir / "out").string(),
                                dir);
    EXPECT_EQ(r.exit_code, magcap::kExitConfig);
    EXPECT_NE(r.err.find("field-map.extent"), std::string::npos) << r.err;
}

TEST(OutRoot, EnvironmentVariableSetsTheDefaultOutputRoot) {
    const fs::path dir = make_scratch("out_root_env");
    const fs::path root = dir / "runs_root";
    const RunResult r = run_shell("MAGCAP_OUT_ROOT=" + root.string() + " " +
                                      kCli + " train --config " +
                                      kDefaultConfig + " --steps 0 --seed 7",
                                  dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_TRUE(fs::exists(root / "train-seed7" / "checkpoint.bin"));
    EXPECT_TRUE(fs::exists(root / "train-seed7" / "manifest.json"));
}
