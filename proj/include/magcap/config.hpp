// Run configuration: a single INI-style file with six fixed sections,
// strict unknown-key rejection, canonical serialization, and a stable
// fingerprint so runs and checkpoints can be matched to their settings.
#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <magcap/controllers.hpp>
#include <magcap/env.hpp>
#include <magcap/sac.hpp>
#include <magcap/tracking.hpp>

namespace magcap {

/// Geometry and rigid-body constants, kept as scalars so they can live in a
/// flat config section; world() assembles the simulator description.
struct PhysicsSettings {
    double coil_side = 0.060;         ///< [m] coil square side length
    double coil_plane_offset = 0.020; ///< [m] coil plane above the capsule
    double coil_gain = 0.05;          ///< [A m^2 / A] moment per ampere
    double max_current = 1.0;         ///< [A]
    double magnet_moment = 0.02;      ///< [A m^2] capsule dipole strength
    Vec3 mass = Vec3(3.0e-3, 4.0e-3, 4.0e-7);
    Vec3 damping_linear = Vec3(1.2e-2, 1.2e-2, 8.0e-7);
    Vec3 damping_quadratic = Vec3(0.12, 0.16, 1.0e-5);
    int substeps = 640;

    PhysicsWorld world() const {
        PhysicsWorld w;
        w.coils = CoilArrayConfig::square_array(coil_side, coil_plane_offset,
                                                coil_gain, max_current);
        w.magnet.moment = magnet_moment;
        w.fossen.mass = mass;
        w.fossen.d_lin = damping_linear;
        w.fossen.d_quad = damping_quadratic;
        w.integration.substeps = substeps;
        return w;
    }

    void validate() const { world().validate(); }
};

/// Benchmark trajectory settings. Relative waypoint paths resolve against
/// the directory of the config file they were loaded from.
struct TrackingConfig {
    double square_side = 0.040;   ///< [m]
    double square_speed = 0.005;  ///< [m/s]
    double circle_radius = 0.020; ///< [m]
    double circle_speed = 0.005;  ///< [m/s]
    double longpath_speed = 0.008; ///< [m/s]
    std::string longpath_file = "longpath.txt";
    int trials = 5;

    void validate() const {
        if (square_side <= 0.0)
            throw ConfigError("square_side must be positive",
                              "tracking.square_side");
        if (circle_radius <= 0.0)
            throw ConfigError("circle_radius must be positive",
                              "tracking.circle_radius");
        if (square_speed <= 0.0 || circle_speed <= 0.0 ||
            longpath_speed <= 0.0)
            throw ConfigError("reference speeds must be positive",
                              "tracking.speed");
        if (longpath_file.empty())
            throw ConfigError("longpath_file must be set",
                              "tracking.longpath_file");
        if (trials < 1)
            throw ConfigError("trials must be >= 1", "tracking.trials");
    }
};

/// Everything a run needs: simulator constants, environment and reward
/// settings, the real-plant perturbation, learner hyperparameters, baseline
/// controller settings, and the benchmark trajectories.
struct FullConfig {
    PhysicsSettings physics;
    EnvConfig env;
    RealPerturbation real;
    SacConfig sac;
    int train_steps = 50000;
    int finetune_steps = 20000;
    ControllersConfig controllers;
    TrackingConfig tracking;

    /// Directory of the file this config was loaded from; empty for
    /// in-memory configs. Not a config key and not fingerprinted.
    std::string base_dir;

    void validate() const {
        physics.validate();
        env.validate();
        sac.validate();
        controllers.validate();
        tracking.validate();
        if (real.kappa_scale <= 0.0)
            throw ConfigError("real_kappa_scale must be positive",
                              "environment.real_kappa_scale");
        if (real.damping_scale <= 0.0)
            throw ConfigError("real_damping_scale must be positive",
                              "environment.real_damping_scale");
        if (real.latency_steps < 0)
            throw ConfigError("real_latency_steps must be non-negative",
                              "environment.real_latency_steps");
        if (real.pos_noise_std < 0.0 || real.heading_noise_std < 0.0)
            throw ConfigError("real sensing noise must be non-negative",
                              "environment.real_noise");
        if (train_steps < 0)
            throw ConfigError("train_steps must be non-negative",
                              "sac.train_steps");
        if (finetune_steps < 0)
            throw ConfigError("finetune_steps must be non-negative",
                              "sac.finetune_steps");
    }

    PhysicsWorld world() const { return physics.world(); }

    /// Environment exactly as configured: per-episode domain randomization
    /// and sensing noise active. This is the training plant.
    CapsuleEnv make_training_env() const {
        return CapsuleEnv(world(), env);
    }

    /// Nominal physics with sensing noise retained and no latency: the
    /// reproducible evaluation plant for controller comparisons.
    CapsuleEnv make_evaluation_env() const {
        EnvConfig e = env;
        e.randomization.kappa_range = Vec2(1.0, 1.0);
        e.randomization.damping_range = Vec2(1.0, 1.0);
        e.randomization.latency_steps = 0;
        return CapsuleEnv(world(), e);
    }

    /// Perturbed stand-in for the physical plant.
    CapsuleEnv make_real_environment() const {
        return make_real_env(world(), env, real);
    }

    TrajectorySpec square_path() const {
        return TrajectorySpec::square(tracking.square_side,
                                      tracking.square_speed);
    }

    TrajectorySpec circle_path() const {
        return TrajectorySpec::circle(tracking.circle_radius,
                                      tracking.circle_speed);
    }

    /// Loads the waypoint file, resolving a relative path against base_dir.
    TrajectorySpec longpath() const {
        std::filesystem::path p(tracking.longpath_file);
        if (p.is_relative() && !base_dir.empty())
            p = std::filesystem::path(base_dir) / p;
        return TrajectorySpec::polyline(load_waypoints(p.string()),
                                        tracking.longpath_speed);
    }
};

namespace detail {

inline std::string cfg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string cfg_vec(const Vec2& v) {
    return cfg_num(v[0]) + " " + cfg_num(v[1]);
}

inline std::string cfg_vec(const Vec3& v) {
    return cfg_num(v[0]) + " " + cfg_num(v[1]) + " " + cfg_num(v[2]);
}

inline std::string cfg_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(v[i]);
    }
    return out;
}

inline std::string cfg_trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

/// One key/value assignment under a section, carrying its source line for
/// error messages. Typed getters consume the raw text strictly: trailing
/// characters after a number are errors, not silently ignored.
struct ConfigValue {
    std::string section;
    std::string key;
    std::string raw;
    int line = 0;

    std::string id() const { return section + "." + key; }

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError(what + " for " + id() + " on line " +
                              std::to_string(line) + ": '" + raw + "'",
                          id());
    }

    double as_double() const {
        std::istringstream in(raw);
        double v;
        if (!(in >> v) || !(in >> std::ws).eof()) fail("expected a number");
        return v;
    }

    int as_int() const {
        std::istringstream in(raw);
        long long v;
        if (!(in >> v) || !(in >> std::ws).eof())
            fail("expected an integer");
        return static_cast<int>(v);
    }

    bool as_bool() const {
        if (raw == "true") return true;
        if (raw == "false") return false;
        fail("expected 'true' or 'false'");
    }

    Vec2 as_vec2() const {
        std::istringstream in(raw);
        Vec2 v;
        if (!(in >> v[0] >> v[1]) || !(in >> std::ws).eof())
            fail("expected two numbers");
        return v;
    }

    Vec3 as_vec3() const {
        std::istringstream in(raw);
        Vec3 v;
        if (!(in >> v[0] >> v[1] >> v[2]) || !(in >> std::ws).eof())
            fail("expected three numbers");
        return v;
    }

    std::vector<int> as_ints() const {
        std::istringstream in(raw);
        std::vector<int> v;
        int x;
        while (in >> x) v.push_back(x);
        if (!(in >> std::ws).eof() || v.empty())
            fail("expected a list of integers");
        return v;
    }

    std::string as_string() const {
        if (raw.empty()) fail("expected a value");
        return raw;
    }
};

inline bool apply_physics(FullConfig& c, const ConfigValue& v) {
    PhysicsSettings& p = c.physics;
    if (v.key == "coil_side") p.coil_side = v.as_double();
    else if (v.key == "coil_plane_offset") p.coil_plane_offset = v.as_double();
    else if (v.key == "coil_gain") p.coil_gain = v.as_double();
    else if (v.key == "max_current") p.max_current = v.as_double();
    else if (v.key == "magnet_moment") p.magnet_moment = v.as_double();
    else if (v.key == "mass") p.mass = v.as_vec3();
    else if (v.key == "damping_linear") p.damping_linear = v.as_vec3();
    else if (v.key == "damping_quadratic") p.damping_quadratic = v.as_vec3();
    else if (v.key == "substeps") p.substeps = v.as_int();
    else return false;
    return true;
}

inline bool apply_environment(FullConfig& c, const ConfigValue& v) {
    EnvConfig& e = c.env;
    RandomizationSpec& r = e.randomization;
    if (v.key == "dt") e.dt = v.as_double();
    else if (v.key == "max_steps") e.max_steps = v.as_int();
    else if (v.key == "workspace_bound") e.workspace_bound = v.as_double();
    else if (v.key == "start_bound") e.start_bound = v.as_double();
    else if (v.key == "pos_scale") e.pos_scale = v.as_double();
    else if (v.key == "vel_scale") e.vel_scale = v.as_double();
    else if (v.key == "omega_scale") e.omega_scale = v.as_double();
    else if (v.key == "kappa_range") r.kappa_range = v.as_vec2();
    else if (v.key == "damping_range") r.damping_range = v.as_vec2();
    else if (v.key == "pos_noise_std") r.pos_noise_std = v.as_double();
    else if (v.key == "heading_noise_std")
        r.heading_noise_std = v.as_double();
    else if (v.key == "latency_steps") r.latency_steps = v.as_int();
    else if (v.key == "real_kappa_scale") c.real.kappa_scale = v.as_double();
    else if (v.key == "real_damping_scale")
        c.real.damping_scale = v.as_double();
    else if (v.key == "real_latency_steps")
        c.real.latency_steps = v.as_int();
    else if (v.key == "real_pos_noise_std")
        c.real.pos_noise_std = v.as_double();
    else if (v.key == "real_heading_noise_std")
        c.real.heading_noise_std = v.as_double();
    else return false;
    return true;
}

inline bool apply_reward(FullConfig& c, const ConfigValue& v) {
    RewardWeights& w = c.env.reward;
    if (v.key == "w_dist") w.w_dist = v.as_double();
    else if (v.key == "w_dir") w.w_dir = v.as_double();
    else if (v.key == "w_prog") w.w_prog = v.as_double();
    else if (v.key == "w_prox") w.w_prox = v.as_double();
    else if (v.key == "w_stab") w.w_stab = v.as_double();
    else if (v.key == "w_lazy") w.w_lazy = v.as_double();
    else if (v.key == "w_smooth") w.w_smooth = v.as_double();
    else if (v.key == "w_energy") w.w_energy = v.as_double();
    else if (v.key == "w_theta") w.w_theta = v.as_double();
    else if (v.key == "r_terminal") w.r_terminal = v.as_double();
    else if (v.key == "d_near") w.d_near = v.as_double();
    else if (v.key == "v_eps") w.v_eps = v.as_double();
    else if (v.key == "v_min") w.v_min = v.as_double();
    else if (v.key == "k_hold") w.k_hold = v.as_int();
    else return false;
    return true;
}

inline bool apply_sac(FullConfig& c, const ConfigValue& v) {
    SacConfig& s = c.sac;
    if (v.key == "gamma") s.gamma = v.as_double();
    else if (v.key == "lr_sim") s.lr_sim = v.as_double();
    else if (v.key == "lr_real") s.lr_real = v.as_double();
    else if (v.key == "batch") s.batch = v.as_int();
    else if (v.key == "buffer_capacity") s.buffer_capacity = v.as_int();
    else if (v.key == "warmup") s.warmup = v.as_int();
    else if (v.key == "finetune_warmup") s.finetune_warmup = v.as_int();
    else if (v.key == "retain_buffer") s.retain_buffer = v.as_bool();
    else if (v.key == "rho") s.rho = v.as_double();
    else if (v.key == "target_entropy") s.target_entropy = v.as_double();
    else if (v.key == "updates_per_step") s.updates_per_step = v.as_int();
    else if (v.key == "hidden") s.hidden = v.as_ints();
    else if (v.key == "init_alpha") s.init_alpha = v.as_double();
    else if (v.key == "eval_interval") s.eval_interval = v.as_int();
    else if (v.key == "eval_episodes") s.eval_episodes = v.as_int();
    else if (v.key == "train_steps") c.train_steps = v.as_int();
    else if (v.key == "finetune_steps") c.finetune_steps = v.as_int();
    else return false;
    return true;
}

inline bool apply_controllers(FullConfig& c, const ConfigValue& v) {
    ControllersConfig& k = c.controllers;
    if (v.key == "kp") k.pid.kp = v.as_double();
    else if (v.key == "ki") k.pid.ki = v.as_double();
    else if (v.key == "kd") k.pid.kd = v.as_double();
    else if (v.key == "integral_limit") k.pid.integral_limit = v.as_double();
    else if (v.key == "force_limit") k.pid.force_limit = v.as_double();
    else if (v.key == "allocation_regularization")
        k.allocation_regularization = v.as_double();
    else if (v.key == "fcc_hold_steps") k.fcc_hold_steps = v.as_int();
    else if (v.key == "recenter_radius")
        k.supervisor.recenter_radius = v.as_double();
    else if (v.key == "deadband") k.supervisor.deadband = v.as_double();
    else if (v.key == "array_speed_limit")
        k.supervisor.array_speed_limit = v.as_double();
    else return false;
    return true;
}

inline bool apply_tracking(FullConfig& c, const ConfigValue& v) {
    TrackingConfig& t = c.tracking;
    if (v.key == "square_side") t.square_side = v.as_double();
    else if (v.key == "square_speed") t.square_speed = v.as_double();
    else if (v.key == "circle_radius") t.circle_radius = v.as_double();
    else if (v.key == "circle_speed") t.circle_speed = v.as_double();
    else if (v.key == "longpath_speed") t.longpath_speed = v.as_double();
    else if (v.key == "longpath_file") t.longpath_file = v.as_string();
    else if (v.key == "trials") t.trials = v.as_int();
    else return false;
    return true;
}

} // namespace detail

/// Parses config text. Unknown sections, unknown keys, duplicate keys, and
/// malformed values are all hard errors naming the offending "section.key".
/// The parsed config is validated before it is returned.
inline FullConfig parse_config(const std::string& text) {
    FullConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::vector<std::string> seen;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::cfg_trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("unterminated section header on line " +
                                      std::to_string(line_no),
                                  line);
            section = detail::cfg_trim(line.substr(1, line.size() - 2));
            if (section != "physics" && section != "environment" &&
                section != "reward" && section != "sac" &&
                section != "controllers" && section != "tracking")
                throw ConfigError("unknown section [" + section +
                                      "] on line " + std::to_string(line_no),
                                  section);
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected 'key = value' on line " +
                                  std::to_string(line_no) + ": '" + line +
                                  "'",
                              section);
        detail::ConfigValue v;
        v.section = section;
        v.key = detail::cfg_trim(line.substr(0, eq));
        v.raw = detail::cfg_trim(line.substr(eq + 1));
        v.line = line_no;
        if (section.empty())
            throw ConfigError("key '" + v.key + "' before any section (line " +
                                  std::to_string(line_no) + ")",
                              v.key);
        if (v.key.empty())
            throw ConfigError("empty key on line " + std::to_string(line_no),
                              section);
        for (const std::string& s : seen)
            if (s == v.id())
                throw ConfigError("duplicate key " + v.id() + " on line " +
                                      std::to_string(line_no),
                                  v.id());
        seen.push_back(v.id());

        bool known = false;
        if (section == "physics") known = detail::apply_physics(cfg, v);
        else if (section == "environment")
            known = detail::apply_environment(cfg, v);
        else if (section == "reward") known = detail::apply_reward(cfg, v);
        else if (section == "sac") known = detail::apply_sac(cfg, v);
        else if (section == "controllers")
            known = detail::apply_controllers(cfg, v);
        else if (section == "tracking")
            known = detail::apply_tracking(cfg, v);
        if (!known)
            throw ConfigError("unknown key " + v.id() + " on line " +
                                  std::to_string(line_no),
                              v.id());
    }
    cfg.validate();
    return cfg;
}

/// Loads and parses a config file; relative waypoint paths later resolve
/// against the file's directory.
inline FullConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    FullConfig cfg = parse_config(buf.str());
    cfg.base_dir = std::filesystem::path(path).parent_path().string();
    return cfg;
}

/// Serializes every key in a fixed order with full precision. Parsing the
/// result reproduces the config exactly; the fingerprint hashes this string.
inline std::string canonical_config(const FullConfig& c) {
    using detail::cfg_num;
    std::ostringstream o;
    o << "[physics]\n"
      << "coil_side = " << cfg_num(c.physics.coil_side) << "\n"
      << "coil_plane_offset = " << cfg_num(c.physics.coil_plane_offset)
      << "\n"
      << "coil_gain = " << cfg_num(c.physics.coil_gain) << "\n"
      << "max_current = " << cfg_num(c.physics.max_current) << "\n"
      << "magnet_moment = " << cfg_num(c.physics.magnet_moment) << "\n"
      << "mass = " << detail::cfg_vec(c.physics.mass) << "\n"
      << "damping_linear = " << detail::cfg_vec(c.physics.damping_linear)
      << "\n"
      << "damping_quadratic = "
      << detail::cfg_vec(c.physics.damping_quadratic) << "\n"
      << "substeps = " << c.physics.substeps << "\n";
    o << "[environment]\n"
      << "dt = " << cfg_num(c.env.dt) << "\n"
      << "max_steps = " << c.env.max_steps << "\n"
      << "workspace_bound = " << cfg_num(c.env.workspace_bound) << "\n"
      << "start_bound = " << cfg_num(c.env.start_bound) << "\n"
      << "pos_scale = " << cfg_num(c.env.pos_scale) << "\n"
      << "vel_scale = " << cfg_num(c.env.vel_scale) << "\n"
      << "omega_scale = " << cfg_num(c.env.omega_scale) << "\n"
      << "kappa_range = " << detail::cfg_vec(c.env.randomization.kappa_range)
      << "\n"
      << "damping_range = "
      << detail::cfg_vec(c.env.randomization.damping_range) << "\n"
      << "pos_noise_std = " << cfg_num(c.env.randomization.pos_noise_std)
      << "\n"
      << "heading_noise_std = "
      << cfg_num(c.env.randomization.heading_noise_std) << "\n"
      << "latency_steps = " << c.env.randomization.latency_steps << "\n"
      << "real_kappa_scale = " << cfg_num(c.real.kappa_scale) << "\n"
      << "real_damping_scale = " << cfg_num(c.real.damping_scale) << "\n"
      << "real_latency_steps = " << c.real.latency_steps << "\n"
      << "real_pos_noise_std = " << cfg_num(c.real.pos_noise_std) << "\n"
      << "real_heading_noise_std = " << cfg_num(c.real.heading_noise_std)
      << "\n";
    o << "[reward]\n"
      << "w_dist = " << cfg_num(c.env.reward.w_dist) << "\n"
      << "w_dir = " << cfg_num(c.env.reward.w_dir) << "\n"
      << "w_prog = " << cfg_num(c.env.reward.w_prog) << "\n"
      << "w_prox = " << cfg_num(c.env.reward.w_prox) << "\n"
      << "w_stab = " << cfg_num(c.env.reward.w_stab) << "\n"
      << "w_lazy = " << cfg_num(c.env.reward.w_lazy) << "\n"
      << "w_smooth = " << cfg_num(c.env.reward.w_smooth) << "\n"
      << "w_energy = " << cfg_num(c.env.reward.w_energy) << "\n"
      << "w_theta = " << cfg_num(c.env.reward.w_theta) << "\n"
      << "r_terminal = " << cfg_num(c.env.reward.r_terminal) << "\n"
      << "d_near = " << cfg_num(c.env.reward.d_near) << "\n"
      << "v_eps = " << cfg_num(c.env.reward.v_eps) << "\n"
      << "v_min = " << cfg_num(c.env.reward.v_min) << "\n"
      << "k_hold = " << c.env.reward.k_hold << "\n";
    o << "[sac]\n"
      << "gamma = " << cfg_num(c.sac.gamma) << "\n"
      << "lr_sim = " << cfg_num(c.sac.lr_sim) << "\n"
      << "lr_real = " << cfg_num(c.sac.lr_real) << "\n"
      << "batch = " << c.sac.batch << "\n"
      << "buffer_capacity = " << c.sac.buffer_capacity << "\n"
      << "warmup = " << c.sac.warmup << "\n"
      << "finetune_warmup = " << c.sac.finetune_warmup << "\n"
      << "retain_buffer = " << (c.sac.retain_buffer ? "true" : "false")
      << "\n"
      << "rho = " << cfg_num(c.sac.rho) << "\n"
      << "target_entropy = " << cfg_num(c.sac.target_entropy) << "\n"
      << "updates_per_step = " << c.sac.updates_per_step << "\n"
      << "hidden = " << detail::cfg_ints(c.sac.hidden) << "\n"
      << "init_alpha = " << cfg_num(c.sac.init_alpha) << "\n"
      << "eval_interval = " << c.sac.eval_interval << "\n"
      << "eval_episodes = " << c.sac.eval_episodes << "\n"
      << "train_steps = " << c.train_steps << "\n"
      << "finetune_steps = " << c.finetune_steps << "\n";
    o << "[controllers]\n"
      << "kp = " << cfg_num(c.controllers.pid.kp) << "\n"
      << "ki = " << cfg_num(c.controllers.pid.ki) << "\n"
      << "kd = " << cfg_num(c.controllers.pid.kd) << "\n"
      << "integral_limit = " << cfg_num(c.controllers.pid.integral_limit)
      << "\n"
      << "force_limit = " << cfg_num(c.controllers.pid.force_limit) << "\n"
      << "allocation_regularization = "
      << cfg_num(c.controllers.allocation_regularization) << "\n"
      << "fcc_hold_steps = " << c.controllers.fcc_hold_steps << "\n"
      << "recenter_radius = "
      << cfg_num(c.controllers.supervisor.recenter_radius) << "\n"
      << "deadband = " << cfg_num(c.controllers.supervisor.deadband) << "\n"
      << "array_speed_limit = "
      << cfg_num(c.controllers.supervisor.array_speed_limit) << "\n";
    o << "[tracking]\n"
      << "square_side = " << cfg_num(c.tracking.square_side) << "\n"
      << "square_speed = " << cfg_num(c.tracking.square_speed) << "\n"
      << "circle_radius = " << cfg_num(c.tracking.circle_radius) << "\n"
      << "circle_speed = " << cfg_num(c.tracking.circle_speed) << "\n"
      << "longpath_speed = " << cfg_num(c.tracking.longpath_speed) << "\n"
      << "longpath_file = " << c.tracking.longpath_file << "\n"
      << "trials = " << c.tracking.trials << "\n";
    return o.str();
}

/// Stable identity of a configuration: equal settings give equal
/// fingerprints regardless of file formatting or where the file lives.
inline std::uint64_t config_fingerprint(const FullConfig& c) {
    return fnv1a64(canonical_config(c));
}

} // namespace magcap
