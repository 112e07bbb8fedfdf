// Baseline controllers: fixed-current hold, position PID with model-based
// current allocation, deterministic policy inference, and the array
// repositioning supervisor.
#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include <Eigen/SVD>

#include <magcap/env.hpp>
#include <magcap/sac.hpp>

namespace magcap {

/// Planar PID gains, shared by both axes, with anti-windup and output
/// saturation limits. Defaults come from the bundled grid-search tool
/// (`pid_search`), which minimizes square-path distance RMSE on the
/// nominal simulator with sensing noise retained.
struct PidGains {
    double kp = 0.032;              ///< [N/m]
    double ki = 0.0;                ///< [N/(m s)]
    double kd = 0.0015;             ///< [N s/m]
    double integral_limit = 0.02;   ///< [m s] clamp on |integral| per axis
    double force_limit = 2.0e-4;    ///< [N] clamp on |force| per axis

    void validate() const {
        if (kp < 0.0) throw ConfigError("kp must be nonnegative",
                                        "controllers.kp");
        if (ki < 0.0) throw ConfigError("ki must be nonnegative",
                                        "controllers.ki");
        if (kd < 0.0) throw ConfigError("kd must be nonnegative",
                                        "controllers.kd");
        if (!(integral_limit > 0.0))
            throw ConfigError("integral_limit must be positive",
                              "controllers.integral_limit");
        if (!(force_limit > 0.0))
            throw ConfigError("force_limit must be positive",
                              "controllers.force_limit");
    }
};

/// Array chase behaviour for workspaces larger than the coil footprint.
struct SupervisorConfig {
    double recenter_radius = 0.025;   ///< [m] distance that triggers a chase
    double deadband = 0.005;          ///< [m] chase stops inside this radius
    double array_speed_limit = 0.020; ///< [m/s] cap on array motion

    void validate() const {
        if (!(recenter_radius > 0.0))
            throw ConfigError("recenter_radius must be positive",
                              "controllers.recenter_radius");
        if (deadband < 0.0)
            throw ConfigError("deadband must be nonnegative",
                              "controllers.deadband");
        if (!(deadband < recenter_radius))
            throw ConfigError("deadband must be smaller than recenter_radius",
                              "controllers.deadband");
        if (!(array_speed_limit > 0.0))
            throw ConfigError("array_speed_limit must be positive",
                              "controllers.array_speed_limit");
    }
};

/// Settings for the whole controller family, mirrored in the config file.
struct ControllersConfig {
    PidGains pid;
    SupervisorConfig supervisor;
    double allocation_regularization = 1.0e-6;  ///< relative to sigma_max
    int fcc_hold_steps = 100;                   ///< averaging window [steps]

    void validate() const {
        pid.validate();
        supervisor.validate();
        if (!(allocation_regularization > 0.0))
            throw ConfigError("allocation_regularization must be positive",
                              "controllers.allocation_regularization");
        if (fcc_hold_steps < 1)
            throw ConfigError("fcc_hold_steps must be at least 1",
                              "controllers.fcc_hold_steps");
    }
};

/// Fixed-current controller: replays the same drive vector at every step,
/// independent of the capsule state.
class FccController {
  public:
    explicit FccController(CurrentCommand hold) : hold_(std::move(hold)) {}

    const CurrentCommand& command() const { return hold_; }

  private:
    CurrentCommand hold_;
};

/// Runs a policy to stabilization at the workspace center and averages its
/// current output over hold_steps consecutive held steps. A held step is one
/// taken while the true state is within d_near of the goal and slower than
/// v_eps. Throws MeasurementError when the episode ends before the window
/// fills.
template <typename Policy>
CurrentCommand measure_hold_currents(Policy&& policy, const CapsuleEnv& env,
                                     int hold_steps, std::uint64_t seed) {
    if (hold_steps < 1)
        throw ContractViolation("hold_steps must be at least 1");

    EnvConfig cfg = env.config();
    cfg.stabilization_terminates = false;
    CapsuleEnv probe(env.nominal_world(), cfg, env.design_world());
    probe.reset(seed);
    probe.set_goal(GoalState{Vec2::Zero(), 0.0, GoalState::Source::kFixedPoint});

    const double max_current = probe.world().coils.max_current;
    const double d_near = cfg.reward.d_near;
    const double v_eps = cfg.reward.v_eps;

    auto held_now = [&]() {
        const double d = (probe.goal().position - probe.state().position).norm();
        return d < d_near && probe.state().velocity.norm() < v_eps;
    };

    int held_streak = 0;
    Vec4 sum = Vec4::Zero();
    int averaged = 0;
    while (!probe.episode_over()) {
        const bool held = held_now();
        held_streak = held ? held_streak + 1 : 0;
        const Vec4 action = policy(probe.observe());
        if (held_streak > cfg.reward.k_hold) {
            const Vec4 amps =
                action.cwiseMax(-1.0).cwiseMin(1.0) * max_current;
            sum += amps;
            if (++averaged == hold_steps)
                return CurrentCommand(sum / static_cast<double>(hold_steps));
        } else if (averaged > 0) {
            sum.setZero();
            averaged = 0;
        }
        probe.step(action);
    }
    throw MeasurementError("policy failed to hold the capsule at the "
                           "workspace center long enough to average " +
                           std::to_string(hold_steps) + " commands");
}

/// Wrapper for measuring the hold currents of a trained agent's
/// deterministic policy.
inline CurrentCommand measure_hold_currents(const SacAgent& agent,
                                            const CapsuleEnv& env,
                                            int hold_steps,
                                            std::uint64_t seed) {
    return measure_hold_currents(
        [&agent](const Observation& obs) -> Vec4 {
            return Vec4(agent.deterministic_action(obs.vec()));
        },
        env, hold_steps, seed);
}

/// Per-axis planar PID on position error; the derivative acts on the error
/// and is zero on the first call after construction or reset.
class PidController {
  public:
    PidController(const PidGains& gains, double dt) : gains_(gains), dt_(dt) {
        gains_.validate();
        if (!(dt > 0.0))
            throw ConfigError("controller period must be positive",
                              "environment.dt");
    }

    const PidGains& gains() const { return gains_; }
    const Vec2& integral() const { return integral_; }

    void reset() {
        integral_.setZero();
        prev_error_.setZero();
        primed_ = false;
    }

    /// Desired planar force [N] for the current position sample.
    Vec2 control(const Vec2& position, const Vec2& target) {
        const Vec2 error = target - position;
        integral_ += error * dt_;
        integral_ = integral_.cwiseMax(-gains_.integral_limit)
                        .cwiseMin(gains_.integral_limit);
        const Vec2 derivative =
            primed_ ? Vec2((error - prev_error_) / dt_) : Vec2(Vec2::Zero());
        prev_error_ = error;
        primed_ = true;
        const Vec2 force = gains_.kp * error + gains_.ki * integral_ +
                           gains_.kd * derivative;
        return force.cwiseMax(-gains_.force_limit)
            .cwiseMin(gains_.force_limit);
    }

  private:
    PidGains gains_;
    double dt_;
    Vec2 integral_ = Vec2::Zero();
    Vec2 prev_error_ = Vec2::Zero();
    bool primed_ = false;
};

/// Linear map from coil currents to the planar magnetic force on the
/// capsule, valid at one capsule pose and array position.
struct AllocationMap {
    Eigen::Matrix<double, 2, 4> gain =
        Eigen::Matrix<double, 2, 4>::Zero();  ///< [N/A] world-frame rows x, y
    double regularization = 1.0e-6;           ///< relative to sigma_max
};

/// Builds the current-to-force map at the given capsule pose. Column j is
/// the world-frame planar force from coil j at unit current; the force is
/// linear in each drive current, so superposition recovers every command.
inline AllocationMap build_allocation_map(const CoilArrayConfig& coils,
                                          const Vec2& array_pos,
                                          const CapsuleState& state,
                                          const CapsuleMagnet& magnet,
                                          double regularization = 1.0e-6) {
    const Vec3 p(state.position.x(), state.position.y(), 0.0);
    const Vec3 offset(array_pos.x(), array_pos.y(), 0.0);
    const Vec3 m = magnet_moment(magnet, state.heading);
    AllocationMap map;
    map.regularization = regularization;
    for (int j = 0; j < 4; ++j) {
        const Vec3 r =
            p - (offset + coils.positions[static_cast<std::size_t>(j)]);
        const Mat3 jac = dipole_field_jacobian(coil_moment(coils, j, 1.0), r);
        map.gain.col(j) = (jac.transpose() * m).head<2>();
    }
    return map;
}

/// Ratio below which the second singular value marks the map as numerically
/// rank deficient; milder ill-conditioning is absorbed by the Tikhonov term.
inline constexpr double kAllocationRankTol = 1.0e-12;

/// Minimum-norm regularized least-squares currents realizing the desired
/// planar force, clamped per coil to the drive limit.
inline CurrentCommand allocate_currents(const AllocationMap& map,
                                        const Vec2& desired_force,
                                        double i_max) {
    if (!(i_max > 0.0))
        throw ContractViolation("current limit must be positive");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        map.gain, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec2 sv = svd.singularValues();
    if (!(sv(0) > 0.0) || sv(1) <= kAllocationRankTol * sv(0))
        throw AllocationDegenerateError(sv(0), sv(1));

    const double lambda = map.regularization * sv(0);
    const Vec2 uf = svd.matrixU().transpose() * desired_force;
    const Vec2 coef =
        (sv.array() / (sv.array().square() + lambda * lambda) * uf.array())
            .matrix();
    Vec4 amps = svd.matrixV() * coef;
    amps = amps.cwiseMax(-i_max).cwiseMin(i_max);
    return CurrentCommand(amps);
}

/// Deterministic policy inference: the actor's mean action scaled to drive
/// currents. Stateless between calls.
class DrlController {
  public:
    DrlController(const SacAgent& agent, double max_current)
        : actor_(agent.actor()), max_current_(max_current) {
        if (!(max_current > 0.0))
            throw ContractViolation("current limit must be positive");
    }

    CurrentCommand command(const Observation& obs) const {
        const Vector a = actor_.mean_action_one(obs.vec());
        return CurrentCommand(Vec4(a(0), a(1), a(2), a(3)) * max_current_);
    }

  private:
    GaussianActor actor_;
    double max_current_;
};

/// Latching chase of the coil array after a wandering capsule: a capsule
/// farther than recenter_radius starts a chase that runs, rate limited,
/// until the capsule is back inside the deadband.
class ArraySupervisor {
  public:
    explicit ArraySupervisor(const SupervisorConfig& cfg,
                             const Vec2& initial_pose = Vec2::Zero())
        : cfg_(cfg), pose_(initial_pose) {
        cfg_.validate();
    }

    const SupervisorConfig& config() const { return cfg_; }
    const Vec2& pose() const { return pose_; }
    bool chasing() const { return chasing_; }

    /// Advances one control period and returns the updated array pose.
    const Vec2& update(const Vec2& capsule_pos, double dt) {
        if (!(dt > 0.0))
            throw ContractViolation("supervisor period must be positive");
        const Vec2 to_capsule = capsule_pos - pose_;
        const double dist = to_capsule.norm();
        if (!chasing_ && dist > cfg_.recenter_radius) chasing_ = true;
        if (chasing_) {
            if (dist <= cfg_.deadband) {
                chasing_ = false;
            } else if (dist - cfg_.deadband <= cfg_.array_speed_limit * dt) {
                pose_ = capsule_pos - to_capsule * (cfg_.deadband / dist);
                chasing_ = false;
            } else {
                pose_ += to_capsule * (cfg_.array_speed_limit * dt / dist);
            }
        }
        return pose_;
    }

  private:
    SupervisorConfig cfg_;
    Vec2 pose_;
    bool chasing_ = false;
};

}  // namespace magcap
