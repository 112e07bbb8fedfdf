// Episodic control environment around the capsule physics: goal-relative
// observations, a shaped composite reward, stabilization/timeout
// termination, per-episode domain randomization, and a fixed-perturbation
// "real" variant with sensor noise and latency.
#pragma once

#include <magcap/physics.hpp>
#include <magcap/rng.hpp>

#include <deque>

namespace magcap {

/// Target pose for the capsule.
struct GoalState {
    enum class Source { kFixedPoint, kMovingReference };

    Vec2 position = Vec2::Zero();  ///< [m], world frame
    double heading = 0.0;          ///< [rad], wrapped
    Source source = Source::kFixedPoint;
};

/// Goal-relative observation, each entry scaled to roughly [-1, 1].
struct Observation {
    double e_x = 0.0;        ///< (goal - capsule) x, scaled
    double e_y = 0.0;        ///< (goal - capsule) y, scaled
    double e_theta = 0.0;    ///< wrapped heading error, scaled by 1/pi
    double x_dot = 0.0;      ///< capsule velocity x, scaled
    double y_dot = 0.0;      ///< capsule velocity y, scaled
    double theta_dot = 0.0;  ///< yaw rate, scaled

    Vec6 vec() const {
        Vec6 v;
        v << e_x, e_y, e_theta, x_dot, y_dot, theta_dot;
        return v;
    }
};

/// Coefficients of the composite shaping reward.
struct RewardWeights {
    double w_dist = 10.0;     ///< [1/m] distance penalty
    double w_dir = 0.5;       ///< velocity-toward-goal reward
    double w_prog = 200.0;    ///< [1/m] per-step distance progress
    double w_prox = 0.5;      ///< proximity bonus inside d_near
    double w_stab = 0.5;      ///< slow-and-near bonus
    double w_lazy = 0.2;      ///< idling penalty far from goal
    double w_smooth = 0.05;   ///< action slew penalty
    double w_energy = 0.01;   ///< action magnitude penalty
    double w_theta = 0.3;     ///< [1/rad] heading error penalty
    double r_terminal = 10.0; ///< bonus on successful stabilization
    double d_near = 0.005;    ///< [m] proximity radius
    double v_eps = 0.002;     ///< [m/s] "stopped" speed for stabilization
    double v_min = 0.0005;    ///< [m/s] below this far away counts as lazy
    int k_hold = 10;          ///< consecutive held steps for success

    void validate() const {
        const double coeffs[] = {w_dist, w_dir,    w_prog,   w_prox, w_stab,
                                 w_lazy, w_smooth, w_energy, w_theta};
        for (double c : coeffs)
            if (c < 0.0)
                throw ConfigError("reward weights must be non-negative",
                                  "reward.weights");
        if (d_near <= 0.0)
            throw ConfigError("d_near must be positive", "reward.d_near");
        if (v_eps <= 0.0 || v_min <= 0.0)
            throw ConfigError("velocity thresholds must be positive",
                              "reward.v_eps");
        if (k_hold < 1)
            throw ConfigError("k_hold must be >= 1", "reward.k_hold");
    }
};

/// Per-episode domain randomization and sensing imperfections.
struct RandomizationSpec {
    Vec2 kappa_range = Vec2(0.9, 1.1);     ///< coil gain multiplier interval
    Vec2 damping_range = Vec2(0.85, 1.15); ///< damping multiplier interval
    double pos_noise_std = 2.0e-4;         ///< [m]
    double heading_noise_std = 0.00872664625997165;  ///< [rad] (0.5 deg)
    int latency_steps = 0;                 ///< observation delay

    static RandomizationSpec nominal() {
        RandomizationSpec s;
        s.kappa_range = Vec2(1.0, 1.0);
        s.damping_range = Vec2(1.0, 1.0);
        s.pos_noise_std = 0.0;
        s.heading_noise_std = 0.0;
        s.latency_steps = 0;
        return s;
    }

    void validate() const {
        if (kappa_range[0] <= 0.0 || kappa_range[0] > kappa_range[1])
            throw ConfigError("kappa_range must be a positive interval",
                              "randomization.kappa_range");
        if (damping_range[0] <= 0.0 || damping_range[0] > damping_range[1])
            throw ConfigError("damping_range must be a positive interval",
                              "randomization.damping_range");
        if (pos_noise_std < 0.0 || heading_noise_std < 0.0)
            throw ConfigError("noise std must be non-negative",
                              "randomization.noise");
        if (latency_steps < 0)
            throw ConfigError("latency_steps must be non-negative",
                              "randomization.latency_steps");
    }
};

/// Episode-invariant model shift used by the "real" stand-in environment.
struct RealPerturbation {
    double kappa_scale = 0.8;    ///< applied to every coil gain
    double damping_scale = 1.3;  ///< applied to every damping entry
    int latency_steps = 1;
    double pos_noise_std = 2.0e-4;
    double heading_noise_std = 0.00872664625997165;
};

/// Environment tuning knobs. Observation scales are the documented
/// normalization constants; angle errors are scaled by 1/pi.
struct EnvConfig {
    double dt = 0.05;               ///< [s] control period
    int max_steps = 400;            ///< episode step limit
    double workspace_bound = 0.040; ///< [m] half-extent around array center
    double start_bound = 0.025;     ///< [m] start/goal sampling half-extent
    double pos_scale = 0.05;        ///< [m] observation position scale
    double vel_scale = 0.05;        ///< [m/s] observation velocity scale
    double omega_scale = 5.0;       ///< [rad/s] observation yaw-rate scale
    bool stabilization_terminates = true; ///< off for moving-reference runs
    RewardWeights reward;
    RandomizationSpec randomization;

    void validate() const {
        if (dt <= 0.0) throw ConfigError("dt must be positive", "env.dt");
        if (max_steps < 1)
            throw ConfigError("max_steps must be >= 1", "env.max_steps");
        if (workspace_bound <= 0.0 || start_bound <= 0.0 ||
            start_bound > workspace_bound)
            throw ConfigError("need 0 < start_bound <= workspace_bound",
                              "env.bounds");
        if (pos_scale <= 0.0 || vel_scale <= 0.0 || omega_scale <= 0.0)
            throw ConfigError("observation scales must be positive",
                              "env.scales");
        reward.validate();
        randomization.validate();
    }
};

/// Divide-by-zero guard in the reward's direction term; small enough that
/// the term equals the velocity/goal cosine for any physical speed.
inline constexpr double kDirectionEps = 1.0e-9;  // [m/s]

/// Shaped per-step reward. Distances are to the goal position; the
/// indicator structure matches the documented formula exactly.
inline double composite_reward(const CapsuleState& prev,
                               const CapsuleState& curr,
                               const GoalState& goal, const Vec4& action,
                               const Vec4& prev_action,
                               const RewardWeights& w) {
    const double d_prev = (goal.position - prev.position).norm();
    const double d = (goal.position - curr.position).norm();
    const double speed = curr.velocity.norm();

    double r = -w.w_dist * d;
    if (d > 0.0)
        r += w.w_dir * curr.velocity.dot((goal.position - curr.position) / d) /
             (speed + kDirectionEps);
    r += w.w_prog * (d_prev - d);
    if (d < w.d_near) r += w.w_prox;
    if (d < w.d_near && speed < w.v_eps) r += w.w_stab;
    if (d > w.d_near && speed < w.v_min) r -= w.w_lazy;
    r -= w.w_smooth * (action - prev_action).squaredNorm();
    r -= w.w_energy * action.squaredNorm();
    r -= w.w_theta * std::abs(wrap_angle(curr.heading - goal.heading));
    return r;
}

/// Static bound on |composite_reward| + terminal bonus for the given
/// configuration (both poses inside the workspace, actions in [-1,1]^4,
/// speed clamped to max_speed by the integrator).
inline double reward_bound(const EnvConfig& cfg, double max_speed) {
    const RewardWeights& w = cfg.reward;
    const double d_max = 2.0 * std::sqrt(2.0) * cfg.workspace_bound;
    double bound = w.w_dist * d_max + w.w_dir +
                   w.w_prog * max_speed * cfg.dt + w.w_prox + w.w_stab +
                   w.w_lazy + 16.0 * w.w_smooth + 4.0 * w.w_energy +
                   w.w_theta * constants::pi;
    return bound + w.r_terminal;
}

/// Noisy, possibly delayed view of the capsule state.
struct Measurement {
    Vec2 position = Vec2::Zero();
    double heading = 0.0;
    Vec2 velocity = Vec2::Zero();
    double omega = 0.0;
};

/// Result of one environment step.
struct StepResult {
    Observation obs;
    double reward = 0.0;
    bool done = false;       ///< episode over (terminal or truncated)
    bool terminal = false;   ///< stabilized at the goal (bonus paid)
    bool truncated = false;  ///< step limit or workspace exit
    double distance = 0.0;   ///< true distance to goal after the step [m]
    int steps = 0;
};

/// The episodic MDP. One instance per rollout; all methods are
/// deterministic functions of the reset seed and the action sequence.
class CapsuleEnv {
  public:
    CapsuleEnv(PhysicsWorld nominal, EnvConfig cfg)
        : nominal_(std::move(nominal)), cfg_(std::move(cfg)), rng_(0) {
        nominal_.validate();
        cfg_.validate();
        world_ = nominal_;
        design_ = nominal_;
    }

    /// For plants that deviate from the published model: `nominal` is what
    /// episodes randomize around, `design` is the analytic model that
    /// model-based controllers are allowed to use.
    CapsuleEnv(PhysicsWorld nominal, EnvConfig cfg, PhysicsWorld design)
        : CapsuleEnv(std::move(nominal), std::move(cfg)) {
        design.validate();
        design_ = std::move(design);
    }

    int obs_dim() const { return 6; }
    int act_dim() const { return 4; }
    double dt() const { return cfg_.dt; }
    const EnvConfig& config() const { return cfg_; }
    const PhysicsWorld& world() const { return world_; }
    const PhysicsWorld& nominal_world() const { return nominal_; }
    const PhysicsWorld& design_world() const { return design_; }
    const CapsuleState& state() const { return state_; }
    const GoalState& goal() const { return goal_; }
    const Vec2& array_position() const { return array_pos_; }
    int steps_taken() const { return steps_; }
    bool episode_over() const { return done_; }

    /// Start a new episode: sample physics from the randomization spec and
    /// draw a start pose and goal inside the start bounds.
    Observation reset(std::uint64_t seed) {
        rng_ = RngStream(seed);
        world_ = nominal_;
        const auto& rnd = cfg_.randomization;
        for (int i = 0; i < 4; ++i)
            world_.coils.gains[i] *=
                rng_.uniform(rnd.kappa_range[0], rnd.kappa_range[1]);
        for (int i = 0; i < 3; ++i)
            world_.fossen.d_lin[i] *=
                rng_.uniform(rnd.damping_range[0], rnd.damping_range[1]);
        for (int i = 0; i < 3; ++i)
            world_.fossen.d_quad[i] *=
                rng_.uniform(rnd.damping_range[0], rnd.damping_range[1]);

        state_ = CapsuleState{};
        state_.position = Vec2(rng_.uniform(-cfg_.start_bound, cfg_.start_bound),
                               rng_.uniform(-cfg_.start_bound, cfg_.start_bound));
        state_.heading = rng_.uniform(-constants::pi, constants::pi);

        goal_ = GoalState{};
        goal_.position = Vec2(rng_.uniform(-cfg_.start_bound, cfg_.start_bound),
                              rng_.uniform(-cfg_.start_bound, cfg_.start_bound));
        goal_.heading = rng_.uniform(-constants::pi, constants::pi);

        array_pos_ = Vec2::Zero();
        steps_ = 0;
        hold_counter_ = 0;
        done_ = false;
        prev_action_ = Vec4::Zero();
        measurements_.clear();
        push_measurement();
        return observe();
    }

    /// Scale a [-1,1]^4 action to coil currents and advance one period.
    StepResult step(const Vec4& action) {
        const Vec4 a = action.cwiseMax(-1.0).cwiseMin(1.0);
        CurrentCommand cmd(a * world_.coils.max_current);
        StepResult out = step_currents(cmd, a);
        return out;
    }

    /// Advance one period under explicit currents (controller rollouts),
    /// reporting the normalized currents as the action for reward purposes.
    StepResult step_currents(const CurrentCommand& cmd) {
        return step_currents(cmd, Vec4(cmd.amps / world_.coils.max_current));
    }

    /// Advance one period under explicit currents (controller rollouts).
    /// The action argument only feeds the smoothness/energy reward terms.
    StepResult step_currents(const CurrentCommand& cmd, const Vec4& action) {
        if (done_)
            throw ContractViolation("step called on a finished episode");

        const CapsuleState prev = state_;
        state_ = magcap::step(world_, array_pos_, cmd, state_, cfg_.dt);
        ++steps_;
        push_measurement();

        double reward = composite_reward(prev, state_, goal_, action,
                                         prev_action_, cfg_.reward);
        prev_action_ = action;

        const double d = (goal_.position - state_.position).norm();
        const bool held = d < cfg_.reward.d_near &&
                          state_.velocity.norm() < cfg_.reward.v_eps;
        hold_counter_ = held ? hold_counter_ + 1 : 0;

        StepResult out;
        out.distance = d;
        out.steps = steps_;
        if (cfg_.stabilization_terminates &&
            hold_counter_ >= cfg_.reward.k_hold) {
            out.terminal = true;
            reward += cfg_.reward.r_terminal;
        } else if (state_.position.cwiseAbs().maxCoeff() >
                   cfg_.workspace_bound) {
            out.truncated = true;
        } else if (steps_ >= cfg_.max_steps) {
            out.truncated = true;
        }
        out.done = out.terminal || out.truncated;
        done_ = out.done;
        out.reward = reward;
        out.obs = observe();
        return out;
    }

    /// Observation built from the delayed, noisy measurement and the goal.
    Observation observe() const {
        const Measurement& m = delayed_measurement();
        Observation o;
        o.e_x = (goal_.position.x() - m.position.x()) / cfg_.pos_scale;
        o.e_y = (goal_.position.y() - m.position.y()) / cfg_.pos_scale;
        o.e_theta = wrap_angle(goal_.heading - m.heading) / constants::pi;
        o.x_dot = m.velocity.x() / cfg_.vel_scale;
        o.y_dot = m.velocity.y() / cfg_.vel_scale;
        o.theta_dot = m.omega / cfg_.omega_scale;
        return o;
    }

    /// The state as the controller sees it (noise and latency applied).
    const Measurement& measured_state() const { return delayed_measurement(); }

    /// Replace the goal (moving-reference tracking).
    void set_goal(const GoalState& goal) {
        goal_ = goal;
        goal_.heading = wrap_angle(goal_.heading);
    }

    /// Reposition the coil array (supervisor / reference-slaved modes).
    void set_array_position(const Vec2& p) { array_pos_ = p; }

    /// Place the capsule at a pose with zero twist (evaluation setup).
    void set_state(const Vec2& position, double heading) {
        state_ = CapsuleState{};
        state_.position = position;
        state_.heading = wrap_angle(heading);
        hold_counter_ = 0;
        measurements_.clear();
        push_measurement();
    }

    /// Allow an episode to run past its configured limits (tracking trials
    /// manage duration themselves).
    void clear_done_flag() { done_ = false; }

  private:
    void push_measurement() {
        Measurement m;
        m.position = state_.position;
        m.heading = state_.heading;
        m.velocity = state_.velocity;
        m.omega = state_.omega;
        const auto& rnd = cfg_.randomization;
        if (rnd.pos_noise_std > 0.0) {
            m.position.x() += rng_.normal(0.0, rnd.pos_noise_std);
            m.position.y() += rng_.normal(0.0, rnd.pos_noise_std);
        }
        if (rnd.heading_noise_std > 0.0)
            m.heading =
                wrap_angle(m.heading + rng_.normal(0.0, rnd.heading_noise_std));
        measurements_.push_back(m);
        const auto window =
            static_cast<std::size_t>(cfg_.randomization.latency_steps) + 1;
        while (measurements_.size() > window) measurements_.pop_front();
    }

    const Measurement& delayed_measurement() const {
        return measurements_.front();
    }

    PhysicsWorld nominal_;
    PhysicsWorld design_;
    EnvConfig cfg_;
    RngStream rng_;
    PhysicsWorld world_;
    CapsuleState state_;
    GoalState goal_;
    Vec2 array_pos_ = Vec2::Zero();
    Vec4 prev_action_ = Vec4::Zero();
    std::deque<Measurement> measurements_;
    int steps_ = 0;
    int hold_counter_ = 0;
    bool done_ = false;
};

/// Stand-in for the physical platform: the nominal model shifted by a fixed
/// perturbation (outside the training randomization), with sensor noise and
/// observation latency. Start/goal randomization per episode is retained.
inline CapsuleEnv make_real_env(const PhysicsWorld& nominal, EnvConfig cfg,
                                const RealPerturbation& pert) {
    PhysicsWorld real = nominal;
    real.coils.gains *= pert.kappa_scale;
    real.fossen.d_lin *= pert.damping_scale;
    real.fossen.d_quad *= pert.damping_scale;

    RandomizationSpec spec = RandomizationSpec::nominal();
    spec.pos_noise_std = pert.pos_noise_std;
    spec.heading_noise_std = pert.heading_noise_std;
    spec.latency_steps = pert.latency_steps;
    cfg.randomization = spec;
    return CapsuleEnv(std::move(real), std::move(cfg), nominal);
}

} // namespace magcap
