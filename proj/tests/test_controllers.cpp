// Tests for the baseline controllers: fixed currents, PID with current
// allocation, policy inference, and the array supervisor.
#include <magcap/controllers.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace {

using magcap::AllocationMap;
using magcap::CapsuleEnv;
using magcap::CapsuleState;
using magcap::CurrentCommand;
using magcap::EnvConfig;
using magcap::Observation;
using magcap::PhysicsWorld;
using magcap::RngStream;
using magcap::Vec2;
using magcap::Vec4;

EnvConfig quiet_config() {
    EnvConfig cfg;
    cfg.randomization = magcap::RandomizationSpec::nominal();
    return cfg;
}

Eigen::Matrix<double, 2, 4> random_map(RngStream& rng, double scale) {
    Eigen::Matrix<double, 2, 4> a;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 4; ++c) a(r, c) = scale * rng.uniform(-1.0, 1.0);
    return a;
}

/// Largest singular value of a 2x4 matrix from the closed-form eigenvalues
/// of the 2x2 Gram matrix; independent of any SVD routine.
double sigma_max_2x4(const Eigen::Matrix<double, 2, 4>& a) {
    const Eigen::Matrix2d g = a * a.transpose();
    const double tr = g(0, 0) + g(1, 1);
    const double det = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
    return std::sqrt(tr / 2.0 + disc);
}

double sigma_min_2x4(const Eigen::Matrix<double, 2, 4>& a) {
    const Eigen::Matrix2d g = a * a.transpose();
    const double tr = g(0, 0) + g(1, 1);
    const double det = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
    return std::sqrt(std::max(0.0, tr / 2.0 - disc));
}

/// 2x2 solve by Cramer's rule, written out by hand so the least-squares
/// check does not reuse Eigen's factorizations.
Eigen::Vector2d solve2(const Eigen::Matrix2d& a, const Eigen::Vector2d& b) {
    const double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    EXPECT_NE(det, 0.0);
    return Eigen::Vector2d(
        (b(0) * a(1, 1) - a(0, 1) * b(1)) / det,
        (a(0, 0) * b(1) - b(0) * a(1, 0)) / det);
}

TEST(FccController, ReplaysTheSameCurrentsRegardlessOfState) {
    const CurrentCommand hold(Vec4(0.3, -0.1, 0.25, 0.0));
    const magcap::FccController fcc(hold);

    CapsuleEnv env(PhysicsWorld{}, quiet_config());
    env.reset(11);
    for (int t = 0; t < 20; ++t) {
        EXPECT_EQ(fcc.command().amps, hold.amps);
        env.step_currents(fcc.command());
    }
}

TEST(PidController, ZeroErrorZeroHistoryGivesZeroForce) {
    magcap::PidGains gains;
    magcap::PidController pid(gains, 0.05);
    const Vec2 p(0.012, -0.004);
    const Vec2 f = pid.control(p, p);
    EXPECT_EQ(f.x(), 0.0);
    EXPECT_EQ(f.y(), 0.0);
}

TEST(PidController, PureProportionalGainScalesTheErrorExactly) {
    magcap::PidGains gains;
    gains.kp = 2.0;
    gains.ki = 0.0;
    gains.kd = 0.0;
    gains.force_limit = 1.0;
    magcap::PidController pid(gains, 0.05);

    const Vec2 f = pid.control(Vec2(-0.01, 0.0), Vec2::Zero());
    EXPECT_DOUBLE_EQ(f.x(), 0.02);
    EXPECT_DOUBLE_EQ(f.y(), 0.0);

    RngStream rng(5);
    for (int t = 0; t < 50; ++t) {
        const Vec2 pos(rng.uniform(-0.04, 0.04), rng.uniform(-0.04, 0.04));
        const Vec2 target(rng.uniform(-0.04, 0.04), rng.uniform(-0.04, 0.04));
        const Vec2 force = pid.control(pos, target);
        EXPECT_EQ(force.x(), gains.kp * (target - pos).x());
        EXPECT_EQ(force.y(), gains.kp * (target - pos).y());
    }
}

TEST(PidController, MatchesAHandComputedDiscreteRecursion) {
    magcap::PidGains gains;
    gains.kp = 1.5;
    gains.ki = 0.8;
    gains.kd = 0.3;
    gains.integral_limit = 0.004;
    gains.force_limit = 0.04;
    const double dt = 0.1;
    magcap::PidController pid(gains, dt);

    const Vec2 target = Vec2::Zero();
    const std::vector<Vec2> positions = {
        Vec2(-0.020, 0.010), Vec2(-0.015, 0.005), Vec2(-0.010, 0.000),
        Vec2(-0.005, -0.002), Vec2(0.001, -0.001), Vec2(-0.030, 0.025),
        Vec2(-0.030, 0.025), Vec2(-0.030, 0.025)};

    double ix = 0.0, iy = 0.0;
    double ex_prev = 0.0, ey_prev = 0.0;
    bool primed = false;
    for (const Vec2& p : positions) {
        const double ex = target.x() - p.x();
        const double ey = target.y() - p.y();
        ix = std::clamp(ix + ex * dt, -gains.integral_limit,
                        gains.integral_limit);
        iy = std::clamp(iy + ey * dt, -gains.integral_limit,
                        gains.integral_limit);
        const double dx = primed ? (ex - ex_prev) / dt : 0.0;
        const double dy = primed ? (ey - ey_prev) / dt : 0.0;
        ex_prev = ex;
        ey_prev = ey;
        primed = true;
        const double fx = std::clamp(
            gains.kp * ex + gains.ki * ix + gains.kd * dx,
            -gains.force_limit, gains.force_limit);
        const double fy = std::clamp(
            gains.kp * ey + gains.ki * iy + gains.kd * dy,
            -gains.force_limit, gains.force_limit);

        const Vec2 f = pid.control(p, target);
        EXPECT_DOUBLE_EQ(f.x(), fx);
        EXPECT_DOUBLE_EQ(f.y(), fy);
    }
    EXPECT_DOUBLE_EQ(pid.integral().x(), gains.integral_limit);
}

TEST(PidController, ResetClearsTheIntegralAndDerivativeHistory) {
    magcap::PidGains gains;
    gains.kp = 1.0;
    gains.ki = 0.5;
    gains.kd = 0.2;
    gains.force_limit = 1.0;
    magcap::PidController pid(gains, 0.05);
    pid.control(Vec2(0.01, 0.01), Vec2::Zero());
    pid.control(Vec2(0.02, -0.01), Vec2::Zero());
    EXPECT_NE(pid.integral().x(), 0.0);

    pid.reset();
    EXPECT_EQ(pid.integral().x(), 0.0);
    const Vec2 p(0.012, -0.004);
    const Vec2 f = pid.control(p, p);
    EXPECT_EQ(f.x(), 0.0);
    EXPECT_EQ(f.y(), 0.0);
}

TEST(AllocationMap, ColumnsMatchSingleCoilWrenchesInTheWorldFrame) {
    const PhysicsWorld world;
    CapsuleState state;
    state.position = Vec2(0.011, -0.007);
    state.heading = 0.7;
    const Vec2 array_pos(0.002, -0.001);

    const AllocationMap map = magcap::build_allocation_map(
        world.coils, array_pos, state, world.magnet);
    EXPECT_TRUE(map.gain.allFinite());

    for (int j = 0; j < 4; ++j) {
        const CurrentCommand unit(Vec4::Unit(j));
        const magcap::BodyWrench w =
            magcap::magnetic_wrench(world, array_pos, unit, state);
        const Vec2 world_force =
            magcap::rotation2(state.heading) * w.tau.head<2>();
        EXPECT_NEAR(map.gain(0, j), world_force.x(), 1e-12);
        EXPECT_NEAR(map.gain(1, j), world_force.y(), 1e-12);
    }
}

TEST(AllocationMap, DoublingOneCoilGainDoublesExactlyThatColumn) {
    const PhysicsWorld world;
    CapsuleState state;
    state.position = Vec2(-0.009, 0.013);
    state.heading = -1.2;

    magcap::CoilArrayConfig boosted = world.coils;
    boosted.gains[2] *= 2.0;

    const AllocationMap base = magcap::build_allocation_map(
        world.coils, Vec2::Zero(), state, world.magnet);
    const AllocationMap twice = magcap::build_allocation_map(
        boosted, Vec2::Zero(), state, world.magnet);

    for (int j = 0; j < 4; ++j) {
        const double factor = (j == 2) ? 2.0 : 1.0;
        EXPECT_DOUBLE_EQ(twice.gain(0, j), factor * base.gain(0, j));
        EXPECT_DOUBLE_EQ(twice.gain(1, j), factor * base.gain(1, j));
    }
}

TEST(AllocationMap, OpposingCoilsPushTheCenteredCapsuleIdentically) {
    // Opposing coils sit at planar point reflections with the same height
    // and axis, a rotation of the array by pi about its center. For a
    // capsule at the center that symmetry maps each coil's planar force
    // onto the opposing coil's, so the matched columns agree exactly.
    const PhysicsWorld world;
    CapsuleState state;
    state.heading = 0.7;

    const AllocationMap map = magcap::build_allocation_map(
        world.coils, Vec2::Zero(), state, world.magnet);
    for (int axis = 0; axis < 2; ++axis) {
        EXPECT_DOUBLE_EQ(map.gain(axis, 0), map.gain(axis, 2));
        EXPECT_DOUBLE_EQ(map.gain(axis, 1), map.gain(axis, 3));
    }
}

TEST(AllocateCurrents, ZeroForceYieldsExactlyZeroCurrents) {
    const PhysicsWorld world;
    CapsuleState state;
    state.position = Vec2(0.004, 0.009);
    const AllocationMap map = magcap::build_allocation_map(
        world.coils, Vec2::Zero(), state, world.magnet);

    const CurrentCommand cmd =
        magcap::allocate_currents(map, Vec2::Zero(), 1.0);
    EXPECT_EQ(cmd.amps, Vec4::Zero());
}

TEST(AllocateCurrents, RealizesAnAchievableForceToTightResidual) {
    const PhysicsWorld world;
    CapsuleState state;
    state.position = Vec2(-0.006, 0.003);
    state.heading = 0.4;
    const AllocationMap map = magcap::build_allocation_map(
        world.coils, Vec2::Zero(), state, world.magnet);

    const Vec2 f_des(4.0e-5, -2.5e-5);
    const CurrentCommand cmd = magcap::allocate_currents(map, f_des, 1.0);
    ASSERT_LT(cmd.amps.cwiseAbs().maxCoeff(), 1.0)
        << "force request saturated the drive; pick a smaller target";
    EXPECT_LE((map.gain * cmd.amps - f_des).norm(), 1e-9);
}

TEST(AllocateCurrents, MatchesAnIndependentNormalEquationsSolver) {
    RngStream rng(91);
    int tested = 0;
    while (tested < 200) {
        AllocationMap map;
        map.gain = random_map(rng, 1e-4);
        const double smax = sigma_max_2x4(map.gain);
        const double smin = sigma_min_2x4(map.gain);
        if (smax <= 0.0 || smin < 0.05 * smax) continue;
        ++tested;

        const Vec2 f(1e-4 * rng.uniform(-1.0, 1.0),
                     1e-4 * rng.uniform(-1.0, 1.0));
        const CurrentCommand cmd =
            magcap::allocate_currents(map, f, 1e9);

        // Dual form of the Tikhonov normal equations: the 2x2 Gram system
        // (A A^T + lambda^2 I) z = F followed by I = A^T z gives the same
        // minimizer as the 4x4 primal system but stays well conditioned.
        const double lambda = map.regularization * smax;
        const Eigen::Matrix2d gram =
            map.gain * map.gain.transpose() +
            lambda * lambda * Eigen::Matrix2d::Identity();
        const Eigen::Vector4d oracle =
            map.gain.transpose() * solve2(gram, f);

        for (int j = 0; j < 4; ++j)
            EXPECT_NEAR(cmd.amps(j), oracle(j), 1e-8);
    }
}

TEST(AllocateCurrents, RegularizedObjectiveBeatsPerturbedCandidates) {
    RngStream rng(17);
    for (int trial = 0; trial < 40; ++trial) {
        AllocationMap map;
        map.gain = random_map(rng, 1e-4);
        const double smax = sigma_max_2x4(map.gain);
        if (smax <= 0.0 || sigma_min_2x4(map.gain) < 1e-6 * smax) continue;
        const Vec2 f(1e-4 * rng.uniform(-1.0, 1.0),
                     1e-4 * rng.uniform(-1.0, 1.0));
        const Vec4 amps = magcap::allocate_currents(map, f, 1e9).amps;

        const double lambda = map.regularization * smax;
        auto objective = [&](const Vec4& i) {
            return (map.gain * i - f).squaredNorm() +
                   lambda * lambda * i.squaredNorm();
        };
        const double best = objective(amps);
        for (int k = 0; k < 50; ++k) {
            Vec4 delta;
            for (int j = 0; j < 4; ++j) delta(j) = rng.uniform(-1.0, 1.0);
            delta *= std::pow(10.0, rng.uniform(-6.0, -1.0)) *
                     std::max(1.0, amps.norm());
            EXPECT_GE(objective(amps + delta), best - 1e-18);
        }
    }
}

TEST(AllocateCurrents, ScalingTheSolutionNeverShrinksTheResidual) {
    const PhysicsWorld world;
    CapsuleState state;
    state.position = Vec2(0.008, -0.012);
    state.heading = -0.3;
    const AllocationMap map = magcap::build_allocation_map(
        world.coils, Vec2::Zero(), state, world.magnet);
    const Vec2 f(3.0e-5, 2.0e-5);
    const Vec4 amps = magcap::allocate_currents(map, f, 1e9).amps;
    const double residual = (map.gain * amps - f).norm();
    for (double scale : {0.5, 0.9, 0.99, 1.01, 1.1, 2.0}) {
        EXPECT_GE((map.gain * (scale * amps) - f).norm(), residual);
    }
}

TEST(AllocateCurrents, ClampsEveryCoilToTheDriveLimit) {
    const PhysicsWorld world;
    CapsuleState state;
    const AllocationMap map = magcap::build_allocation_map(
        world.coils, Vec2::Zero(), state, world.magnet);

    const Vec2 huge(1.0, -0.5);
    const CurrentCommand cmd = magcap::allocate_currents(map, huge, 1.0);
    EXPECT_LE(cmd.amps.cwiseAbs().maxCoeff(), 1.0);
    EXPECT_GE(cmd.amps.cwiseAbs().maxCoeff(), 1.0 - 1e-12);
}

TEST(AllocateCurrents, RankDeficientMapRaisesWithItsSingularValues) {
    AllocationMap map;
    map.gain.row(0) << 1.0, 2.0, 1.0, 2.0;
    map.gain.row(1) = 2.0 * map.gain.row(0);
    try {
        magcap::allocate_currents(map, Vec2(1.0, 0.0), 1.0);
        FAIL() << "expected AllocationDegenerateError";
    } catch (const magcap::AllocationDegenerateError& e) {
        EXPECT_GT(e.sigma_max, 0.0);
        EXPECT_LE(e.sigma_min, 1e-12 * e.sigma_max);
    }

    AllocationMap zero;
    EXPECT_THROW(magcap::allocate_currents(zero, Vec2(1.0, 0.0), 1.0),
                 magcap::AllocationDegenerateError);
}

TEST(PidAllocationLoop, PullsTheCapsuleTowardAFixedGoal) {
    EnvConfig cfg = quiet_config();
    cfg.stabilization_terminates = false;
    const PhysicsWorld world;
    CapsuleEnv env(world, cfg);
    env.reset(4);
    env.set_state(Vec2(-0.010, 0.000), 0.0);
    env.set_goal(magcap::GoalState{Vec2(0.005, 0.003), 0.0,
                                   magcap::GoalState::Source::kFixedPoint});

    magcap::PidController pid(magcap::PidGains{}, cfg.dt);
    const double initial =
        (env.goal().position - env.state().position).norm();
    for (int t = 0; t < 300; ++t) {
        const magcap::Measurement meas = env.measured_state();
        CapsuleState seen;
        seen.position = meas.position;
        seen.heading = meas.heading;
        const AllocationMap map = magcap::build_allocation_map(
            world.coils, env.array_position(), seen, world.magnet);
        const Vec2 force = pid.control(meas.position, env.goal().position);
        const CurrentCommand cmd = magcap::allocate_currents(
            map, force, world.coils.max_current);
        env.step_currents(cmd);
    }
    const double final_dist =
        (env.goal().position - env.state().position).norm();
    EXPECT_LT(final_dist, 0.5 * initial);
}

TEST(MeasureHoldCurrents, ConstantStubPolicyComesBackUnchanged) {
    EnvConfig cfg = quiet_config();
    cfg.reward.d_near = 1.0;
    cfg.reward.v_eps = 10.0;
    CapsuleEnv env(PhysicsWorld{}, cfg);

    const Vec4 action(0.3, -0.2, 0.1, 0.0);
    const CurrentCommand held = magcap::measure_hold_currents(
        [&](const Observation&) { return action; }, env, 7, 21);
    for (int j = 0; j < 4; ++j)
        EXPECT_DOUBLE_EQ(held.amps(j), action(j) * 1.0);
}

TEST(MeasureHoldCurrents, WindowOfOneTakesTheFirstPostStabilizationCommand) {
    EnvConfig cfg = quiet_config();
    cfg.reward.d_near = 1.0;
    cfg.reward.v_eps = 10.0;
    cfg.reward.k_hold = 3;
    CapsuleEnv env(PhysicsWorld{}, cfg);

    int calls = 0;
    const CurrentCommand held = magcap::measure_hold_currents(
        [&](const Observation&) {
            ++calls;
            return Vec4(0.1 * calls, 0.0, 0.0, 0.0);
        },
        env, 1, 21);
    // Calls 1..3 build the hold streak; call 4 is the first averaged one.
    EXPECT_DOUBLE_EQ(held.amps(0), 0.4);
    EXPECT_EQ(calls, 4);
}

TEST(MeasureHoldCurrents, PolicyThatNeverStabilizesRaisesMeasurementError) {
    EnvConfig cfg = quiet_config();
    cfg.max_steps = 60;
    CapsuleEnv env(PhysicsWorld{}, cfg);
    EXPECT_THROW(magcap::measure_hold_currents(
                     [](const Observation&) {
                         return Vec4(1.0, 1.0, 1.0, 1.0);
                     },
                     env, 5, 3),
                 magcap::MeasurementError);
}

TEST(DrlController, SameObservationAlwaysGivesTheSameCommand) {
    magcap::SacConfig cfg;
    cfg.hidden = {16};
    RngStream rng(7);
    const magcap::SacAgent agent(6, 4, cfg, rng);
    const magcap::DrlController drl(agent, 1.0);

    Observation a;
    a.e_x = 0.01;
    a.e_y = -0.02;
    a.e_theta = 0.5;
    a.x_dot = 0.001;
    Observation b;
    b.e_x = -0.03;
    b.theta_dot = 2.0;

    const CurrentCommand first = drl.command(a);
    drl.command(b);
    const CurrentCommand again = drl.command(a);
    EXPECT_EQ(first.amps, again.amps);
}

TEST(DrlController, CommandsAreTheScaledDeterministicMeanAction) {
    magcap::SacConfig cfg;
    cfg.hidden = {16};
    RngStream rng(9);
    const magcap::SacAgent agent(6, 4, cfg, rng);
    const double i_max = 0.8;
    const magcap::DrlController drl(agent, i_max);

    Observation obs;
    obs.e_x = 0.4;
    obs.e_y = -0.2;
    obs.x_dot = 0.05;
    const CurrentCommand cmd = drl.command(obs);
    const magcap::Vector mean = agent.deterministic_action(obs.vec());
    for (int j = 0; j < 4; ++j) {
        EXPECT_DOUBLE_EQ(cmd.amps(j), i_max * mean(j));
        EXPECT_LE(std::abs(cmd.amps(j)), i_max);
    }
}

TEST(DrlController, InferenceStaysUnderAMillisecondPerStep) {
    magcap::SacConfig cfg;
    cfg.hidden = {128, 128};
    RngStream rng(13);
    const magcap::SacAgent agent(6, 4, cfg, rng);
    const magcap::DrlController drl(agent, 1.0);

    Observation obs;
    obs.e_x = 0.1;
    obs.e_y = 0.2;
    double sink = 0.0;
    const int reps = 1000;
    const auto t0 = std::chrono::steady_clock::now();
    for (int k = 0; k < reps; ++k) {
        obs.x_dot = 1e-6 * k;
        sink += drl.command(obs).amps.sum();
    }
    const auto t1 = std::chrono::steady_clock::now();
    const double per_call =
        std::chrono::duration<double>(t1 - t0).count() / reps;
    EXPECT_TRUE(std::isfinite(sink));
    EXPECT_LT(per_call, 1e-3);
}

TEST(ArraySupervisor, CapsuleAtTheCenterLeavesTheArrayStationary) {
    magcap::ArraySupervisor sup(magcap::SupervisorConfig{});
    const Vec2 before = sup.pose();
    sup.update(before, 0.05);
    sup.update(before + Vec2(0.004, 0.0), 0.05);
    EXPECT_EQ(sup.pose(), before);
    EXPECT_FALSE(sup.chasing());
}

TEST(ArraySupervisor, ChaseStepMatchesTheRateArithmetic) {
    magcap::SupervisorConfig cfg;
    cfg.recenter_radius = 0.030;
    cfg.deadband = 0.005;
    cfg.array_speed_limit = 0.010;
    magcap::ArraySupervisor sup(cfg);

    sup.update(Vec2(0.050, 0.0), 0.05);
    EXPECT_DOUBLE_EQ(sup.pose().x(), 0.0005);
    EXPECT_DOUBLE_EQ(sup.pose().y(), 0.0);
    EXPECT_TRUE(sup.chasing());
}

TEST(ArraySupervisor, LatchesUntilTheDeadbandThenHolds) {
    magcap::SupervisorConfig cfg;
    magcap::ArraySupervisor sup(cfg);
    const double dt = 0.05;
    const Vec2 capsule(0.030, 0.0);

    Vec2 prev = sup.pose();
    int steps = 0;
    while (sup.chasing() || steps == 0) {
        sup.update(capsule, dt);
        EXPECT_LE((sup.pose() - prev).norm(),
                  cfg.array_speed_limit * dt * (1.0 + 1e-12));
        prev = sup.pose();
        ASSERT_LT(++steps, 100);
    }
    EXPECT_EQ(steps, 25);
    EXPECT_NEAR(sup.pose().x(), 0.025, 1e-12);
    EXPECT_NEAR((capsule - sup.pose()).norm(), cfg.deadband, 1e-12);

    const Vec2 parked = sup.pose();
    sup.update(capsule, dt);
    EXPECT_EQ(sup.pose(), parked);

    // Inside the recenter radius but outside the deadband: still parked.
    sup.update(parked + Vec2(0.020, 0.0), dt);
    EXPECT_EQ(sup.pose(), parked);
    EXPECT_FALSE(sup.chasing());

    // Just beyond the recenter radius: the chase re-engages.
    sup.update(parked + Vec2(0.0251, 0.0), dt);
    EXPECT_TRUE(sup.chasing());
    EXPECT_DOUBLE_EQ(sup.pose().x() - parked.x(),
                     cfg.array_speed_limit * dt);
}

TEST(ArraySupervisor, NeverExceedsTheSpeedLimitOnARandomWalk) {
    magcap::SupervisorConfig cfg;
    magcap::ArraySupervisor sup(cfg);
    RngStream rng(33);
    const double dt = 0.05;
    Vec2 capsule = Vec2::Zero();
    Vec2 prev = sup.pose();
    for (int t = 0; t < 500; ++t) {
        capsule += Vec2(rng.uniform(-0.004, 0.004),
                        rng.uniform(-0.004, 0.004));
        sup.update(capsule, dt);
        EXPECT_LE((sup.pose() - prev).norm(),
                  cfg.array_speed_limit * dt + 1e-15);
        prev = sup.pose();
    }
}

TEST(ControllersConfig, RejectsInvalidSettings) {
    magcap::ControllersConfig good;
    EXPECT_NO_THROW(good.validate());

    magcap::ControllersConfig bad = good;
    bad.pid.kp = -0.1;
    EXPECT_THROW(bad.validate(), magcap::ConfigError);

    bad = good;
    bad.pid.force_limit = 0.0;
    EXPECT_THROW(bad.validate(), magcap::ConfigError);

    bad = good;
    bad.supervisor.deadband = bad.supervisor.recenter_radius;
    EXPECT_THROW(bad.validate(), magcap::ConfigError);

    bad = good;
    bad.allocation_regularization = 0.0;
    EXPECT_THROW(bad.validate(), magcap::ConfigError);

    bad = good;
    bad.fcc_hold_steps = 0;
    EXPECT_THROW(bad.validate(), magcap::ConfigError);

    try {
        bad = good;
        bad.supervisor.array_speed_limit = -1.0;
        bad.validate();
        FAIL() << "expected ConfigError";
    } catch (const magcap::ConfigError& e) {
        EXPECT_EQ(e.key, "controllers.array_speed_limit");
    }
}

}  // namespace
