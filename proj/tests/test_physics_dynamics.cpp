// Rigid-body model checks: frozen accelerations, passivity of the damping,
// and agreement of the production stepper with a fine-step RK4 reference.
#include "oracles.hpp"

#include <magcap/physics.hpp>
#include <magcap/rng.hpp>

#include <gtest/gtest.h>

namespace {

using magcap::CapsuleState;
using magcap::CurrentCommand;
using magcap::FossenParams;
using magcap::PhysicsWorld;
using magcap::RngStream;
using magcap::Vec2;
using magcap::Vec3;
using magcap::Vec4;

constexpr double kDt = 0.05;

CapsuleState random_state(RngStream& rng) {
    CapsuleState s;
    s.position = Vec2(rng.uniform(-0.025, 0.025), rng.uniform(-0.025, 0.025));
    s.heading = rng.uniform(-magcap::constants::pi, magcap::constants::pi);
    s.velocity = Vec2(rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02));
    s.omega = rng.uniform(-1.0, 1.0);
    return s;
}

double kinetic_energy(const FossenParams& params, const CapsuleState& s) {
    const Vec3 nu = magcap::body_velocity(s);
    return 0.5 * nu.dot(params.mass.cwiseProduct(nu));
}

TEST(BodyVelocity, RotatesWorldVelocityIntoBodyFrame) {
    CapsuleState s;
    s.heading = magcap::constants::pi / 2.0;
    s.velocity = Vec2(1.0, 0.0);
    s.omega = 0.3;
    const Vec3 nu = magcap::body_velocity(s);
    EXPECT_NEAR(nu[0], 0.0, 1e-15);
    EXPECT_NEAR(nu[1], -1.0, 1e-15);
    EXPECT_DOUBLE_EQ(nu[2], 0.3);

    const Vec2 back = magcap::world_velocity(s.heading, nu);
    EXPECT_LE((back - s.velocity).norm(), 1e-15);
}

TEST(FossenAcceleration, MatchesHandComputedValues) {
    FossenParams params;
    params.mass = Vec3(2.0, 4.0, 8.0);
    params.d_lin = Vec3(0.2, 0.4, 0.8);
    params.d_quad = Vec3(1.0, 2.0, 3.0);
    const Vec3 nu(1.0, -2.0, 3.0);
    const Vec3 tau(10.0, 20.0, 30.0);

    params.use_coriolis = false;
    const Vec3 plain = magcap::fossen_acceleration(params, nu, tau);
    EXPECT_NEAR(plain[0], 4.4, 1e-12);
    EXPECT_NEAR(plain[1], 7.2, 1e-12);
    EXPECT_NEAR(plain[2], 0.075, 1e-12);

    params.use_coriolis = true;
    const Vec3 coupled = magcap::fossen_acceleration(params, nu, tau);
    EXPECT_NEAR(coupled[0], -7.6, 1e-12);
    EXPECT_NEAR(coupled[1], 5.7, 1e-12);
    EXPECT_NEAR(coupled[2], 0.575, 1e-12);
}

TEST(FossenAcceleration, CoriolisDoesNoWork) {
    FossenParams params;
    params.mass = Vec3(3.0e-3, 4.0e-3, 4.0e-7);
    RngStream rng(magcap::split_seed(20260816, "coriolis-power"));
    for (int trial = 0; trial < 20; ++trial) {
        const Vec3 nu(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1),
                      rng.uniform(-3.0, 3.0));
        const double power = nu.dot(magcap::added_coriolis(params, nu) * nu);
        EXPECT_NEAR(power, 0.0, 1e-15);
    }
}

TEST(Step, DissipatesEnergyWithoutDrive) {
    PhysicsWorld world;
    RngStream rng(magcap::split_seed(20260816, "dissipativity"));
    const CurrentCommand off;

    for (int trial = 0; trial < 50; ++trial) {
        CapsuleState s = random_state(rng);
        s.velocity = Vec2(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
        s.omega = rng.uniform(-5.0, 5.0);
        double energy = kinetic_energy(world.fossen, s);
        for (int k = 0; k < 100; ++k) {
            s = magcap::step(world, Vec2::Zero(), off, s, kDt);
            const double next = kinetic_energy(world.fossen, s);
            EXPECT_LE(next, energy * (1.0 + 1e-12)) << "trial " << trial;
            energy = next;
        }
        EXPECT_LE(energy, 1e-12);
    }
}

TEST(FossenAcceleration, ReducesToNewtonsLawAtRest) {
    FossenParams params;
    params.mass = Vec3(2.0, 2.0, 1.0);
    const Vec3 acc =
        magcap::fossen_acceleration(params, Vec3::Zero(), Vec3(4.0, 0.0, 0.0));
    EXPECT_DOUBLE_EQ(acc[0], 2.0);
    EXPECT_DOUBLE_EQ(acc[1], 0.0);
    EXPECT_DOUBLE_EQ(acc[2], 0.0);

    const Vec3 rest =
        magcap::fossen_acceleration(params, Vec3::Zero(), Vec3::Zero());
    EXPECT_DOUBLE_EQ(rest.norm(), 0.0);
}

TEST(Step, LeavesRestingCapsuleInPlaceWithoutDrive) {
    PhysicsWorld world;
    CapsuleState s;
    s.position = Vec2(0.012, -0.02);
    s.heading = 5.0;  // deliberately unwrapped
    const CapsuleState out =
        magcap::step(world, Vec2::Zero(), CurrentCommand(), s, kDt);
    EXPECT_LE((out.position - s.position).norm(), 0.0);
    EXPECT_DOUBLE_EQ(out.velocity.norm(), 0.0);
    EXPECT_DOUBLE_EQ(out.omega, 0.0);
    EXPECT_NEAR(out.heading, magcap::wrap_angle(5.0), 1e-15);
}

TEST(Step, TracksFineStepRungeKuttaOverTenSeconds) {
    PhysicsWorld world;
    const int steps = 200;
    double worst = 0.0;

    for (int seed = 0; seed < 20; ++seed) {
        RngStream rng(magcap::split_seed(20260816, "rk4-compare",
                                         static_cast<std::uint64_t>(seed)));
        CapsuleState ours = random_state(rng);
        CapsuleState ref = ours;

        for (int k = 0; k < steps; ++k) {
            CurrentCommand amps;
            for (int i = 0; i < 4; ++i) amps.amps[i] = rng.uniform(-1.0, 1.0);
            ours = magcap::step(world, Vec2::Zero(), amps, ours, kDt);
            ref = oracles::rk4_step(world, Vec2::Zero(), amps, ref, kDt, 100);
            const double err = (ours.position - ref.position).norm();
            worst = std::max(worst, err);
            ASSERT_LT(err, 1e-4) << "seed " << seed << " step " << k;
        }
    }
    RecordProperty("worst_position_error_m", std::to_string(worst));
    EXPECT_LT(worst, 1e-4);
}

TEST(Step, ConsecutiveStepsComposeExactly) {
    PhysicsWorld world;
    RngStream rng(magcap::split_seed(20260816, "compose"));
    const CapsuleState start = random_state(rng);
    CurrentCommand amps;
    for (int i = 0; i < 4; ++i) amps.amps[i] = rng.uniform(-1.0, 1.0);

    CapsuleState two = magcap::step(world, Vec2::Zero(), amps, start, kDt);
    two = magcap::step(world, Vec2::Zero(), amps, two, kDt);

    PhysicsWorld doubled = world;
    doubled.integration.substeps = 2 * world.integration.substeps;
    const CapsuleState once =
        magcap::step(doubled, Vec2::Zero(), amps, start, 2.0 * kDt);

    EXPECT_LE((two.position - once.position).norm(), 1e-12);
    EXPECT_NEAR(two.heading, once.heading, 1e-12);
    EXPECT_LE((two.velocity - once.velocity).norm(), 1e-12);
}

TEST(Step, ClampsRunawayVelocities) {
    PhysicsWorld world;
    world.fossen.mass = Vec3(1e-6, 1e-6, 1e-11);
    world.fossen.d_lin = Vec3::Zero();
    world.fossen.d_quad = Vec3::Zero();
    const CurrentCommand amps(Vec4(1.0, 1.0, 1.0, 1.0));

    CapsuleState s;
    s.position = Vec2(0.02, 0.02);
    s.heading = 1.0;
    const CapsuleState out = magcap::step(world, Vec2::Zero(), amps, s, kDt);
    EXPECT_LE(out.velocity.norm(),
              world.integration.max_speed * (1.0 + 1e-12));
    EXPECT_LE(std::abs(out.omega), world.integration.max_omega + 1e-9);
}

TEST(Step, ClampsCurrentsToTheDriverLimit) {
    PhysicsWorld world;
    CapsuleState s;
    s.position = Vec2(0.01, 0.005);
    s.heading = 0.4;

    const CurrentCommand at_limit(Vec4(1.0, -1.0, 1.0, -1.0));
    const CurrentCommand beyond(Vec4(7.0, -9.0, 3.0, -2.0));
    const CapsuleState a = magcap::step(world, Vec2::Zero(), at_limit, s, kDt);
    const CapsuleState b = magcap::step(world, Vec2::Zero(), beyond, s, kDt);
    EXPECT_LE((a.position - b.position).norm(), 1e-15);
    EXPECT_NEAR(a.heading, b.heading, 1e-15);
}

TEST(Step, ThrowsWhenStateLeavesTheValidRegion) {
    PhysicsWorld world;
    world.integration.position_bound = 1e-3;
    CapsuleState s;
    s.position = Vec2(0.01, 0.0);
    EXPECT_THROW(
        magcap::step(world, Vec2::Zero(), CurrentCommand(), s, kDt),
        magcap::IntegrationDivergedError);
}

TEST(Step, KeepsHeadingWrapped) {
    PhysicsWorld world;
    CapsuleState s;
    s.heading = magcap::constants::pi - 1e-3;
    s.omega = 1.0;
    const CapsuleState out =
        magcap::step(world, Vec2::Zero(), CurrentCommand(), s, kDt);
    EXPECT_LE(std::abs(out.heading), magcap::constants::pi);
}

TEST(Step, DiscreteDampingStabilityMarginHolds) {
    const PhysicsWorld world;
    const double h = kDt / world.integration.substeps;
    const Vec3 nu_bound(0.15, 0.15, 5.0);
    for (int i = 0; i < 3; ++i) {
        const double d_eff = world.fossen.d_lin[i] +
                             world.fossen.d_quad[i] * nu_bound[i];
        EXPECT_LE(h * d_eff / world.fossen.mass[i], 2.0);
    }
}

} // namespace
