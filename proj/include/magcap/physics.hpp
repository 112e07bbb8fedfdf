// Coil-array magnetics and planar capsule rigid-body dynamics.
//
// The capsule swims in a horizontal plane (z = 0). Four electromagnets sit
// on a movable array below that plane; each is modelled as a point dipole
// whose moment is proportional to its drive current. The capsule carries a
// permanent magnet aligned with its heading and obeys a planar
// added-mass/damping model driven by the magnetic force and torque.
#pragma once

#include <magcap/core.hpp>

#include <array>
#include <cmath>

namespace magcap {

/// Evaluation points closer than this to a dipole are rejected; the point
/// model diverges as r^-3 and such states are outside the valid regime.
inline constexpr double kMinDipoleDistance = 1.0e-3;  // [m]

/// Planar pose and twist of the capsule, expressed in the world frame.
struct CapsuleState {
    Vec2 position = Vec2::Zero();  ///< [m]
    double heading = 0.0;          ///< [rad], wrapped to (-pi, pi]
    Vec2 velocity = Vec2::Zero();  ///< [m/s], world frame
    double omega = 0.0;            ///< [rad/s]
};

/// Per-coil drive currents.
struct CurrentCommand {
    Vec4 amps = Vec4::Zero();  ///< [A]

    CurrentCommand() = default;
    explicit CurrentCommand(const Vec4& a) : amps(a) {}

    CurrentCommand clamped(double max_current) const {
        return CurrentCommand(
            amps.cwiseMax(-max_current).cwiseMin(max_current));
    }
};

/// Geometry and electrical gains of the four-coil array. Coil positions are
/// given in the array frame; the array itself may translate in the plane.
struct CoilArrayConfig {
    std::array<Vec3, 4> positions;  ///< coil centers [m], array frame
    std::array<Vec3, 4> axes;       ///< unit dipole axes
    Vec4 gains = Vec4::Constant(0.05);  ///< moment per ampere [A m^2 / A]
    double max_current = 1.0;           ///< [A]

    /// Coils at the corners of a square of the given side length, offset
    /// above the capsule plane, axes pointing down toward it. Order: (+,+),
    /// (-,+), (-,-), (+,-), counter-clockwise from the first quadrant.
    static CoilArrayConfig square_array(double side = 0.060,
                                        double plane_offset = 0.020,
                                        double gain = 0.05,
                                        double max_current = 1.0) {
        CoilArrayConfig cfg;
        const double s = side / 2.0;
        cfg.positions = {Vec3(s, s, plane_offset), Vec3(-s, s, plane_offset),
                         Vec3(-s, -s, plane_offset),
                         Vec3(s, -s, plane_offset)};
        cfg.axes.fill(Vec3(0.0, 0.0, -1.0));
        cfg.gains = Vec4::Constant(gain);
        cfg.max_current = max_current;
        return cfg;
    }

    void validate() const {
        if (max_current <= 0.0)
            throw ConfigError("coil max_current must be positive",
                              "coils.max_current");
        for (int i = 0; i < 4; ++i) {
            if (gains[i] <= 0.0)
                throw ConfigError("coil gain must be positive", "coils.gain");
            if (std::abs(axes[static_cast<std::size_t>(i)].norm() - 1.0) >
                1e-9)
                throw ConfigError("coil axis must be a unit vector",
                                  "coils.axes");
            if (std::abs(positions[static_cast<std::size_t>(i)].z()) <
                2.0 * kMinDipoleDistance)
                throw ConfigError("coils must sit clear of the capsule plane",
                                  "coils.positions");
        }
    }
};

/// Permanent magnet carried by the capsule, aligned with its heading.
struct CapsuleMagnet {
    double moment = 0.02;  ///< dipole strength [A m^2]

    void validate() const {
        if (moment <= 0.0)
            throw ConfigError("magnet moment must be positive",
                              "magnet.moment");
    }
};

/// Diagonal added-mass / damping model for planar motion. The state is the
/// body-frame twist nu = (surge u, sway v, yaw rate r).
///
/// Defaults model a 26 x 11 mm capsule resting on the dish floor through a
/// thin lubrication film: linear drag ~ mu A / delta with mu = 2.5 mPa s,
/// footprint A ~ 2.9e-4 m^2, film delta ~ 60 um, isotropic in translation;
/// quadratic terms are bluff-body form drag, anisotropic for the elongated
/// hull. Mass entries include entrained-fluid added mass.
struct FossenParams {
    Vec3 mass = Vec3(3.0e-3, 4.0e-3, 4.0e-7);     ///< [kg, kg, kg m^2]
    Vec3 d_lin = Vec3(1.2e-2, 1.2e-2, 8.0e-7);    ///< linear damping
    Vec3 d_quad = Vec3(0.12, 0.16, 1.0e-5);       ///< quadratic damping
    bool use_coriolis = false;  ///< include added-mass Coriolis coupling

    void validate() const {
        for (int i = 0; i < 3; ++i) {
            if (mass[i] <= 0.0)
                throw ConfigError("mass entries must be positive",
                                  "fossen.mass");
            if (d_lin[i] < 0.0 || d_quad[i] < 0.0)
                throw ConfigError("damping entries must be non-negative",
                                  "fossen.damping");
        }
    }
};

/// Force and torque on the capsule expressed in its body frame:
/// tau = (surge force [N], sway force [N], yaw torque [N m]).
struct BodyWrench {
    Vec3 tau = Vec3::Zero();
};

/// Fixed-step integration settings and safety rails. The substep count is
/// sized so a 10 s rollout stays within 1e-4 m of a fine-step RK4 solution
/// of the same model with better than 3x margin.
struct IntegrationSettings {
    int substeps = 640;           ///< semi-implicit Euler substeps per step
    double max_speed = 0.5;       ///< [m/s] hard clamp on planar speed
    double max_omega = 200.0;     ///< [rad/s] hard clamp on yaw rate
    double position_bound = 1.0;  ///< [m] divergence guard

    void validate() const {
        if (substeps < 1)
            throw ConfigError("substeps must be >= 1",
                              "integration.substeps");
        if (max_speed <= 0.0 || max_omega <= 0.0 || position_bound <= 0.0)
            throw ConfigError("integration limits must be positive",
                              "integration.limits");
    }
};

/// Everything needed to evaluate the plant model.
struct PhysicsWorld {
    CoilArrayConfig coils = CoilArrayConfig::square_array();
    CapsuleMagnet magnet;
    FossenParams fossen;
    IntegrationSettings integration;

    void validate() const {
        coils.validate();
        magnet.validate();
        fossen.validate();
        integration.validate();
    }
};

/// Dipole moment of coil i at drive current amps.
inline Vec3 coil_moment(const CoilArrayConfig& coils, int i, double amps) {
    return coils.gains[i] * amps * coils.axes[static_cast<std::size_t>(i)];
}

/// Field of a point dipole with moment m at displacement r from the dipole.
inline Vec3 dipole_field(const Vec3& m, const Vec3& r) {
    const double dist = r.norm();
    if (dist < kMinDipoleDistance)
        throw SingularityError("field evaluated within the dipole "
                               "singularity guard radius");
    const Vec3 rhat = r / dist;
    const double c = constants::mu0 / (4.0 * constants::pi * dist * dist *
                                       dist);
    return c * (3.0 * m.dot(rhat) * rhat - m);
}

/// Spatial gradient dB_i/dr_j of a point dipole field; symmetric and
/// traceless away from the source.
inline Mat3 dipole_field_jacobian(const Vec3& m, const Vec3& r) {
    const double dist = r.norm();
    if (dist < kMinDipoleDistance)
        throw SingularityError("field gradient evaluated within the dipole "
                               "singularity guard radius");
    const Vec3 rhat = r / dist;
    const double mdr = m.dot(rhat);
    const double c =
        3.0 * constants::mu0 /
        (4.0 * constants::pi * dist * dist * dist * dist);
    Mat3 jac = rhat * m.transpose() + m * rhat.transpose() +
               mdr * (Mat3::Identity() - 5.0 * rhat * rhat.transpose());
    return c * jac;
}

/// Total field of the array at world point p, with the array frame
/// translated to array_pos in the plane.
inline Vec3 total_field(const CoilArrayConfig& coils, const Vec2& array_pos,
                        const CurrentCommand& currents, const Vec3& p) {
    const Vec3 offset(array_pos.x(), array_pos.y(), 0.0);
    Vec3 b = Vec3::Zero();
    for (int i = 0; i < 4; ++i) {
        const Vec3 r = p - (offset + coils.positions[static_cast<std::size_t>(i)]);
        b += dipole_field(coil_moment(coils, i, currents.amps[i]), r);
    }
    return b;
}

/// Total field gradient dB/dp at world point p.
inline Mat3 field_jacobian(const CoilArrayConfig& coils,
                           const Vec2& array_pos,
                           const CurrentCommand& currents, const Vec3& p) {
    const Vec3 offset(array_pos.x(), array_pos.y(), 0.0);
    Mat3 jac = Mat3::Zero();
    for (int i = 0; i < 4; ++i) {
        const Vec3 r = p - (offset + coils.positions[static_cast<std::size_t>(i)]);
        jac += dipole_field_jacobian(coil_moment(coils, i, currents.amps[i]),
                                     r);
    }
    return jac;
}

/// Moment vector of the capsule magnet at the given heading.
inline Vec3 magnet_moment(const CapsuleMagnet& magnet, double heading) {
    return magnet.moment *
           Vec3(std::cos(heading), std::sin(heading), 0.0);
}

/// Field and gradient of one dipole in a single pass; shares the geometry
/// factors between the two results. Matches dipole_field and
/// dipole_field_jacobian.
inline void dipole_field_and_jacobian(const Vec3& m, const Vec3& r, Vec3& b,
                                      Mat3& jac) {
    const double dist = r.norm();
    if (dist < kMinDipoleDistance)
        throw SingularityError("field evaluated within the dipole "
                               "singularity guard radius");
    const Vec3 rhat = r / dist;
    const double mdr = m.dot(rhat);
    const double d3 = dist * dist * dist;
    const double cb = constants::mu0 / (4.0 * constants::pi * d3);
    const double cj = 3.0 * constants::mu0 / (4.0 * constants::pi * d3 * dist);
    b += cb * (3.0 * mdr * rhat - m);
    jac += cj * (rhat * m.transpose() + m * rhat.transpose() +
                 mdr * (Mat3::Identity() - 5.0 * rhat * rhat.transpose()));
}

/// Magnetic force and yaw torque on the capsule, rotated into its body
/// frame. Force on a permanent dipole is (dB/dp)^T m; torque is m x B.
inline BodyWrench magnetic_wrench(const PhysicsWorld& world,
                                  const Vec2& array_pos,
                                  const CurrentCommand& currents,
                                  const CapsuleState& state) {
    const Vec3 p(state.position.x(), state.position.y(), 0.0);
    const Vec3 m = magnet_moment(world.magnet, state.heading);
    const Vec3 offset(array_pos.x(), array_pos.y(), 0.0);

    Vec3 b = Vec3::Zero();
    Mat3 jac = Mat3::Zero();
    for (int i = 0; i < 4; ++i) {
        const Vec3 r =
            p - (offset + world.coils.positions[static_cast<std::size_t>(i)]);
        dipole_field_and_jacobian(
            coil_moment(world.coils, i, currents.amps[i]), r, b, jac);
    }

    const Vec3 force = jac.transpose() * m;
    const double torque = m.x() * b.y() - m.y() * b.x();
    const Vec2 force_body =
        rotation2(state.heading).transpose() * force.head<2>();
    BodyWrench w;
    w.tau = Vec3(force_body.x(), force_body.y(), torque);
    return w;
}

/// Body-frame twist nu = (u, v, r) of a state whose velocity is stored in
/// the world frame.
inline Vec3 body_velocity(const CapsuleState& state) {
    const Vec2 v_body = rotation2(state.heading).transpose() * state.velocity;
    return Vec3(v_body.x(), v_body.y(), state.omega);
}

/// Inverse of body_velocity for the planar part.
inline Vec2 world_velocity(double heading, const Vec3& nu) {
    return rotation2(heading) * nu.head<2>();
}

/// Added-mass Coriolis matrix for a diagonal planar model.
inline Mat3 added_coriolis(const FossenParams& params, const Vec3& nu) {
    Mat3 c = Mat3::Zero();
    c(0, 2) = -params.mass[1] * nu[1];
    c(1, 2) = params.mass[0] * nu[0];
    c(2, 0) = params.mass[1] * nu[1];
    c(2, 1) = -params.mass[0] * nu[0];
    return c;
}

/// Body-frame acceleration nu_dot = M^-1 (tau - C(nu) nu - D(nu) nu).
inline Vec3 fossen_acceleration(const FossenParams& params, const Vec3& nu,
                                const Vec3& tau) {
    const Vec3 damping = params.d_lin + params.d_quad.cwiseProduct(
                                            nu.cwiseAbs());
    Vec3 rhs = tau - damping.cwiseProduct(nu);
    if (params.use_coriolis) rhs -= added_coriolis(params, nu) * nu;
    return rhs.cwiseQuotient(params.mass);
}

namespace detail {
inline void clamp_twist(Vec3& nu, const IntegrationSettings& s) {
    const double speed = nu.head<2>().norm();
    if (speed > s.max_speed) nu.head<2>() *= s.max_speed / speed;
    nu[2] = std::clamp(nu[2], -s.max_omega, s.max_omega);
}
} // namespace detail

/// Advance the capsule by dt under constant currents using semi-implicit
/// Euler on the pose/twist pair: the twist is updated from the wrench at
/// the current pose, then the pose is advanced with the updated twist.
inline CapsuleState step(const PhysicsWorld& world, const Vec2& array_pos,
                         const CurrentCommand& currents,
                         const CapsuleState& state, double dt) {
    const CurrentCommand drive = currents.clamped(world.coils.max_current);
    const int n = world.integration.substeps;
    const double h = dt / n;

    Vec2 pos = state.position;
    double heading = state.heading;
    Vec3 nu = body_velocity(state);

    for (int k = 0; k < n; ++k) {
        CapsuleState at;
        at.position = pos;
        at.heading = heading;
        const Vec3 tau = magnetic_wrench(world, array_pos, drive, at).tau;
        nu += h * fossen_acceleration(world.fossen, nu, tau);
        detail::clamp_twist(nu, world.integration);
        pos += h * world_velocity(heading, nu);
        heading = wrap_angle(heading + h * nu[2]);
    }

    if (!pos.allFinite() || !nu.allFinite() ||
        pos.cwiseAbs().maxCoeff() > world.integration.position_bound)
        throw IntegrationDivergedError(
            "capsule state left the valid region during integration");

    CapsuleState out;
    out.position = pos;
    out.heading = heading;
    out.velocity = world_velocity(heading, nu);
    out.omega = nu[2];
    return out;
}

} // namespace magcap
