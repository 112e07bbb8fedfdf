// Core aliases, constants, angle utilities and error types shared by all
// magcap headers.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace magcap {

inline constexpr const char *kVersion = "0.1.0";

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace constants {
/// Vacuum permeability [T·m/A]
inline constexpr double mu0 = 4.0e-7 * M_PI;
inline constexpr double pi = M_PI;
} // namespace constants

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
    a = std::fmod(a + constants::pi, 2.0 * constants::pi);
    if (a <= 0.0)
        a += 2.0 * constants::pi;
    return a - constants::pi;
}

/// Planar rotation matrix, body-to-inertial.
inline Mat2 rotation2(double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    Mat2 R;
    R << c, -s, s, c;
    return R;
}

// ---------------------------------------------------------------------------
// Error types
// ---------------------------------------------------------------------------

/// Field evaluation requested closer to a coil than the singularity guard.
struct SingularityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The capsule integrator produced a non-finite state.
struct IntegrationDivergedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A training update produced non-finite values.
struct TrainingDivergedError : std::runtime_error {
    long step;
    TrainingDivergedError(const std::string &msg, long step_)
        : std::runtime_error(msg + " (training step " + std::to_string(step_) +
                             ")"),
          step(step_) {}
};

/// The current-to-force allocation map is numerically rank deficient.
struct AllocationDegenerateError : std::runtime_error {
    double sigma_max;
    double sigma_min;
    AllocationDegenerateError(double smax, double smin)
        : std::runtime_error("allocation map is rank deficient (singular "
                             "values " +
                             std::to_string(smax) + ", " +
                             std::to_string(smin) + ")"),
          sigma_max(smax), sigma_min(smin) {}
};

/// A checkpoint does not match the active configuration.
struct IncompatibleCheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A hold-current measurement failed to stabilize.
struct MeasurementError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An operation was called outside its contract (e.g. stepping a finished
/// episode).
struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

/// Configuration file parse or validation failure. `key` names the
/// offending section.key when known.
struct ConfigError : std::runtime_error {
    std::string key;
    explicit ConfigError(const std::string &msg, std::string key_ = "")
        : std::runtime_error(msg), key(std::move(key_)) {}
};

/// File read/write failure.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Hashing (FNV-1a), used for config fingerprints and determinism checks
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const void *data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto *p = static_cast<const unsigned char *>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string &s,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(s.data(), s.size(), h);
}

} // namespace magcap
