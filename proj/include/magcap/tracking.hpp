// Reference trajectories, tracking-error metrics, rollout harness, and the
// consolidated controller comparison.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <magcap/controllers.hpp>
#include <magcap/env.hpp>

namespace magcap {

enum class TrajectoryKind { kSquare, kCircle, kPolyline };
enum class OrientationRule { kTangential, kPerpendicular };

/// Geometry, speed, and heading rule of one reference trajectory.
struct TrajectorySpec {
    TrajectoryKind kind = TrajectoryKind::kCircle;
    std::string name = "circle";
    double speed = 0.005;  ///< [m/s] reference point speed along the path
    OrientationRule orientation = OrientationRule::kPerpendicular;
    Vec2 center = Vec2::Zero();     ///< square and circle center
    double square_side = 0.040;     ///< [m]
    double circle_radius = 0.020;   ///< [m]
    std::vector<Vec2> waypoints;    ///< polyline vertices, in order
    double min_passage_width = 0.010;  ///< [m] narrowest clearance, metadata

    /// Square path: perimeter traversed counterclockwise from the lower
    /// left corner, heading tangential to the edges.
    static TrajectorySpec square(double side = 0.040, double speed = 0.005) {
        TrajectorySpec s;
        s.kind = TrajectoryKind::kSquare;
        s.name = "square";
        s.orientation = OrientationRule::kTangential;
        s.square_side = side;
        s.speed = speed;
        return s;
    }

    /// Circle traversed counterclockwise from (radius, 0) relative to the
    /// center, heading perpendicular to the motion.
    static TrajectorySpec circle(double radius = 0.020,
                                 double speed = 0.005) {
        TrajectorySpec s;
        s.kind = TrajectoryKind::kCircle;
        s.name = "circle";
        s.orientation = OrientationRule::kPerpendicular;
        s.circle_radius = radius;
        s.speed = speed;
        return s;
    }

    /// Open polyline followed start to end, heading tangential.
    static TrajectorySpec polyline(std::vector<Vec2> points,
                                   double speed = 0.008,
                                   std::string name = "longpath") {
        TrajectorySpec s;
        s.kind = TrajectoryKind::kPolyline;
        s.name = std::move(name);
        s.orientation = OrientationRule::kTangential;
        s.waypoints = std::move(points);
        s.speed = speed;
        return s;
    }

    bool closed() const { return kind != TrajectoryKind::kPolyline; }

    double total_length() const {
        switch (kind) {
            case TrajectoryKind::kSquare:
                return 4.0 * square_side;
            case TrajectoryKind::kCircle:
                return 2.0 * constants::pi * circle_radius;
            case TrajectoryKind::kPolyline: {
                double len = 0.0;
                for (std::size_t i = 1; i < waypoints.size(); ++i)
                    len += (waypoints[i] - waypoints[i - 1]).norm();
                return len;
            }
        }
        return 0.0;
    }

    void validate() const {
        if (!(speed > 0.0))
            throw ConfigError("reference speed must be positive",
                              "tracking.speed");
        if (kind == TrajectoryKind::kSquare && !(square_side > 0.0))
            throw ConfigError("square side must be positive",
                              "tracking.square_side");
        if (kind == TrajectoryKind::kCircle && !(circle_radius > 0.0))
            throw ConfigError("circle radius must be positive",
                              "tracking.circle_radius");
        if (kind == TrajectoryKind::kPolyline) {
            if (waypoints.size() < 2)
                throw ConfigError("polyline needs at least two waypoints",
                                  "tracking.waypoints");
            for (std::size_t i = 1; i < waypoints.size(); ++i)
                if ((waypoints[i] - waypoints[i - 1]).norm() <= 0.0)
                    throw ConfigError(
                        "polyline waypoints must be pairwise distinct at "
                        "segment " + std::to_string(i),
                        "tracking.waypoints");
        }
    }
};

/// One point of the moving reference.
struct ReferencePoint {
    Vec2 position = Vec2::Zero();
    double heading_d = 0.0;   ///< [rad] in (-pi, pi]
    double arc_length = 0.0;  ///< [m] along the path
    bool clamped = false;     ///< open path queried beyond its end
};

namespace detail {

inline double oriented_heading(double tangent, OrientationRule rule) {
    const double raw = rule == OrientationRule::kPerpendicular
                           ? tangent + 0.5 * constants::pi
                           : tangent;
    return wrap_angle(raw);
}

}  // namespace detail

/// Arc-length parameterized reference pose at time t: s = speed * t, with
/// closed paths wrapping and open paths clamping at the endpoint.
inline ReferencePoint generate_reference(const TrajectorySpec& spec,
                                         double t) {
    if (t < 0.0) throw ContractViolation("reference time must be nonnegative");
    spec.validate();
    const double total = spec.total_length();
    double s = spec.speed * t;
    ReferencePoint ref;
    if (spec.closed()) {
        s = std::fmod(s, total);
        if (s < 0.0) s += total;
    } else if (s > total) {
        s = total;
        ref.clamped = true;
    }
    ref.arc_length = s;

    switch (spec.kind) {
        case TrajectoryKind::kSquare: {
            const double side = spec.square_side;
            const double half = 0.5 * side;
            const Vec2 corners[4] = {
                spec.center + Vec2(-half, -half),
                spec.center + Vec2(half, -half),
                spec.center + Vec2(half, half),
                spec.center + Vec2(-half, half)};
            const Vec2 dirs[4] = {Vec2(1.0, 0.0), Vec2(0.0, 1.0),
                                  Vec2(-1.0, 0.0), Vec2(0.0, -1.0)};
            const double tangents[4] = {0.0, 0.5 * constants::pi,
                                        constants::pi, -0.5 * constants::pi};
            int edge = static_cast<int>(std::floor(s / side));
            edge = std::clamp(edge, 0, 3);
            const double local = s - edge * side;
            ref.position = corners[edge] + local * dirs[edge];
            ref.heading_d =
                detail::oriented_heading(tangents[edge], spec.orientation);
            return ref;
        }
        case TrajectoryKind::kCircle: {
            const double phi = s / spec.circle_radius;
            ref.position = spec.center + spec.circle_radius *
                                             Vec2(std::cos(phi),
                                                  std::sin(phi));
            ref.heading_d = detail::oriented_heading(
                phi + 0.5 * constants::pi, spec.orientation);
            return ref;
        }
        case TrajectoryKind::kPolyline: {
            double consumed = 0.0;
            for (std::size_t i = 1; i < spec.waypoints.size(); ++i) {
                const Vec2 seg = spec.waypoints[i] - spec.waypoints[i - 1];
                const double len = seg.norm();
                if (s <= consumed + len || i + 1 == spec.waypoints.size()) {
                    const double u =
                        std::clamp((s - consumed) / len, 0.0, 1.0);
                    ref.position = spec.waypoints[i - 1] + u * seg;
                    ref.heading_d = detail::oriented_heading(
                        std::atan2(seg.y(), seg.x()), spec.orientation);
                    return ref;
                }
                consumed += len;
            }
            break;
        }
    }
    throw ContractViolation("unreachable trajectory kind");
}

namespace detail {

inline double point_segment_distance(const Vec2& p, const Vec2& a,
                                     const Vec2& b) {
    const Vec2 seg = b - a;
    const double len2 = seg.squaredNorm();
    if (len2 <= 0.0) return (p - a).norm();
    const double u = std::clamp((p - a).dot(seg) / len2, 0.0, 1.0);
    return (p - (a + u * seg)).norm();
}

}  // namespace detail

/// Minimum Euclidean distance from a point to the path: analytic for the
/// circle, segment-wise for the square and polylines.
inline double closest_point_distance(const TrajectorySpec& spec,
                                     const Vec2& position) {
    switch (spec.kind) {
        case TrajectoryKind::kCircle:
            return std::abs((position - spec.center).norm() -
                            spec.circle_radius);
        case TrajectoryKind::kSquare: {
            const double half = 0.5 * spec.square_side;
            const Vec2 c[4] = {spec.center + Vec2(-half, -half),
                               spec.center + Vec2(half, -half),
                               spec.center + Vec2(half, half),
                               spec.center + Vec2(-half, half)};
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i < 4; ++i)
                best = std::min(best, detail::point_segment_distance(
                                          position, c[i], c[(i + 1) % 4]));
            return best;
        }
        case TrajectoryKind::kPolyline: {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 1; i < spec.waypoints.size(); ++i)
                best = std::min(
                    best, detail::point_segment_distance(
                              position, spec.waypoints[i - 1],
                              spec.waypoints[i]));
            return best;
        }
    }
    throw ContractViolation("unreachable trajectory kind");
}

/// Signed heading error wrapped to (-pi, pi]; metrics take its magnitude.
inline double heading_error(double capsule_theta, double heading_d) {
    return wrap_angle(capsule_theta - heading_d);
}

/// Population statistics of a nonnegative error series. The convention is
/// divide-by-N, so rmse^2 = mean^2 + std^2 holds exactly.
struct ErrorStats {
    long count = 0;
    double mean = 0.0;
    double rmse = 0.0;
    double stddev = 0.0;
    double max = 0.0;
};

inline ErrorStats compute_stats(const std::vector<double>& series) {
    ErrorStats s;
    s.count = static_cast<long>(series.size());
    if (series.empty()) return s;
    double sum = 0.0, sum_sq = 0.0;
    for (double v : series) {
        sum += v;
        sum_sq += v * v;
        s.max = std::max(s.max, v);
    }
    const double n = static_cast<double>(series.size());
    s.mean = sum / n;
    s.rmse = std::sqrt(sum_sq / n);
    // Second pass around the mean; the one-pass difference of squares
    // cancels catastrophically on near-constant series.
    double centered = 0.0;
    for (double v : series) centered += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(centered / n);
    return s;
}

/// One logged step of a tracking trial.
struct SeriesRow {
    int step = 0;
    double t = 0.0;
    Vec2 ref_position = Vec2::Zero();
    double ref_heading = 0.0;
    Vec2 position = Vec2::Zero();
    double heading = 0.0;
    double dist_error = 0.0;    ///< [m] closest-point distance
    double angle_error = 0.0;   ///< [rad] |wrapped heading error|
    double goal_distance = 0.0; ///< [m] to the moving goal point
    Vec2 array_pose = Vec2::Zero();
    Vec4 currents = Vec4::Zero();
};

/// Full record of one controller x trajectory x seed rollout.
struct TrackingReport {
    std::string controller;
    std::string trajectory;
    std::uint64_t seed = 0;
    bool diverged = false;
    bool angle_tracked = true;
    int convergence_step = -1;  ///< first step inside d_near; -1 if never
    ErrorStats dist;            ///< full series
    ErrorStats angle;
    ErrorStats dist_converged;  ///< steps from convergence_step on
    ErrorStats angle_converged;
    std::vector<SeriesRow> series;
};

/// Per-step policy of a trial: may inspect or reposition the environment
/// and returns the currents to apply.
using TrialController =
    std::function<CurrentCommand(CapsuleEnv&, const ReferencePoint&)>;

/// Motion of the coil array during a trial.
enum class ArrayMode { kStatic, kFollowReference, kSupervisor };

struct TrialOptions {
    double duration = 0.0;  ///< [s]; <= 0 means exactly one lap / traversal
    ArrayMode array_mode = ArrayMode::kStatic;
    SupervisorConfig supervisor;
    bool start_on_path = true;   ///< place the capsule at the s=0 pose
    bool track_angle = true;     ///< false: angle reported as untracked
    double workspace_margin = 0.05;  ///< [m] bound beyond the path extent
};

namespace detail {

inline double path_extent(const TrajectorySpec& spec) {
    double ext = 0.0;
    auto grow = [&ext](const Vec2& p) {
        ext = std::max({ext, std::abs(p.x()), std::abs(p.y())});
    };
    switch (spec.kind) {
        case TrajectoryKind::kSquare:
            grow(spec.center + Vec2(0.5 * spec.square_side,
                                    0.5 * spec.square_side));
            grow(spec.center - Vec2(0.5 * spec.square_side,
                                    0.5 * spec.square_side));
            break;
        case TrajectoryKind::kCircle:
            grow(spec.center +
                 Vec2(spec.circle_radius, spec.circle_radius));
            grow(spec.center -
                 Vec2(spec.circle_radius, spec.circle_radius));
            break;
        case TrajectoryKind::kPolyline:
            for (const Vec2& w : spec.waypoints) grow(w);
            break;
    }
    return ext;
}

}  // namespace detail

/// Rolls one controller along one trajectory: the goal follows the
/// reference, the array moves per the selected mode, and every step logs
/// closest-point distance and heading error against the commanded pose.
/// Physics blow-ups and workspace exits end the trial early with the
/// diverged flag set.
inline TrackingReport run_tracking_trial(const TrialController& controller,
                                         const std::string& controller_name,
                                         const CapsuleEnv& proto,
                                         const TrajectorySpec& spec,
                                         const TrialOptions& opt,
                                         std::uint64_t seed) {
    spec.validate();
    const double duration =
        opt.duration > 0.0 ? opt.duration : spec.total_length() / spec.speed;
    EnvConfig cfg = proto.config();
    cfg.stabilization_terminates = false;
    const int n_steps =
        static_cast<int>(std::ceil(duration / cfg.dt - 1e-9));
    if (n_steps < 1) throw ContractViolation("trial duration too short");
    cfg.max_steps = n_steps + 1;
    cfg.workspace_bound =
        std::max(cfg.workspace_bound,
                 detail::path_extent(spec) + opt.workspace_margin);

    CapsuleEnv env(proto.nominal_world(), cfg, proto.design_world());
    env.reset(seed);

    TrackingReport report;
    report.controller = controller_name;
    report.trajectory = spec.name;
    report.seed = seed;
    report.angle_tracked = opt.track_angle;

    const ReferencePoint start = generate_reference(spec, 0.0);
    if (opt.start_on_path) env.set_state(start.position, start.heading_d);
    ArraySupervisor supervisor(opt.supervisor, start.position);
    if (opt.array_mode != ArrayMode::kStatic)
        env.set_array_position(start.position);

    std::vector<double> dist_series, angle_series;
    dist_series.reserve(static_cast<std::size_t>(n_steps));
    angle_series.reserve(static_cast<std::size_t>(n_steps));

    for (int k = 0; k < n_steps; ++k) {
        const double t_goal = (k + 1) * cfg.dt;
        const ReferencePoint ref = generate_reference(spec, t_goal);
        env.set_goal(GoalState{ref.position, ref.heading_d,
                               GoalState::Source::kMovingReference});
        switch (opt.array_mode) {
            case ArrayMode::kStatic:
                break;
            case ArrayMode::kFollowReference:
                env.set_array_position(ref.position);
                break;
            case ArrayMode::kSupervisor:
                env.set_array_position(supervisor.update(
                    env.measured_state().position, cfg.dt));
                break;
        }

        StepResult res;
        CurrentCommand cmd(Vec4::Zero());
        try {
            cmd = controller(env, ref);
            res = env.step_currents(cmd);
        } catch (const IntegrationDivergedError&) {
            report.diverged = true;
            break;
        } catch (const AllocationDegenerateError&) {
            report.diverged = true;
            break;
        }

        SeriesRow row;
        row.step = k + 1;
        row.t = t_goal;
        row.ref_position = ref.position;
        row.ref_heading = ref.heading_d;
        row.position = env.state().position;
        row.heading = env.state().heading;
        row.dist_error = closest_point_distance(spec, row.position);
        row.angle_error =
            std::abs(heading_error(row.heading, ref.heading_d));
        row.goal_distance = res.distance;
        row.array_pose = env.array_position();
        row.currents = cmd.clamped(env.world().coils.max_current).amps;
        report.series.push_back(row);
        dist_series.push_back(row.dist_error);
        angle_series.push_back(row.angle_error);

        if (report.convergence_step < 0 &&
            res.distance < cfg.reward.d_near)
            report.convergence_step = k;

        if (res.truncated && k + 1 < n_steps) {
            report.diverged = true;
            break;
        }
    }

    report.dist = compute_stats(dist_series);
    report.angle = compute_stats(angle_series);
    if (report.convergence_step >= 0) {
        const auto from =
            static_cast<std::size_t>(report.convergence_step);
        report.dist_converged = compute_stats(std::vector<double>(
            dist_series.begin() + static_cast<long>(from),
            dist_series.end()));
        report.angle_converged = compute_stats(std::vector<double>(
            angle_series.begin() + static_cast<long>(from),
            angle_series.end()));
    }
    return report;
}

/// Fixed-current trial controller.
inline TrialController make_fcc_trial_controller(CurrentCommand hold) {
    return [hold = std::move(hold)](CapsuleEnv&, const ReferencePoint&) {
        return hold;
    };
}

/// Position PID with model-based current allocation. The allocation map is
/// rebuilt every step at the measured pose from the nominal model; the
/// per-episode perturbations stay hidden from the controller.
inline TrialController make_pid_trial_controller(
    const PidGains& gains, double dt, double allocation_regularization) {
    auto pid = std::make_shared<PidController>(gains, dt);
    return [pid, allocation_regularization](CapsuleEnv& env,
                                            const ReferencePoint&) {
        const Measurement meas = env.measured_state();
        CapsuleState seen;
        seen.position = meas.position;
        seen.heading = meas.heading;
        const Vec2 force =
            pid->control(meas.position, env.goal().position);
        const AllocationMap map = build_allocation_map(
            env.design_world().coils, env.array_position(), seen,
            env.design_world().magnet, allocation_regularization);
        return allocate_currents(map, force,
                                 env.design_world().coils.max_current);
    };
}

/// Deterministic policy inference trial controller.
inline TrialController make_drl_trial_controller(const SacAgent& agent,
                                                 double max_current) {
    return [drl = DrlController(agent, max_current)](
               CapsuleEnv& env, const ReferencePoint&) {
        return drl.command(env.observe());
    };
}

/// One controller entry of a comparison: display name, per-path array
/// modes, and a factory producing a fresh trial controller per rollout.
struct ControllerSpec {
    std::string name;
    bool angle_tracked = true;
    ArrayMode closed_path_mode = ArrayMode::kStatic;
    ArrayMode open_path_mode = ArrayMode::kSupervisor;
    std::function<TrialController()> make;
};

/// Aggregated metrics of one controller on one trajectory.
struct ComparisonEntry {
    std::string controller;
    std::string trajectory;
    bool angle_tracked = true;
    int trials = 0;
    int diverged = 0;
    ErrorStats dist;             ///< stats fields averaged over clean trials
    ErrorStats angle;
    ErrorStats dist_converged;
    ErrorStats angle_converged;
    std::vector<TrackingReport> reports;  ///< per-seed, in trial order
};

struct ComparisonTable {
    std::uint64_t root_seed = 0;
    int n_trials = 0;
    std::vector<ComparisonEntry> entries;  ///< controller-major order
};

namespace detail {

inline ErrorStats average_stats(
    const std::vector<TrackingReport>& reports, bool converged,
    bool angle) {
    ErrorStats avg;
    int n = 0;
    for (const TrackingReport& r : reports) {
        if (r.diverged) continue;
        const ErrorStats& s =
            converged ? (angle ? r.angle_converged : r.dist_converged)
                      : (angle ? r.angle : r.dist);
        avg.mean += s.mean;
        avg.rmse += s.rmse;
        avg.stddev += s.stddev;
        avg.max += s.max;
        avg.count += s.count;
        ++n;
    }
    if (n > 0) {
        avg.mean /= n;
        avg.rmse /= n;
        avg.stddev /= n;
        avg.max /= n;
    }
    return avg;
}

}  // namespace detail

/// Runs every controller on every trajectory over n_trials seeds derived
/// from the root seed. Trials of the same trajectory and index share their
/// seed across controllers, so rows are seed-matched; per-trial failures
/// are counted, not fatal. Trials are independent, so up to `jobs` of them
/// run concurrently; results are assembled positionally and are identical
/// for every job count.
inline ComparisonTable run_comparison(
    const std::vector<ControllerSpec>& controllers,
    const std::vector<TrajectorySpec>& specs, int n_trials,
    std::uint64_t root_seed, const CapsuleEnv& proto,
    const TrialOptions& base_opt = TrialOptions{}, int jobs = 1) {
    if (n_trials < 1) throw ContractViolation("need at least one trial");

    struct Task {
        std::size_t ctrl;
        std::size_t spec;
        int trial;
    };
    std::vector<Task> tasks;
    for (std::size_t c = 0; c < controllers.size(); ++c)
        for (std::size_t s = 0; s < specs.size(); ++s)
            for (int i = 0; i < n_trials; ++i) tasks.push_back({c, s, i});
    std::vector<TrackingReport> results(tasks.size());

    const auto run_task = [&](std::size_t t) {
        const Task& k = tasks[t];
        const ControllerSpec& ctrl = controllers[k.ctrl];
        const TrajectorySpec& spec = specs[k.spec];
        TrialOptions opt = base_opt;
        opt.track_angle = ctrl.angle_tracked;
        opt.array_mode =
            spec.closed() ? ctrl.closed_path_mode : ctrl.open_path_mode;
        const std::uint64_t seed =
            split_seed(root_seed, "trial|" + spec.name,
                       static_cast<std::uint64_t>(k.trial));
        results[t] =
            run_tracking_trial(ctrl.make(), ctrl.name, proto, spec, opt,
                               seed);
    };

    const std::size_t workers = std::min<std::size_t>(
        jobs < 1 ? 1 : static_cast<std::size_t>(jobs), tasks.size());
    if (workers <= 1) {
        for (std::size_t t = 0; t < tasks.size(); ++t) run_task(t);
    } else {
        std::atomic<std::size_t> next{0};
        std::mutex fail_mutex;
        std::exception_ptr failure;
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&]() {
                while (true) {
                    const std::size_t t = next.fetch_add(1);
                    if (t >= tasks.size()) return;
                    try {
                        run_task(t);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(fail_mutex);
                        if (!failure) failure = std::current_exception();
                        return;
                    }
                }
            });
        for (std::thread& th : pool) th.join();
        if (failure) std::rethrow_exception(failure);
    }

    ComparisonTable table;
    table.root_seed = root_seed;
    table.n_trials = n_trials;
    std::size_t t = 0;
    for (const ControllerSpec& ctrl : controllers) {
        for (const TrajectorySpec& spec : specs) {
            ComparisonEntry entry;
            entry.controller = ctrl.name;
            entry.trajectory = spec.name;
            entry.angle_tracked = ctrl.angle_tracked;
            entry.trials = n_trials;
            for (int i = 0; i < n_trials; ++i, ++t) {
                if (results[t].diverged) ++entry.diverged;
                entry.reports.push_back(std::move(results[t]));
            }
            entry.dist =
                detail::average_stats(entry.reports, false, false);
            entry.angle =
                detail::average_stats(entry.reports, false, true);
            entry.dist_converged =
                detail::average_stats(entry.reports, true, false);
            entry.angle_converged =
                detail::average_stats(entry.reports, true, true);
            table.entries.push_back(std::move(entry));
        }
    }
    return table;
}

// Report serialization: per-step CSV, JSON summaries, and the aligned text
// table.

namespace detail {

inline std::string json_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void check_stream(const std::ostream& os, const std::string& path) {
    if (!os)
        throw IoError("failed to write " + path);
}

inline void write_stats_json(std::ostream& os, const ErrorStats& s) {
    os << "{\"count\": " << s.count << ", \"mean\": " << json_num(s.mean)
       << ", \"rmse\": " << json_num(s.rmse)
       << ", \"std\": " << json_num(s.stddev)
       << ", \"max\": " << json_num(s.max) << "}";
}

}  // namespace detail

/// Per-step series of one trial, including the full command stream.
inline void write_series_csv(const TrackingReport& report,
                             const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << "step,t,ref_x,ref_y,ref_heading,x,y,heading,dist_error,"
          "angle_error,goal_distance,array_x,array_y,i1,i2,i3,i4\n";
    os << std::setprecision(17);
    for (const SeriesRow& r : report.series) {
        os << r.step << ',' << r.t << ',' << r.ref_position.x() << ','
           << r.ref_position.y() << ',' << r.ref_heading << ','
           << r.position.x() << ',' << r.position.y() << ',' << r.heading
           << ',' << r.dist_error << ',' << r.angle_error << ','
           << r.goal_distance << ',' << r.array_pose.x() << ','
           << r.array_pose.y() << ',' << r.currents(0) << ','
           << r.currents(1) << ',' << r.currents(2) << ','
           << r.currents(3) << '\n';
    }
    detail::check_stream(os, path);
}

/// JSON summary of one trial.
inline void write_report_json(const TrackingReport& report,
                              const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << "{\n"
       << "  \"controller\": \"" << report.controller << "\",\n"
       << "  \"trajectory\": \"" << report.trajectory << "\",\n"
       << "  \"seed\": " << report.seed << ",\n"
       << "  \"diverged\": " << (report.diverged ? "true" : "false")
       << ",\n"
       << "  \"angle_tracked\": "
       << (report.angle_tracked ? "true" : "false") << ",\n"
       << "  \"convergence_step\": " << report.convergence_step << ",\n"
       << "  \"steps\": " << report.series.size() << ",\n"
       << "  \"statistics\": \"population\",\n";
    os << "  \"dist\": ";
    detail::write_stats_json(os, report.dist);
    os << ",\n  \"angle\": ";
    detail::write_stats_json(os, report.angle);
    os << ",\n  \"dist_converged\": ";
    detail::write_stats_json(os, report.dist_converged);
    os << ",\n  \"angle_converged\": ";
    detail::write_stats_json(os, report.angle_converged);
    os << "\n}\n";
    detail::check_stream(os, path);
}

/// JSON form of the consolidated comparison.
inline void write_comparison_json(const ComparisonTable& table,
                                  const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << "{\n  \"root_seed\": " << table.root_seed
       << ",\n  \"n_trials\": " << table.n_trials
       << ",\n  \"statistics\": \"population\",\n  \"entries\": [\n";
    for (std::size_t i = 0; i < table.entries.size(); ++i) {
        const ComparisonEntry& e = table.entries[i];
        os << "    {\"controller\": \"" << e.controller
           << "\", \"trajectory\": \"" << e.trajectory
           << "\", \"trials\": " << e.trials
           << ", \"diverged\": " << e.diverged << ", \"angle_tracked\": "
           << (e.angle_tracked ? "true" : "false") << ",\n     \"seeds\": [";
        for (std::size_t r = 0; r < e.reports.size(); ++r)
            os << (r ? ", " : "") << e.reports[r].seed;
        os << "],\n     \"dist\": ";
        detail::write_stats_json(os, e.dist);
        os << ",\n     \"angle\": ";
        detail::write_stats_json(os, e.angle);
        os << ",\n     \"dist_converged\": ";
        detail::write_stats_json(os, e.dist_converged);
        os << ",\n     \"angle_converged\": ";
        detail::write_stats_json(os, e.angle_converged);
        os << "}" << (i + 1 < table.entries.size() ? "," : "") << "\n";
    }
    os << "  ]\n}\n";
    detail::check_stream(os, path);
}

/// Aligned plain-text rendering of the comparison; distances in mm, angles
/// in degrees, untracked angles shown as "---".
inline std::string comparison_to_text(const ComparisonTable& table) {
    std::ostringstream os;
    os << std::left << std::setw(12) << "trajectory" << std::setw(12)
       << "controller" << std::right << std::setw(7) << "trials"
       << std::setw(9) << "failed" << std::setw(14) << "dist_rmse_mm"
       << std::setw(13) << "dist_std_mm" << std::setw(13) << "dist_max_mm"
       << std::setw(15) << "angle_rmse_deg" << std::setw(14)
       << "angle_std_deg" << std::setw(14) << "angle_max_deg" << "\n";
    auto mm = [](double m) {
        std::ostringstream v;
        v << std::fixed << std::setprecision(3) << m * 1e3;
        return v.str();
    };
    auto deg = [](double rad) {
        std::ostringstream v;
        v << std::fixed << std::setprecision(2)
          << rad * 180.0 / constants::pi;
        return v.str();
    };
    for (const ComparisonEntry& e : table.entries) {
        os << std::left << std::setw(12) << e.trajectory << std::setw(12)
           << e.controller << std::right << std::setw(7) << e.trials
           << std::setw(9) << e.diverged << std::setw(14) << mm(e.dist.rmse)
           << std::setw(13) << mm(e.dist.stddev) << std::setw(13)
           << mm(e.dist.max);
        if (e.angle_tracked)
            os << std::setw(15) << deg(e.angle.rmse) << std::setw(14)
               << deg(e.angle.stddev) << std::setw(14) << deg(e.angle.max);
        else
            os << std::setw(15) << "---" << std::setw(14) << "---"
               << std::setw(14) << "---";
        os << "\n";
    }
    return os.str();
}

/// Loads a waypoint file: one "x y" pair per line, meters, '#' comments.
inline std::vector<Vec2> load_waypoints(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open waypoint file " + path);
    std::vector<Vec2> points;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double x, y;
        if (!(ls >> x)) continue;  // blank or comment-only line
        if (!(ls >> y))
            throw IoError("waypoint file " + path + " line " +
                          std::to_string(lineno) +
                          ": expected \"x y\" in meters");
        std::string rest;
        if (ls >> rest)
            throw IoError("waypoint file " + path + " line " +
                          std::to_string(lineno) +
                          ": trailing content \"" + rest + "\"");
        points.emplace_back(x, y);
    }
    return points;
}

}  // namespace magcap
