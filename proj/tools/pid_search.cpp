// Coarse grid search for the PID baseline gains: minimizes square-path
// distance RMSE on the nominal simulator with sensing noise retained. The
// winning gains are recorded as the controller defaults in the bundled
// configuration.
#include <magcap/tracking.hpp>

#include <algorithm>
#include <cstdio>
#include <vector>

namespace {

using magcap::CapsuleEnv;
using magcap::EnvConfig;
using magcap::PhysicsWorld;
using magcap::PidGains;
using magcap::TrajectorySpec;

/// Nominal physics, measurement noise kept: the evaluation plant.
EnvConfig eval_config() {
    EnvConfig cfg;
    cfg.randomization.kappa_range = magcap::Vec2(1.0, 1.0);
    cfg.randomization.damping_range = magcap::Vec2(1.0, 1.0);
    return cfg;
}

struct Result {
    PidGains gains;
    double rmse = std::numeric_limits<double>::infinity();
    int diverged = 0;
};

Result evaluate(const PidGains& gains, const CapsuleEnv& proto,
                const TrajectorySpec& spec) {
    Result res;
    res.gains = gains;
    const std::vector<std::uint64_t> seeds = {101, 202};
    double sum = 0.0;
    for (std::uint64_t seed : seeds) {
        const magcap::TrackingReport rep = magcap::run_tracking_trial(
            magcap::make_pid_trial_controller(gains, proto.dt(), 1.0e-6),
            "pid", proto, spec, magcap::TrialOptions{}, seed);
        if (rep.diverged) {
            ++res.diverged;
            return res;
        }
        sum += rep.dist.rmse;
    }
    res.rmse = sum / static_cast<double>(seeds.size());
    return res;
}

void report(const char* title, std::vector<Result>& results) {
    std::sort(results.begin(), results.end(),
              [](const Result& a, const Result& b) {
                  return a.rmse < b.rmse;
              });
    std::printf("%s\n", title);
    std::printf("%10s %10s %10s %14s %9s\n", "kp", "ki", "kd", "rmse_mm",
                "diverged");
    const std::size_t show = std::min<std::size_t>(results.size(), 15);
    for (std::size_t i = 0; i < show; ++i) {
        const Result& r = results[i];
        std::printf("%10.4f %10.4f %10.4f %14.4f %9d\n", r.gains.kp,
                    r.gains.ki, r.gains.kd, r.rmse * 1e3, r.diverged);
    }
}

}  // namespace

int main() {
    CapsuleEnv proto(PhysicsWorld{}, eval_config());
    const TrajectorySpec square = TrajectorySpec::square();

    PidGains base;
    base.integral_limit = 0.02;
    base.force_limit = 2.0e-4;

    std::vector<Result> coarse;
    for (double kp : {0.005, 0.01, 0.02, 0.04, 0.08}) {
        for (double ki : {0.0, 0.002, 0.01}) {
            for (double kd : {0.0, 0.002, 0.005, 0.01, 0.02}) {
                PidGains g = base;
                g.kp = kp;
                g.ki = ki;
                g.kd = kd;
                coarse.push_back(evaluate(g, proto, square));
            }
        }
    }
    report("coarse pass (square path, 2 seeds)", coarse);

    const PidGains best = coarse.front().gains;
    std::vector<Result> fine;
    for (double fp : {0.6, 0.8, 1.0, 1.25, 1.6}) {
        for (double fd : {0.5, 0.75, 1.0, 1.5, 2.0}) {
            for (double ki : {0.0, 0.5 * best.ki, best.ki, 2.0 * best.ki,
                              0.02}) {
                PidGains g = best;
                g.kp = best.kp * fp;
                g.kd = std::max(best.kd * fd, 1e-4 * fd);
                g.ki = ki;
                fine.push_back(evaluate(g, proto, square));
            }
        }
    }
    report("refinement pass (square path, 2 seeds)", fine);

    const Result& winner = fine.front();
    const magcap::TrackingReport circle_rep = magcap::run_tracking_trial(
        magcap::make_pid_trial_controller(winner.gains, proto.dt(), 1.0e-6),
        "pid", proto, TrajectorySpec::circle(), magcap::TrialOptions{}, 101);
    std::printf(
        "winner: kp=%.4f ki=%.4f kd=%.4f -> square rmse %.4f mm, circle "
        "rmse %.4f mm\n",
        winner.gains.kp, winner.gains.ki, winner.gains.kd,
        winner.rmse * 1e3, circle_rep.dist.rmse * 1e3);
    return 0;
}
