#include "attsync/runtime.hpp"

#include <cmath>
#include <string>

namespace attsync {

namespace {

using RowMajorMap = Eigen::Map<Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>;
using ConstRowMajorMap = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>;

// Defect beyond which a step is considered numerically broken rather
// than merely drifted.
constexpr double kRejectDefect = 1e-6;

}  // namespace

double max_rotation_defect(const HybridSystem& sys, const Eigen::VectorXd& x) {
    double worst = 0.0;
    for (int off : sys.rotation_offsets) {
        ConstRowMajorMap r(x.data() + off);
        worst = std::max(worst, (r.transpose() * r - Mat3::Identity()).norm());
    }
    return worst;
}

void repair_rotations(const HybridSystem& sys, Eigen::VectorXd& x) {
    for (int off : sys.rotation_offsets) {
        RowMajorMap r(x.data() + off);
        r = reorthonormalize(r).matrix();
    }
}

Eigen::VectorXd integrate_step(const HybridSystem& sys, double t, const Eigen::VectorXd& x,
                               double dt) {
    const Eigen::VectorXd k1 = sys.flow(t, x);
    const Eigen::VectorXd k2 = sys.flow(t + 0.5 * dt, x + (0.5 * dt) * k1);
    const Eigen::VectorXd k3 = sys.flow(t + 0.5 * dt, x + (0.5 * dt) * k2);
    const Eigen::VectorXd k4 = sys.flow(t + dt, x + dt * k3);
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

SimLog run_hybrid(const HybridSystem& sys, const Eigen::VectorXd& x0, const SimConfig& cfg) {
    SimLog log;
    log.columns = {"t", "j"};
    for (const std::string& name : sys.observables) {
        log.columns.push_back(name);
    }

    auto log_row = [&](double t, int j, const Eigen::VectorXd& x) {
        std::vector<double> row{t, static_cast<double>(j)};
        if (sys.observe) {
            const std::vector<double> obs = sys.observe(t, x);
            row.insert(row.end(), obs.begin(), obs.end());
        }
        log.rows.push_back(std::move(row));
    };

    Eigen::VectorXd x = x0;
    int j = 0;
    long step = 0;
    const long total_steps = std::lround(cfg.t_end / cfg.dt);
    double t = 0.0;

    log_row(t, j, x);
    while (step < total_steps) {
        if (sys.in_jump_set && sys.in_jump_set(x)) {
            if (j >= cfg.max_jumps) {
                throw MaxJumpsExceededError("jump count exceeded " + std::to_string(cfg.max_jumps) +
                                            "; the per-jump decrease certificate is broken");
            }
            const Eigen::VectorXd x_next = sys.jump(x);
            ++j;
            if (sys.describe_jump) {
                log.jumps.push_back(sys.describe_jump(t, j, x, x_next));
            } else {
                log.jumps.push_back({t, j, {}, 0.0, 0.0});
            }
            x = x_next;
            log_row(t, j, x);
            continue;
        }

        x = integrate_step(sys, t, x, cfg.dt);
        ++step;
        t = static_cast<double>(step) * cfg.dt;

        const double defect = max_rotation_defect(sys, x);
        if (defect > kRejectDefect) {
            throw StepRejectedError("rotation drift " + std::to_string(defect) +
                                    " at t = " + std::to_string(t));
        }
        if (defect > kDriftRepairTol || step % cfg.drift_repair_every == 0) {
            repair_rotations(sys, x);
        }
        if (step % cfg.log_every == 0 || step == total_steps) {
            log_row(t, j, x);
        }
    }
    return log;
}

}  // namespace attsync
