#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "attsync/so3.hpp"

namespace attsync {

struct MaxJumpsExceededError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct StepRejectedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Hybrid time: continuous time plus the jump counter.
struct HybridTime {
    double t = 0.0;
    int j = 0;
};

struct SimConfig {
    double dt = 1e-3;
    double t_end = 30.0;
    long max_jumps = 1'000'000;   ///< exceeded only by a decrease-certificate bug
    int drift_repair_every = 10;  ///< unconditional re-projection cadence, in steps
    int log_every = 1;            ///< flow-row cadence, in steps
};

struct JumpRecord {
    double t = 0.0;
    int j = 0;                ///< counter value after the jump
    std::vector<int> edges;   ///< 1-based ids of the edges that reset
    double ut_before = 0.0;
    double ut_after = 0.0;
};

/// Row-per-sample log of a hybrid execution, ordered by (t, j).
struct SimLog {
    std::vector<std::string> columns;  ///< starts with "t", "j"
    std::vector<std::vector<double>> rows;
    std::vector<JumpRecord> jumps;
};

/// A hybrid system over a flat state vector. Rotation-valued components
/// are registered as row-major 3x3 blocks so the runtime can monitor and
/// repair their orthonormality drift.
struct HybridSystem {
    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> flow;

    /// Jump-set membership with non-strict inequalities (closed set);
    /// empty means the system never jumps.
    std::function<bool(const Eigen::VectorXd&)> in_jump_set;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> jump;

    std::vector<int> rotation_offsets;

    std::vector<std::string> observables;
    std::function<std::vector<double>(double, const Eigen::VectorXd&)> observe;
    std::function<JumpRecord(double, int, const Eigen::VectorXd&, const Eigen::VectorXd&)>
        describe_jump;
};

/// Worst ||R^T R - I||_F over the registered rotation blocks.
double max_rotation_defect(const HybridSystem& sys, const Eigen::VectorXd& x);

/// Projects every registered rotation block back onto the manifold.
void repair_rotations(const HybridSystem& sys, Eigen::VectorXd& x);

/// One classical fourth-order Runge-Kutta step on the flat state. The
/// caller (run_hybrid) handles rotation drift repair.
Eigen::VectorXd integrate_step(const HybridSystem& sys, double t, const Eigen::VectorXd& x,
                               double dt);

/// Executes the hybrid system with jump priority: while the state sits in
/// the jump set the jump map is applied (one event may reset several
/// edges, incrementing j once); otherwise one flow step is taken. Jumps
/// are detected at step boundaries. Deterministic: identical inputs give
/// bit-identical logs.
SimLog run_hybrid(const HybridSystem& sys, const Eigen::VectorXd& x0, const SimConfig& cfg);

}  // namespace attsync
