#pragma once

#include <vector>

#include <Eigen/Dense>

#include "attsync/observer.hpp"
#include "attsync/so3.hpp"
#include "attsync/topology.hpp"

namespace attsync {

struct CollisionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InsufficientSamplesError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Bearings are undefined below this separation; the simulation aborts
/// instead of producing garbage directions.
inline constexpr double kCollisionEps = 1e-6;

/// Body-frame bearing pair per edge: the head agent's measurement toward
/// the tail and the reciprocal one.
struct BearingMeasurements {
    std::vector<Vec3> at_head;  ///< b_ij^i = R_i^T (p_j - p_i)/||p_j - p_i||
    std::vector<Vec3> at_tail;  ///< b_ji^j = R_j^T (p_i - p_j)/||p_i - p_j||
};

/// Exact bearing measurements from ground-truth poses. Throws
/// CollisionError if any edge separation is below kCollisionEps.
BearingMeasurements bearings_from_truth(const TreeTopology& topo, const std::vector<Vec3>& positions,
                                        const std::vector<Rotation>& attitudes);

/// Inertial-frame unit bearings per edge (head toward tail); same
/// collision rule as bearings_from_truth.
std::vector<Vec3> inertial_bearings(const TreeTopology& topo, const std::vector<Vec3>& positions);

/// Distributed position estimate kinematics:
/// phat_dot_i = Rhat_i v_i^i
///            - k_p sum_j Rhat_i (P_{b_ij^i} Rhat_i^T phat_i - R_ij P_{b_ji^j} Rhat_j^T phat_j)
///            - k_R hat(sigma_i) phat_i.
std::vector<Vec3> position_flow(const TreeTopology& topo, const std::vector<Vec3>& p_hat,
                                const AttitudeEstimates& est, const RelativeMeasurements& meas,
                                const BearingMeasurements& bearings,
                                const std::vector<Vec3>& v_body, const std::vector<Vec3>& sigma,
                                double k_p, double k_R);

/// Per-agent position error ptilde_i = R_i Rhat_i^T phat_i - p_i.
std::vector<Vec3> position_tilde(const std::vector<Vec3>& p_hat, const std::vector<Vec3>& truth_p,
                                 const std::vector<Rotation>& truth_R, const AttitudeEstimates& est);

Vec3 centroid(const std::vector<Vec3>& v);

/// Stacked error coordinates: ptilde and its centroid-reduced version
/// e = ptilde - 1_N kron centroid(ptilde(0)).
struct PositionErrorState {
    Eigen::VectorXd p_tilde;
    Eigen::VectorXd e;
};

PositionErrorState position_error(const TreeTopology& topo, const std::vector<Vec3>& p_hat,
                                  const std::vector<Vec3>& truth_p,
                                  const std::vector<Rotation>& truth_R, const AttitudeEstimates& est,
                                  const Vec3& initial_centroid);

/// Time-sampled inertial bearings, one entry per edge per sample.
struct BearingTrajectory {
    std::vector<double> t;
    std::vector<std::vector<Vec3>> samples;
};

struct BpeConfig {
    double window = 1.0;     ///< integration window length T
    double mu = 0.0;         ///< excitation level to test against
    int window_starts = 50;  ///< evenly spaced window starts over the trajectory
};

struct BpeWindow {
    double t0 = 0.0;
    double min_eig = 0.0;  ///< lambda_min(int L_B - mu (L kron I3)) over the window
};

struct BpeReport {
    bool pass = false;
    double mu = 0.0;
    double window = 0.0;
    double min_eig = 0.0;  ///< worst window
    std::vector<BpeWindow> windows;
};

/// Trapezoid-integrates the bearing Laplacian over sliding windows and
/// compares against mu times the Laplacian. PASS iff the worst window
/// eigenvalue stays above -1e-9.
BpeReport check_bpe(const TreeTopology& topo, const BearingTrajectory& traj, const BpeConfig& cfg);

/// Largest excitation level in [0, lambda_2(L)] that still passes,
/// located by bisection. Returns 0 when even tiny levels fail.
double certify_bpe(const TreeTopology& topo, const BearingTrajectory& traj, double window,
                   int window_starts = 50);

}  // namespace attsync
