#include "attsync/formation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace attsync {

namespace {

Vec3 separation(const TreeTopology& topo, const std::vector<Vec3>& positions, int k) {
    const Vec3 d = positions[topo.tail(k)] - positions[topo.head(k)];
    if (d.norm() < kCollisionEps) {
        throw CollisionError("agents " + std::to_string(topo.head(k) + 1) + " and " +
                             std::to_string(topo.tail(k) + 1) + " are closer than the bearing limit");
    }
    return d;
}

}  // namespace

BearingMeasurements bearings_from_truth(const TreeTopology& topo, const std::vector<Vec3>& positions,
                                        const std::vector<Rotation>& attitudes) {
    BearingMeasurements b;
    b.at_head.reserve(topo.n_edges());
    b.at_tail.reserve(topo.n_edges());
    for (int k = 0; k < topo.n_edges(); ++k) {
        const Vec3 d = separation(topo, positions, k);
        const Vec3 dir = d.normalized();
        b.at_head.push_back(attitudes[topo.head(k)].matrix().transpose() * dir);
        b.at_tail.push_back(attitudes[topo.tail(k)].matrix().transpose() * (-dir));
    }
    return b;
}

std::vector<Vec3> inertial_bearings(const TreeTopology& topo, const std::vector<Vec3>& positions) {
    std::vector<Vec3> b;
    b.reserve(topo.n_edges());
    for (int k = 0; k < topo.n_edges(); ++k) {
        b.push_back(separation(topo, positions, k).normalized());
    }
    return b;
}

std::vector<Vec3> position_flow(const TreeTopology& topo, const std::vector<Vec3>& p_hat,
                                const AttitudeEstimates& est, const RelativeMeasurements& meas,
                                const BearingMeasurements& bearings,
                                const std::vector<Vec3>& v_body, const std::vector<Vec3>& sigma,
                                double k_p, double k_R) {
    std::vector<Vec3> dot(topo.n_agents());
    for (int i = 0; i < topo.n_agents(); ++i) {
        dot[i] = est[i] * v_body[i] - k_R * hat(sigma[i]) * p_hat[i];
    }
    for (int k = 0; k < topo.n_edges(); ++k) {
        const int i = topo.head(k), j = topo.tail(k);
        const Mat3 p_head = orthogonal_projector(bearings.at_head[k]);
        const Mat3 p_tail = orthogonal_projector(bearings.at_tail[k]);
        const Mat3 r_ij = meas[k].matrix();
        // Head agent uses R_ij; the tail sees the transposed measurement.
        dot[i] -= k_p * (est[i].matrix() *
                         (p_head * (est[i].matrix().transpose() * p_hat[i]) -
                          r_ij * p_tail * (est[j].matrix().transpose() * p_hat[j])));
        dot[j] -= k_p * (est[j].matrix() *
                         (p_tail * (est[j].matrix().transpose() * p_hat[j]) -
                          r_ij.transpose() * p_head * (est[i].matrix().transpose() * p_hat[i])));
    }
    return dot;
}

std::vector<Vec3> position_tilde(const std::vector<Vec3>& p_hat, const std::vector<Vec3>& truth_p,
                                 const std::vector<Rotation>& truth_R, const AttitudeEstimates& est) {
    std::vector<Vec3> out(p_hat.size());
    for (std::size_t i = 0; i < p_hat.size(); ++i) {
        const Mat3 r_tilde = truth_R[i].matrix() * est[i].matrix().transpose();
        out[i] = r_tilde * p_hat[i] - truth_p[i];
    }
    return out;
}

Vec3 centroid(const std::vector<Vec3>& v) {
    Vec3 c = Vec3::Zero();
    for (const Vec3& x : v) {
        c += x;
    }
    return c / static_cast<double>(v.size());
}

PositionErrorState position_error(const TreeTopology& topo, const std::vector<Vec3>& p_hat,
                                  const std::vector<Vec3>& truth_p,
                                  const std::vector<Rotation>& truth_R, const AttitudeEstimates& est,
                                  const Vec3& initial_centroid) {
    const std::vector<Vec3> tilde = position_tilde(p_hat, truth_p, truth_R, est);
    PositionErrorState s;
    s.p_tilde.resize(3 * topo.n_agents());
    s.e.resize(3 * topo.n_agents());
    for (int i = 0; i < topo.n_agents(); ++i) {
        s.p_tilde.segment<3>(3 * i) = tilde[i];
        s.e.segment<3>(3 * i) = tilde[i] - initial_centroid;
    }
    return s;
}

namespace {

struct WindowIntegrals {
    std::vector<double> t0;
    std::vector<Eigen::MatrixXd> integral;
};

/// Trapezoid integrals of L_B over evenly spaced windows. One pass over
/// the samples; the per-sample Laplacians are built exactly once.
WindowIntegrals integrate_windows(const TreeTopology& topo, const BearingTrajectory& traj,
                                  double window, int starts) {
    const int samples = static_cast<int>(traj.t.size());
    if (samples < 2) {
        throw InsufficientSamplesError("bearing trajectory needs at least two samples");
    }
    const double t_begin = traj.t.front(), t_end = traj.t.back();
    if (t_end - t_begin < window - 1e-12) {
        throw InsufficientSamplesError("bearing trajectory shorter than the excitation window");
    }

    const int n3 = 3 * topo.n_agents();
    std::vector<Eigen::MatrixXd> prefix(samples);
    prefix[0] = Eigen::MatrixXd::Zero(n3, n3);
    Eigen::MatrixXd prev = bearing_laplacian(topo, traj.samples[0]);
    for (int s = 1; s < samples; ++s) {
        const Eigen::MatrixXd cur = bearing_laplacian(topo, traj.samples[s]);
        prefix[s] = prefix[s - 1] + 0.5 * (traj.t[s] - traj.t[s - 1]) * (cur + prev);
        prev = cur;
    }
    auto sample_at = [&](double t) {
        const auto it = std::lower_bound(traj.t.begin(), traj.t.end(), t - 1e-12);
        return std::min<int>(samples - 1, static_cast<int>(std::distance(traj.t.begin(), it)));
    };

    WindowIntegrals out;
    const int n_windows = std::max(1, starts);
    const double span = (t_end - t_begin) - window;
    for (int w = 0; w < n_windows; ++w) {
        const double ws = t_begin + (n_windows == 1 ? 0.0 : span * w / (n_windows - 1));
        const int a = sample_at(ws);
        const int b = sample_at(ws + window);
        out.t0.push_back(traj.t[a]);
        out.integral.push_back(prefix[b] - prefix[a]);
    }
    return out;
}

BpeReport evaluate_windows(const TreeTopology& topo, const WindowIntegrals& wins, double mu,
                           double window) {
    const Eigen::MatrixXd l_kron = kronecker(topo.laplacian(), Mat3::Identity());
    BpeReport rep;
    rep.mu = mu;
    rep.window = window;
    rep.min_eig = std::numeric_limits<double>::infinity();
    for (std::size_t w = 0; w < wins.integral.size(); ++w) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(wins.integral[w] - mu * l_kron);
        rep.windows.push_back({wins.t0[w], eig.eigenvalues()(0)});
        rep.min_eig = std::min(rep.min_eig, eig.eigenvalues()(0));
    }
    rep.pass = rep.min_eig >= -1e-9;
    return rep;
}

}  // namespace

BpeReport check_bpe(const TreeTopology& topo, const BearingTrajectory& traj, const BpeConfig& cfg) {
    const WindowIntegrals wins = integrate_windows(topo, traj, cfg.window, cfg.window_starts);
    return evaluate_windows(topo, wins, cfg.mu, cfg.window);
}

double certify_bpe(const TreeTopology& topo, const BearingTrajectory& traj, double window,
                   int window_starts) {
    const WindowIntegrals wins = integrate_windows(topo, traj, window, window_starts);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(topo.laplacian());
    const double lambda2 = eig.eigenvalues()(1);

    if (evaluate_windows(topo, wins, lambda2, window).pass) {
        return lambda2;
    }
    double lo = 0.0, hi = lambda2;
    for (int it = 0; it < 50; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (evaluate_windows(topo, wins, mid, window).pass) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return lo;
}

}  // namespace attsync
