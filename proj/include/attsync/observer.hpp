#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "attsync/so3.hpp"
#include "attsync/topology.hpp"

namespace attsync {

struct EigenvalueOrderError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct EmptyXiSetError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct NotInJumpSetError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Parameter set of the edge potential U(R, xi) = tr(A (I - R R_a(xi, u))) +
/// gamma/2 xi^2 plus the observer gains.
struct ObserverParams {
    std::vector<double> xi_set;    ///< finite reset candidates, 0 < |xi| <= pi
    Mat3 A = Mat3::Identity();     ///< symmetric positive definite weight
    Vec3 u = Vec3::UnitZ();        ///< unit reset axis
    double gamma = 0.0;            ///< quadratic penalty on xi
    double delta = 0.0;            ///< jump hysteresis gap
    double k_R = 1.0;              ///< attitude correction gain
    double k_xi = 1.0;             ///< xi flow gain
};

/// Digest of the weight matrix A used for parameter synthesis: ascending
/// eigenvalues, sign-normalized eigenvectors, the selected branch, the
/// axis coefficients and the guaranteed potential gap.
struct SynthesisAnalysis {
    std::array<double, 3> lambda{};
    std::array<Vec3, 3> axes{};
    int branch = 0;  ///< 1: lam1 == lam2, 2: lam2 >= lam1 lam3/(lam3-lam1), 3: otherwise
    std::array<double, 3> alpha{};
    Vec3 u = Vec3::Zero();
    double delta_star = 0.0;
    double gamma_bound = 0.0;  ///< 4 delta_star / pi^2
};

/// Eigendecomposes A and selects the synthesis branch. Requires
/// 0 < lam1 <= lam2 < lam3 (strict last inequality).
SynthesisAnalysis analyze_for_synthesis(const Mat3& A);

/// Builds a full parameter set from A: u from the branch coefficients,
/// gamma = gamma_fraction * (4 delta_star / pi^2) and delta at
/// delta_fraction of its admissible bound. Fractions must lie in (0, 1).
ObserverParams synthesize_params(const Mat3& A, std::vector<double> xi_set,
                                 double gamma_fraction, double delta_fraction,
                                 double k_R = 1.0, double k_xi = 1.0);

struct ParamCheck {
    std::string name;
    bool ok = false;
    std::string detail;
};
struct ParamReport {
    std::vector<ParamCheck> checks;
    bool all_ok() const;
};

/// Re-validates every inequality constraint on the parameter set and
/// empirically confirms the potential gap at the pi-rotation critical
/// points exceeds delta. Never throws; violations land in the report.
ParamReport check_params(const ObserverParams& p);

using AttitudeEstimates = std::vector<Rotation>;

/// Per-edge relative orientation measurements R_ij = R_i^T R_j, with i
/// the head and j the tail of the edge.
using RelativeMeasurements = std::vector<Rotation>;

/// Hybrid per-edge state: relative attitude errors plus the scalar reset
/// variables. xi of edge k is owned by the head agent and shared with
/// the tail.
struct HybridEdgeState {
    EdgeRotations r_bar;
    std::vector<double> xi;
};

/// Ground-truth relative measurements for a rigid configuration.
RelativeMeasurements measure_relative(const TreeTopology& topo, const std::vector<Rotation>& truth);

/// Reconstructs the relative attitude errors from measurements and the
/// current estimates: R_k = Rhat_j R_ij^T Rhat_i^T, re-orthonormalized.
EdgeRotations relative_error_from_measurements(const TreeTopology& topo,
                                               const RelativeMeasurements& meas,
                                               const AttitudeEstimates& est);

/// Correcting terms of the continuous scheme,
/// sigma_i = -sum_j psi(A Rhat_j R_ij^T Rhat_i^T) over the neighbors.
std::vector<Vec3> sigma_continuous(const TreeTopology& topo, const RelativeMeasurements& meas,
                                   const AttitudeEstimates& est, const Mat3& A);

/// Edge potential value; nonnegative, zero only at (I3, 0).
double potential_u(const Rotation& r_bar, double xi, const ObserverParams& p);

/// Vectorized rotational gradient R_a(xi,u) psi(A R R_a(xi,u)). Equals
/// psi(R^T grad_R U); the directional derivative of U along
/// R exp(eps hat(v)) is 2 grad_r . v.
Vec3 grad_r(const Rotation& r_bar, double xi, const ObserverParams& p);

/// Scalar gradient gamma xi + 2 u^T psi(A R R_a(xi,u)).
double grad_xi(const Rotation& r_bar, double xi, const ObserverParams& p);

/// Minimizer of U(r_bar, .) over the xi candidate set; ties keep the
/// earliest entry.
double xi_star(const Rotation& r_bar, const ObserverParams& p);

/// Sum of the edge potentials over the network state.
double potential_total(const HybridEdgeState& s, const ObserverParams& p);

/// Continuous-scheme Lyapunov value sum_k tr(A (I - R_k)).
double lyapunov_continuous(const EdgeRotations& r_bar, const Mat3& A);

struct JumpSetMembership {
    std::vector<bool> edge_flags;  ///< U(R_k, xi_k) - min_Xi U(R_k, .) >= delta
    bool any = false;
};

/// Per-edge jump-set membership plus the network-level union.
JumpSetMembership in_jump_set(const HybridEdgeState& s, const ObserverParams& p);

/// Resets xi to its minimizer on every edge at or above the delta gap;
/// rotations are untouched. Throws NotInJumpSetError when no edge
/// qualifies. The total potential drops by at least delta.
HybridEdgeState apply_jump(const HybridEdgeState& s, const ObserverParams& p);

/// Correcting terms of the hybrid scheme,
/// sigma_i = sum_{tail edges} R_l grad_r_l - sum_{head edges} grad_r_n.
std::vector<Vec3> sigma_hybrid(const TreeTopology& topo, const HybridEdgeState& s,
                               const ObserverParams& p);

/// xi_dot = -k_xi grad_xi per edge.
std::vector<double> xi_flow(const HybridEdgeState& s, const ObserverParams& p);

/// Estimate kinematics Rhat_i hat(omega_i - k_R Rhat_i^T sigma_i) as
/// matrix derivatives for the integrator.
std::vector<Mat3> observer_flow(const TreeTopology& topo, const AttitudeEstimates& est,
                                const std::vector<Vec3>& omega_body,
                                const std::vector<Vec3>& sigma, double k_R);

struct GradientAudit {
    int samples = 0;
    double max_rel_err_rot = 0.0;
    double max_rel_err_xi = 0.0;
    double max_rel_err() const { return std::max(max_rel_err_rot, max_rel_err_xi); }
};

/// Central finite-difference audit of grad_r and grad_xi against the
/// potential at random states. Step 1e-5; errors are relative with a
/// unit floor on the denominator.
GradientAudit run_gradient_audit(const ObserverParams& p, int samples, std::uint64_t seed);

}  // namespace attsync
