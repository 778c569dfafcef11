#include "attsync/observer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "attsync/random.hpp"

namespace attsync {

namespace {

constexpr double kPi = std::numbers::pi;

void require_symmetric(const Mat3& a) {
    if ((a - a.transpose()).norm() > 1e-9 * (1.0 + a.norm())) {
        throw std::invalid_argument("weight matrix must be symmetric");
    }
}

void require_xi_set(const std::vector<double>& xi_set) {
    if (xi_set.empty()) {
        throw EmptyXiSetError("xi candidate set is empty");
    }
    for (double xi : xi_set) {
        const double m = std::abs(xi);
        if (m <= 0.0 || m > kPi + 1e-12) {
            throw std::invalid_argument("xi candidates must have magnitude in (0, pi]");
        }
    }
}

}  // namespace

SynthesisAnalysis analyze_for_synthesis(const Mat3& A) {
    require_symmetric(A);
    Eigen::SelfAdjointEigenSolver<Mat3> eig(A);
    SynthesisAnalysis out;
    for (int i = 0; i < 3; ++i) {
        out.lambda[i] = eig.eigenvalues()(i);
        Vec3 v = eig.eigenvectors().col(i);
        // Deterministic sign: largest-magnitude component positive.
        int imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v(imax) < 0.0) {
            v = -v;
        }
        out.axes[i] = v;
    }
    const double l1 = out.lambda[0], l2 = out.lambda[1], l3 = out.lambda[2];
    if (l1 <= 0.0) {
        throw EigenvalueOrderError("weight matrix must be positive definite");
    }
    if (l3 - l2 <= 1e-9 * l3) {
        throw EigenvalueOrderError("largest eigenvalue must be strictly separated from the middle one");
    }

    if (l2 - l1 <= 1e-9 * l3) {
        // Equal small pair: the constraint only fixes alpha3; the free
        // remainder goes to the first axis.
        out.branch = 1;
        out.alpha = {std::sqrt(l2 / l3), 0.0, std::sqrt(1.0 - l2 / l3)};
        out.delta_star = l1 * (1.0 - l2 / l3);
    } else if (l2 >= l1 * l3 / (l3 - l1) * (1.0 - 1e-3)) {
        // Boundary cases land here; rel tolerance 1e-3.
        out.branch = 2;
        out.alpha = {0.0, std::sqrt(l2 / (l2 + l3)), std::sqrt(l3 / (l2 + l3))};
        out.delta_star = l1;
    } else {
        // s = sum_l sum_{k != l} lam_l lam_k; the complementary-product
        // coefficients sum to one, and the gap 4 lam1 lam2 lam3 / s meets
        // the second branch continuously at its boundary.
        out.branch = 3;
        const double s = 2.0 * (l1 * l2 + l1 * l3 + l2 * l3);
        out.alpha = {std::sqrt(std::max(0.0, 1.0 - 4.0 * l2 * l3 / s)),
                     std::sqrt(std::max(0.0, 1.0 - 4.0 * l1 * l3 / s)),
                     std::sqrt(std::max(0.0, 1.0 - 4.0 * l1 * l2 / s))};
        out.delta_star = 4.0 * l1 * l2 * l3 / s;
    }
    out.u = (out.alpha[0] * out.axes[0] + out.alpha[1] * out.axes[1] + out.alpha[2] * out.axes[2])
                .normalized();
    out.gamma_bound = 4.0 * out.delta_star / (kPi * kPi);
    return out;
}

ObserverParams synthesize_params(const Mat3& A, std::vector<double> xi_set, double gamma_fraction,
                                 double delta_fraction, double k_R, double k_xi) {
    require_xi_set(xi_set);
    if (gamma_fraction <= 0.0 || gamma_fraction >= 1.0 || delta_fraction <= 0.0 ||
        delta_fraction >= 1.0) {
        throw std::invalid_argument("synthesis fractions must lie in (0, 1)");
    }
    const SynthesisAnalysis info = analyze_for_synthesis(A);
    double xi_max = 0.0;
    for (double xi : xi_set) {
        xi_max = std::max(xi_max, std::abs(xi));
    }
    ObserverParams p;
    p.xi_set = std::move(xi_set);
    p.A = A;
    p.u = info.u;
    p.gamma = gamma_fraction * info.gamma_bound;
    p.delta = delta_fraction * (info.gamma_bound - p.gamma) * xi_max * xi_max / 2.0;
    p.k_R = k_R;
    p.k_xi = k_xi;
    return p;
}

bool ParamReport::all_ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const ParamCheck& c) { return c.ok; });
}

ParamReport check_params(const ObserverParams& p) {
    ParamReport rep;
    auto add = [&rep](const std::string& name, bool ok, const std::string& detail) {
        rep.checks.push_back({name, ok, detail});
    };
    std::ostringstream os;

    const bool xi_nonempty = !p.xi_set.empty();
    add("xi_set nonempty", xi_nonempty, "size " + std::to_string(p.xi_set.size()));

    bool xi_range = xi_nonempty;
    double xi_max = 0.0;
    for (double xi : p.xi_set) {
        const double m = std::abs(xi);
        xi_range = xi_range && m > 0.0 && m <= kPi + 1e-12;
        xi_max = std::max(xi_max, m);
    }
    add("xi magnitudes in (0, pi]", xi_range, "");

    const bool symmetric = (p.A - p.A.transpose()).norm() <= 1e-9 * (1.0 + p.A.norm());
    add("A symmetric", symmetric, "");
    if (!symmetric) {
        return rep;
    }

    Eigen::SelfAdjointEigenSolver<Mat3> eig(p.A);
    const double l1 = eig.eigenvalues()(0), l2 = eig.eigenvalues()(1), l3 = eig.eigenvalues()(2);
    os.str("");
    os << "eigenvalues " << l1 << ", " << l2 << ", " << l3;
    add("A positive definite", l1 > 0.0, os.str());
    add("A eigenvalue gap lam2 < lam3", l3 - l2 > 1e-9 * std::abs(l3), "");

    const double unorm = p.u.norm();
    os.str("");
    os << "||u|| = " << unorm;
    add("u unit norm", std::abs(unorm - 1.0) <= 1e-9, os.str());

    double gamma_bound = 0.0;
    bool have_bound = false;
    try {
        gamma_bound = analyze_for_synthesis(p.A).gamma_bound;
        have_bound = true;
    } catch (const std::exception&) {
        // Eigenvalue checks above already flag the cause.
    }
    if (have_bound) {
        os.str("");
        os << "gamma = " << p.gamma << ", bound = " << gamma_bound;
        add("gamma in (0, 4 delta*/pi^2)", p.gamma > 0.0 && p.gamma < gamma_bound, os.str());

        const double delta_bound = (gamma_bound - p.gamma) * xi_max * xi_max / 2.0;
        os.str("");
        os << "delta = " << p.delta << ", bound = " << delta_bound;
        add("delta in (0, (bound - gamma) xi_max^2 / 2)",
            p.delta > 0.0 && gamma_bound > p.gamma && p.delta < delta_bound, os.str());
    }

    add("k_R positive", p.k_R > 0.0, "");
    add("k_xi positive", p.k_xi > 0.0, "");

    // Empirical gap at the undesired critical points: R = R_a(pi, v) for
    // each eigenvector v of A, paired with xi = 0.
    if (xi_nonempty && xi_range && l1 > 0.0) {
        bool gap_ok = true;
        double worst = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 3; ++i) {
            Vec3 v = eig.eigenvectors().col(i);
            const Rotation r = angle_axis(kPi, v.normalized());
            double best = std::numeric_limits<double>::infinity();
            for (double xi : p.xi_set) {
                best = std::min(best, potential_u(r, xi, p));
            }
            const double gap = potential_u(r, 0.0, p) - best;
            worst = std::min(worst, gap);
            gap_ok = gap_ok && gap > p.delta;
        }
        os.str("");
        os << "min gap " << worst << " vs delta " << p.delta;
        add("potential gap at pi-rotation critical points > delta", gap_ok, os.str());
    }
    return rep;
}

RelativeMeasurements measure_relative(const TreeTopology& topo, const std::vector<Rotation>& truth) {
    RelativeMeasurements meas;
    meas.reserve(topo.n_edges());
    for (int k = 0; k < topo.n_edges(); ++k) {
        meas.push_back(truth[topo.head(k)].transposed() * truth[topo.tail(k)]);
    }
    return meas;
}

EdgeRotations relative_error_from_measurements(const TreeTopology& topo,
                                               const RelativeMeasurements& meas,
                                               const AttitudeEstimates& est) {
    EdgeRotations r_bar;
    r_bar.reserve(topo.n_edges());
    for (int k = 0; k < topo.n_edges(); ++k) {
        const Mat3 raw = est[topo.tail(k)].matrix() * meas[k].matrix().transpose() *
                         est[topo.head(k)].matrix().transpose();
        r_bar.push_back(reorthonormalize(raw));
    }
    return r_bar;
}

std::vector<Vec3> sigma_continuous(const TreeTopology& topo, const RelativeMeasurements& meas,
                                   const AttitudeEstimates& est, const Mat3& A) {
    std::vector<Vec3> sigma(topo.n_agents(), Vec3::Zero());
    for (int k = 0; k < topo.n_edges(); ++k) {
        const int i = topo.head(k), j = topo.tail(k);
        // Head side sees R_ij, tail side the transposed measurement.
        sigma[i] -= psi(A * est[j].matrix() * meas[k].matrix().transpose() *
                        est[i].matrix().transpose());
        sigma[j] -= psi(A * est[i].matrix() * meas[k].matrix() * est[j].matrix().transpose());
    }
    return sigma;
}

double potential_u(const Rotation& r_bar, double xi, const ObserverParams& p) {
    const Mat3 shifted = r_bar.matrix() * angle_axis(xi, p.u).matrix();
    return (p.A * (Mat3::Identity() - shifted)).trace() + 0.5 * p.gamma * xi * xi;
}

Vec3 grad_r(const Rotation& r_bar, double xi, const ObserverParams& p) {
    const Mat3 q = angle_axis(xi, p.u).matrix();
    return q * psi(p.A * r_bar.matrix() * q);
}

double grad_xi(const Rotation& r_bar, double xi, const ObserverParams& p) {
    const Mat3 q = angle_axis(xi, p.u).matrix();
    return p.gamma * xi + 2.0 * p.u.dot(psi(p.A * r_bar.matrix() * q));
}

double xi_star(const Rotation& r_bar, const ObserverParams& p) {
    require_xi_set(p.xi_set);
    double best_xi = p.xi_set.front();
    double best_val = potential_u(r_bar, best_xi, p);
    for (std::size_t i = 1; i < p.xi_set.size(); ++i) {
        const double val = potential_u(r_bar, p.xi_set[i], p);
        if (val < best_val) {
            best_val = val;
            best_xi = p.xi_set[i];
        }
    }
    return best_xi;
}

double potential_total(const HybridEdgeState& s, const ObserverParams& p) {
    double total = 0.0;
    for (std::size_t k = 0; k < s.r_bar.size(); ++k) {
        total += potential_u(s.r_bar[k], s.xi[k], p);
    }
    return total;
}

double lyapunov_continuous(const EdgeRotations& r_bar, const Mat3& A) {
    double total = 0.0;
    for (const Rotation& r : r_bar) {
        total += (A * (Mat3::Identity() - r.matrix())).trace();
    }
    return total;
}

JumpSetMembership in_jump_set(const HybridEdgeState& s, const ObserverParams& p) {
    JumpSetMembership m;
    m.edge_flags.resize(s.r_bar.size(), false);
    for (std::size_t k = 0; k < s.r_bar.size(); ++k) {
        const double here = potential_u(s.r_bar[k], s.xi[k], p);
        const double best = potential_u(s.r_bar[k], xi_star(s.r_bar[k], p), p);
        if (here - best >= p.delta) {
            m.edge_flags[k] = true;
            m.any = true;
        }
    }
    return m;
}

HybridEdgeState apply_jump(const HybridEdgeState& s, const ObserverParams& p) {
    const JumpSetMembership m = in_jump_set(s, p);
    if (!m.any) {
        throw NotInJumpSetError("state is not in the jump set");
    }
    HybridEdgeState out = s;
    for (std::size_t k = 0; k < s.r_bar.size(); ++k) {
        if (m.edge_flags[k]) {
            out.xi[k] = xi_star(s.r_bar[k], p);
        }
    }
    return out;
}

std::vector<Vec3> sigma_hybrid(const TreeTopology& topo, const HybridEdgeState& s,
                               const ObserverParams& p) {
    std::vector<Vec3> sigma(topo.n_agents(), Vec3::Zero());
    for (int k = 0; k < topo.n_edges(); ++k) {
        const Vec3 g = grad_r(s.r_bar[k], s.xi[k], p);
        sigma[topo.head(k)] -= g;
        sigma[topo.tail(k)] += s.r_bar[k].matrix() * g;
    }
    return sigma;
}

std::vector<double> xi_flow(const HybridEdgeState& s, const ObserverParams& p) {
    std::vector<double> dot(s.xi.size());
    for (std::size_t k = 0; k < s.xi.size(); ++k) {
        dot[k] = -p.k_xi * grad_xi(s.r_bar[k], s.xi[k], p);
    }
    return dot;
}

std::vector<Mat3> observer_flow(const TreeTopology& topo, const AttitudeEstimates& est,
                                const std::vector<Vec3>& omega_body,
                                const std::vector<Vec3>& sigma, double k_R) {
    std::vector<Mat3> dot(topo.n_agents());
    for (int i = 0; i < topo.n_agents(); ++i) {
        const Vec3 w = omega_body[i] - k_R * (est[i].matrix().transpose() * sigma[i]);
        dot[i] = est[i].matrix() * hat(w);
    }
    return dot;
}

GradientAudit run_gradient_audit(const ObserverParams& p, int samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> xi_dist(-kPi, kPi);
    const double h = 1e-5;

    GradientAudit audit;
    audit.samples = samples;
    for (int n = 0; n < samples; ++n) {
        const Rotation r = random_rotation(rng);
        const double xi = xi_dist(rng);

        // The metric pairing doubles skew components, so the directional
        // derivative along exp(eps hat(e_i)) equals twice grad_r[i].
        const Vec3 g = grad_r(r, xi, p);
        Vec3 fd;
        for (int i = 0; i < 3; ++i) {
            Vec3 dir = Vec3::Zero();
            dir(i) = h;
            const double up = potential_u(Rotation::from_matrix((r * exp_so3(dir)).matrix()), xi, p);
            const double dn = potential_u(Rotation::from_matrix((r * exp_so3(-dir)).matrix()), xi, p);
            fd(i) = (up - dn) / (2.0 * h);
        }
        const double err_rot = (0.5 * fd - g).norm() / std::max(1.0, g.norm());
        audit.max_rel_err_rot = std::max(audit.max_rel_err_rot, err_rot);

        const double gx = grad_xi(r, xi, p);
        const double fdx = (potential_u(r, xi + h, p) - potential_u(r, xi - h, p)) / (2.0 * h);
        const double err_xi = std::abs(fdx - gx) / std::max(1.0, std::abs(gx));
        audit.max_rel_err_xi = std::max(audit.max_rel_err_xi, err_xi);
    }
    return audit;
}

}  // namespace attsync
