#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace attsync {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct NotSkewError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct NotUnitError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ZeroVectorError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct DegenerateError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct NotRotationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Tolerance on ||R^T R - I||_F and |det(R) - 1| for validated rotations.
inline constexpr double kRotationTol = 1e-9;

/// Drift threshold above which an integrated rotation gets re-projected.
inline constexpr double kDriftRepairTol = 1e-8;

class Rotation;
Rotation angle_axis(double theta, const Vec3& axis);
Rotation exp_so3(const Vec3& w);
Rotation reorthonormalize(const Mat3& m);

/// A 3x3 orthogonal matrix with determinant +1.
///
/// Checked construction goes through from_matrix(); the factory functions
/// (angle_axis, exp_so3, reorthonormalize) produce valid rotations by
/// construction and skip the check.
class Rotation {
public:
    Rotation() : m_(Mat3::Identity()) {}

    static Rotation identity() { return Rotation(); }

    /// Validates orthonormality and determinant within kRotationTol.
    static Rotation from_matrix(const Mat3& m);

    const Mat3& matrix() const { return m_; }

    Rotation transposed() const { return Rotation(m_.transpose(), Unchecked{}); }

    Rotation operator*(const Rotation& o) const { return Rotation(m_ * o.m_, Unchecked{}); }
    Vec3 operator*(const Vec3& v) const { return m_ * v; }

    /// ||R^T R - I||_F, useful for drift monitoring.
    double ortho_defect() const {
        return (m_.transpose() * m_ - Mat3::Identity()).norm();
    }

private:
    struct Unchecked {};
    Rotation(const Mat3& m, Unchecked) : m_(m) {}

    friend Rotation angle_axis(double, const Vec3&);
    friend Rotation exp_so3(const Vec3&);
    friend Rotation reorthonormalize(const Mat3&);

    Mat3 m_;
};

/// Skew-symmetric matrix such that hat(v) * w == v x w.
inline Mat3 hat(const Vec3& v) {
    Mat3 s;
    s << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
        -v.y(), v.x(), 0.0;
    return s;
}

/// Inverse of hat(); requires the argument to be skew within 1e-9.
Vec3 vex(const Mat3& s);

/// Antisymmetric projection (B - B^T) / 2.
inline Mat3 pa(const Mat3& b) {
    return 0.5 * (b - b.transpose());
}

/// vex of the antisymmetric projection: 0.5 * [c32-c23, c13-c31, c21-c12].
inline Vec3 psi(const Mat3& c) {
    return 0.5 * Vec3(c(2, 1) - c(1, 2), c(0, 2) - c(2, 0), c(1, 0) - c(0, 1));
}

/// Rodrigues rotation by theta about a unit axis.
Rotation angle_axis(double theta, const Vec3& axis);

/// Exponential map; second-order Taylor branch below ||w|| = 1e-8.
Rotation exp_so3(const Vec3& w);

/// Normalized distance to the identity, sqrt(tr(I - R) / 4) in [0, 1].
inline double dist_identity(const Rotation& r) {
    const double q = 0.25 * (Mat3::Identity() - r.matrix()).trace();
    return std::sqrt(std::clamp(q, 0.0, 1.0));
}

/// P_x = I - x x^T / ||x||^2. Symmetric, idempotent, kills x.
Mat3 orthogonal_projector(const Vec3& x);

/// Nearest rotation in Frobenius norm (symmetric polar factor).
/// Requires det(m) > 1e-9.
Rotation reorthonormalize(const Mat3& m);

}  // namespace attsync
