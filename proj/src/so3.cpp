#include "attsync/so3.hpp"

namespace attsync {

Rotation Rotation::from_matrix(const Mat3& m) {
    const double defect = (m.transpose() * m - Mat3::Identity()).norm();
    if (defect > kRotationTol) {
        throw NotRotationError("matrix is not orthonormal (defect " + std::to_string(defect) + ")");
    }
    if (std::abs(m.determinant() - 1.0) > kRotationTol) {
        throw NotRotationError("matrix determinant is not +1");
    }
    return Rotation(m, Unchecked{});
}

Vec3 vex(const Mat3& s) {
    const double defect = (s + s.transpose()).norm();
    if (defect > 1e-9) {
        throw NotSkewError("matrix is not skew-symmetric (defect " + std::to_string(defect) + ")");
    }
    return Vec3(s(2, 1), s(0, 2), s(1, 0));
}

Rotation angle_axis(double theta, const Vec3& axis) {
    if (std::abs(axis.norm() - 1.0) > 1e-9) {
        throw NotUnitError("rotation axis must be unit norm");
    }
    const Mat3 k = hat(axis);
    Mat3 r = Mat3::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * k * k;
    return Rotation(r, Rotation::Unchecked{});
}

Rotation exp_so3(const Vec3& w) {
    const double theta = w.norm();
    if (theta < 1e-8) {
        const Mat3 k = hat(w);
        return Rotation(Mat3::Identity() + k + 0.5 * k * k, Rotation::Unchecked{});
    }
    return angle_axis(theta, w / theta);
}

Mat3 orthogonal_projector(const Vec3& x) {
    const double n2 = x.squaredNorm();
    if (n2 <= 1e-24) {
        throw ZeroVectorError("cannot project along a zero vector");
    }
    return Mat3::Identity() - x * x.transpose() / n2;
}

Rotation reorthonormalize(const Mat3& m) {
    if (m.determinant() <= 1e-9) {
        throw DegenerateError("matrix determinant too small to repair");
    }
    // Newton iteration for the orthogonal polar factor; converges
    // quadratically and is cheap for near-orthonormal input.
    Mat3 x = m;
    for (int it = 0; it < 40; ++it) {
        const double defect = (x.transpose() * x - Mat3::Identity()).norm();
        if (defect < 1e-13) {
            return Rotation(x, Rotation::Unchecked{});
        }
        x = 0.5 * (x + x.transpose().inverse());
    }
    // Fallback for badly conditioned input.
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
        Mat3 flip = Mat3::Identity();
        flip(2, 2) = -1.0;
        r = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return Rotation(r, Rotation::Unchecked{});
}

}  // namespace attsync
