#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "attsync/topology.hpp"
#include "test_support.hpp"

using namespace attsync;

TEST_CASE("validate_tree accepts the smallest tree") {
    const TreeTopology t = TreeTopology::validate(2, {{1, 2}});
    CHECK(t.n_agents() == 2);
    CHECK(t.n_edges() == 1);
    CHECK(t.head(0) == 0);
    CHECK(t.tail(0) == 1);
    CHECK(t.head_edges(0) == std::vector<int>{0});
    CHECK(t.tail_edges(1) == std::vector<int>{0});
    CHECK(t.head_edges(1).empty());
}

TEST_CASE("validate_tree rejects malformed graphs") {
    CHECK_THROWS_AS(TreeTopology::validate(3, {{1, 2}, {2, 3}, {3, 1}}), CycleError);
    CHECK_THROWS_AS(TreeTopology::validate(2, {{1, 1}}), SelfLoopError);
    CHECK_THROWS_AS(TreeTopology::validate(3, {{1, 2}, {2, 1}, {2, 3}}), DuplicateEdgeError);
    CHECK_THROWS_AS(TreeTopology::validate(4, {{1, 2}, {3, 4}}), NotConnectedError);
    CHECK_THROWS_AS(TreeTopology::validate(3, {{1, 2}, {2, 5}}), AgentIdError);
    CHECK_THROWS_AS(TreeTopology::validate(4, {{1, 2}, {2, 3}}), NotConnectedError);
}

TEST_CASE("five-agent path matches the published neighbor sets") {
    const TreeTopology t = TreeTopology::validate(5, {{1, 2}, {2, 3}, {3, 4}, {4, 5}});
    CHECK(t.n_edges() == 4);
    CHECK(t.neighbors(0) == std::vector<int>{1});
    CHECK(t.neighbors(1) == std::vector<int>{0, 2});
    CHECK(t.neighbors(2) == std::vector<int>{1, 3});
    CHECK(t.neighbors(3) == std::vector<int>{2, 4});
    CHECK(t.neighbors(4) == std::vector<int>{3});
}

TEST_CASE("incidence matrix structure and rank") {
    const TreeTopology two = TreeTopology::validate(2, {{1, 2}});
    Eigen::MatrixXd h = two.incidence_matrix();
    CHECK(h(0, 0) == 1.0);
    CHECK(h(1, 0) == -1.0);

    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = std::uniform_int_distribution<int>(2, 8)(rng);
        const TreeTopology t = testing::random_tree(rng, n);
        const Eigen::MatrixXd hh = t.incidence_matrix();
        CHECK((hh.transpose() * Eigen::VectorXd::Ones(n)).norm() == 0.0);
        CHECK(Eigen::FullPivLU<Eigen::MatrixXd>(hh).rank() == n - 1);
    }
}

TEST_CASE("laplacian of the three-agent path") {
    const TreeTopology t = TreeTopology::validate(3, {{1, 2}, {2, 3}});
    Eigen::MatrixXd expected(3, 3);
    expected << 1, -1, 0, -1, 2, -1, 0, -1, 1;
    CHECK((t.laplacian() - expected).norm() == doctest::Approx(0.0));
}

TEST_CASE("laplacian properties on random trees") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = std::uniform_int_distribution<int>(2, 8)(rng);
        const TreeTopology t = testing::random_tree(rng, n);
        const Eigen::MatrixXd lap = t.laplacian();
        const Eigen::MatrixXd h = t.incidence_matrix();
        CHECK((lap - h * h.transpose()).norm() == 0.0);
        CHECK((lap - lap.transpose()).norm() == 0.0);
        CHECK((lap * Eigen::VectorXd::Ones(n)).norm() < 1e-12);

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lap);
        CHECK(std::abs(eig.eigenvalues()(0)) < 1e-12);
        if (n > 1) {
            CHECK(eig.eigenvalues()(1) > 1e-8);
        }
    }
}

TEST_CASE("block incidence with identity weights is H kron I3") {
    std::mt19937_64 rng(23);
    const TreeTopology t = testing::random_tree(rng, 6);
    const EdgeRotations rel(t.n_edges(), Rotation::identity());
    const Eigen::MatrixXd hbar = block_h_bar(t, rel);
    const Eigen::MatrixXd expected = kronecker(t.incidence_matrix(), Mat3::Identity());
    CHECK((hbar - expected).norm() == doctest::Approx(0.0));
}

TEST_CASE("single-edge block incidence has gram 2 I3") {
    std::mt19937_64 rng(24);
    const TreeTopology t = TreeTopology::validate(2, {{1, 2}});
    const EdgeRotations rel{random_rotation(rng)};
    const Eigen::MatrixXd hbar = block_h_bar(t, rel);
    CHECK(hbar.rows() == 6);
    CHECK(hbar.cols() == 3);
    CHECK((hbar.transpose() * hbar - 2.0 * Mat3::Identity()).norm() < 1e-12);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(hbar);
    CHECK(svd.singularValues().minCoeff() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("block incidence keeps full column rank on random instances") {
    std::mt19937_64 rng(25);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = std::uniform_int_distribution<int>(2, 8)(rng);
        const TreeTopology t = testing::random_tree(rng, n);
        const EdgeRotations rel = testing::random_edge_rotations(rng, t);
        const Eigen::MatrixXd hbar = block_h_bar(t, rel);

        Eigen::JacobiSVD<Eigen::MatrixXd> svd(hbar);
        CHECK(svd.singularValues().minCoeff() > 1e-6);

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gram(hbar.transpose() * hbar);
        CHECK(gram.eigenvalues()(0) > 1e-12);
    }
}

TEST_CASE("bearing laplacian of a single edge") {
    const TreeTopology t = TreeTopology::validate(2, {{1, 2}});
    const Eigen::MatrixXd lb = bearing_laplacian(t, {Vec3(1, 0, 0)});
    const Mat3 p = Vec3(0, 1, 1).asDiagonal();
    CHECK((lb.block<3, 3>(0, 0) - p).norm() < 1e-15);
    CHECK((lb.block<3, 3>(3, 3) - p).norm() < 1e-15);
    CHECK((lb.block<3, 3>(0, 3) + p).norm() < 1e-15);

    CHECK_THROWS_AS(bearing_laplacian(t, {Vec3(1, 1, 0)}), NotUnitError);
}

TEST_CASE("bearing laplacian kernel and ordering") {
    std::mt19937_64 rng(26);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = std::uniform_int_distribution<int>(2, 7)(rng);
        const TreeTopology t = testing::random_tree(rng, n);
        std::vector<Vec3> bearings;
        for (int k = 0; k < t.n_edges(); ++k) {
            bearings.push_back(random_unit_vector(rng));
        }
        const Eigen::MatrixXd lb = bearing_laplacian(t, bearings);
        CHECK((lb - lb.transpose()).norm() < 1e-12);

        // Common translations are unobservable.
        for (int c = 0; c < 3; ++c) {
            Eigen::VectorXd w = Eigen::VectorXd::Zero(3 * n);
            for (int i = 0; i < n; ++i) {
                w(3 * i + c) = 1.0;
            }
            CHECK((lb * w).norm() < 1e-12);
        }

        // L_B <= L kron I3 in the semidefinite order.
        const Eigen::MatrixXd gap = kronecker(t.laplacian(), Mat3::Identity()) - lb;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gap);
        CHECK(eig.eigenvalues()(0) > -1e-12);
    }
}
