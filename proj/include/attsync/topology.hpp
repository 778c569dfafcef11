#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "attsync/so3.hpp"

namespace attsync {

struct GraphError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct SelfLoopError : GraphError {
    using GraphError::GraphError;
};
struct DuplicateEdgeError : GraphError {
    using GraphError::GraphError;
};
struct CycleError : GraphError {
    using GraphError::GraphError;
};
struct NotConnectedError : GraphError {
    using GraphError::GraphError;
};
struct AgentIdError : GraphError {
    using GraphError::GraphError;
};

/// Validated undirected tree over agents 1..N with an edge orientation
/// fixed by the (head, tail) order of the input listing.
///
/// Internally agents and edges are indexed from 0; the public edge list
/// keeps the 1-based ids used in scenario files.
class TreeTopology {
public:
    /// Checks self-loops, duplicates (in either orientation), cycles and
    /// connectivity. A valid tree has exactly n_agents - 1 edges.
    static TreeTopology validate(int n_agents, std::vector<std::pair<int, int>> edges);

    int n_agents() const { return n_; }
    int n_edges() const { return static_cast<int>(head_.size()); }

    /// 0-based head/tail agent of 0-based edge k.
    int head(int k) const { return head_[k]; }
    int tail(int k) const { return tail_[k]; }

    /// Edge list as given at construction (1-based agent ids).
    const std::vector<std::pair<int, int>>& edges() const { return edges_1based_; }

    /// Edges where agent i (0-based) is the head / the tail.
    const std::vector<int>& head_edges(int i) const { return head_edges_[i]; }
    const std::vector<int>& tail_edges(int i) const { return tail_edges_[i]; }
    const std::vector<int>& neighbors(int i) const { return neighbors_[i]; }

    /// N x M incidence matrix: +1 at the head of an edge, -1 at the tail.
    Eigen::MatrixXd incidence_matrix() const;

    /// Graph Laplacian H * H^T.
    Eigen::MatrixXd laplacian() const;

private:
    TreeTopology() = default;

    int n_ = 0;
    std::vector<std::pair<int, int>> edges_1based_;
    std::vector<int> head_, tail_;
    std::vector<std::vector<int>> head_edges_, tail_edges_, neighbors_;
};

/// Per-edge relative rotations, in the topology's edge order.
using EdgeRotations = std::vector<Rotation>;

/// 3N x 3M block incidence matrix: block (i, k) is I3 if agent i heads
/// edge k, -R_k if it tails it, zero otherwise. Full column rank for
/// trees, whatever the edge rotations.
Eigen::MatrixXd block_h_bar(const TreeTopology& topo, const EdgeRotations& rel);

/// Bearing Laplacian (H kron I3) diag(P_bk) (H kron I3)^T from per-edge
/// unit bearings. Positive semi-definite; kernel contains 1_N kron w.
Eigen::MatrixXd bearing_laplacian(const TreeTopology& topo, const std::vector<Vec3>& bearings);

/// Dense Kronecker product.
Eigen::MatrixXd kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace attsync
