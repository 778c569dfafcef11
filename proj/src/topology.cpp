#include "attsync/topology.hpp"

#include <numeric>
#include <set>
#include <string>

namespace attsync {

namespace {

int uf_find(std::vector<int>& parent, int a) {
    while (parent[a] != a) {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    return a;
}

std::string edge_str(int head, int tail) {
    return "(" + std::to_string(head) + "," + std::to_string(tail) + ")";
}

}  // namespace

TreeTopology TreeTopology::validate(int n_agents, std::vector<std::pair<int, int>> edges) {
    if (n_agents < 1) {
        throw AgentIdError("agent count must be positive");
    }
    TreeTopology t;
    t.n_ = n_agents;
    t.edges_1based_ = std::move(edges);

    const int m = static_cast<int>(t.edges_1based_.size());
    if (m < n_agents - 1) {
        throw NotConnectedError("tree on " + std::to_string(n_agents) + " agents needs " +
                                std::to_string(n_agents - 1) + " edges, got " + std::to_string(m));
    }

    t.head_.reserve(m);
    t.tail_.reserve(m);
    t.head_edges_.assign(n_agents, {});
    t.tail_edges_.assign(n_agents, {});
    t.neighbors_.assign(n_agents, {});

    std::vector<int> parent(n_agents);
    std::iota(parent.begin(), parent.end(), 0);
    std::set<std::pair<int, int>> seen;

    for (int k = 0; k < m; ++k) {
        const auto [h1, t1] = t.edges_1based_[k];
        if (h1 < 1 || h1 > n_agents || t1 < 1 || t1 > n_agents) {
            throw AgentIdError("edge " + edge_str(h1, t1) + " references an agent outside 1.." +
                               std::to_string(n_agents));
        }
        if (h1 == t1) {
            throw SelfLoopError("self-loop at agent " + std::to_string(h1));
        }
        const auto key = std::minmax(h1, t1);
        if (!seen.insert(key).second) {
            throw DuplicateEdgeError("duplicate edge " + edge_str(h1, t1));
        }
        const int h = h1 - 1, tl = t1 - 1;
        if (uf_find(parent, h) == uf_find(parent, tl)) {
            throw CycleError("edge " + edge_str(h1, t1) + " closes a cycle");
        }
        parent[uf_find(parent, h)] = uf_find(parent, tl);

        t.head_.push_back(h);
        t.tail_.push_back(tl);
        t.head_edges_[h].push_back(k);
        t.tail_edges_[tl].push_back(k);
        t.neighbors_[h].push_back(tl);
        t.neighbors_[tl].push_back(h);
    }

    const int root = uf_find(parent, 0);
    for (int i = 1; i < n_agents; ++i) {
        if (uf_find(parent, i) != root) {
            throw NotConnectedError("agent " + std::to_string(i + 1) + " is not connected to agent 1");
        }
    }
    // m >= n-1, acyclic and connected together force m == n-1.
    return t;
}

Eigen::MatrixXd TreeTopology::incidence_matrix() const {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n_, n_edges());
    for (int k = 0; k < n_edges(); ++k) {
        h(head_[k], k) = 1.0;
        h(tail_[k], k) = -1.0;
    }
    return h;
}

Eigen::MatrixXd TreeTopology::laplacian() const {
    const Eigen::MatrixXd h = incidence_matrix();
    return h * h.transpose();
}

Eigen::MatrixXd block_h_bar(const TreeTopology& topo, const EdgeRotations& rel) {
    if (static_cast<int>(rel.size()) != topo.n_edges()) {
        throw std::invalid_argument("edge rotation count does not match topology");
    }
    const int n = topo.n_agents(), m = topo.n_edges();
    Eigen::MatrixXd hbar = Eigen::MatrixXd::Zero(3 * n, 3 * m);
    for (int k = 0; k < m; ++k) {
        hbar.block<3, 3>(3 * topo.head(k), 3 * k) = Mat3::Identity();
        hbar.block<3, 3>(3 * topo.tail(k), 3 * k) = -rel[k].matrix();
    }
    return hbar;
}

Eigen::MatrixXd kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

Eigen::MatrixXd bearing_laplacian(const TreeTopology& topo, const std::vector<Vec3>& bearings) {
    if (static_cast<int>(bearings.size()) != topo.n_edges()) {
        throw std::invalid_argument("bearing count does not match topology");
    }
    const int n = topo.n_agents(), m = topo.n_edges();
    Eigen::MatrixXd lb = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    for (int k = 0; k < m; ++k) {
        if (std::abs(bearings[k].norm() - 1.0) > 1e-9) {
            throw NotUnitError("bearing of edge " + std::to_string(k + 1) + " is not unit norm");
        }
        const Mat3 p = orthogonal_projector(bearings[k]);
        const int i = topo.head(k), j = topo.tail(k);
        lb.block<3, 3>(3 * i, 3 * i) += p;
        lb.block<3, 3>(3 * j, 3 * j) += p;
        lb.block<3, 3>(3 * i, 3 * j) -= p;
        lb.block<3, 3>(3 * j, 3 * i) -= p;
    }
    return lb;
}

}  // namespace attsync
