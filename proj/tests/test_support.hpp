#pragma once

#include <random>
#include <utility>
#include <vector>

#include "attsync/observer.hpp"
#include "attsync/random.hpp"
#include "attsync/so3.hpp"
#include "attsync/topology.hpp"

namespace attsync::testing {

/// Random tree by uniform attachment: agent i joins a random earlier
/// agent, with random edge orientation.
inline TreeTopology random_tree(std::mt19937_64& rng, int n_agents) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 2; i <= n_agents; ++i) {
        std::uniform_int_distribution<int> pick(1, i - 1);
        const int other = pick(rng);
        if (std::bernoulli_distribution(0.5)(rng)) {
            edges.emplace_back(i, other);
        } else {
            edges.emplace_back(other, i);
        }
    }
    return TreeTopology::validate(n_agents, edges);
}

inline EdgeRotations random_edge_rotations(std::mt19937_64& rng, const TreeTopology& topo) {
    EdgeRotations rel;
    for (int k = 0; k < topo.n_edges(); ++k) {
        rel.push_back(random_rotation(rng));
    }
    return rel;
}

/// Independent numeric derivative of the edge potential along the body
/// direction e_i at the rotation argument. The metric pairing doubles
/// skew components, so this equals 2 * grad_r[i].
inline double fd_potential_rot(const Rotation& r, double xi, const ObserverParams& p, int axis,
                               double h = 1e-6) {
    Vec3 dir = Vec3::Zero();
    dir(axis) = h;
    const double up = potential_u(reorthonormalize((r * exp_so3(dir)).matrix()), xi, p);
    const double dn = potential_u(reorthonormalize((r * exp_so3(-dir)).matrix()), xi, p);
    return (up - dn) / (2.0 * h);
}

inline double fd_potential_xi(const Rotation& r, double xi, const ObserverParams& p,
                              double h = 1e-6) {
    return (potential_u(r, xi + h, p) - potential_u(r, xi - h, p)) / (2.0 * h);
}

/// Paper-style parameter set used across the observer tests.
inline ObserverParams reference_params() {
    ObserverParams p;
    p.xi_set = {0.08 * 3.14159265358979323846};
    p.A = Vec3(5.0, 8.57, 12.0).asDiagonal();
    p.u = Vec3(0.0, 0.6455, 0.7638).normalized();
    p.gamma = 1.9251;
    p.delta = 0.0030;
    p.k_R = 1.1;
    p.k_xi = 5.0;
    return p;
}

}  // namespace attsync::testing
