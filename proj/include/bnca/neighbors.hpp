#ifndef BNCA_NEIGHBORS_HPP
#define BNCA_NEIGHBORS_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "bnca/dataset.hpp"
#include "bnca/eigenbasis.hpp"

namespace bnca {

/// K-nearest-neighbor sets N_i, fixed once at construction. Row i lists the
/// K nearest other points, nearest first; i itself never appears.
struct NeighborGraph {
    Eigen::Index k = 0;
    std::vector<std::vector<Eigen::Index>> neighbor_ids;

    Eigen::Index size() const { return static_cast<Eigen::Index>(neighbor_ids.size()); }
};

namespace detail {

// K smallest of `sq_dists` excluding `self` (pass -1 to keep all), ties broken
// by lower index.
inline std::vector<Eigen::Index> k_nearest(const Eigen::VectorXd& sq_dists, Eigen::Index self,
                                           Eigen::Index k) {
    std::vector<std::pair<double, Eigen::Index>> order;
    order.reserve(static_cast<std::size_t>(sq_dists.size()));
    for (Eigen::Index j = 0; j < sq_dists.size(); ++j)
        if (j != self) order.emplace_back(sq_dists(j), j);
    std::stable_sort(order.begin(), order.end());
    std::vector<Eigen::Index> ids(static_cast<std::size_t>(k));
    for (Eigen::Index t = 0; t < k; ++t) ids[static_cast<std::size_t>(t)] = order[static_cast<std::size_t>(t)].second;
    return ids;
}

}  // namespace detail

/// Build the neighbor sets under squared Euclidean distance, either in raw
/// feature space or in the basis projection when one is supplied.
inline NeighborGraph build_graph(const Dataset& ds, Eigen::Index k, const EigenBasis* basis = nullptr) {
    const Eigen::Index n = ds.size();
    if (k < 1 || k > n - 1) throw std::invalid_argument("build_graph: K must be in [1, N-1]");

    Eigen::MatrixXd coords = basis ? (ds.points * basis->vectors).eval() : ds.points;

    NeighborGraph graph;
    graph.k = k;
    graph.neighbor_ids.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd d2 = (coords.rowwise() - coords.row(i)).rowwise().squaredNorm();
        graph.neighbor_ids[static_cast<std::size_t>(i)] = detail::k_nearest(d2, i, k);
    }
    return graph;
}

/// Neighbor set of an out-of-sample query against the training points, under
/// the same distance convention as build_graph.
inline std::vector<Eigen::Index> query_neighbors(const Dataset& train, const Eigen::VectorXd& x_q,
                                                 Eigen::Index k, const EigenBasis* basis = nullptr) {
    const Eigen::Index n = train.size();
    if (k < 1 || k > n) throw std::invalid_argument("query_neighbors: K must be in [1, N]");
    Eigen::MatrixXd coords = basis ? (train.points * basis->vectors).eval() : train.points;
    Eigen::VectorXd q = basis ? basis->project(x_q) : x_q;
    Eigen::VectorXd d2 = (coords.rowwise() - q.transpose()).rowwise().squaredNorm();
    return detail::k_nearest(d2, -1, k);
}

}  // namespace bnca

#endif  // BNCA_NEIGHBORS_HPP
