#ifndef BNCA_NCA_HPP
#define BNCA_NCA_HPP

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bnca/dataset.hpp"
#include "bnca/neighbors.hpp"

namespace bnca {

/// Symmetric PSD matrix parameterizing a Mahalanobis distance.
///
/// The NCA trainer treats `a` as a linear map on point differences, so the
/// squared distance it optimizes is |a * (x_i - x_j)|^2 and the induced metric
/// is a^T a. Assembled metrics (e.g. from a gamma posterior) use the plain
/// quadratic form instead; both readings agree at the identity.
struct MahalanobisMetric {
    Eigen::MatrixXd a;

    Eigen::Index dim() const { return a.rows(); }

    static MahalanobisMetric identity(Eigen::Index d) {
        return {Eigen::MatrixXd::Identity(d, d)};
    }
    static MahalanobisMetric zero(Eigen::Index d) { return {Eigen::MatrixXd::Zero(d, d)}; }

    /// |a d|^2 -- distance with `a` acting as a transform.
    double map_sqdist(const Eigen::VectorXd& delta) const { return (a * delta).squaredNorm(); }

    /// d^T a d -- distance with `a` as the quadratic form.
    double form_sqdist(const Eigen::VectorXd& delta) const { return delta.dot(a * delta); }
};

inline void validate(const MahalanobisMetric& m) {
    if (m.a.rows() != m.a.cols()) throw std::invalid_argument("metric: matrix must be square");
    if ((m.a - m.a.transpose()).cwiseAbs().maxCoeff() >= 1e-10)
        throw std::invalid_argument("metric: matrix must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.a, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-8)
        throw std::invalid_argument("metric: matrix must be positive semidefinite");
}

/// Symmetrize and clamp negative eigenvalues to zero.
inline Eigen::MatrixXd psd_project(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    Eigen::VectorXd clamped = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
}

/// Per-point neighbor selection probabilities p_ij over N_i.
using NeighborProbs = std::vector<Eigen::VectorXd>;

namespace detail {

// Mass below which a point's same-label neighbor probability is treated as
// zero; the matching objective term is floored at log of this value.
inline constexpr double kSameLabelFloor = 1e-12;

// Softmax over negative squared distances, max-shifted.
inline Eigen::VectorXd softmax_neg(const Eigen::VectorXd& sq_dists) {
    Eigen::VectorXd shifted = -(sq_dists.array() - sq_dists.minCoeff());
    Eigen::VectorXd e = shifted.array().exp();
    return e / e.sum();
}

// Class posterior from neighbor squared distances, as the label-indicator
// weighted softmax. Handles negative distances (sampled metrics) via the
// same shift.
inline Eigen::VectorXd class_posterior_from_sqdists(const Eigen::VectorXd& sq_dists,
                                                    const std::vector<int>& neighbor_labels,
                                                    int class_count) {
    Eigen::VectorXd p = softmax_neg(sq_dists);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(class_count);
    for (Eigen::Index t = 0; t < p.size(); ++t) out(neighbor_labels[static_cast<std::size_t>(t)]) += p(t);
    return out;
}

// Rows of the transformed point set: row i is (A x_i)^T. Works for any A,
// symmetric or not, so the finite-difference oracle can probe raw entries.
inline Eigen::MatrixXd transform_rows(const Eigen::MatrixXd& points, const Eigen::MatrixXd& a) {
    return points * a.transpose();
}

}  // namespace detail

/// p_ij = exp(-d^2(i,j)) / sum_{t in N_i} exp(-d^2(i,t)) with d^2 = |A d|^2.
inline NeighborProbs neighbor_probs(const Dataset& ds, const NeighborGraph& graph,
                                    const MahalanobisMetric& metric) {
    const Eigen::MatrixXd y = detail::transform_rows(ds.points, metric.a);
    NeighborProbs probs(static_cast<std::size_t>(ds.size()));
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
        const auto& ids = graph.neighbor_ids[static_cast<std::size_t>(i)];
        Eigen::VectorXd d2(static_cast<Eigen::Index>(ids.size()));
        for (std::size_t t = 0; t < ids.size(); ++t)
            d2(static_cast<Eigen::Index>(t)) = (y.row(i) - y.row(ids[t])).squaredNorm();
        if (!d2.allFinite()) throw std::runtime_error("neighbor_probs: non-finite distance");
        probs[static_cast<std::size_t>(i)] = detail::softmax_neg(d2);
    }
    return probs;
}

namespace detail {

// Log-likelihood for an arbitrary (not necessarily symmetric) transform.
inline double loglik_any(const Dataset& ds, const NeighborGraph& graph, const Eigen::MatrixXd& a) {
    const Eigen::MatrixXd y = transform_rows(ds.points, a);
    double total = 0.0;
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
        const auto& ids = graph.neighbor_ids[static_cast<std::size_t>(i)];
        Eigen::VectorXd d2(static_cast<Eigen::Index>(ids.size()));
        for (std::size_t t = 0; t < ids.size(); ++t)
            d2(static_cast<Eigen::Index>(t)) = (y.row(i) - y.row(ids[t])).squaredNorm();
        Eigen::VectorXd p = softmax_neg(d2);
        double mass = 0.0;
        for (std::size_t t = 0; t < ids.size(); ++t)
            if (ds.labels[static_cast<std::size_t>(ids[t])] == ds.labels[static_cast<std::size_t>(i)])
                mass += p(static_cast<Eigen::Index>(t));
        total += std::log(std::max(mass, kSameLabelFloor));
    }
    return total;
}

}  // namespace detail

/// L(A) = sum_i log sum_{j in N_i} 1{y_i = y_j} p_ij. Points with zero
/// same-label neighbor mass contribute a floored constant, so the objective
/// stays finite under heavy label noise. Always <= 0.
inline double nca_objective(const Dataset& ds, const NeighborGraph& graph,
                            const MahalanobisMetric& metric) {
    return detail::loglik_any(ds, graph, metric.a);
}

/// Analytic gradient of the objective, 2A (C_E - C_I) with C_E the
/// probability-weighted total scatter of neighbor differences and C_I its
/// same-label counterpart, symmetrized onto the space of symmetric matrices.
/// Points whose same-label mass is at the objective floor contribute zero.
inline Eigen::MatrixXd nca_gradient(const Dataset& ds, const NeighborGraph& graph,
                                    const MahalanobisMetric& metric) {
    const Eigen::Index dim = ds.dim();
    const Eigen::MatrixXd y = detail::transform_rows(ds.points, metric.a);
    Eigen::MatrixXd scatter_gap = Eigen::MatrixXd::Zero(dim, dim);

    for (Eigen::Index i = 0; i < ds.size(); ++i) {
        const auto& ids = graph.neighbor_ids[static_cast<std::size_t>(i)];
        const Eigen::Index k = static_cast<Eigen::Index>(ids.size());
        Eigen::VectorXd d2(k);
        for (Eigen::Index t = 0; t < k; ++t)
            d2(t) = (y.row(i) - y.row(ids[static_cast<std::size_t>(t)])).squaredNorm();
        Eigen::VectorXd p = detail::softmax_neg(d2);

        double mass = 0.0;
        for (Eigen::Index t = 0; t < k; ++t)
            if (ds.labels[static_cast<std::size_t>(ids[static_cast<std::size_t>(t)])] ==
                ds.labels[static_cast<std::size_t>(i)])
                mass += p(t);
        if (mass <= detail::kSameLabelFloor) continue;  // floored term, locally constant

        for (Eigen::Index t = 0; t < k; ++t) {
            const Eigen::Index j = ids[static_cast<std::size_t>(t)];
            Eigen::VectorXd delta = (ds.points.row(i) - ds.points.row(j)).transpose();
            const bool same = ds.labels[static_cast<std::size_t>(j)] == ds.labels[static_cast<std::size_t>(i)];
            const double weight = p(t) - (same ? p(t) / mass : 0.0);
            scatter_gap.noalias() += weight * delta * delta.transpose();
        }
    }
    // sym(2 A G) for symmetric A
    Eigen::MatrixXd grad = metric.a * scatter_gap + scatter_gap * metric.a;
    return 0.5 * (grad + grad.transpose().eval());
}

struct NcaIterate {
    Eigen::MatrixXd a;
    double objective = 0.0;
};

struct NcaFitResult {
    MahalanobisMetric metric;
    double objective = 0.0;
    std::vector<NcaIterate> trace;  // entry 0 is the initial point
};

struct NcaTrainOptions {
    int max_iters = 100;
    double armijo_c = 1e-4;
    int max_halvings = 50;
};

/// Gradient ascent with backtracking line search; every candidate is
/// symmetrized and projected back to the PSD cone before evaluation. Returns
/// the iterate with the best objective together with the full trace.
inline NcaFitResult train_nca(const Dataset& ds, const NeighborGraph& graph,
                              const MahalanobisMetric& init, const NcaTrainOptions& opts = {}) {
    validate(init);
    MahalanobisMetric current{psd_project(init.a)};
    double objective = nca_objective(ds, graph, current);

    NcaFitResult result;
    result.trace.push_back({current.a, objective});

    double step = 1.0;
    for (int iter = 0; iter < opts.max_iters; ++iter) {
        Eigen::MatrixXd grad = nca_gradient(ds, graph, current);
        const double grad_norm2 = grad.squaredNorm();
        if (grad_norm2 < 1e-18) break;

        bool accepted = false;
        double alpha = step;
        for (int h = 0; h < opts.max_halvings; ++h, alpha *= 0.5) {
            MahalanobisMetric cand{psd_project(current.a + alpha * grad)};
            const double cand_obj = nca_objective(ds, graph, cand);
            if (!std::isfinite(cand_obj)) continue;  // divergent step, keep halving
            if (cand_obj > objective + opts.armijo_c * alpha * grad_norm2) {
                current = std::move(cand);
                objective = cand_obj;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        step = std::min(2.0 * alpha, 1e6);
        result.trace.push_back({current.a, objective});
    }

    result.metric = current;
    result.objective = objective;
    return result;
}

/// Class posterior for a query against training neighbors: the probability
/// mass each class receives under the exp(-d^2) neighbor weights.
inline Eigen::VectorXd nca_class_posterior(const Eigen::VectorXd& x_q, const Dataset& train,
                                           const std::vector<Eigen::Index>& neighbor_ids,
                                           const MahalanobisMetric& metric) {
    Eigen::VectorXd d2(static_cast<Eigen::Index>(neighbor_ids.size()));
    std::vector<int> labels(neighbor_ids.size());
    for (std::size_t t = 0; t < neighbor_ids.size(); ++t) {
        Eigen::VectorXd delta = x_q - train.points.row(neighbor_ids[t]).transpose();
        d2(static_cast<Eigen::Index>(t)) = metric.map_sqdist(delta);
        labels[t] = train.labels[static_cast<std::size_t>(neighbor_ids[t])];
    }
    return detail::class_posterior_from_sqdists(d2, labels, train.class_count);
}

}  // namespace bnca

#endif  // BNCA_NCA_HPP
