#ifndef BNCA_POSTERIOR_HPP
#define BNCA_POSTERIOR_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "bnca/dataset.hpp"
#include "bnca/eigenbasis.hpp"
#include "bnca/nca.hpp"
#include "bnca/variational.hpp"

namespace bnca {

/// Gaussian belief over one squared distance.
struct DistanceBelief {
    double mean = 0.0;
    double variance = 0.0;
};

/// m_ij = w^T m_T, sigma^2_ij = w^T V_T w.
inline DistanceBelief distance_belief(const GaussianBelief& posterior, const PairFeature& w) {
    if (w.size() != posterior.dim())
        throw std::invalid_argument("distance_belief: dimension mismatch");
    return {posterior.mean.dot(w), w.dot(posterior.cov * w)};
}

/// Posterior-mean metric A = sum_l max(m_T^l, 0) v_l v_l^T together with the
/// scaled projection P = diag(max(m_T,0))^{1/2} V^T, which reproduces the same
/// squared distances as |P (x_i - x_j)|^2.
struct ScaledProjection {
    MahalanobisMetric metric;    // quadratic form in ambient space
    Eigen::MatrixXd projection;  // d x D
    int clamped_axes = 0;        // number of negative mean entries zeroed
};

inline ScaledProjection map_metric(const GaussianBelief& posterior, const EigenBasis& basis) {
    if (basis.dim() != posterior.dim())
        throw std::invalid_argument("map_metric: posterior dimension must match basis");
    ScaledProjection out;
    Eigen::VectorXd weights = posterior.mean.cwiseMax(0.0);
    out.clamped_axes = static_cast<int>((posterior.mean.array() < 0.0).count());
    out.metric.a = basis.vectors * weights.asDiagonal() * basis.vectors.transpose();
    out.projection = weights.array().sqrt().matrix().asDiagonal() * basis.vectors.transpose();
    return out;
}

/// T i.i.d. draws from N(m_T, V_T) through a lower Cholesky factor, with a
/// one-shot 1e-12 diagonal jitter fallback. Deterministic given the seed.
inline std::vector<GammaVector> sample_gamma(const GaussianBelief& posterior, int count,
                                             std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("sample_gamma: count must be >= 1");
    Eigen::LLT<Eigen::MatrixXd> llt(posterior.cov);
    if (llt.info() != Eigen::Success) {
        const Eigen::Index d = posterior.dim();
        llt.compute(posterior.cov + 1e-12 * Eigen::MatrixXd::Identity(d, d));
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("sample_gamma: covariance not positive definite");
    }
    const Eigen::MatrixXd factor = llt.matrixL();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<GammaVector> draws(static_cast<std::size_t>(count));
    Eigen::VectorXd z(posterior.dim());
    for (auto& draw : draws) {
        for (Eigen::Index l = 0; l < z.size(); ++l) z(l) = normal(rng);
        draw = posterior.mean + factor * z;
    }
    return draws;
}

/// Class posterior at a fixed gamma (the plug-in rule): neighbor weights
/// exp(-gamma^T w) folded by label.
inline Eigen::VectorXd predictive_plugin(const Eigen::VectorXd& x_q, const Dataset& train,
                                         const std::vector<Eigen::Index>& neighbor_ids,
                                         const EigenBasis& basis, const GammaVector& gamma) {
    Eigen::VectorXd d2(static_cast<Eigen::Index>(neighbor_ids.size()));
    std::vector<int> labels(neighbor_ids.size());
    for (std::size_t t = 0; t < neighbor_ids.size(); ++t) {
        d2(static_cast<Eigen::Index>(t)) =
            gamma_distance(gamma, pair_feature(basis, x_q, train.points.row(neighbor_ids[t]).transpose()));
        labels[t] = train.labels[static_cast<std::size_t>(neighbor_ids[t])];
    }
    return detail::class_posterior_from_sqdists(d2, labels, train.class_count);
}

/// Monte Carlo average of the plug-in class posterior over T posterior draws
/// of gamma. Sums to one; deterministic given the seed.
inline Eigen::VectorXd predictive_mcmc(const Eigen::VectorXd& x_q, const Dataset& train,
                                       const std::vector<Eigen::Index>& neighbor_ids,
                                       const EigenBasis& basis, const GaussianBelief& posterior,
                                       int samples, std::uint64_t seed) {
    if (samples < 1) throw std::invalid_argument("predictive_mcmc: T must be >= 1");

    // Pair features of the query against its neighbors change per query, not
    // per draw; compute them once.
    Eigen::MatrixXd w(posterior.dim(), static_cast<Eigen::Index>(neighbor_ids.size()));
    std::vector<int> labels(neighbor_ids.size());
    for (std::size_t t = 0; t < neighbor_ids.size(); ++t) {
        w.col(static_cast<Eigen::Index>(t)) =
            pair_feature(basis, x_q, train.points.row(neighbor_ids[t]).transpose());
        labels[t] = train.labels[static_cast<std::size_t>(neighbor_ids[t])];
    }

    Eigen::VectorXd mean_probs = Eigen::VectorXd::Zero(train.class_count);
    for (const GammaVector& gamma : sample_gamma(posterior, samples, seed)) {
        Eigen::VectorXd d2 = w.transpose() * gamma;
        mean_probs += detail::class_posterior_from_sqdists(d2, labels, train.class_count);
    }
    return mean_probs / static_cast<double>(samples);
}

}  // namespace bnca

#endif  // BNCA_POSTERIOR_HPP
