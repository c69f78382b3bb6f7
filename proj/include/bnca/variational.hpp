#ifndef BNCA_VARIATIONAL_HPP
#define BNCA_VARIATIONAL_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "bnca/dataset.hpp"
#include "bnca/eigenbasis.hpp"
#include "bnca/neighbors.hpp"

namespace bnca {

/// Gaussian over the combination coefficients gamma; both the prior (m_0, V_0)
/// and the fitted posterior (m_T, V_T).
struct GaussianBelief {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    Eigen::Index dim() const { return mean.size(); }

    static GaussianBelief isotropic(Eigen::Index d, double mean_value, double variance) {
        return {Eigen::VectorXd::Constant(d, mean_value),
                variance * Eigen::MatrixXd::Identity(d, d)};
    }
};

inline void validate(const GaussianBelief& g) {
    if (g.cov.rows() != g.cov.cols() || g.cov.rows() != g.mean.size())
        throw std::invalid_argument("belief: dimension mismatch");
    if ((g.cov - g.cov.transpose()).cwiseAbs().maxCoeff() >= 1e-10)
        throw std::invalid_argument("belief: covariance must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(g.cov);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("belief: covariance must be positive definite");
}

/// Per same-label pair (i, j in N_i): the d x K design whose t-th column is
/// w_ij - w_{i,N_it}. The column at j's own position is identically zero.
struct PairDesign {
    Eigen::Index owner_i = 0;
    Eigen::Index owner_j = 0;
    Eigen::MatrixXd w_matrix;  // d x K
};

/// lse(eta) = log(1 + sum_t exp(eta_t)), max-shifted.
inline double lse(const Eigen::VectorXd& eta) {
    if (!eta.allFinite()) throw std::invalid_argument("lse: non-finite input");
    const double peak = eta.maxCoeff();
    if (peak <= 0.0) return std::log1p(eta.array().exp().sum());
    return peak + std::log(std::exp(-peak) + (eta.array() - peak).exp().sum());
}

/// g(psi) = exp(psi - lse(psi)); positive entries summing to less than one.
inline Eigen::VectorXd softmax_g(const Eigen::VectorXd& psi) {
    return (psi.array() - lse(psi)).exp();
}

/// The fixed curvature matrix H = 1/2 (I_K - 1/(K+1) 1 1^T).
inline Eigen::MatrixXd bohning_H(Eigen::Index k) {
    if (k < 1) throw std::invalid_argument("bohning_H: K must be >= 1");
    return 0.5 * (Eigen::MatrixXd::Identity(k, k) -
                  Eigen::MatrixXd::Constant(k, k, 1.0 / static_cast<double>(k + 1)));
}

/// b = H psi - g(psi).
inline Eigen::VectorXd bohning_b(const Eigen::VectorXd& psi, const Eigen::MatrixXd& h) {
    if (h.rows() != psi.size() || h.cols() != psi.size())
        throw std::invalid_argument("bohning_b: dimension mismatch");
    return h * psi - softmax_g(psi);
}

/// Quadratic lower bound of -lse(eta) with tangency point psi:
/// -1/2 eta^T H eta + b^T eta - c, c = 1/2 psi^T H psi - g(psi)^T psi + lse(psi).
inline double bound_value(const Eigen::VectorXd& eta, const Eigen::VectorXd& psi,
                          const Eigen::MatrixXd& h) {
    const Eigen::VectorXd g = softmax_g(psi);
    const Eigen::VectorXd b = h * psi - g;
    const double c = 0.5 * psi.dot(h * psi) - g.dot(psi) + lse(psi);
    return -0.5 * eta.dot(h * eta) + b.dot(eta) - c;
}

/// One design per ordered same-label pair (i, j in N_i); pairs whose labels
/// differ drop out of the posterior updates entirely.
inline std::vector<PairDesign> build_pair_designs(const Dataset& ds, const NeighborGraph& graph,
                                                  const EigenBasis& basis) {
    const Eigen::Index d = basis.dim();
    std::vector<PairDesign> designs;
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
        const auto& ids = graph.neighbor_ids[static_cast<std::size_t>(i)];
        const Eigen::Index k = static_cast<Eigen::Index>(ids.size());

        Eigen::MatrixXd w_all(d, k);  // column t holds w_{i,N_it}
        for (Eigen::Index t = 0; t < k; ++t)
            w_all.col(t) = pair_feature(basis, ds.points.row(i).transpose(),
                                        ds.points.row(ids[static_cast<std::size_t>(t)]).transpose());

        for (Eigen::Index t = 0; t < k; ++t) {
            const Eigen::Index j = ids[static_cast<std::size_t>(t)];
            if (ds.labels[static_cast<std::size_t>(j)] != ds.labels[static_cast<std::size_t>(i)]) continue;
            PairDesign design;
            design.owner_i = i;
            design.owner_j = j;
            design.w_matrix = (-w_all).colwise() + w_all.col(t);
            designs.push_back(std::move(design));
        }
    }
    return designs;
}

/// V_T = [V_0^{-1} + sum_pairs W H W^T]^{-1}. Independent of the variational
/// parameters, so the fit computes it exactly once. An empty design set
/// returns the prior covariance untouched.
inline Eigen::MatrixXd posterior_covariance(const GaussianBelief& prior,
                                            const std::vector<PairDesign>& designs,
                                            const Eigen::MatrixXd& h) {
    if (designs.empty()) return prior.cov;

    Eigen::LLT<Eigen::MatrixXd> prior_llt(prior.cov);
    if (prior_llt.info() != Eigen::Success)
        throw std::runtime_error("posterior_covariance: prior covariance not invertible");

    const Eigen::Index d = prior.dim();
    Eigen::MatrixXd precision = prior_llt.solve(Eigen::MatrixXd::Identity(d, d));
    for (const auto& design : designs)
        precision.noalias() += design.w_matrix * h * design.w_matrix.transpose();

    Eigen::LLT<Eigen::MatrixXd> post_llt(0.5 * (precision + precision.transpose().eval()));
    if (post_llt.info() != Eigen::Success)
        throw std::runtime_error("posterior_covariance: singular accumulation");
    Eigen::MatrixXd cov = post_llt.solve(Eigen::MatrixXd::Identity(d, d));
    return 0.5 * (cov + cov.transpose().eval());
}

/// m_T = V_T (V_0^{-1} m_0 + sum_pairs W b). b_all is ordered like designs.
inline Eigen::VectorXd posterior_mean(const GaussianBelief& prior, const Eigen::MatrixXd& v_t,
                                      const std::vector<PairDesign>& designs,
                                      const std::vector<Eigen::VectorXd>& b_all) {
    if (designs.empty()) return prior.mean;
    if (b_all.size() != designs.size())
        throw std::invalid_argument("posterior_mean: one b vector per design required");

    Eigen::LLT<Eigen::MatrixXd> prior_llt(prior.cov);
    if (prior_llt.info() != Eigen::Success)
        throw std::runtime_error("posterior_mean: prior covariance not invertible");

    Eigen::VectorXd rhs = prior_llt.solve(prior.mean);
    for (std::size_t k = 0; k < designs.size(); ++k) {
        if (b_all[k].size() != designs[k].w_matrix.cols())
            throw std::invalid_argument("posterior_mean: b length mismatch");
        rhs.noalias() += designs[k].w_matrix * b_all[k];
    }
    return v_t * rhs;
}

/// psi_ij = W^T m_T; the entry at j's own column is exactly zero.
inline Eigen::VectorXd update_psi(const PairDesign& design, const Eigen::VectorXd& m_t) {
    if (design.w_matrix.rows() != m_t.size())
        throw std::invalid_argument("update_psi: dimension mismatch");
    return design.w_matrix.transpose() * m_t;
}

struct FitIteration {
    double mean_delta_inf = 0.0;  // |m_new - m_old|_inf
    double bound_total = 0.0;     // sum of bound_value over designs at the new mean
    Eigen::VectorXd mean;         // m_T after this iteration
};

struct BncaFitResult {
    GaussianBelief posterior;
    bool converged = false;
    int iterations = 0;
    std::vector<FitIteration> trace;
    // Instrumentation: how many times the fit computed H and V_T.
    int h_evaluations = 0;
    int vt_evaluations = 0;
};

struct BncaFitOptions {
    int max_iters = 50;
    double tol = 1e-6;  // infinity-norm threshold on the mean update
};

/// The full variational fit: H and all pair designs are built once, V_T once;
/// the mean is then iterated (psi -> b -> m_T) until the update falls below
/// tol. Non-convergence is reported through the flag, never thrown.
inline BncaFitResult fit_bnca(const Dataset& ds, const NeighborGraph& graph,
                              const EigenBasis& basis, const GaussianBelief& prior,
                              const BncaFitOptions& opts = {}) {
    validate(prior);
    if (basis.dim() != prior.dim())
        throw std::invalid_argument("fit_bnca: prior dimension must match basis");

    BncaFitResult result;
    const std::vector<PairDesign> designs = build_pair_designs(ds, graph, basis);

    const Eigen::MatrixXd h = bohning_H(graph.k);
    result.h_evaluations = 1;
    const Eigen::MatrixXd v_t = posterior_covariance(prior, designs, h);
    result.vt_evaluations = 1;

    if (designs.empty()) {
        result.posterior = prior;
        result.converged = true;
        result.iterations = 1;
        result.trace.push_back({0.0, 0.0, prior.mean});
        return result;
    }

    Eigen::VectorXd m = prior.mean;
    std::vector<Eigen::VectorXd> psi(designs.size()), b(designs.size());
    for (int iter = 1; iter <= opts.max_iters; ++iter) {
        result.iterations = iter;
        for (std::size_t k = 0; k < designs.size(); ++k) {
            psi[k] = update_psi(designs[k], m);
            b[k] = bohning_b(psi[k], h);
        }
        Eigen::VectorXd m_new = posterior_mean(prior, v_t, designs, b);
        const double delta = (m_new - m).cwiseAbs().maxCoeff();

        FitIteration stats;
        stats.mean_delta_inf = delta;
        for (std::size_t k = 0; k < designs.size(); ++k)
            stats.bound_total += bound_value(update_psi(designs[k], m_new), psi[k], h);
        stats.mean = m_new;
        result.trace.push_back(std::move(stats));

        m = std::move(m_new);
        if (delta < opts.tol) {
            result.converged = true;
            break;
        }
    }

    result.posterior = {std::move(m), v_t};
    return result;
}

}  // namespace bnca

#endif  // BNCA_VARIATIONAL_HPP
