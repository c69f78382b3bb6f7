#ifndef BNCA_EIGENBASIS_HPP
#define BNCA_EIGENBASIS_HPP

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <stdexcept>

namespace bnca {

/// Combination coefficients acting on the eigenbasis axes.
using GammaVector = Eigen::VectorXd;

/// Squared projections of a point difference onto the basis axes. Entries are
/// squares, hence nonnegative.
using PairFeature = Eigen::VectorXd;

/// Top-d eigenpairs of the data scatter. Columns of `vectors` are orthonormal
/// directions in ambient space; `values` are the matching eigenvalues in
/// descending order.
struct EigenBasis {
    Eigen::MatrixXd vectors;  // D x d
    Eigen::VectorXd values;   // d

    Eigen::Index ambient_dim() const { return vectors.rows(); }
    Eigen::Index dim() const { return vectors.cols(); }

    /// Coordinates of x in the basis.
    Eigen::VectorXd project(const Eigen::VectorXd& x) const { return vectors.transpose() * x; }
};

/// Eigendecompose the D x D scatter sum_i x_i x_i^T of the rows of X and keep
/// the top d directions. `center` subtracts the column means first (used by
/// the PCA baseline); the default leaves the scatter uncentered.
///
/// Sign convention: each column's largest-magnitude entry is made positive so
/// repeated runs produce identical bases.
inline EigenBasis top_eigenvectors(const Eigen::MatrixXd& X, Eigen::Index d, bool center = false) {
    const Eigen::Index n = X.rows(), dim = X.cols();
    if (d < 1 || d > std::min(n, dim))
        throw std::invalid_argument("top_eigenvectors: d must be in [1, min(N, D)]");
    if (!X.allFinite()) throw std::invalid_argument("top_eigenvectors: non-finite input");

    Eigen::MatrixXd S;
    if (center) {
        Eigen::RowVectorXd mean = X.colwise().mean();
        Eigen::MatrixXd Xc = X.rowwise() - mean;
        S = Xc.transpose() * Xc;
    } else {
        S = X.transpose() * X;
    }
    S = 0.5 * (S + S.transpose().eval());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(S);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("top_eigenvectors: eigensolver failed");

    // Solver returns ascending order; take the top d, descending.
    EigenBasis basis;
    basis.vectors.resize(dim, d);
    basis.values.resize(d);
    for (Eigen::Index l = 0; l < d; ++l) {
        const Eigen::Index src = dim - 1 - l;
        Eigen::VectorXd v = solver.eigenvectors().col(src);
        Eigen::Index peak = 0;
        v.cwiseAbs().maxCoeff(&peak);
        if (v(peak) < 0.0) v = -v;
        basis.vectors.col(l) = v;
        basis.values(l) = solver.eigenvalues()(src);
    }
    return basis;
}

/// w[l] = (v_l^T (x_i - x_j))^2 for every basis axis.
inline PairFeature pair_feature(const EigenBasis& basis, const Eigen::VectorXd& x_i,
                                const Eigen::VectorXd& x_j) {
    if (x_i.size() != basis.ambient_dim() || x_j.size() != basis.ambient_dim())
        throw std::invalid_argument("pair_feature: point dimension does not match basis");
    return (basis.vectors.transpose() * (x_i - x_j)).array().square();
}

/// Squared distance under the metric sum_l gamma_l v_l v_l^T, which is linear
/// in gamma once the pair feature is known.
inline double gamma_distance(const GammaVector& gamma, const PairFeature& w) {
    if (gamma.size() != w.size())
        throw std::invalid_argument("gamma_distance: length mismatch");
    return gamma.dot(w);
}

}  // namespace bnca

#endif  // BNCA_EIGENBASIS_HPP
