// Shows what the posterior buys over a point estimate: distance beliefs with
// error bars, and moderated class predictions for an ambiguous query.
#include <cstdio>

#include "bnca/bnca.hpp"

int main() {
    bnca::Dataset train = bnca::make_blobs(3, 25, 4, 2.0, 11);
    train = bnca::inject_label_noise(train, {0.2, 5});

    bnca::NeighborGraph graph = bnca::build_graph(train, 8);
    bnca::EigenBasis basis = bnca::top_eigenvectors(train.points, 4);
    bnca::BncaFitResult fit =
        bnca::fit_bnca(train, graph, basis, bnca::GaussianBelief::isotropic(4, 0.1, 0.001));
    std::printf("fit: %s in %d iterations\n", fit.converged ? "converged" : "not converged",
                fit.iterations);

    // same-class vs cross-class distance beliefs, judged by the noisy labels
    const Eigen::Index same_a = 0;
    Eigen::Index same_b = -1, other = -1;
    for (Eigen::Index j = 1; j < train.size(); ++j) {
        const bool same = train.labels[static_cast<std::size_t>(j)] == train.labels[0];
        if (same && same_b < 0) same_b = j;
        if (!same && other < 0) other = j;
        if (same_b >= 0 && other >= 0) break;
    }
    auto report = [&](const char* tag, Eigen::Index i, Eigen::Index j) {
        bnca::PairFeature w = bnca::pair_feature(basis, train.points.row(i).transpose(),
                                                 train.points.row(j).transpose());
        bnca::DistanceBelief belief = bnca::distance_belief(fit.posterior, w);
        std::printf("%s pair: d^2 = %.3f +- %.3f\n", tag, belief.mean, std::sqrt(belief.variance));
    };
    report("same-class ", same_a, same_b);
    report("cross-class", same_a, other);

    // a query placed between two clusters
    Eigen::VectorXd q = 0.5 * (train.points.row(same_a) + train.points.row(other)).transpose();
    auto ids = bnca::query_neighbors(train, q, 8);
    Eigen::VectorXd plug_in = bnca::predictive_plugin(q, train, ids, basis, fit.posterior.mean);
    Eigen::VectorXd mcmc = bnca::predictive_mcmc(q, train, ids, basis, fit.posterior, 2000, 3);
    std::printf("query class probabilities\n  plug-in:");
    for (Eigen::Index c = 0; c < plug_in.size(); ++c) std::printf(" %.3f", plug_in(c));
    std::printf("\n  mcmc:   ");
    for (Eigen::Index c = 0; c < mcmc.size(); ++c) std::printf(" %.3f", mcmc(c));
    std::printf("\n");
    return 0;
}
