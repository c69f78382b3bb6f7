#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "bnca/dataset.hpp"
#include "bnca/posterior.hpp"

namespace {

bnca::GaussianBelief diagonal_belief(std::initializer_list<double> mean,
                                     std::initializer_list<double> var) {
    bnca::GaussianBelief g;
    g.mean.resize(static_cast<Eigen::Index>(mean.size()));
    Eigen::Index i = 0;
    for (double m : mean) g.mean(i++) = m;
    g.cov = Eigen::MatrixXd::Zero(g.mean.size(), g.mean.size());
    i = 0;
    for (double v : var) {
        g.cov(i, i) = v;
        ++i;
    }
    return g;
}

}  // namespace

TEST_CASE("distance_belief basic identities") {
    bnca::GaussianBelief post = diagonal_belief({0.5, 1.0, -0.25}, {0.1, 0.2, 0.3});

    SECTION("zero feature gives a zero belief") {
        bnca::DistanceBelief d = bnca::distance_belief(post, Eigen::VectorXd::Zero(3));
        REQUIRE(d.mean == 0.0);
        REQUIRE(d.variance == 0.0);
    }

    SECTION("isotropic covariance scales with the squared norm") {
        bnca::GaussianBelief iso = bnca::GaussianBelief::isotropic(3, 0.0, 1e-3);
        Eigen::VectorXd w(3);
        w << 1.0, 2.0, 3.0;
        bnca::DistanceBelief d = bnca::distance_belief(iso, w);
        REQUIRE(d.variance == Catch::Approx(1e-3 * w.squaredNorm()).epsilon(1e-12));
    }

    SECTION("random case matches the long-hand quadratic form") {
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> uniform(0.0, 2.0);
        Eigen::VectorXd w(3);
        for (Eigen::Index l = 0; l < 3; ++l) w(l) = uniform(rng);
        bnca::DistanceBelief d = bnca::distance_belief(post, w);

        double mean = 0.0, var = 0.0;
        for (Eigen::Index a = 0; a < 3; ++a) {
            mean += w(a) * post.mean(a);
            for (Eigen::Index b = 0; b < 3; ++b) var += w(a) * post.cov(a, b) * w(b);
        }
        REQUIRE(d.mean == Catch::Approx(mean).epsilon(1e-12));
        REQUIRE(d.variance == Catch::Approx(var).epsilon(1e-12));
        REQUIRE(d.variance >= 0.0);
    }

    SECTION("length mismatch is rejected") {
        REQUIRE_THROWS(bnca::distance_belief(post, Eigen::VectorXd::Zero(2)));
    }
}

TEST_CASE("distance_belief variance is nonnegative for any feature") {
    bnca::Dataset ds = bnca::make_blobs(3, 12, 4, 1.0, 55);
    bnca::NeighborGraph g = bnca::build_graph(ds, 5);
    bnca::EigenBasis basis = bnca::top_eigenvectors(ds.points, 4);
    bnca::BncaFitResult fit =
        bnca::fit_bnca(ds, g, basis, bnca::GaussianBelief::isotropic(4, 0.1, 0.001));

    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal(0.0, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::VectorXd xi(4), xj(4);
        for (Eigen::Index l = 0; l < 4; ++l) {
            xi(l) = normal(rng);
            xj(l) = normal(rng);
        }
        bnca::DistanceBelief d = bnca::distance_belief(fit.posterior, bnca::pair_feature(basis, xi, xj));
        REQUIRE(d.variance >= 0.0);
    }
}

TEST_CASE("map_metric with unit mean reproduces basis-subspace distances") {
    bnca::Dataset ds = bnca::make_blobs(2, 10, 3, 1.0, 19);
    bnca::EigenBasis basis = bnca::top_eigenvectors(ds.points, 2);
    bnca::GaussianBelief post = bnca::GaussianBelief::isotropic(2, 1.0, 1e-4);
    post.mean.setOnes();

    bnca::ScaledProjection sp = bnca::map_metric(post, basis);
    REQUIRE(sp.clamped_axes == 0);

    // A is the projector onto the basis span
    Eigen::MatrixXd projector = basis.vectors * basis.vectors.transpose();
    REQUIRE((sp.metric.a - projector).cwiseAbs().maxCoeff() < 1e-12);

    Eigen::VectorXd xi = ds.points.row(0).transpose(), xj = ds.points.row(5).transpose();
    const double via_proj = (sp.projection * (xi - xj)).squaredNorm();
    const double via_basis = (basis.project(xi) - basis.project(xj)).squaredNorm();
    REQUIRE(via_proj == Catch::Approx(via_basis).epsilon(1e-12));
}

TEST_CASE("map_metric clamps negative axis weights and reports the count") {
    bnca::Dataset ds = bnca::make_blobs(2, 10, 3, 1.0, 19);
    bnca::EigenBasis basis = bnca::top_eigenvectors(ds.points, 3);
    bnca::GaussianBelief post = diagonal_belief({0.5, -0.2, 0.1}, {1e-3, 1e-3, 1e-3});

    bnca::ScaledProjection sp = bnca::map_metric(post, basis);
    REQUIRE(sp.clamped_axes == 1);
    // clamped axis contributes nothing
    Eigen::VectorXd delta = basis.vectors.col(1);
    REQUIRE(std::abs(sp.metric.form_sqdist(delta)) < 1e-12);

    bnca::validate(sp.metric);  // symmetric PSD
}

TEST_CASE("map_metric satisfies the projection equivalence on random pairs") {
    bnca::Dataset ds = bnca::make_blobs(3, 15, 5, 1.5, 33);
    bnca::EigenBasis basis = bnca::top_eigenvectors(ds.points, 4);
    bnca::GaussianBelief post = diagonal_belief({0.8, 0.4, 0.02, 0.3}, {1e-3, 1e-3, 1e-3, 1e-3});
    bnca::ScaledProjection sp = bnca::map_metric(post, basis);

    std::mt19937_64 rng(71);
    std::normal_distribution<double> normal(0.0, 3.0);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd xi(5), xj(5);
        for (Eigen::Index l = 0; l < 5; ++l) {
            xi(l) = normal(rng);
            xj(l) = normal(rng);
        }
        Eigen::VectorXd w = bnca::pair_feature(basis, xi, xj);
        const double via_w = post.mean.dot(w);
        const double via_p = (sp.projection * (xi - xj)).squaredNorm();
        REQUIRE(std::abs(via_w - via_p) < 1e-10);
    }
}

TEST_CASE("sample_gamma collapses to the mean for vanishing covariance") {
    bnca::GaussianBelief post = bnca::GaussianBelief::isotropic(3, 0.7, 1e-16);
    auto draws = bnca::sample_gamma(post, 20, 5);
    for (const auto& g : draws) REQUIRE((g - post.mean).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("sample_gamma is deterministic given the seed") {
    bnca::GaussianBelief post = diagonal_belief({0.1, 0.2}, {0.05, 0.01});
    auto a = bnca::sample_gamma(post, 10, 99);
    auto b = bnca::sample_gamma(post, 10, 99);
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
    auto c = bnca::sample_gamma(post, 10, 100);
    REQUIRE(a[0] != c[0]);
}

TEST_CASE("sample_gamma mean concentrates by the law of large numbers") {
    bnca::GaussianBelief post = diagonal_belief({0.5, -0.3, 1.2}, {0.04, 0.01, 0.0025});
    const int count = 100000;
    auto draws = bnca::sample_gamma(post, count, 12345);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
    for (const auto& g : draws) mean += g;
    mean /= static_cast<double>(count);
    for (Eigen::Index l = 0; l < 3; ++l) {
        const double sigma = std::sqrt(post.cov(l, l));
        REQUIRE(std::abs(mean(l) - post.mean(l)) < 4.0 * sigma / std::sqrt(static_cast<double>(count)));
    }
}

TEST_CASE("predictive_mcmc equals the plug-in posterior for a degenerate belief") {
    bnca::Dataset train = bnca::make_blobs(3, 10, 4, 1.0, 21);
    train.points *= 0.05;  // keep pair features small so the 1e-12 belief is truly degenerate
    bnca::EigenBasis basis = bnca::top_eigenvectors(train.points, 4);
    bnca::GaussianBelief post = bnca::GaussianBelief::isotropic(4, 0.3, 1e-12);
    post.mean << 0.4, 0.2, 0.1, 0.05;

    // midpoint between two clusters keeps the class posterior interior
    Eigen::VectorXd q = 0.5 * (train.points.row(0) + train.points.row(10)).transpose();
    auto ids = bnca::query_neighbors(train, q, 6);

    Eigen::VectorXd plug_in = bnca::predictive_plugin(q, train, ids, basis, post.mean);
    Eigen::VectorXd mcmc = bnca::predictive_mcmc(q, train, ids, basis, post, 1, 3);
    REQUIRE(plug_in.maxCoeff() < 1.0);  // genuinely mixed neighborhood
    REQUIRE((plug_in - mcmc).cwiseAbs().maxCoeff() > 0.0);
    REQUIRE((plug_in - mcmc).cwiseAbs().maxCoeff() < 1e-6);
    REQUIRE(std::abs(mcmc.sum() - 1.0) < 1e-9);
}

TEST_CASE("predictive_mcmc reduces to class counts for identical features") {
    // neighbors symmetric around the query: every w is identical, so all
    // sampled distances tie and each draw yields the class-count fractions
    bnca::Dataset train;
    train.points.resize(4, 1);
    train.points << 1.0, -1.0, 1.0, -1.0;
    train.labels = {0, 0, 1, 2};
    train.class_count = 3;
    bnca::EigenBasis basis = bnca::top_eigenvectors(train.points, 1);

    bnca::GaussianBelief post = bnca::GaussianBelief::isotropic(1, 0.5, 0.2);
    Eigen::VectorXd q = Eigen::VectorXd::Zero(1);
    std::vector<Eigen::Index> ids = {0, 1, 2, 3};
    Eigen::VectorXd p = bnca::predictive_mcmc(q, train, ids, basis, post, 500, 8);
    REQUIRE(p(0) == Catch::Approx(0.5).epsilon(1e-9));
    REQUIRE(p(1) == Catch::Approx(0.25).epsilon(1e-9));
    REQUIRE(p(2) == Catch::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("predictive_mcmc is self-consistent as T grows") {
    bnca::Dataset train = bnca::make_blobs(3, 12, 4, 2.0, 61);
    bnca::EigenBasis basis = bnca::top_eigenvectors(train.points, 4);
    bnca::NeighborGraph g = bnca::build_graph(train, 6);
    bnca::BncaFitResult fit =
        bnca::fit_bnca(train, g, basis, bnca::GaussianBelief::isotropic(4, 0.1, 0.01));

    Eigen::VectorXd q = train.points.row(0).transpose();
    q.array() += 0.3;
    auto ids = bnca::query_neighbors(train, q, 6);

    Eigen::VectorXd p1 = bnca::predictive_mcmc(q, train, ids, basis, fit.posterior, 10000, 7);
    Eigen::VectorXd p2 = bnca::predictive_mcmc(q, train, ids, basis, fit.posterior, 20000, 7);
    REQUIRE((p1 - p2).cwiseAbs().maxCoeff() < 0.02);
    REQUIRE(std::abs(p1.sum() - 1.0) < 1e-9);
    REQUIRE(p1.minCoeff() >= 0.0);
}

TEST_CASE("sample_gamma validates inputs") {
    bnca::GaussianBelief post = diagonal_belief({0.0}, {1.0});
    REQUIRE_THROWS(bnca::sample_gamma(post, 0, 1));
    bnca::GaussianBelief broken = post;
    broken.cov(0, 0) = -1.0;
    REQUIRE_THROWS(bnca::sample_gamma(broken, 5, 1));
}

TEST_CASE("sample_gamma falls back to a jittered factor for singular covariance") {
    bnca::GaussianBelief post = diagonal_belief({1.0, 2.0}, {0.1, 0.0});  // rank deficient
    auto draws = bnca::sample_gamma(post, 100, 42);
    for (const auto& g : draws) REQUIRE(std::abs(g(1) - 2.0) < 1e-4);  // dead axis barely moves
    double spread = 0.0;
    for (const auto& g : draws) spread = std::max(spread, std::abs(g(0) - 1.0));
    REQUIRE(spread > 0.01);  // live axis actually samples
}
