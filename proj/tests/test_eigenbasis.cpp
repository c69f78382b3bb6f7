#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "bnca/eigenbasis.hpp"
#include "oracles.hpp"

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
    return m;
}

}  // namespace

TEST_CASE("top_eigenvectors on an axis-aligned scatter") {
    Eigen::MatrixXd x(2, 2);
    x << 1, 0, -1, 0;
    bnca::EigenBasis basis = bnca::top_eigenvectors(x, 1);
    REQUIRE(basis.values(0) == Catch::Approx(2.0));
    // sign convention makes the dominant entry positive
    REQUIRE(basis.vectors(0, 0) == Catch::Approx(1.0));
    REQUIRE(std::abs(basis.vectors(1, 0)) < 1e-12);
}

TEST_CASE("top_eigenvectors handles degenerate spectra by residual, not vectors") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Identity(2, 2);  // scatter = I, both eigenvalues 1
    bnca::EigenBasis basis = bnca::top_eigenvectors(x, 2);
    REQUIRE(basis.values(0) == Catch::Approx(1.0));
    REQUIRE(basis.values(1) == Catch::Approx(1.0));
    Eigen::MatrixXd s = x.transpose() * x;
    for (Eigen::Index l = 0; l < 2; ++l) {
        double residual = (s * basis.vectors.col(l) - basis.values(l) * basis.vectors.col(l)).norm();
        REQUIRE(residual < 1e-6 * basis.values(0));
    }
}

TEST_CASE("top_eigenvectors matches a brute-force Jacobi sweep") {
    Eigen::MatrixXd x = random_matrix(6, 4, 42);
    bnca::EigenBasis basis = bnca::top_eigenvectors(x, 3);

    Eigen::MatrixXd s = x.transpose() * x;
    auto [values, vectors] = oracles::jacobi_eigen(s);
    for (Eigen::Index l = 0; l < 3; ++l)
        REQUIRE(std::abs(basis.values(l) - values(l)) < 1e-8);

    for (Eigen::Index l = 0; l < 3; ++l) {
        double residual = (s * basis.vectors.col(l) - basis.values(l) * basis.vectors.col(l)).norm();
        REQUIRE(residual < 1e-6 * basis.values(0));
    }
}

TEST_CASE("top_eigenvectors output is orthonormal with descending values") {
    Eigen::MatrixXd x = random_matrix(20, 6, 7);
    bnca::EigenBasis basis = bnca::top_eigenvectors(x, 5);
    Eigen::MatrixXd gram = basis.vectors.transpose() * basis.vectors;
    REQUIRE((gram - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-8);
    for (Eigen::Index l = 1; l < 5; ++l) REQUIRE(basis.values(l) <= basis.values(l - 1));
}

TEST_CASE("top_eigenvectors centering flag removes the mean component") {
    Eigen::MatrixXd x = random_matrix(30, 3, 12);
    x.col(0).array() += 100.0;  // large uncentered component along e1
    bnca::EigenBasis uncentered = bnca::top_eigenvectors(x, 1, false);
    REQUIRE(std::abs(uncentered.vectors(0, 0)) > 0.99);

    bnca::EigenBasis centered = bnca::top_eigenvectors(x, 3, true);
    Eigen::RowVectorXd mean = x.colwise().mean();
    Eigen::MatrixXd xc = x.rowwise() - mean;
    Eigen::MatrixXd s = xc.transpose() * xc;
    for (Eigen::Index l = 0; l < 3; ++l) {
        double residual = (s * centered.vectors.col(l) - centered.values(l) * centered.vectors.col(l)).norm();
        REQUIRE(residual < 1e-6 * centered.values(0));
    }
}

TEST_CASE("top_eigenvectors validates input") {
    Eigen::MatrixXd x = random_matrix(4, 3, 1);
    REQUIRE_THROWS(bnca::top_eigenvectors(x, 0));
    REQUIRE_THROWS(bnca::top_eigenvectors(x, 4));
    x(1, 1) = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS(bnca::top_eigenvectors(x, 2));
}

TEST_CASE("pair_feature squares the basis projections") {
    bnca::EigenBasis basis;
    basis.vectors = Eigen::MatrixXd::Identity(2, 2);
    basis.values = Eigen::VectorXd::Ones(2);

    SECTION("identical points give the zero vector") {
        Eigen::VectorXd x(2);
        x << 3.0, -1.0;
        REQUIRE(bnca::pair_feature(basis, x, x).isZero(0.0));
    }

    SECTION("axis-aligned difference") {
        Eigen::VectorXd a(2), b(2);
        a << 2.0, 0.0;
        b << 0.0, 0.0;
        Eigen::VectorXd w = bnca::pair_feature(basis, a, b);
        REQUIRE(w(0) == 4.0);
        REQUIRE(w(1) == 0.0);
    }

    SECTION("dimension mismatch is rejected") {
        Eigen::VectorXd bad(3);
        bad.setZero();
        Eigen::VectorXd ok(2);
        ok.setZero();
        REQUIRE_THROWS(bnca::pair_feature(basis, bad, bad));
        REQUIRE_THROWS(bnca::pair_feature(basis, ok, bad));
    }
}

TEST_CASE("pair_feature matches long-hand dot products") {
    Eigen::MatrixXd x = random_matrix(8, 3, 3);
    bnca::EigenBasis basis = bnca::top_eigenvectors(x, 3);
    Eigen::VectorXd xi = random_matrix(3, 1, 4);
    Eigen::VectorXd xj = random_matrix(3, 1, 5);

    Eigen::VectorXd w = bnca::pair_feature(basis, xi, xj);
    for (Eigen::Index l = 0; l < 3; ++l) {
        double dot = 0.0;
        for (Eigen::Index k = 0; k < 3; ++k) dot += basis.vectors(k, l) * (xi(k) - xj(k));
        REQUIRE(w(l) == Catch::Approx(dot * dot).margin(1e-14));
        REQUIRE(w(l) >= 0.0);
    }
}

TEST_CASE("gamma_distance is the inner product with the pair feature") {
    Eigen::VectorXd w(3);
    w << 1.0, 4.0, 0.25;

    SECTION("unit gamma sums the feature") {
        REQUIRE(bnca::gamma_distance(Eigen::VectorXd::Ones(3), w) == Catch::Approx(5.25));
    }
    SECTION("zero feature gives zero for any gamma") {
        Eigen::VectorXd gamma(3);
        gamma << -2.0, 9.0, 0.5;
        REQUIRE(bnca::gamma_distance(gamma, Eigen::VectorXd::Zero(3)) == 0.0);
    }
    SECTION("length mismatch is rejected") {
        REQUIRE_THROWS(bnca::gamma_distance(Eigen::VectorXd::Ones(2), w));
    }
}

TEST_CASE("gamma_distance equals the explicit metric with a full-rank basis") {
    const Eigen::Index d = 4;
    Eigen::MatrixXd x = random_matrix(12, d, 8);
    bnca::EigenBasis basis = bnca::top_eigenvectors(x, d);

    std::mt19937_64 rng(19);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd gamma(d), xi(d), xj(d);
    for (Eigen::Index l = 0; l < d; ++l) {
        gamma(l) = normal(rng);
        xi(l) = normal(rng);
        xj(l) = normal(rng);
    }

    // assemble A = sum_l gamma_l v_l v_l^T explicitly
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index l = 0; l < d; ++l)
        a += gamma(l) * basis.vectors.col(l) * basis.vectors.col(l).transpose();

    const double via_w = bnca::gamma_distance(gamma, bnca::pair_feature(basis, xi, xj));
    const double via_a = (xi - xj).dot(a * (xi - xj));
    REQUIRE(std::abs(via_w - via_a) < 1e-10);
}

TEST_CASE("gamma_distance is linear in gamma and PSD for nonnegative gamma") {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::VectorXd g1(5), g2(5), w(5);
        for (Eigen::Index l = 0; l < 5; ++l) {
            g1(l) = normal(rng);
            g2(l) = normal(rng);
            w(l) = uniform(rng);  // pair features are nonnegative
        }
        const double a = normal(rng), b = normal(rng);
        const double lhs = bnca::gamma_distance(a * g1 + b * g2, w);
        const double rhs = a * bnca::gamma_distance(g1, w) + b * bnca::gamma_distance(g2, w);
        REQUIRE(std::abs(lhs - rhs) < 1e-12 * std::max(1.0, std::abs(rhs)));
        REQUIRE(bnca::gamma_distance(g1.cwiseAbs(), w) >= 0.0);
    }
}
