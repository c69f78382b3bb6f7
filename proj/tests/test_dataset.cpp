#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <set>
#include <string>

#include "bnca/dataset.hpp"
#include "bnca/eval.hpp"
#include "bnca/experiment.hpp"

namespace {

std::string temp_path(const std::string& name) {
    return std::string("bnca_test_") + name;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

}  // namespace

TEST_CASE("load_csv parses rows and relabels contiguously") {
    const auto path = temp_path("basic.csv");
    write_file(path, "1,2,0\n3,4,1\n5,6,0\n");
    bnca::Dataset ds = bnca::load_csv(path);
    REQUIRE(ds.size() == 3);
    REQUIRE(ds.dim() == 2);
    REQUIRE(ds.class_count == 2);
    REQUIRE(ds.labels == std::vector<int>{0, 1, 0});
    REQUIRE(ds.points(1, 0) == 3.0);
    REQUIRE(ds.points(2, 1) == 6.0);
    std::remove(path.c_str());
}

TEST_CASE("load_csv remaps noncontiguous labels by first appearance") {
    const auto path = temp_path("labels.csv");
    write_file(path, "0,3\n1,7\n2,3\n");
    bnca::Dataset ds = bnca::load_csv(path);
    REQUIRE(ds.class_count == 2);
    REQUIRE(ds.labels == std::vector<int>{0, 1, 0});
    std::remove(path.c_str());
}

TEST_CASE("load_csv rejects malformed input") {
    const auto path = temp_path("bad.csv");

    write_file(path, "");
    REQUIRE_THROWS(bnca::load_csv(path));

    write_file(path, "1,2,0\n3,1\n");
    REQUIRE_THROWS(bnca::load_csv(path));  // ragged

    write_file(path, "1,x,0\n");
    REQUIRE_THROWS(bnca::load_csv(path));  // non-numeric feature

    write_file(path, "1\n2\n");
    REQUIRE_THROWS(bnca::load_csv(path));  // fewer than 2 columns

    write_file(path, "1,2,0.5\n");
    REQUIRE_THROWS(bnca::load_csv(path));  // non-integer label

    REQUIRE_THROWS(bnca::load_csv(temp_path("does_not_exist.csv")));
    std::remove(path.c_str());
}

TEST_CASE("load_csv skips a header row when asked") {
    const auto path = temp_path("header.csv");
    write_file(path, "f1,f2,label\n1,2,0\n3,4,1\n");
    bnca::Dataset ds = bnca::load_csv(path, true);
    REQUIRE(ds.size() == 2);
    std::remove(path.c_str());
}

TEST_CASE("save_csv then load_csv round-trips bit-exactly") {
    bnca::Dataset ds = bnca::make_blobs(3, 7, 4, 1.7, 99);
    ds.points(0, 0) = 1.0 / 3.0;
    ds.points(1, 1) = -1e-17;
    ds.points(2, 2) = 12345678.9012345678;

    const auto path = temp_path("roundtrip.csv");
    bnca::save_csv(ds, path);
    bnca::Dataset back = bnca::load_csv(path);
    REQUIRE(back.size() == ds.size());
    REQUIRE(back.labels == ds.labels);
    for (Eigen::Index i = 0; i < ds.size(); ++i)
        for (Eigen::Index j = 0; j < ds.dim(); ++j) REQUIRE(back.points(i, j) == ds.points(i, j));
    std::remove(path.c_str());
}

TEST_CASE("make_blobs produces balanced deterministic clusters") {
    bnca::Dataset ds = bnca::make_blobs(2, 5, 2, 1.0, 7);
    REQUIRE(ds.size() == 10);
    REQUIRE(ds.class_count == 2);
    REQUIRE(std::count(ds.labels.begin(), ds.labels.end(), 0) == 5);
    REQUIRE(std::count(ds.labels.begin(), ds.labels.end(), 1) == 5);

    bnca::Dataset again = bnca::make_blobs(2, 5, 2, 1.0, 7);
    REQUIRE(again.points == ds.points);
    REQUIRE(again.labels == ds.labels);

    REQUIRE_THROWS(bnca::make_blobs(1, 5, 2, 1.0, 7));
    REQUIRE_THROWS(bnca::make_blobs(2, 0, 2, 1.0, 7));
    REQUIRE_THROWS(bnca::make_blobs(2, 5, 0, 1.0, 7));
    REQUIRE_THROWS(bnca::make_blobs(2, 5, 2, 0.0, 7));
}

TEST_CASE("make_blobs with vanishing spread collapses classes onto their means") {
    bnca::Dataset ds = bnca::make_blobs(3, 6, 4, 1e-12, 11);
    // within-class points coincide, so leave-one-out 1-NN is perfect
    REQUIRE(bnca::detail::knn_loo_accuracy(ds, 1, bnca::EuclideanSqDist{}) == 1.0);
}

TEST_CASE("subsample_per_class draws uniform class histograms") {
    bnca::Dataset ds = bnca::make_blobs(3, 20, 3, 1.0, 5);
    bnca::Dataset sub = bnca::subsample_per_class(ds, 10, 123);
    REQUIRE(sub.size() == 30);
    for (int c = 0; c < 3; ++c)
        REQUIRE(std::count(sub.labels.begin(), sub.labels.end(), c) == 10);

    bnca::Dataset again = bnca::subsample_per_class(ds, 10, 123);
    REQUIRE(again.points == sub.points);

    REQUIRE_THROWS(bnca::subsample_per_class(ds, 0, 1));
    REQUIRE_THROWS(bnca::subsample_per_class(ds, 21, 1));
}

TEST_CASE("subsample_per_class at full size is a permutation of each class") {
    bnca::Dataset ds = bnca::make_blobs(2, 8, 2, 1.0, 3);
    bnca::Dataset sub = bnca::subsample_per_class(ds, 8, 77);
    REQUIRE(sub.size() == ds.size());
    // every original row appears exactly once
    std::multiset<double> original, sampled;
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
        original.insert(ds.points(i, 0));
        sampled.insert(sub.points(i, 0));
    }
    REQUIRE(original == sampled);
}

TEST_CASE("inject_label_noise flips exactly the rounded count") {
    bnca::Dataset ds = bnca::make_blobs(2, 5, 2, 1.0, 21);  // N = 10

    SECTION("level zero is the identity") {
        bnca::Dataset noisy = bnca::inject_label_noise(ds, {0.0, 9});
        REQUIRE(noisy.labels == ds.labels);
    }

    SECTION("level one flips every label to a different class") {
        bnca::Dataset noisy = bnca::inject_label_noise(ds, {1.0, 9});
        for (std::size_t i = 0; i < ds.labels.size(); ++i) REQUIRE(noisy.labels[i] != ds.labels[i]);
    }

    SECTION("level 0.3 on N=10 flips exactly 3") {
        bnca::Dataset noisy = bnca::inject_label_noise(ds, {0.3, 9});
        int disagreements = 0;
        for (std::size_t i = 0; i < ds.labels.size(); ++i)
            if (noisy.labels[i] != ds.labels[i]) ++disagreements;
        REQUIRE(disagreements == 3);
    }

    SECTION("equal seeds flip the identical index set") {
        bnca::Dataset a = bnca::inject_label_noise(ds, {0.4, 31});
        bnca::Dataset b = bnca::inject_label_noise(ds, {0.4, 31});
        REQUIRE(a.labels == b.labels);
    }

    SECTION("input dataset is untouched") {
        std::vector<int> before = ds.labels;
        (void)bnca::inject_label_noise(ds, {0.5, 2});
        REQUIRE(ds.labels == before);
    }

    SECTION("level outside [0,1] is rejected") {
        REQUIRE_THROWS(bnca::inject_label_noise(ds, {-0.1, 1}));
        REQUIRE_THROWS(bnca::inject_label_noise(ds, {1.1, 1}));
    }
}

TEST_CASE("inject_label_noise flip count matches half-up rounding for many levels") {
    bnca::Dataset ds = bnca::make_blobs(4, 13, 2, 1.0, 8);  // N = 52
    for (double level : {0.01, 0.049, 0.05, 0.12, 0.25, 0.333, 0.5, 0.77, 0.99}) {
        bnca::Dataset noisy = bnca::inject_label_noise(ds, {level, 4});
        int disagreements = 0;
        for (std::size_t i = 0; i < ds.labels.size(); ++i)
            if (noisy.labels[i] != ds.labels[i]) ++disagreements;
        const int expected = static_cast<int>(std::floor(level * 52.0 + 0.5));
        REQUIRE(disagreements == expected);
    }
}

TEST_CASE("feature scaler standardizes train columns") {
    bnca::Dataset ds = bnca::make_blobs(3, 30, 4, 2.0, 17);
    auto scaler = bnca::FeatureScaler::fit(ds);
    bnca::Dataset scaled = scaler.apply(ds);
    Eigen::VectorXd mean = scaled.points.colwise().mean();
    REQUIRE(mean.cwiseAbs().maxCoeff() < 1e-12);
    Eigen::VectorXd var =
        (scaled.points.rowwise() - mean.transpose()).array().square().colwise().mean();
    REQUIRE((var.array() - 1.0).abs().maxCoeff() < 1e-10);
}
