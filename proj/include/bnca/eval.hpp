#ifndef BNCA_EVAL_HPP
#define BNCA_EVAL_HPP

#include <Eigen/Dense>

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bnca/dataset.hpp"

namespace bnca {

struct EuclideanSqDist {
    double operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
        return (a - b).squaredNorm();
    }
};

/// Squared distance under a linear map: |M (a - b)|^2. Covers both learnt
/// transforms and scaled projections.
struct LinearMapSqDist {
    Eigen::MatrixXd m;
    double operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
        return (m * (a - b)).squaredNorm();
    }
};

/// Majority vote over the k nearest training points under the supplied
/// squared-distance functor. Nearest-neighbor ties resolve to the lower
/// index; vote ties to the class with smaller summed distance, then to the
/// lower class index.
template <class SqDist>
int knn_classify(const Dataset& train, const Eigen::VectorXd& x_q, Eigen::Index k, SqDist&& sqdist) {
    const Eigen::Index n = train.size();
    if (n < 1) throw std::invalid_argument("knn_classify: empty training set");
    if (k < 1 || k > n) throw std::invalid_argument("knn_classify: k must be in [1, N]");

    std::vector<std::pair<double, Eigen::Index>> order;
    order.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        order.emplace_back(sqdist(x_q, Eigen::VectorXd(train.points.row(i).transpose())), i);
    std::stable_sort(order.begin(), order.end());

    std::vector<int> votes(static_cast<std::size_t>(train.class_count), 0);
    std::vector<double> summed(static_cast<std::size_t>(train.class_count), 0.0);
    for (Eigen::Index t = 0; t < k; ++t) {
        const auto& [dist, idx] = order[static_cast<std::size_t>(t)];
        const int y = train.labels[static_cast<std::size_t>(idx)];
        ++votes[static_cast<std::size_t>(y)];
        summed[static_cast<std::size_t>(y)] += dist;
    }

    int best = 0;
    for (int c = 1; c < train.class_count; ++c) {
        if (votes[c] > votes[best]) {
            best = c;
        } else if (votes[c] == votes[best] && votes[c] > 0 && summed[c] < summed[best]) {
            best = c;
        }
    }
    return best;
}

inline double accuracy(const std::vector<int>& predictions, const std::vector<int>& truths) {
    if (predictions.empty()) throw std::invalid_argument("accuracy: empty input");
    if (predictions.size() != truths.size()) throw std::invalid_argument("accuracy: length mismatch");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == truths[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

/// Rank-based precision of the true class, gated by a minimum predictive
/// mass: mean over samples of (1 / rank of true class) * 1{p(true) > tau}.
/// Class ranking is by probability descending, ties to the lower class index.
inline double modified_map(const std::vector<Eigen::VectorXd>& predictives,
                           const std::vector<int>& truths, double tau) {
    if (tau < 0.0 || tau >= 1.0) throw std::invalid_argument("modified_map: tau must be in [0,1)");
    if (predictives.empty() || predictives.size() != truths.size())
        throw std::invalid_argument("modified_map: need matching nonempty inputs");

    double total = 0.0;
    for (std::size_t i = 0; i < predictives.size(); ++i) {
        const Eigen::VectorXd& p = predictives[i];
        if (p.minCoeff() < -1e-9 || std::abs(p.sum() - 1.0) > 1e-6)
            throw std::invalid_argument("modified_map: malformed distribution");
        const int truth = truths[i];
        if (truth < 0 || truth >= p.size()) throw std::invalid_argument("modified_map: truth out of range");
        const double p_true = p(truth);
        if (!(p_true > tau)) continue;
        int rank = 1;
        for (Eigen::Index c = 0; c < p.size(); ++c) {
            if (p(c) > p_true) ++rank;
            else if (p(c) == p_true && c < truth) ++rank;
        }
        total += 1.0 / static_cast<double>(rank);
    }
    return total / static_cast<double>(predictives.size());
}

struct TTestResult {
    double p_value = 0.5;
    bool degenerate = false;  // all paired differences were zero
};

/// One-tailed paired t-test of H1: mean(a) > mean(b), with n-1 degrees of
/// freedom. Identical inputs are flagged and return 0.5 by convention.
inline TTestResult paired_one_tail_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("paired_one_tail_test: need equal lengths >= 2");
    const std::size_t n = a.size();

    double mean_diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_diff += a[i] - b[i];
    mean_diff /= static_cast<double>(n);

    double ss = 0.0;
    bool all_zero = true;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) all_zero = false;
        ss += (d - mean_diff) * (d - mean_diff);
    }
    if (all_zero) return {0.5, true};

    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0) return {mean_diff > 0.0 ? 0.0 : 1.0, false};

    const double t = mean_diff / (sd / std::sqrt(static_cast<double>(n)));
    boost::math::students_t_distribution<double> dist(static_cast<double>(n - 1));
    return {boost::math::cdf(boost::math::complement(dist, t)), false};
}

/// Scores of one method under one condition across repeated seeded trials.
struct EvalReport {
    std::vector<double> per_seed_scores;
    double mean = 0.0;
    double std_dev = 0.0;  // sample standard deviation (n - 1)
    std::optional<double> p_value_vs_baseline;

    static EvalReport from_scores(std::vector<double> scores,
                                  std::optional<double> p_value = std::nullopt) {
        if (scores.empty()) throw std::invalid_argument("EvalReport: no scores");
        EvalReport r;
        r.mean = 0.0;
        for (double s : scores) r.mean += s;
        r.mean /= static_cast<double>(scores.size());
        double ss = 0.0;
        for (double s : scores) ss += (s - r.mean) * (s - r.mean);
        r.std_dev = scores.size() > 1 ? std::sqrt(ss / static_cast<double>(scores.size() - 1)) : 0.0;
        r.per_seed_scores = std::move(scores);
        r.p_value_vs_baseline = p_value;
        return r;
    }
};

}  // namespace bnca

#endif  // BNCA_EVAL_HPP
