#ifndef BNCA_SERIALIZE_HPP
#define BNCA_SERIALIZE_HPP

#include <Eigen/Dense>

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bnca/eigenbasis.hpp"
#include "bnca/eval.hpp"
#include "bnca/nca.hpp"
#include "bnca/variational.hpp"

namespace bnca {

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    std::vector<double> flat(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            flat[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);  // row-major
    return flat;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
    const auto flat = j.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
        throw std::runtime_error("model: matrix payload has wrong size");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j2 = 0; j2 < cols; ++j2)
            m(i, j2) = flat[static_cast<std::size_t>(i * cols + j2)];
    return m;
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const FeatureScaler& s) {
    j = {{"shift", std::vector<double>(s.shift.data(), s.shift.data() + s.shift.size())},
         {"scale", std::vector<double>(s.scale.data(), s.scale.data() + s.scale.size())}};
}

inline void from_json(const nlohmann::json& j, FeatureScaler& s) {
    const auto shift = j.at("shift").get<std::vector<double>>();
    const auto scale = j.at("scale").get<std::vector<double>>();
    s.shift = Eigen::Map<const Eigen::VectorXd>(shift.data(), static_cast<Eigen::Index>(shift.size()));
    s.scale = Eigen::Map<const Eigen::VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
}

inline void to_json(nlohmann::json& j, const EigenBasis& basis) {
    j = {{"ambient_dim", basis.ambient_dim()},
         {"dim", basis.dim()},
         {"vectors", detail::matrix_to_json(basis.vectors)},
         {"values", std::vector<double>(basis.values.data(), basis.values.data() + basis.values.size())}};
}

inline void from_json(const nlohmann::json& j, EigenBasis& basis) {
    const auto ambient = j.at("ambient_dim").get<Eigen::Index>();
    const auto d = j.at("dim").get<Eigen::Index>();
    basis.vectors = detail::matrix_from_json(j.at("vectors"), ambient, d);
    const auto values = j.at("values").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != d)
        throw std::runtime_error("model: eigenvalue payload has wrong size");
    basis.values = Eigen::Map<const Eigen::VectorXd>(values.data(), d);
}

inline void to_json(nlohmann::json& j, const MahalanobisMetric& m) {
    j = {{"dim", m.dim()}, {"a", detail::matrix_to_json(m.a)}};
}

inline void from_json(const nlohmann::json& j, MahalanobisMetric& m) {
    const auto d = j.at("dim").get<Eigen::Index>();
    m.a = detail::matrix_from_json(j.at("a"), d, d);
}

inline void to_json(nlohmann::json& j, const GaussianBelief& g) {
    j = {{"dim", g.dim()},
         {"mean", std::vector<double>(g.mean.data(), g.mean.data() + g.mean.size())},
         {"cov", detail::matrix_to_json(g.cov)}};
}

inline void from_json(const nlohmann::json& j, GaussianBelief& g) {
    const auto d = j.at("dim").get<Eigen::Index>();
    const auto mean = j.at("mean").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(mean.size()) != d)
        throw std::runtime_error("model: mean payload has wrong size");
    g.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), d);
    g.cov = detail::matrix_from_json(j.at("cov"), d, d);
}

inline void to_json(nlohmann::json& j, const FitIteration& it) {
    j = {{"mean_delta_inf", it.mean_delta_inf},
         {"bound_total", it.bound_total},
         {"mean", std::vector<double>(it.mean.data(), it.mean.data() + it.mean.size())}};
}

inline void from_json(const nlohmann::json& j, FitIteration& it) {
    it.mean_delta_inf = j.at("mean_delta_inf").get<double>();
    it.bound_total = j.at("bound_total").get<double>();
    const auto mean = j.at("mean").get<std::vector<double>>();
    it.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
}

inline void to_json(nlohmann::json& j, const BncaFitResult& r) {
    j = {{"posterior", r.posterior},
         {"converged", r.converged},
         {"iterations", r.iterations},
         {"trace", r.trace},
         {"h_evaluations", r.h_evaluations},
         {"vt_evaluations", r.vt_evaluations}};
}

inline void from_json(const nlohmann::json& j, BncaFitResult& r) {
    j.at("posterior").get_to(r.posterior);
    r.converged = j.at("converged").get<bool>();
    r.iterations = j.at("iterations").get<int>();
    r.trace = j.at("trace").get<std::vector<FitIteration>>();
    r.h_evaluations = j.at("h_evaluations").get<int>();
    r.vt_evaluations = j.at("vt_evaluations").get<int>();
}

inline void to_json(nlohmann::json& j, const EvalReport& r) {
    j = {{"scores", r.per_seed_scores}, {"mean", r.mean}, {"std", r.std_dev}};
    if (r.p_value_vs_baseline) j["p_value_vs_baseline"] = *r.p_value_vs_baseline;
}

inline void from_json(const nlohmann::json& j, EvalReport& r) {
    r.per_seed_scores = j.at("scores").get<std::vector<double>>();
    r.mean = j.at("mean").get<double>();
    r.std_dev = j.at("std").get<double>();
    if (j.contains("p_value_vs_baseline"))
        r.p_value_vs_baseline = j.at("p_value_vs_baseline").get<double>();
    else
        r.p_value_vs_baseline.reset();
}

inline void save_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return nlohmann::json::parse(in);
}

}  // namespace bnca

#endif  // BNCA_SERIALIZE_HPP
