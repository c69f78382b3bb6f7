#ifndef BNCA_EXPERIMENT_HPP
#define BNCA_EXPERIMENT_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bnca/dataset.hpp"
#include "bnca/eigenbasis.hpp"
#include "bnca/eval.hpp"
#include "bnca/nca.hpp"
#include "bnca/neighbors.hpp"
#include "bnca/posterior.hpp"
#include "bnca/serialize.hpp"
#include "bnca/variational.hpp"

namespace bnca {

struct BlobSpec {
    int classes = 3;
    Eigen::Index per_class = 60;  // used by single-fit runs; sweeps size their own pools
    Eigen::Index dim = 6;
    double spread = 1.0;
};

struct DataSource {
    enum class Kind { blobs, csv };
    Kind kind = Kind::blobs;
    BlobSpec blobs;
    std::string csv_path;
    bool csv_has_header = false;
};

struct ExperimentConfig {
    DataSource source;
    Eigen::Index d = 0;        // eigen count; 0 means "use the input dimension"
    Eigen::Index graph_k = 8;  // neighborhood size K for training graphs
    Eigen::Index knn_k = 5;    // k of the evaluation KNN classifier
    double epsilon = 0.1;      // prior mean scale, m_0 = epsilon * 1
    double sigma = 0.001;      // prior covariance scale, V_0 = sigma * I
    int max_iters = 50;
    double tol = 1e-6;
    int nca_max_iters = 100;
    std::vector<double> noise_levels = {0.0};
    std::vector<Eigen::Index> per_class_sizes = {20};
    Eigen::Index test_per_class = 40;
    int repeats = 10;
    std::uint64_t master_seed = 1;
    double tau = 0.01;
    int mcmc_samples = 1000;
    std::vector<std::string> methods = {"pca", "nca", "bnca"};
    bool standardize = true;
};

inline void validate(const ExperimentConfig& c) {
    if (c.source.kind == DataSource::Kind::blobs &&
        (c.source.blobs.classes < 2 || c.source.blobs.dim < 1 || !(c.source.blobs.spread > 0.0)))
        throw std::invalid_argument("config: invalid blob parameters");
    if (c.d < 0) throw std::invalid_argument("config: d must be >= 0");
    if (c.graph_k < 1 || c.knn_k < 1) throw std::invalid_argument("config: K and knn_k must be >= 1");
    if (!(c.sigma > 0.0)) throw std::invalid_argument("config: sigma must be > 0");
    if (c.max_iters < 1 || c.nca_max_iters < 1) throw std::invalid_argument("config: max_iters must be >= 1");
    if (!(c.tol > 0.0)) throw std::invalid_argument("config: tol must be > 0");
    if (c.repeats < 1) throw std::invalid_argument("config: repeats must be >= 1");
    if (c.tau < 0.0 || c.tau >= 1.0) throw std::invalid_argument("config: tau must be in [0,1)");
    if (c.mcmc_samples < 1) throw std::invalid_argument("config: mcmc_samples must be >= 1");
    if (c.test_per_class < 1) throw std::invalid_argument("config: test_per_class must be >= 1");
    if (c.noise_levels.empty() || c.per_class_sizes.empty() || c.methods.empty())
        throw std::invalid_argument("config: noise_levels, per_class_sizes and methods must be nonempty");
    for (double l : c.noise_levels)
        if (l < 0.0 || l > 1.0) throw std::invalid_argument("config: noise level outside [0,1]");
    for (Eigen::Index m : c.per_class_sizes)
        if (m < 1) throw std::invalid_argument("config: per-class size must be >= 1");
    for (const auto& m : c.methods)
        if (m != "pca" && m != "nca" && m != "bnca")
            throw std::invalid_argument("config: unknown method '" + m + "'");
}

// ---------------------------------------------------------------------------
// Seed derivation. Child seeds are a pure function of (master seed, role,
// condition, repeat), so method order never affects any method's stream.

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view role,
                                 std::string_view condition, int repeat) {
    std::uint64_t h = detail::splitmix64(master ^ detail::fnv1a(role));
    h = detail::splitmix64(h ^ detail::fnv1a(condition));
    return detail::splitmix64(h ^ static_cast<std::uint64_t>(repeat));
}

inline std::string condition_label(double noise_level, Eigen::Index per_class) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "noise=%.2f;m=%lld", noise_level,
                  static_cast<long long>(per_class));
    return buf;
}

// ---------------------------------------------------------------------------
// Splits and per-method evaluation helpers.

namespace detail {

// Disjoint per-class train/test split, deterministic given the seed.
inline std::pair<Dataset, Dataset> split_per_class(const Dataset& ds, Eigen::Index train_m,
                                                   Eigen::Index test_m, std::uint64_t seed) {
    auto by_class = indices_by_class(ds);
    for (int c = 0; c < ds.class_count; ++c)
        if (static_cast<Eigen::Index>(by_class[c].size()) < train_m + test_m)
            throw std::runtime_error("split: class " + std::to_string(c) + " has fewer than " +
                                     std::to_string(train_m + test_m) + " members");
    std::mt19937_64 rng(seed);
    Dataset train, test;
    train.class_count = test.class_count = ds.class_count;
    train.points.resize(train_m * ds.class_count, ds.dim());
    test.points.resize(test_m * ds.class_count, ds.dim());
    train.labels.resize(static_cast<std::size_t>(train_m * ds.class_count));
    test.labels.resize(static_cast<std::size_t>(test_m * ds.class_count));
    Eigen::Index tr = 0, te = 0;
    for (int c = 0; c < ds.class_count; ++c) {
        std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
        for (Eigen::Index k = 0; k < train_m; ++k, ++tr) {
            train.points.row(tr) = ds.points.row(by_class[c][k]);
            train.labels[static_cast<std::size_t>(tr)] = c;
        }
        for (Eigen::Index k = 0; k < test_m; ++k, ++te) {
            test.points.row(te) = ds.points.row(by_class[c][train_m + k]);
            test.labels[static_cast<std::size_t>(te)] = c;
        }
    }
    return {std::move(train), std::move(test)};
}

template <class SqDist>
double knn_test_accuracy(const Dataset& train, const Dataset& test, Eigen::Index k, SqDist&& sqdist) {
    std::vector<int> predictions(static_cast<std::size_t>(test.size()));
    for (Eigen::Index i = 0; i < test.size(); ++i)
        predictions[static_cast<std::size_t>(i)] =
            knn_classify(train, test.points.row(i).transpose(), k, sqdist);
    return accuracy(predictions, test.labels);
}

// Leave-one-out KNN accuracy on the training set itself.
template <class SqDist>
double knn_loo_accuracy(const Dataset& train, Eigen::Index k, SqDist&& sqdist) {
    const Eigen::Index n = train.size();
    const Eigen::Index kk = std::min(k, n - 1);
    std::size_t hits = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<std::pair<double, Eigen::Index>> order;
        order.reserve(static_cast<std::size_t>(n - 1));
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i)
                order.emplace_back(sqdist(Eigen::VectorXd(train.points.row(i).transpose()),
                                          Eigen::VectorXd(train.points.row(j).transpose())),
                                   j);
        std::stable_sort(order.begin(), order.end());
        std::vector<int> votes(static_cast<std::size_t>(train.class_count), 0);
        std::vector<double> summed(static_cast<std::size_t>(train.class_count), 0.0);
        for (Eigen::Index t = 0; t < kk; ++t) {
            const int y = train.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(t)].second)];
            ++votes[static_cast<std::size_t>(y)];
            summed[static_cast<std::size_t>(y)] += order[static_cast<std::size_t>(t)].first;
        }
        int best = 0;
        for (int c = 1; c < train.class_count; ++c)
            if (votes[c] > votes[best] ||
                (votes[c] == votes[best] && votes[c] > 0 && summed[c] < summed[best]))
                best = c;
        if (best == train.labels[static_cast<std::size_t>(i)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Report structures.

struct TraceRow {
    int iter = 0;
    double objective = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
};

struct MethodCell {
    std::string method;
    EvalReport accuracy;
    std::optional<EvalReport> map_all;        // modified MAP over the full test set
    std::optional<EvalReport> map_difficult;  // ... over the low-margin split
    std::optional<EvalReport> map_normal;
    std::optional<double> p_accuracy_vs_nca;  // one-tail, this method > nca
    std::optional<double> p_accuracy_vs_pca;
    std::vector<int> fit_iterations;  // bnca only
    int non_converged = 0;            // bnca fits that exhausted max_iters
};

struct ConditionResult {
    std::string label;
    double noise_level = 0.0;
    Eigen::Index per_class = 0;
    std::vector<MethodCell> cells;
};

struct ReportBundle {
    ExperimentConfig config;
    std::vector<ConditionResult> conditions;
    // Learning curves from repeat 0 of each condition, keyed by condition label.
    std::map<std::string, std::vector<TraceRow>> nca_traces;
    std::map<std::string, std::vector<TraceRow>> bnca_traces;
};

// Fraction of the test set (lowest plug-in margin first) treated as difficult.
inline constexpr double kDifficultFraction = 0.3;

// ---------------------------------------------------------------------------
// The runner.

namespace detail {

struct MethodOutcome {
    double accuracy = 0.0;
    std::vector<Eigen::VectorXd> predictives;  // empty when the method has none
    bool has_fit_info = false;
    int iterations = 0;
    bool converged = true;
};

struct RepeatData {
    Dataset train;  // possibly noisy, possibly standardized
    Dataset test;   // clean
    NeighborGraph graph;
};

inline RepeatData prepare_repeat(const ExperimentConfig& cfg, const std::optional<Dataset>& csv_pool,
                                 double noise_level, Eigen::Index per_class,
                                 const std::string& label, int repeat) {
    const std::uint64_t data_seed = derive_seed(cfg.master_seed, "data", label, repeat);
    const std::uint64_t noise_seed = derive_seed(cfg.master_seed, "noise", label, repeat);

    Dataset pool;
    if (cfg.source.kind == DataSource::Kind::blobs) {
        pool = make_blobs(cfg.source.blobs.classes, per_class + cfg.test_per_class,
                          cfg.source.blobs.dim, cfg.source.blobs.spread, data_seed);
    } else {
        pool = *csv_pool;
    }
    auto [train, test] = split_per_class(pool, per_class, cfg.test_per_class, data_seed);
    train = inject_label_noise(train, {noise_level, noise_seed});
    if (cfg.standardize) {
        FeatureScaler scaler = FeatureScaler::fit(train);
        train = scaler.apply(train);
        test = scaler.apply(test);
    }

    RepeatData rd;
    rd.graph = build_graph(train, std::min<Eigen::Index>(cfg.graph_k, train.size() - 1));
    rd.train = std::move(train);
    rd.test = std::move(test);
    return rd;
}

inline Eigen::Index effective_d(const ExperimentConfig& cfg, const Dataset& train) {
    Eigen::Index d = cfg.d > 0 ? cfg.d : train.dim();
    return std::min({d, train.dim(), train.size()});
}

inline MethodOutcome run_pca(const ExperimentConfig& cfg, const RepeatData& rd) {
    EigenBasis basis = top_eigenvectors(rd.train.points, effective_d(cfg, rd.train), true);
    MethodOutcome out;
    out.accuracy = knn_test_accuracy(rd.train, rd.test, cfg.knn_k,
                                     LinearMapSqDist{basis.vectors.transpose()});
    return out;
}

inline MethodOutcome run_nca(const ExperimentConfig& cfg, const RepeatData& rd,
                             std::vector<TraceRow>* trace_out) {
    NcaTrainOptions opts;
    opts.max_iters = cfg.nca_max_iters;
    NcaFitResult fit = train_nca(rd.train, rd.graph, MahalanobisMetric::identity(rd.train.dim()), opts);

    MethodOutcome out;
    out.accuracy = knn_test_accuracy(rd.train, rd.test, cfg.knn_k, LinearMapSqDist{fit.metric.a});
    out.predictives.reserve(static_cast<std::size_t>(rd.test.size()));
    for (Eigen::Index i = 0; i < rd.test.size(); ++i) {
        Eigen::VectorXd x = rd.test.points.row(i).transpose();
        auto ids = query_neighbors(rd.train, x, rd.graph.k);
        out.predictives.push_back(nca_class_posterior(x, rd.train, ids, fit.metric));
    }
    if (trace_out) {
        trace_out->clear();
        for (std::size_t t = 0; t < fit.trace.size(); ++t) {
            LinearMapSqDist dist{fit.trace[t].a};
            TraceRow row;
            row.iter = static_cast<int>(t);
            row.objective = fit.trace[t].objective;
            row.train_acc = knn_loo_accuracy(rd.train, cfg.knn_k, dist);
            row.test_acc = knn_test_accuracy(rd.train, rd.test, cfg.knn_k, dist);
            trace_out->push_back(row);
        }
    }
    return out;
}

inline MethodOutcome run_bnca(const ExperimentConfig& cfg, const RepeatData& rd,
                              const std::string& label, int repeat,
                              std::vector<TraceRow>* trace_out) {
    const Eigen::Index d = effective_d(cfg, rd.train);
    EigenBasis basis = top_eigenvectors(rd.train.points, d);
    GaussianBelief prior = GaussianBelief::isotropic(d, cfg.epsilon, cfg.sigma);
    BncaFitOptions opts;
    opts.max_iters = cfg.max_iters;
    opts.tol = cfg.tol;
    BncaFitResult fit = fit_bnca(rd.train, rd.graph, basis, prior, opts);

    MethodOutcome out;
    out.has_fit_info = true;
    out.iterations = fit.iterations;
    out.converged = fit.converged;

    ScaledProjection proj = map_metric(fit.posterior, basis);
    out.accuracy = knn_test_accuracy(rd.train, rd.test, cfg.knn_k, LinearMapSqDist{proj.projection});

    const std::uint64_t mcmc_seed = derive_seed(cfg.master_seed, "mcmc:bnca", label, repeat);
    out.predictives.reserve(static_cast<std::size_t>(rd.test.size()));
    for (Eigen::Index i = 0; i < rd.test.size(); ++i) {
        Eigen::VectorXd x = rd.test.points.row(i).transpose();
        auto ids = query_neighbors(rd.train, x, rd.graph.k);
        out.predictives.push_back(predictive_mcmc(x, rd.train, ids, basis, fit.posterior,
                                                  cfg.mcmc_samples,
                                                  detail::splitmix64(mcmc_seed ^ static_cast<std::uint64_t>(i))));
    }
    if (trace_out) {
        trace_out->clear();
        for (std::size_t t = 0; t < fit.trace.size(); ++t) {
            ScaledProjection p = map_metric({fit.trace[t].mean, fit.posterior.cov}, basis);
            LinearMapSqDist dist{p.projection};
            TraceRow row;
            row.iter = static_cast<int>(t) + 1;
            row.objective = fit.trace[t].bound_total;
            row.train_acc = knn_loo_accuracy(rd.train, cfg.knn_k, dist);
            row.test_acc = knn_test_accuracy(rd.train, rd.test, cfg.knn_k, dist);
            trace_out->push_back(row);
        }
    }
    return out;
}

// Indices of the test points whose plug-in margin (top1 - top2 probability)
// lands in the lowest kDifficultFraction.
inline std::vector<std::size_t> difficult_indices(const std::vector<Eigen::VectorXd>& plugin_predictives) {
    const std::size_t n = plugin_predictives.size();
    std::vector<std::pair<double, std::size_t>> margins(n);
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd p = plugin_predictives[i];
        double top1 = -1.0, top2 = -1.0;
        for (Eigen::Index c = 0; c < p.size(); ++c) {
            if (p(c) > top1) {
                top2 = top1;
                top1 = p(c);
            } else if (p(c) > top2) {
                top2 = p(c);
            }
        }
        margins[i] = {top1 - top2, i};
    }
    std::stable_sort(margins.begin(), margins.end());
    std::size_t count = std::max<std::size_t>(1, round_half_up(kDifficultFraction * static_cast<double>(n)));
    count = std::min(count, n);
    std::vector<std::size_t> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = margins[i].second;
    std::sort(out.begin(), out.end());
    return out;
}

inline double map_on_subset(const std::vector<Eigen::VectorXd>& predictives,
                            const std::vector<int>& truths, const std::vector<std::size_t>& subset,
                            double tau) {
    std::vector<Eigen::VectorXd> p;
    std::vector<int> t;
    p.reserve(subset.size());
    t.reserve(subset.size());
    for (std::size_t i : subset) {
        p.push_back(predictives[i]);
        t.push_back(truths[i]);
    }
    return modified_map(p, t, tau);
}

}  // namespace detail

/// Run every (method x condition x repeat) cell of the configured protocol:
/// seeded disjoint train/test splits, label noise injected into the training
/// half only, per-method fits and evaluations, paired significance tests of
/// bnca against each baseline, and learning curves from repeat 0.
inline ReportBundle run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);

    std::optional<Dataset> csv_pool;
    if (cfg.source.kind == DataSource::Kind::csv)
        csv_pool = load_csv(cfg.source.csv_path, cfg.source.csv_has_header);

    auto method_present = [&](const std::string& m) {
        return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
    };

    ReportBundle bundle;
    bundle.config = cfg;

    for (Eigen::Index per_class : cfg.per_class_sizes) {
        for (double level : cfg.noise_levels) {
            const std::string label = condition_label(level, per_class);

            std::map<std::string, std::vector<double>> acc_scores;
            std::map<std::string, std::vector<double>> map_all, map_difficult, map_normal;
            std::map<std::string, std::vector<int>> fit_iters;
            std::map<std::string, int> non_converged;

            for (int rep = 0; rep < cfg.repeats; ++rep) {
                detail::RepeatData rd = detail::prepare_repeat(cfg, csv_pool, level, per_class, label, rep);

                std::map<std::string, detail::MethodOutcome> outcomes;
                for (const std::string& method : cfg.methods) {
                    std::vector<TraceRow>* trace = nullptr;
                    std::vector<TraceRow> trace_storage;
                    const bool record_trace = rep == 0;
                    if (record_trace && (method == "nca" || method == "bnca")) trace = &trace_storage;

                    if (method == "pca") outcomes[method] = detail::run_pca(cfg, rd);
                    else if (method == "nca") outcomes[method] = detail::run_nca(cfg, rd, trace);
                    else outcomes[method] = detail::run_bnca(cfg, rd, label, rep, trace);

                    if (trace) {
                        auto& dst = method == "nca" ? bundle.nca_traces : bundle.bnca_traces;
                        dst[label] = std::move(trace_storage);
                    }
                }

                // Difficulty split from the point-estimate model's margins.
                const std::string plugin_method =
                    method_present("nca") ? "nca" : (method_present("bnca") ? "bnca" : "");
                std::vector<std::size_t> difficult, normal;
                if (!plugin_method.empty() && !outcomes[plugin_method].predictives.empty()) {
                    difficult = detail::difficult_indices(outcomes[plugin_method].predictives);
                    std::vector<bool> is_difficult(static_cast<std::size_t>(rd.test.size()), false);
                    for (std::size_t i : difficult) is_difficult[i] = true;
                    for (std::size_t i = 0; i < is_difficult.size(); ++i)
                        if (!is_difficult[i]) normal.push_back(i);
                }

                for (const std::string& method : cfg.methods) {
                    const auto& out = outcomes[method];
                    acc_scores[method].push_back(out.accuracy);
                    if (!out.predictives.empty()) {
                        map_all[method].push_back(modified_map(out.predictives, rd.test.labels, cfg.tau));
                        if (!difficult.empty())
                            map_difficult[method].push_back(
                                detail::map_on_subset(out.predictives, rd.test.labels, difficult, cfg.tau));
                        if (!normal.empty())
                            map_normal[method].push_back(
                                detail::map_on_subset(out.predictives, rd.test.labels, normal, cfg.tau));
                    }
                    if (out.has_fit_info) {
                        fit_iters[method].push_back(out.iterations);
                        if (!out.converged) ++non_converged[method];
                    }
                }
            }

            ConditionResult cond;
            cond.label = label;
            cond.noise_level = level;
            cond.per_class = per_class;
            for (const std::string& method : cfg.methods) {
                MethodCell cell;
                cell.method = method;
                cell.accuracy = EvalReport::from_scores(acc_scores[method]);
                if (!map_all[method].empty()) cell.map_all = EvalReport::from_scores(map_all[method]);
                if (!map_difficult[method].empty())
                    cell.map_difficult = EvalReport::from_scores(map_difficult[method]);
                if (!map_normal[method].empty())
                    cell.map_normal = EvalReport::from_scores(map_normal[method]);
                if (method == "bnca" && cfg.repeats >= 2) {
                    if (method_present("nca"))
                        cell.p_accuracy_vs_nca =
                            paired_one_tail_test(acc_scores["bnca"], acc_scores["nca"]).p_value;
                    if (method_present("pca"))
                        cell.p_accuracy_vs_pca =
                            paired_one_tail_test(acc_scores["bnca"], acc_scores["pca"]).p_value;
                }
                if (!fit_iters[method].empty()) {
                    cell.fit_iterations = fit_iters[method];
                    cell.non_converged = non_converged[method];
                }
                cond.cells.push_back(std::move(cell));
            }
            bundle.conditions.push_back(std::move(cond));
        }
    }
    return bundle;
}

// ---------------------------------------------------------------------------
// Serialization of configs and bundles.

inline void to_json(nlohmann::json& j, const DataSource& s) {
    if (s.kind == DataSource::Kind::blobs) {
        j = {{"type", "blobs"},
             {"classes", s.blobs.classes},
             {"per_class", s.blobs.per_class},
             {"dim", s.blobs.dim},
             {"spread", s.blobs.spread}};
    } else {
        j = {{"type", "csv"}, {"path", s.csv_path}, {"has_header", s.csv_has_header}};
    }
}

inline void from_json(const nlohmann::json& j, DataSource& s) {
    const auto type = j.at("type").get<std::string>();
    if (type == "blobs") {
        s.kind = DataSource::Kind::blobs;
        s.blobs.classes = j.value("classes", 3);
        s.blobs.per_class = j.value("per_class", Eigen::Index{60});
        s.blobs.dim = j.value("dim", Eigen::Index{6});
        s.blobs.spread = j.value("spread", 1.0);
    } else if (type == "csv") {
        s.kind = DataSource::Kind::csv;
        s.csv_path = j.at("path").get<std::string>();
        s.csv_has_header = j.value("has_header", false);
    } else {
        throw std::invalid_argument("config: dataset type must be 'blobs' or 'csv'");
    }
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = {{"dataset", c.source},
         {"d", c.d},
         {"graph_k", c.graph_k},
         {"knn_k", c.knn_k},
         {"epsilon", c.epsilon},
         {"sigma", c.sigma},
         {"max_iters", c.max_iters},
         {"tol", c.tol},
         {"nca_max_iters", c.nca_max_iters},
         {"noise_levels", c.noise_levels},
         {"per_class_sizes", c.per_class_sizes},
         {"test_per_class", c.test_per_class},
         {"repeats", c.repeats},
         {"master_seed", c.master_seed},
         {"tau", c.tau},
         {"mcmc_samples", c.mcmc_samples},
         {"methods", c.methods},
         {"standardize", c.standardize}};
}

/// Overwrite only the fields present in `j`; everything else keeps its current
/// value. This is what lets a config file take precedence over CLI flags.
inline void apply_config_overrides(const nlohmann::json& j, ExperimentConfig& c) {
    if (j.contains("dataset")) j.at("dataset").get_to(c.source);
    if (j.contains("d")) c.d = j.at("d").get<Eigen::Index>();
    if (j.contains("graph_k")) c.graph_k = j.at("graph_k").get<Eigen::Index>();
    if (j.contains("knn_k")) c.knn_k = j.at("knn_k").get<Eigen::Index>();
    if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
    if (j.contains("sigma")) c.sigma = j.at("sigma").get<double>();
    if (j.contains("max_iters")) c.max_iters = j.at("max_iters").get<int>();
    if (j.contains("tol")) c.tol = j.at("tol").get<double>();
    if (j.contains("nca_max_iters")) c.nca_max_iters = j.at("nca_max_iters").get<int>();
    if (j.contains("noise_levels")) c.noise_levels = j.at("noise_levels").get<std::vector<double>>();
    if (j.contains("per_class_sizes"))
        c.per_class_sizes = j.at("per_class_sizes").get<std::vector<Eigen::Index>>();
    if (j.contains("test_per_class")) c.test_per_class = j.at("test_per_class").get<Eigen::Index>();
    if (j.contains("repeats")) c.repeats = j.at("repeats").get<int>();
    if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("tau")) c.tau = j.at("tau").get<double>();
    if (j.contains("mcmc_samples")) c.mcmc_samples = j.at("mcmc_samples").get<int>();
    if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<std::string>>();
    if (j.contains("standardize")) c.standardize = j.at("standardize").get<bool>();
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    c = ExperimentConfig{};
    apply_config_overrides(j, c);
}

inline void to_json(nlohmann::json& j, const TraceRow& r) {
    j = {{"iter", r.iter}, {"objective", r.objective}, {"train_acc", r.train_acc}, {"test_acc", r.test_acc}};
}

inline void from_json(const nlohmann::json& j, TraceRow& r) {
    r.iter = j.at("iter").get<int>();
    r.objective = j.at("objective").get<double>();
    r.train_acc = j.at("train_acc").get<double>();
    r.test_acc = j.at("test_acc").get<double>();
}

inline void to_json(nlohmann::json& j, const MethodCell& c) {
    j = {{"method", c.method}, {"accuracy", c.accuracy}};
    if (c.map_all) j["map_all"] = *c.map_all;
    if (c.map_difficult) j["map_difficult"] = *c.map_difficult;
    if (c.map_normal) j["map_normal"] = *c.map_normal;
    if (c.p_accuracy_vs_nca) j["p_accuracy_vs_nca"] = *c.p_accuracy_vs_nca;
    if (c.p_accuracy_vs_pca) j["p_accuracy_vs_pca"] = *c.p_accuracy_vs_pca;
    if (!c.fit_iterations.empty()) {
        j["fit_iterations"] = c.fit_iterations;
        j["non_converged"] = c.non_converged;
    }
}

inline void from_json(const nlohmann::json& j, MethodCell& c) {
    c.method = j.at("method").get<std::string>();
    j.at("accuracy").get_to(c.accuracy);
    if (j.contains("map_all")) c.map_all = j.at("map_all").get<EvalReport>();
    if (j.contains("map_difficult")) c.map_difficult = j.at("map_difficult").get<EvalReport>();
    if (j.contains("map_normal")) c.map_normal = j.at("map_normal").get<EvalReport>();
    if (j.contains("p_accuracy_vs_nca")) c.p_accuracy_vs_nca = j.at("p_accuracy_vs_nca").get<double>();
    if (j.contains("p_accuracy_vs_pca")) c.p_accuracy_vs_pca = j.at("p_accuracy_vs_pca").get<double>();
    if (j.contains("fit_iterations")) {
        c.fit_iterations = j.at("fit_iterations").get<std::vector<int>>();
        c.non_converged = j.value("non_converged", 0);
    }
}

inline void to_json(nlohmann::json& j, const ConditionResult& c) {
    j = {{"label", c.label},
         {"noise_level", c.noise_level},
         {"per_class", c.per_class},
         {"cells", c.cells}};
}

inline void from_json(const nlohmann::json& j, ConditionResult& c) {
    c.label = j.at("label").get<std::string>();
    c.noise_level = j.at("noise_level").get<double>();
    c.per_class = j.at("per_class").get<Eigen::Index>();
    c.cells = j.at("cells").get<std::vector<MethodCell>>();
}

inline void to_json(nlohmann::json& j, const ReportBundle& b) {
    j = {{"config", b.config},
         {"conditions", b.conditions},
         {"nca_traces", b.nca_traces},
         {"bnca_traces", b.bnca_traces}};
}

inline void from_json(const nlohmann::json& j, ReportBundle& b) {
    j.at("config").get_to(b.config);
    b.conditions = j.at("conditions").get<std::vector<ConditionResult>>();
    b.nca_traces = j.value("nca_traces", std::map<std::string, std::vector<TraceRow>>{});
    b.bnca_traces = j.value("bnca_traces", std::map<std::string, std::vector<TraceRow>>{});
}

// ---------------------------------------------------------------------------
// Report emission.

namespace detail {

inline std::string sanitize_for_filename(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-') c = '_';
    return out;
}

inline std::string format_cell(const EvalReport& r) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f±%.2f", 100.0 * r.mean, 100.0 * r.std_dev);
    return buf;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline std::string trace_csv(const std::vector<TraceRow>& rows) {
    std::string text = "iter,objective,train_acc,test_acc\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.10g,%.6f,%.6f\n", r.iter, r.objective, r.train_acc,
                      r.test_acc);
        text += buf;
    }
    return text;
}

}  // namespace detail

/// Accuracy table in the rows-by-condition, columns-by-method layout:
/// cells are "mean±std" percentages.
inline std::string accuracy_table_csv(const ReportBundle& bundle) {
    std::string text = "condition";
    for (const auto& m : bundle.config.methods) text += "," + m;
    text += "\n";
    for (const auto& cond : bundle.conditions) {
        text += cond.label;
        for (const auto& cell : cond.cells) text += "," + detail::format_cell(cell.accuracy);
        text += "\n";
    }
    return text;
}

/// Write the bundle. "json" writes the full bundle to `path`; "csv" writes the
/// accuracy table to `path` plus one learning-trace CSV per recorded condition
/// next to it (suffix "_trace_<method>_<condition>.csv").
inline void emit_report(const ReportBundle& bundle, const std::string& format,
                        const std::string& path) {
    if (format == "json") {
        save_json(nlohmann::json(bundle), path);
        return;
    }
    if (format != "csv") throw std::invalid_argument("emit_report: format must be 'json' or 'csv'");

    detail::write_text(path, accuracy_table_csv(bundle));

    std::string stem = path;
    if (auto dot = stem.rfind('.'); dot != std::string::npos && dot > stem.rfind('/') + 1)
        stem = stem.substr(0, dot);
    for (const auto& [label, rows] : bundle.nca_traces)
        detail::write_text(stem + "_trace_nca_" + detail::sanitize_for_filename(label) + ".csv",
                           detail::trace_csv(rows));
    for (const auto& [label, rows] : bundle.bnca_traces)
        detail::write_text(stem + "_trace_bnca_" + detail::sanitize_for_filename(label) + ".csv",
                           detail::trace_csv(rows));
}

}  // namespace bnca

#endif  // BNCA_EXPERIMENT_HPP
