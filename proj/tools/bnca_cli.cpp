// Experiment runner and model tool for the bnca library.
//
// Exit codes: 0 success, 1 configuration error, 2 data error, 3 internal error.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "bnca/bnca.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string data_csv;
    bool csv_has_header = false;
    int blob_classes = 3;
    long blob_per_class = 60;
    long blob_dim = 6;
    double blob_spread = 1.0;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags, bnca::ExperimentConfig& cfg) {
    cmd->add_option("--config", flags.config_path, "JSON config file; its keys override flags");
    cmd->add_option("--data", flags.data_csv, "CSV dataset (features..., integer label)");
    cmd->add_flag("--has-header", flags.csv_has_header, "skip the first CSV row");
    cmd->add_option("--classes", flags.blob_classes, "synthetic blobs: class count");
    cmd->add_option("--per-class-pool", flags.blob_per_class, "synthetic blobs: points per class");
    cmd->add_option("--dim", flags.blob_dim, "synthetic blobs: dimension");
    cmd->add_option("--spread", flags.blob_spread, "synthetic blobs: cluster spread");

    cmd->add_option("--d", cfg.d, "eigen count (0 = input dimension)");
    cmd->add_option("--graph-k", cfg.graph_k, "training neighborhood size K");
    cmd->add_option("--knn-k", cfg.knn_k, "evaluation KNN k");
    cmd->add_option("--epsilon", cfg.epsilon, "prior mean scale");
    cmd->add_option("--sigma", cfg.sigma, "prior covariance scale");
    cmd->add_option("--max-iters", cfg.max_iters, "variational fit iteration cap");
    cmd->add_option("--tol", cfg.tol, "variational convergence tolerance");
    cmd->add_option("--nca-max-iters", cfg.nca_max_iters, "NCA ascent iteration cap");
    cmd->add_option("--test-per-class", cfg.test_per_class, "test points per class");
    cmd->add_option("--repeats", cfg.repeats, "seeded repetitions");
    cmd->add_option("--seed", cfg.master_seed, "master seed");
    cmd->add_option("--tau", cfg.tau, "modified MAP threshold");
    cmd->add_option("--mcmc-samples", cfg.mcmc_samples, "posterior draws per prediction");
    cmd->add_option("--methods", cfg.methods, "subset of pca nca bnca");
    cmd->add_flag("--standardize,!--no-standardize", cfg.standardize,
                  "per-feature standardization fit on the training half");
}

// Flags first, then the config file on top.
void finalize_config(const CommonFlags& flags, bnca::ExperimentConfig& cfg) {
    if (!flags.data_csv.empty()) {
        cfg.source.kind = bnca::DataSource::Kind::csv;
        cfg.source.csv_path = flags.data_csv;
        cfg.source.csv_has_header = flags.csv_has_header;
    } else {
        cfg.source.kind = bnca::DataSource::Kind::blobs;
        cfg.source.blobs.classes = flags.blob_classes;
        cfg.source.blobs.per_class = flags.blob_per_class;
        cfg.source.blobs.dim = flags.blob_dim;
        cfg.source.blobs.spread = flags.blob_spread;
    }
    if (!flags.config_path.empty())
        bnca::apply_config_overrides(bnca::load_json(flags.config_path), cfg);
}

bnca::Dataset load_source(const bnca::ExperimentConfig& cfg) {
    if (cfg.source.kind == bnca::DataSource::Kind::csv)
        return bnca::load_csv(cfg.source.csv_path, cfg.source.csv_has_header);
    return bnca::make_blobs(cfg.source.blobs.classes, cfg.source.blobs.per_class,
                            cfg.source.blobs.dim, cfg.source.blobs.spread, cfg.master_seed);
}

int cmd_train(const CommonFlags& flags, bnca::ExperimentConfig cfg, const std::string& method,
              const std::string& out_path) {
    finalize_config(flags, cfg);
    bnca::Dataset train = load_source(cfg);

    nlohmann::json model;
    model["method"] = method;
    model["standardized"] = cfg.standardize;
    if (cfg.standardize) {
        bnca::FeatureScaler scaler = bnca::FeatureScaler::fit(train);
        train = scaler.apply(train);
        model["scaler"] = scaler;
    }
    bnca::NeighborGraph graph =
        bnca::build_graph(train, std::min<Eigen::Index>(cfg.graph_k, train.size() - 1));

    if (method == "nca") {
        bnca::NcaTrainOptions opts;
        opts.max_iters = cfg.nca_max_iters;
        bnca::NcaFitResult fit =
            bnca::train_nca(train, graph, bnca::MahalanobisMetric::identity(train.dim()), opts);
        model["metric"] = fit.metric;
        model["objective"] = fit.objective;
        std::cerr << "nca: objective " << fit.trace.front().objective << " -> " << fit.objective
                  << " in " << fit.trace.size() - 1 << " steps\n";
    } else if (method == "bnca") {
        const Eigen::Index d = cfg.d > 0 ? std::min(cfg.d, train.dim()) : train.dim();
        bnca::EigenBasis basis = bnca::top_eigenvectors(train.points, d);
        bnca::BncaFitOptions opts;
        opts.max_iters = cfg.max_iters;
        opts.tol = cfg.tol;
        bnca::BncaFitResult fit = bnca::fit_bnca(
            train, graph, basis, bnca::GaussianBelief::isotropic(d, cfg.epsilon, cfg.sigma), opts);
        model["basis"] = basis;
        model["posterior"] = fit.posterior;
        model["fit"] = {{"converged", fit.converged}, {"iterations", fit.iterations}};
        std::cerr << "bnca: " << (fit.converged ? "converged" : "NOT converged") << " in "
                  << fit.iterations << " iterations\n";
    } else {
        throw std::invalid_argument("train: method must be nca or bnca");
    }
    bnca::save_json(model, out_path);
    std::cout << out_path << "\n";
    return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& train_csv,
                 const std::string& test_csv, bool has_header, Eigen::Index knn_k, double tau,
                 int mcmc_samples, std::uint64_t seed) {
    nlohmann::json model = bnca::load_json(model_path);
    bnca::Dataset train = bnca::load_csv(train_csv, has_header);
    bnca::Dataset test = bnca::load_csv(test_csv, has_header);
    if (model.value("standardized", false)) {
        bnca::FeatureScaler scaler = model.at("scaler").get<bnca::FeatureScaler>();
        train = scaler.apply(train);
        test = scaler.apply(test);
    }

    const std::string method = model.at("method").get<std::string>();
    std::vector<int> predictions;
    std::vector<Eigen::VectorXd> predictives;
    const Eigen::Index query_k = std::min<Eigen::Index>(8, train.size());

    if (method == "nca") {
        bnca::MahalanobisMetric metric = model.at("metric").get<bnca::MahalanobisMetric>();
        bnca::LinearMapSqDist dist{metric.a};
        for (Eigen::Index i = 0; i < test.size(); ++i) {
            Eigen::VectorXd x = test.points.row(i).transpose();
            predictions.push_back(bnca::knn_classify(train, x, knn_k, dist));
            predictives.push_back(
                bnca::nca_class_posterior(x, train, bnca::query_neighbors(train, x, query_k), metric));
        }
    } else if (method == "bnca") {
        bnca::EigenBasis basis = model.at("basis").get<bnca::EigenBasis>();
        bnca::GaussianBelief posterior = model.at("posterior").get<bnca::GaussianBelief>();
        bnca::ScaledProjection proj = bnca::map_metric(posterior, basis);
        bnca::LinearMapSqDist dist{proj.projection};
        for (Eigen::Index i = 0; i < test.size(); ++i) {
            Eigen::VectorXd x = test.points.row(i).transpose();
            predictions.push_back(bnca::knn_classify(train, x, knn_k, dist));
            predictives.push_back(bnca::predictive_mcmc(
                x, train, bnca::query_neighbors(train, x, query_k), basis, posterior, mcmc_samples,
                bnca::detail::splitmix64(seed ^ static_cast<std::uint64_t>(i))));
        }
    } else {
        throw std::invalid_argument("evaluate: unsupported model method '" + method + "'");
    }

    nlohmann::json out;
    out["accuracy"] = bnca::accuracy(predictions, test.labels);
    out["modified_map"] = bnca::modified_map(predictives, test.labels, tau);
    out["test_size"] = test.size();
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_sweep(const CommonFlags& flags, bnca::ExperimentConfig cfg,
              const std::vector<double>& noise_levels, const std::vector<long>& sizes,
              const std::string& out_json, const std::string& out_csv) {
    if (!noise_levels.empty()) cfg.noise_levels = noise_levels;
    if (!sizes.empty()) {
        cfg.per_class_sizes.clear();
        for (long s : sizes) cfg.per_class_sizes.push_back(s);
    }
    finalize_config(flags, cfg);  // a config file still wins over sweep flags
    bnca::ReportBundle bundle = bnca::run_experiment(cfg);
    if (!out_json.empty()) bnca::emit_report(bundle, "json", out_json);
    if (!out_csv.empty()) bnca::emit_report(bundle, "csv", out_csv);
    std::cout << bnca::accuracy_table_csv(bundle);
    return 0;
}

int cmd_report(const std::string& in_path, const std::string& format, const std::string& out_path) {
    bnca::ReportBundle bundle = bnca::load_json(in_path).get<bnca::ReportBundle>();
    bnca::emit_report(bundle, format, out_path);
    std::cout << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian neighbourhood component analysis: metric learning experiments"};
    app.require_subcommand(1);

    CommonFlags flags;
    bnca::ExperimentConfig cfg;

    // train
    auto* train = app.add_subcommand("train", "fit one model on a full dataset");
    std::string train_method = "bnca";
    std::string train_out = "model.json";
    add_common_flags(train, flags, cfg);
    train->add_option("--method", train_method, "nca or bnca");
    train->add_option("--out", train_out, "model output path");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "score a saved model on a test CSV");
    std::string eval_model, eval_train, eval_test;
    bool eval_header = false;
    long eval_knn_k = 5;
    double eval_tau = 0.01;
    int eval_samples = 1000;
    std::uint64_t eval_seed = 1;
    evaluate->add_option("--model", eval_model, "model JSON from train")->required();
    evaluate->add_option("--train", eval_train, "training CSV (neighbor reference set)")->required();
    evaluate->add_option("--test", eval_test, "test CSV")->required();
    evaluate->add_flag("--has-header", eval_header, "skip the first CSV row");
    evaluate->add_option("--knn-k", eval_knn_k, "KNN k");
    evaluate->add_option("--tau", eval_tau, "modified MAP threshold");
    evaluate->add_option("--mcmc-samples", eval_samples, "posterior draws per prediction");
    evaluate->add_option("--seed", eval_seed, "sampling seed");

    // sweep-noise
    auto* sweep_noise = app.add_subcommand("sweep-noise", "accuracy across label-noise levels");
    std::vector<double> noise_levels = {0.0, 0.1, 0.2, 0.3};
    std::vector<long> noise_sizes;
    std::string noise_json = "noise_report.json", noise_csv;
    add_common_flags(sweep_noise, flags, cfg);
    sweep_noise->add_option("--noise-levels", noise_levels, "levels to sweep");
    sweep_noise->add_option("--per-class", noise_sizes, "training points per class");
    sweep_noise->add_option("--out", noise_json, "report JSON path");
    sweep_noise->add_option("--csv", noise_csv, "also write the CSV table here");

    // sweep-size
    auto* sweep_size = app.add_subcommand("sweep-size", "accuracy across training-set sizes");
    std::vector<long> size_sizes = {10, 20, 30};
    std::vector<double> size_noise;
    std::string size_json = "size_report.json", size_csv;
    add_common_flags(sweep_size, flags, cfg);
    sweep_size->add_option("--per-class", size_sizes, "training sizes to sweep");
    sweep_size->add_option("--noise-levels", size_noise, "fixed noise level(s)");
    sweep_size->add_option("--out", size_json, "report JSON path");
    sweep_size->add_option("--csv", size_csv, "also write the CSV table here");

    // report
    auto* report = app.add_subcommand("report", "re-emit a saved report bundle");
    std::string report_in, report_format = "csv", report_out = "report.csv";
    report->add_option("--in", report_in, "report JSON from a sweep")->required();
    report->add_option("--format", report_format, "json or csv");
    report->add_option("--out", report_out, "output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (train->parsed()) return cmd_train(flags, cfg, train_method, train_out);
        if (evaluate->parsed())
            return cmd_evaluate(eval_model, eval_train, eval_test, eval_header, eval_knn_k, eval_tau,
                                eval_samples, eval_seed);
        if (sweep_noise->parsed())
            return cmd_sweep(flags, cfg, noise_levels, noise_sizes, noise_json, noise_csv);
        if (sweep_size->parsed())
            return cmd_sweep(flags, cfg, size_noise, size_sizes, size_json, size_csv);
        if (report->parsed()) return cmd_report(report_in, report_format, report_out);
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::runtime_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
