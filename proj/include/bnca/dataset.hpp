#ifndef BNCA_DATASET_HPP
#define BNCA_DATASET_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace bnca {

/// Labeled point set. Rows of `points` are samples; labels are contiguous
/// integers in [0, class_count).
struct Dataset {
    Eigen::MatrixXd points;   // N x D
    std::vector<int> labels;  // length N
    int class_count = 0;

    Eigen::Index size() const { return points.rows(); }
    Eigen::Index dim() const { return points.cols(); }
};

struct NoiseSpec {
    double level = 0.0;  // fraction of labels to corrupt, in [0,1]
    std::uint64_t seed = 0;
};

inline void validate(const Dataset& ds) {
    if (ds.size() < 1 || ds.dim() < 1)
        throw std::invalid_argument("dataset: need N >= 1 and D >= 1");
    if (static_cast<Eigen::Index>(ds.labels.size()) != ds.size())
        throw std::invalid_argument("dataset: label count does not match point count");
    if (!ds.points.allFinite())
        throw std::invalid_argument("dataset: non-finite feature value");
    for (int y : ds.labels)
        if (y < 0 || y >= ds.class_count)
            throw std::invalid_argument("dataset: label out of range");
}

namespace detail {

inline double parse_feature(const std::string& cell) {
    const char* s = cell.c_str();
    char* end = nullptr;
    double v = std::strtod(s, &end);
    if (end == s || *end != '\0')
        throw std::runtime_error("csv: non-numeric feature cell '" + cell + "'");
    if (!std::isfinite(v))
        throw std::runtime_error("csv: non-finite feature value '" + cell + "'");
    return v;
}

inline long parse_label(const std::string& cell) {
    const char* s = cell.c_str();
    char* end = nullptr;
    long v = std::strtol(s, &end, 10);
    if (end == s || *end != '\0')
        throw std::runtime_error("csv: label column must be an integer, got '" + cell + "'");
    return v;
}

inline std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return cells;
}

// Half-up rounding of a nonnegative value.
inline Eigen::Index round_half_up(double x) {
    return static_cast<Eigen::Index>(std::floor(x + 0.5));
}

inline std::vector<std::vector<Eigen::Index>> indices_by_class(const Dataset& ds) {
    std::vector<std::vector<Eigen::Index>> by_class(ds.class_count);
    for (Eigen::Index i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
    return by_class;
}

}  // namespace detail

/// Parse a comma-separated file whose last column is an integer class label.
/// Labels are remapped to contiguous [0, C) in order of first appearance.
inline Dataset load_csv(const std::string& path, bool has_header = false) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open '" + path + "'");

    std::vector<std::vector<double>> rows;
    std::vector<long> raw_labels;
    std::string line;
    std::size_t expected_cols = 0;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (first && has_header) {
            first = false;
            continue;
        }
        first = false;
        if (line.empty()) continue;
        auto cells = detail::split_row(line);
        if (cells.size() < 2) throw std::runtime_error("csv: fewer than 2 columns");
        if (expected_cols == 0) expected_cols = cells.size();
        if (cells.size() != expected_cols) throw std::runtime_error("csv: ragged rows");
        std::vector<double> feats(cells.size() - 1);
        for (std::size_t c = 0; c + 1 < cells.size(); ++c) feats[c] = detail::parse_feature(cells[c]);
        raw_labels.push_back(detail::parse_label(cells.back()));
        rows.push_back(std::move(feats));
    }
    if (rows.empty()) throw std::runtime_error("csv: no data rows in '" + path + "'");

    Dataset ds;
    ds.points.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(expected_cols - 1));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            ds.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];

    std::vector<long> seen;  // remap in order of first appearance
    ds.labels.resize(rows.size());
    for (std::size_t i = 0; i < raw_labels.size(); ++i) {
        auto it = std::find(seen.begin(), seen.end(), raw_labels[i]);
        if (it == seen.end()) {
            seen.push_back(raw_labels[i]);
            it = std::prev(seen.end());
        }
        ds.labels[i] = static_cast<int>(it - seen.begin());
    }
    ds.class_count = static_cast<int>(seen.size());
    validate(ds);
    return ds;
}

/// Write in the same format load_csv reads. Features are printed with enough
/// digits to round-trip bit-exactly.
inline void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("csv: cannot write '" + path + "'");
    char buf[64];
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
        for (Eigen::Index j = 0; j < ds.dim(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", ds.points(i, j));
            out << buf << ',';
        }
        out << ds.labels[i] << '\n';
    }
    if (!out) throw std::runtime_error("csv: write failed for '" + path + "'");
}

/// Synthesize C isotropic Gaussian clusters with distinct means. N = C * per_class,
/// points grouped by class. Deterministic given seed.
inline Dataset make_blobs(int class_count, Eigen::Index per_class, Eigen::Index dim,
                          double spread, std::uint64_t seed) {
    if (class_count < 2 || per_class < 1 || dim < 1 || !(spread > 0.0))
        throw std::invalid_argument("make_blobs: need C >= 2, m >= 1, D >= 1, spread > 0");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    Eigen::MatrixXd means(class_count, dim);
    while (true) {
        for (int c = 0; c < class_count; ++c)
            for (Eigen::Index j = 0; j < dim; ++j) means(c, j) = 3.0 * normal(rng);
        double min_gap = std::numeric_limits<double>::infinity();
        for (int a = 0; a < class_count; ++a)
            for (int b = a + 1; b < class_count; ++b)
                min_gap = std::min(min_gap, (means.row(a) - means.row(b)).norm());
        if (min_gap > 1e-6) break;
    }

    Dataset ds;
    ds.class_count = class_count;
    ds.points.resize(class_count * per_class, dim);
    ds.labels.resize(static_cast<std::size_t>(class_count * per_class));
    Eigen::Index r = 0;
    for (int c = 0; c < class_count; ++c) {
        for (Eigen::Index k = 0; k < per_class; ++k, ++r) {
            for (Eigen::Index j = 0; j < dim; ++j)
                ds.points(r, j) = means(c, j) + spread * normal(rng);
            ds.labels[static_cast<std::size_t>(r)] = c;
        }
    }
    return ds;
}

/// Draw exactly `per_class` members of every class, uniformly without
/// replacement. Deterministic given seed.
inline Dataset subsample_per_class(const Dataset& ds, Eigen::Index per_class, std::uint64_t seed) {
    if (per_class < 1) throw std::invalid_argument("subsample_per_class: per_class must be >= 1");
    auto by_class = detail::indices_by_class(ds);
    for (int c = 0; c < ds.class_count; ++c)
        if (static_cast<Eigen::Index>(by_class[c].size()) < per_class)
            throw std::invalid_argument("subsample_per_class: class " + std::to_string(c) +
                                        " has fewer than " + std::to_string(per_class) + " members");

    std::mt19937_64 rng(seed);
    Dataset out;
    out.class_count = ds.class_count;
    out.points.resize(per_class * ds.class_count, ds.dim());
    out.labels.resize(static_cast<std::size_t>(per_class * ds.class_count));
    Eigen::Index r = 0;
    for (int c = 0; c < ds.class_count; ++c) {
        std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
        for (Eigen::Index k = 0; k < per_class; ++k, ++r) {
            out.points.row(r) = ds.points.row(by_class[c][k]);
            out.labels[static_cast<std::size_t>(r)] = c;
        }
    }
    return out;
}

/// Flip exactly round(level * N) labels, each to a uniformly random different
/// class. The flipped index set and replacement labels are deterministic given
/// the seed; the input dataset is left untouched.
inline Dataset inject_label_noise(const Dataset& ds, const NoiseSpec& spec) {
    if (spec.level < 0.0 || spec.level > 1.0)
        throw std::invalid_argument("inject_label_noise: level must be in [0,1]");
    if (ds.class_count < 2)
        throw std::invalid_argument("inject_label_noise: need at least 2 classes");

    Dataset out = ds;
    const Eigen::Index n_flip = detail::round_half_up(spec.level * static_cast<double>(ds.size()));
    if (n_flip == 0) return out;

    std::mt19937_64 rng(spec.seed);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(ds.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng);

    std::uniform_int_distribution<int> other(0, ds.class_count - 2);
    for (Eigen::Index k = 0; k < n_flip; ++k) {
        const Eigen::Index i = order[static_cast<std::size_t>(k)];
        int y = other(rng);
        if (y >= out.labels[static_cast<std::size_t>(i)]) ++y;  // skip the original class
        out.labels[static_cast<std::size_t>(i)] = y;
    }
    return out;
}

/// Per-feature affine scaler fit on a training set (zero mean, unit variance;
/// constant features are left unscaled).
struct FeatureScaler {
    Eigen::VectorXd shift;
    Eigen::VectorXd scale;

    static FeatureScaler fit(const Dataset& ds) {
        FeatureScaler s;
        s.shift = ds.points.colwise().mean();
        Eigen::MatrixXd centered = ds.points.rowwise() - s.shift.transpose();
        Eigen::VectorXd var = centered.array().square().colwise().mean();
        s.scale = var.array().sqrt().max(1e-12).inverse();
        return s;
    }

    Dataset apply(const Dataset& ds) const {
        Dataset out = ds;
        out.points = (ds.points.rowwise() - shift.transpose()) * scale.asDiagonal();
        return out;
    }
};

}  // namespace bnca

#endif  // BNCA_DATASET_HPP
