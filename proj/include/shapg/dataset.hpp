#ifndef SHAPG_DATASET_HPP
#define SHAPG_DATASET_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "shapg/common.hpp"

namespace shapg {

enum class TaskKind { regression, classification };

inline std::string to_string(TaskKind t) {
    return t == TaskKind::regression ? "regression" : "classification";
}

inline TaskKind task_from_string(const std::string& s) {
    if (s == "regression") return TaskKind::regression;
    if (s == "classification") return TaskKind::classification;
    throw InvalidArgument("unknown task kind: " + s);
}

/// Tabular sample: feature matrix, target column, names. Column-major
/// feature storage (features[j] is column j).
struct Dataset {
    std::vector<std::vector<double>> features;  // [M][N]
    std::vector<double> target;                 // [N]
    std::vector<std::string> feature_names;
    TaskKind task = TaskKind::regression;

    std::size_t n_features() const { return features.size(); }
    std::size_t n_rows() const { return target.size(); }

    void validate() const {
        if (feature_names.size() != features.size())
            throw InvalidArgument("feature name count does not match feature columns");
        if (features.empty()) throw InvalidArgument("dataset has no feature columns");
        if (target.size() < 2) throw InvalidArgument("dataset needs at least 2 rows");
        for (std::size_t j = 0; j < features.size(); ++j) {
            if (features[j].size() != target.size())
                throw InvalidArgument("column '" + feature_names[j] + "' length mismatch");
            for (double v : features[j]) {
                if (!std::isfinite(v))
                    throw InvalidArgument("non-finite value in column '" + feature_names[j] + "'");
            }
        }
        for (double v : target) {
            if (!std::isfinite(v)) throw InvalidArgument("non-finite value in target");
        }
    }

    /// Rows restricted to the given feature columns, row-major.
    Matrix rows_for(std::span<const int> columns) const {
        Matrix out(n_rows());
        for (std::size_t r = 0; r < n_rows(); ++r) {
            out[r].reserve(columns.size());
            for (int c : columns) out[r].push_back(features[static_cast<std::size_t>(c)][r]);
        }
        return out;
    }

    Dataset subset_rows(std::span<const std::size_t> rows) const {
        Dataset d;
        d.feature_names = feature_names;
        d.task = task;
        d.features.resize(features.size());
        for (std::size_t j = 0; j < features.size(); ++j) {
            d.features[j].reserve(rows.size());
            for (auto r : rows) d.features[j].push_back(features[j][r]);
        }
        d.target.reserve(rows.size());
        for (auto r : rows) d.target.push_back(target[r]);
        return d;
    }
};

/// Pearson correlations between feature columns. Zero diagonal; a
/// zero-variance column correlates 0 with everything.
struct CorrelationMatrix {
    std::size_t m = 0;
    std::vector<double> values;  // m*m, symmetric

    double at(std::size_t j, std::size_t k) const { return values[j * m + k]; }
    double& at(std::size_t j, std::size_t k) { return values[j * m + k]; }
};

namespace detail {

inline std::vector<std::string> parse_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

struct LoadOptions {
    bool impute_mean = false;  // mean-impute empty cells instead of rejecting
};

/// Load a CSV table (header row, '.' decimal separator) into a Dataset.
inline Dataset load_table(const std::string& path, const std::string& target_column,
                          TaskKind task, const LoadOptions& opts = {}) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw InvalidArgument("empty table: " + path);
    std::vector<std::string> header = detail::parse_csv_line(line);
    for (auto& h : header) h = detail::trim(h);

    std::size_t target_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == target_column) target_idx = i;
    }
    if (target_idx == header.size())
        throw InvalidArgument("target column '" + target_column + "' not found in " + path);

    Dataset d;
    d.task = task;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i != target_idx) d.feature_names.push_back(header[i]);
    }
    if (d.feature_names.empty())
        throw InvalidArgument("table has no feature columns besides the target");
    d.features.resize(d.feature_names.size());

    // (column, row) positions of empty cells, for optional imputation
    std::vector<std::pair<std::size_t, std::size_t>> missing;

    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        std::vector<std::string> fields = detail::parse_csv_line(line);
        if (fields.size() != header.size())
            throw InvalidArgument(path + ": row " + std::to_string(row) + " has " +
                                  std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(header.size()));
        std::size_t fcol = 0;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            std::string cell = detail::trim(fields[i]);
            double value = 0.0;
            bool empty_cell = cell.empty();
            if (!empty_cell) {
                std::size_t pos = 0;
                try {
                    value = std::stod(cell, &pos);
                } catch (const std::exception&) {
                    pos = 0;
                }
                if (pos != cell.size())
                    throw InvalidArgument(path + ": non-numeric cell '" + cell + "' at row " +
                                          std::to_string(row) + ", column '" + header[i] + "'");
            }
            if (i == target_idx) {
                if (empty_cell)
                    throw InvalidArgument(path + ": missing target value at row " +
                                          std::to_string(row));
                d.target.push_back(value);
            } else {
                if (empty_cell) {
                    if (!opts.impute_mean)
                        throw InvalidArgument(path + ": missing value at row " +
                                              std::to_string(row) + ", column '" + header[i] +
                                              "' (enable imputation to mean-fill)");
                    missing.emplace_back(fcol, d.features[fcol].size());
                }
                d.features[fcol].push_back(value);
                ++fcol;
            }
        }
    }
    if (d.target.empty()) throw InvalidArgument("empty table: " + path);

    if (!missing.empty()) {
        std::vector<double> mean(d.n_features(), 0.0);
        std::vector<std::size_t> count(d.n_features(), 0);
        for (std::size_t j = 0; j < d.n_features(); ++j) {
            std::vector<bool> is_missing(d.target.size(), false);
            for (auto& [mc, mr] : missing) {
                if (mc == j) is_missing[mr] = true;
            }
            for (std::size_t r = 0; r < d.target.size(); ++r) {
                if (!is_missing[r]) {
                    mean[j] += d.features[j][r];
                    ++count[j];
                }
            }
            mean[j] = count[j] ? mean[j] / static_cast<double>(count[j]) : 0.0;
        }
        for (auto& [mc, mr] : missing) d.features[mc][mr] = mean[mc];
    }

    d.validate();
    return d;
}

/// Sample Pearson correlation for each feature pair; target excluded,
/// diagonal forced to zero.
inline CorrelationMatrix pearson_matrix(const Dataset& d) {
    const std::size_t m = d.n_features();
    const std::size_t n = d.n_rows();
    CorrelationMatrix w;
    w.m = m;
    w.values.assign(m * m, 0.0);

    std::vector<double> mean(m, 0.0), sd(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        mean[j] = std::accumulate(d.features[j].begin(), d.features[j].end(), 0.0) /
                  static_cast<double>(n);
        double ss = 0.0;
        for (double v : d.features[j]) ss += (v - mean[j]) * (v - mean[j]);
        sd[j] = std::sqrt(ss);
    }

    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t k = j + 1; k < m; ++k) {
            if (sd[j] == 0.0 || sd[k] == 0.0) continue;  // zero-variance rule
            double cov = 0.0;
            for (std::size_t r = 0; r < n; ++r)
                cov += (d.features[j][r] - mean[j]) * (d.features[k][r] - mean[k]);
            double r = cov / (sd[j] * sd[k]);
            r = std::clamp(r, -1.0, 1.0);
            w.at(j, k) = r;
            w.at(k, j) = r;
        }
    }
    return w;
}

/// Deterministic train/test split. Stratified for classification when every
/// class has at least two members; `stratified` reports which path was taken.
struct SplitPair {
    Dataset train;
    Dataset test;
    std::uint64_t seed = 0;
    double ratio = 0.8;
    bool stratified = false;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
};

namespace detail {

// Deterministic shuffle independent of stdlib distribution internals.
inline void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
}

}  // namespace detail

inline SplitPair split(const Dataset& d, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw InvalidArgument("split ratio must be in (0,1)");
    const std::size_t n = d.n_rows();
    if (n < 2) throw InvalidArgument("too few rows to split");

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> train_rows, test_rows;

    bool can_stratify = false;
    if (d.task == TaskKind::classification) {
        std::map<double, std::vector<std::size_t>> by_class;
        for (std::size_t r = 0; r < n; ++r) by_class[d.target[r]].push_back(r);
        can_stratify = std::all_of(by_class.begin(), by_class.end(),
                                   [](const auto& kv) { return kv.second.size() >= 2; });
        if (can_stratify) {
            for (auto& [cls, rows] : by_class) {
                detail::shuffle_indices(rows, rng);
                auto k = static_cast<std::size_t>(
                    std::floor(ratio * static_cast<double>(rows.size()) + 0.5));
                k = std::clamp<std::size_t>(k, 1, rows.size() - 1);
                train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + k);
                test_rows.insert(test_rows.end(), rows.begin() + k, rows.end());
            }
            std::sort(train_rows.begin(), train_rows.end());
            std::sort(test_rows.begin(), test_rows.end());
        }
    }

    if (train_rows.empty()) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        detail::shuffle_indices(idx, rng);
        auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5));
        k = std::clamp<std::size_t>(k, 1, n - 1);
        train_rows.assign(idx.begin(), idx.begin() + k);
        test_rows.assign(idx.begin() + k, idx.end());
        std::sort(train_rows.begin(), train_rows.end());
        std::sort(test_rows.begin(), test_rows.end());
    }

    SplitPair sp;
    sp.seed = seed;
    sp.ratio = ratio;
    sp.stratified = can_stratify;
    sp.train = d.subset_rows(train_rows);
    sp.test = d.subset_rows(test_rows);
    sp.train_rows = std::move(train_rows);
    sp.test_rows = std::move(test_rows);
    return sp;
}

/// CorrelationMatrix as CSV with a leading name row and column.
inline std::string correlation_csv(const CorrelationMatrix& w,
                                   const std::vector<std::string>& names) {
    if (names.size() != w.m) throw InvalidArgument("name count does not match matrix size");
    std::ostringstream out;
    out.precision(17);
    out << "feature";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    for (std::size_t j = 0; j < w.m; ++j) {
        out << names[j];
        for (std::size_t k = 0; k < w.m; ++k) out << ',' << w.at(j, k);
        out << '\n';
    }
    return out.str();
}

}  // namespace shapg

#endif
