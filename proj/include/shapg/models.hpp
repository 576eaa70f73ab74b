#ifndef SHAPG_MODELS_HPP
#define SHAPG_MODELS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "shapg/common.hpp"
#include "shapg/dataset.hpp"

namespace shapg {

enum class EvaluatorKind { ols, knn_regress, knn_classify, external };

inline std::string to_string(EvaluatorKind k) {
    switch (k) {
        case EvaluatorKind::ols: return "ols";
        case EvaluatorKind::knn_regress: return "knn_regress";
        case EvaluatorKind::knn_classify: return "knn_classify";
        case EvaluatorKind::external: return "external";
    }
    return "?";
}

/// Model spec used by the characteristic function: which learner, its
/// hyperparameters, and the seed handed to any randomized learner.
struct Evaluator {
    EvaluatorKind kind = EvaluatorKind::ols;
    int k = 5;                  // k-NN neighbor count
    double lambda = 1e-8;       // ridge term on the OLS normal equations
    std::string command;        // external evaluator command line
    std::uint64_t seed = 0;

    void validate() const {
        if (k < 1) throw InvalidArgument("k must be >= 1");
        if (lambda < 0.0) throw InvalidArgument("lambda must be >= 0");
        if (kind == EvaluatorKind::external && command.empty())
            throw InvalidArgument("external evaluator needs a command");
    }
};

enum class MetricKind { r2, f1, accuracy };

struct Metric {
    MetricKind kind = MetricKind::r2;
    double value = 0.0;
};

inline MetricKind default_metric(TaskKind task) {
    return task == TaskKind::regression ? MetricKind::r2 : MetricKind::f1;
}

// ---------------------------------------------------------------------------
// Scoring

inline Metric score(const std::vector<double>& predictions, const std::vector<double>& truth,
                    MetricKind kind) {
    if (predictions.size() != truth.size() || truth.empty())
        throw InvalidArgument("score: prediction/truth length mismatch");
    const auto n = static_cast<double>(truth.size());

    switch (kind) {
        case MetricKind::r2: {
            double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / n;
            double ss_res = 0.0, ss_tot = 0.0;
            for (std::size_t i = 0; i < truth.size(); ++i) {
                ss_res += (truth[i] - predictions[i]) * (truth[i] - predictions[i]);
                ss_tot += (truth[i] - mean) * (truth[i] - mean);
            }
            double r2;
            if (ss_tot == 0.0)
                r2 = ss_res == 0.0 ? 1.0 : 0.0;
            else
                r2 = 1.0 - ss_res / ss_tot;
            return {MetricKind::r2, r2};
        }
        case MetricKind::accuracy: {
            std::size_t correct = 0;
            for (std::size_t i = 0; i < truth.size(); ++i)
                if (predictions[i] == truth[i]) ++correct;
            return {MetricKind::accuracy, static_cast<double>(correct) / n};
        }
        case MetricKind::f1: {
            std::vector<double> classes(truth);
            std::sort(classes.begin(), classes.end());
            classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

            auto f1_for = [&](double positive) {
                std::size_t tp = 0, fp = 0, fn = 0;
                for (std::size_t i = 0; i < truth.size(); ++i) {
                    bool pred_pos = predictions[i] == positive;
                    bool true_pos = truth[i] == positive;
                    if (pred_pos && true_pos) ++tp;
                    else if (pred_pos) ++fp;
                    else if (true_pos) ++fn;
                }
                double p = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
                double r = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
                return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
            };

            if (classes.size() <= 2) {
                // binary: larger label is the positive class
                double positive = classes.back();
                return {MetricKind::f1, f1_for(positive)};
            }
            double total = 0.0;
            for (double c : classes) total += f1_for(c);
            return {MetricKind::f1, total / static_cast<double>(classes.size())};
        }
    }
    throw InvalidArgument("unknown metric");
}

// ---------------------------------------------------------------------------
// Fitted models

class FittedModel {
public:
    virtual ~FittedModel() = default;
    virtual std::vector<double> predict(const Matrix& test_x) const = 0;
};

namespace detail {

// Gaussian elimination with partial pivoting; throws on a singular system.
inline std::vector<double> solve_linear(std::vector<std::vector<double>> a,
                                        std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
        if (std::fabs(a[pivot][col]) < 1e-300)
            throw Error("singular normal equations; set lambda > 0 to regularize");
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < n; ++r) {
            double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t r = n; r-- > 0;) {
        double acc = b[r];
        for (std::size_t c = r + 1; c < n; ++c) acc -= a[r][c] * x[c];
        x[r] = acc / a[r][r];
    }
    return x;
}

}  // namespace detail

/// Linear least squares with intercept, solved via the normal equations with
/// a ridge term on the non-intercept diagonal.
class OlsModel : public FittedModel {
public:
    OlsModel(const Matrix& train_x, const std::vector<double>& train_y, double lambda) {
        if (train_x.empty() || train_x.size() != train_y.size())
            throw InvalidArgument("ols: empty or mismatched training data");
        const std::size_t p = train_x[0].size();
        if (p == 0) throw InvalidArgument("ols: no feature columns");
        const std::size_t d = p + 1;  // intercept first

        std::vector<std::vector<double>> gram(d, std::vector<double>(d, 0.0));
        std::vector<double> rhs(d, 0.0);
        std::vector<double> row(d);
        for (std::size_t r = 0; r < train_x.size(); ++r) {
            row[0] = 1.0;
            std::copy(train_x[r].begin(), train_x[r].end(), row.begin() + 1);
            for (std::size_t i = 0; i < d; ++i) {
                rhs[i] += row[i] * train_y[r];
                for (std::size_t j = i; j < d; ++j) gram[i][j] += row[i] * row[j];
            }
        }
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < i; ++j) gram[i][j] = gram[j][i];
        for (std::size_t i = 1; i < d; ++i) gram[i][i] += lambda;

        coef_ = detail::solve_linear(std::move(gram), std::move(rhs));
    }

    std::vector<double> predict(const Matrix& test_x) const override {
        std::vector<double> out;
        out.reserve(test_x.size());
        for (const auto& row : test_x) {
            if (row.size() + 1 != coef_.size())
                throw InvalidArgument("ols: test row width mismatch");
            double v = coef_[0];
            for (std::size_t j = 0; j < row.size(); ++j) v += coef_[j + 1] * row[j];
            out.push_back(v);
        }
        return out;
    }

    const std::vector<double>& coefficients() const { return coef_; }

private:
    std::vector<double> coef_;
};

/// Euclidean k-nearest neighbors on z-scored features (train statistics).
/// Ties in distance resolve to the lower train row index.
class KnnModel : public FittedModel {
public:
    KnnModel(const Matrix& train_x, const std::vector<double>& train_y, int k, TaskKind task)
        : train_y_(train_y), k_(k), task_(task) {
        if (train_x.empty() || train_x.size() != train_y.size())
            throw InvalidArgument("knn: empty or mismatched training data");
        if (k < 1 || static_cast<std::size_t>(k) > train_x.size())
            throw InvalidArgument("knn: k must be in [1, train rows]");
        const std::size_t p = train_x[0].size();
        mean_.assign(p, 0.0);
        sd_.assign(p, 0.0);
        const auto n = static_cast<double>(train_x.size());
        for (const auto& row : train_x)
            for (std::size_t j = 0; j < p; ++j) mean_[j] += row[j];
        for (auto& m : mean_) m /= n;
        for (const auto& row : train_x)
            for (std::size_t j = 0; j < p; ++j)
                sd_[j] += (row[j] - mean_[j]) * (row[j] - mean_[j]);
        for (auto& s : sd_) s = std::sqrt(s / n);

        train_z_.reserve(train_x.size());
        for (const auto& row : train_x) train_z_.push_back(standardize(row));
    }

    std::vector<double> predict(const Matrix& test_x) const override {
        std::vector<double> out;
        out.reserve(test_x.size());
        std::vector<std::pair<double, std::size_t>> dist(train_z_.size());
        for (const auto& row : test_x) {
            std::vector<double> z = standardize(row);
            for (std::size_t r = 0; r < train_z_.size(); ++r) {
                double d2 = 0.0;
                for (std::size_t j = 0; j < z.size(); ++j) {
                    double diff = z[j] - train_z_[r][j];
                    d2 += diff * diff;
                }
                dist[r] = {d2, r};
            }
            std::partial_sort(dist.begin(), dist.begin() + k_, dist.end());
            if (task_ == TaskKind::regression) {
                double sum = 0.0;
                for (int i = 0; i < k_; ++i) sum += train_y_[dist[static_cast<std::size_t>(i)].second];
                out.push_back(sum / k_);
            } else {
                std::map<double, int> votes;
                for (int i = 0; i < k_; ++i)
                    ++votes[train_y_[dist[static_cast<std::size_t>(i)].second]];
                double best = votes.begin()->first;
                int best_count = votes.begin()->second;
                for (auto& [cls, cnt] : votes) {
                    if (cnt > best_count) { best = cls; best_count = cnt; }
                }
                out.push_back(best);
            }
        }
        return out;
    }

private:
    std::vector<double> standardize(const std::vector<double>& row) const {
        if (row.size() != mean_.size()) throw InvalidArgument("knn: row width mismatch");
        std::vector<double> z(row.size());
        for (std::size_t j = 0; j < row.size(); ++j)
            z[j] = sd_[j] > 0.0 ? (row[j] - mean_[j]) / sd_[j] : 0.0;
        return z;
    }

    Matrix train_z_;
    std::vector<double> train_y_;
    std::vector<double> mean_, sd_;
    int k_;
    TaskKind task_;
};

inline std::unique_ptr<FittedModel> fit_model(const Evaluator& ev, const Matrix& train_x,
                                              const std::vector<double>& train_y,
                                              TaskKind task) {
    switch (ev.kind) {
        case EvaluatorKind::ols:
            return std::make_unique<OlsModel>(train_x, train_y, ev.lambda);
        case EvaluatorKind::knn_regress:
            return std::make_unique<KnnModel>(train_x, train_y, ev.k, TaskKind::regression);
        case EvaluatorKind::knn_classify:
            return std::make_unique<KnnModel>(train_x, train_y, ev.k, TaskKind::classification);
        case EvaluatorKind::external:
            throw InvalidArgument("external evaluator cannot be fit in-process");
    }
    throw InvalidArgument("unknown evaluator kind");
}

inline std::vector<double> ols_fit_predict(const Matrix& train_x,
                                           const std::vector<double>& train_y,
                                           const Matrix& test_x, double lambda) {
    return OlsModel(train_x, train_y, lambda).predict(test_x);
}

inline std::vector<double> knn_predict(const Matrix& train_x,
                                       const std::vector<double>& train_y, const Matrix& test_x,
                                       int k, TaskKind task) {
    return KnnModel(train_x, train_y, k, task).predict(test_x);
}

}  // namespace shapg

#endif
