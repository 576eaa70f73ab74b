#ifndef SHAPG_HARNESS_HPP
#define SHAPG_HARNESS_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "shapg/common.hpp"
#include "shapg/dataset.hpp"
#include "shapg/external.hpp"
#include "shapg/game.hpp"
#include "shapg/models.hpp"
#include "shapg/shapley.hpp"

namespace shapg {

/// Metric values after cumulative removal of top-ranked features.
struct PerturbationCurve {
    struct Point {
        int k;         // number of removed features
        double score;  // model score with the remaining features
    };
    std::vector<Point> points;
    std::string method_tag;
};

namespace detail {

inline double evaluate_columns(const Evaluator& ev, const SplitPair& sp,
                               const std::vector<int>& cols) {
    const TaskKind task = sp.train.task;
    if (cols.empty()) return constant_baseline_score(sp);
    Matrix train_x = sp.train.rows_for(cols);
    Matrix test_x = sp.test.rows_for(cols);
    if (ev.kind == EvaluatorKind::external) {
        ExternalEvaluator ext(ev.command);
        return ext.evaluate(task, cols, train_x, sp.train.target, test_x, sp.test.target,
                            "perturbation")
            .value;
    }
    auto model = fit_model(ev, train_x, sp.train.target, task);
    return score(model->predict(test_x), sp.test.target, default_metric(task)).value;
}

}  // namespace detail

/// Retrain on all features minus the top-k of the ranking, k = 0..k_max,
/// recording the held-out score at each step.
inline PerturbationCurve perturbation_curve(const std::vector<int>& ranking, const Evaluator& ev,
                                            const SplitPair& sp, int k_max,
                                            const std::string& method_tag = "") {
    const auto m = static_cast<int>(sp.train.n_features());
    if (ranking.size() != static_cast<std::size_t>(m))
        throw InvalidArgument("ranking length does not match the dataset");
    if (k_max < 0 || k_max >= m) throw InvalidArgument("k_max must be in [0, M)");

    PerturbationCurve curve;
    curve.method_tag = method_tag;
    for (int k = 0; k <= k_max; ++k) {
        std::vector<char> removed(static_cast<std::size_t>(m), 0);
        for (int r = 0; r < k; ++r) removed[static_cast<std::size_t>(ranking[static_cast<std::size_t>(r)])] = 1;
        std::vector<int> cols;
        for (int c = 0; c < m; ++c)
            if (!removed[static_cast<std::size_t>(c)]) cols.push_back(c);
        curve.points.push_back({k, detail::evaluate_columns(ev, sp, cols)});
    }
    return curve;
}

inline std::string curve_csv(const PerturbationCurve& curve) {
    std::ostringstream out;
    out.precision(17);
    out << "k,score\n";
    for (const auto& p : curve.points) out << p.k << ',' << p.score << '\n';
    return out.str();
}

/// Permutation feature importance: fit once on train, then measure the mean
/// test-score drop over repeated shuffles of each feature's test column.
inline ImportanceVector permutation_importance(const Evaluator& ev, const SplitPair& sp,
                                               int repeats, std::uint64_t seed) {
    detail::Stopwatch watch;
    if (repeats < 1) throw InvalidArgument("repeats must be >= 1");
    const TaskKind task = sp.train.task;
    const MetricKind metric = default_metric(task);
    const auto m = sp.train.n_features();

    std::vector<int> all_cols(m);
    std::iota(all_cols.begin(), all_cols.end(), 0);
    Matrix train_x = sp.train.rows_for(all_cols);
    Matrix test_x = sp.test.rows_for(all_cols);

    std::vector<double> importance(m, 0.0);
    if (ev.kind == EvaluatorKind::external) {
        // the external protocol retrains per request; same shuffle scheme
        ExternalEvaluator ext(ev.command);
        double baseline = ext.evaluate(task, all_cols, train_x, sp.train.target, test_x,
                                       sp.test.target, "pfi-baseline")
                              .value;
        for (std::size_t j = 0; j < m; ++j) {
            std::mt19937_64 rng = detail::node_rng(seed, static_cast<int>(j));
            double drop = 0.0;
            for (int r = 0; r < repeats; ++r) {
                Matrix shuffled = test_x;
                for (std::size_t row = shuffled.size(); row > 1; --row) {
                    auto other = static_cast<std::size_t>(rng() % row);
                    std::swap(shuffled[row - 1][j], shuffled[other][j]);
                }
                drop += baseline - ext.evaluate(task, all_cols, train_x, sp.train.target,
                                                shuffled, sp.test.target, "pfi")
                                       .value;
            }
            importance[j] = drop / repeats;
        }
    } else {
        auto model = fit_model(ev, train_x, sp.train.target, task);
        double baseline = score(model->predict(test_x), sp.test.target, metric).value;
        for (std::size_t j = 0; j < m; ++j) {
            std::mt19937_64 rng = detail::node_rng(seed, static_cast<int>(j));
            double drop = 0.0;
            for (int r = 0; r < repeats; ++r) {
                Matrix shuffled = test_x;
                for (std::size_t row = shuffled.size(); row > 1; --row) {
                    auto other = static_cast<std::size_t>(rng() % row);
                    std::swap(shuffled[row - 1][j], shuffled[other][j]);
                }
                drop += baseline - score(model->predict(shuffled), sp.test.target, metric).value;
            }
            importance[j] = drop / repeats;
        }
    }

    ImportanceVector iv;
    iv.values = std::move(importance);
    iv.ranking = make_ranking(iv.values);
    iv.method_tag = "permutation-importance";
    iv.elapsed_ms = watch.elapsed_ms();
    return iv;
}

struct RankingComparison {
    int top_k = 0;
    double top_k_overlap = 0.0;  // |topK(a) ∩ topK(b)| / k
    double kendall_tau = 0.0;    // over the full rankings
};

/// Top-k set overlap plus Kendall tau between two rankings of the same
/// feature universe.
inline RankingComparison compare_rankings(const std::vector<int>& a, const std::vector<int>& b,
                                          int top_k) {
    const auto n = a.size();
    if (n == 0 || b.size() != n) throw InvalidArgument("rankings differ in length");
    std::vector<int> pos_a(n, -1), pos_b(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        auto fa = static_cast<std::size_t>(a[i]);
        auto fb = static_cast<std::size_t>(b[i]);
        if (fa >= n || fb >= n || pos_a[fa] != -1 || pos_b[fb] != -1)
            throw InvalidArgument("rankings are not permutations of the same universe");
        pos_a[fa] = static_cast<int>(i);
        pos_b[fb] = static_cast<int>(i);
    }
    if (top_k < 1 || static_cast<std::size_t>(top_k) > n)
        throw InvalidArgument("top_k out of range");

    std::vector<char> in_a(n, 0);
    for (int i = 0; i < top_k; ++i) in_a[static_cast<std::size_t>(a[static_cast<std::size_t>(i)])] = 1;
    int overlap = 0;
    for (int i = 0; i < top_k; ++i)
        overlap += in_a[static_cast<std::size_t>(b[static_cast<std::size_t>(i)])];

    // tau-a: (concordant - discordant) / (n choose 2)
    long long concordant = 0, discordant = 0;
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t y = x + 1; y < n; ++y) {
            int da = pos_a[x] - pos_a[y];
            int db = pos_b[x] - pos_b[y];
            if ((da > 0) == (db > 0))
                ++concordant;
            else
                ++discordant;
        }
    }
    RankingComparison cmp;
    cmp.top_k = top_k;
    cmp.top_k_overlap = static_cast<double>(overlap) / top_k;
    cmp.kendall_tau = static_cast<double>(concordant - discordant) /
                      (static_cast<double>(n) * (static_cast<double>(n) - 1.0) / 2.0);
    return cmp;
}

enum class MethodKind { exact, neighborhood_exact, approx, permutation_importance };

inline std::string to_string(MethodKind m) {
    switch (m) {
        case MethodKind::exact: return "exact";
        case MethodKind::neighborhood_exact: return "neighborhood-exact";
        case MethodKind::approx: return "approx";
        case MethodKind::permutation_importance: return "permutation-importance";
    }
    return "?";
}

inline MethodKind method_from_string(const std::string& s) {
    if (s == "exact") return MethodKind::exact;
    if (s == "neighborhood-exact") return MethodKind::neighborhood_exact;
    if (s == "approx") return MethodKind::approx;
    if (s == "permutation-importance") return MethodKind::permutation_importance;
    throw InvalidArgument("unknown method: " + s);
}

struct RunReport {
    std::string method_tag;
    double elapsed_ms = 0.0;
    std::size_t evaluation_count = 0;  // coalition evaluations (cache misses)
    ImportanceVector importance;
};

struct TimedRunInputs {
    Game* game = nullptr;                // exact / neighborhood-exact / approx
    const FeatureGraph* graph = nullptr; // neighborhood-exact / approx
    const Evaluator* evaluator = nullptr;  // permutation importance
    const SplitPair* split = nullptr;      // permutation importance
    ApproxOptions approx;
    int exact_cap = 20;
    int psi_cap = 25;
    int repeats = 10;
};

/// Run one method and account wall time plus coalition evaluations.
inline RunReport timed_run(MethodKind method, const TimedRunInputs& in) {
    RunReport report;
    report.method_tag = to_string(method);
    std::size_t before = in.game ? in.game->evaluation_count() : 0;
    detail::Stopwatch watch;
    switch (method) {
        case MethodKind::exact:
            if (!in.game) throw InvalidArgument("timed_run: game required");
            report.importance = exact_shapley(*in.game, in.exact_cap);
            break;
        case MethodKind::neighborhood_exact:
            if (!in.game || !in.graph) throw InvalidArgument("timed_run: game and graph required");
            report.importance =
                neighborhood_exact(*in.game, *in.graph, in.approx.d_max, in.psi_cap, in.approx.jobs);
            break;
        case MethodKind::approx:
            if (!in.game || !in.graph) throw InvalidArgument("timed_run: game and graph required");
            report.importance = approx_shapley(*in.game, *in.graph, in.approx);
            break;
        case MethodKind::permutation_importance:
            if (!in.evaluator || !in.split)
                throw InvalidArgument("timed_run: evaluator and split required");
            report.importance =
                permutation_importance(*in.evaluator, *in.split, in.repeats, in.approx.seed);
            // one fit plus repeats shuffled scorings per feature
            report.evaluation_count =
                1 + static_cast<std::size_t>(in.repeats) * in.split->train.n_features();
            break;
    }
    report.elapsed_ms = watch.elapsed_ms();
    if (in.game && method != MethodKind::permutation_importance)
        report.evaluation_count = in.game->evaluation_count() - before;
    return report;
}

inline nlohmann::json report_to_json(const RunReport& r, const std::vector<std::string>& names) {
    return {{"method", r.method_tag},
            {"elapsed_ms", r.elapsed_ms},
            {"evaluation_count", r.evaluation_count},
            {"importance", importance_to_json(r.importance, names)}};
}

}  // namespace shapg

#endif
