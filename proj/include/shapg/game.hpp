#ifndef SHAPG_GAME_HPP
#define SHAPG_GAME_HPP

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>

#include <json.hpp>

#include "shapg/coalition.hpp"
#include "shapg/common.hpp"
#include "shapg/dataset.hpp"
#include "shapg/external.hpp"
#include "shapg/graph.hpp"
#include "shapg/models.hpp"

namespace shapg {

/// Characteristic function v(S) with a concurrent memo table. The value
/// function must be deterministic; duplicate concurrent misses may both
/// compute but insert identical values.
class Game {
public:
    using ValueFn = std::function<double(const Coalition&)>;

    Game(std::size_t player_count, ValueFn fn, double empty_value)
        : players_(player_count), fn_(std::move(fn)), empty_value_(empty_value) {}

    std::size_t player_count() const { return players_; }
    double empty_value() const { return empty_value_; }

    double value(const Coalition& s) const {
        if (s.player_count() != players_)
            throw InvalidArgument("coalition player count does not match the game");
        if (!cache_enabled_) {
            ++evaluations_;
            return fn_(s);
        }
        {
            std::shared_lock lock(mutex_);
            auto it = cache_.find(s);
            if (it != cache_.end()) return it->second;
        }
        ++evaluations_;
        double v = fn_(s);
        {
            std::unique_lock lock(mutex_);
            cache_.emplace(s, v);
        }
        return v;
    }

    /// Cache misses so far; with caching on, the number of distinct
    /// coalition evaluations.
    std::size_t evaluation_count() const { return evaluations_.load(); }

    void set_cache_enabled(bool enabled) { cache_enabled_ = enabled; }

    nlohmann::json dump_cache() const {
        std::shared_lock lock(mutex_);
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [s, v] : cache_) out[s.to_decimal()] = v;
        return out;
    }

    void load_cache(const nlohmann::json& dump) {
        std::unique_lock lock(mutex_);
        for (auto it = dump.begin(); it != dump.end(); ++it)
            cache_.emplace(Coalition::from_decimal(players_, it.key()), it.value().get<double>());
    }

private:
    std::size_t players_;
    ValueFn fn_;
    double empty_value_;
    bool cache_enabled_ = true;
    mutable std::shared_mutex mutex_;
    mutable std::unordered_map<Coalition, double, Coalition::Hash> cache_;
    mutable std::atomic<std::size_t> evaluations_{0};
};

/// Group-degree game: v(S) is the signed edge-weight sum of the subgraph
/// induced by S.
inline Game graph_game(const CorrelationMatrix& w, const FeatureGraph& g) {
    if (w.m != g.node_count())
        throw InvalidArgument("correlation matrix and graph dimensions differ");
    return Game(
        g.node_count(),
        [&w, &g](const Coalition& s) { return induced_edge_weight_sum(w, g, s.indices()); }, 0.0);
}

namespace detail {

inline double constant_baseline_score(const SplitPair& sp) {
    const auto& train_y = sp.train.target;
    const auto& test_y = sp.test.target;
    if (sp.train.task == TaskKind::regression) {
        double mean = 0.0;
        for (double v : train_y) mean += v;
        mean /= static_cast<double>(train_y.size());
        std::vector<double> pred(test_y.size(), mean);
        return score(pred, test_y, MetricKind::r2).value;
    }
    std::map<double, int> counts;
    for (double v : train_y) ++counts[v];
    double majority = counts.begin()->first;
    int best = counts.begin()->second;
    for (auto& [cls, cnt] : counts) {
        if (cnt > best) { majority = cls; best = cnt; }
    }
    std::vector<double> pred(test_y.size(), majority);
    return score(pred, test_y, MetricKind::f1).value;
}

}  // namespace detail

struct ModelGameOptions {
    bool train_score = false;  // score on the train split instead of test
};

/// ML-score game: v(S) trains the evaluator on the coalition's columns and
/// returns R2 (regression) or F1 (classification). v(empty) is the
/// test-split score of a constant predictor. The split must outlive the game.
inline Game model_game(const Evaluator& ev, const SplitPair& sp,
                       const ModelGameOptions& opts = {}) {
    ev.validate();
    const TaskKind task = sp.train.task;
    const MetricKind metric = default_metric(task);
    const double empty = detail::constant_baseline_score(sp);

    std::shared_ptr<ExternalEvaluator> external;
    std::shared_ptr<std::mutex> external_mu;
    if (ev.kind == EvaluatorKind::external) {
        external = std::make_shared<ExternalEvaluator>(ev.command);
        external_mu = std::make_shared<std::mutex>();
    }

    auto fn = [ev, &sp, task, metric, empty, opts, external, external_mu](const Coalition& s) {
        if (s.empty()) return empty;
        std::vector<int> cols = s.indices();
        Matrix train_x = sp.train.rows_for(cols);
        const Dataset& eval_split = opts.train_score ? sp.train : sp.test;
        Matrix test_x = eval_split.rows_for(cols);
        const std::vector<double>& test_y = eval_split.target;

        if (ev.kind == EvaluatorKind::external) {
            std::lock_guard lock(*external_mu);
            return external
                ->evaluate(task, cols, train_x, sp.train.target, test_x, test_y,
                           "coalition " + s.to_decimal())
                .value;
        }
        try {
            auto model = fit_model(ev, train_x, sp.train.target, task);
            return score(model->predict(test_x), test_y, metric).value;
        } catch (const Error& e) {
            throw Error("evaluator failed on coalition " + s.to_decimal() + ": " + e.what());
        }
    };
    return Game(sp.train.n_features(), std::move(fn), empty);
}

}  // namespace shapg

#endif
