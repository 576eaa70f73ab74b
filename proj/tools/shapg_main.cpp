// shapg: feature-importance engine over a reduced correlation graph.
//
// Subcommands:
//   graph     write correlation matrix, adjacency matrix, and DOT file
//   explain   compute a feature-importance ranking with the chosen method
//   evaluate  perturbation curve for an existing ranking
//   compare   run all feasible methods and emit a combined report

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "shapg/dataset.hpp"
#include "shapg/game.hpp"
#include "shapg/graph.hpp"
#include "shapg/harness.hpp"
#include "shapg/models.hpp"
#include "shapg/shapley.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
    std::string input;
    std::string target;
    std::string task = "regression";
    std::string evaluator = "ols";
    int k = 5;
    double lambda = 1e-8;
    std::string external_cmd;
    int dmax = 1;
    int m = 12;
    std::uint64_t seed = 0;
    double split = 0.8;
    std::string method = "approx";
    int kmax = 0;
    int jobs = static_cast<int>(std::thread::hardware_concurrency());
    std::string out = ".";
    std::string ranking_file;
    std::string cache_file;
    bool corr_train = false;
    bool train_score = false;
    bool impute_mean = false;
    bool alt_norm = false;
    int repeats = 10;
    int exact_cap = 20;
};

json config_to_json(const RunConfig& c) {
    return {{"input", c.input},       {"target", c.target},
            {"task", c.task},         {"evaluator", c.evaluator},
            {"k", c.k},               {"lambda", c.lambda},
            {"external_cmd", c.external_cmd},
            {"dmax", c.dmax},         {"m", c.m},
            {"seed", c.seed},         {"split", c.split},
            {"method", c.method},     {"kmax", c.kmax},
            {"jobs", c.jobs},         {"out", c.out},
            {"corr_train", c.corr_train},
            {"train_score", c.train_score},
            {"impute_mean", c.impute_mean},
            {"alt_norm", c.alt_norm}, {"repeats", c.repeats},
            {"exact_cap", c.exact_cap}};
}

struct CommandContext {
    RunConfig cfg;
    std::string config_path;
    // Config-file values fill in only the options the user did not pass.
    std::vector<std::function<void(const json&)>> config_fills;
};

void add_common_options(CLI::App* cmd, CommandContext& ctx) {
    auto& c = ctx.cfg;
    cmd->add_option("--config", ctx.config_path, "JSON config file (flags override it)");

    auto bind = [&](const char* name, const char* key, auto& field, const char* desc) {
        auto* opt = cmd->add_option(name, field, desc);
        ctx.config_fills.push_back([opt, key, &field](const json& j) {
            if (opt->count() == 0 && j.contains(key))
                field = j.at(key).get<std::decay_t<decltype(field)>>();
        });
        return opt;
    };
    auto bind_flag = [&](const char* name, const char* key, bool& field, const char* desc) {
        auto* opt = cmd->add_flag(name, field, desc);
        ctx.config_fills.push_back([opt, key, &field](const json& j) {
            if (opt->count() == 0 && j.contains(key)) field = j.at(key).get<bool>();
        });
        return opt;
    };

    bind("--input", "input", c.input, "input CSV path");
    bind("--target", "target", c.target, "target column name");
    bind("--task", "task", c.task, "regression|classification");
    bind("--evaluator", "evaluator", c.evaluator, "ols|knn|external");
    bind("--k", "k", c.k, "k-NN neighbor count");
    bind("--lambda", "lambda", c.lambda, "OLS ridge term");
    bind("--external-cmd", "external_cmd", c.external_cmd, "external evaluator command");
    bind("--dmax", "dmax", c.dmax, "neighborhood depth");
    bind("--m", "m", c.m, "maximal neighborhood sample size");
    bind("--seed", "seed", c.seed, "RNG seed");
    bind("--split", "split", c.split, "train ratio in (0,1)");
    bind("--method", "method", c.method,
         "exact|neighborhood-exact|approx|permutation-importance");
    bind("--kmax", "kmax", c.kmax, "max removed features for the perturbation curve");
    bind("--jobs", "jobs", c.jobs, "worker pool size");
    bind("--out", "out", c.out, "output directory");
    bind("--cache", "cache", c.cache_file, "coalition cache JSON (load if present, dump after)");
    bind("--repeats", "repeats", c.repeats, "permutation-importance shuffle repeats");
    bind("--exact-cap", "exact_cap", c.exact_cap, "player cap for the exact method");
    bind_flag("--corr-train", "corr_train", c.corr_train,
              "correlations on the train split only");
    bind_flag("--train-score", "train_score", c.train_score,
              "score coalitions on the train split");
    bind_flag("--impute-mean", "impute_mean", c.impute_mean, "mean-impute missing cells");
    bind_flag("--alt-norm", "alt_norm", c.alt_norm,
              "alternative sampling normalization (1/(h*2^m))");
}

void resolve_config(CommandContext& ctx) {
    if (ctx.config_path.empty()) return;
    std::ifstream in(ctx.config_path);
    if (!in) throw shapg::InvalidArgument("cannot open config file: " + ctx.config_path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw shapg::InvalidArgument("config file is not valid JSON: " + std::string(e.what()));
    }
    for (auto& fill : ctx.config_fills) fill(j);
}

void atomic_write(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw shapg::Error("cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, path);
}

shapg::Dataset load_dataset(const RunConfig& c) {
    if (c.input.empty()) throw shapg::InvalidArgument("--input is required");
    if (c.target.empty()) throw shapg::InvalidArgument("--target is required");
    shapg::LoadOptions opts;
    opts.impute_mean = c.impute_mean;
    return shapg::load_table(c.input, c.target, shapg::task_from_string(c.task), opts);
}

shapg::Evaluator make_evaluator(const RunConfig& c, shapg::TaskKind task) {
    shapg::Evaluator ev;
    if (c.evaluator == "ols") {
        if (task != shapg::TaskKind::regression)
            throw shapg::InvalidArgument("ols evaluator supports regression only");
        ev.kind = shapg::EvaluatorKind::ols;
    } else if (c.evaluator == "knn") {
        ev.kind = task == shapg::TaskKind::regression ? shapg::EvaluatorKind::knn_regress
                                                      : shapg::EvaluatorKind::knn_classify;
    } else if (c.evaluator == "external") {
        ev.kind = shapg::EvaluatorKind::external;
    } else {
        throw shapg::InvalidArgument("unknown evaluator: " + c.evaluator);
    }
    ev.k = c.k;
    ev.lambda = c.lambda;
    ev.command = c.external_cmd;
    ev.seed = c.seed;
    ev.validate();
    return ev;
}

shapg::CorrelationMatrix correlations(const RunConfig& c, const shapg::Dataset& d,
                                      const shapg::SplitPair& sp) {
    return shapg::pearson_matrix(c.corr_train ? sp.train : d);
}

std::string rank_csv(const shapg::ImportanceVector& iv, const std::vector<std::string>& names) {
    std::ostringstream out;
    out.precision(17);
    out << "rank,feature_index,feature_name,value\n";
    int r = 1;
    for (auto [idx, value] : shapg::rank(iv))
        out << r++ << ',' << idx << ',' << names[static_cast<std::size_t>(idx)] << ',' << value
            << '\n';
    return out.str();
}

void print_top10(const shapg::ImportanceVector& iv, const std::vector<std::string>& names) {
    std::printf("%-4s %-20s %s\n", "rank", "feature", "value");
    int r = 1;
    for (auto [idx, value] : shapg::rank(iv)) {
        if (r > 10) break;
        std::printf("%-4d %-20s %.6g\n", r++, names[static_cast<std::size_t>(idx)].c_str(), value);
    }
}

std::vector<int> load_ranking_file(const std::string& path, std::size_t m) {
    std::ifstream in(path);
    if (!in) throw shapg::InvalidArgument("cannot open ranking file: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw shapg::InvalidArgument("ranking file is empty: " + path);
    std::vector<int> ranking;
    std::vector<char> seen(m, 0);
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto fields = shapg::detail::parse_csv_line(line);
        if (fields.size() < 2)
            throw shapg::InvalidArgument("ranking file row lacks a feature index: " + line);
        int idx = std::stoi(fields[1]);
        if (idx < 0 || static_cast<std::size_t>(idx) >= m || seen[static_cast<std::size_t>(idx)])
            throw shapg::InvalidArgument("ranking does not match the dataset (index " +
                                         std::to_string(idx) + ")");
        seen[static_cast<std::size_t>(idx)] = 1;
        ranking.push_back(idx);
    }
    if (ranking.size() != m)
        throw shapg::InvalidArgument("ranking covers " + std::to_string(ranking.size()) +
                                     " features, dataset has " + std::to_string(m));
    return ranking;
}

void maybe_load_cache(const RunConfig& c, shapg::Game& game) {
    if (c.cache_file.empty() || !fs::exists(c.cache_file)) return;
    std::ifstream in(c.cache_file);
    json j;
    in >> j;
    game.load_cache(j);
}

void maybe_dump_cache(const RunConfig& c, const shapg::Game& game) {
    if (c.cache_file.empty()) return;
    atomic_write(c.cache_file, game.dump_cache().dump(2) + "\n");
}

shapg::ImportanceVector run_method(shapg::MethodKind method, const RunConfig& c,
                                   shapg::Game& game, const shapg::FeatureGraph& g,
                                   const shapg::Evaluator& ev, const shapg::SplitPair& sp) {
    shapg::TimedRunInputs in;
    in.game = &game;
    in.graph = &g;
    in.evaluator = &ev;
    in.split = &sp;
    in.approx = {c.dmax, c.m, c.seed, c.jobs, c.alt_norm};
    in.exact_cap = c.exact_cap;
    in.repeats = c.repeats;
    return shapg::timed_run(method, in).importance;
}

int cmd_graph(const RunConfig& c) {
    shapg::Dataset d = load_dataset(c);
    shapg::SplitPair sp = shapg::split(d, c.split, c.seed);
    shapg::CorrelationMatrix w = correlations(c, d, sp);
    shapg::FeatureGraph g = shapg::build_feature_graph(w);

    fs::create_directories(c.out);
    atomic_write(fs::path(c.out) / "correlation.csv", shapg::correlation_csv(w, d.feature_names));
    atomic_write(fs::path(c.out) / "adjacency.csv", shapg::adjacency_csv(g, d.feature_names));
    atomic_write(fs::path(c.out) / "graph.dot", shapg::export_dot(g, w, d.feature_names));
    atomic_write(fs::path(c.out) / "resolved_config.json", config_to_json(c).dump(2) + "\n");

    if (d.n_features() == 1)
        std::cerr << "warning: single feature, graph has no edges\n";
    std::printf("graph: %zu nodes, %zu edges, %s\n", g.node_count(), g.edge_count(),
                shapg::is_connected(g) ? "connected" : "disconnected");
    return 0;
}

int cmd_explain(const RunConfig& c) {
    shapg::Dataset d = load_dataset(c);
    shapg::SplitPair sp = shapg::split(d, c.split, c.seed);
    if (d.task == shapg::TaskKind::classification && !sp.stratified)
        std::cerr << "warning: class with < 2 members, plain shuffle split used\n";
    shapg::CorrelationMatrix w = correlations(c, d, sp);
    shapg::FeatureGraph g = shapg::build_feature_graph(w);
    shapg::Evaluator ev = make_evaluator(c, d.task);

    shapg::ModelGameOptions game_opts;
    game_opts.train_score = c.train_score;
    shapg::Game game = shapg::model_game(ev, sp, game_opts);
    maybe_load_cache(c, game);

    shapg::MethodKind method = shapg::method_from_string(c.method);
    shapg::ImportanceVector iv = run_method(method, c, game, g, ev, sp);
    maybe_dump_cache(c, game);

    fs::create_directories(c.out);
    json out = shapg::importance_to_json(iv, d.feature_names);
    out["config"] = config_to_json(c);
    atomic_write(fs::path(c.out) / "importance.json", out.dump(2) + "\n");
    atomic_write(fs::path(c.out) / "rank.csv", rank_csv(iv, d.feature_names));
    print_top10(iv, d.feature_names);
    return 0;
}

int cmd_evaluate(const RunConfig& c) {
    shapg::Dataset d = load_dataset(c);
    if (c.ranking_file.empty()) throw shapg::InvalidArgument("--ranking is required");
    std::vector<int> ranking = load_ranking_file(c.ranking_file, d.n_features());
    if (c.kmax >= static_cast<int>(d.n_features()))
        throw shapg::InvalidArgument("kmax must be below the feature count");
    shapg::SplitPair sp = shapg::split(d, c.split, c.seed);
    shapg::Evaluator ev = make_evaluator(c, d.task);

    shapg::PerturbationCurve curve =
        shapg::perturbation_curve(ranking, ev, sp, c.kmax, c.method);
    fs::create_directories(c.out);
    atomic_write(fs::path(c.out) / "curve.csv", shapg::curve_csv(curve));
    atomic_write(fs::path(c.out) / "resolved_config.json", config_to_json(c).dump(2) + "\n");
    for (const auto& p : curve.points) std::printf("k=%d score=%.6g\n", p.k, p.score);
    return 0;
}

int cmd_compare(const RunConfig& c) {
    shapg::Dataset d = load_dataset(c);
    shapg::SplitPair sp = shapg::split(d, c.split, c.seed);
    shapg::CorrelationMatrix w = correlations(c, d, sp);
    shapg::FeatureGraph g = shapg::build_feature_graph(w);
    shapg::Evaluator ev = make_evaluator(c, d.task);
    shapg::ModelGameOptions game_opts;
    game_opts.train_score = c.train_score;

    const std::vector<shapg::MethodKind> methods = {
        shapg::MethodKind::approx, shapg::MethodKind::neighborhood_exact,
        shapg::MethodKind::exact, shapg::MethodKind::permutation_importance};

    json report;
    report["config"] = config_to_json(c);
    report["methods"] = json::object();
    std::optional<std::vector<int>> reference;  // approx ShapG ranking

    for (auto method : methods) {
        json entry;
        try {
            if (method == shapg::MethodKind::exact &&
                static_cast<int>(d.n_features()) > c.exact_cap) {
                entry["status"] = "capped";
                report["methods"][to_string(method)] = entry;
                continue;
            }
            shapg::Game game = shapg::model_game(ev, sp, game_opts);
            shapg::TimedRunInputs in;
            in.game = &game;
            in.graph = &g;
            in.evaluator = &ev;
            in.split = &sp;
            in.approx = {c.dmax, c.m, c.seed, c.jobs, c.alt_norm};
            in.exact_cap = c.exact_cap;
            in.repeats = c.repeats;
            shapg::RunReport r = shapg::timed_run(method, in);
            entry = shapg::report_to_json(r, d.feature_names);
            entry["status"] = "ok";
            if (method == shapg::MethodKind::approx) {
                reference = r.importance.ranking;
            } else if (reference) {
                int top_k = std::min<int>(4, static_cast<int>(d.n_features()));
                auto cmp = shapg::compare_rankings(*reference, r.importance.ranking, top_k);
                entry["vs_approx"] = {{"top_k", cmp.top_k},
                                      {"top_k_overlap", cmp.top_k_overlap},
                                      {"kendall_tau", cmp.kendall_tau}};
            }
        } catch (const std::exception& e) {
            entry["status"] = "failed";
            entry["error"] = e.what();
        }
        report["methods"][to_string(method)] = entry;
    }

    fs::create_directories(c.out);
    atomic_write(fs::path(c.out) / "compare.json", report.dump(2) + "\n");
    std::printf("compare: report written to %s\n",
                (fs::path(c.out) / "compare.json").string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"feature importance via Shapley values on a reduced correlation graph"};
    app.require_subcommand(1);

    CommandContext graph_ctx, explain_ctx, evaluate_ctx, compare_ctx;
    auto* graph_cmd = app.add_subcommand("graph", "build and export the feature graph");
    add_common_options(graph_cmd, graph_ctx);
    auto* explain_cmd = app.add_subcommand("explain", "compute feature importance");
    add_common_options(explain_cmd, explain_ctx);
    auto* evaluate_cmd = app.add_subcommand("evaluate", "perturbation curve for a ranking");
    add_common_options(evaluate_cmd, evaluate_ctx);
    evaluate_cmd->add_option("--ranking", evaluate_ctx.cfg.ranking_file,
                             "rank.csv produced by explain");
    auto* compare_cmd = app.add_subcommand("compare", "run all feasible methods");
    add_common_options(compare_cmd, compare_ctx);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (graph_cmd->parsed()) {
            resolve_config(graph_ctx);
            return cmd_graph(graph_ctx.cfg);
        }
        if (explain_cmd->parsed()) {
            resolve_config(explain_ctx);
            return cmd_explain(explain_ctx.cfg);
        }
        if (evaluate_cmd->parsed()) {
            resolve_config(evaluate_ctx);
            return cmd_evaluate(evaluate_ctx.cfg);
        }
        if (compare_cmd->parsed()) {
            resolve_config(compare_ctx);
            return cmd_compare(compare_ctx.cfg);
        }
    } catch (const shapg::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
