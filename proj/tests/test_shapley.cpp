#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>

#include "shapg/game.hpp"
#include "shapg/shapley.hpp"

using namespace shapg;

namespace {

// Shapley via the average-over-all-orderings formulation; independent of the
// coalition-scan implementation.
std::vector<double> permutation_oracle(const Game& game) {
    const auto m = static_cast<int>(game.player_count());
    std::vector<int> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> phi(static_cast<std::size_t>(m), 0.0);
    std::size_t count = 0;
    do {
        Coalition s(static_cast<std::size_t>(m));
        double prev = game.value(s);
        for (int i : order) {
            s.set(static_cast<std::size_t>(i));
            double cur = game.value(s);
            phi[static_cast<std::size_t>(i)] += cur - prev;
            prev = cur;
        }
        ++count;
    } while (std::next_permutation(order.begin(), order.end()));
    for (auto& v : phi) v /= static_cast<double>(count);
    return phi;
}

Game table_game(std::size_t players, std::vector<double> table) {
    return Game(players, [table = std::move(table)](const Coalition& s) {
        std::uint64_t mask = 0;
        for (int i : s.indices()) mask |= std::uint64_t{1} << i;
        return table[mask];
    }, 0.0);
}

Game random_game(std::size_t players, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> table(std::size_t{1} << players);
    for (auto& v : table) v = u(rng);
    return table_game(players, std::move(table));
}

FeatureGraph star_graph(int leaves) {
    FeatureGraph g(static_cast<std::size_t>(leaves + 1));
    for (int l = 1; l <= leaves; ++l) g.add_edge(0, static_cast<std::size_t>(l));
    return g;
}

CorrelationMatrix unit_weights(const FeatureGraph& g) {
    CorrelationMatrix w;
    w.m = g.node_count();
    w.values.assign(w.m * w.m, 0.0);
    for (auto [i, j] : g.edges()) {
        w.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = 1.0;
        w.at(static_cast<std::size_t>(j), static_cast<std::size_t>(i)) = 1.0;
    }
    return w;
}

}  // namespace

TEST_CASE("two player symmetric game splits evenly") {
    Game game = table_game(2, {0, 0, 0, 1});
    auto iv = exact_shapley(game);
    CHECK(iv.values[0] == Catch::Approx(0.5).margin(1e-12));
    CHECK(iv.values[1] == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("additive game returns the per-player constants") {
    std::vector<double> c = {0.3, -1.2, 2.5, 0.7};
    std::vector<double> table(16, 0.0);
    for (std::uint64_t mask = 0; mask < 16; ++mask)
        for (int i = 0; i < 4; ++i)
            if ((mask >> i) & 1) table[mask] += c[static_cast<std::size_t>(i)];
    Game game = table_game(4, std::move(table));
    auto iv = exact_shapley(game);
    for (int i = 0; i < 4; ++i)
        CHECK(iv.values[static_cast<std::size_t>(i)] ==
              Catch::Approx(c[static_cast<std::size_t>(i)]).margin(1e-12));
}

TEST_CASE("three player fixture matches the permutation oracle") {
    // v: {}, {1}, {2}, {1,2}, {3}, {1,3}, {2,3}, N
    Game game = table_game(3, {0, 1, 0, 2, 0, 2, 1, 3});
    auto iv = exact_shapley(game);
    Game oracle_game = table_game(3, {0, 1, 0, 2, 0, 2, 1, 3});
    auto expect = permutation_oracle(oracle_game);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(iv.values[i] == Catch::Approx(expect[i]).margin(1e-12));
}

TEST_CASE("exact matches the permutation oracle on random games") {
    for (std::size_t m = 2; m <= 6; ++m) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            Game game = random_game(m, seed * 100 + m);
            auto iv = exact_shapley(game);
            auto expect = permutation_oracle(game);
            for (std::size_t i = 0; i < m; ++i)
                CHECK(iv.values[i] == Catch::Approx(expect[i]).margin(1e-9));
        }
    }
}

TEST_CASE("exact efficiency with nonzero empty value") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> table(64);
    for (auto& v : table) v = u(rng);
    Game game = table_game(6, table);
    auto iv = exact_shapley(game);
    double total = std::accumulate(iv.values.begin(), iv.values.end(), 0.0);
    CHECK(total == Catch::Approx(table[63] - table[0]).margin(1e-9));
}

TEST_CASE("exact refuses above the player cap") {
    Game game(25, [](const Coalition&) { return 0.0; }, 0.0);
    CHECK_THROWS_AS(exact_shapley(game, 20), InvalidArgument);
}

TEST_CASE("neighborhood exact on an isolated node") {
    FeatureGraph g(2);  // disconnected pair
    Game game = table_game(2, {0.25, 1.0, 0.5, 2.0});
    auto iv = neighborhood_exact(game, g, 1);
    CHECK(iv.values[0] == Catch::Approx(1.0 - 0.25).margin(1e-12));
    CHECK(iv.values[1] == Catch::Approx(0.5 - 0.25).margin(1e-12));
}

TEST_CASE("neighborhood exact on a single weighted edge") {
    FeatureGraph g(2);
    g.add_edge(0, 1);
    CorrelationMatrix w;
    w.m = 2;
    w.values.assign(4, 0.0);
    w.at(0, 1) = w.at(1, 0) = 0.6;
    Game game = graph_game(w, g);
    auto iv = neighborhood_exact(game, g, 1);
    CHECK(iv.values[0] == Catch::Approx(0.3).margin(1e-12));
    CHECK(iv.values[1] == Catch::Approx(0.3).margin(1e-12));
}

TEST_CASE("neighborhood exact on a unit star") {
    FeatureGraph g = star_graph(3);
    CorrelationMatrix w = unit_weights(g);
    Game game = graph_game(w, g);
    auto iv = neighborhood_exact(game, g, 1);
    CHECK(iv.values[0] == Catch::Approx(1.5).margin(1e-12));  // 12/8
    for (std::size_t l = 1; l <= 3; ++l)
        CHECK(iv.values[l] == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("neighborhood exact enforces the subset cap") {
    FeatureGraph g = star_graph(6);
    Game game(7, [](const Coalition&) { return 0.0; }, 0.0);
    CHECK_THROWS_AS(neighborhood_exact(game, g, 1, 5), InvalidArgument);
}

TEST_CASE("sampling count follows the expectation formula") {
    const double gamma = SamplingPlan::euler_gamma;
    SamplingPlan p = sampling_count(10, 3);
    double expect = ((10.5 / 3.0) - 0.5) * (std::log(10.0) + gamma) + 0.5;
    CHECK(p.h == static_cast<int>(std::floor(expect + 0.5)));
    CHECK(p.beta == Catch::Approx(11.0 / 4.0));

    SamplingPlan eq = sampling_count(4, 4);
    double expect_eq = ((4.5 / 4.0) - 0.5) * (std::log(4.0) + gamma) + 0.5;
    CHECK(eq.h == static_cast<int>(std::floor(expect_eq + 0.5)));

    CHECK(sampling_count(1, 1).h >= 1);
    CHECK_THROWS_AS(sampling_count(2, 3), InvalidArgument);
    CHECK_THROWS_AS(sampling_count(2, 0), InvalidArgument);
}

TEST_CASE("approx equals neighborhood exact below the sampling threshold") {
    FeatureGraph g = star_graph(4);
    CorrelationMatrix w = unit_weights(g);
    Game game = graph_game(w, g);
    ApproxOptions opts;
    opts.m = 12;  // every neighborhood is smaller
    auto approx = approx_shapley(game, g, opts);
    auto exact = neighborhood_exact(game, g, 1);
    CHECK(approx.values == exact.values);
}

TEST_CASE("approx is deterministic for a fixed seed") {
    FeatureGraph g = star_graph(8);
    CorrelationMatrix w = unit_weights(g);
    Game game = graph_game(w, g);
    ApproxOptions opts;
    opts.m = 3;
    opts.seed = 42;
    auto a = approx_shapley(game, g, opts);
    auto b = approx_shapley(game, g, opts);
    CHECK(a.values == b.values);
    CHECK(a.ranking == b.ranking);

    opts.jobs = 4;  // parallel node loop must not change the result
    auto c = approx_shapley(game, g, opts);
    CHECK(a.values == c.values);
}

TEST_CASE("sampled center estimate matches a closed-form oracle") {
    // star K(1,8) graph game: for the center, v(S+0)-v(S) counts the leaves
    // in S, so every m-leaf round contributes sum over subsets of the draw of
    // |S| = m * 2^(m-1) regardless of which leaves were drawn.  The sampled
    // branch is therefore deterministic: beta * h * m * 2^(m-1) / (h * 2^|psi|).
    const int leaves = 8;
    FeatureGraph g = star_graph(leaves);
    CorrelationMatrix w = unit_weights(g);
    Game game = graph_game(w, g);
    const int m = 3;
    SamplingPlan plan = sampling_count(static_cast<std::size_t>(leaves), m);
    double expect = plan.beta * (m * std::ldexp(1.0, m - 1)) / std::ldexp(1.0, leaves);
    for (int seed = 0; seed < 50; ++seed) {
        ApproxOptions opts;
        opts.m = m;
        opts.seed = static_cast<std::uint64_t>(seed);
        auto iv = approx_shapley(game, g, opts);
        CHECK(iv.values[0] == Catch::Approx(expect).margin(1e-12));
    }

    // at m = |psi| every round draws the full neighborhood, so the sampled
    // branch reproduces beta (here 1) times the full enumeration
    double enum_sum = 0.0;
    for (std::uint64_t mask = 0; mask < (1u << leaves); ++mask)
        enum_sum += static_cast<double>(std::popcount(mask));
    ApproxOptions full;
    full.m = leaves;
    full.seed = 7;
    auto iv_full = approx_shapley(game, g, full);
    CHECK(iv_full.values[0] ==
          Catch::Approx(enum_sum / std::ldexp(1.0, leaves)).margin(1e-9));
}

TEST_CASE("alternative normalization rescales the sampled branch") {
    FeatureGraph g = star_graph(8);
    CorrelationMatrix w = unit_weights(g);
    Game game = graph_game(w, g);
    ApproxOptions lit;
    lit.m = 3;
    lit.seed = 5;
    ApproxOptions alt = lit;
    alt.alt_normalization = true;
    auto a = approx_shapley(game, g, lit);
    auto b = approx_shapley(game, g, alt);
    // same sampled sums, different coefficient: ratio = beta * 2^m / 2^|psi|
    SamplingPlan plan = sampling_count(8, 3);
    double ratio = plan.beta * std::ldexp(1.0, 3) / std::ldexp(1.0, 8);
    CHECK(a.values[0] == Catch::Approx(b.values[0] * ratio).margin(1e-12));
}

TEST_CASE("approx validates parameters") {
    FeatureGraph g = star_graph(2);
    Game game(3, [](const Coalition&) { return 0.0; }, 0.0);
    ApproxOptions opts;
    opts.m = 0;
    CHECK_THROWS_AS(approx_shapley(game, g, opts), InvalidArgument);
    opts.m = 1;
    opts.d_max = 0;
    CHECK_THROWS_AS(approx_shapley(game, g, opts), InvalidArgument);
}

TEST_CASE("ranking order and ties") {
    ImportanceVector iv;
    iv.values = {0.1, 0.5, 0.3};
    iv.ranking = make_ranking(iv.values);
    CHECK(iv.ranking == std::vector<int>{1, 2, 0});
    auto pairs = rank(iv);
    CHECK(pairs[0] == std::pair<int, double>{1, 0.5});

    CHECK(make_ranking({2.0, 2.0, 2.0}) == std::vector<int>{0, 1, 2});

    std::mt19937_64 rng(3);
    std::vector<double> values(20);
    std::uniform_real_distribution<double> u(0, 1);
    for (auto& v : values) v = u(rng);
    auto order = make_ranking(values);
    std::vector<int> reference(20);
    std::iota(reference.begin(), reference.end(), 0);
    std::stable_sort(reference.begin(), reference.end(), [&](int a, int b) {
        return values[static_cast<std::size_t>(a)] > values[static_cast<std::size_t>(b)];
    });
    CHECK(order == reference);
}

TEST_CASE("importance json export is rank ordered") {
    ImportanceVector iv;
    iv.values = {0.1, 0.9};
    iv.ranking = make_ranking(iv.values);
    iv.method_tag = "exact";
    iv.elapsed_ms = 1.5;
    auto j = importance_to_json(iv, {"a", "b"});
    CHECK(j["method"] == "exact");
    CHECK(j["features"][0]["name"] == "b");
    CHECK(j["features"][0]["index"] == 1);
    CHECK(j["features"][1]["value"] == 0.1);
    CHECK(j.contains("elapsed_ms"));
}

TEST_CASE("exact shapley axioms on random games") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<double> table(64);
        for (auto& v : table) v = u(rng);
        table[0] = 0.0;

        // symmetrize players 0,1 and make player 2 null
        std::vector<double> sym(64);
        for (std::uint64_t mask = 0; mask < 64; ++mask) {
            std::uint64_t swapped = (mask & ~3ULL) | ((mask & 1) << 1) | ((mask >> 1) & 1);
            sym[mask] = 0.5 * (table[mask] + table[swapped]);
        }
        for (std::uint64_t mask = 0; mask < 64; ++mask)
            if (mask & 4) sym[mask] = sym[mask & ~4ULL];

        Game game = table_game(6, sym);
        auto iv = exact_shapley(game);
        double total = std::accumulate(iv.values.begin(), iv.values.end(), 0.0);
        CHECK(total == Catch::Approx(sym[63] - sym[0]).margin(1e-9));
        CHECK(iv.values[0] == Catch::Approx(iv.values[1]).margin(1e-9));
        CHECK(iv.values[2] == 0.0);
    }
}

TEST_CASE("exact shapley additivity") {
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> ta(64), tb(64), tsum(64);
        for (std::size_t i = 0; i < 64; ++i) {
            ta[i] = u(rng);
            tb[i] = u(rng);
            tsum[i] = ta[i] + tb[i];
        }
        Game ga = table_game(6, ta), gb = table_game(6, tb), gs = table_game(6, tsum);
        auto iva = exact_shapley(ga), ivb = exact_shapley(gb), ivs = exact_shapley(gs);
        for (std::size_t i = 0; i < 6; ++i)
            CHECK(ivs.values[i] == Catch::Approx(iva.values[i] + ivb.values[i]).margin(1e-9));
    }
}
