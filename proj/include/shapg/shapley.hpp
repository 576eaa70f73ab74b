#ifndef SHAPG_SHAPLEY_HPP
#define SHAPG_SHAPLEY_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <numeric>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "shapg/coalition.hpp"
#include "shapg/common.hpp"
#include "shapg/game.hpp"
#include "shapg/graph.hpp"

namespace shapg {

/// Per-feature importance values plus the induced ranking.
struct ImportanceVector {
    std::vector<double> values;
    std::vector<int> ranking;  // feature indices, descending value, ties by index
    std::string method_tag;
    double elapsed_ms = 0.0;
};

/// Descending by value, ties by ascending feature index.
inline std::vector<int> make_ranking(const std::vector<double>& values) {
    std::vector<int> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&values](int a, int b) {
        if (values[static_cast<std::size_t>(a)] != values[static_cast<std::size_t>(b)])
            return values[static_cast<std::size_t>(a)] > values[static_cast<std::size_t>(b)];
        return a < b;
    });
    return order;
}

inline std::vector<std::pair<int, double>> rank(const ImportanceVector& iv) {
    std::vector<std::pair<int, double>> out;
    out.reserve(iv.ranking.size());
    for (int i : iv.ranking) out.emplace_back(i, iv.values[static_cast<std::size_t>(i)]);
    return out;
}

namespace detail {

inline double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

// Per-node random stream, independent of scheduling order.
inline std::mt19937_64 node_rng(std::uint64_t seed, int node) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(node)};
    return std::mt19937_64(seq);
}

// Enumerate all subsets of `pool` (including the empty set) and accumulate
// v(S + node) - v(S).
inline double marginal_sum_over_subsets(const Game& game, const NodeSet& pool, int node) {
    const std::size_t n = pool.size();
    if (n >= 63) throw InvalidArgument("neighborhood too large to enumerate");
    const std::uint64_t count = std::uint64_t{1} << n;
    double total = 0.0;
    for (std::uint64_t mask = 0; mask < count; ++mask) {
        Coalition s(game.player_count());
        for (std::size_t b = 0; b < n; ++b)
            if ((mask >> b) & 1) s.set(static_cast<std::size_t>(pool[b]));
        total += game.value(s.with(static_cast<std::size_t>(node))) - game.value(s);
    }
    return total;
}

inline void run_parallel(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    int count = std::min<int>(jobs, static_cast<int>(n));
    pool.reserve(static_cast<std::size_t>(count));
    for (int t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Exact Shapley value: one pass over all 2^M coalitions, accumulating
/// weighted marginal contributions. Refuses above `player_cap`.
inline ImportanceVector exact_shapley(const Game& game, int player_cap = 20) {
    detail::Stopwatch watch;
    const auto m = static_cast<int>(game.player_count());
    if (m > player_cap)
        throw InvalidArgument("exact Shapley refused: " + std::to_string(m) + " players exceeds the 2^M cap of " +
                              std::to_string(player_cap) + "; use the approximated method");

    // coeff[s] = s!(M-s-1)!/M! = 1 / (M * C(M-1, s))
    std::vector<double> coeff(static_cast<std::size_t>(m));
    for (int s = 0; s < m; ++s)
        coeff[static_cast<std::size_t>(s)] = 1.0 / (m * detail::binomial(m - 1, s));

    std::vector<double> phi(static_cast<std::size_t>(m), 0.0);
    const std::uint64_t count = std::uint64_t{1} << m;
    for (std::uint64_t mask = 0; mask < count; ++mask) {
        Coalition s(static_cast<std::size_t>(m));
        int size = 0;
        for (int b = 0; b < m; ++b) {
            if ((mask >> b) & 1) {
                s.set(static_cast<std::size_t>(b));
                ++size;
            }
        }
        double base = game.value(s);
        for (int i = 0; i < m; ++i) {
            if ((mask >> i) & 1) continue;
            double with = game.value(s.with(static_cast<std::size_t>(i)));
            phi[static_cast<std::size_t>(i)] += coeff[static_cast<std::size_t>(size)] * (with - base);
        }
    }

    ImportanceVector iv;
    iv.values = std::move(phi);
    iv.ranking = make_ranking(iv.values);
    iv.method_tag = "exact";
    iv.elapsed_ms = watch.elapsed_ms();
    return iv;
}

/// Neighborhood-restricted exact value: uniform average marginal
/// contribution over all subsets of psi(i, d_max).
inline ImportanceVector neighborhood_exact(const Game& game, const FeatureGraph& g, int d_max,
                                           int psi_cap = 25, int jobs = 1) {
    detail::Stopwatch watch;
    if (game.player_count() != g.node_count())
        throw InvalidArgument("game and graph dimensions differ");
    const auto m = static_cast<int>(g.node_count());

    std::vector<double> phi(static_cast<std::size_t>(m), 0.0);
    detail::run_parallel(static_cast<std::size_t>(m), jobs, [&](std::size_t i) {
        NodeSet psi = neighborhood(g, static_cast<int>(i), d_max);
        if (psi.size() > static_cast<std::size_t>(psi_cap))
            throw InvalidArgument("neighborhood of node " + std::to_string(i) + " has " +
                                  std::to_string(psi.size()) + " members, above the cap of " +
                                  std::to_string(psi_cap));
        double total = detail::marginal_sum_over_subsets(game, psi, static_cast<int>(i));
        phi[i] = total / std::ldexp(1.0, static_cast<int>(psi.size()));
    });

    ImportanceVector iv;
    iv.values = std::move(phi);
    iv.ranking = make_ranking(iv.values);
    iv.method_tag = "neighborhood-exact";
    iv.elapsed_ms = watch.elapsed_ms();
    return iv;
}

/// Sampling budget for one node: the expected number of m-sized draws needed
/// to see every member of a psi-sized neighborhood, rounded half-up.
struct SamplingPlan {
    std::size_t psi_size = 0;
    int m = 1;
    int h = 1;
    double beta = 1.0;  // (|psi|+1)/(m+1)

    static constexpr double euler_gamma = 0.5772156649;
};

inline SamplingPlan sampling_count(std::size_t psi_size, int m) {
    if (m < 1) throw InvalidArgument("m must be >= 1");
    if (psi_size < static_cast<std::size_t>(m))
        throw InvalidArgument("psi smaller than m: use the exact branch");
    const auto psi = static_cast<double>(psi_size);
    double h_real = ((psi + 0.5) / m - 0.5) * (std::log(psi) + SamplingPlan::euler_gamma) + 0.5;
    SamplingPlan plan;
    plan.psi_size = psi_size;
    plan.m = m;
    plan.h = std::max(1, static_cast<int>(std::floor(h_real + 0.5)));
    plan.beta = (psi + 1.0) / (m + 1.0);
    return plan;
}

struct ApproxOptions {
    int d_max = 1;
    int m = 12;
    std::uint64_t seed = 0;
    int jobs = 1;
    // Divide sampled sums by h*2^m instead of applying beta/2^|psi|.
    bool alt_normalization = false;
};

/// Approximated Shapley value: exact subset enumeration inside small
/// neighborhoods, random m-neighbor sampling rounds inside large ones.
inline ImportanceVector approx_shapley(const Game& game, const FeatureGraph& g,
                                       const ApproxOptions& opts = {}) {
    detail::Stopwatch watch;
    if (opts.m < 1) throw InvalidArgument("m must be >= 1");
    if (opts.d_max < 1) throw InvalidArgument("d_max must be >= 1");
    if (game.player_count() != g.node_count())
        throw InvalidArgument("game and graph dimensions differ");
    const auto m_players = static_cast<int>(g.node_count());

    std::vector<double> phi(static_cast<std::size_t>(m_players), 0.0);
    detail::run_parallel(static_cast<std::size_t>(m_players), opts.jobs, [&](std::size_t i) {
        NodeSet psi = neighborhood(g, static_cast<int>(i), opts.d_max);
        if (psi.size() < static_cast<std::size_t>(opts.m)) {
            double total = detail::marginal_sum_over_subsets(game, psi, static_cast<int>(i));
            phi[i] = total / std::ldexp(1.0, static_cast<int>(psi.size()));
            return;
        }
        SamplingPlan plan = sampling_count(psi.size(), opts.m);
        std::mt19937_64 rng = detail::node_rng(opts.seed, static_cast<int>(i));
        double total = 0.0;
        NodeSet pool = psi;
        for (int round = 0; round < plan.h; ++round) {
            // draw m distinct neighbors: partial Fisher-Yates
            for (int d = 0; d < opts.m; ++d) {
                auto j = static_cast<std::size_t>(d) +
                         static_cast<std::size_t>(rng() % (pool.size() - static_cast<std::size_t>(d)));
                std::swap(pool[static_cast<std::size_t>(d)], pool[j]);
            }
            NodeSet sample(pool.begin(), pool.begin() + opts.m);
            total += detail::marginal_sum_over_subsets(game, sample, static_cast<int>(i));
        }
        double coeff = opts.alt_normalization
                           ? 1.0 / (plan.h * std::ldexp(1.0, opts.m))
                           : plan.beta / (plan.h * std::ldexp(1.0, static_cast<int>(psi.size())));
        phi[i] = total * coeff;
    });

    ImportanceVector iv;
    iv.values = std::move(phi);
    iv.ranking = make_ranking(iv.values);
    iv.method_tag = "approx";
    iv.elapsed_ms = watch.elapsed_ms();
    return iv;
}

/// JSON export, features sorted by rank.
inline nlohmann::json importance_to_json(const ImportanceVector& iv,
                                         const std::vector<std::string>& names) {
    if (names.size() != iv.values.size())
        throw InvalidArgument("name count does not match importance vector");
    nlohmann::json features = nlohmann::json::array();
    for (int i : iv.ranking) {
        features.push_back({{"index", i},
                            {"name", names[static_cast<std::size_t>(i)]},
                            {"value", iv.values[static_cast<std::size_t>(i)]}});
    }
    return {{"method", iv.method_tag}, {"features", features}, {"elapsed_ms", iv.elapsed_ms}};
}

}  // namespace shapg

#endif
