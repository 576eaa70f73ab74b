#ifndef SHAPG_GRAPH_HPP
#define SHAPG_GRAPH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "shapg/common.hpp"
#include "shapg/dataset.hpp"

namespace shapg {

using NodeSet = std::vector<int>;  // ascending, no duplicates

/// Undirected feature graph over node indices 0..M-1.
class FeatureGraph {
public:
    explicit FeatureGraph(std::size_t node_count)
        : m_(node_count), adj_(node_count * node_count, 0) {}

    std::size_t node_count() const { return m_; }

    bool has_edge(std::size_t i, std::size_t j) const { return adj_[i * m_ + j] != 0; }

    void add_edge(std::size_t i, std::size_t j) {
        if (i >= m_ || j >= m_) throw InvalidArgument("node index out of range");
        if (i == j) throw InvalidArgument("self-loops are not allowed");
        adj_[i * m_ + j] = 1;
        adj_[j * m_ + i] = 1;
    }

    std::size_t degree(std::size_t i) const {
        std::size_t d = 0;
        for (std::size_t j = 0; j < m_; ++j) d += adj_[i * m_ + j];
        return d;
    }

    std::size_t edge_count() const {
        std::size_t total = std::accumulate(adj_.begin(), adj_.end(), std::size_t{0});
        return total / 2;
    }

    /// Edges as (i, j) pairs with i < j, lexicographic order.
    std::vector<std::pair<int, int>> edges() const {
        std::vector<std::pair<int, int>> out;
        for (std::size_t i = 0; i < m_; ++i)
            for (std::size_t j = i + 1; j < m_; ++j)
                if (has_edge(i, j)) out.emplace_back(static_cast<int>(i), static_cast<int>(j));
        return out;
    }

private:
    std::size_t m_;
    std::vector<char> adj_;
};

namespace detail {

struct WeightedEdge {
    int i, j;
    double w;
};

/// All feature pairs sorted by |w| descending, ties by (i, j) ascending.
inline std::vector<WeightedEdge> sorted_edges(const CorrelationMatrix& w) {
    std::vector<WeightedEdge> edges;
    edges.reserve(w.m * (w.m - 1) / 2);
    for (std::size_t i = 0; i < w.m; ++i)
        for (std::size_t j = i + 1; j < w.m; ++j)
            edges.push_back({static_cast<int>(i), static_cast<int>(j), w.at(i, j)});
    std::stable_sort(edges.begin(), edges.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
        double aw = std::fabs(a.w), bw = std::fabs(b.w);
        if (aw != bw) return aw > bw;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    return edges;
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[a] = b;
        return true;
    }
};

}  // namespace detail

inline bool is_connected(const FeatureGraph& g) {
    const std::size_t m = g.node_count();
    if (m <= 1) return true;
    std::vector<char> seen(m, 0);
    std::deque<std::size_t> queue{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!queue.empty()) {
        std::size_t u = queue.front();
        queue.pop_front();
        for (std::size_t v = 0; v < m; ++v) {
            if (g.has_edge(u, v) && !seen[v]) {
                seen[v] = 1;
                ++count;
                queue.push_back(v);
            }
        }
    }
    return count == m;
}

/// Reduce the dense correlation graph: scan pairs by descending |W|, keep an
/// edge while one endpoint is still uncovered, then join remaining components
/// with the strongest cross-component pairs until connected.
inline FeatureGraph build_feature_graph(const CorrelationMatrix& w) {
    const std::size_t m = w.m;
    if (m == 0) throw InvalidArgument("correlation matrix is empty");
    FeatureGraph g(m);
    if (m == 1) return g;

    auto edges = detail::sorted_edges(w);
    std::vector<char> covered(m, 0);
    std::size_t covered_count = 0;
    detail::UnionFind uf(m);
    std::size_t components = m;

    for (const auto& e : edges) {
        if (covered_count == m && components == 1) break;
        if (e.w == 0.0) break;  // zero-weight pairs only join components below
        if (!covered[e.i] || !covered[e.j]) {
            g.add_edge(e.i, e.j);
            if (!covered[e.i]) { covered[e.i] = 1; ++covered_count; }
            if (!covered[e.j]) { covered[e.j] = 1; ++covered_count; }
            if (uf.unite(e.i, e.j)) --components;
        }
    }

    if (components > 1) {
        for (const auto& e : edges) {
            if (components == 1) break;
            if (uf.find(e.i) != uf.find(e.j)) {
                g.add_edge(e.i, e.j);
                uf.unite(e.i, e.j);
                --components;
            }
        }
    }
    return g;
}

/// Nodes within shortest-path distance [1, d_max] of i, ascending.
inline NodeSet neighborhood(const FeatureGraph& g, int i, int d_max) {
    const std::size_t m = g.node_count();
    if (i < 0 || static_cast<std::size_t>(i) >= m)
        throw InvalidArgument("node index out of range");
    if (d_max < 1) throw InvalidArgument("d_max must be >= 1");

    std::vector<int> dist(m, -1);
    dist[static_cast<std::size_t>(i)] = 0;
    std::deque<std::size_t> queue{static_cast<std::size_t>(i)};
    while (!queue.empty()) {
        std::size_t u = queue.front();
        queue.pop_front();
        if (dist[u] == d_max) continue;
        for (std::size_t v = 0; v < m; ++v) {
            if (g.has_edge(u, v) && dist[v] < 0) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    NodeSet out;
    for (std::size_t v = 0; v < m; ++v)
        if (dist[v] > 0) out.push_back(static_cast<int>(v));
    return out;
}

/// Sum of W(j,k) over unordered pairs in s that are edges of g.
inline double induced_edge_weight_sum(const CorrelationMatrix& w, const FeatureGraph& g,
                                      const NodeSet& s) {
    double total = 0.0;
    for (std::size_t a = 0; a < s.size(); ++a) {
        for (std::size_t b = a + 1; b < s.size(); ++b) {
            auto i = static_cast<std::size_t>(s[a]);
            auto j = static_cast<std::size_t>(s[b]);
            if (i >= g.node_count() || j >= g.node_count())
                throw InvalidArgument("node index out of range");
            if (g.has_edge(i, j)) total += w.at(i, j);
        }
    }
    return total;
}

/// Graphviz text; edge labels carry the correlation weight, 3 decimals.
inline std::string export_dot(const FeatureGraph& g, const CorrelationMatrix& w,
                              const std::vector<std::string>& names) {
    if (names.size() != g.node_count())
        throw InvalidArgument("name count does not match node count");
    std::ostringstream out;
    out << "graph features {\n";
    for (std::size_t i = 0; i < g.node_count(); ++i)
        out << "  \"" << names[i] << "\";\n";
    char buf[32];
    for (auto [i, j] : g.edges()) {
        std::snprintf(buf, sizeof buf, "%.3f", w.at(static_cast<std::size_t>(i),
                                                    static_cast<std::size_t>(j)));
        out << "  \"" << names[static_cast<std::size_t>(i)] << "\" -- \""
            << names[static_cast<std::size_t>(j)] << "\" [label=\"" << buf << "\"];\n";
    }
    out << "}\n";
    return out.str();
}

/// Adjacency as a 0/1 CSV matrix with a name header row and column.
inline std::string adjacency_csv(const FeatureGraph& g, const std::vector<std::string>& names) {
    if (names.size() != g.node_count())
        throw InvalidArgument("name count does not match node count");
    std::ostringstream out;
    out << "feature";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        out << names[i];
        for (std::size_t j = 0; j < g.node_count(); ++j)
            out << ',' << (g.has_edge(i, j) ? 1 : 0);
        out << '\n';
    }
    return out.str();
}

}  // namespace shapg

#endif
