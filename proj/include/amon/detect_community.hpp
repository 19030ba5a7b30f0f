#pragma once

// Structural detection on the top-N flow graph.
//
// The N largest databrick cells form a binary adjacency A (rows =
// destination bins). Under normal traffic the in-degrees I(i) are roughly
// i.i.d. Normal(mu, sigma^2), so the largest of m of them stays below
//
//   u = mu + sigma * Phi^-1(p0^(1/m))
//
// with probability p0. Bins above u are flagged. Co-connectivity graphs
// D = A A^T (destinations sharing sources) and S = A^T A (sources sharing
// destinations) are summarised by their maximum clique.

#include <algorithm>
#include <bit>
#include <bitset>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "amon/alert.hpp"
#include "amon/databrick.hpp"
#include "amon/error.hpp"
#include "amon/tail.hpp"

namespace amon {

struct TopNGraph {
    std::size_t m = 0;
    std::size_t N = 0;
    std::vector<std::uint8_t> adjacency;  ///< row-major m x m
    std::vector<std::uint32_t> in_degrees;   ///< row sums
    std::vector<std::uint32_t> out_degrees;  ///< column sums

    bool edge(std::size_t i, std::size_t j) const noexcept { return adjacency[i * m + j] != 0; }

    std::size_t edges() const noexcept {
        return static_cast<std::size_t>(std::count(adjacency.begin(), adjacency.end(), std::uint8_t{1}));
    }

    static TopNGraph from_adjacency(std::size_t m, std::vector<std::uint8_t> adj) {
        if (adj.size() != m * m) throw ParameterError("adjacency must be m x m");
        TopNGraph g;
        g.m = m;
        g.adjacency = std::move(adj);
        g.in_degrees.assign(m, 0);
        g.out_degrees.assign(m, 0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                if (g.adjacency[i * m + j]) {
                    ++g.in_degrees[i];
                    ++g.out_degrees[j];
                }
        g.N = g.edges();
        return g;
    }
};

/// Mark the N largest nonzero cells. Ties at equal value go to the
/// lexicographically smaller (row, column).
inline TopNGraph build_topn(const Databrick& brick, std::size_t N) {
    if (N < 1) throw ParameterError("top-N needs N >= 1");
    const std::size_t m = brick.m();
    const auto cells = brick.cells();
    std::vector<std::uint32_t> nz;
    for (std::size_t c = 0; c < cells.size(); ++c)
        if (cells[c]) nz.push_back(static_cast<std::uint32_t>(c));
    auto by_rank = [&](std::uint32_t a, std::uint32_t b) { return cells[a] != cells[b] ? cells[a] > cells[b] : a < b; };
    if (nz.size() > N) {
        std::nth_element(nz.begin(), nz.begin() + static_cast<std::ptrdiff_t>(N - 1), nz.end(), by_rank);
        nz.resize(N);
    }
    std::vector<std::uint8_t> adj(m * m, 0);
    for (auto c : nz) adj[c] = 1;
    auto g = TopNGraph::from_adjacency(m, std::move(adj));
    g.N = N;
    return g;
}

struct CommunityConfig {
    double p0 = 0.9999;
    double lambda = 0.5;

    void validate() const {
        if (!(p0 > 0.0 && p0 < 1.0)) throw ParameterError("community p0 must be in (0, 1)");
        if (!(lambda > 0.0 && lambda < 1.0)) throw ParameterError("community lambda must be in (0, 1)");
    }
};

/// mu + sigma * Phi^-1(p0^(1/m)), evaluated through the upper tail so that
/// p0^(1/m) close to 1 keeps its precision.
inline double normal_max_threshold(double p0, std::size_t m, double mu, double sigma) {
    const double upper = -std::expm1(std::log(p0) / static_cast<double>(m));
    const double zq = boost::math::quantile(boost::math::complement(boost::math::normal_distribution<double>(), upper));
    return mu + sigma * zq;
}

/// Flags degree peaks of one orientation (in-degrees: many-to-one; out-degrees:
/// one-to-many). The first non-degenerate window is adopted directly, later
/// ones are EWMA-blended.
class CommunityDetector {
public:
    explicit CommunityDetector(CommunityConfig cfg = {}, ArrayKind array = ArrayKind::dst)
        : cfg_(cfg), array_(array) {
        cfg_.validate();
    }

    AlertEvent step(std::int64_t window, std::span<const std::uint32_t> degrees) {
        AlertEvent ev;
        ev.window = window;
        ev.detector = "community";
        ev.array = array_;
        const std::size_t m = degrees.size();
        if (m < 2) throw ParameterError("community step needs at least two bins");
        double mean = 0.0;
        for (auto d : degrees) mean += d;
        mean /= static_cast<double>(m);
        double ss = 0.0;
        for (auto d : degrees) ss += (d - mean) * (d - mean);
        const double sd = std::sqrt(ss / static_cast<double>(m - 1));
        ev.diagnostics["mu_hat"] = mean;
        ev.diagnostics["sigma_hat"] = sd;
        if (!(sd > 0.0)) {
            ev.note = "degenerate degrees (sigma = 0)";
            ev.threshold = initialized_ ? normal_max_threshold(cfg_.p0, m, mu_, sigma_) : 0.0;
            ev.diagnostics["mu_t"] = mu_;
            ev.diagnostics["sigma_t"] = sigma_;
            return ev;
        }
        if (!initialized_) {
            mu_ = mean;
            sigma_ = sd;
            initialized_ = true;
        } else {
            mu_ = ewma(mu_, mean, cfg_.lambda);
            sigma_ = ewma(sigma_, sd, cfg_.lambda);
        }
        ev.threshold = normal_max_threshold(cfg_.p0, m, mu_, sigma_);
        for (std::size_t i = 0; i < m; ++i) {
            if (degrees[i] > ev.threshold) {
                ev.bins.push_back(i);
                ev.values.push_back(degrees[i]);
            }
        }
        ev.flagged = !ev.bins.empty();
        ev.diagnostics["mu_t"] = mu_;
        ev.diagnostics["sigma_t"] = sigma_;
        return ev;
    }

    AlertEvent step(std::int64_t window, const std::vector<std::uint32_t>& degrees) {
        return step(window, std::span<const std::uint32_t>(degrees));
    }

    /// In-degrees for a destination detector, out-degrees for a source detector.
    AlertEvent step(std::int64_t window, const TopNGraph& g) {
        return step(window, array_ == ArrayKind::dst ? g.in_degrees : g.out_degrees);
    }

    bool initialized() const noexcept { return initialized_; }
    double mu() const noexcept { return mu_; }
    double sigma() const noexcept { return sigma_; }

private:
    CommunityConfig cfg_;
    ArrayKind array_;
    bool initialized_ = false;
    double mu_ = 0.0;
    double sigma_ = 0.0;
};

struct CoConnectivity {
    std::size_t m = 0;
    std::vector<std::uint32_t> D;  ///< A A^T
    std::vector<std::uint32_t> S;  ///< A^T A

    std::uint32_t d(std::size_t i, std::size_t k) const noexcept { return D[i * m + k]; }
    std::uint32_t s(std::size_t j, std::size_t l) const noexcept { return S[j * m + l]; }
};

inline CoConnectivity co_connectivity(const TopNGraph& g) {
    const std::size_t m = g.m;
    CoConnectivity co{m, std::vector<std::uint32_t>(m * m, 0), std::vector<std::uint32_t>(m * m, 0)};
    std::vector<std::size_t> ones;
    // D[i,k] = sum_j a(i,j) a(k,j): every pair of rows sharing column j.
    for (std::size_t j = 0; j < m; ++j) {
        ones.clear();
        for (std::size_t i = 0; i < m; ++i)
            if (g.edge(i, j)) ones.push_back(i);
        for (auto i : ones)
            for (auto k : ones) ++co.D[i * m + k];
    }
    for (std::size_t i = 0; i < m; ++i) {
        ones.clear();
        for (std::size_t j = 0; j < m; ++j)
            if (g.edge(i, j)) ones.push_back(j);
        for (auto j : ones)
            for (auto l : ones) ++co.S[j * m + l];
    }
    return co;
}

enum class CoGraph { src, dst };

struct CliqueResult {
    std::size_t size = 0;
    bool exact = true;
    std::vector<std::size_t> members;
};

namespace detail {

/// Maximum clique by branch and bound with greedy-colouring bounds
/// (Tomita-Seki MCQ) over fixed-width bitsets.
template <std::size_t W>
class MaxCliqueSolver {
public:
    using Set = std::bitset<W>;

    MaxCliqueSolver(std::vector<Set> adj, std::uint64_t budget)
        : adj_(std::move(adj)), n_(adj_.size()), budget_(budget) {}

    std::vector<std::size_t> solve() {
        Set all;
        for (std::size_t v = 0; v < n_; ++v) all.set(v);
        std::vector<std::size_t> current;
        expand(all, current);
        return best_;
    }

    /// False when the search budget ran out before optimality was proven.
    bool complete() const noexcept { return !exhausted_; }

private:
    void colour_sort(const Set& p, std::vector<std::size_t>& order, std::vector<std::size_t>& bounds) {
        Set uncoloured = p;
        std::size_t colour = 0;
        while (uncoloured.any()) {
            ++colour;
            Set q = uncoloured;
            while (q.any()) {
                const std::size_t v = first(q);
                q.reset(v);
                q &= ~adj_[v];
                uncoloured.reset(v);
                order.push_back(v);
                bounds.push_back(colour);
            }
        }
    }

    static std::size_t first(const Set& s) {
#if defined(__GLIBCXX__)
        return s._Find_first();
#else
        for (std::size_t i = 0; i < W; ++i)
            if (s.test(i)) return i;
        return W;
#endif
    }

    void expand(Set p, std::vector<std::size_t>& current) {
        if (exhausted_ || ++nodes_ > budget_) {
            exhausted_ = true;
            return;
        }
        std::vector<std::size_t> order, bounds;
        colour_sort(p, order, bounds);
        for (std::size_t idx = order.size(); idx-- > 0;) {
            if (current.size() + bounds[idx] <= best_.size()) return;
            const std::size_t v = order[idx];
            current.push_back(v);
            Set next = p & adj_[v];
            if (next.none()) {
                if (current.size() > best_.size()) best_ = current;
            } else {
                expand(next, current);
            }
            current.pop_back();
            p.reset(v);
        }
    }

    std::vector<Set> adj_;
    std::size_t n_;
    std::vector<std::size_t> best_;
    std::uint64_t budget_;
    std::uint64_t nodes_ = 0;
    bool exhausted_ = false;
};

/// Greedy clique: starting from each of the `n_seeds` highest-degree nodes,
/// repeatedly add the candidate with most neighbours among the remaining
/// candidates.
inline std::vector<std::size_t> greedy_clique(const std::vector<std::vector<std::uint8_t>>& adj,
                                              std::vector<std::size_t> nodes, std::size_t n_seeds = 8) {
    std::vector<std::size_t> degree(adj.size(), 0);
    for (auto v : nodes)
        for (auto u : nodes) degree[v] += adj[v][u];
    std::stable_sort(nodes.begin(), nodes.end(), [&](auto a, auto b) { return degree[a] > degree[b]; });
    std::vector<std::size_t> best;
    for (std::size_t si = 0; si < std::min(n_seeds, nodes.size()); ++si) {
        const std::size_t seed = nodes[si];
        std::vector<std::size_t> clique{seed};
        std::vector<std::size_t> cand;
        for (auto v : nodes)
            if (v != seed && adj[seed][v]) cand.push_back(v);
        while (!cand.empty()) {
            std::size_t pick = cand.front(), pick_deg = 0;
            for (auto v : cand) {
                std::size_t deg = 0;
                for (auto u : cand) deg += adj[v][u];
                if (deg > pick_deg || (deg == pick_deg && v < pick)) {
                    pick = v;
                    pick_deg = deg;
                }
            }
            clique.push_back(pick);
            std::vector<std::size_t> next;
            for (auto v : cand)
                if (v != pick && adj[pick][v]) next.push_back(v);
            cand = std::move(next);
        }
        if (clique.size() > best.size()) best = clique;
    }
    return best;
}

} // namespace detail

/// Size of the largest clique of the chosen co-connectivity graph after
/// binarising off-diagonal entries at >= threshold. Only active nodes (positive
/// diagonal, i.e. degree > 0 in A) take part; with none the answer is 0.
/// Exact for up to 256 active nodes within `budget` search nodes; otherwise
/// the best clique found (at least the greedy one) with exact = false.
inline CliqueResult max_clique_size(const CoConnectivity& co, CoGraph which, std::uint32_t threshold = 1,
                                    std::uint64_t budget = 2'000'000) {
    if (threshold < 1) throw ParameterError("clique threshold must be >= 1");
    const std::size_t m = co.m;
    const auto& mat = which == CoGraph::dst ? co.D : co.S;
    std::vector<std::size_t> nodes;
    for (std::size_t i = 0; i < m; ++i)
        if (mat[i * m + i] > 0) nodes.push_back(i);
    CliqueResult res;
    if (nodes.empty()) return res;

    auto linked = [&](std::size_t a, std::size_t b) { return a != b && mat[a * m + b] >= threshold; };
    auto solve_exact = [&]<std::size_t W>() {
        std::vector<std::bitset<W>> adj(nodes.size());
        for (std::size_t a = 0; a < nodes.size(); ++a)
            for (std::size_t b = 0; b < nodes.size(); ++b)
                if (linked(nodes[a], nodes[b])) adj[a].set(b);
        detail::MaxCliqueSolver<W> solver(std::move(adj), budget);
        auto found = solver.solve();
        res.exact = solver.complete();
        return found;
    };
    auto solve_greedy = [&] {
        std::vector<std::vector<std::uint8_t>> adj(nodes.size(), std::vector<std::uint8_t>(nodes.size(), 0));
        for (std::size_t a = 0; a < nodes.size(); ++a)
            for (std::size_t b = 0; b < nodes.size(); ++b) adj[a][b] = linked(nodes[a], nodes[b]);
        std::vector<std::size_t> idx(nodes.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        return detail::greedy_clique(adj, idx);
    };
    std::vector<std::size_t> local;
    if (nodes.size() <= 64) {
        local = solve_exact.template operator()<64>();
    } else if (nodes.size() <= 256) {
        local = solve_exact.template operator()<256>();
    } else {
        local = solve_greedy();
        res.exact = false;
    }
    if (!res.exact && nodes.size() <= 256) {
        auto greedy = solve_greedy();
        if (greedy.size() > local.size()) local = std::move(greedy);
    }
    for (auto a : local) res.members.push_back(nodes[a]);
    std::sort(res.members.begin(), res.members.end());
    res.size = res.members.size();
    return res;
}

} // namespace amon
