#pragma once

// Scale-free diagnostics: discrete power-law fits of degree sequences and
// Gromov four-point delta-hyperbolicity of unweighted graphs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hypersyn/errors.hpp"

namespace hypersyn::graph {

/// Simple undirected graph on vertices 0..n-1 with sorted, duplicate-free
/// adjacency lists.
struct Graph {
    std::vector<std::vector<std::size_t>> adj;

    Graph() = default;
    explicit Graph(std::size_t n) : adj(n) {}

    std::size_t size() const noexcept { return adj.size(); }
    std::size_t edge_count() const {
        std::size_t m = 0;
        for (const auto& a : adj) m += a.size();
        return m / 2;
    }

    void add_edge(std::size_t a, std::size_t b) {
        if (a >= adj.size() || b >= adj.size()) throw ContractViolation("add_edge: vertex out of range");
        if (a == b) return;
        auto insert = [](std::vector<std::size_t>& v, std::size_t x) {
            auto it = std::lower_bound(v.begin(), v.end(), x);
            if (it == v.end() || *it != x) v.insert(it, x);
        };
        insert(adj[a], b);
        insert(adj[b], a);
    }

    std::vector<long> degrees() const {
        std::vector<long> out;
        out.reserve(adj.size());
        for (const auto& a : adj) out.push_back(static_cast<long>(a.size()));
        return out;
    }
};

/// Barabasi-Albert preferential attachment: start from a clique on m+1
/// vertices, then each new vertex links to m distinct existing vertices
/// chosen proportionally to degree.
inline Graph barabasi_albert(std::size_t n, std::size_t m, std::mt19937_64& rng) {
    if (m == 0 || n <= m) throw ContractViolation("barabasi_albert: need n > m >= 1");
    Graph g(n);
    std::vector<std::size_t> ends;  // each vertex appears once per incident edge
    for (std::size_t a = 0; a <= m; ++a)
        for (std::size_t b = a + 1; b <= m; ++b) {
            g.add_edge(a, b);
            ends.push_back(a);
            ends.push_back(b);
        }
    for (std::size_t v = m + 1; v < n; ++v) {
        std::set<std::size_t> targets;
        while (targets.size() < m) {
            std::uniform_int_distribution<std::size_t> pick(0, ends.size() - 1);
            targets.insert(ends[pick(rng)]);
        }
        for (std::size_t t : targets) {
            g.add_edge(v, t);
            ends.push_back(v);
            ends.push_back(t);
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Power-law fitting

/// Hurwitz zeta(s, q) = sum_{k>=0} (k + q)^-s for s > 1, q > 0, by direct
/// summation followed by an Euler-Maclaurin tail.
inline double hurwitz_zeta(double s, double q) {
    if (!(s > 1.0) || !(q > 0.0)) throw ContractViolation("hurwitz_zeta: need s > 1 and q > 0");
    constexpr int kTerms = 20;
    double sum = 0.0;
    for (int k = 0; k < kTerms; ++k) sum += std::pow(q + k, -s);
    const double a = q + kTerms;
    double tail = std::pow(a, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(a, -s);
    const double b2 = 1.0 / 6.0, b4 = -1.0 / 30.0, b6 = 1.0 / 42.0;
    tail += b2 / 2.0 * s * std::pow(a, -s - 1.0);
    tail += b4 / 24.0 * s * (s + 1.0) * (s + 2.0) * std::pow(a, -s - 3.0);
    tail += b6 / 720.0 * s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * std::pow(a, -s - 5.0);
    return sum + tail;
}

struct PowerLawFit {
    double gamma = 0.0;
    long xmin = 0;
    double ks_distance = 0.0;
    std::size_t tail_size = 0;
    double gamma_closed_form = 0.0;  // 1 + n / sum ln(d / (xmin - 1/2))
};

struct PowerLawOptions {
    std::size_t min_samples = 50;
    std::size_t min_tail = 10;
};

namespace detail {

/// Maximiser of the discrete power-law log-likelihood
/// -gamma sum ln d - n ln zeta(gamma, xmin), which is concave in gamma.
inline double discrete_mle(double log_sum, std::size_t n, long xmin, double guess) {
    auto ll = [&](double g) {
        return -g * log_sum - static_cast<double>(n) * std::log(hurwitz_zeta(g, static_cast<double>(xmin)));
    };
    double lo = 1.0 + 1e-6, hi = std::max(2.0 * guess, 8.0);
    constexpr double kPhi = 0.6180339887498949;
    double a = hi - kPhi * (hi - lo), b = lo + kPhi * (hi - lo);
    double fa = ll(a), fb = ll(b);
    for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
        if (fa < fb) {
            lo = a;
            a = b;
            fa = fb;
            b = lo + kPhi * (hi - lo);
            fb = ll(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - kPhi * (hi - lo);
            fa = ll(a);
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Discrete power-law fit over d >= xmin. For each candidate xmin the exponent
/// is the exact discrete maximum-likelihood estimate (seeded from the closed
/// form 1 + n / sum ln(d / (xmin - 1/2))); the reported xmin minimises the KS
/// distance between the empirical tail and the fitted Hurwitz-zeta law.
inline PowerLawFit fit_power_law(const std::vector<long>& degrees, const PowerLawOptions& opts = {}) {
    std::vector<long> d;
    for (long x : degrees)
        if (x > 0) d.push_back(x);
    if (d.size() < opts.min_samples)
        throw ContractViolation("fit_power_law: too few samples (" + std::to_string(d.size()) + " nonzero degrees, need " +
                                std::to_string(opts.min_samples) + ")");
    std::sort(d.begin(), d.end());
    if (d.front() == d.back()) throw ContractViolation("fit_power_law: degenerate distribution");

    std::vector<long> candidates(d.begin(), d.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    PowerLawFit best;
    best.ks_distance = std::numeric_limits<double>::infinity();
    for (long xmin : candidates) {
        const auto first = std::lower_bound(d.begin(), d.end(), xmin);
        const std::size_t n = static_cast<std::size_t>(d.end() - first);
        if (n < opts.min_tail) break;
        if (*first == d.back()) break;  // single-valued tail carries no exponent information
        double log_sum = 0.0, log_d = 0.0;
        for (auto it = first; it != d.end(); ++it) {
            log_sum += std::log(static_cast<double>(*it) / (static_cast<double>(xmin) - 0.5));
            log_d += std::log(static_cast<double>(*it));
        }
        const double closed_form = 1.0 + static_cast<double>(n) / log_sum;
        const double gamma = detail::discrete_mle(log_d, n, xmin, closed_form);

        // KS over the distinct values of the tail, checking both sides of each jump.
        const double z = hurwitz_zeta(gamma, static_cast<double>(xmin));
        double ks = 0.0;
        auto it = first;
        long x = xmin;
        double model_cdf = 0.0;
        while (it != d.end()) {
            const long value = *it;
            for (; x <= value; ++x) model_cdf += std::pow(static_cast<double>(x), -gamma) / z;
            const auto next = std::upper_bound(it, d.end(), value);
            const double emp_before = static_cast<double>(it - first) / static_cast<double>(n);
            const double emp_after = static_cast<double>(next - first) / static_cast<double>(n);
            const double model_before = model_cdf - std::pow(static_cast<double>(value), -gamma) / z;
            ks = std::max({ks, std::abs(emp_after - model_cdf), std::abs(emp_before - model_before)});
            it = next;
        }
        if (ks < best.ks_distance) best = {gamma, xmin, ks, n, closed_form};
    }
    if (best.tail_size == 0) throw ContractViolation("fit_power_law: degenerate distribution");
    return best;
}

// ---------------------------------------------------------------------------
// Gromov delta-hyperbolicity

/// Vertices of the largest connected component, ascending.
inline std::vector<std::size_t> largest_component(const Graph& g) {
    std::vector<int> comp(g.size(), -1);
    std::vector<std::size_t> best;
    int label = 0;
    for (std::size_t s = 0; s < g.size(); ++s) {
        if (comp[s] >= 0) continue;
        std::vector<std::size_t> members{s};
        comp[s] = label;
        for (std::size_t q = 0; q < members.size(); ++q)
            for (std::size_t v : g.adj[members[q]])
                if (comp[v] < 0) {
                    comp[v] = label;
                    members.push_back(v);
                }
        if (members.size() > best.size()) best = std::move(members);
        ++label;
    }
    std::sort(best.begin(), best.end());
    return best;
}

/// Subgraph induced by `vertices`, relabelled 0..k-1 in the given order.
inline Graph induced_subgraph(const Graph& g, const std::vector<std::size_t>& vertices) {
    constexpr auto kNone = static_cast<std::size_t>(-1);
    std::vector<std::size_t> relabel(g.size(), kNone);
    for (std::size_t i = 0; i < vertices.size(); ++i) relabel[vertices[i]] = i;
    Graph h(vertices.size());
    for (std::size_t i = 0; i < vertices.size(); ++i)
        for (std::size_t v : g.adj[vertices[i]])
            if (relabel[v] != kNone) h.add_edge(i, relabel[v]);
    return h;
}

/// All-pairs hop distances by BFS from every vertex (row-major n x n).
inline std::vector<std::uint32_t> all_pairs_hops(const Graph& g) {
    const std::size_t n = g.size();
    constexpr auto kInf = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> dist(n * n, kInf);
    std::vector<std::size_t> queue;
    for (std::size_t s = 0; s < n; ++s) {
        std::uint32_t* row = dist.data() + s * n;
        row[s] = 0;
        queue.assign(1, s);
        for (std::size_t q = 0; q < queue.size(); ++q) {
            const std::size_t u = queue[q];
            for (std::size_t v : g.adj[u])
                if (row[v] == kInf) {
                    row[v] = row[u] + 1;
                    queue.push_back(v);
                }
        }
    }
    return dist;
}

struct DeltaOptions {
    std::size_t exact_limit = 60;  // enumerate all quadruples up to this size
    std::size_t samples = 1'000'000;
    std::uint64_t seed = 0;
    bool force_sampling = false;
};

struct DeltaResult {
    double delta = 0.0;
    bool exact = true;               // false: sampled lower bound
    bool largest_component = false;  // graph was disconnected
    std::size_t nodes = 0;
    std::size_t edges = 0;

    std::string method() const { return exact ? "exact" : "sampled lower bound"; }
};

namespace detail {

inline double four_point(const std::vector<std::uint32_t>& d, std::size_t n, std::size_t x, std::size_t y,
                         std::size_t z, std::size_t w) {
    double s[3] = {static_cast<double>(d[x * n + y] + d[z * n + w]), static_cast<double>(d[x * n + z] + d[y * n + w]),
                   static_cast<double>(d[x * n + w] + d[y * n + z])};
    std::sort(s, s + 3);
    return (s[2] - s[1]) / 2.0;
}

}  // namespace detail

/// Four-point-condition delta with BFS hop distances. Disconnected graphs are
/// reduced to their largest component (flagged).
inline DeltaResult gromov_delta(const Graph& g, const DeltaOptions& opts = {}) {
    if (g.size() == 0) throw ContractViolation("gromov_delta: empty graph");
    DeltaResult out;
    const auto comp = largest_component(g);
    const Graph h = comp.size() == g.size() ? g : induced_subgraph(g, comp);
    out.largest_component = comp.size() != g.size();
    out.nodes = h.size();
    out.edges = h.edge_count();
    const std::size_t n = h.size();
    out.exact = n <= opts.exact_limit && !opts.force_sampling;
    if (n < 4) return out;

    const auto d = all_pairs_hops(h);
    double delta = 0.0;
    if (out.exact) {
        for (std::size_t x = 0; x < n; ++x)
            for (std::size_t y = x + 1; y < n; ++y)
                for (std::size_t z = y + 1; z < n; ++z)
                    for (std::size_t w = z + 1; w < n; ++w) delta = std::max(delta, detail::four_point(d, n, x, y, z, w));
    } else {
        std::mt19937_64 rng(opts.seed);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (std::size_t s = 0; s < opts.samples; ++s) {
            std::size_t q[4];
            for (int i = 0; i < 4; ++i) {
                bool fresh;
                do {
                    q[i] = pick(rng);
                    fresh = true;
                    for (int j = 0; j < i; ++j) fresh = fresh && q[j] != q[i];
                } while (!fresh);
            }
            delta = std::max(delta, detail::four_point(d, n, q[0], q[1], q[2], q[3]));
        }
    }
    out.delta = delta;
    return out;
}

// ---------------------------------------------------------------------------

/// Newman assortativity coefficient of a binary vertex attribute.
inline double label_assortativity(const Graph& g, const std::vector<int>& label) {
    if (label.size() != g.size()) throw ShapeError("label_assortativity: label count mismatch");
    double e[2][2] = {{0, 0}, {0, 0}};
    double total = 0.0;
    for (std::size_t u = 0; u < g.size(); ++u)
        for (std::size_t v : g.adj[u]) {
            e[label[u] != 0][label[v] != 0] += 1.0;
            total += 1.0;
        }
    if (total == 0.0) return 0.0;
    double trace = 0.0, ab = 0.0;
    for (int i = 0; i < 2; ++i) {
        trace += e[i][i] / total;
        const double a = (e[i][0] + e[i][1]) / total;
        const double b = (e[0][i] + e[1][i]) / total;
        ab += a * b;
    }
    if (ab >= 1.0) return 0.0;
    return (trace - ab) / (1.0 - ab);
}

struct ScaleFreeReport {
    PowerLawFit fit;
    bool fit_ok = false;
    std::string fit_error;
    DeltaResult delta;
    std::size_t nodes = 0;
    std::size_t edges = 0;
};

inline ScaleFreeReport analyze(const Graph& g, const DeltaOptions& delta_opts = {}) {
    ScaleFreeReport r;
    r.nodes = g.size();
    r.edges = g.edge_count();
    try {
        r.fit = fit_power_law(g.degrees());
        r.fit_ok = true;
    } catch (const ContractViolation& e) {
        r.fit_error = e.what();
    }
    r.delta = gromov_delta(g, delta_opts);
    return r;
}

}  // namespace hypersyn::graph
