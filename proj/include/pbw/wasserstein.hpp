#pragma once

// Exact order-1 Wasserstein distance between finite discrete measures.
// The transportation LP is solved as a min-cost flow on the dense bipartite
// support graph with successive shortest augmenting paths and node
// potentials. Certificates over Dirac measures never touch the LP: a
// single-point support short-circuits to the ground metric.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pbw {

constexpr std::size_t kMaxSupportSize = 256;

template <class Point>
struct DiscreteMeasure {
    std::vector<Point> support;
    std::vector<double> weights;

    void validate() const {
        if (support.empty()) throw std::invalid_argument("measure: empty support");
        if (support.size() != weights.size())
            throw std::invalid_argument("measure: support/weight size mismatch");
        if (support.size() > kMaxSupportSize)
            throw std::invalid_argument("measure: support larger than " +
                                        std::to_string(kMaxSupportSize) + " points");
        double sum = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0)) throw std::invalid_argument("measure: weights must be non-negative");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("measure: weights must sum to 1");
    }
};

template <class Point>
DiscreteMeasure<Point> dirac(Point p) {
    return DiscreteMeasure<Point>{{std::move(p)}, {1.0}};
}

template <class Point>
DiscreteMeasure<Point> uniform_measure(std::vector<Point> pts) {
    const double w = 1.0 / static_cast<double>(pts.size());
    DiscreteMeasure<Point> m{std::move(pts), {}};
    m.weights.assign(m.support.size(), w);
    return m;
}

inline double euclidean_metric(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("metric: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

namespace detail {

// Min-cost transportation on a dense bipartite graph, successive shortest
// paths with potentials. Supplies and demands are the measure weights; the
// imbalance between the two sides is at most the validation tolerance.
inline double transport_cost(const std::vector<double>& supply, const std::vector<double>& demand,
                             const std::vector<double>& cost /* n x m row-major */) {
    const std::size_t n = supply.size(), m = demand.size();
    std::vector<double> rem_supply = supply, rem_demand = demand;
    std::vector<double> flow(n * m, 0.0);
    std::vector<double> pot(n + m, 0.0);  // node potentials, sources then sinks
    const double inf = std::numeric_limits<double>::infinity();

    std::vector<double> dist(n + m);
    std::vector<int> prev(n + m);  // predecessor node on the shortest path tree
    std::vector<char> done(n + m);

    std::size_t guard = 0;
    const std::size_t guard_limit = 64 * (n + m) + 4096;

    for (std::size_t s = 0; s < n; ++s) {
        while (rem_supply[s] > 1e-15) {
            if (++guard > guard_limit)
                throw std::runtime_error("w1_exact: augmentation limit exceeded");

            // Dijkstra over the residual graph with reduced costs.
            std::fill(dist.begin(), dist.end(), inf);
            std::fill(prev.begin(), prev.end(), -1);
            std::fill(done.begin(), done.end(), 0);
            dist[s] = 0.0;
            for (;;) {
                std::size_t u = n + m;
                double best = inf;
                for (std::size_t v = 0; v < n + m; ++v)
                    if (!done[v] && dist[v] < best) {
                        best = dist[v];
                        u = v;
                    }
                if (u == n + m) break;
                done[u] = 1;
                if (u < n) {  // source -> every sink, forward arcs
                    for (std::size_t j = 0; j < m; ++j) {
                        if (done[n + j]) continue;
                        const double rc = cost[u * m + j] + pot[u] - pot[n + j];
                        if (dist[u] + rc < dist[n + j]) {
                            dist[n + j] = dist[u] + rc;
                            prev[n + j] = static_cast<int>(u);
                        }
                    }
                } else {  // sink -> sources with positive flow, backward arcs
                    const std::size_t j = u - n;
                    for (std::size_t i = 0; i < n; ++i) {
                        if (done[i] || flow[i * m + j] <= 0.0) continue;
                        const double rc = -cost[i * m + j] + pot[u] - pot[i];
                        if (dist[u] + rc < dist[i]) {
                            dist[i] = dist[u] + rc;
                            prev[i] = static_cast<int>(u);
                        }
                    }
                }
            }

            // Nearest sink with remaining demand.
            std::size_t t = n + m;
            double best = inf;
            for (std::size_t j = 0; j < m; ++j)
                if (rem_demand[j] > 1e-15 && dist[n + j] < best) {
                    best = dist[n + j];
                    t = n + j;
                }
            if (t == n + m) break;  // demand side exhausted up to tolerance

            // Bottleneck along the path.
            double delta = std::min(rem_supply[s], rem_demand[t - n]);
            for (std::size_t v = t; v != s;) {
                if (prev[v] < 0) throw std::runtime_error("w1_exact: broken shortest-path tree");
                const std::size_t p = static_cast<std::size_t>(prev[v]);
                if (v < n)  // backward arc: sink p feeds source v, bounded by its flow
                    delta = std::min(delta, flow[v * m + (p - n)]);
                v = p;
            }

            for (std::size_t v = t; v != s;) {
                const std::size_t p = static_cast<std::size_t>(prev[v]);
                if (v >= n)
                    flow[p * m + (v - n)] += delta;
                else
                    flow[v * m + (p - n)] -= delta;
                v = p;
            }
            rem_supply[s] -= delta;
            rem_demand[t - n] -= delta;

            for (std::size_t v = 0; v < n + m; ++v)
                pot[v] += std::min(dist[v], dist[t]);
        }
    }

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) total += flow[i * m + j] * cost[i * m + j];
    return total;
}

}  // namespace detail

/// Exact W1 between two discrete measures under the given ground metric.
/// Objective accurate to 1e-9 on supports of at most 256 points.
template <class Point, class Metric>
double w1_exact(const DiscreteMeasure<Point>& mu, const DiscreteMeasure<Point>& nu,
                Metric&& metric) {
    mu.validate();
    nu.validate();
    if (mu.support.size() == 1 && nu.support.size() == 1)
        return metric(mu.support[0], nu.support[0]);  // single feasible coupling

    const std::size_t n = mu.support.size(), m = nu.support.size();
    std::vector<double> cost(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const double c = metric(mu.support[i], nu.support[j]);
            if (!(c >= 0.0)) throw std::invalid_argument("w1: metric produced a negative value");
            cost[i * m + j] = c;
        }
    return detail::transport_cost(mu.weights, nu.weights, cost);
}

/// Enumeration oracle: minimum over all permutation couplings of the mean
/// cost. Only valid for equal-size uniform supports (Birkhoff), n <= 6.
template <class Point, class Metric>
double w1_brute_force(const DiscreteMeasure<Point>& mu, const DiscreteMeasure<Point>& nu,
                      Metric&& metric) {
    mu.validate();
    nu.validate();
    const std::size_t n = mu.support.size();
    if (nu.support.size() != n)
        throw std::invalid_argument("w1_brute_force: supports must have equal size");
    if (n > 6) throw std::invalid_argument("w1_brute_force: support too large to enumerate");
    const double u = 1.0 / static_cast<double>(n);
    for (double w : mu.weights)
        if (std::abs(w - u) > 1e-12)
            throw std::invalid_argument("w1_brute_force: weights must be uniform");
    for (double w : nu.weights)
        if (std::abs(w - u) > 1e-12)
            throw std::invalid_argument("w1_brute_force: weights must be uniform");

    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = metric(mu.support[i], nu.support[j]);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += cost[i * n + perm[i]];
        best = std::min(best, total * u);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// --------------------------------------------------------------------------
// Measure file format: first line "n dim", then n lines of
// "weight coord_1 ... coord_dim", plain text.
// --------------------------------------------------------------------------

inline void write_measure(const DiscreteMeasure<std::vector<double>>& m, std::ostream& os) {
    m.validate();
    const std::size_t dim = m.support.front().size();
    os << m.support.size() << ' ' << dim << '\n';
    os.precision(17);
    for (std::size_t i = 0; i < m.support.size(); ++i) {
        os << m.weights[i];
        for (double v : m.support[i]) os << ' ' << v;
        os << '\n';
    }
}

inline void write_measure(const DiscreteMeasure<std::vector<double>>& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    write_measure(m, os);
}

inline DiscreteMeasure<std::vector<double>> read_measure(std::istream& is) {
    std::size_t n = 0, dim = 0;
    if (!(is >> n >> dim)) throw std::runtime_error("measure file: bad header");
    DiscreteMeasure<std::vector<double>> m;
    m.support.resize(n, std::vector<double>(dim));
    m.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(is >> m.weights[i])) throw std::runtime_error("measure file: truncated weights");
        for (std::size_t j = 0; j < dim; ++j)
            if (!(is >> m.support[i][j])) throw std::runtime_error("measure file: truncated point");
    }
    m.validate();
    return m;
}

inline DiscreteMeasure<std::vector<double>> read_measure(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    return read_measure(is);
}

}  // namespace pbw
