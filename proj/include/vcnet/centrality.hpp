#pragma once

// Node statistics on unweighted projected graphs. Every function returns one
// value per node, indexed like SimpleGraph::ids().

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "vcnet/error.hpp"
#include "vcnet/graph.hpp"

namespace vcnet {

/// deg(v) / (n - 1).
inline std::vector<double> degree_centrality(const SimpleGraph& g) {
  const std::size_t n = g.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  for (NodeIndex v = 0; v < n; ++v) out[v] = static_cast<double>(g.degree(v)) / static_cast<double>(n - 1);
  return out;
}

/// Mean degree of the neighbors; 0 for isolated nodes.
inline std::vector<double> average_neighbor_degree(const SimpleGraph& g) {
  std::vector<double> out(g.size(), 0.0);
  for (NodeIndex v = 0; v < g.size(); ++v) {
    auto nb = g.neighbors(v);
    if (nb.empty()) continue;
    double s = 0.0;
    for (NodeIndex u : nb) s += static_cast<double>(g.degree(u));
    out[v] = s / static_cast<double>(nb.size());
  }
  return out;
}

/// Local clustering; 0 when deg(v) < 2.
inline std::vector<double> clustering(const SimpleGraph& g) {
  std::vector<double> out(g.size(), 0.0);
  for (NodeIndex v = 0; v < g.size(); ++v) {
    auto nb = g.neighbors(v);
    const std::size_t k = nb.size();
    if (k < 2) continue;
    std::size_t tri = 0;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j)
        if (g.has_edge(nb[i], nb[j])) ++tri;
    out[v] = static_cast<double>(tri) / (static_cast<double>(k) * static_cast<double>(k - 1) / 2.0);
  }
  return out;
}

/// k-core numbers by bucket peeling (Batagelj-Zaversnik).
inline std::vector<double> core_number(const SimpleGraph& g) {
  const std::size_t n = g.size();
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;
  std::vector<std::size_t> deg(n);
  std::size_t max_deg = 0;
  for (NodeIndex v = 0; v < n; ++v) max_deg = std::max(max_deg, deg[v] = g.degree(v));
  std::vector<std::size_t> bin(max_deg + 1, 0), pos(n), vert(n);
  for (std::size_t v = 0; v < n; ++v) ++bin[deg[v]];
  for (std::size_t d = 0, start = 0; d <= max_deg; ++d) {
    const std::size_t c = bin[d];
    bin[d] = start;
    start += c;
  }
  for (std::size_t v = 0; v < n; ++v) {
    pos[v] = bin[deg[v]]++;
    vert[pos[v]] = v;
  }
  for (std::size_t d = max_deg; d > 0; --d) bin[d] = bin[d - 1];
  bin[0] = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t v = vert[i];
    for (NodeIndex u : g.neighbors(static_cast<NodeIndex>(v))) {
      if (deg[u] > deg[v]) {
        const std::size_t du = deg[u], pu = pos[u], pw = bin[du], w = vert[pw];
        if (u != w) {
          pos[u] = pw;
          vert[pu] = w;
          pos[w] = pu;
          vert[pw] = u;
        }
        ++bin[du];
        --deg[u];
      }
    }
  }
  for (std::size_t v = 0; v < n; ++v) out[v] = static_cast<double>(deg[v]);
  return out;
}

namespace detail {

inline constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();

inline void bfs(const SimpleGraph& g, NodeIndex s, std::vector<std::size_t>& dist,
                std::vector<NodeIndex>& order) {
  std::fill(dist.begin(), dist.end(), kUnreached);
  order.clear();
  dist[s] = 0;
  order.push_back(s);
  for (std::size_t h = 0; h < order.size(); ++h) {
    const NodeIndex v = order[h];
    for (NodeIndex w : g.neighbors(v))
      if (dist[w] == kUnreached) {
        dist[w] = dist[v] + 1;
        order.push_back(w);
      }
  }
}

}  // namespace detail

/// Shortest-path betweenness (Brandes), normalized by 2/((n-1)(n-2)).
inline std::vector<double> betweenness(const SimpleGraph& g) {
  const std::size_t n = g.size();
  std::vector<double> bc(n, 0.0);
  if (n < 3) return bc;
  std::vector<std::size_t> dist(n);
  std::vector<double> sigma(n), delta(n);
  std::vector<NodeIndex> order;
  for (NodeIndex s = 0; s < n; ++s) {
    detail::bfs(g, s, dist, order);
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    sigma[s] = 1.0;
    for (NodeIndex v : order)
      for (NodeIndex w : g.neighbors(v))
        if (dist[w] == dist[v] + 1) sigma[w] += sigma[v];
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const NodeIndex w = *it;
      for (NodeIndex v : g.neighbors(w))
        if (dist[v] + 1 == dist[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      if (w != s) bc[w] += delta[w];
    }
  }
  // Each unordered pair was visited from both ends.
  const double scale = 1.0 / (static_cast<double>(n - 1) * static_cast<double>(n - 2));
  for (auto& b : bc) b *= scale;
  return bc;
}

/// Current-flow (random-walk) betweenness. For every component with at
/// least three nodes, a unit current is sent between every pair of nodes and
/// each node scores the current passing through it (half the sum of absolute
/// currents on its edges), excluding pairs it terminates. Normalized like
/// shortest-path betweenness with the whole-graph n. Uses the grounded
/// Laplacian inverse and sorted potential differences per edge.
inline std::vector<double> newman_betweenness(const SimpleGraph& g, double solve_tol = 1e-10) {
  const std::size_t n = g.size();
  std::vector<double> out(n, 0.0);
  if (n < 3) return out;
  for (const auto& comp : g.components()) {
    const std::size_t m = comp.size();
    if (m < 3) continue;
    std::vector<std::ptrdiff_t> local(n, -1);
    for (std::size_t i = 0; i < m; ++i) local[comp[i]] = static_cast<std::ptrdiff_t>(i);

    // Reduced Laplacian with the last component node grounded.
    const std::size_t r = m - 1;
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r));
    for (std::size_t i = 0; i < r; ++i) {
      const NodeIndex v = comp[i];
      lap(i, i) = static_cast<double>(g.degree(v));
      for (NodeIndex w : g.neighbors(v)) {
        const auto j = local[w];
        if (static_cast<std::size_t>(j) < r) lap(i, j) -= 1.0;
      }
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(lap);
    Eigen::MatrixXd inv_r = ldlt.solve(Eigen::MatrixXd::Identity(lap.rows(), lap.cols()));
    const double resid = (lap * inv_r - Eigen::MatrixXd::Identity(lap.rows(), lap.cols())).cwiseAbs().maxCoeff();
    if (!(resid < solve_tol * std::max(1.0, static_cast<double>(m))))
      throw ConvergenceError("current-flow Laplacian solve inaccurate", resid);
    Eigen::MatrixXd pot = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    pot.topLeftCorner(lap.rows(), lap.cols()) = inv_r;

    std::vector<double> throughput(m, 0.0);
    std::vector<double> row(m);
    for (std::size_t i = 0; i < m; ++i) {
      for (NodeIndex w : g.neighbors(comp[i])) {
        const auto j = static_cast<std::size_t>(local[w]);
        if (j <= i) continue;
        for (std::size_t s = 0; s < m; ++s) row[s] = pot(i, s) - pot(j, s);
        std::sort(row.begin(), row.end());
        double total = 0.0;  // sum over s<t of |row[s]-row[t]|
        for (std::size_t k = 0; k < m; ++k)
          total += row[k] * (2.0 * static_cast<double>(k) - static_cast<double>(m) + 1.0);
        throughput[i] += total;
        throughput[j] += total;
      }
    }
    // A pair's source or sink carries exactly one unit of current.
    for (std::size_t i = 0; i < m; ++i)
      out[comp[i]] = std::max(0.0, 0.5 * throughput[i] - 0.5 * static_cast<double>(m - 1));
  }
  const double scale = 2.0 / (static_cast<double>(n - 1) * static_cast<double>(n - 2));
  for (auto& v : out) v *= scale;
  return out;
}

/// Closeness with the component-size correction:
/// (r/(n-1)) * (r / sum of distances to the r reachable nodes); 0 if r = 0.
inline std::vector<double> closeness(const SimpleGraph& g) {
  const std::size_t n = g.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  std::vector<std::size_t> dist(n);
  std::vector<NodeIndex> order;
  for (NodeIndex v = 0; v < n; ++v) {
    detail::bfs(g, v, dist, order);
    const double reach = static_cast<double>(order.size() - 1);
    if (reach == 0.0) continue;
    double total = 0.0;
    for (NodeIndex u : order) total += static_cast<double>(dist[u]);
    out[v] = (reach / static_cast<double>(n - 1)) * (reach / total);
  }
  return out;
}

/// Sum of inverse distances over (n - 1); unreachable pairs contribute 0.
inline std::vector<double> harmonic(const SimpleGraph& g) {
  const std::size_t n = g.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  std::vector<std::size_t> dist(n);
  std::vector<NodeIndex> order;
  for (NodeIndex v = 0; v < n; ++v) {
    detail::bfs(g, v, dist, order);
    double s = 0.0;
    for (NodeIndex u : order)
      if (u != v) s += 1.0 / static_cast<double>(dist[u]);
    out[v] = s / static_cast<double>(n - 1);
  }
  return out;
}

struct PowerIterationOptions {
  double tol = 1e-10;
  std::size_t max_iter = 10000;
};

/// Dominant adjacency eigenvector per connected component, each component
/// scaled to unit Euclidean norm. Power iteration on A + I (the shift keeps
/// bipartite components from oscillating). Isolated nodes get 0.
inline std::vector<double> eigenvector(const SimpleGraph& g, PowerIterationOptions opt = {}) {
  std::vector<double> out(g.size(), 0.0);
  for (const auto& comp : g.components()) {
    const std::size_t m = comp.size();
    if (m < 2) continue;
    std::vector<double> x(m, 1.0 / std::sqrt(static_cast<double>(m))), y(m);
    std::vector<std::ptrdiff_t> local(g.size(), -1);
    for (std::size_t i = 0; i < m; ++i) local[comp[i]] = static_cast<std::ptrdiff_t>(i);
    double diff = 0.0;
    std::size_t it = 0;
    for (; it < opt.max_iter; ++it) {
      for (std::size_t i = 0; i < m; ++i) {
        double s = x[i];
        for (NodeIndex w : g.neighbors(comp[i])) s += x[static_cast<std::size_t>(local[w])];
        y[i] = s;
      }
      double norm = 0.0;
      for (double v : y) norm += v * v;
      norm = std::sqrt(norm);
      diff = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        y[i] /= norm;
        diff = std::max(diff, std::abs(y[i] - x[i]));
      }
      x.swap(y);
      if (diff < opt.tol) break;
    }
    if (it == opt.max_iter) throw ConvergenceError("eigenvector centrality did not converge", diff);
    for (std::size_t i = 0; i < m; ++i) out[comp[i]] = x[i];
  }
  return out;
}

/// PageRank with uniform teleport over all n nodes; the mass of isolated
/// (dangling) nodes is spread uniformly. Sums to 1.
inline std::vector<double> pagerank(const SimpleGraph& g, double damping = 0.85,
                                    PowerIterationOptions opt = {1e-15, 10000}) {
  const std::size_t n = g.size();
  if (n == 0) return {};
  if (!(damping >= 0.0 && damping < 1.0)) throw ConfigError("pagerank damping must lie in [0,1)");
  const double nn = static_cast<double>(n);
  std::vector<double> x(n, 1.0 / nn), y(n);
  double diff = 0.0;
  std::size_t it = 0;
  for (; it < opt.max_iter; ++it) {
    double dangling = 0.0;
    for (NodeIndex v = 0; v < n; ++v)
      if (g.degree(v) == 0) dangling += x[v];
    const double base = (1.0 - damping) / nn + damping * dangling / nn;
    std::fill(y.begin(), y.end(), base);
    for (NodeIndex v = 0; v < n; ++v) {
      const auto deg = g.degree(v);
      if (deg == 0) continue;
      const double share = damping * x[v] / static_cast<double>(deg);
      for (NodeIndex w : g.neighbors(v)) y[w] += share;
    }
    diff = 0.0;
    for (NodeIndex v = 0; v < n; ++v) diff += std::abs(y[v] - x[v]);
    x.swap(y);
    if (diff < opt.tol * nn) break;
  }
  if (it == opt.max_iter) throw ConvergenceError("pagerank did not converge", diff);
  double total = 0.0;
  for (double v : x) total += v;
  for (double& v : x) v /= total;
  return x;
}

/// VoteRank positions (1 = strongest spreader). Unselected nodes share
/// rank (#selected + 1).
inline std::vector<double> voterank(const SimpleGraph& g) {
  const std::size_t n = g.size();
  std::vector<double> rank(n, 0.0);
  if (n == 0) return rank;
  const double mean_degree = 2.0 * static_cast<double>(g.edge_count()) / static_cast<double>(n);
  std::vector<double> ability(n, 1.0);
  std::vector<bool> selected(n, false);
  std::size_t n_selected = 0;
  constexpr double kZero = 1e-12;
  while (n_selected < n && mean_degree > 0.0) {
    std::optional<NodeIndex> best;
    double best_score = 0.0;
    for (NodeIndex v = 0; v < n; ++v) {
      if (selected[v]) continue;
      double s = 0.0;
      for (NodeIndex u : g.neighbors(v)) s += ability[u];
      if (!best || s > best_score) {
        best = v;
        best_score = s;
      }
    }
    if (!best || best_score <= kZero) break;
    selected[*best] = true;
    rank[*best] = static_cast<double>(++n_selected);
    ability[*best] = 0.0;
    for (NodeIndex u : g.neighbors(*best)) ability[u] = std::max(0.0, ability[u] - 1.0 / mean_degree);
  }
  for (NodeIndex v = 0; v < n; ++v)
    if (!selected[v]) rank[v] = static_cast<double>(n_selected + 1);
  return rank;
}

// ---------------------------------------------------------------------------
// Frames

enum class Measure : std::size_t {
  Degree,
  AverageNeighborDegree,
  Betweenness,
  NewmanBetweenness,
  Closeness,
  Harmonic,
  Eigenvector,
  PageRank,
  Clustering,
  CoreNumber,
  VoteRank,
};

inline constexpr std::size_t kMeasureCount = 11;

inline constexpr std::array<Measure, kMeasureCount> kAllMeasures = {
    Measure::Degree,     Measure::AverageNeighborDegree, Measure::Betweenness,
    Measure::NewmanBetweenness, Measure::Closeness,      Measure::Harmonic,
    Measure::Eigenvector, Measure::PageRank,             Measure::Clustering,
    Measure::CoreNumber, Measure::VoteRank};

inline constexpr std::string_view measure_name(Measure m) noexcept {
  constexpr std::string_view names[] = {
      "degree_centrality",     "average_neighbor_degree", "betweenness_centrality",
      "newman_betweenness_centrality", "closeness_centrality", "harmonic_centrality",
      "eigenvector_centrality", "pagerank",               "clustering",
      "core_number",            "voterank"};
  return names[static_cast<std::size_t>(m)];
}

/// Core number is only reported on the firm layer.
inline constexpr bool measure_on_layer(Measure m, Layer l) noexcept {
  return m != Measure::CoreNumber || l == Layer::Firm;
}

struct CentralityFrame {
  int snapshot_year = 0;
  Layer layer = Layer::Firm;
  std::vector<std::string> ids;
  std::array<std::vector<double>, kMeasureCount> values;  // empty when not on layer

  const std::vector<double>& operator[](Measure m) const { return values[static_cast<std::size_t>(m)]; }

  std::optional<std::size_t> index_of(const std::string& id) const {
    auto it = std::lower_bound(ids.begin(), ids.end(), id);
    if (it == ids.end() || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - ids.begin());
  }
};

inline std::vector<double> compute_measure(const SimpleGraph& g, Measure m, double damping = 0.85) {
  switch (m) {
    case Measure::Degree: return degree_centrality(g);
    case Measure::AverageNeighborDegree: return average_neighbor_degree(g);
    case Measure::Betweenness: return betweenness(g);
    case Measure::NewmanBetweenness: return newman_betweenness(g);
    case Measure::Closeness: return closeness(g);
    case Measure::Harmonic: return harmonic(g);
    case Measure::Eigenvector: return eigenvector(g);
    case Measure::PageRank: return pagerank(g, damping);
    case Measure::Clustering: return clustering(g);
    case Measure::CoreNumber: return core_number(g);
    case Measure::VoteRank: return voterank(g);
  }
  return {};
}

inline CentralityFrame compute_frame(const ProjectedGraph& pg, double damping = 0.85) {
  CentralityFrame f;
  f.snapshot_year = pg.snapshot_year;
  f.layer = pg.layer;
  f.ids = pg.graph.ids();
  for (Measure m : kAllMeasures)
    if (measure_on_layer(m, pg.layer)) f.values[static_cast<std::size_t>(m)] = compute_measure(pg.graph, m, damping);
  return f;
}

}  // namespace vcnet
