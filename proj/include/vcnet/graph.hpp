#pragma once

// Temporal bipartite investor-firm multigraph and its two single-layer
// projections.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vcnet/csv.hpp"
#include "vcnet/date.hpp"
#include "vcnet/error.hpp"
#include "vcnet/ingest.hpp"

namespace vcnet {

using NodeIndex = std::uint32_t;

/// Undirected simple graph over lexicographically sorted string ids. Node
/// index order equals id order, so "lowest index" is the id tie-break.
class SimpleGraph {
 public:
  SimpleGraph() = default;

  /// `edges` are index pairs into `ids` (which must be sorted and unique).
  /// Self-loops and duplicates are discarded.
  SimpleGraph(std::vector<std::string> ids, std::vector<std::pair<NodeIndex, NodeIndex>> edges)
      : ids_(std::move(ids)), adj_(ids_.size()) {
    for (auto [u, v] : edges) {
      if (u == v) continue;
      adj_[u].push_back(v);
      adj_[v].push_back(u);
    }
    for (auto& nb : adj_) {
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
  }

  /// Convenience for tests: ids given in any order, edges as id pairs.
  static SimpleGraph from_id_edges(std::vector<std::string> ids,
                                   const std::vector<std::pair<std::string, std::string>>& edges) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::vector<std::pair<NodeIndex, NodeIndex>> e;
    auto at = [&](const std::string& s) {
      auto it = std::lower_bound(ids.begin(), ids.end(), s);
      if (it == ids.end() || *it != s) throw NotFoundError("unknown node '" + s + "'");
      return static_cast<NodeIndex>(it - ids.begin());
    };
    for (const auto& [a, b] : edges) e.emplace_back(at(a), at(b));
    return SimpleGraph(std::move(ids), std::move(e));
  }

  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::string& id(NodeIndex v) const { return ids_[v]; }
  std::span<const NodeIndex> neighbors(NodeIndex v) const { return adj_[v]; }
  std::size_t degree(NodeIndex v) const { return adj_[v].size(); }

  std::size_t edge_count() const noexcept {
    std::size_t s = 0;
    for (const auto& nb : adj_) s += nb.size();
    return s / 2;
  }

  bool has_edge(NodeIndex u, NodeIndex v) const {
    return std::binary_search(adj_[u].begin(), adj_[u].end(), v);
  }

  std::optional<NodeIndex> index_of(const std::string& s) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), s);
    if (it == ids_.end() || *it != s) return std::nullopt;
    return static_cast<NodeIndex>(it - ids_.begin());
  }

  /// Edge list with u < v, sorted.
  std::vector<std::pair<NodeIndex, NodeIndex>> edges() const {
    std::vector<std::pair<NodeIndex, NodeIndex>> e;
    for (NodeIndex u = 0; u < adj_.size(); ++u)
      for (NodeIndex v : adj_[u])
        if (u < v) e.emplace_back(u, v);
    return e;
  }

  /// Connected components, each sorted, ordered by smallest member.
  std::vector<std::vector<NodeIndex>> components() const {
    std::vector<int> comp(size(), -1);
    std::vector<std::vector<NodeIndex>> out;
    for (NodeIndex s = 0; s < size(); ++s) {
      if (comp[s] >= 0) continue;
      std::vector<NodeIndex> members{s};
      comp[s] = static_cast<int>(out.size());
      for (std::size_t h = 0; h < members.size(); ++h)
        for (NodeIndex w : adj_[members[h]])
          if (comp[w] < 0) {
            comp[w] = comp[s];
            members.push_back(w);
          }
      std::sort(members.begin(), members.end());
      out.push_back(std::move(members));
    }
    return out;
  }

 private:
  std::vector<std::string> ids_;
  std::vector<std::vector<NodeIndex>> adj_;
};

enum class Role { Firm, Investor, Both };
enum class Layer { Firm, Investor };

inline constexpr std::string_view to_string(Layer l) noexcept {
  return l == Layer::Firm ? "firm" : "investor";
}

struct BipartiteEdge {
  std::string investor_id;
  std::string firm_id;
  Date date;
  std::int64_t amount = 0;
  std::string round_id;
};

/// Investor-firm multigraph. Edges are held in date order, so the snapshot
/// of year Y is a prefix of the edge list and snapshots are nested.
class TemporalBipartiteGraph {
 public:
  static TemporalBipartiteGraph build(const std::vector<DealRecord>& deals) {
    TemporalBipartiteGraph g;
    g.edges_.reserve(deals.size());
    for (const auto& d : deals) g.edges_.push_back({d.investor_id, d.firm_id, d.date, d.amount, d.round_id});
    std::stable_sort(g.edges_.begin(), g.edges_.end(),
                     [](const BipartiteEdge& a, const BipartiteEdge& b) { return a.date < b.date; });
    for (const auto& e : g.edges_) {
      auto mark = [&](const std::string& id, Role r) {
        auto [it, inserted] = g.nodes_.emplace(id, r);
        if (!inserted && it->second != r) it->second = Role::Both;
      };
      mark(e.investor_id, Role::Investor);
      mark(e.firm_id, Role::Firm);
    }
    if (!g.edges_.empty()) {
      g.min_year_ = g.edges_.front().date.year;
      g.max_year_ = g.edges_.back().date.year;
    }
    return g;
  }

  bool empty() const noexcept { return edges_.empty(); }
  int min_year() const noexcept { return min_year_; }
  int max_year() const noexcept { return max_year_; }
  bool covers(int year) const noexcept { return !empty() && year >= min_year_ && year <= max_year_; }

  const std::map<std::string, Role>& nodes() const noexcept { return nodes_; }
  std::span<const BipartiteEdge> edges() const noexcept { return edges_; }

  /// Edges dated on or before Dec 31 of `year`.
  std::span<const BipartiteEdge> snapshot(int year) const {
    const Date end{year, 12, 31};
    auto it = std::upper_bound(edges_.begin(), edges_.end(), end,
                               [](const Date& d, const BipartiteEdge& e) { return d < e.date; });
    return {edges_.data(), static_cast<std::size_t>(it - edges_.begin())};
  }

  std::size_t node_count(Role r) const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [r](const auto& kv) { return kv.second == r; }));
  }

 private:
  std::map<std::string, Role> nodes_;
  std::vector<BipartiteEdge> edges_;
  int min_year_ = 0;
  int max_year_ = -1;
};

inline TemporalBipartiteGraph build_bipartite(const std::vector<DealRecord>& deals) {
  return TemporalBipartiteGraph::build(deals);
}

struct ProjectedGraph {
  Layer layer = Layer::Firm;
  int snapshot_year = 0;
  int window_years = 0;  // firm layer only
  SimpleGraph graph;
  /// Co-investment multiplicity per edge (u < v): distinct common investors
  /// (firm layer) or distinct common rounds (investor layer).
  std::map<std::pair<NodeIndex, NodeIndex>, std::uint32_t> weights;
  std::vector<std::string> warnings;
};

namespace detail {

inline ProjectedGraph finish_projection(
    Layer layer, int year, int window, const std::set<std::string>& node_set,
    const std::map<std::pair<std::string, std::string>, std::uint32_t>& pair_weights) {
  ProjectedGraph pg;
  pg.layer = layer;
  pg.snapshot_year = year;
  pg.window_years = window;
  std::vector<std::string> ids(node_set.begin(), node_set.end());
  auto at = [&](const std::string& s) {
    return static_cast<NodeIndex>(std::lower_bound(ids.begin(), ids.end(), s) - ids.begin());
  };
  std::vector<std::pair<NodeIndex, NodeIndex>> e;
  e.reserve(pair_weights.size());
  for (const auto& [pr, w] : pair_weights) {
    const NodeIndex a = at(pr.first), b = at(pr.second);
    e.emplace_back(a, b);
    pg.weights[{std::min(a, b), std::max(a, b)}] = w;
  }
  pg.graph = SimpleGraph(std::move(ids), std::move(e));
  return pg;
}

}  // namespace detail

/// Firm-layer projection: firms f1 != f2 are linked when one investor has
/// deals in both dated at most `window_years` x 365.25 days apart, both
/// within the snapshot.
inline ProjectedGraph project_firms(const TemporalBipartiteGraph& g, int snapshot_year,
                                    int window_years = 7) {
  if (window_years < 1) throw ConfigError("projection window must be >= 1 year");
  if (!g.covers(snapshot_year)) {
    ProjectedGraph pg;
    pg.layer = Layer::Firm;
    pg.snapshot_year = snapshot_year;
    pg.window_years = window_years;
    pg.warnings.push_back("snapshot year " + std::to_string(snapshot_year) +
                          " outside data range; empty projection");
    return pg;
  }
  const double max_gap = window_years * kDaysPerYear;
  std::set<std::string> firms;
  std::map<std::string, std::vector<std::pair<std::int64_t, const std::string*>>> by_investor;
  for (const auto& e : g.snapshot(snapshot_year)) {
    firms.insert(e.firm_id);
    by_investor[e.investor_id].emplace_back(e.date.serial(), &e.firm_id);
  }
  std::map<std::pair<std::string, std::string>, std::uint32_t> weights;
  for (auto& [inv, deals] : by_investor) {
    std::sort(deals.begin(), deals.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::set<std::pair<std::string, std::string>> linked;
    for (std::size_t i = 0; i < deals.size(); ++i)
      for (std::size_t j = i + 1; j < deals.size(); ++j) {
        if (static_cast<double>(deals[j].first - deals[i].first) > max_gap) break;
        const std::string& a = *deals[i].second;
        const std::string& b = *deals[j].second;
        if (a == b) continue;
        linked.emplace(std::min(a, b), std::max(a, b));
      }
    for (const auto& pr : linked) ++weights[pr];
  }
  return detail::finish_projection(Layer::Firm, snapshot_year, window_years, firms, weights);
}

/// Investor-layer projection: investors linked when both have a deal in the
/// same (firm, round) within the snapshot.
inline ProjectedGraph project_investors(const TemporalBipartiteGraph& g, int snapshot_year) {
  if (!g.covers(snapshot_year)) {
    ProjectedGraph pg;
    pg.layer = Layer::Investor;
    pg.snapshot_year = snapshot_year;
    pg.warnings.push_back("snapshot year " + std::to_string(snapshot_year) +
                          " outside data range; empty projection");
    return pg;
  }
  std::set<std::string> investors;
  std::map<std::pair<std::string, std::string>, std::set<std::string>> rounds;
  for (const auto& e : g.snapshot(snapshot_year)) {
    investors.insert(e.investor_id);
    rounds[{e.firm_id, e.round_id}].insert(e.investor_id);
  }
  std::map<std::pair<std::string, std::string>, std::uint32_t> weights;
  for (const auto& [key, members] : rounds) {
    for (auto a = members.begin(); a != members.end(); ++a)
      for (auto b = std::next(a); b != members.end(); ++b) ++weights[{*a, *b}];
  }
  return detail::finish_projection(Layer::Investor, snapshot_year, 0, investors, weights);
}

struct FirstRound {
  std::string round_id;
  Date date;
  std::int64_t amount_total = 0;
  std::vector<std::string> investors;  // sorted, distinct
};

/// Earliest round of `firm`; same-date ties go to the smallest round_id.
inline FirstRound first_round(const TemporalBipartiteGraph& g, const std::string& firm) {
  std::map<std::string, FirstRound> rounds;
  for (const auto& e : g.edges()) {
    if (e.firm_id != firm) continue;
    auto [it, inserted] = rounds.try_emplace(e.round_id);
    auto& r = it->second;
    if (inserted) {
      r.round_id = e.round_id;
      r.date = e.date;
    }
    r.date = std::min(r.date, e.date);
    r.amount_total += e.amount;
    if (std::find(r.investors.begin(), r.investors.end(), e.investor_id) == r.investors.end())
      r.investors.push_back(e.investor_id);
  }
  if (rounds.empty()) throw NotFoundError("no deals for firm '" + firm + "'");
  const FirstRound* best = nullptr;
  for (const auto& [rid, r] : rounds)  // map order = round_id order
    if (!best || r.date < best->date) best = &r;
  FirstRound out = *best;
  std::sort(out.investors.begin(), out.investors.end());
  return out;
}

/// First rounds of every firm in one pass.
inline std::map<std::string, FirstRound> first_rounds(const TemporalBipartiteGraph& g) {
  std::map<std::string, std::map<std::string, FirstRound>> all;
  for (const auto& e : g.edges()) {
    auto [it, inserted] = all[e.firm_id].try_emplace(e.round_id);
    auto& r = it->second;
    if (inserted) {
      r.round_id = e.round_id;
      r.date = e.date;
    }
    r.date = std::min(r.date, e.date);
    r.amount_total += e.amount;
    if (std::find(r.investors.begin(), r.investors.end(), e.investor_id) == r.investors.end())
      r.investors.push_back(e.investor_id);
  }
  std::map<std::string, FirstRound> out;
  for (auto& [firm, rounds] : all) {
    const FirstRound* best = nullptr;
    for (const auto& [rid, r] : rounds)
      if (!best || r.date < best->date) best = &r;
    FirstRound fr = *best;
    std::sort(fr.investors.begin(), fr.investors.end());
    out.emplace(firm, std::move(fr));
  }
  return out;
}

/// `proj_{layer}_{year}_w{window}.csv`; the investor layer has window 0.
inline std::string projection_filename(const ProjectedGraph& pg) {
  return "proj_" + std::string(to_string(pg.layer)) + "_" + std::to_string(pg.snapshot_year) +
         "_w" + std::to_string(pg.window_years) + ".csv";
}

inline void write_edge_list(std::ostream& os, const ProjectedGraph& pg) {
  csv::write_row(os, {"u", "v", "weight"});
  for (const auto& [uv, w] : pg.weights)
    csv::write_row(os, {pg.graph.id(uv.first), pg.graph.id(uv.second), std::to_string(w)});
}

}  // namespace vcnet
