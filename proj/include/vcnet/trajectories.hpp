#pragma once

// Aligned cumulative funding curves on a yearly grid, and per-subsector
// functional k-means that splits firms into HIGH and LOW funding regimes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "vcnet/csv.hpp"
#include "vcnet/error.hpp"
#include "vcnet/ingest.hpp"
#include "vcnet/rng.hpp"

namespace vcnet {

struct Trajectory {
  std::string firm_id;
  std::string subsector;
  int first_year = 0;
  std::vector<std::int64_t> values;  // values[t] = raised through calendar year first_year + t
};

struct Exclusion {
  std::string firm_id;
  std::string reason;
};

struct TrajectorySet {
  int window = 0;
  int last_data_year = 0;
  std::vector<Trajectory> trajectories;  // sorted by firm_id
  std::vector<Exclusion> exclusions;     // sorted by firm_id
};

inline constexpr std::string_view kFewInvestments = "fewer than two investments";
inline constexpr std::string_view kUnknownSubsector = "unknown subsector";
inline constexpr std::string_view kWindowOutsideData = "window extends past the data range";

/// Grid point t sums every deal dated in calendar years first_year..first_year+t.
/// A firm is kept when it has at least two deal records inside the window, a
/// known subsector, and first_year + W <= last year present in the data.
inline TrajectorySet build_trajectories(const Dataset& data, int window) {
  if (window < 1) throw ConfigError("trajectory window must be >= 1");
  TrajectorySet out;
  out.window = window;
  if (data.deals.empty()) return out;

  std::map<std::string, std::vector<const DealRecord*>> by_firm;
  int last = std::numeric_limits<int>::min();
  for (const auto& d : data.deals) {
    by_firm[d.firm_id].push_back(&d);
    last = std::max(last, d.date.year);
  }
  out.last_data_year = last;
  const auto meta = data.firm_map();

  for (const auto& [firm, deals] : by_firm) {
    int first = std::numeric_limits<int>::max();
    for (const auto* d : deals) first = std::min(first, d->date.year);
    Trajectory t;
    t.firm_id = firm;
    t.first_year = first;
    t.values.assign(static_cast<std::size_t>(window) + 1, 0);
    std::size_t inside = 0;
    for (const auto* d : deals) {
      const int off = d->date.year - first;
      if (off > window) continue;
      ++inside;
      for (int k = off; k <= window; ++k) t.values[static_cast<std::size_t>(k)] += d->amount;
    }
    auto it = meta.find(firm);
    t.subsector = it == meta.end() ? std::string() : it->second.subsector;

    if (inside < 2)
      out.exclusions.push_back({firm, std::string(kFewInvestments)});
    else if (t.subsector.empty())
      out.exclusions.push_back({firm, std::string(kUnknownSubsector)});
    else if (first + window > last)
      out.exclusions.push_back({firm, std::string(kWindowOutsideData)});
    else
      out.trajectories.push_back(std::move(t));
  }
  return out;
}

enum class Regime { Low, High };

inline constexpr std::string_view to_string(Regime r) noexcept { return r == Regime::High ? "HIGH" : "LOW"; }

struct KMeansOptions {
  int k = 2;
  int n_init = 100;
  int max_iter = 500;
  bool log_scale = true;  // cluster log(1 + value) curves
  std::uint64_t seed = 7;
};

struct SubsectorClustering {
  std::string subsector;
  std::vector<std::size_t> members;          // indices into the input trajectories
  std::vector<int> labels;                   // cluster per member
  std::vector<std::vector<double>> centroids;  // k curves in the clustering scale
  std::vector<std::size_t> cluster_size;
  int high_cluster = -1;  // -1 when the subsector was not clustered
  double objective = 0.0;  // within-cluster weighted sum of squares
  int best_restart = -1;
  int iterations = 0;
};

struct ClusterAssignment {
  std::vector<std::string> firm_ids;  // aligned with the input trajectories
  std::vector<Regime> regime;
  std::vector<SubsectorClustering> subsectors;  // sorted by subsector
  std::vector<std::string> warnings;

  Regime of(const std::string& firm) const {
    auto it = std::lower_bound(firm_ids.begin(), firm_ids.end(), firm);
    if (it == firm_ids.end() || *it != firm) throw NotFoundError("no regime for firm '" + firm + "'");
    return regime[static_cast<std::size_t>(it - firm_ids.begin())];
  }
};

/// Trapezoidal weights on the unit-spaced grid 0..W.
inline std::vector<double> trapezoid_weights(std::size_t points) {
  std::vector<double> w(points, 1.0);
  if (points > 1) w.front() = w.back() = 0.5;
  return w;
}

namespace detail {

struct LloydResult {
  std::vector<int> labels;
  std::vector<std::vector<double>> centroids;
  double objective = 0.0;
  int iterations = 0;
};

inline double curve_dist2(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) s += w[t] * (a[t] - b[t]) * (a[t] - b[t]);
  return s;
}

inline double kmeans_objective(const std::vector<std::vector<double>>& x, const std::vector<int>& labels,
                               const std::vector<std::vector<double>>& c, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += curve_dist2(x[i], c[static_cast<std::size_t>(labels[i])], w);
  return s;
}

inline void update_centroids(const std::vector<std::vector<double>>& x, const std::vector<int>& labels,
                             std::vector<std::vector<double>>& c) {
  std::vector<std::size_t> count(c.size(), 0);
  std::vector<std::vector<double>> sum(c.size(), std::vector<double>(x.front().size(), 0.0));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto l = static_cast<std::size_t>(labels[i]);
    ++count[l];
    for (std::size_t t = 0; t < x[i].size(); ++t) sum[l][t] += x[i][t];
  }
  for (std::size_t j = 0; j < c.size(); ++j)
    if (count[j])
      for (std::size_t t = 0; t < sum[j].size(); ++t) c[j][t] = sum[j][t] / static_cast<double>(count[j]);
}

/// Lloyd iterations from the given centroids. An empty cluster takes over
/// the point farthest from its centroid (when that distance is positive and
/// the donor cluster keeps a member), which never increases the objective.
inline LloydResult lloyd(const std::vector<std::vector<double>>& x, std::vector<std::vector<double>> c,
                         const std::vector<double>& w, int max_iter) {
  const std::size_t n = x.size(), k = c.size();
  LloydResult r;
  r.labels.assign(n, -1);
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = curve_dist2(x[i], c[0], w);
      for (std::size_t j = 1; j < k; ++j) {
        const double d = curve_dist2(x[i], c[j], w);
        if (d < bd) {
          bd = d;
          best = static_cast<int>(j);
        }
      }
      if (r.labels[i] != best) {
        r.labels[i] = best;
        changed = true;
      }
    }
    r.iterations = it + 1;
    if (!changed) break;
    update_centroids(x, r.labels, c);

    std::vector<std::size_t> count(k, 0);
    for (int l : r.labels) ++count[static_cast<std::size_t>(l)];
    for (std::size_t j = 0; j < k; ++j) {
      if (count[j]) continue;
      std::size_t far = n;
      double fd = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto l = static_cast<std::size_t>(r.labels[i]);
        if (count[l] < 2) continue;
        const double d = curve_dist2(x[i], c[l], w);
        if (d > fd) {
          fd = d;
          far = i;
        }
      }
      if (far == n) continue;  // every point sits on its centroid
      --count[static_cast<std::size_t>(r.labels[far])];
      r.labels[far] = static_cast<int>(j);
      ++count[j];
      update_centroids(x, r.labels, c);
    }

    const double obj = kmeans_objective(x, r.labels, c, w);
    if (obj > prev + 1e-9 * (1.0 + std::abs(prev)))
      throw Error("functional k-means: objective increased (" + std::to_string(prev) + " -> " +
                  std::to_string(obj) + ")");
    prev = obj;
  }
  r.centroids = std::move(c);
  r.objective = kmeans_objective(x, r.labels, r.centroids, w);
  return r;
}

}  // namespace detail

/// Functional k-means run separately per subsector, keeping the restart with
/// the smallest objective (earliest restart on ties). The cluster whose
/// centroid ends highest is HIGH; every other cluster is LOW. Restart r of
/// subsector s draws its initial centroids from derive_seed(seed, "kmeans/" + s, r).
inline ClusterAssignment functional_kmeans(const std::vector<Trajectory>& trajs, const KMeansOptions& opt = {}) {
  if (opt.k < 1) throw ConfigError("kmeans k must be >= 1");
  if (opt.n_init < 1) throw ConfigError("kmeans n_init must be >= 1");
  ClusterAssignment ca;
  std::vector<std::size_t> order(trajs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return trajs[a].firm_id < trajs[b].firm_id; });
  std::vector<std::size_t> pos(trajs.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    ca.firm_ids.push_back(trajs[order[i]].firm_id);
    pos[order[i]] = i;
  }
  ca.regime.assign(trajs.size(), Regime::Low);

  std::map<std::string, std::vector<std::size_t>> by_sub;
  for (std::size_t i = 0; i < trajs.size(); ++i) by_sub[trajs[i].subsector].push_back(i);

  const auto k = static_cast<std::size_t>(opt.k);
  for (const auto& [sub, members] : by_sub) {
    SubsectorClustering sc;
    sc.subsector = sub;
    sc.members = members;
    if (members.size() < k) {
      ca.warnings.push_back("subsector '" + sub + "' has " + std::to_string(members.size()) + " firms (< k=" +
                            std::to_string(k) + "); all assigned LOW");
      sc.labels.assign(members.size(), 0);
      ca.subsectors.push_back(std::move(sc));
      continue;
    }
    std::vector<std::vector<double>> x;
    for (std::size_t i : members) {
      std::vector<double> v;
      for (auto a : trajs[i].values) v.push_back(opt.log_scale ? std::log1p(static_cast<double>(a)) : static_cast<double>(a));
      x.push_back(std::move(v));
    }
    const auto w = trapezoid_weights(x.front().size());

    detail::LloydResult best;
    best.objective = std::numeric_limits<double>::infinity();
    for (int r = 0; r < opt.n_init; ++r) {
      Rng rng(derive_seed(opt.seed, "kmeans/" + sub, static_cast<std::uint64_t>(r)));
      std::vector<std::vector<double>> init;
      for (auto i : rng.sample_without_replacement(x.size(), k)) init.push_back(x[i]);
      auto res = detail::lloyd(x, std::move(init), w, opt.max_iter);
      if (res.objective < best.objective) {
        best = std::move(res);
        sc.best_restart = r;
      }
    }
    sc.labels = best.labels;
    sc.centroids = best.centroids;
    sc.objective = best.objective;
    sc.iterations = best.iterations;
    sc.cluster_size.assign(k, 0);
    for (int l : sc.labels) ++sc.cluster_size[static_cast<std::size_t>(l)];

    std::size_t nonempty = 0;
    for (auto s : sc.cluster_size) nonempty += s > 0;
    if (nonempty < 2) {
      ca.warnings.push_back("subsector '" + sub + "' collapsed to a single cluster; all assigned LOW");
    } else {
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j)
        if (sc.cluster_size[j] && sc.centroids[j].back() > top) {
          top = sc.centroids[j].back();
          sc.high_cluster = static_cast<int>(j);
        }
      for (std::size_t m = 0; m < members.size(); ++m)
        if (sc.labels[m] == sc.high_cluster) ca.regime[pos[members[m]]] = Regime::High;
    }
    ca.subsectors.push_back(std::move(sc));
  }
  return ca;
}

struct RegimeRates {
  std::size_t n_high = 0;
  std::size_t n_low = 0;
  double share_high = 0.0;
};

inline RegimeRates regime_rates(std::size_t n_high, std::size_t n_low) {
  RegimeRates r{n_high, n_low, 0.0};
  if (n_high + n_low) r.share_high = static_cast<double>(n_high) / static_cast<double>(n_high + n_low);
  return r;
}

inline RegimeRates regime_rates(const ClusterAssignment& ca) {
  const auto h = static_cast<std::size_t>(std::count(ca.regime.begin(), ca.regime.end(), Regime::High));
  return regime_rates(h, ca.regime.size() - h);
}

inline void write_trajectories(std::ostream& os, const TrajectorySet& ts) {
  std::vector<std::string> header{"firm_id", "subsector"};
  for (int t = 0; t <= ts.window; ++t) header.push_back("t" + std::to_string(t));
  csv::write_row(os, header);
  for (const auto& tr : ts.trajectories) {
    std::vector<std::string> row{tr.firm_id, tr.subsector};
    for (auto v : tr.values) row.push_back(std::to_string(v));
    csv::write_row(os, row);
  }
}

/// Inverse of write_trajectories; first_year is not part of the file.
inline std::vector<Trajectory> read_trajectories(std::istream& is) {
  const auto t = csv::read_table(is);
  if (t.header.size() < 3 || t.header[0] != "firm_id" || t.header[1] != "subsector")
    throw SchemaError("trajectories.csv: unexpected header");
  std::vector<Trajectory> out;
  for (const auto& r : t.rows) {
    if (r.size() != t.header.size()) throw SchemaError("trajectories.csv: ragged row");
    Trajectory tr;
    tr.firm_id = r[0];
    tr.subsector = r[1];
    for (std::size_t i = 2; i < r.size(); ++i) tr.values.push_back(std::stoll(r[i]));
    out.push_back(std::move(tr));
  }
  return out;
}

inline void write_exclusions(std::ostream& os, const TrajectorySet& ts) {
  csv::write_row(os, {"firm_id", "reason"});
  for (const auto& e : ts.exclusions) csv::write_row(os, {e.firm_id, e.reason});
}

inline void write_assignment(std::ostream& os, const ClusterAssignment& ca) {
  csv::write_row(os, {"firm_id", "regime"});
  for (std::size_t i = 0; i < ca.firm_ids.size(); ++i)
    csv::write_row(os, {ca.firm_ids[i], std::string(to_string(ca.regime[i]))});
}

inline std::map<std::string, Regime> read_assignment(std::istream& is) {
  const auto t = csv::read_table(is);
  if (t.header != std::vector<std::string>{"firm_id", "regime"}) throw SchemaError("regimes.csv: unexpected header");
  std::map<std::string, Regime> out;
  for (const auto& r : t.rows) {
    if (r.size() != 2 || (r[1] != "HIGH" && r[1] != "LOW")) throw SchemaError("regimes.csv: bad row");
    out[r[0]] = r[1] == "HIGH" ? Regime::High : Regime::Low;
  }
  return out;
}

/// One row per (subsector, cluster) with the centroid in the clustering scale.
inline void write_centroids(std::ostream& os, const ClusterAssignment& ca, int window) {
  std::vector<std::string> header{"subsector", "cluster", "regime", "size", "wss"};
  for (int t = 0; t <= window; ++t) header.push_back("t" + std::to_string(t));
  csv::write_row(os, header);
  for (const auto& sc : ca.subsectors)
    for (std::size_t j = 0; j < sc.centroids.size(); ++j) {
      std::vector<std::string> row{sc.subsector, std::to_string(j),
                                   static_cast<int>(j) == sc.high_cluster ? "HIGH" : "LOW",
                                   std::to_string(sc.cluster_size[j]), csv::fmt(sc.objective)};
      for (double v : sc.centroids[j]) row.push_back(csv::fmt(v));
      csv::write_row(os, row);
    }
}

}  // namespace vcnet
