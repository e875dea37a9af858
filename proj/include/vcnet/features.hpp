#pragma once

// Covariate preprocessing (log1p for right-skewed columns, z-scoring), the
// absolute-correlation complete-linkage dendrogram, group cuts, and the
// one-covariate-per-group configuration product.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vcnet/csv.hpp"
#include "vcnet/error.hpp"

namespace vcnet {

struct ColumnTransform {
  std::string name;
  bool log = false;   // x -> log(1 + x) applied before standardizing
  double skewness = 0.0;
  double mean = 0.0;  // of the (possibly logged) column
  double sd = 0.0;
  bool dropped = false;  // zero variance
};

/// Rows are observations (firms), columns named covariates.
struct FeatureMatrix {
  std::vector<std::string> row_ids;
  std::vector<std::string> names;
  Eigen::MatrixXd X;
  std::vector<ColumnTransform> ledger;  // one entry per input column, dropped ones included
  std::vector<std::string> warnings;

  std::ptrdiff_t column(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? -1 : it - names.begin();
  }
};

/// Standardized third moment with population moments (m3 / m2^1.5); 0 for a
/// constant column.
inline double sample_skewness(const Eigen::VectorXd& x) {
  const auto n = static_cast<double>(x.size());
  if (n < 1) return 0.0;
  const double mean = x.mean();
  const Eigen::ArrayXd d = x.array() - mean;
  const double m2 = d.square().sum() / n;
  const double m3 = d.cube().sum() / n;
  return m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
}

namespace detail {

inline void standardize_column(Eigen::Ref<Eigen::VectorXd> col, ColumnTransform& t) {
  if (t.log) col = col.array().log1p().matrix();
  const auto n = static_cast<double>(col.size());
  t.mean = col.mean();
  t.sd = n > 1 ? std::sqrt((col.array() - t.mean).square().sum() / (n - 1.0)) : 0.0;
  // Relative test: a column of identical values can pick up rounding noise.
  t.dropped = !(t.sd > 1e-12 * std::max(1.0, std::abs(t.mean)));
  if (!t.dropped) col = ((col.array() - t.mean) / t.sd).matrix();
}

}  // namespace detail

/// Log-transform columns whose skewness exceeds `skew_threshold`, then
/// z-score with the n-1 standard deviation. Zero-variance columns are
/// removed and reported.
inline FeatureMatrix preprocess(const std::vector<std::string>& row_ids, const std::vector<std::string>& names,
                                const Eigen::MatrixXd& raw, double skew_threshold = 1.0) {
  if (static_cast<std::size_t>(raw.cols()) != names.size() ||
      static_cast<std::size_t>(raw.rows()) != row_ids.size())
    throw ConfigError("preprocess: matrix shape does not match names");
  FeatureMatrix fm;
  fm.row_ids = row_ids;
  std::vector<Eigen::VectorXd> kept;
  for (std::size_t j = 0; j < names.size(); ++j) {
    ColumnTransform t;
    t.name = names[j];
    Eigen::VectorXd col = raw.col(static_cast<Eigen::Index>(j));
    t.skewness = sample_skewness(col);
    t.log = t.skewness > skew_threshold;
    if (t.log && col.size() > 0 && col.minCoeff() <= -1.0) {
      t.log = false;
      fm.warnings.push_back("column '" + t.name + "' is skewed but has values <= -1; log skipped");
    }
    detail::standardize_column(col, t);
    if (t.dropped)
      fm.warnings.push_back("column '" + t.name + "' has zero variance; excluded");
    else {
      fm.names.push_back(t.name);
      kept.push_back(std::move(col));
    }
    fm.ledger.push_back(std::move(t));
  }
  fm.X.resize(static_cast<Eigen::Index>(row_ids.size()), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) fm.X.col(static_cast<Eigen::Index>(j)) = kept[j];
  return fm;
}

/// Re-apply a recorded ledger to new rows of the same raw columns, so that
/// subsets are transformed exactly like the data the ledger came from.
inline FeatureMatrix apply_transforms(const std::vector<std::string>& row_ids, const std::vector<std::string>& names,
                                      const Eigen::MatrixXd& raw, const std::vector<ColumnTransform>& ledger) {
  FeatureMatrix fm;
  fm.row_ids = row_ids;
  fm.ledger = ledger;
  std::vector<Eigen::VectorXd> kept;
  for (const auto& t : ledger) {
    if (t.dropped) continue;
    auto it = std::find(names.begin(), names.end(), t.name);
    if (it == names.end()) throw SchemaError("apply_transforms: missing column '" + t.name + "'");
    Eigen::VectorXd col = raw.col(static_cast<Eigen::Index>(it - names.begin()));
    if (t.log) col = col.array().log1p().matrix();
    col = ((col.array() - t.mean) / t.sd).matrix();
    fm.names.push_back(t.name);
    kept.push_back(std::move(col));
  }
  fm.X.resize(static_cast<Eigen::Index>(row_ids.size()), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) fm.X.col(static_cast<Eigen::Index>(j)) = kept[j];
  return fm;
}

inline double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double den = std::sqrt(da.square().sum() * db.square().sum());
  return den > 0.0 ? (da * db).sum() / den : 0.0;
}

struct Merge {
  std::size_t left = 0;   // cluster ids: leaves 0..n-1, merge s creates n+s
  std::size_t right = 0;
  double height = 0.0;
  std::size_t size = 0;
};

struct Dendrogram {
  std::vector<std::string> leaves;
  std::vector<Merge> merges;  // n-1 entries, in merge order

  /// Left-first depth-first leaf order from the root.
  std::vector<std::size_t> leaf_order() const {
    const std::size_t n = leaves.size();
    if (n == 0) return {};
    std::vector<std::size_t> out;
    std::vector<std::size_t> stack{merges.empty() ? 0 : n + merges.size() - 1};
    while (!stack.empty()) {
      const std::size_t c = stack.back();
      stack.pop_back();
      if (c < n) {
        out.push_back(c);
        continue;
      }
      stack.push_back(merges[c - n].right);
      stack.push_back(merges[c - n].left);
    }
    return out;
  }
};

/// Complete-linkage clustering on d(a,b) = 1 - |pearson(a,b)|. Among equal
/// distances the pair with the lexicographically smallest (id, id) merges
/// first; the smaller id becomes the left child.
inline Dendrogram correlation_dendrogram(const std::vector<std::string>& names, const Eigen::MatrixXd& X) {
  const std::size_t n = names.size();
  if (static_cast<std::size_t>(X.cols()) != n) throw ConfigError("dendrogram: matrix shape does not match names");
  Dendrogram dg;
  dg.leaves = names;
  if (n < 2) return dg;

  std::vector<std::vector<double>> d(2 * n - 1, std::vector<double>(2 * n - 1, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double r = pearson(X.col(static_cast<Eigen::Index>(i)), X.col(static_cast<Eigen::Index>(j)));
      d[i][j] = d[j][i] = std::max(0.0, 1.0 - std::abs(r));
    }
  std::vector<std::size_t> active(n), size(2 * n - 1, 1);
  for (std::size_t i = 0; i < n; ++i) active[i] = i;

  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t ba = 0, bb = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t x = 0; x < active.size(); ++x)
      for (std::size_t y = x + 1; y < active.size(); ++y)
        if (d[active[x]][active[y]] < best) {  // strict: first pair in id order wins ties
          best = d[active[x]][active[y]];
          ba = x;
          bb = y;
        }
    const std::size_t a = active[ba], b = active[bb], c = n + step;
    size[c] = size[a] + size[b];
    dg.merges.push_back({a, b, best, size[c]});
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bb));
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(ba));
    for (std::size_t o : active) d[c][o] = d[o][c] = std::max(d[a][o], d[b][o]);
    active.push_back(c);  // ids grow, so `active` stays sorted
  }
  return dg;
}

struct FeatureGrouping {
  std::vector<std::string> names;  // leaf order of the dendrogram input
  std::vector<int> group;          // 1..k per name
  int k = 0;

  /// Member indices (into `names`) for each group 1..k, ascending.
  std::vector<std::vector<std::size_t>> members() const {
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < names.size(); ++i) out[static_cast<std::size_t>(group[i] - 1)].push_back(i);
    return out;
  }
};

/// Stop after (n - k) merges. Groups are numbered 1..k in order of first
/// appearance along the dendrogram's leaf order.
inline FeatureGrouping cut_groups(const Dendrogram& dg, int k) {
  const std::size_t n = dg.leaves.size();
  if (k < 1 || static_cast<std::size_t>(k) > n)
    throw ConfigError("cut_groups: k=" + std::to_string(k) + " must lie in [1, " + std::to_string(n) + "]");
  std::vector<std::size_t> parent(2 * n - 1);
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t s = 0; s < n - static_cast<std::size_t>(k); ++s) {
    parent[dg.merges[s].left] = n + s;
    parent[dg.merges[s].right] = n + s;
  }
  FeatureGrouping fg;
  fg.names = dg.leaves;
  fg.k = k;
  fg.group.assign(n, 0);
  std::map<std::size_t, int> label;
  for (std::size_t leaf : dg.leaf_order()) {
    const std::size_t root = find(leaf);
    auto [it, inserted] = label.emplace(root, static_cast<int>(label.size()) + 1);
    fg.group[leaf] = it->second;
  }
  return fg;
}

/// Cartesian product of group members (indices into `names`), group 1 first,
/// the last group varying fastest.
inline std::vector<std::vector<std::size_t>> enumerate_configs(const FeatureGrouping& fg) {
  const auto groups = fg.members();
  std::vector<std::vector<std::size_t>> out;
  if (groups.empty()) return out;
  std::vector<std::size_t> pos(groups.size(), 0);
  while (true) {
    std::vector<std::size_t> cfg;
    for (std::size_t g = 0; g < groups.size(); ++g) cfg.push_back(groups[g][pos[g]]);
    out.push_back(std::move(cfg));
    std::size_t g = groups.size();
    while (g > 0) {
      --g;
      if (++pos[g] < groups[g].size()) break;
      pos[g] = 0;
      if (g == 0) return out;
    }
  }
}

inline std::size_t config_count(const FeatureGrouping& fg) {
  std::size_t p = fg.k > 0 ? 1 : 0;
  for (const auto& m : fg.members()) p *= m.size();
  return p;
}

inline void write_grouping(std::ostream& os, const FeatureGrouping& fg) {
  csv::write_row(os, {"covariate", "group"});
  for (std::size_t i = 0; i < fg.names.size(); ++i) csv::write_row(os, {fg.names[i], std::to_string(fg.group[i])});
}

inline void write_dendrogram(std::ostream& os, const Dendrogram& dg) {
  csv::write_row(os, {"step", "left", "right", "height"});
  for (std::size_t s = 0; s < dg.merges.size(); ++s)
    csv::write_row(os, {std::to_string(s), std::to_string(dg.merges[s].left), std::to_string(dg.merges[s].right),
                        csv::fmt(dg.merges[s].height)});
}

/// Leaf ids used by the merge list.
inline void write_dendrogram_leaves(std::ostream& os, const Dendrogram& dg) {
  csv::write_row(os, {"id", "covariate"});
  for (std::size_t i = 0; i < dg.leaves.size(); ++i) csv::write_row(os, {std::to_string(i), dg.leaves[i]});
}

inline void write_transform_ledger(std::ostream& os, const std::vector<ColumnTransform>& ledger) {
  csv::write_row(os, {"covariate", "transform", "skewness", "mean", "sd", "status"});
  for (const auto& t : ledger)
    csv::write_row(os, {t.name, t.log ? "log1p" : "none", csv::fmt(t.skewness), csv::fmt(t.mean), csv::fmt(t.sd),
                        t.dropped ? "dropped" : "kept"});
}

inline std::vector<ColumnTransform> read_transform_ledger(std::istream& is) {
  const auto t = csv::read_table(is);
  if (t.header != std::vector<std::string>{"covariate", "transform", "skewness", "mean", "sd", "status"})
    throw SchemaError("transforms.csv: unexpected header");
  std::vector<ColumnTransform> out;
  for (const auto& r : t.rows) {
    if (r.size() != 6) throw SchemaError("transforms.csv: ragged row");
    ColumnTransform c;
    c.name = r[0];
    c.log = r[1] == "log1p";
    c.skewness = csv::to_double(r[2]);
    c.mean = csv::to_double(r[3]);
    c.sd = csv::to_double(r[4]);
    c.dropped = r[5] == "dropped";
    out.push_back(std::move(c));
  }
  return out;
}

inline FeatureGrouping read_grouping(std::istream& is) {
  const auto t = csv::read_table(is);
  if (t.header != std::vector<std::string>{"covariate", "group"}) throw SchemaError("groups.csv: unexpected header");
  FeatureGrouping fg;
  for (const auto& r : t.rows) {
    if (r.size() != 2) throw SchemaError("groups.csv: ragged row");
    fg.names.push_back(r[0]);
    fg.group.push_back(std::stoi(r[1]));
    fg.k = std::max(fg.k, fg.group.back());
  }
  return fg;
}

}  // namespace vcnet
