#pragma once

// Per-firm covariates: the firm's own firm-layer statistics plus max / min /
// median of each investor-layer statistic over its first-round investors,
// all read from the snapshot of the firm's first-investment year.

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "vcnet/centrality.hpp"
#include "vcnet/csv.hpp"
#include "vcnet/graph.hpp"

namespace vcnet {

struct FirmCovariates {
  std::string firm_id;
  int first_year = 0;
  std::int64_t first_amount = 0;
  bool investors_missing = false;  // some first-round investor absent from the investor frame
  std::vector<double> values;      // aligned with covariate_names()
};

/// `<measure>_org` for firm-layer measures, `n_investors`, then
/// `<measure>_max`, `_min`, `_median` for investor-layer measures.
inline const std::vector<std::string>& covariate_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (Measure m : kAllMeasures) v.push_back(std::string(measure_name(m)) + "_org");
    v.emplace_back("n_investors");
    for (Measure m : kAllMeasures) {
      if (!measure_on_layer(m, Layer::Investor)) continue;
      for (const char* s : {"_max", "_min", "_median"}) v.push_back(std::string(measure_name(m)) + s);
    }
    return v;
  }();
  return names;
}

inline std::ptrdiff_t covariate_index(const std::string& name) {
  const auto& names = covariate_names();
  auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : it - names.begin();
}

/// Median with the mean-of-middle-pair convention for even counts.
inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// Covariates for every firm whose first investment falls in the frames'
/// snapshot year.
inline std::vector<FirmCovariates> assemble_covariates(const CentralityFrame& firm_frame,
                                                       const CentralityFrame& investor_frame,
                                                       const TemporalBipartiteGraph& g,
                                                       const std::map<std::string, FirstRound>& rounds) {
  const int year = firm_frame.snapshot_year;
  std::map<std::string, std::set<std::string>> investors_so_far;
  for (const auto& e : g.snapshot(year)) investors_so_far[e.firm_id].insert(e.investor_id);

  std::vector<FirmCovariates> out;
  for (const auto& [firm, fr] : rounds) {
    if (fr.date.year != year) continue;
    FirmCovariates c;
    c.firm_id = firm;
    c.first_year = year;
    c.first_amount = fr.amount_total;
    const auto fi = firm_frame.index_of(firm);
    for (Measure m : kAllMeasures) {
      const auto& col = firm_frame[m];
      c.values.push_back(fi && !col.empty() ? col[*fi] : 0.0);
    }
    c.values.push_back(static_cast<double>(investors_so_far[firm].size()));

    std::vector<std::size_t> idx;
    for (const auto& inv : fr.investors) {
      auto ii = investor_frame.index_of(inv);
      if (ii)
        idx.push_back(*ii);
      else
        c.investors_missing = true;
    }
    for (Measure m : kAllMeasures) {
      if (!measure_on_layer(m, Layer::Investor)) continue;
      std::vector<double> vals;
      for (auto i : idx) vals.push_back(investor_frame[m][i]);
      if (vals.empty()) {
        c.values.insert(c.values.end(), {0.0, 0.0, 0.0});
        continue;
      }
      c.values.push_back(*std::max_element(vals.begin(), vals.end()));
      c.values.push_back(*std::min_element(vals.begin(), vals.end()));
      c.values.push_back(median(vals));
    }
    out.push_back(std::move(c));
  }
  return out;
}

/// Frames for every first-investment year and the resulting covariate table
/// (sorted by firm_id).
inline std::vector<FirmCovariates> build_covariate_table(const TemporalBipartiteGraph& g,
                                                         int projection_window = 7,
                                                         double damping = 0.85) {
  const auto rounds = first_rounds(g);
  std::set<int> years;
  for (const auto& [firm, fr] : rounds) years.insert(fr.date.year);
  std::vector<FirmCovariates> table;
  for (int y : years) {
    const auto ff = compute_frame(project_firms(g, y, projection_window), damping);
    const auto fi = compute_frame(project_investors(g, y), damping);
    auto part = assemble_covariates(ff, fi, g, rounds);
    table.insert(table.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  std::sort(table.begin(), table.end(),
            [](const FirmCovariates& a, const FirmCovariates& b) { return a.firm_id < b.firm_id; });
  return table;
}

inline void write_covariates(std::ostream& os, const std::vector<FirmCovariates>& table) {
  std::vector<std::string> header{"firm_id", "first_year", "first_amount", "investors_missing"};
  for (const auto& n : covariate_names()) header.push_back(n);
  csv::write_row(os, header);
  for (const auto& c : table) {
    std::vector<std::string> row{c.firm_id, std::to_string(c.first_year), std::to_string(c.first_amount),
                                 c.investors_missing ? "1" : "0"};
    for (double v : c.values) row.push_back(csv::fmt(v));
    csv::write_row(os, row);
  }
}

inline std::vector<FirmCovariates> read_covariates(std::istream& is) {
  const auto t = csv::read_table(is);
  const auto& names = covariate_names();
  if (t.header.size() != 4 + names.size() || t.header[0] != "firm_id")
    throw SchemaError("covariates.csv: unexpected header");
  for (std::size_t i = 0; i < names.size(); ++i)
    if (t.header[4 + i] != names[i]) throw SchemaError("covariates.csv: unexpected column '" + t.header[4 + i] + "'");
  std::vector<FirmCovariates> out;
  for (const auto& r : t.rows) {
    if (r.size() != t.header.size()) throw SchemaError("covariates.csv: ragged row");
    FirmCovariates c;
    c.firm_id = r[0];
    c.first_year = std::stoi(r[1]);
    c.first_amount = std::stoll(r[2]);
    c.investors_missing = r[3] == "1";
    for (std::size_t i = 0; i < names.size(); ++i) c.values.push_back(csv::to_double(r[4 + i]));
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace vcnet
