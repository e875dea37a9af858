#pragma once

// Centrality-ranked picking strategy over yearly cohorts of first
// investments, scored against exits with a hypergeometric upper-tail test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "vcnet/covariates.hpp"
#include "vcnet/csv.hpp"
#include "vcnet/error.hpp"
#include "vcnet/ingest.hpp"

namespace vcnet {

namespace detail {

inline double log_choose(std::uint64_t n, std::uint64_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

inline void check_hypergeom(std::uint64_t N, std::uint64_t K, std::uint64_t n, std::uint64_t k) {
  if (K > N || n > N || k > n)
    throw ConfigError("hypergeometric: need k <= n <= N and K <= N (N=" + std::to_string(N) +
                      ", K=" + std::to_string(K) + ", n=" + std::to_string(n) + ", k=" + std::to_string(k) + ")");
}

}  // namespace detail

/// P(X = k) for X ~ Hypergeometric(population N, successes K, draws n).
inline double hypergeom_pmf(std::uint64_t N, std::uint64_t K, std::uint64_t n, std::uint64_t k) {
  detail::check_hypergeom(N, K, n, k);
  if (k > K || n - k > N - K) return 0.0;
  return std::exp(detail::log_choose(K, k) + detail::log_choose(N - K, n - k) - detail::log_choose(N, n));
}

/// Upper tail P(X >= k), accumulated from log-binomial terms. Exactly 1 when
/// k is at or below the support minimum.
inline double hypergeom_pvalue(std::uint64_t N, std::uint64_t K, std::uint64_t n, std::uint64_t k) {
  detail::check_hypergeom(N, K, n, k);
  const std::uint64_t lo = n > N - K ? n - (N - K) : 0;
  if (k <= lo) return 1.0;
  const std::uint64_t hi = std::min(n, K);
  double p = 0.0;
  for (std::uint64_t j = k; j <= hi; ++j) p += hypergeom_pmf(N, K, n, j);
  return std::min(1.0, p);
}

struct BacktestOptions {
  std::size_t top_n = 25;
  int horizon = 8;  // years after the start year
  int first_start_year = 2000;
  int last_start_year = 2010;
};

struct BacktestYear {
  int start_year = 0;
  std::size_t pool = 0;
  std::size_t pool_successes = 0;
  std::size_t picked = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;  // successes / picked
  double baseline = 0.0;      // pool_successes / pool
  double p_value = 1.0;
  bool pool_short = false;    // pool smaller than top_n
};

struct BacktestReport {
  std::string measure;
  BacktestOptions options;
  std::vector<BacktestYear> years;  // years with a non-empty pool
  double mean_rate = 0.0, sd_rate = 0.0;
  double mean_baseline = 0.0;
};

/// VoteRank ranks are better when smaller; every other covariate is better
/// when larger.
inline bool ranks_ascending(const std::string& measure) { return measure.rfind("voterank", 0) == 0; }

/// For each start year Y: the pool holds firms whose first investment falls
/// in Y and which have no exit dated in or before Y. Pick the top_n by the
/// measure (ties by firm_id); success = exit during Y+1..Y+horizon.
inline BacktestReport run_strategy(const std::vector<FirmCovariates>& table, const Dataset& data,
                                   const std::string& measure, const BacktestOptions& opt = {}) {
  const auto col = covariate_index(measure);
  if (col < 0) throw NotFoundError("unknown backtest measure '" + measure + "'");
  if (opt.top_n < 1) throw ConfigError("top_n must be >= 1");
  const auto meta = data.firm_map();
  const bool asc = ranks_ascending(measure);

  BacktestReport rep;
  rep.measure = measure;
  rep.options = opt;
  for (int y = opt.first_start_year; y <= opt.last_start_year; ++y) {
    std::vector<std::pair<double, const FirmCovariates*>> pool;
    for (const auto& c : table) {
      if (c.first_year != y) continue;
      auto it = meta.find(c.firm_id);
      if (it != meta.end() && is_exit(it->second.status) && it->second.status_date &&
          it->second.status_date->year <= y)
        continue;
      pool.emplace_back(c.values[static_cast<std::size_t>(col)], &c);
    }
    if (pool.empty()) continue;
    std::sort(pool.begin(), pool.end(), [asc](const auto& a, const auto& b) {
      if (a.first != b.first) return asc ? a.first < b.first : a.first > b.first;
      return a.second->firm_id < b.second->firm_id;
    });
    auto success = [&](const FirmCovariates* c) {
      auto it = meta.find(c->firm_id);
      if (it == meta.end() || !is_exit(it->second.status) || !it->second.status_date) return false;
      const int ey = it->second.status_date->year;
      return ey > y && ey <= y + opt.horizon;
    };
    BacktestYear by;
    by.start_year = y;
    by.pool = pool.size();
    by.picked = std::min(opt.top_n, pool.size());
    by.pool_short = pool.size() < opt.top_n;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const bool s = success(pool[i].second);
      by.pool_successes += s;
      if (i < by.picked) by.successes += s;
    }
    by.success_rate = static_cast<double>(by.successes) / static_cast<double>(by.picked);
    by.baseline = static_cast<double>(by.pool_successes) / static_cast<double>(by.pool);
    by.p_value = hypergeom_pvalue(by.pool, by.pool_successes, by.picked, by.successes);
    rep.years.push_back(by);
  }
  if (!rep.years.empty()) {
    const auto m = static_cast<double>(rep.years.size());
    for (const auto& y : rep.years) {
      rep.mean_rate += y.success_rate / m;
      rep.mean_baseline += y.baseline / m;
    }
    double s = 0.0;
    for (const auto& y : rep.years) s += (y.success_rate - rep.mean_rate) * (y.success_rate - rep.mean_rate);
    rep.sd_rate = rep.years.size() > 1 ? std::sqrt(s / (m - 1.0)) : 0.0;
  }
  return rep;
}

/// Rows `measure,start_year,success_rate,p_value` per year, then `mean`,
/// `sd` and `baseline` aggregate rows (p_value empty) per measure.
inline void write_backtest(std::ostream& os, const std::vector<BacktestReport>& reports) {
  csv::write_row(os, {"measure", "start_year", "success_rate", "p_value"});
  for (const auto& r : reports) {
    for (const auto& y : r.years)
      csv::write_row(os, {r.measure, std::to_string(y.start_year), csv::fmt(y.success_rate), csv::fmt(y.p_value)});
    csv::write_row(os, {r.measure, "mean", csv::fmt(r.mean_rate), ""});
    csv::write_row(os, {r.measure, "sd", csv::fmt(r.sd_rate), ""});
    csv::write_row(os, {r.measure, "baseline", csv::fmt(r.mean_baseline), ""});
  }
}

/// Per-year pool details for auditing the test inputs.
inline void write_backtest_detail(std::ostream& os, const std::vector<BacktestReport>& reports) {
  csv::write_row(os, {"measure", "start_year", "pool", "pool_successes", "picked", "successes", "baseline",
                      "pool_short"});
  for (const auto& r : reports)
    for (const auto& y : r.years)
      csv::write_row(os, {r.measure, std::to_string(y.start_year), std::to_string(y.pool),
                          std::to_string(y.pool_successes), std::to_string(y.picked), std::to_string(y.successes),
                          csv::fmt(y.baseline), y.pool_short ? "1" : "0"});
}

}  // namespace vcnet
