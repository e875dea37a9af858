#pragma once

// Deal-level input: CSV parsing with a rejects report, canonical
// serialization, and a seeded generator with planted two-regime structure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vcnet/csv.hpp"
#include "vcnet/date.hpp"
#include "vcnet/error.hpp"
#include "vcnet/rng.hpp"

namespace vcnet {

enum class FirmStatus { Active, Acquired, Ipo, Merged, Inactive };

inline constexpr std::string_view to_string(FirmStatus s) noexcept {
  switch (s) {
    case FirmStatus::Active: return "ACTIVE";
    case FirmStatus::Acquired: return "ACQUIRED";
    case FirmStatus::Ipo: return "IPO";
    case FirmStatus::Merged: return "MERGED";
    case FirmStatus::Inactive: return "INACTIVE";
  }
  return "ACTIVE";
}

inline std::optional<FirmStatus> parse_status(std::string_view s) {
  for (auto st : {FirmStatus::Active, FirmStatus::Acquired, FirmStatus::Ipo, FirmStatus::Merged,
                  FirmStatus::Inactive})
    if (to_string(st) == s) return st;
  return std::nullopt;
}

/// Acquisition, IPO or merger.
inline constexpr bool is_exit(FirmStatus s) noexcept {
  return s == FirmStatus::Acquired || s == FirmStatus::Ipo || s == FirmStatus::Merged;
}

struct DealRecord {
  std::string firm_id;
  std::string investor_id;
  std::string round_id;
  Date date;
  std::int64_t amount = 0;  // whole currency units

  friend bool operator==(const DealRecord&, const DealRecord&) = default;
};

struct FirmMeta {
  std::string firm_id;
  std::string subsector;  // empty = UNKNOWN
  std::string country;    // empty = UNKNOWN
  FirmStatus status = FirmStatus::Active;
  std::optional<Date> status_date;  // present iff is_exit(status)
  bool synthesized = false;         // referenced by deals but missing from firms.csv

  bool has_subsector() const noexcept { return !subsector.empty(); }

  friend bool operator==(const FirmMeta&, const FirmMeta&) = default;
};

struct Reject {
  std::size_t line = 0;  // 1-based; the header is line 1
  std::string reason;
};

struct Dataset {
  std::vector<DealRecord> deals;
  std::vector<FirmMeta> firms;  // file order, then synthesized entries

  std::map<std::string, std::size_t> firm_index() const {
    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < firms.size(); ++i) idx.emplace(firms[i].firm_id, i);
    return idx;
  }

  std::map<std::string, FirmMeta> firm_map() const {
    std::map<std::string, FirmMeta> m;
    for (const auto& f : firms) m.emplace(f.firm_id, f);
    return m;
  }
};

struct ParseResult {
  Dataset data;
  std::vector<Reject> deal_rejects;
  std::vector<Reject> firm_rejects;
  std::vector<std::string> warnings;
};

inline constexpr std::string_view kDealHeader[] = {"firm_id", "investor_id", "round_id", "date",
                                                   "amount"};
inline constexpr std::string_view kFirmHeader[] = {"firm_id", "subsector", "country", "status",
                                                   "status_date"};

namespace detail {

template <std::size_t N>
void check_header(const std::vector<std::string>& got, const std::string_view (&want)[N],
                  std::string_view file) {
  bool ok = got.size() == N;
  for (std::size_t i = 0; ok && i < N; ++i) ok = got[i] == want[i];
  if (!ok) {
    std::string expect;
    for (std::size_t i = 0; i < N; ++i) expect += (i ? "," : "") + std::string(want[i]);
    throw SchemaError(std::string(file) + ": header must be '" + expect + "'");
  }
}

inline std::optional<std::int64_t> parse_amount(const std::string& s, std::string& why) {
  if (s.empty()) {
    why = "missing amount";
    return std::nullopt;
  }
  if (s[0] == '-') {
    why = "negative amount";
    return std::nullopt;
  }
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    why = "amount is not a whole number";
    return std::nullopt;
  }
  return v;
}

}  // namespace detail

/// Parse `deals.csv` and `firms.csv`. Bad rows become rejects; only a bad
/// header is fatal.
inline ParseResult parse_deals(std::istream& deal_csv, std::istream& firm_csv) {
  ParseResult out;
  std::string line;

  if (!std::getline(deal_csv, line)) throw SchemaError("deals.csv: missing header");
  detail::check_header(csv::split_line(line), kDealHeader, "deals.csv");
  for (std::size_t lineno = 2; std::getline(deal_csv, line); ++lineno) {
    if (line.empty() || line == "\r") continue;
    auto f = csv::split_line(line);
    if (f.size() != 5) {
      out.deal_rejects.push_back({lineno, "expected 5 fields, got " + std::to_string(f.size())});
      continue;
    }
    if (f[0].empty() || f[1].empty() || f[2].empty()) {
      out.deal_rejects.push_back({lineno, "empty firm_id, investor_id or round_id"});
      continue;
    }
    auto date = Date::parse(f[3]);
    if (!date) {
      out.deal_rejects.push_back({lineno, "invalid date '" + f[3] + "'"});
      continue;
    }
    std::string why;
    auto amount = detail::parse_amount(f[4], why);
    if (!amount) {
      out.deal_rejects.push_back({lineno, why});
      continue;
    }
    out.data.deals.push_back({f[0], f[1], f[2], *date, *amount});
  }

  if (!std::getline(firm_csv, line)) throw SchemaError("firms.csv: missing header");
  detail::check_header(csv::split_line(line), kFirmHeader, "firms.csv");
  std::set<std::string> seen;
  for (std::size_t lineno = 2; std::getline(firm_csv, line); ++lineno) {
    if (line.empty() || line == "\r") continue;
    auto f = csv::split_line(line);
    if (f.size() != 5) {
      out.firm_rejects.push_back({lineno, "expected 5 fields, got " + std::to_string(f.size())});
      continue;
    }
    if (f[0].empty()) {
      out.firm_rejects.push_back({lineno, "empty firm_id"});
      continue;
    }
    if (seen.count(f[0])) {
      out.firm_rejects.push_back({lineno, "duplicate firm_id '" + f[0] + "'"});
      continue;
    }
    auto status = parse_status(f[3]);
    if (!status) {
      out.firm_rejects.push_back({lineno, "invalid status '" + f[3] + "'"});
      continue;
    }
    std::optional<Date> sdate;
    if (!f[4].empty()) {
      sdate = Date::parse(f[4]);
      if (!sdate) {
        out.firm_rejects.push_back({lineno, "invalid status_date '" + f[4] + "'"});
        continue;
      }
    }
    if (is_exit(*status) != sdate.has_value()) {
      out.firm_rejects.push_back(
          {lineno, is_exit(*status) ? "exit status without status_date"
                                    : "status_date given for non-exit status"});
      continue;
    }
    seen.insert(f[0]);
    out.data.firms.push_back({f[0], f[1], f[2], *status, sdate, false});
  }

  for (const auto& d : out.data.deals) {
    if (seen.insert(d.firm_id).second) {
      FirmMeta m;
      m.firm_id = d.firm_id;
      m.synthesized = true;
      out.data.firms.push_back(m);
      out.warnings.push_back("firm '" + d.firm_id +
                             "' referenced in deals.csv but absent from firms.csv");
    }
  }
  return out;
}

inline void write_deals(std::ostream& os, const std::vector<DealRecord>& deals) {
  csv::write_row(os, {kDealHeader[0].data(), kDealHeader[1].data(), kDealHeader[2].data(),
                      kDealHeader[3].data(), kDealHeader[4].data()});
  for (const auto& d : deals)
    csv::write_row(os, {d.firm_id, d.investor_id, d.round_id, d.date.str(),
                        std::to_string(d.amount)});
}

inline void write_firms(std::ostream& os, const std::vector<FirmMeta>& firms) {
  csv::write_row(os, {kFirmHeader[0].data(), kFirmHeader[1].data(), kFirmHeader[2].data(),
                      kFirmHeader[3].data(), kFirmHeader[4].data()});
  for (const auto& f : firms)
    csv::write_row(os, {f.firm_id, f.subsector, f.country, std::string(to_string(f.status)),
                        f.status_date ? f.status_date->str() : std::string()});
}

inline void write_rejects(std::ostream& os, const std::vector<Reject>& rejects) {
  csv::write_row(os, {"line", "reason"});
  for (const auto& r : rejects) csv::write_row(os, {std::to_string(r.line), r.reason});
}

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticConfig {
  std::size_t n_firms = 500;
  std::size_t n_investors = 300;
  std::size_t n_subsectors = 4;
  int start_year = 2000;  // observation window for deal dates
  int end_year = 2018;
  int entry_start_year = 2000;  // window for first investments
  int entry_end_year = 2010;
  double high_regime_fraction = 0.2;
  std::uint64_t seed = 7;
  double amount_log_mean = 14.5;  // ~2M per round
  double amount_log_sd = 0.6;
  double connected_fraction = 0.6;  // firms syndicated by top-tier investors (includes all HIGH)
  double tier1_fraction = 0.1;      // share of investors in the top tier
  double exit_rate = 0.10;          // exit probability of a peripheral firm
  double exit_lift = 7.0;           // multiplier for connected firms
  double unknown_subsector_fraction = 0.0;
  double dual_role_fraction = 0.02;  // firms that also invest

  void validate() const {
    if (n_firms < 1 || n_investors < 1 || n_subsectors < 1)
      throw ConfigError("synthetic config: counts must be >= 1");
    if (!(high_regime_fraction > 0.0 && high_regime_fraction < 1.0))
      throw ConfigError("synthetic config: high_regime_fraction must lie in (0,1)");
    if (start_year > end_year) throw ConfigError("synthetic config: start_year > end_year");
    if (entry_start_year > entry_end_year || entry_start_year < start_year ||
        entry_end_year > end_year)
      throw ConfigError("synthetic config: entry years must lie inside [start_year, end_year]");
    if (connected_fraction < high_regime_fraction || connected_fraction > 1.0)
      throw ConfigError("synthetic config: connected_fraction must lie in [high_regime_fraction, 1]");
    if (!(tier1_fraction > 0.0 && tier1_fraction < 1.0))
      throw ConfigError("synthetic config: tier1_fraction must lie in (0,1)");
    if (exit_rate < 0.0 || exit_rate > 1.0 || exit_lift < 0.0)
      throw ConfigError("synthetic config: invalid exit parameters");
    if (unknown_subsector_fraction < 0.0 || unknown_subsector_fraction >= 1.0 ||
        dual_role_fraction < 0.0 || dual_role_fraction >= 1.0)
      throw ConfigError("synthetic config: fractions must lie in [0,1)");
    if (amount_log_sd < 0.0) throw ConfigError("synthetic config: amount_log_sd must be >= 0");
  }
};

/// Ground truth planted by the generator.
struct PlantedFirm {
  std::string firm_id;
  bool high_regime = false;
  bool connected = false;
};

struct SyntheticDataset {
  Dataset data;
  std::vector<PlantedFirm> truth;  // same order as data.firms
};

namespace detail {

inline std::string padded(std::string_view prefix, std::size_t i, int width) {
  std::string n = std::to_string(i);
  if (static_cast<int>(n.size()) < width) n.insert(0, width - n.size(), '0');
  return std::string(prefix) + n;
}

inline Date add_days(Date d, double days) {
  return Date::from_serial(d.serial() + static_cast<std::int64_t>(std::floor(days)));
}

}  // namespace detail

/// Seeded dataset with planted structure:
///  - HIGH-regime firms raise 5-8 follow-on rounds with larger amounts, LOW
///    firms 0-2 modest ones;
///  - every HIGH firm and a share of LOW firms ("connected") are syndicated by
///    top-tier investors, which makes them central in both projections;
///  - connected firms exit `exit_lift` times as often as peripheral ones.
/// Every firm receives at least two deal records within its first 18 months.
/// Rounds dated after `end_year` are censored.
inline SyntheticDataset generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  SyntheticDataset out;

  const int width_f = static_cast<int>(std::to_string(cfg.n_firms).size());
  const int width_i = static_cast<int>(std::to_string(cfg.n_investors).size());
  const int width_s = static_cast<int>(std::to_string(cfg.n_subsectors).size());

  std::vector<std::string> investors(cfg.n_investors);
  for (std::size_t i = 0; i < cfg.n_investors; ++i)
    investors[i] = detail::padded("inv", i + 1, width_i);
  const std::size_t n_tier1 = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(cfg.tier1_fraction * cfg.n_investors)));
  std::vector<std::string> tier1(investors.begin(), investors.begin() + std::min(n_tier1, investors.size()));
  std::vector<std::string> tier2(investors.begin() + tier1.size(), investors.end());

  std::vector<std::string> firm_ids(cfg.n_firms);
  for (std::size_t i = 0; i < cfg.n_firms; ++i) firm_ids[i] = detail::padded("firm", i + 1, width_f);

  // Dual-role firms join the peripheral investor pool.
  const auto n_dual = static_cast<std::size_t>(std::floor(cfg.dual_role_fraction * cfg.n_firms));
  for (auto i : rng.sample_without_replacement(cfg.n_firms, n_dual)) tier2.push_back(firm_ids[i]);
  if (tier2.empty()) tier2 = tier1;

  static constexpr std::string_view kCountries[] = {"US", "US", "US", "GB", "DE", "FR", "CN", "IL"};
  const double p_connected_low =
      (cfg.connected_fraction - cfg.high_regime_fraction) / (1.0 - cfg.high_regime_fraction);
  const Date obs_end{cfg.end_year, 12, 31};

  auto pick = [&](const std::vector<std::string>& pool, std::vector<std::string>& chosen) {
    for (int tries = 0; tries < 32; ++tries) {
      const auto& c = pool[rng.below(pool.size())];
      if (std::find(chosen.begin(), chosen.end(), c) == chosen.end()) {
        chosen.push_back(c);
        return;
      }
    }
  };

  for (std::size_t fi = 0; fi < cfg.n_firms; ++fi) {
    const std::string& fid = firm_ids[fi];
    PlantedFirm truth{fid, rng.bernoulli(cfg.high_regime_fraction), false};
    truth.connected = truth.high_regime || rng.bernoulli(p_connected_low);

    FirmMeta meta;
    meta.firm_id = fid;
    meta.subsector = rng.bernoulli(cfg.unknown_subsector_fraction)
                         ? std::string()
                         : detail::padded("sub", rng.below(cfg.n_subsectors) + 1, width_s);
    meta.country = std::string(kCountries[rng.below(std::size(kCountries))]);

    const int entry_year = static_cast<int>(rng.between(cfg.entry_start_year, cfg.entry_end_year));
    const Date first{entry_year, 1, 1};
    const Date first_date =
        detail::add_days(first, rng.uniform(0.0, Date::is_leap(entry_year) ? 366.0 : 365.0));

    std::size_t round_no = 0;
    std::vector<std::string> history;
    auto emit_round = [&](Date date, std::vector<std::string> syndicate, double log_boost) {
      ++round_no;
      if (date > obs_end) return;
      const double total = std::max(1000.0, rng.lognormal(cfg.amount_log_mean + log_boost,
                                                          cfg.amount_log_sd));
      const auto total_units = static_cast<std::int64_t>(std::llround(total));
      const auto n = static_cast<std::int64_t>(syndicate.size());
      const std::string rid = fid + "-r" + std::to_string(round_no);
      for (std::int64_t k = 0; k < n; ++k) {
        const std::int64_t share = total_units / n + (k == 0 ? total_units % n : 0);
        out.data.deals.push_back({fid, syndicate[k], rid, date, share});
        if (std::find(history.begin(), history.end(), syndicate[k]) == history.end())
          history.push_back(syndicate[k]);
      }
    };

    // First round.
    std::vector<std::string> syndicate;
    if (truth.connected) {
      const std::size_t seats = 2 + rng.below(truth.high_regime ? 3 : 2);
      while (syndicate.size() < seats) {
        const std::size_t before = syndicate.size();
        pick(rng.bernoulli(0.85) ? tier1 : tier2, syndicate);
        if (syndicate.size() == before) break;
      }
    } else {
      const std::size_t seats = 1 + rng.below(2);
      while (syndicate.size() < seats) {
        const std::size_t before = syndicate.size();
        pick(rng.bernoulli(0.03) ? tier1 : tier2, syndicate);
        if (syndicate.size() == before) break;
      }
    }
    const bool single = syndicate.size() < 2;
    emit_round(first_date, syndicate, truth.high_regime ? 0.3 : 0.0);

    Date last = first_date;
    if (single) {
      // Bridge round from the same investor within 3-18 months.
      last = detail::add_days(first_date, rng.uniform(90.0, 540.0));
      emit_round(last, syndicate, -0.5);
    }

    const std::size_t follow_ons =
        truth.high_regime ? 5 + rng.below(4) : static_cast<std::size_t>(rng.below(3));
    for (std::size_t r = 0; r < follow_ons; ++r) {
      const double gap_years = truth.high_regime ? 0.5 + std::min(2.0, rng.exponential(1.0 / 0.6))
                                                 : 1.0 + rng.exponential(1.0 / 2.0);
      last = detail::add_days(last, gap_years * kDaysPerYear);
      std::vector<std::string> synd;
      if (!history.empty() && rng.bernoulli(0.7)) synd.push_back(history[rng.below(history.size())]);
      const std::size_t seats = truth.high_regime ? 2 + rng.below(3) : 1 + rng.below(2);
      while (synd.size() < seats) {
        const std::size_t before = synd.size();
        pick(truth.connected && rng.bernoulli(0.6) ? tier1 : tier2, synd);
        if (synd.size() == before) break;
      }
      const double boost =
          truth.high_regime ? 1.5 + 0.3 * static_cast<double>(r) : -0.5;
      emit_round(last, synd, boost);
    }

    // Outcome.
    const double p_exit = std::min(0.95, cfg.exit_rate * (truth.connected ? cfg.exit_lift : 1.0));
    if (rng.bernoulli(p_exit)) {
      const Date when = detail::add_days(first_date, rng.uniform(1.0, 9.0) * kDaysPerYear);
      const double u = rng.uniform();
      if (when <= obs_end) {
        meta.status = u < 0.7 ? FirmStatus::Acquired : (u < 0.9 ? FirmStatus::Ipo : FirmStatus::Merged);
        meta.status_date = when;
      }
    } else if (rng.bernoulli(0.1)) {
      meta.status = FirmStatus::Inactive;
    }

    out.data.firms.push_back(std::move(meta));
    out.truth.push_back(std::move(truth));
  }

  std::stable_sort(out.data.deals.begin(), out.data.deals.end(),
                   [](const DealRecord& a, const DealRecord& b) { return a.date < b.date; });
  return out;
}

inline void write_truth(std::ostream& os, const std::vector<PlantedFirm>& truth) {
  csv::write_row(os, {"firm_id", "planted_regime", "connected"});
  for (const auto& t : truth)
    csv::write_row(os, {t.firm_id, t.high_regime ? "HIGH" : "LOW", t.connected ? "1" : "0"});
}

}  // namespace vcnet
