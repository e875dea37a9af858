#pragma once

// End-to-end orchestration: configuration, the seven stages and their
// on-disk artifacts, and the run manifest.
//
// Config grammar: one `key = value` per line; `#` starts a comment; blank
// lines are ignored; unknown keys are errors. Values are trimmed.
//
// Seeds: the synthetic generator consumes `seed` directly; every other
// randomized task t of stage s uses derive_seed(seed, s, t).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcnet/backtest.hpp"
#include "vcnet/covariates.hpp"
#include "vcnet/features.hpp"
#include "vcnet/graph.hpp"
#include "vcnet/ingest.hpp"
#include "vcnet/regress.hpp"
#include "vcnet/selection.hpp"
#include "vcnet/trajectories.hpp"

#ifndef VCNET_VERSION
#define VCNET_VERSION "0.0.0"
#endif

namespace vcnet {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kStages[] = {"ingest", "graph", "centrality", "features", "trajectories", "regress",
                                          "backtest"};

struct RunConfig {
  std::string deals;
  std::string firms;
  bool synthetic = false;
  std::string output = "vcnet_out";
  std::uint64_t seed = 7;
  int window = 10;
  int projection_window = 7;
  int dendrogram_k = 7;
  double skew_threshold = 1.0;
  int kmeans_k = 2;
  int kmeans_inits = 100;
  bool kmeans_log_scale = true;
  int balance_reps = 1000;
  int top_n = 25;
  int horizon = 8;
  int start_year_first = 2000;
  int start_year_last = 2010;
  double damping = 0.85;
  int sweep_min = 5;
  int sweep_max = 12;
  std::string backtest_measures = "all";
  bool dump_projections = true;
  SyntheticConfig synth;

  /// Every settable key, in canonical order.
  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k = {
        "deals", "firms", "synthetic", "output", "seed", "window", "projection_window", "dendrogram_k",
        "skew_threshold", "kmeans_k", "kmeans_inits", "kmeans_log_scale", "balance_reps", "top_n", "horizon",
        "start_year_first", "start_year_last", "damping", "sweep_min", "sweep_max", "backtest_measures",
        "dump_projections", "synth_n_firms", "synth_n_investors", "synth_n_subsectors", "synth_start_year",
        "synth_end_year", "synth_entry_start_year", "synth_entry_end_year", "synth_high_regime_fraction",
        "synth_connected_fraction", "synth_tier1_fraction", "synth_exit_rate", "synth_exit_lift",
        "synth_amount_log_mean", "synth_amount_log_sd", "synth_unknown_subsector_fraction",
        "synth_dual_role_fraction"};
    return k;
  }

  void set(const std::string& key, const std::string& value) {
    auto fail = [&](const char* what) { throw ConfigError("config key '" + key + "': " + what + " '" + value + "'"); };
    auto as_int = [&](int& dst) {
      std::size_t pos = 0;
      try {
        dst = std::stoi(value, &pos);
      } catch (...) {
        fail("expected an integer, got");
      }
      if (pos != value.size()) fail("expected an integer, got");
    };
    auto as_size = [&](std::size_t& dst) {
      int v = 0;
      as_int(v);
      if (v < 0) fail("expected a non-negative integer, got");
      dst = static_cast<std::size_t>(v);
    };
    auto as_double = [&](double& dst) {
      std::size_t pos = 0;
      try {
        dst = std::stod(value, &pos);
      } catch (...) {
        fail("expected a number, got");
      }
      if (pos != value.size()) fail("expected a number, got");
    };
    auto as_bool = [&](bool& dst) {
      if (value == "true" || value == "1" || value == "yes") dst = true;
      else if (value == "false" || value == "0" || value == "no") dst = false;
      else fail("expected true/false, got");
    };
    if (key == "deals") deals = value;
    else if (key == "firms") firms = value;
    else if (key == "synthetic") as_bool(synthetic);
    else if (key == "output") output = value;
    else if (key == "seed") {
      std::size_t pos = 0;
      try {
        seed = std::stoull(value, &pos);
      } catch (...) {
        fail("expected an unsigned integer, got");
      }
      if (pos != value.size() || value.front() == '-') fail("expected an unsigned integer, got");
    }
    else if (key == "window") as_int(window);
    else if (key == "projection_window") as_int(projection_window);
    else if (key == "dendrogram_k") as_int(dendrogram_k);
    else if (key == "skew_threshold") as_double(skew_threshold);
    else if (key == "kmeans_k") as_int(kmeans_k);
    else if (key == "kmeans_inits") as_int(kmeans_inits);
    else if (key == "kmeans_log_scale") as_bool(kmeans_log_scale);
    else if (key == "balance_reps") as_int(balance_reps);
    else if (key == "top_n") as_int(top_n);
    else if (key == "horizon") as_int(horizon);
    else if (key == "start_year_first") as_int(start_year_first);
    else if (key == "start_year_last") as_int(start_year_last);
    else if (key == "damping") as_double(damping);
    else if (key == "sweep_min") as_int(sweep_min);
    else if (key == "sweep_max") as_int(sweep_max);
    else if (key == "backtest_measures") backtest_measures = value;
    else if (key == "dump_projections") as_bool(dump_projections);
    else if (key == "synth_n_firms") as_size(synth.n_firms);
    else if (key == "synth_n_investors") as_size(synth.n_investors);
    else if (key == "synth_n_subsectors") as_size(synth.n_subsectors);
    else if (key == "synth_start_year") as_int(synth.start_year);
    else if (key == "synth_end_year") as_int(synth.end_year);
    else if (key == "synth_entry_start_year") as_int(synth.entry_start_year);
    else if (key == "synth_entry_end_year") as_int(synth.entry_end_year);
    else if (key == "synth_high_regime_fraction") as_double(synth.high_regime_fraction);
    else if (key == "synth_connected_fraction") as_double(synth.connected_fraction);
    else if (key == "synth_tier1_fraction") as_double(synth.tier1_fraction);
    else if (key == "synth_exit_rate") as_double(synth.exit_rate);
    else if (key == "synth_exit_lift") as_double(synth.exit_lift);
    else if (key == "synth_amount_log_mean") as_double(synth.amount_log_mean);
    else if (key == "synth_amount_log_sd") as_double(synth.amount_log_sd);
    else if (key == "synth_unknown_subsector_fraction") as_double(synth.unknown_subsector_fraction);
    else if (key == "synth_dual_role_fraction") as_double(synth.dual_role_fraction);
    else throw ConfigError("unknown config key '" + key + "'");
  }

  /// Canonical string value of every key except `output` (the artifact
  /// location is not part of the artifacts).
  std::map<std::string, std::string> echo() const {
    auto d = [](double x) { return csv::fmt(x); };
    auto b = [](bool x) { return std::string(x ? "true" : "false"); };
    auto i = [](auto x) { return std::to_string(x); };
    return {{"deals", deals},
            {"firms", firms},
            {"synthetic", b(synthetic)},
            {"seed", i(seed)},
            {"window", i(window)},
            {"projection_window", i(projection_window)},
            {"dendrogram_k", i(dendrogram_k)},
            {"skew_threshold", d(skew_threshold)},
            {"kmeans_k", i(kmeans_k)},
            {"kmeans_inits", i(kmeans_inits)},
            {"kmeans_log_scale", b(kmeans_log_scale)},
            {"balance_reps", i(balance_reps)},
            {"top_n", i(top_n)},
            {"horizon", i(horizon)},
            {"start_year_first", i(start_year_first)},
            {"start_year_last", i(start_year_last)},
            {"damping", d(damping)},
            {"sweep_min", i(sweep_min)},
            {"sweep_max", i(sweep_max)},
            {"backtest_measures", backtest_measures},
            {"dump_projections", b(dump_projections)},
            {"synth_n_firms", i(synth.n_firms)},
            {"synth_n_investors", i(synth.n_investors)},
            {"synth_n_subsectors", i(synth.n_subsectors)},
            {"synth_start_year", i(synth.start_year)},
            {"synth_end_year", i(synth.end_year)},
            {"synth_entry_start_year", i(synth.entry_start_year)},
            {"synth_entry_end_year", i(synth.entry_end_year)},
            {"synth_high_regime_fraction", d(synth.high_regime_fraction)},
            {"synth_connected_fraction", d(synth.connected_fraction)},
            {"synth_tier1_fraction", d(synth.tier1_fraction)},
            {"synth_exit_rate", d(synth.exit_rate)},
            {"synth_exit_lift", d(synth.exit_lift)},
            {"synth_amount_log_mean", d(synth.amount_log_mean)},
            {"synth_amount_log_sd", d(synth.amount_log_sd)},
            {"synth_unknown_subsector_fraction", d(synth.unknown_subsector_fraction)},
            {"synth_dual_role_fraction", d(synth.dual_role_fraction)}};
  }

  void validate() const {
    const bool files = !deals.empty() || !firms.empty();
    if (files == synthetic) throw ConfigError("config needs exactly one of: deals+firms inputs, or synthetic = true");
    if (files && (deals.empty() || firms.empty())) throw ConfigError("both 'deals' and 'firms' inputs are required");
    if (synthetic) synth.validate();
    auto range = [](const char* key, double v, double lo, double hi) {
      if (!(v >= lo && v <= hi))
        throw ConfigError(std::string("config key '") + key + "' must lie in [" + csv::fmt(lo) + ", " + csv::fmt(hi) +
                          "]");
    };
    range("window", window, 5, 12);
    range("projection_window", projection_window, 1, 50);
    range("dendrogram_k", dendrogram_k, 1, 1000);
    range("skew_threshold", skew_threshold, 0, 1e9);
    range("kmeans_k", kmeans_k, 1, 100);
    range("kmeans_inits", kmeans_inits, 1, 100000);
    range("balance_reps", balance_reps, 1, 1000000);
    range("top_n", top_n, 1, 1000000);
    range("horizon", horizon, 1, 50);
    range("damping", damping, 1e-9, 1 - 1e-9);
    range("sweep_min", sweep_min, 5, 12);
    range("sweep_max", sweep_max, 5, 12);
    if (start_year_first > start_year_last) throw ConfigError("start_year_first > start_year_last");
    if (output.empty()) throw ConfigError("config key 'output' must not be empty");
  }

  /// Apply a config file's `key = value` lines.
  void load(std::istream& is, const std::string& origin = "config") {
    std::string line;
    for (int lineno = 1; std::getline(is, line); ++lineno) {
      if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
      auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string();
        return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
  }

  void load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open config file '" + path + "'");
    load(is, path);
  }
};

namespace detail {

inline std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw InputError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write '" + p.string() + "'");
  os << content;
}

template <class F>
void write_csv(const fs::path& p, F&& writer) {
  std::ostringstream os;
  writer(os);
  write_file(p, os.str());
}

inline void write_json(const fs::path& p, const json& j) { write_file(p, j.dump(2) + "\n"); }

inline std::string hex64(std::uint64_t x) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << x;
  return os.str();
}

inline fs::path require(const fs::path& p) {
  if (!fs::exists(p)) throw MissingArtifactError("missing upstream artifact: " + p.string());
  return p;
}

inline json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json terms_json(const std::vector<std::string>& names, const Eigen::VectorXd& b, const Eigen::VectorXd& se,
                       const Eigen::VectorXd& stat, const Eigen::VectorXd& p) {
  json out = json::array();
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    out.push_back({{"name", names[j]}, {"estimate", num(b(i))}, {"se", num(se(i))}, {"stat", num(stat(i))},
                   {"p_value", num(p(i))}});
  }
  return out;
}

inline json logistic_json(const LogisticFit& f) {
  return {{"model", "logistic"},
          {"n", f.n},
          {"terms", terms_json(f.names, f.beta, f.se, f.z, f.p)},
          {"loglik", num(f.loglik)},
          {"loglik_null", num(f.loglik_null)},
          {"pseudo_r2", num(f.pseudo_r2)},
          {"iterations", f.iterations},
          {"converged", f.converged},
          {"separated", f.separated}};
}

inline json linear_json(const LinearFit& f) {
  return {{"model", "linear"},
          {"n", f.n},
          {"terms", terms_json(f.names, f.beta, f.se, f.t, f.p)},
          {"r2", num(f.r2)},
          {"adj_r2", num(f.adj_r2)},
          {"f_stat", num(f.f_stat)},
          {"f_df", {num(f.df_model), num(f.df_resid)}},
          {"f_p_value", num(f.f_p)},
          {"sigma2", num(f.sigma2)}};
}

inline void write_leaderboard(std::ostream& os, const std::vector<ConfigScore>& lb, const char* score,
                              const char* aux) {
  csv::write_row(os, {"rank", "config", "covariates", score, aux, "status"});
  for (std::size_t r = 0; r < lb.size(); ++r) {
    std::string cov;
    for (const auto& c : lb[r].covariates) cov += (cov.empty() ? "" : ";") + c;
    csv::write_row(os, {std::to_string(r + 1), std::to_string(lb[r].config), cov,
                        lb[r].ok ? csv::fmt(lb[r].score) : "", lb[r].ok ? csv::fmt(lb[r].aux) : "",
                        lb[r].ok ? "ok" : lb[r].error});
  }
}

inline SyntheticConfig synth_config(const RunConfig& cfg) {
  SyntheticConfig s = cfg.synth;
  s.seed = cfg.seed;
  return s;
}

}  // namespace detail

/// Stage implementations. Each reads its inputs from `out`, writes its
/// artifacts under `out/<stage>/`, and returns manifest counts.
class Pipeline {
 public:
  Pipeline(RunConfig cfg) : cfg_(std::move(cfg)), out_(cfg_.output) {}

  const RunConfig& config() const { return cfg_; }
  const fs::path& out() const { return out_; }

  /// Throws InputError when a configured input file is absent.
  void check_inputs() const {
    if (cfg_.synthetic) return;
    for (const auto& p : {cfg_.deals, cfg_.firms})
      if (!fs::is_regular_file(p)) throw InputError("input file not found: " + p);
  }

  json run_stage(const std::string& name) {
    if (name == "ingest") return ingest();
    if (name == "graph") return graph();
    if (name == "centrality") return centrality();
    if (name == "features") return features();
    if (name == "trajectories") return trajectories();
    if (name == "regress") return regress();
    if (name == "backtest") return backtest();
    throw ConfigError("unknown stage '" + name + "'");
  }

  json inputs_json() const {
    if (cfg_.synthetic) return {{"synthetic", true}};
    json j;
    j["deals"] = {{"path", cfg_.deals}, {"fnv1a64", detail::hex64(fnv1a(detail::read_file(cfg_.deals)))}};
    j["firms"] = {{"path", cfg_.firms}, {"fnv1a64", detail::hex64(fnv1a(detail::read_file(cfg_.firms)))}};
    return j;
  }

  json ingest() {
    const fs::path dir = out_ / "ingest";
    json c;
    ParseResult pr;
    if (cfg_.synthetic) {
      auto s = generate_synthetic(detail::synth_config(cfg_));
      pr.data = std::move(s.data);
      detail::write_csv(dir / "truth.csv", [&](std::ostream& os) { write_truth(os, s.truth); });
    } else {
      check_inputs();
      std::ifstream d(cfg_.deals, std::ios::binary), f(cfg_.firms, std::ios::binary);
      pr = parse_deals(d, f);
    }
    detail::write_csv(dir / "deals.csv", [&](std::ostream& os) { write_deals(os, pr.data.deals); });
    detail::write_csv(dir / "firms.csv", [&](std::ostream& os) { write_firms(os, pr.data.firms); });
    detail::write_csv(dir / "deal_rejects.csv", [&](std::ostream& os) { write_rejects(os, pr.deal_rejects); });
    detail::write_csv(dir / "firm_rejects.csv", [&](std::ostream& os) { write_rejects(os, pr.firm_rejects); });
    std::string warn;
    for (const auto& w : pr.warnings) warn += w + "\n";
    detail::write_file(dir / "warnings.txt", warn);
    std::size_t synthesized = 0;
    for (const auto& f : pr.data.firms) synthesized += f.synthesized;
    c["deals"] = pr.data.deals.size();
    c["firms"] = pr.data.firms.size();
    c["synthesized_firms"] = synthesized;
    c["deal_rejects"] = pr.deal_rejects.size();
    c["firm_rejects"] = pr.firm_rejects.size();
    c["warnings"] = pr.warnings.size();
    return c;
  }

  json graph() {
    const auto data = load_dataset();
    const auto g = build_bipartite(data.deals);
    const fs::path dir = out_ / "graph";
    json c;
    c["nodes_firm"] = g.node_count(Role::Firm);
    c["nodes_investor"] = g.node_count(Role::Investor);
    c["nodes_both"] = g.node_count(Role::Both);
    c["edges"] = g.edges().size();
    std::ostringstream summary;
    csv::write_row(summary, {"year", "bipartite_edges", "firm_nodes", "firm_edges", "investor_nodes", "investor_edges"});
    std::size_t years = 0;
    if (!g.empty()) {
      for (int y = g.min_year(); y <= g.max_year(); ++y, ++years) {
        const auto pf = project_firms(g, y, cfg_.projection_window);
        const auto pi = project_investors(g, y);
        csv::write_row(summary, {std::to_string(y), std::to_string(g.snapshot(y).size()),
                                 std::to_string(pf.graph.size()), std::to_string(pf.graph.edge_count()),
                                 std::to_string(pi.graph.size()), std::to_string(pi.graph.edge_count())});
        if (cfg_.dump_projections)
          for (const auto* pg : {&pf, &pi})
            detail::write_csv(dir / "projections" / projection_filename(*pg),
                              [&](std::ostream& os) { write_edge_list(os, *pg); });
      }
    }
    detail::write_file(dir / "summary.csv", summary.str());
    detail::write_csv(dir / "first_rounds.csv", [&](std::ostream& os) {
      csv::write_row(os, {"firm_id", "round_id", "date", "amount_total", "investors"});
      for (const auto& [firm, fr] : first_rounds(g)) {
        std::string inv;
        for (const auto& i : fr.investors) inv += (inv.empty() ? "" : ";") + i;
        csv::write_row(os, {firm, fr.round_id, fr.date.str(), std::to_string(fr.amount_total), inv});
      }
    });
    c["snapshot_years"] = years;
    return c;
  }

  json centrality() {
    detail::require(out_ / "graph" / "summary.csv");
    const auto data = load_dataset();
    const auto table = build_covariate_table(build_bipartite(data.deals), cfg_.projection_window, cfg_.damping);
    detail::write_csv(out_ / "centrality" / "covariates.csv", [&](std::ostream& os) { write_covariates(os, table); });
    std::size_t missing = 0;
    for (const auto& r : table) missing += r.investors_missing;
    return {{"firms", table.size()}, {"covariates", covariate_names().size()}, {"investors_missing", missing}};
  }

  json features() {
    const auto table = load_covariates();
    const auto& names = covariate_names();
    std::vector<std::string> ids;
    Eigen::MatrixXd raw(static_cast<Eigen::Index>(table.size()), static_cast<Eigen::Index>(names.size()));
    for (std::size_t i = 0; i < table.size(); ++i) {
      ids.push_back(table[i].firm_id);
      for (std::size_t j = 0; j < names.size(); ++j)
        raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = table[i].values[j];
    }
    const auto fm = preprocess(ids, names, raw, cfg_.skew_threshold);
    if (static_cast<std::size_t>(cfg_.dendrogram_k) > fm.names.size())
      throw ConfigError("dendrogram_k=" + std::to_string(cfg_.dendrogram_k) + " exceeds the " +
                        std::to_string(fm.names.size()) + " usable covariates");
    const auto dg = correlation_dendrogram(fm.names, fm.X);
    const auto fg = cut_groups(dg, cfg_.dendrogram_k);
    const fs::path dir = out_ / "features";
    detail::write_csv(dir / "transforms.csv", [&](std::ostream& os) { write_transform_ledger(os, fm.ledger); });
    detail::write_csv(dir / "groups.csv", [&](std::ostream& os) { write_grouping(os, fg); });
    detail::write_csv(dir / "dendrogram.csv", [&](std::ostream& os) { write_dendrogram(os, dg); });
    detail::write_csv(dir / "dendrogram_leaves.csv", [&](std::ostream& os) { write_dendrogram_leaves(os, dg); });
    std::string warn;
    for (const auto& w : fm.warnings) warn += w + "\n";
    detail::write_file(dir / "warnings.txt", warn);
    std::size_t logged = 0;
    for (const auto& t : fm.ledger) logged += t.log && !t.dropped;
    json sizes = json::array();
    for (const auto& m : fg.members()) sizes.push_back(m.size());
    return {{"covariates_in", names.size()}, {"covariates_kept", fm.names.size()},
            {"covariates_logged", logged},   {"groups", fg.k},
            {"group_sizes", sizes},          {"configs", config_count(fg)}};
  }

  json trajectories() {
    const auto data = load_dataset();
    const auto ts = build_trajectories(data, cfg_.window);
    const auto ca = functional_kmeans(ts.trajectories, kmeans_options());
    const fs::path dir = out_ / "trajectories";
    detail::write_csv(dir / "trajectories.csv", [&](std::ostream& os) { write_trajectories(os, ts); });
    detail::write_csv(dir / "exclusions.csv", [&](std::ostream& os) { write_exclusions(os, ts); });
    detail::write_csv(dir / "regimes.csv", [&](std::ostream& os) { write_assignment(os, ca); });
    detail::write_csv(dir / "centroids.csv", [&](std::ostream& os) { write_centroids(os, ca, ts.window); });
    const auto rates = regime_rates(ca);
    detail::write_csv(dir / "rates.csv", [&](std::ostream& os) {
      csv::write_row(os, {"n_high", "n_low", "share_high"});
      csv::write_row(os, {std::to_string(rates.n_high), std::to_string(rates.n_low), csv::fmt(rates.share_high)});
    });
    std::string warn;
    for (const auto& w : ca.warnings) warn += w + "\n";
    detail::write_file(dir / "warnings.txt", warn);
    std::map<std::string, std::size_t> reasons;
    for (const auto& e : ts.exclusions) ++reasons[e.reason];
    return {{"window", ts.window},
            {"firms_with_deals", ts.trajectories.size() + ts.exclusions.size()},
            {"retained", ts.trajectories.size()},
            {"excluded", ts.exclusions.size()},
            {"exclusion_reasons", reasons},
            {"n_high", rates.n_high},
            {"n_low", rates.n_low},
            {"share_high", rates.share_high}};
  }

  json regress() {
    const auto table = load_covariates();
    const auto ledger = load_ledger();
    const auto fg = load_grouping();
    const auto regimes = load_regimes();
    const auto data = load_dataset();
    const auto ts = build_trajectories(data, cfg_.window);
    const auto md = build_model_data(ts, regimes, table, ledger);
    const fs::path dir = out_ / "regress";
    json c;
    c["firms"] = md.firm_ids.size();
    c["high"] = static_cast<std::size_t>(md.y_regime.sum());

    std::vector<std::vector<std::size_t>> configs;
    for (const auto& cfg : enumerate_configs(fg)) {
      std::vector<std::string> nm;
      for (auto i : cfg) nm.push_back(fg.names[i]);
      configs.push_back(column_indices(md.features.names, nm));
    }
    c["configs"] = configs.size();

    // Binary response: exhaustive search, then balanced refits of the winner.
    const auto lb_log = select_model(FitKind::Logistic, md.y_regime, md.features, configs);
    detail::write_csv(dir / "logistic_leaderboard.csv",
                      [&](std::ostream& os) { detail::write_leaderboard(os, lb_log, "loglik", "pseudo_r2"); });
    std::size_t failed = 0;
    for (const auto& e : lb_log) failed += !e.ok;
    c["logistic_failures"] = failed;
    if (!lb_log.empty() && lb_log.front().ok) {
      const auto& best = lb_log.front();
      const auto X = select_columns(md.features.X, configs[best.config]);
      json j = detail::logistic_json(fit_logistic(md.y_regime, X, best.covariates));
      j["config"] = best.config;
      j["window"] = cfg_.window;
      detail::write_json(dir / "logistic_best.json", j);
      const auto seed = derive_seed(cfg_.seed, "regress/balance", 0);
      json e{{"config", best.config}, {"window", cfg_.window}, {"seed", seed}};
      try {
        const auto be = balanced_ensemble(md.y_regime, X, best.covariates,
                                          static_cast<std::size_t>(cfg_.balance_reps), seed);
        e["status"] = "ok";
        e["replicates"] = be.replicates.size();
        e["attempts"] = be.attempts;
        e["discarded"] = be.discarded;
        e["class_size"] = be.class_size;
        e["mean_loglik"] = detail::num(be.mean_loglik);
        e["mean_pseudo_r2"] = detail::num(be.mean_pseudo_r2);
        e["max_pseudo_r2"] = detail::num(be.max_pseudo_r2);
        json terms = json::array();
        for (std::size_t k = 0; k < be.names.size(); ++k)
          terms.push_back({{"name", be.names[k]},
                           {"mean", detail::num(be.mean(static_cast<Eigen::Index>(k)))},
                           {"sd", detail::num(be.sd(static_cast<Eigen::Index>(k)))}});
        e["terms"] = terms;
        detail::write_csv(dir / "ensemble_replicates.csv", [&](std::ostream& os) {
          csv::write_row(os, {"replicate", "term", "estimate", "p_value", "neg_log_p"});
          for (std::size_t r = 0; r < be.replicates.size(); ++r)
            for (std::size_t k = 0; k < be.names.size(); ++k) {
              const auto i = static_cast<Eigen::Index>(k);
              const double p = be.replicates[r].p(i);
              csv::write_row(os, {std::to_string(r), be.names[k], csv::fmt(be.replicates[r].beta(i)), csv::fmt(p),
                                  csv::fmt(-std::log(p))});
            }
        });
        c["ensemble_replicates"] = be.replicates.size();
      } catch (const Error& err) {
        e["status"] = err.what();
      }
      detail::write_json(dir / "ensemble.json", e);
    }

    // Scalar responses.
    const auto lb_lin = select_model(FitKind::Linear, md.y_aggregate, md.features, configs, md.controls,
                                     md.control_names);
    detail::write_csv(dir / "linear_leaderboard.csv",
                      [&](std::ostream& os) { detail::write_leaderboard(os, lb_lin, "r2", "adj_r2"); });
    failed = 0;
    for (const auto& e : lb_lin) failed += !e.ok;
    c["linear_failures"] = failed;
    std::vector<std::string> best_linear;
    if (!lb_lin.empty() && lb_lin.front().ok) {
      const auto& best = lb_lin.front();
      best_linear = best.covariates;
      const auto X = select_columns(md.features.X, configs[best.config]);
      json j = detail::linear_json(fit_linear(md.y_aggregate, X, md.controls, best.covariates, md.control_names));
      j["response"] = "log_aggregate_raised";
      j["config"] = best.config;
      j["window"] = cfg_.window;
      detail::write_json(dir / "linear_best.json", j);

      // Differential response: same covariates, first-amount control left out.
      json jd{{"response", "log_differential_raised"}, {"config", best.config}, {"window", cfg_.window},
              {"dropped_rows", md.dropped_differential}};
      try {
        const auto Xd = select_rows(X, md.diff_rows);
        const Eigen::MatrixXd Cd = select_rows(md.controls, md.diff_rows).rightCols(md.controls.cols() - 1);
        const std::vector<std::string> cn(md.control_names.begin() + 1, md.control_names.end());
        jd.update(detail::linear_json(fit_linear(md.y_differential, Xd, Cd, best.covariates, cn)));
      } catch (const Error& err) {
        jd["status"] = err.what();
      }
      detail::write_json(dir / "differential_best.json", jd);

      // Functional response on the scalar winner's covariates.
      const auto ff = fit_function_on_scalar(md.curves, X, best.covariates);
      detail::write_csv(dir / "functional.csv", [&](std::ostream& os) {
        csv::write_row(os, {"term", "t", "estimate", "se", "lo95", "hi95"});
        for (std::size_t k = 0; k < ff.names.size(); ++k)
          for (Eigen::Index t = 0; t < ff.beta.cols(); ++t) {
            const auto i = static_cast<Eigen::Index>(k);
            csv::write_row(os, {ff.names[k], std::to_string(t), csv::fmt(ff.beta(i, t)), csv::fmt(ff.se(i, t)),
                                csv::fmt(ff.lo95(i, t)), csv::fmt(ff.hi95(i, t))});
          }
      });
      for (std::size_t k = 0; k < ff.names.size(); ++k)
        detail::write_csv(dir / "functional" / (ff.names[k] + ".csv"), [&](std::ostream& os) {
          csv::write_row(os, {"t", "estimate", "se", "lo95", "hi95"});
          const auto i = static_cast<Eigen::Index>(k);
          for (Eigen::Index t = 0; t < ff.beta.cols(); ++t)
            csv::write_row(os, {std::to_string(t), csv::fmt(ff.beta(i, t)), csv::fmt(ff.se(i, t)),
                                csv::fmt(ff.lo95(i, t)), csv::fmt(ff.hi95(i, t))});
        });

      // Stability: window sizes, then configuration perturbation.
      SweepContext ctx{&data, &table, ledger, best_linear, kmeans_options()};
      std::vector<std::pair<int, std::size_t>> counts;
      const auto rows = window_sweep(cfg_.sweep_min, cfg_.sweep_max, ctx, &counts);
      detail::write_csv(dir / "window_sweep.csv", [&](std::ostream& os) {
        csv::write_row(os, {"window", "model", "n_firms", "term", "estimate", "se", "lo95", "hi95", "status"});
        for (const auto& r : rows)
          csv::write_row(os, {std::to_string(r.window), r.model, std::to_string(r.n_firms), r.term,
                              csv::fmt(r.estimate), csv::fmt(r.se), csv::fmt(r.estimate - 1.96 * r.se),
                              csv::fmt(r.estimate + 1.96 * r.se), r.status});
      });
      detail::write_csv(dir / "window_counts.csv", [&](std::ostream& os) {
        csv::write_row(os, {"window", "n_firms"});
        for (const auto& [w, n] : counts) csv::write_row(os, {std::to_string(w), std::to_string(n)});
      });
      json wc = json::object();
      for (const auto& [w, n] : counts) wc[std::to_string(w)] = n;
      c["window_counts"] = wc;
    }

    const auto pr = perturbation_sweep(md.y_aggregate, md.features, configs, md.controls, md.control_names);
    detail::write_csv(dir / "perturbation.csv", [&](std::ostream& os) {
      csv::write_row(os, {"group", "covariate", "estimate"});
      for (std::size_t g = 0; g < pr.estimates.size(); ++g)
        for (std::size_t i = 0; i < pr.estimates[g].size(); ++i)
          csv::write_row(os, {std::to_string(g + 1), pr.covariate[g][i], csv::fmt(pr.estimates[g][i])});
    });
    detail::write_csv(dir / "perturbation_summary.csv", [&](std::ostream& os) {
      csv::write_row(os, {"group", "mean", "sd", "n"});
      for (std::size_t g = 0; g < pr.mean.size(); ++g)
        csv::write_row(os, {std::to_string(g + 1), csv::fmt(pr.mean[g]), csv::fmt(pr.sd[g]),
                            std::to_string(pr.estimates[g].size())});
    });

    const auto cm = confusion_vs_standard(ts, regimes, data, cfg_.window);
    detail::write_json(dir / "confusion.json", {{"tp", cm.tp},
                                                {"fn", cm.fn},
                                                {"fp", cm.fp},
                                                {"tn", cm.tn},
                                                {"accuracy", cm.accuracy()},
                                                {"precision", cm.precision()},
                                                {"recall", cm.recall()},
                                                {"window", cfg_.window}});
    return c;
  }

  json backtest() {
    const auto table = load_covariates();
    const auto data = load_dataset();
    std::vector<std::string> measures;
    if (cfg_.backtest_measures == "all") {
      measures = covariate_names();
    } else {
      std::stringstream ss(cfg_.backtest_measures);
      for (std::string m; std::getline(ss, m, ',');)
        if (!m.empty()) measures.push_back(m);
    }
    BacktestOptions opt;
    opt.top_n = static_cast<std::size_t>(cfg_.top_n);
    opt.horizon = cfg_.horizon;
    opt.first_start_year = cfg_.start_year_first;
    opt.last_start_year = cfg_.start_year_last;
    std::vector<BacktestReport> reports;
    for (const auto& m : measures) reports.push_back(run_strategy(table, data, m, opt));
    detail::write_csv(out_ / "backtest" / "report.csv", [&](std::ostream& os) { write_backtest(os, reports); });
    detail::write_csv(out_ / "backtest" / "detail.csv", [&](std::ostream& os) { write_backtest_detail(os, reports); });
    std::size_t short_years = 0;
    for (const auto& r : reports)
      for (const auto& y : r.years) short_years += y.pool_short;
    return {{"measures", measures.size()}, {"short_pools", short_years}};
  }

  /// Runs every stage and writes manifest.json, also when a stage fails
  /// (the failure point is recorded and the error rethrown).
  void run_all() {
    cfg_.validate();
    check_inputs();
    json manifest = base_manifest();
    for (const char* s : kStages) {
      try {
        manifest["stages"][s] = run_stage(s);
      } catch (const std::exception& e) {
        manifest["status"] = "failed";
        manifest["failed_stage"] = s;
        manifest["error"] = e.what();
        detail::write_json(out_ / "manifest.json", manifest);
        throw;
      }
    }
    manifest["status"] = "ok";
    detail::write_json(out_ / "manifest.json", manifest);
  }

  /// Runs one stage and records its counts in an existing or new manifest.
  void run_one(const std::string& name) {
    cfg_.validate();
    if (std::find(std::begin(kStages), std::end(kStages), name) == std::end(kStages))
      throw ConfigError("unknown stage '" + name + "'");
    if (name == "ingest") check_inputs();
    json counts = run_stage(name);
    json manifest = fs::exists(out_ / "manifest.json") ? json::parse(detail::read_file(out_ / "manifest.json"))
                                                       : base_manifest();
    manifest["stages"][name] = counts;
    detail::write_json(out_ / "manifest.json", manifest);
  }

 private:
  json base_manifest() const {
    json m;
    m["version"] = VCNET_VERSION;
    m["seed"] = cfg_.seed;
    m["config"] = cfg_.echo();
    m["inputs"] = inputs_json();
    m["stages"] = json::object();
    return m;
  }

  KMeansOptions kmeans_options() const {
    KMeansOptions k;
    k.k = cfg_.kmeans_k;
    k.n_init = cfg_.kmeans_inits;
    k.log_scale = cfg_.kmeans_log_scale;
    k.seed = derive_seed(cfg_.seed, "trajectories", 0);
    return k;
  }

  Dataset load_dataset() const {
    std::ifstream d(detail::require(out_ / "ingest" / "deals.csv"), std::ios::binary);
    std::ifstream f(detail::require(out_ / "ingest" / "firms.csv"), std::ios::binary);
    auto pr = parse_deals(d, f);
    return std::move(pr.data);
  }

  std::vector<FirmCovariates> load_covariates() const {
    std::ifstream is(detail::require(out_ / "centrality" / "covariates.csv"), std::ios::binary);
    return read_covariates(is);
  }

  std::vector<ColumnTransform> load_ledger() const {
    std::ifstream is(detail::require(out_ / "features" / "transforms.csv"), std::ios::binary);
    return read_transform_ledger(is);
  }

  FeatureGrouping load_grouping() const {
    std::ifstream is(detail::require(out_ / "features" / "groups.csv"), std::ios::binary);
    return read_grouping(is);
  }

  ClusterAssignment load_regimes() const {
    std::ifstream is(detail::require(out_ / "trajectories" / "regimes.csv"), std::ios::binary);
    ClusterAssignment ca;
    for (const auto& [firm, r] : read_assignment(is)) {
      ca.firm_ids.push_back(firm);
      ca.regime.push_back(r);
    }
    return ca;
  }

  RunConfig cfg_;
  fs::path out_;
};

}  // namespace vcnet
