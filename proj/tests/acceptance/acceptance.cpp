// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
//   acceptance [--cli PATH] [--scratch DIR]

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "../oracles.hpp"
#include "vcnet/pipeline.hpp"

using namespace vcnet;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Criterion 1 and the PageRank half of criterion 3 share the graph family.
std::vector<SimpleGraph> oracle_graphs() {
  std::vector<SimpleGraph> out;
  std::size_t idx = 0;
  const double probs[] = {0.2, 0.5, 0.8};
  for (std::size_t b = 0; b < 3; ++b)
    for (int t = 0; t < (b < 2 ? 67 : 66); ++t, ++idx) {
      Rng rng(derive_seed(2025, "acceptance/graphs", idx));
      out.push_back(oracle::erdos_renyi(1 + rng.below(12), probs[b], rng));
    }
  return out;
}

std::vector<SimpleGraph> random_trees() {
  std::vector<SimpleGraph> out;
  for (std::size_t t = 0; t < 50; ++t) {
    Rng rng(derive_seed(2025, "acceptance/trees", t));
    out.push_back(oracle::random_tree(2 + rng.below(29), rng));
  }
  return out;
}

Outcome centrality_oracles() {
  const auto t0 = Clock::now();
  const auto graphs = oracle_graphs();
  double worst = 0.0;
  std::string worst_measure = "none";
  auto check = [&](const char* name, const std::vector<double>& got, const std::vector<double>& want) {
    const double d = max_abs_diff(got, want);
    if (d > worst) {
      worst = d;
      worst_measure = name;
    }
  };
  for (const auto& g : graphs) {
    const auto a = oracle::adjacency(g);
    check("degree", degree_centrality(g), oracle::degree_centrality(a));
    check("average_neighbor_degree", average_neighbor_degree(g), oracle::average_neighbor_degree(a));
    check("clustering", clustering(g), oracle::clustering(a));
    check("core_number", core_number(g), oracle::core_number(a));
    check("betweenness", betweenness(g), oracle::betweenness(a));
    check("current_flow", newman_betweenness(g), oracle::current_flow_betweenness(a));
    check("closeness", closeness(g), oracle::closeness(a));
    check("harmonic", harmonic(g), oracle::harmonic(a));
    check("eigenvector", eigenvector(g), oracle::eigenvector(a));
    check("pagerank", pagerank(g), oracle::pagerank(a));
    check("voterank", voterank(g), oracle::voterank(a));
  }
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << graphs.size() << " graphs, 11 measures, max |diff| " << worst << " (" << worst_measure << "), " << secs
     << " s";
  return {worst <= 1e-8 && secs < 60.0 && graphs.size() == 200, os.str()};
}

Outcome tree_identity() {
  double worst = 0.0;
  std::size_t max_n = 0;
  const auto trees = random_trees();
  for (const auto& g : trees) {
    worst = std::max(worst, max_abs_diff(newman_betweenness(g), betweenness(g)));
    max_n = std::max(max_n, g.size());
  }
  std::ostringstream os;
  os << trees.size() << " trees (n <= " << max_n << "), max |current-flow - shortest-path| " << worst;
  return {worst <= 1e-8 && max_n <= 30, os.str()};
}

Outcome pagerank_conservation() {
  double worst = 0.0;
  std::size_t count = 0;
  for (const auto& family : {oracle_graphs(), random_trees()})
    for (const auto& g : family) {
      if (g.empty()) continue;
      const auto pr = pagerank(g);
      worst = std::max(worst, std::abs(std::accumulate(pr.begin(), pr.end(), 0.0) - 1.0));
      ++count;
    }
  const auto k3 = SimpleGraph::from_id_edges({"a", "b", "c"}, {{"a", "b"}, {"b", "c"}, {"a", "c"}});
  const auto pk = pagerank(k3);
  double k3_err = 0.0;
  for (double v : pk) k3_err = std::max(k3_err, std::abs(v - 1.0 / 3.0));
  std::ostringstream os;
  os << count << " graphs, max |sum - 1| " << worst << "; K3 max |pr - 1/3| " << k3_err;
  return {worst <= 1e-9 && k3_err <= 1e-12, os.str()};
}

Outcome projection_oracle() {
  using EdgeSet = std::set<std::pair<std::string, std::string>>;
  auto edge_set = [](const ProjectedGraph& pg) {
    EdgeSet s;
    for (auto [u, v] : pg.graph.edges()) {
      auto a = pg.graph.id(u), b = pg.graph.id(v);
      if (b < a) std::swap(a, b);
      s.emplace(a, b);
    }
    return s;
  };
  std::size_t mismatches = 0, monotone_breaks = 0, checks = 0;
  for (std::size_t trial = 0; trial < 100; ++trial) {
    Rng rng(derive_seed(2025, "acceptance/projections", trial));
    std::vector<DealRecord> deals;
    const auto n_deals = 1 + rng.below(30);
    for (std::size_t k = 0; k < n_deals; ++k) {
      const Date d = Date::from_serial(Date{2000, 1, 1}.serial() + static_cast<std::int64_t>(rng.below(15 * 365)));
      deals.push_back({"f" + std::to_string(rng.below(10)), "i" + std::to_string(rng.below(10)),
                       "r" + std::to_string(rng.below(3)), d, 1});
    }
    const auto g = build_bipartite(deals);
    for (int year = g.min_year(); year <= g.max_year(); ++year) {
      const Date end{year, 12, 31};
      EdgeSet prev;
      for (int w : {5, 7, 10}) {
        EdgeSet want;
        for (const auto& a : deals)
          for (const auto& b : deals)
            if (a.date <= end && b.date <= end && a.investor_id == b.investor_id && a.firm_id < b.firm_id &&
                std::abs(a.date.serial() - b.date.serial()) <= w * 365.25)
              want.emplace(a.firm_id, b.firm_id);
        const auto got = edge_set(project_firms(g, year, w));
        ++checks;
        mismatches += got != want;
        monotone_breaks += !std::includes(got.begin(), got.end(), prev.begin(), prev.end());
        prev = got;
      }
      EdgeSet want;
      for (const auto& a : deals)
        for (const auto& b : deals)
          if (a.date <= end && b.date <= end && a.firm_id == b.firm_id && a.round_id == b.round_id &&
              a.investor_id < b.investor_id)
            want.emplace(a.investor_id, b.investor_id);
      ++checks;
      mismatches += edge_set(project_investors(g, year)) != want;
    }
  }
  std::ostringstream os;
  os << "100 deal sets, " << checks << " projections, " << mismatches << " mismatches, " << monotone_breaks
     << " window-monotonicity violations";
  return {mismatches == 0 && monotone_breaks == 0, os.str()};
}

Outcome reference_arithmetic() {
  const ConfusionMatrix cm{294, 664, 225, 1889};
  auto r2 = [](double x) { return std::round(x * 100.0) / 100.0; };
  const auto rates = regime_rates(519, 3072 - 519);
  const double share = std::round(rates.share_high * 10000.0) / 100.0;
  std::ostringstream os;
  os << "accuracy " << r2(cm.accuracy()) << ", precision " << r2(cm.precision()) << ", recall " << r2(cm.recall())
     << "; 519/3072 = " << share << "%";
  const bool ok = r2(cm.accuracy()) == 0.71 && r2(cm.precision()) == 0.57 && r2(cm.recall()) == 0.31 &&
                  share == 16.89;
  return {ok, os.str()};
}

Outcome regression_oracles() {
  Rng rng(derive_seed(2025, "acceptance/regression", 0));
  auto normal_matrix = [&](Eigen::Index n, Eigen::Index p) {
    Eigen::MatrixXd X(n, p);
    for (auto& v : X.reshaped()) v = rng.normal();
    return X;
  };
  double ols = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto n = static_cast<Eigen::Index>(10 + rng.below(41));
    const auto p = static_cast<Eigen::Index>(1 + rng.below(4));
    const auto X = normal_matrix(n, p);
    Eigen::VectorXd y = X * Eigen::VectorXd::LinSpaced(p, -1.0, 1.0);
    for (auto& v : y) v += rng.normal();
    const auto f = fit_linear(y, X, Eigen::MatrixXd(n, 0));
    Eigen::MatrixXd D(n, p + 1);
    D << Eigen::VectorXd::Ones(n), X;
    ols = std::max(ols, (f.beta - oracle::ols_normal_equations(D, y)).cwiseAbs().maxCoeff());
  }
  double grad = 0.0, score = 0.0, mcfadden = 0.0;
  bool all_converged = true;
  for (int t = 0; t < 50; ++t) {
    const auto X = normal_matrix(150, 2);
    Eigen::MatrixXd D(150, 3);
    D << Eigen::VectorXd::Ones(150), X;
    Eigen::VectorXd y(150);
    for (Eigen::Index i = 0; i < 150; ++i) y(i) = rng.bernoulli(1.0 / (1.0 + std::exp(-(0.3 + X(i, 0) - 0.5 * X(i, 1)))));
    Eigen::VectorXd b(3);
    for (auto& v : b) v = rng.normal();
    const auto num = oracle::numeric_gradient([&](const Eigen::VectorXd& x) { return logistic_loglik(y, D, x); }, b);
    grad = std::max(grad, (num - logistic_gradient(y, D, b)).cwiseAbs().maxCoeff());
    const auto f = fit_logistic(y, X);
    all_converged = all_converged && f.converged;
    score = std::max(score, logistic_gradient(y, D, f.beta).cwiseAbs().maxCoeff());
    mcfadden = std::max(mcfadden, std::abs(f.pseudo_r2 - (1.0 - f.loglik / f.loglik_null)));
  }
  const auto X = normal_matrix(60, 2);
  Eigen::MatrixXd Y = normal_matrix(60, 11);
  const auto ff = fit_function_on_scalar(Y, X);
  bool pointwise = true;
  for (Eigen::Index t = 0; t < Y.cols(); ++t) {
    const auto f = fit_linear(Y.col(t), X, Eigen::MatrixXd(60, 0));
    pointwise = pointwise && ff.beta.col(t) == f.beta && ff.se.col(t) == f.se;
  }
  std::ostringstream os;
  os << "OLS max |diff| " << ols << "; gradient max |diff| " << grad << "; converged score " << score
     << "; McFadden " << mcfadden << "; pointwise FoSR " << (pointwise ? "exact" : "differs");
  return {ols <= 1e-8 && grad <= 1e-4 && score < 1e-6 && all_converged && mcfadden <= 1e-12 && pointwise, os.str()};
}

Outcome hypergeometric_exactness() {
  double worst = 0.0;
  std::size_t cases = 0;
  for (unsigned N = 0; N <= 30; ++N)
    for (unsigned K = 0; K <= N; ++K)
      for (unsigned n = 0; n <= N; ++n)
        for (unsigned k = 0; k <= n; ++k, ++cases)
          worst = std::max(worst, std::abs(hypergeom_pvalue(N, K, n, k) - oracle::hypergeom_tail(N, K, n, k)));
  const double ex = std::abs(hypergeom_pvalue(10, 5, 2, 2) - 10.0 / 45.0);
  std::ostringstream os;
  os << cases << " parameter sets, max |diff| " << worst << "; N=10,K=5,n=2,k=2 |p - 10/45| " << ex;
  return {worst <= 1e-12 && ex <= 1e-12, os.str()};
}

Outcome planted_recovery() {
  const auto t0 = Clock::now();
  const std::uint64_t seed = 7;
  SyntheticConfig sc;
  sc.seed = seed;
  const auto s = generate_synthetic(sc);
  std::map<std::string, bool> truth;
  for (const auto& p : s.truth) truth[p.firm_id] = p.high_regime;

  // Regimes.
  const auto ts = build_trajectories(s.data, 10);
  KMeansOptions km;
  km.seed = derive_seed(seed, "trajectories", 0);
  const auto ca = functional_kmeans(ts.trajectories, km);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < ca.firm_ids.size(); ++i) hit += (ca.regime[i] == Regime::High) == truth[ca.firm_ids[i]];
  const double accuracy = static_cast<double>(hit) / static_cast<double>(ca.firm_ids.size());

  // Planted covariate: first-round connectedness drives both regime and exits.
  const auto table = build_covariate_table(build_bipartite(s.data.deals));
  const auto& names = covariate_names();
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(table.size()), static_cast<Eigen::Index>(names.size()));
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < table.size(); ++i) {
    ids.push_back(table[i].firm_id);
    for (std::size_t j = 0; j < names.size(); ++j)
      raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = table[i].values[j];
  }
  const auto ledger = preprocess(ids, names, raw).ledger;
  const auto md = build_model_data(ts, ca, table, ledger);
  const std::string planted = "degree_centrality_org";
  const auto X = select_columns(md.features.X, column_indices(md.features.names, {planted}));

  const auto be = balanced_ensemble(md.y_regime, X, {planted}, 1000, derive_seed(seed, "regress/balance", 0));
  std::size_t logit_pos = 0;
  for (const auto& f : be.replicates) logit_pos += f.beta(1) > 0;
  const double logit_share = be.replicates.empty() ? 0.0 : static_cast<double>(logit_pos) / be.replicates.size();

  // Linear fits on the same balanced subsamples (same seeds, same draws).
  std::vector<Eigen::Index> pos, neg;
  for (Eigen::Index i = 0; i < md.y_regime.size(); ++i) (md.y_regime(i) == 1.0 ? pos : neg).push_back(i);
  const auto& minor = pos.size() <= neg.size() ? pos : neg;
  const auto& major = pos.size() <= neg.size() ? neg : pos;
  const auto bal_seed = derive_seed(seed, "regress/balance", 0);
  std::size_t lin_pos = 0, lin_fits = 0;
  for (std::size_t r = 0; r < 1000; ++r) {
    Rng rng(derive_seed(bal_seed, "balance", r));
    std::vector<char> take(static_cast<std::size_t>(md.y_regime.size()), 0);
    for (auto i : minor) take[static_cast<std::size_t>(i)] = 1;
    for (auto k : rng.sample_without_replacement(major.size(), minor.size())) take[static_cast<std::size_t>(major[k])] = 1;
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < md.y_regime.size(); ++i)
      if (take[static_cast<std::size_t>(i)]) rows.push_back(i);
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) y(static_cast<Eigen::Index>(k)) = md.y_aggregate(rows[k]);
    try {
      const auto f = fit_linear(y, select_rows(X, rows), select_rows(md.controls, rows), {planted}, md.control_names);
      ++lin_fits;
      lin_pos += f.beta(1) > 0;
    } catch (const Error&) {
    }
  }
  const double lin_share = static_cast<double>(lin_pos) / 1000.0;

  // Backtest.
  const auto rep = run_strategy(table, s.data, planted);
  std::size_t significant = 0;
  for (const auto& y : rep.years) significant += y.p_value < 0.05;

  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << "k-means accuracy " << accuracy << " (" << ca.firm_ids.size() << " firms); " << planted
     << " positive in " << logit_share * 100 << "% of " << be.replicates.size() << " logistic and " << lin_share * 100
     << "% of " << lin_fits << " linear replicates; backtest p<0.05 in " << significant << "/" << rep.years.size()
     << " years; " << secs << " s";
  const bool ok = accuracy >= 0.95 && be.replicates.size() == 1000 && logit_share >= 0.95 && lin_share >= 0.95 &&
                  rep.years.size() == 11 && significant >= 8 && secs < 300.0;
  return {ok, os.str()};
}

int run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = cli + " " + args + " > /dev/null";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

Outcome determinism(const std::string& cli, const fs::path& scratch) {
  if (cli.empty()) return {false, "no CLI path given"};
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  const auto cfg = scratch / "run.cfg";
  detail::write_file(cfg, "synthetic = true\nseed = 7\nwindow = 10\nsweep_min = 5\nsweep_max = 12\n");
  const auto a = scratch / "a", b = scratch / "b";
  const int ra = run_cli(cli, "run --config " + cfg.string() + " --output " + a.string());
  const int rb = run_cli(cli, "run --config " + cfg.string() + " --output " + b.string());
  if (ra != 0 || rb != 0) return {false, "run exit codes " + std::to_string(ra) + ", " + std::to_string(rb)};
  auto tree = [](const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = detail::read_file(e.path());
    return out;
  };
  const auto ta = tree(a), tb = tree(b);
  std::size_t differing = 0;
  for (const auto& [p, bytes] : ta) differing += !tb.count(p) || tb.at(p) != bytes;
  differing += ta.size() != tb.size();

  std::istringstream counts(ta.count("regress/window_counts.csv") ? ta.at("regress/window_counts.csv") : "");
  const auto table = csv::read_table(counts);
  bool monotone = table.rows.size() == 8;
  std::string seq;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    seq += (i ? "," : "") + table.rows[i][1];
    if (i && std::stoul(table.rows[i][1]) > std::stoul(table.rows[i - 1][1])) monotone = false;
  }
  std::ostringstream os;
  os << ta.size() << " artifacts, " << differing << " differing; firm counts W=5..12: " << seq;
  fs::remove_all(scratch);
  return {differing == 0 && monotone, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  fs::path scratch = fs::temp_directory_path() / "vcnet_acceptance";
#ifdef VCNET_CLI_PATH
  cli = VCNET_CLI_PATH;
#endif
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string a = argv[i];
    if (a == "--cli") cli = argv[i + 1];
    else if (a == "--scratch") scratch = argv[i + 1];
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"centrality oracle suite", centrality_oracles},
      {"tree identity", tree_identity},
      {"pagerank conservation", pagerank_conservation},
      {"projection oracle", projection_oracle},
      {"reference arithmetic", reference_arithmetic},
      {"regression oracles", regression_oracles},
      {"hypergeometric exactness", hypergeometric_exactness},
      {"planted-structure recovery", planted_recovery},
      {"determinism", [&] { return determinism(cli, scratch); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << i + 1 << " " << (o.pass ? "PASS" : "FAIL") << " " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all criteria passed") << std::endl;
  return failed ? 1 : 0;
}
