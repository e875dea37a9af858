#pragma once

// Model data assembly, exhaustive one-per-group configuration search, the
// window-size and configuration-perturbation sweeps, and the comparison
// between regimes and exit-based success.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vcnet/covariates.hpp"
#include "vcnet/features.hpp"
#include "vcnet/ingest.hpp"
#include "vcnet/regress.hpp"
#include "vcnet/trajectories.hpp"

namespace vcnet {

/// Everything the regressions need, one row per firm with a trajectory and a
/// covariate row, sorted by firm_id.
struct ModelData {
  int window = 0;
  std::vector<std::string> firm_ids;
  std::vector<std::string> subsectors;
  Eigen::VectorXd y_regime;      // 1 = HIGH
  Eigen::VectorXd y_aggregate;   // log(1 + raised through year W)
  Eigen::VectorXd y_differential;  // log(1 + raised - first amount), rows in diff_rows only
  std::vector<Eigen::Index> diff_rows;
  Eigen::MatrixXd curves;        // log(1 + trajectory)
  Eigen::MatrixXd controls;      // log first amount, subsector indicators
  std::vector<std::string> control_names;
  FeatureMatrix features;        // covariates transformed by the features ledger
  std::size_t dropped_differential = 0;
};

inline ModelData build_model_data(const TrajectorySet& ts, const ClusterAssignment& ca,
                                  const std::vector<FirmCovariates>& table,
                                  const std::vector<ColumnTransform>& ledger) {
  std::map<std::string, const FirmCovariates*> cov;
  for (const auto& c : table) cov[c.firm_id] = &c;
  std::vector<const Trajectory*> rows;
  for (const auto& t : ts.trajectories)
    if (cov.count(t.firm_id)) rows.push_back(&t);
  std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->firm_id < b->firm_id; });

  ModelData md;
  md.window = ts.window;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto T = static_cast<Eigen::Index>(ts.window + 1);
  md.y_regime.resize(n);
  md.y_aggregate.resize(n);
  md.curves.resize(n, T);
  std::set<std::string> subs;
  for (auto* t : rows) subs.insert(t->subsector);
  // The alphabetically first subsector is the reference level.
  std::vector<std::string> dummies(subs.begin(), subs.end());
  if (!dummies.empty()) dummies.erase(dummies.begin());
  md.control_names.push_back("log_first_amount");
  for (const auto& s : dummies) md.control_names.push_back("subsector[" + s + "]");
  md.controls = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(md.control_names.size()));

  const auto& names = covariate_names();
  Eigen::MatrixXd raw(n, static_cast<Eigen::Index>(names.size()));
  std::vector<double> diff;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = *rows[static_cast<std::size_t>(i)];
    const auto& c = *cov.at(t.firm_id);
    md.firm_ids.push_back(t.firm_id);
    md.subsectors.push_back(t.subsector);
    md.y_regime(i) = ca.of(t.firm_id) == Regime::High ? 1.0 : 0.0;
    for (Eigen::Index k = 0; k < T; ++k)
      md.curves(i, k) = std::log1p(static_cast<double>(t.values[static_cast<std::size_t>(k)]));
    md.y_aggregate(i) = md.curves(i, T - 1);
    const std::int64_t d = t.values.back() - c.first_amount;
    if (d > 0) {
      md.diff_rows.push_back(i);
      diff.push_back(std::log1p(static_cast<double>(d)));
    } else {
      ++md.dropped_differential;
    }
    md.controls(i, 0) = std::log1p(static_cast<double>(c.first_amount));
    auto it = std::find(dummies.begin(), dummies.end(), t.subsector);
    if (it != dummies.end()) md.controls(i, 1 + (it - dummies.begin())) = 1.0;
    for (std::size_t j = 0; j < names.size(); ++j) raw(i, static_cast<Eigen::Index>(j)) = c.values[j];
  }
  md.y_differential = Eigen::Map<Eigen::VectorXd>(diff.data(), static_cast<Eigen::Index>(diff.size()));
  md.features = apply_transforms(md.firm_ids, names, raw, ledger);
  return md;
}

inline Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(cols[j]));
  return out;
}

inline Eigen::MatrixXd select_rows(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  return out;
}

/// Column indices of `wanted` in `names`; throws naming the first absent one.
inline std::vector<std::size_t> column_indices(const std::vector<std::string>& names,
                                               const std::vector<std::string>& wanted) {
  std::vector<std::size_t> out;
  for (const auto& w : wanted) {
    auto it = std::find(names.begin(), names.end(), w);
    if (it == names.end()) throw NotFoundError("covariate '" + w + "' not available");
    out.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  return out;
}

enum class FitKind { Logistic, Linear };

struct ConfigScore {
  std::size_t config = 0;  // index in enumeration order
  std::vector<std::string> covariates;
  bool ok = false;
  std::string error;
  double score = 0.0;  // log-likelihood (logistic) or R^2 (linear)
  double aux = 0.0;    // McFadden R^2 (logistic) or adjusted R^2 (linear)
};

/// Ranked leaderboard: successful fits by score descending (ties by config
/// index), failures last in config order.
inline void rank_scores(std::vector<ConfigScore>& v) {
  std::stable_sort(v.begin(), v.end(), [](const ConfigScore& a, const ConfigScore& b) {
    if (a.ok != b.ok) return a.ok;
    if (a.ok && a.score != b.score) return a.score > b.score;
    return a.config < b.config;
  });
}

inline std::vector<ConfigScore> select_model(FitKind kind, const Eigen::VectorXd& y, const FeatureMatrix& fm,
                                             const std::vector<std::vector<std::size_t>>& configs,
                                             const Eigen::MatrixXd& controls = {},
                                             const std::vector<std::string>& control_names = {}) {
  std::vector<ConfigScore> out;
  out.reserve(configs.size());
  const Eigen::MatrixXd C = controls.size() ? controls : Eigen::MatrixXd(y.size(), 0);
  for (std::size_t c = 0; c < configs.size(); ++c) {
    ConfigScore s;
    s.config = c;
    for (auto j : configs[c]) s.covariates.push_back(fm.names[j]);
    const Eigen::MatrixXd X = select_columns(fm.X, configs[c]);
    try {
      if (kind == FitKind::Logistic) {
        const auto f = fit_logistic(y, X, s.covariates);
        s.ok = f.converged;
        if (!s.ok) s.error = f.separated ? "separation" : "no convergence";
        s.score = f.loglik;
        s.aux = f.pseudo_r2;
      } else {
        const auto f = fit_linear(y, X, C, s.covariates, control_names);
        s.ok = true;
        s.score = f.r2;
        s.aux = f.adj_r2;
      }
    } catch (const Error& e) {
      s.error = e.what();
    }
    out.push_back(std::move(s));
  }
  rank_scores(out);
  return out;
}

/// Exit-based success: exit status dated within W calendar years of the
/// first-investment year. Prediction: HIGH regime.
inline ConfusionMatrix confusion_vs_standard(const TrajectorySet& ts, const ClusterAssignment& ca,
                                             const Dataset& data, int window) {
  const auto meta = data.firm_map();
  ConfusionMatrix cm;
  for (const auto& t : ts.trajectories) {
    auto it = meta.find(t.firm_id);
    bool success = false;
    if (it != meta.end() && is_exit(it->second.status) && it->second.status_date)
      success = it->second.status_date->year - t.first_year <= window;
    cm.add(success, ca.of(t.firm_id) == Regime::High);
  }
  return cm;
}

struct SweepRow {
  int window = 0;
  std::string model;  // "linear" or "logistic"
  std::size_t n_firms = 0;
  std::string term;
  double estimate = 0.0;
  double se = 0.0;
  std::string status;  // "ok" or the failure reason
};

struct SweepContext {
  const Dataset* data = nullptr;
  const std::vector<FirmCovariates>* table = nullptr;
  std::vector<ColumnTransform> ledger;
  std::vector<std::string> config;  // fixed covariate set
  KMeansOptions kmeans;
};

/// Per window: rebuild trajectories and regimes, then refit the fixed
/// configuration (linear on log aggregate raised with controls, logistic on
/// the regime). Returns (window, retained firm count) pairs alongside.
inline std::vector<SweepRow> window_sweep(int w_min, int w_max, const SweepContext& ctx,
                                          std::vector<std::pair<int, std::size_t>>* counts = nullptr) {
  std::vector<SweepRow> out;
  for (int w = w_min; w <= w_max; ++w) {
    const auto ts = build_trajectories(*ctx.data, w);
    const auto ca = functional_kmeans(ts.trajectories, ctx.kmeans);
    const auto md = build_model_data(ts, ca, *ctx.table, ctx.ledger);
    if (counts) counts->emplace_back(w, md.firm_ids.size());
    auto record = [&](const std::string& model, const std::vector<std::string>& terms, const Eigen::VectorXd& b,
                      const Eigen::VectorXd& se, const std::string& status) {
      for (std::size_t j = 0; j < terms.size(); ++j) {
        SweepRow r{w, model, md.firm_ids.size(), terms[j], 0.0, 0.0, status};
        if (status == "ok") {
          r.estimate = b(static_cast<Eigen::Index>(j));
          r.se = se(static_cast<Eigen::Index>(j));
        }
        out.push_back(std::move(r));
      }
    };
    std::vector<std::string> terms{"intercept"};
    terms.insert(terms.end(), ctx.config.begin(), ctx.config.end());
    try {
      const auto X = select_columns(md.features.X, column_indices(md.features.names, ctx.config));
      try {
        const auto f = fit_linear(md.y_aggregate, X, md.controls, ctx.config, md.control_names);
        record("linear", terms, f.beta, f.se, "ok");
      } catch (const Error& e) {
        record("linear", terms, {}, {}, e.what());
      }
      try {
        const auto f = fit_logistic(md.y_regime, X, ctx.config);
        record("logistic", terms, f.beta, f.se, f.converged ? "ok" : (f.separated ? "separation" : "no convergence"));
      } catch (const Error& e) {
        record("logistic", terms, {}, {}, e.what());
      }
    } catch (const Error& e) {
      record("linear", terms, {}, {}, e.what());
      record("logistic", terms, {}, {}, e.what());
    }
  }
  return out;
}

struct PerturbationResult {
  // Per group (1..k): coefficient of the group's representative in every
  // configuration that fitted, in configuration order.
  std::vector<std::vector<double>> estimates;
  std::vector<std::vector<std::string>> covariate;  // representative per estimate
  std::vector<double> mean, sd;
  std::size_t failed = 0;
};

/// Linear fits (with controls) of every configuration; configuration c
/// picks configs[c][g] for group g+1.
inline PerturbationResult perturbation_sweep(const Eigen::VectorXd& y, const FeatureMatrix& fm,
                                             const std::vector<std::vector<std::size_t>>& configs,
                                             const Eigen::MatrixXd& controls,
                                             const std::vector<std::string>& control_names) {
  PerturbationResult pr;
  const std::size_t k = configs.empty() ? 0 : configs.front().size();
  pr.estimates.resize(k);
  pr.covariate.resize(k);
  for (const auto& cfg : configs) {
    try {
      const auto f = fit_linear(y, select_columns(fm.X, cfg), controls, {}, control_names);
      for (std::size_t g = 0; g < k; ++g) {
        pr.estimates[g].push_back(f.beta(static_cast<Eigen::Index>(g + 1)));
        pr.covariate[g].push_back(fm.names[cfg[g]]);
      }
    } catch (const Error&) {
      ++pr.failed;
    }
  }
  for (std::size_t g = 0; g < k; ++g) {
    const auto& e = pr.estimates[g];
    double m = 0.0, s = 0.0;
    for (double v : e) m += v;
    m = e.empty() ? 0.0 : m / static_cast<double>(e.size());
    for (double v : e) s += (v - m) * (v - m);
    pr.mean.push_back(m);
    pr.sd.push_back(e.size() > 1 ? std::sqrt(s / static_cast<double>(e.size() - 1)) : 0.0);
  }
  return pr;
}

}  // namespace vcnet
