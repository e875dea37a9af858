#pragma once

// Logistic regression by IRLS, balanced-subsample ensembles, OLS through a
// Householder QR, pointwise function-on-scalar regression, and the
// confusion matrix against the exit-based definition of success.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "vcnet/error.hpp"
#include "vcnet/rng.hpp"

namespace vcnet {

namespace detail {

inline Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd D(X.rows(), X.cols() + 1);
  D.col(0).setOnes();
  D.rightCols(X.cols()) = X;
  return D;
}

/// Throws RankDeficientError naming the columns a pivoted QR leaves out.
inline void require_full_rank(const Eigen::MatrixXd& D, const std::vector<std::string>& names) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
  qr.setThreshold(1e-10);
  const auto rank = qr.rank();
  if (rank == D.cols()) return;
  std::string cols;
  for (Eigen::Index i = rank; i < D.cols(); ++i) {
    const auto c = static_cast<std::size_t>(qr.colsPermutation().indices()(i));
    cols += (cols.empty() ? "" : ", ") + (c < names.size() ? names[c] : "column " + std::to_string(c));
  }
  throw RankDeficientError("design matrix is rank deficient (rank " + std::to_string(rank) + " of " +
                           std::to_string(D.cols()) + "); collinear: " + cols);
}

inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

inline std::vector<std::string> prefixed_names(const std::vector<std::string>& names, std::size_t cols) {
  std::vector<std::string> out{"intercept"};
  for (std::size_t j = 0; j < cols; ++j) out.push_back(j < names.size() ? names[j] : "x" + std::to_string(j + 1));
  return out;
}

}  // namespace detail

/// Log-likelihood of a logistic model with design D (intercept included).
inline double logistic_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& D, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = D * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) ll += y(i) * eta(i) - detail::softplus(eta(i));
  return ll;
}

/// Score vector D^T (y - mu).
inline Eigen::VectorXd logistic_gradient(const Eigen::VectorXd& y, const Eigen::MatrixXd& D,
                                         const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = D * beta;
  Eigen::VectorXd r(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) r(i) = y(i) - detail::sigmoid(eta(i));
  return D.transpose() * r;
}

struct LogisticFit {
  std::vector<std::string> names;  // "intercept" first
  Eigen::VectorXd beta, se, z, p;
  double loglik = 0.0;
  double loglik_null = 0.0;  // intercept-only model
  double pseudo_r2 = 0.0;    // McFadden
  std::size_t n = 0;
  int iterations = 0;
  bool converged = false;
  bool separated = false;
  double score_max = 0.0;  // max |gradient| at the returned beta
};

/// Maximum likelihood by iteratively reweighted least squares (Newton steps
/// from beta = 0). Stops when max |delta beta| < tol or after max_iter steps;
/// any |beta| above `separation_bound` marks the fit as separated.
inline LogisticFit fit_logistic(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                const std::vector<std::string>& names = {}, int max_iter = 100, double tol = 1e-8,
                                double separation_bound = 30.0) {
  if (y.size() != X.rows()) throw ConfigError("fit_logistic: y and X row counts differ");
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y(i) != 0.0 && y(i) != 1.0) throw ConfigError("fit_logistic: response must be 0/1");
  const Eigen::MatrixXd D = detail::with_intercept(X);
  LogisticFit f;
  f.names = detail::prefixed_names(names, static_cast<std::size_t>(X.cols()));
  f.n = static_cast<std::size_t>(y.size());
  if (D.rows() < D.cols()) throw RankDeficientError("fit_logistic: fewer rows than parameters");
  detail::require_full_rank(D, f.names);

  const auto p = D.cols();
  f.beta = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd info(p, p);
  auto information = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd eta = D * b;
    Eigen::VectorXd w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double mu = detail::sigmoid(eta(i));
      w(i) = mu * (1.0 - mu);
    }
    return Eigen::MatrixXd(D.transpose() * w.asDiagonal() * D);
  };

  for (f.iterations = 0; f.iterations < max_iter;) {
    info = information(f.beta);
    const Eigen::VectorXd g = logistic_gradient(y, D, f.beta);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    const Eigen::VectorXd step = ldlt.solve(g);
    f.beta += step;
    ++f.iterations;
    if (!f.beta.allFinite() || f.beta.cwiseAbs().maxCoeff() > separation_bound) {
      f.separated = true;
      break;
    }
    if (step.cwiseAbs().maxCoeff() < tol) {
      f.converged = true;
      break;
    }
  }

  const double n1 = y.sum(), n0 = static_cast<double>(y.size()) - n1;
  f.loglik_null = (n1 > 0 ? n1 * std::log(n1 / (n0 + n1)) : 0.0) + (n0 > 0 ? n0 * std::log(n0 / (n0 + n1)) : 0.0);
  if (f.beta.allFinite()) {
    f.loglik = logistic_loglik(y, D, f.beta);
    f.score_max = logistic_gradient(y, D, f.beta).cwiseAbs().maxCoeff();
    info = information(f.beta);
    const Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    f.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  } else {
    f.loglik = -std::numeric_limits<double>::infinity();
    f.se = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
  }
  f.pseudo_r2 = f.loglik_null != 0.0 ? 1.0 - f.loglik / f.loglik_null : 0.0;
  f.z = f.beta.cwiseQuotient(f.se);
  f.p.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) f.p(j) = detail::normal_two_sided_p(f.z(j));
  return f;
}

struct BalancedEnsemble {
  std::vector<std::string> names;
  std::vector<LogisticFit> replicates;
  Eigen::VectorXd mean, sd;  // per coefficient over replicates
  double mean_loglik = 0.0;
  double mean_pseudo_r2 = 0.0;
  double max_pseudo_r2 = 0.0;
  std::size_t attempts = 0;
  std::size_t discarded = 0;  // separated or non-converged replicates
  std::size_t class_size = 0;  // rows per class in each replicate
};

/// Each replicate keeps every minority-class row and an equal-sized random
/// subset of the majority class (rows stay in input order). Attempt a draws
/// from derive_seed(seed, "balance", a); failed fits are discarded and
/// redrawn, up to 2 x n_reps attempts.
inline BalancedEnsemble balanced_ensemble(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                          const std::vector<std::string>& names, std::size_t n_reps,
                                          std::uint64_t seed) {
  std::vector<Eigen::Index> pos, neg;
  for (Eigen::Index i = 0; i < y.size(); ++i) (y(i) == 1.0 ? pos : neg).push_back(i);
  const bool pos_minor = pos.size() <= neg.size();
  const auto& minor = pos_minor ? pos : neg;
  const auto& major = pos_minor ? neg : pos;
  const auto p = static_cast<std::size_t>(X.cols()) + 1;
  if (minor.size() < p)
    throw ConfigError("balanced_ensemble: minority class has " + std::to_string(minor.size()) +
                      " rows, need at least " + std::to_string(p));

  BalancedEnsemble be;
  be.names = detail::prefixed_names(names, static_cast<std::size_t>(X.cols()));
  be.class_size = minor.size();
  std::vector<char> take_minor(static_cast<std::size_t>(y.size()), 0);
  for (auto i : minor) take_minor[static_cast<std::size_t>(i)] = 1;

  while (be.replicates.size() < n_reps && be.attempts < 2 * n_reps) {
    Rng rng(derive_seed(seed, "balance", be.attempts));
    ++be.attempts;
    std::vector<char> take = take_minor;
    for (auto k : rng.sample_without_replacement(major.size(), minor.size()))
      take[static_cast<std::size_t>(major[k])] = 1;
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < y.size(); ++i)
      if (take[static_cast<std::size_t>(i)]) rows.push_back(i);
    Eigen::VectorXd ys(static_cast<Eigen::Index>(rows.size()));
    Eigen::MatrixXd Xs(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      ys(static_cast<Eigen::Index>(r)) = y(rows[r]);
      Xs.row(static_cast<Eigen::Index>(r)) = X.row(rows[r]);
    }
    LogisticFit f;
    try {
      f = fit_logistic(ys, Xs, names);
    } catch (const RankDeficientError&) {
      ++be.discarded;
      continue;
    }
    if (!f.converged) {
      ++be.discarded;
      continue;
    }
    be.replicates.push_back(std::move(f));
  }

  const auto m = static_cast<Eigen::Index>(p);
  be.mean = Eigen::VectorXd::Zero(m);
  be.sd = Eigen::VectorXd::Zero(m);
  if (be.replicates.empty()) return be;
  const auto r = static_cast<double>(be.replicates.size());
  for (const auto& f : be.replicates) {
    be.mean += f.beta;
    be.mean_loglik += f.loglik / r;
    be.mean_pseudo_r2 += f.pseudo_r2 / r;
    be.max_pseudo_r2 = std::max(be.max_pseudo_r2, f.pseudo_r2);
  }
  be.mean /= r;
  if (be.replicates.size() > 1) {
    for (const auto& f : be.replicates) be.sd += (f.beta - be.mean).cwiseAbs2();
    be.sd = (be.sd / (r - 1.0)).cwiseSqrt();
  }
  return be;
}

struct LinearFit {
  std::vector<std::string> names;  // intercept, covariates, then controls
  Eigen::VectorXd beta, se, t, p;
  double r2 = 0.0;
  double adj_r2 = 0.0;
  double f_stat = 0.0;
  double f_p = 1.0;
  double df_model = 0.0;
  double df_resid = 0.0;
  double sigma2 = 0.0;  // residual variance
  std::size_t n = 0;
};

/// OLS of y on [1, X, C] via Householder QR with classical standard errors
/// and the overall F test against the intercept-only model.
inline LinearFit fit_linear(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const Eigen::MatrixXd& C,
                            const std::vector<std::string>& x_names = {},
                            const std::vector<std::string>& c_names = {}) {
  if (y.size() != X.rows() || (C.cols() > 0 && C.rows() != X.rows()))
    throw ConfigError("fit_linear: row counts differ");
  const Eigen::Index n = y.size(), k = 1 + X.cols() + C.cols();
  LinearFit f;
  f.names = detail::prefixed_names(x_names, static_cast<std::size_t>(X.cols()));
  for (Eigen::Index j = 0; j < C.cols(); ++j)
    f.names.push_back(static_cast<std::size_t>(j) < c_names.size() ? c_names[static_cast<std::size_t>(j)]
                                                                   : "c" + std::to_string(j + 1));
  if (n <= k)
    throw ConfigError("fit_linear: need more observations (" + std::to_string(n) + ") than columns (" +
                      std::to_string(k) + ")");
  Eigen::MatrixXd D(n, k);
  D.col(0).setOnes();
  D.middleCols(1, X.cols()) = X;
  if (C.cols() > 0) D.rightCols(C.cols()) = C;
  detail::require_full_rank(D, f.names);

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(D);
  f.beta = qr.solve(y);
  const Eigen::MatrixXd R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::VectorXd resid = y - D * f.beta;
  const double rss = resid.squaredNorm();
  const double tss = (y.array() - y.mean()).square().sum();
  f.n = static_cast<std::size_t>(n);
  f.df_model = static_cast<double>(k - 1);
  f.df_resid = static_cast<double>(n - k);
  f.sigma2 = rss / f.df_resid;
  f.se = ((Rinv * Rinv.transpose()).diagonal() * f.sigma2).cwiseSqrt();
  f.r2 = tss > 0 ? 1.0 - rss / tss : 0.0;
  f.adj_r2 = 1.0 - (1.0 - f.r2) * static_cast<double>(n - 1) / f.df_resid;
  f.t = f.beta.cwiseQuotient(f.se);
  f.p.resize(k);
  boost::math::students_t tdist(f.df_resid);
  for (Eigen::Index j = 0; j < k; ++j)
    f.p(j) = std::isfinite(f.t(j)) ? 2.0 * boost::math::cdf(boost::math::complement(tdist, std::abs(f.t(j)))) : 0.0;
  if (f.df_model > 0) {
    f.f_stat = f.r2 < 1.0 ? (f.r2 / f.df_model) / ((1.0 - f.r2) / f.df_resid) : std::numeric_limits<double>::infinity();
    f.f_p = std::isfinite(f.f_stat)
                ? boost::math::cdf(boost::math::complement(boost::math::fisher_f(f.df_model, f.df_resid), f.f_stat))
                : 0.0;
  } else {
    f.f_stat = std::numeric_limits<double>::quiet_NaN();
    f.f_p = std::numeric_limits<double>::quiet_NaN();
  }
  return f;
}

struct FunctionalFit {
  std::vector<std::string> names;  // intercept first
  std::vector<LinearFit> pointwise;  // one per grid point
  Eigen::MatrixXd beta;  // names x grid points
  Eigen::MatrixXd se;
  Eigen::MatrixXd lo95, hi95;
};

/// Model: Y_i(t) = b0(t) + sum_j b_j(t) x_ij + e_i(t), fitted independently at
/// every grid point of Y (rows = firms, columns = grid). Y is used as given;
/// callers pass log(1 + value) curves.
inline FunctionalFit fit_function_on_scalar(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X,
                                            const std::vector<std::string>& names = {}) {
  FunctionalFit ff;
  const Eigen::MatrixXd none(X.rows(), 0);
  for (Eigen::Index t = 0; t < Y.cols(); ++t) ff.pointwise.push_back(fit_linear(Y.col(t), X, none, names));
  const auto k = static_cast<Eigen::Index>(X.cols() + 1);
  ff.names = ff.pointwise.empty() ? detail::prefixed_names(names, static_cast<std::size_t>(X.cols()))
                                  : ff.pointwise.front().names;
  ff.beta.resize(k, Y.cols());
  ff.se.resize(k, Y.cols());
  for (Eigen::Index t = 0; t < Y.cols(); ++t) {
    ff.beta.col(t) = ff.pointwise[static_cast<std::size_t>(t)].beta;
    ff.se.col(t) = ff.pointwise[static_cast<std::size_t>(t)].se;
  }
  ff.lo95 = ff.beta - 1.96 * ff.se;
  ff.hi95 = ff.beta + 1.96 * ff.se;
  return ff;
}

struct ConfusionMatrix {
  // Truth = exit-based success, prediction = HIGH regime.
  std::size_t tp = 0, fn = 0, fp = 0, tn = 0;

  std::size_t total() const { return tp + fn + fp + tn; }
  double accuracy() const { return total() ? static_cast<double>(tp + tn) / static_cast<double>(total()) : 0.0; }
  double precision() const { return tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0; }
  double recall() const { return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }

  void add(bool truth, bool predicted) {
    if (truth)
      ++(predicted ? tp : fn);
    else
      ++(predicted ? fp : tn);
  }
};

}  // namespace vcnet
