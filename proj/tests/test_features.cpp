#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "vcnet/features.hpp"
#include "vcnet/rng.hpp"

using namespace vcnet;

namespace {

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("r" + std::to_string(i));
  return out;
}

// Three blocks of columns, each a shared factor plus small noise.
Eigen::MatrixXd planted_blocks(const std::vector<std::size_t>& sizes, std::size_t rows, Rng& rng) {
  std::size_t cols = 0;
  for (auto s : sizes) cols += s;
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  Eigen::Index c = 0;
  for (auto s : sizes) {
    Eigen::VectorXd f(static_cast<Eigen::Index>(rows));
    for (auto& v : f) v = rng.normal();
    for (std::size_t j = 0; j < s; ++j, ++c)
      for (Eigen::Index i = 0; i < X.rows(); ++i) X(i, c) = f(i) + 0.3 * rng.normal();
  }
  return X;
}

std::vector<std::string> col_names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("c" + std::to_string(i));
  return out;
}

// Leaf sets of every merge in a dendrogram.
std::vector<std::set<std::size_t>> merge_sets(const Dendrogram& dg) {
  const std::size_t n = dg.leaves.size();
  std::vector<std::set<std::size_t>> sets(2 * n - 1);
  for (std::size_t i = 0; i < n; ++i) sets[i] = {i};
  std::vector<std::set<std::size_t>> out;
  for (std::size_t s = 0; s < dg.merges.size(); ++s) {
    sets[n + s] = sets[dg.merges[s].left];
    sets[n + s].insert(sets[dg.merges[s].right].begin(), sets[dg.merges[s].right].end());
    out.push_back(sets[n + s]);
  }
  return out;
}

}  // namespace

TEST(Preprocess, SymmetricColumnIsOnlyStandardized) {
  Eigen::MatrixXd raw(5, 1);
  raw << -2, -1, 0, 1, 2;
  const auto fm = preprocess(ids(5), {"x"}, raw);
  ASSERT_EQ(fm.ledger.size(), 1u);
  EXPECT_FALSE(fm.ledger[0].log);
  EXPECT_NEAR(fm.ledger[0].skewness, 0.0, 1e-15);
  EXPECT_NEAR(fm.X(4, 0), 2.0 / std::sqrt(2.5), 1e-12);
}

TEST(Preprocess, ExponentialColumnIsLogged) {
  Rng rng(11);
  Eigen::MatrixXd raw(2000, 1);
  for (Eigen::Index i = 0; i < raw.rows(); ++i) raw(i, 0) = rng.exponential(1.0);
  // Oracle: population third standardized moment computed directly.
  double m = raw.col(0).mean(), m2 = 0, m3 = 0;
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    m2 += std::pow(raw(i, 0) - m, 2);
    m3 += std::pow(raw(i, 0) - m, 3);
  }
  const double n = static_cast<double>(raw.rows());
  const double skew = (m3 / n) / std::pow(m2 / n, 1.5);
  const auto fm = preprocess(ids(2000), {"x"}, raw);
  EXPECT_NEAR(fm.ledger[0].skewness, skew, 1e-12);
  EXPECT_NEAR(skew, 2.0, 0.3);
  EXPECT_TRUE(fm.ledger[0].log);
  EXPECT_NEAR(fm.X(0, 0), (std::log1p(raw(0, 0)) - fm.ledger[0].mean) / fm.ledger[0].sd, 1e-12);
}

TEST(Preprocess, ConstantColumnDroppedWithWarning) {
  Eigen::MatrixXd raw(4, 2);
  raw << 1, 3, 2, 3, 3, 3, 4, 3;
  const auto fm = preprocess(ids(4), {"a", "b"}, raw);
  EXPECT_EQ(fm.names, std::vector<std::string>{"a"});
  EXPECT_TRUE(fm.ledger[1].dropped);
  ASSERT_EQ(fm.warnings.size(), 1u);
  EXPECT_NE(fm.warnings[0].find("'b'"), std::string::npos);
}

TEST(Preprocess, ColumnsHaveZeroMeanUnitSd) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd raw(50, 6);
    for (Eigen::Index i = 0; i < raw.rows(); ++i)
      for (Eigen::Index j = 0; j < raw.cols(); ++j) raw(i, j) = j % 2 ? rng.exponential(0.5) : rng.normal(3, 2);
    const auto fm = preprocess(ids(50), col_names(6), raw);
    for (Eigen::Index j = 0; j < fm.X.cols(); ++j) {
      const auto c = fm.X.col(j);
      EXPECT_NEAR(c.mean(), 0.0, 1e-9);
      EXPECT_NEAR(std::sqrt((c.array() - c.mean()).square().sum() / 49.0), 1.0, 1e-9);
    }
  }
}

TEST(Preprocess, LedgerReappliesExactly) {
  Rng rng(5);
  Eigen::MatrixXd raw(30, 3);
  for (auto& v : raw.reshaped()) v = rng.exponential(1.0);
  raw.col(2).setConstant(4.0);
  const auto fm = preprocess(ids(30), col_names(3), raw);
  std::stringstream ss;
  write_transform_ledger(ss, fm.ledger);
  const auto ledger = read_transform_ledger(ss);
  const auto again = apply_transforms(ids(30), col_names(3), raw, ledger);
  EXPECT_EQ(again.names, fm.names);
  EXPECT_EQ(again.X, fm.X);
}

TEST(Dendrogram, PerfectCorrelationMergesAtZero) {
  Eigen::MatrixXd X(4, 3);
  X << 1, 2, 5, 2, 4, 1, 3, 6, 2, 4, 8, 9;
  const auto dg = correlation_dendrogram({"a", "b", "c"}, X);
  ASSERT_EQ(dg.merges.size(), 2u);
  EXPECT_EQ(dg.merges[0].left, 0u);
  EXPECT_EQ(dg.merges[0].right, 1u);
  EXPECT_NEAR(dg.merges[0].height, 0.0, 1e-12);
  EXPECT_EQ(dg.merges[1].size, 3u);
}

TEST(Dendrogram, NegationMergesAtZero) {
  Eigen::MatrixXd X(4, 3);
  X << 1, -1, 5, 2, -2, 1, 3, -3, 2, 4, -4, 9;
  const auto dg = correlation_dendrogram({"a", "b", "c"}, X);
  EXPECT_NEAR(dg.merges[0].height, 0.0, 1e-12);
  EXPECT_EQ(dg.merges[0].right, 1u);
}

TEST(Dendrogram, MatchesIndependentCompleteLinkage) {
  Rng rng(21);
  for (int trial = 0; trial < 25; ++trial) {
    const auto X = planted_blocks({3, 4, 2}, 60, rng);
    const auto names = col_names(9);
    const auto dg = correlation_dendrogram(names, X);
    std::vector<std::vector<double>> d(9, std::vector<double>(9, 0.0));
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < 9; ++j) {
        const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
        const Eigen::VectorXd u = X.col(a).array() - X.col(a).mean(), v = X.col(b).array() - X.col(b).mean();
        if (i != j) d[i][j] = 1.0 - std::abs(u.dot(v) / (u.norm() * v.norm()));
      }
    const auto ref = oracle::complete_linkage(d);
    const auto got = merge_sets(dg);
    ASSERT_EQ(got.size(), ref.size());
    for (std::size_t s = 0; s < ref.size(); ++s) {
      EXPECT_EQ(got[s], ref[s].members) << "trial " << trial << " step " << s;
      EXPECT_NEAR(dg.merges[s].height, ref[s].height, 1e-12);
    }
    // Early merges stay within the planted blocks.
    const std::vector<int> block{0, 0, 0, 1, 1, 1, 1, 2, 2};
    for (std::size_t s = 0; s < 6; ++s) {
      std::set<int> b;
      for (auto m : got[s]) b.insert(block[m]);
      EXPECT_EQ(b.size(), 1u);
    }
    const auto fg = cut_groups(dg, 3);
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < 9; ++j) EXPECT_EQ(fg.group[i] == fg.group[j], block[i] == block[j]);
  }
}

TEST(Dendrogram, ScaleAndSignInvariant) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto X = planted_blocks({2, 3, 3}, 40, rng);
    Eigen::MatrixXd Y = X;
    for (Eigen::Index j = 0; j < Y.cols(); ++j) Y.col(j) *= (j % 2 ? -1.0 : 1.0) * rng.uniform(0.1, 50.0);
    const auto a = correlation_dendrogram(col_names(8), X);
    const auto b = correlation_dendrogram(col_names(8), Y);
    for (std::size_t s = 0; s < a.merges.size(); ++s) {
      EXPECT_EQ(a.merges[s].left, b.merges[s].left);
      EXPECT_EQ(a.merges[s].right, b.merges[s].right);
      EXPECT_NEAR(a.merges[s].height, b.merges[s].height, 1e-12);
    }
  }
}

TEST(CutGroups, ExtremesAndErrors) {
  Rng rng(2);
  const auto X = planted_blocks({2, 2}, 30, rng);
  const auto dg = correlation_dendrogram(col_names(4), X);
  const auto singles = cut_groups(dg, 4);
  EXPECT_EQ(std::set<int>(singles.group.begin(), singles.group.end()).size(), 4u);
  const auto one = cut_groups(dg, 1);
  EXPECT_EQ(one.group, std::vector<int>(4, 1));
  EXPECT_THROW(cut_groups(dg, 5), ConfigError);
  EXPECT_THROW(cut_groups(dg, 0), ConfigError);
}

TEST(CutGroups, FinerCutsRefineCoarserOnes) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto X = planted_blocks({3, 2, 4, 1}, 40, rng);
    const auto dg = correlation_dendrogram(col_names(10), X);
    for (int k = 2; k <= 10; ++k) {
      const auto fine = cut_groups(dg, k), coarse = cut_groups(dg, k - 1);
      EXPECT_EQ(std::set<int>(fine.group.begin(), fine.group.end()).size(), static_cast<std::size_t>(k));
      for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 10; ++j)
          if (fine.group[i] == fine.group[j]) {
            EXPECT_EQ(coarse.group[i], coarse.group[j]);
          }
    }
  }
}

TEST(CutGroups, NumberedAlongLeafOrder) {
  Rng rng(4);
  const auto X = planted_blocks({2, 3, 2}, 50, rng);
  const auto dg = correlation_dendrogram(col_names(7), X);
  const auto fg = cut_groups(dg, 3);
  int last = 0;
  for (auto leaf : dg.leaf_order()) {
    EXPECT_LE(fg.group[leaf], last + 1);
    last = std::max(last, fg.group[leaf]);
  }
}

TEST(Configs, ProductRule) {
  FeatureGrouping fg{{"a", "b", "c"}, {1, 2, 3}, 3};
  EXPECT_EQ(enumerate_configs(fg).size(), 1u);
  FeatureGrouping g2{{"a", "b", "c", "d", "e"}, {1, 2, 1, 2, 2}, 2};
  const auto cfgs = enumerate_configs(g2);
  ASSERT_EQ(cfgs.size(), 6u);
  EXPECT_EQ(config_count(g2), 6u);
  EXPECT_EQ(cfgs[0], (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(cfgs[1], (std::vector<std::size_t>{0, 3}));
  EXPECT_EQ(cfgs[5], (std::vector<std::size_t>{2, 4}));
  EXPECT_EQ(std::set<std::vector<std::size_t>>(cfgs.begin(), cfgs.end()).size(), 6u);
}

TEST(Configs, CountIsProductOfGroupSizesOnRandomGroupings) {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(5));
    FeatureGrouping fg;
    fg.k = k;
    for (int g = 1; g <= k; ++g)
      for (std::uint64_t m = 0; m <= rng.below(3); ++m) {
        fg.names.push_back("x" + std::to_string(fg.names.size()));
        fg.group.push_back(g);
      }
    std::size_t prod = 1;
    for (const auto& m : fg.members()) prod *= m.size();
    const auto cfgs = enumerate_configs(fg);
    EXPECT_EQ(cfgs.size(), prod);
    for (const auto& c : cfgs)
      for (std::size_t g = 0; g < c.size(); ++g) EXPECT_EQ(fg.group[c[g]], static_cast<int>(g) + 1);
  }
}

TEST(FeaturesIo, GroupingRoundTrip) {
  FeatureGrouping fg{{"a", "b", "c"}, {2, 1, 2}, 2};
  std::stringstream ss;
  write_grouping(ss, fg);
  EXPECT_EQ(ss.str(), "covariate,group\na,2\nb,1\nc,2\n");
  const auto back = read_grouping(ss);
  EXPECT_EQ(back.names, fg.names);
  EXPECT_EQ(back.group, fg.group);
  EXPECT_EQ(back.k, 2);
  std::stringstream bad("name,group\na,1\n");
  EXPECT_THROW(read_grouping(bad), SchemaError);
}
