#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "vcnet/graph.hpp"
#include "vcnet/rng.hpp"

using namespace vcnet;

namespace {

DealRecord deal(std::string firm, std::string inv, std::string round, Date d, std::int64_t amt = 1) {
  return {std::move(firm), std::move(inv), std::move(round), d, amt};
}

std::set<std::pair<std::string, std::string>> edge_set(const ProjectedGraph& pg) {
  std::set<std::pair<std::string, std::string>> s;
  for (auto [u, v] : pg.graph.edges()) s.emplace(pg.graph.id(u), pg.graph.id(v));
  return s;
}

}  // namespace

TEST(Bipartite, EmptyInput) {
  auto g = build_bipartite({});
  EXPECT_TRUE(g.empty());
  EXPECT_TRUE(g.nodes().empty());
  EXPECT_FALSE(g.covers(2000));
}

TEST(Bipartite, ParallelEdgesAndCumulativeSnapshots) {
  auto g = build_bipartite({deal("f1", "i1", "r1", {2003, 5, 1}), deal("f1", "i1", "r2", {2004, 5, 1})});
  EXPECT_EQ(g.nodes().size(), 2u);
  EXPECT_EQ(g.edges().size(), 2u);
  EXPECT_EQ(g.snapshot(2003).size(), 1u);
  EXPECT_EQ(g.snapshot(2004).size(), 2u);
  EXPECT_EQ(g.snapshot(2002).size(), 0u);
  EXPECT_EQ(g.min_year(), 2003);
  EXPECT_EQ(g.max_year(), 2004);
}

TEST(Bipartite, DualRoleNode) {
  auto g = build_bipartite({deal("x", "i1", "r1", {2003, 1, 1}), deal("f1", "x", "r1", {2003, 2, 1})});
  EXPECT_EQ(g.nodes().at("x"), Role::Both);
  EXPECT_EQ(g.node_count(Role::Both), 1u);
  EXPECT_EQ(g.node_count(Role::Firm), 1u);
  EXPECT_EQ(g.node_count(Role::Investor), 1u);
}

TEST(FirmProjection, WindowExcludesDistantDeals) {
  auto g = build_bipartite({deal("f1", "i1", "r1", {2001, 1, 1}), deal("f2", "i1", "r1", {2010, 1, 1})});
  EXPECT_EQ(project_firms(g, 2010, 7).graph.edge_count(), 0u);
}

TEST(FirmProjection, EdgeWithinWindow) {
  auto g = build_bipartite({deal("f1", "i1", "r1", {2001, 1, 1}), deal("f2", "i1", "r1", {2006, 1, 1})});
  auto pg = project_firms(g, 2006, 7);
  ASSERT_EQ(pg.graph.edge_count(), 1u);
  EXPECT_EQ(pg.weights.begin()->second, 1u);
  EXPECT_EQ(project_firms(g, 2005, 7).graph.edge_count(), 0u);  // f2 not yet in snapshot
}

TEST(FirmProjection, WindowBoundaryInDays) {
  // 7 * 365.25 = 2556.75 days.
  const Date a{2001, 1, 1};
  auto g1 = build_bipartite({deal("f1", "i1", "r", a), deal("f2", "i1", "r", Date::from_serial(a.serial() + 2556))});
  auto g2 = build_bipartite({deal("f1", "i1", "r", a), deal("f2", "i1", "r", Date::from_serial(a.serial() + 2557))});
  EXPECT_EQ(project_firms(g1, g1.max_year()).graph.edge_count(), 1u);
  EXPECT_EQ(project_firms(g2, g2.max_year()).graph.edge_count(), 0u);
}

TEST(FirmProjection, SingleInvestorBuildsTriangle) {
  auto g = build_bipartite({deal("a", "i1", "r", {2005, 1, 1}), deal("b", "i1", "r", {2005, 2, 1}),
                            deal("c", "i1", "r", {2005, 3, 1})});
  auto pg = project_firms(g, 2005);
  EXPECT_EQ(pg.graph.edge_count(), 3u);
}

TEST(FirmProjection, WeightCountsDistinctInvestors) {
  auto g = build_bipartite({deal("a", "i1", "r", {2005, 1, 1}), deal("b", "i1", "r", {2005, 2, 1}),
                            deal("a", "i1", "r2", {2005, 3, 1}), deal("a", "i2", "r", {2005, 1, 1}),
                            deal("b", "i2", "r", {2005, 1, 1})});
  auto pg = project_firms(g, 2005);
  ASSERT_EQ(pg.weights.size(), 1u);
  EXPECT_EQ(pg.weights.begin()->second, 2u);
}

TEST(FirmProjection, Errors) {
  auto g = build_bipartite({deal("a", "i1", "r", {2005, 1, 1})});
  EXPECT_THROW(project_firms(g, 2005, 0), ConfigError);
  auto pg = project_firms(g, 1990);
  EXPECT_TRUE(pg.graph.empty());
  EXPECT_EQ(pg.warnings.size(), 1u);
}

TEST(InvestorProjection, SameRoundLinks) {
  auto g = build_bipartite({deal("f1", "i1", "r1", {2005, 1, 1}), deal("f1", "i2", "r1", {2005, 1, 1})});
  EXPECT_EQ(project_investors(g, 2005).graph.edge_count(), 1u);
}

TEST(InvestorProjection, RoundMismatchDoesNotLink) {
  auto g = build_bipartite({deal("f1", "i1", "r1", {2005, 1, 1}), deal("f1", "i2", "r2", {2005, 1, 1})});
  EXPECT_EQ(project_investors(g, 2005).graph.edge_count(), 0u);
  EXPECT_EQ(project_investors(g, 2005).graph.size(), 2u);
}

TEST(InvestorProjection, ThreeInvestorsFormTriangle) {
  auto g = build_bipartite({deal("f1", "i1", "r1", {2005, 1, 1}), deal("f1", "i2", "r1", {2005, 1, 1}),
                            deal("f1", "i3", "r1", {2005, 1, 1})});
  auto pg = project_investors(g, 2005);
  EXPECT_EQ(pg.graph.edge_count(), 3u);
  for (const auto& [uv, w] : pg.weights) EXPECT_EQ(w, 1u);
}

TEST(FirstRound, Rules) {
  auto g = build_bipartite({deal("f", "i1", "B", {2004, 6, 1}, 5), deal("f", "i2", "A", {2004, 5, 1}, 7),
                            deal("f", "i3", "A", {2004, 5, 1}, 3), deal("h", "i1", "z", {2004, 5, 1}),
                            deal("h", "i2", "y", {2004, 5, 1})});
  auto fr = first_round(g, "f");
  EXPECT_EQ(fr.round_id, "A");
  EXPECT_EQ(fr.amount_total, 10);
  EXPECT_EQ(fr.investors, (std::vector<std::string>{"i2", "i3"}));
  EXPECT_EQ(first_round(g, "h").round_id, "y");
  EXPECT_THROW(first_round(g, "nope"), NotFoundError);
  auto all = first_rounds(g);
  EXPECT_EQ(all.at("f").round_id, "A");
  EXPECT_EQ(all.at("h").round_id, "y");
}

TEST(Projection, FilenamesAndEdgeList) {
  auto g = build_bipartite({deal("a", "i1", "r", {2005, 1, 1}), deal("b", "i1", "r", {2005, 2, 1})});
  auto pf = project_firms(g, 2005, 7);
  EXPECT_EQ(projection_filename(pf), "proj_firm_2005_w7.csv");
  EXPECT_EQ(projection_filename(project_investors(g, 2005)), "proj_investor_2005_w0.csv");
  std::ostringstream os;
  write_edge_list(os, pf);
  EXPECT_EQ(os.str(), "u,v,weight\na,b,1\n");
}

// Brute-force projection over every pair of deals, compared on random deal
// sets; also checks window and snapshot monotonicity.
TEST(Projection, MatchesExhaustivePairEnumeration) {
  Rng rng(derive_seed(11, "projection-oracle", 0));
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<DealRecord> deals;
    const auto n_deals = 1 + rng.below(30);
    for (std::size_t k = 0; k < n_deals; ++k) {
      Date d = Date::from_serial(Date{2000, 1, 1}.serial() + static_cast<std::int64_t>(rng.below(15 * 365)));
      deals.push_back(deal("f" + std::to_string(rng.below(10)), "i" + std::to_string(rng.below(10)),
                           "r" + std::to_string(rng.below(3)), d));
    }
    auto g = build_bipartite(deals);
    for (int year = g.min_year(); year <= g.max_year(); ++year) {
      const Date end{year, 12, 31};
      std::set<std::pair<std::string, std::string>> prev;
      for (int w : {5, 7, 10}) {
        std::set<std::pair<std::string, std::string>> want;
        for (const auto& a : deals)
          for (const auto& b : deals) {
            if (a.date > end || b.date > end || a.investor_id != b.investor_id || a.firm_id >= b.firm_id) continue;
            if (std::abs(a.date.serial() - b.date.serial()) <= w * kDaysPerYear) want.emplace(a.firm_id, b.firm_id);
          }
        auto got = edge_set(project_firms(g, year, w));
        ASSERT_EQ(got, want) << "trial " << trial << " year " << year << " w " << w;
        ASSERT_TRUE(std::includes(got.begin(), got.end(), prev.begin(), prev.end()));
        prev = got;
      }
      std::set<std::pair<std::string, std::string>> want;
      for (const auto& a : deals)
        for (const auto& b : deals)
          if (a.date <= end && b.date <= end && a.firm_id == b.firm_id && a.round_id == b.round_id &&
              a.investor_id < b.investor_id)
            want.emplace(a.investor_id, b.investor_id);
      ASSERT_EQ(edge_set(project_investors(g, year)), want);
      if (year > g.min_year()) {
        auto cur = edge_set(project_investors(g, year));
        auto before = edge_set(project_investors(g, year - 1));
        ASSERT_TRUE(std::includes(cur.begin(), cur.end(), before.begin(), before.end()));
      }
    }
  }
}
