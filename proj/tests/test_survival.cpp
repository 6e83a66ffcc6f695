#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "sbh/survival.hpp"

using namespace sbh;

namespace {

SurvivalData make(std::vector<double> t, std::vector<std::uint8_t> e) {
  std::vector<std::vector<double>> rows(t.size(), std::vector<double>{0.0});
  return SurvivalData::from_rows(std::move(t), std::move(e), rows);
}

RiskTable table_of(std::vector<std::size_t> deaths, std::vector<std::size_t> at_risk) {
  RiskTable t;
  for (std::size_t h = 0; h < deaths.size(); ++h) t.event_times.push_back(static_cast<double>(h + 1));
  t.deaths = std::move(deaths);
  t.at_risk = std::move(at_risk);
  t.last_time = static_cast<double>(t.event_times.size());
  return t;
}

}  // namespace

TEST(RiskTable, CountsDistinctEventTimes) {
  const auto t = build_risk_table(make({1, 2, 3}, {1, 0, 1}));
  EXPECT_EQ(t.event_times, (std::vector<double>{1, 3}));
  EXPECT_EQ(t.deaths, (std::vector<std::size_t>{1, 1}));
  EXPECT_EQ(t.at_risk, (std::vector<std::size_t>{3, 1}));
  EXPECT_FALSE(t.grouped());
}

TEST(RiskTable, TiedEventsCollapse) {
  const auto t = build_risk_table(make({1, 1, 2}, {1, 1, 1}));
  EXPECT_EQ(t.event_times, (std::vector<double>{1, 2}));
  EXPECT_EQ(t.deaths, (std::vector<std::size_t>{2, 1}));
  EXPECT_EQ(t.at_risk, (std::vector<std::size_t>{3, 1}));
}

TEST(RiskTable, GroupSplit) {
  const Mask g{1, 1, 0, 0};
  const auto t = build_risk_table(make({1, 2, 3, 4}, {1, 1, 1, 1}), g);
  ASSERT_TRUE(t.grouped());
  EXPECT_EQ(t.at_risk_in, (std::vector<std::size_t>{2, 1, 0, 0}));
  EXPECT_EQ(t.deaths_in, (std::vector<std::size_t>{1, 1, 0, 0}));
  EXPECT_EQ(t.at_risk, (std::vector<std::size_t>{4, 3, 2, 1}));
}

TEST(RiskTable, NoEventsThrows) {
  try {
    build_risk_table(make({1, 2}, {0, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoEvents);
  }
}

TEST(RiskTable, DeathsSumToEventCountAndIgnoreLateCensoring) {
  Rng rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    auto d = oracle::random_data(rng, 30, 1, 0.4);
    if (d.event_count() == 0) continue;
    const auto t = build_risk_table(d);
    EXPECT_EQ(std::accumulate(t.deaths.begin(), t.deaths.end(), std::size_t{0}), d.event_count());
    for (std::size_t h = 0; h < t.size(); ++h) {
      EXPECT_GE(t.deaths[h], 1u);
      EXPECT_LE(t.deaths[h], t.at_risk[h]);
      if (h) EXPECT_LE(t.at_risk[h], t.at_risk[h - 1]);
    }
    auto late = d;
    late.times.push_back(1e6);
    late.events.push_back(0);
    late.covariates.push_back(0.5);
    EXPECT_EQ(build_risk_table(late).deaths, t.deaths);
  }
}

TEST(KaplanMeier, ProductLimit) {
  EXPECT_DOUBLE_EQ(kaplan_meier(table_of({1}, {2})).values[0], 0.5);
  EXPECT_EQ(kaplan_meier(table_of({1, 1}, {2, 1})).values, (std::vector<double>{0.5, 0.0}));
  const auto c = kaplan_meier(table_of({2, 1}, {4, 2}));
  EXPECT_DOUBLE_EQ(c.values[0], 0.5);
  EXPECT_DOUBLE_EQ(c.values[1], 0.25);
  EXPECT_DOUBLE_EQ(c.at(0.5), 1.0);
}

TEST(KaplanMeier, EqualsEmpiricalSurvivorWithoutCensoring) {
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    auto d = oracle::random_data(rng, 40, 1, 0.0);
    const auto c = kaplan_meier(build_risk_table(d));
    for (std::size_t h = 0; h < c.breakpoints.size(); ++h) {
      double above = 0;
      for (double t : d.times) above += t > c.breakpoints[h] ? 1 : 0;
      EXPECT_NEAR(c.values[h], above / 40.0, 1e-15);
      if (h) EXPECT_LE(c.values[h], c.values[h - 1]);
    }
  }
}

TEST(NelsonAalen, CumulativeSums) {
  EXPECT_DOUBLE_EQ(nelson_aalen(table_of({1}, {4})).values[0], 0.25);
  EXPECT_EQ(nelson_aalen(table_of({1, 1}, {2, 1})).values, (std::vector<double>{0.5, 1.5}));
  const auto h = nelson_aalen(table_of({2, 1}, {5, 2}));
  EXPECT_NEAR(h.values[0], 0.4, 1e-15);
  EXPECT_NEAR(h.values[1], 0.9, 1e-15);
  EXPECT_DOUBLE_EQ(h.at(0.0), 0.0);
}

TEST(NelsonAalen, BoundsKaplanMeier) {
  Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    auto d = oracle::random_data(rng, 30, 1, 0.3);
    if (d.event_count() == 0) continue;
    const auto t = build_risk_table(d);
    const auto km = kaplan_meier(t), na = nelson_aalen(t);
    for (std::size_t h = 0; h < t.size(); ++h) {
      EXPECT_GE(std::exp(-na.values[h]), km.values[h] - 1e-12);
      if (h) EXPECT_GE(na.values[h], na.values[h - 1]);
    }
  }
}

TEST(LogRank, IdenticalGroupsGiveZero) {
  const auto d = make({1, 2, 3, 1, 2, 3}, {1, 0, 1, 1, 0, 1});
  EXPECT_NEAR(log_rank_statistic(d, Mask{1, 1, 1, 0, 0, 0}), 0.0, 1e-15);
}

TEST(LogRank, HandEnumeratedTwoByTwoTables) {
  const auto d = make({1, 2, 3, 4}, {1, 1, 1, 1});
  const double z = log_rank_statistic(d, Mask{1, 1, 0, 0});
  EXPECT_NEAR(z, (7.0 / 6.0) / std::sqrt(17.0 / 36.0), 1e-14);
  EXPECT_NEAR(z, 1.6977, 1e-4);
}

TEST(LogRank, SharedSingleTimeGivesZero) {
  const auto d = make({2, 2, 2, 2}, {1, 1, 1, 1});
  EXPECT_THROW(log_rank_statistic(d, Mask{1, 1, 0, 0}), Error);
  const auto e = make({2, 2, 2, 2, 5, 5}, {1, 1, 1, 1, 0, 0});
  EXPECT_NEAR(log_rank_statistic(e, Mask{1, 1, 0, 0, 1, 0}), 0.0, 1e-15);
}

TEST(LogRank, DegenerateVarianceIsAnError) {
  const auto d = make({1, 2}, {1, 0});
  try {
    log_rank_statistic(d, Mask{1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateVariance);
  }
}

TEST(LogRank, AntisymmetricAndMatchesHypergeometricOracle) {
  Rng rng(17);
  int checked = 0;
  for (int rep = 0; rep < 300; ++rep) {
    auto d = oracle::random_data(rng, 5 + rng.below(40), 1, 0.35);
    auto g = oracle::random_group(rng, d.n());
    const auto ref = oracle::log_rank(d.times, d.events, g);
    if (!(ref.variance > 0.0)) continue;
    const double z = log_rank_statistic(d, g);
    EXPECT_NEAR(z, ref.z(), 1e-10);
    Mask flipped(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) flipped[i] = 1 - g[i];
    EXPECT_NEAR(log_rank_statistic(d, flipped), -z, 1e-12);
    ++checked;
  }
  EXPECT_GT(checked, 200);
}

TEST(Chs, EqualsInBoxEventCount) {
  const auto d = make({1, 2, 3, 4, 5, 6}, {1, 0, 1, 1, 0, 1});
  EXPECT_EQ(chs_statistic(d, Mask{1, 1, 1, 1, 1, 0}), 3.0);
  EXPECT_EQ(chs_statistic(make({1, 2}, {0, 0}), Mask{1, 1}), 0.0);
}

TEST(Chs, DoubleSumOracle) {
  Rng rng(23);
  for (int rep = 0; rep < 200; ++rep) {
    auto d = oracle::random_data(rng, 10, 1, 0.4);
    auto g = oracle::random_group(rng, 10, 0.7);
    if (std::find(g.begin(), g.end(), 1) == g.end()) continue;
    std::size_t events = 0;
    for (std::size_t i = 0; i < 10; ++i) events += g[i] && d.events[i];
    const double chs = chs_statistic(d, g);
    EXPECT_EQ(chs, static_cast<double>(events));
    EXPECT_NEAR(oracle::chs_double_sum(d.times, d.events, g), chs, 1e-9);
  }
}

TEST(CoxLhr, IdenticalGroupsNearZero) {
  const auto d = make({1, 2, 3, 4, 1, 2, 3, 4}, {1, 1, 0, 1, 1, 1, 0, 1});
  const auto r = cox_lhr(d, Mask{1, 1, 1, 1, 0, 0, 0, 0});
  EXPECT_FALSE(r.clamped);
  EXPECT_LT(std::abs(r.value), 1e-6);
}

TEST(CoxLhr, SeparationClampsAndFlags) {
  const auto d = make({1, 2, 3, 4, 5, 6}, {1, 1, 1, 1, 1, 1});
  const auto r = cox_lhr(d, Mask{1, 1, 1, 0, 0, 0});
  EXPECT_TRUE(r.clamped);
  EXPECT_EQ(r.value, kLhrClamp);
}

TEST(CoxLhr, MatchesGridOracleAndIsLocalMaximum) {
  Rng rng(29);
  int checked = 0;
  for (int rep = 0; rep < 40; ++rep) {
    auto d = oracle::random_data(rng, 12 + rng.below(20), 1, 0.3);
    auto g = oracle::random_group(rng, d.n());
    if (d.event_count() == 0) continue;
    const auto r = cox_lhr(d, g);
    if (r.clamped) continue;
    EXPECT_NEAR(r.value, oracle::cox_grid(d.times, d.events, g), 2e-3);
    const double ll = oracle::cox_loglik(d.times, d.events, g, r.value);
    EXPECT_GE(ll, oracle::cox_loglik(d.times, d.events, g, r.value + 1e-3));
    EXPECT_GE(ll, oracle::cox_loglik(d.times, d.events, g, r.value - 1e-3));
    ++checked;
  }
  EXPECT_GT(checked, 20);
}

TEST(Concordance, AntiOrderedScoresGiveZero) {
  const auto d = make({1, 2, 3, 4, 5}, {1, 1, 1, 1, 1});
  EXPECT_DOUBLE_EQ(concordance_error_rate(d, std::vector<double>{5, 4, 3, 2, 1}), 0.0);
  EXPECT_DOUBLE_EQ(concordance_error_rate(d, std::vector<double>{1, 2, 3, 4, 5}), 1.0);
}

TEST(Concordance, ConstantScoreGivesHalf) {
  const auto d = make({1, 2, 3, 4}, {1, 0, 1, 1});
  EXPECT_DOUBLE_EQ(concordance_error_rate(d, std::vector<double>(4, 0.3)), 0.5);
}

TEST(Concordance, NoPermissiblePairs) {
  const auto d = make({1, 2, 3}, {0, 0, 0});
  try {
    concordance_error_rate(d, std::vector<double>{1, 2, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoPermissiblePairs);
  }
}

TEST(Concordance, MatchesPairEnumerationAndReverses) {
  Rng rng(31);
  for (int rep = 0; rep < 200; ++rep) {
    auto d = oracle::random_data(rng, 3 + rng.below(30), 1, 0.4);
    std::vector<double> s(d.n());
    for (auto& v : s) v = std::round(rng.uniform() * 5.0);
    const double ref = oracle::concordance_error(d.times, d.events, s);
    if (ref < 0.0) continue;
    const double cer = concordance_error_rate(d, s);
    EXPECT_NEAR(cer, ref, 1e-12);
    EXPECT_GE(cer, 0.0);
    EXPECT_LE(cer, 1.0);
  }
  for (int rep = 0; rep < 50; ++rep) {
    auto d = oracle::random_data(rng, 20, 1, 0.3);
    std::vector<double> s(d.n()), neg(d.n());
    for (std::size_t i = 0; i < s.size(); ++i) neg[i] = -(s[i] = rng.uniform());
    if (oracle::concordance_error(d.times, d.events, s) < 0.0) continue;
    EXPECT_NEAR(concordance_error_rate(d, s), 1.0 - concordance_error_rate(d, neg), 1e-12);
  }
}

TEST(Concordance, RandomScoresNearHalf) {
  Rng rng(37);
  auto d = oracle::random_data(rng, 200, 1, 0.3, false);
  std::vector<double> s(200);
  for (auto& v : s) v = rng.uniform();
  const double cer = concordance_error_rate(d, s);
  EXPECT_NEAR(cer, oracle::concordance_error(d.times, d.events, s), 1e-12);
  EXPECT_NEAR(cer, 0.5, 0.06);
}

TEST(KmEndPoints, LimitEndPoints) {
  StepFunction c;
  c.breakpoints = {1.0, 3.0};
  c.values = {0.6, 0.37};
  c.last_time = 3.0;
  const auto e = km_end_points(c);
  EXPECT_DOUBLE_EQ(e.meft, 3.0);
  EXPECT_DOUBLE_EQ(e.mefp, 0.37);
  EXPECT_FALSE(e.eft);
}

TEST(KmEndPoints, FlatCurve) {
  StepFunction c;
  c.last_time = 7.5;
  const auto e = km_end_points(c);
  EXPECT_DOUBLE_EQ(e.meft, 7.5);
  EXPECT_DOUBLE_EQ(e.mefp, 1.0);
}

TEST(KmEndPoints, HorizonProbabilityReached) {
  StepFunction c;
  c.breakpoints = {2.0};
  c.values = {0.4};
  c.last_time = 2.0;
  const auto e = km_end_points(c, std::nullopt, 0.5);
  ASSERT_TRUE(e.eft);
  EXPECT_DOUBLE_EQ(*e.eft, 2.0);
  const auto f = km_end_points(c, 1.0, std::nullopt);
  ASSERT_TRUE(f.efp);
  EXPECT_DOUBLE_EQ(*f.efp, 1.0);
}
