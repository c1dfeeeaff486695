#include <gtest/gtest.h>

#include <survim/survim.hpp>

#include <cmath>
#include <random>

using namespace survim;

namespace {

struct Toy {
  Eigen::MatrixXd x;
  Eigen::MatrixXd w;
};

/// log T = x1 + noise with p features; weights from the observed (uncensored) times.
Toy informative_toy(std::size_t n, int p, std::uint64_t seed, double tau = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> z;
  Toy t;
  t.x.resize(static_cast<Eigen::Index>(n), p);
  std::vector<double> time(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < p; ++c) t.x(static_cast<Eigen::Index>(i), c) = z(rng);
    time[i] = std::exp(t.x(static_cast<Eigen::Index>(i), 0) + 0.5 * z(rng));
  }
  t.w.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      t.w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (time[i] <= tau && time[j] > time[i]) ? 1.0 : 0.0;
  return t;
}

}  // namespace

TEST(PairWeights, PointMasses) {
  SurvivalCurveSet c;
  c.grid.points = {0.3, 0.8};
  c.grid.tau = 0.9;
  c.S.resize(2, 2);
  c.S << 0, 0, 1, 0;
  c.G = Eigen::MatrixXd::Ones(2, 2);
  c.dL = Eigen::MatrixXd::Zero(2, 2);
  const auto w = pair_weights(c, 0.9);
  EXPECT_DOUBLE_EQ(w(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(w(1, 0), 0.0);
}

TEST(PairWeights, MatchesDoubleSum) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SurvivalCurveSet c;
  c.grid.points = {0.2, 0.4, 0.6, 0.8};
  c.grid.tau = 0.6;
  c.S.resize(3, 4);
  for (int i = 0; i < 3; ++i) {
    double s = 1.0;
    for (int j = 0; j < 4; ++j) c.S(i, j) = s *= u(rng);
  }
  const auto w = pair_weights(c, 0.6);
  const auto M = masses_from_cdf(c.event_cdf());
  const std::vector<double> t{0.2, 0.4, 0.6, 0.8, 1e300};
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) {
      double want = 0.0;
      for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b)
          if (t[static_cast<std::size_t>(a)] <= 0.6 && t[static_cast<std::size_t>(b)] > t[static_cast<std::size_t>(a)]) want += M(i, a) * M(k, b);
      EXPECT_NEAR(w(i, k), want, 1e-14);
    }
}

TEST(SmoothedObjective, EqualScoresGiveHalfTotalWeight) {
  const auto t = informative_toy(30, 2, 1);
  const double off = t.w.sum() - t.w.diagonal().sum();
  EXPECT_NEAR(smoothed_objective(Eigen::VectorXd::Constant(30, 0.7), t.w, 0.05), 0.5 * off, 1e-12);
}

TEST(SmoothedObjective, SharpLimitIsConcordanceCount) {
  const auto t = informative_toy(30, 2, 2);
  Eigen::VectorXd f(30);
  for (Eigen::Index i = 0; i < 30; ++i) f(i) = 0.01 * static_cast<double>((i * 7) % 30);
  double want = 0.0;
  for (Eigen::Index i = 0; i < 30; ++i)
    for (Eigen::Index j = 0; j < 30; ++j)
      if (i != j && f(i) > f(j)) want += t.w(i, j);
  EXPECT_NEAR(smoothed_objective(f, t.w, 1e-6), want, 1e-9);
}

TEST(SmoothedObjective, TwoSubjects) {
  Eigen::MatrixXd w(2, 2);
  w << 0, 1, 0, 0;
  Eigen::VectorXd f(2);
  f << 1.0, 0.0;
  EXPECT_NEAR(smoothed_objective(f, w, 0.05), 1.0, 1e-8);
  EXPECT_THROW(smoothed_objective(f, w, 0.0), ConfigurationError);
}

TEST(SmoothedGradient, MatchesFiniteDifferences) {
  const auto t = informative_toy(25, 2, 4);
  Rng rng(5);
  std::normal_distribution<double> z;
  for (double zeta : {0.05, 0.5}) {
    Eigen::VectorXd f(25);
    for (Eigen::Index i = 0; i < 25; ++i) f(i) = 0.2 * z(rng);
    const auto g = smoothed_gradient(f, t.w, zeta);
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < 25; ++i) {
      Eigen::VectorXd fp = f, fm = f;
      fp(i) += h;
      fm(i) -= h;
      const double fd = (smoothed_objective(fp, t.w, zeta) - smoothed_objective(fm, t.w, zeta)) / (2.0 * h);
      EXPECT_NEAR(g(i), fd, 1e-6) << "zeta " << zeta << " i " << i;
    }
  }
}

TEST(SmoothedGradient, UnlinkedSubjectHasZeroGradient) {
  auto t = informative_toy(20, 2, 6);
  t.w.row(3).setZero();
  t.w.col(3).setZero();
  Eigen::VectorXd f = t.x.col(0);
  EXPECT_EQ(smoothed_gradient(f, t.w, 0.05)(3), 0.0);
}

TEST(Boosting, MaskedColumnsAreIgnored) {
  const auto t = informative_toy(120, 4, 7);
  BoostParams bp;
  bp.mstop = 50;
  const std::vector<std::size_t> mask{0, 2};
  const auto a = boost_cindex(t.x, t.w, bp, mask);
  Eigen::MatrixXd x2 = t.x;
  Rng rng(8);
  std::normal_distribution<double> z;
  for (Eigen::Index i = 0; i < x2.rows(); ++i) x2(i, 1) = x2(i, 3) = z(rng);
  const auto b = boost_cindex(x2, t.w, bp, mask);
  EXPECT_EQ(a.selections, b.selections);
  EXPECT_LE((a.predict(t.x) - b.predict(x2)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(a.coef(1), 0.0);
  EXPECT_EQ(a.coef(3), 0.0);
}

TEST(Boosting, SelectsTheInformativeFeature) {
  const auto t = informative_toy(200, 5, 9);
  BoostParams bp;
  bp.mstop = 100;
  const auto s = boost_cindex(t.x, t.w, bp, {0, 1, 2, 3, 4});
  ASSERT_FALSE(s.selections.empty());
  const auto hits = std::count(s.selections.begin(), s.selections.end(), 0);
  EXPECT_GE(static_cast<double>(hits) / static_cast<double>(s.selections.size()), 0.8);
  // longer time means lower risk: the fitted score must decrease in x1
  EXPECT_LT(s.coef(0), 0.0);
  EXPECT_GT(plugin_cindex(s.predict(t.x), t.w), 0.7);
}

TEST(Boosting, SubsamplingIsSeededAndClose) {
  const auto t = informative_toy(200, 3, 10);
  BoostParams bp;
  bp.mstop = 100;
  bp.subsample = 0.5;
  bp.seed = 3;
  const auto a = boost_cindex(t.x, t.w, bp, {0, 1, 2});
  const auto b = boost_cindex(t.x, t.w, bp, {0, 1, 2});
  EXPECT_EQ(a.selections, b.selections);
  bp.subsample = 1.0;
  const auto c = boost_cindex(t.x, t.w, bp, {0, 1, 2});
  EXPECT_LE(std::abs(plugin_cindex(a.predict(t.x), t.w) - plugin_cindex(c.predict(t.x), t.w)), 0.02);
  bp.subsample = 0.0;
  EXPECT_THROW(boost_cindex(t.x, t.w, bp, {0}), ConfigurationError);
}

TEST(CvSelect, NeverPicksZeroIterationsWithSignal) {
  const auto t = informative_toy(150, 3, 11);
  BoostConfig cfg;
  cfg.mstop_candidates = {0, 20, 60};
  cfg.zeta_candidates = {0.05};
  const auto ch = cv_select(t.x, t.w, cfg, {0, 1, 2});
  EXPECT_GT(ch.mstop, 0);
  EXPECT_EQ(ch.table.size(), 3u);
  EXPECT_GT(ch.cv_cindex, 0.6);
}

TEST(CvSelect, TiesGoToSmallerCandidates) {
  // no comparable pairs: every candidate scores 0
  const auto t = informative_toy(60, 2, 12);
  const Eigen::MatrixXd w = Eigen::MatrixXd::Zero(60, 60);
  BoostConfig cfg;
  cfg.mstop_candidates = {30, 10};
  cfg.zeta_candidates = {0.5, 0.05};
  const auto ch = cv_select(t.x, w, cfg, {0, 1});
  EXPECT_EQ(ch.mstop, 10);
  EXPECT_EQ(ch.zeta, 0.05);
}

TEST(CvSelect, TooFewRowsIsConfigurationError) {
  const auto t = informative_toy(30, 2, 13);
  EXPECT_THROW(cv_select(t.x, t.w, BoostConfig{}, {0, 1}), ConfigurationError);
}
