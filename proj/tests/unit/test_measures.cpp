#include <gtest/gtest.h>

#include <survim/survim.hpp>

#include <cmath>
#include <random>

using namespace survim;

namespace {

TimeGrid make_grid(std::vector<double> pts, double tau) {
  TimeGrid g;
  g.points = std::move(pts);
  g.tau = tau;
  return g;
}

/// Each subject is a point mass at one grid atom; atom index J means "beyond the grid".
SurvivalCurveSet point_mass_curves(const TimeGrid& grid, const std::vector<std::size_t>& atom) {
  SurvivalCurveSet c;
  c.grid = grid;
  const auto n = static_cast<Eigen::Index>(atom.size()), J = static_cast<Eigen::Index>(grid.size());
  c.S.resize(n, J);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < J; ++j) c.S(i, j) = static_cast<std::size_t>(j) < atom[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  c.G = Eigen::MatrixXd::Ones(n, J);
  c.dL = Eigen::MatrixXd::Zero(n, J);
  return c;
}

SurvivalCurveSet exponential_curves(const TimeGrid& grid, std::size_t n) {
  SurvivalCurveSet c;
  c.grid = grid;
  const auto J = static_cast<Eigen::Index>(grid.size());
  c.S.resize(static_cast<Eigen::Index>(n), J);
  for (Eigen::Index i = 0; i < c.S.rows(); ++i)
    for (Eigen::Index j = 0; j < J; ++j) c.S(i, j) = std::exp(-grid.points[static_cast<std::size_t>(j)]);
  c.G = Eigen::MatrixXd::Ones(c.S.rows(), J);
  c.dL = hazard_increments(c.S);
  return c;
}

/// Empirical predictiveness with known times, written straight from the kernel definitions.
VPair empirical_v(const MeasureSpec& spec, const std::vector<double>& f, const std::vector<double>& t) {
  const std::size_t n = f.size();
  const double tau = spec.tau;
  VPair v;
  if (spec.m() == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      const double target = spec.kind == MeasureKind::Brier ? (t[i] > tau ? 1.0 : 0.0) : std::min(t[i], tau);
      v.v1 += (f[i] - target) * (f[i] - target);
    }
    v.v1 /= static_cast<double>(n);
    v.v2 = 1.0;
    return v;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const bool auc = spec.kind == MeasureKind::Auc;
      auto case_ctrl = [&](std::size_t a, std::size_t b) {
        return t[a] <= tau && (auc ? t[b] > tau : t[b] > t[a]);
      };
      const double th = 0.5 * (case_ctrl(i, k) + case_ctrl(k, i));
      const double om = 0.5 * ((case_ctrl(i, k) && f[i] > f[k]) + (case_ctrl(k, i) && f[k] > f[i]));
      v.v1 += om;
      v.v2 += th;
    }
  v.v1 /= static_cast<double>(n * n);
  v.v2 /= static_cast<double>(n * n);
  return v;
}

const MeasureSpec kAuc{MeasureKind::Auc, 0.5};
const MeasureSpec kBrier{MeasureKind::Brier, 0.5};
const MeasureSpec kMse{MeasureKind::SurvivalMse, 0.5};
const MeasureSpec kCindex{MeasureKind::Cindex, 0.9};

}  // namespace

TEST(Kernels, AucPairWorkedExample) {
  EXPECT_DOUBLE_EQ(kernel_omega2(kAuc, {0.9, 0.3}, {0.2, 0.8}), 0.5);
  EXPECT_DOUBLE_EQ(kernel_theta2(kAuc, 0.3, 0.8), 0.5);
}

TEST(Kernels, BrierSingle) {
  const ScoreTime p[1] = {{0.7, 0.8}};
  EXPECT_NEAR(kernel_omega(kBrier, p), 0.09, 1e-15);
  const double t[1] = {0.8};
  EXPECT_DOUBLE_EQ(kernel_theta(kBrier, t), 1.0);
}

TEST(Kernels, SurvivalMseTruncatesAtTau) {
  const ScoreTime p[1] = {{0.2, 3.0}};
  EXPECT_NEAR(kernel_omega(kMse, p), 0.09, 1e-15);
}

TEST(Kernels, CindexPairIsSymmetric) {
  EXPECT_DOUBLE_EQ(kernel_omega2(kCindex, {0.9, 0.3}, {0.2, 0.8}), 0.5);
  EXPECT_DOUBLE_EQ(kernel_omega2(kCindex, {0.2, 0.8}, {0.9, 0.3}), 0.5);
  EXPECT_DOUBLE_EQ(kernel_theta2(kCindex, 0.95, 1.2), 0.0);
}

TEST(Kernels, WrongArityIsContractError) {
  const ScoreTime one[1] = {{0.1, 0.2}};
  const ScoreTime two[2] = {{0.1, 0.2}, {0.3, 0.4}};
  EXPECT_THROW(kernel_omega(kAuc, one), ContractError);
  EXPECT_THROW(kernel_omega(kBrier, two), ContractError);
  const double t1[1] = {0.2};
  EXPECT_THROW(kernel_theta(kCindex, t1), ContractError);
}

TEST(Kernels, RandomSymmetryAndRange) {
  Rng rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.5);
  for (const auto& spec : {kAuc, kCindex}) {
    for (int r = 0; r < 2000; ++r) {
      const ScoreTime a{u(rng), u(rng)}, b{u(rng), u(rng)};
      const double ab = kernel_omega2(spec, a, b), ba = kernel_omega2(spec, b, a);
      EXPECT_EQ(ab, ba);
      EXPECT_GE(ab, 0.0);
      EXPECT_LE(ab, kernel_theta2(spec, a.t, b.t));
    }
  }
}

TEST(MeasureSpec, ParseAndErrors) {
  EXPECT_EQ(MeasureSpec::parse("survival-mse", 1.0).kind, MeasureKind::SurvivalMse);
  EXPECT_EQ(MeasureSpec::parse("cindex", 1.0).m(), 2);
  EXPECT_THROW(MeasureSpec::parse("accuracy", 1.0), ConfigurationError);
  EXPECT_THROW(MeasureSpec::parse("auc", 0.0), ConfigurationError);
}

TEST(OraclePrediction, ExponentialClosedForms) {
  const auto grid = make_grid({0.25, 0.5}, 0.5);
  const auto c = exponential_curves(grid, 3);
  const auto auc = oracle_prediction(kAuc, c);
  EXPECT_NEAR(auc.scores(0), 1.0 - std::exp(-0.5), 1e-12);
  EXPECT_NEAR(auc.scores(0), 0.3935, 1e-4);
  const auto mse = oracle_prediction(kMse, c);
  EXPECT_NEAR(mse.scores(2), 0.25 * (std::exp(-0.25) + std::exp(-0.5)), 1e-12);
  EXPECT_NEAR(mse.scores(2), 0.3463, 1e-4);
  EXPECT_THROW(oracle_prediction(kCindex, c), ConfigurationError);
}

TEST(OraclePrediction, BrierIsSurvivalAtTau) {
  const auto grid = make_grid({0.5}, 0.5);
  SurvivalCurveSet c;
  c.grid = grid;
  c.S = Eigen::MatrixXd::Constant(1, 1, 0.7);
  c.G = Eigen::MatrixXd::Ones(1, 1);
  c.dL = hazard_increments(c.S);
  EXPECT_NEAR(oracle_prediction(kBrier, c).scores(0), 0.7, 1e-15);
}

TEST(PseudoOutcome, NoCensoringEqualsIndicator) {
  const auto grid = make_grid({0.2, 0.4, 0.6, 0.8}, 0.6);
  Eigen::RowVectorXd S(4), G = Eigen::RowVectorXd::Ones(4);
  S << 0.9, 0.7, 0.5, 0.3;
  for (double y : {0.2, 0.4, 0.5, 0.6, 0.8, 1.3}) EXPECT_NEAR(pseudo_outcome(y, 1, S, G, grid, 0.6), y >= 0.6 ? 1.0 : 0.0, 1e-14);
}

TEST(PseudoOutcome, CensoredBeforeTauUsesConditionalSurvival) {
  const auto grid = make_grid({0.2, 0.4, 0.6, 0.8}, 0.6);
  Eigen::RowVectorXd S(4), G = Eigen::RowVectorXd::Ones(4);
  S << 0.9, 0.7, 0.5, 0.3;
  EXPECT_NEAR(pseudo_outcome(0.4, 0, S, G, grid, 0.6), 0.5 / 0.7, 1e-14);
  EXPECT_NEAR(pseudo_outcome(0.1, 0, S, G, grid, 0.6), 0.5, 1e-14);
}

TEST(PseudoOutcome, DoublyRobustExactExpectation) {
  // Event atoms at 1..5, censoring atoms at 0.5..4.5, both beyond the grid with the
  // remaining mass; the grid holds every atom, so expectations are exact sums.
  TimeGrid grid;
  for (int k = 1; k <= 11; ++k) grid.points.push_back(0.5 * k);
  grid.tau = 2.5;
  const std::vector<double> sT{0.8, 0.6, 0.45, 0.3, 0.1}, sC{0.9, 0.7, 0.6, 0.5, 0.4};
  const std::vector<double> wT{0.95, 0.5, 0.2, 0.15, 0.05}, wC{0.8, 0.75, 0.4, 0.3, 0.3};
  auto on_grid = [&](const std::vector<double>& v, double shift) {
    Eigen::RowVectorXd r(11);
    for (int k = 0; k < 11; ++k) {
      const int c = static_cast<int>(std::floor(0.5 * (k + 1) + shift + 1e-9));
      r(k) = c == 0 ? 1.0 : v[static_cast<std::size_t>(std::min(c, 5) - 1)];
    }
    return r;
  };
  auto mass = [](const std::vector<double>& v, std::size_t j) {
    return (j == 0 ? 1.0 : v[j - 1]) - (j < 5 ? v[j] : 0.0);
  };
  auto expectation = [&](const std::vector<double>& s, const std::vector<double>& g) {
    const auto S = on_grid(s, 0.0), G = on_grid(g, 0.5);
    double e = 0.0;
    for (std::size_t a = 0; a < 6; ++a)
      for (std::size_t b = 0; b < 6; ++b) {
        const double t = a < 5 ? a + 1.0 : 100.0, c = b < 5 ? b + 0.5 : 100.25;
        e += mass(sT, a) * mass(sC, b) * pseudo_outcome(std::min(t, c), t < c ? 1 : 0, S, G, grid, 2.5);
      }
    return e;
  };
  const double target = 0.6;  // P(T >= 2.5)
  EXPECT_NEAR(expectation(sT, sC), target, 1e-14);
  EXPECT_NEAR(expectation(wT, sC), target, 1e-14);
  EXPECT_NEAR(expectation(sT, wC), target, 1e-14);
  EXPECT_GT(std::abs(expectation(wT, wC) - target), 1e-3);
}

TEST(Regression, LeastSquaresInterpolatesLinearTargets) {
  Rng rng(3);
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(40, 3);
  for (Eigen::Index i = 0; i < 40; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = z(rng);
  const Eigen::VectorXd y = (1.5 + 2.0 * x.col(0).array() - 0.5 * x.col(2).array()).matrix();
  const auto fit = fit_regression(x, y, {RegressionLearnerSpec::Family::LeastSquaresBasis, "main"});
  EXPECT_LE((fit.predict(x) - y).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Regression, KnnWithAllNeighboursIsMean) {
  Eigen::MatrixXd x(5, 1);
  x << 0, 1, 2, 3, 4;
  Eigen::VectorXd y(5);
  y << 1, 2, 3, 4, 10;
  RegressionLearnerSpec spec;
  spec.family = RegressionLearnerSpec::Family::Knn;
  spec.k = 5;
  const auto pred = fit_regression(x, y, spec).predict(x);
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(pred(i), 4.0, 1e-12);
  spec.k = 6;
  EXPECT_THROW(fit_regression(x, y, spec), ConfigurationError);
}

TEST(Regression, QuadraticBasisRecoversSquare) {
  Rng rng(5);
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(500, 2);
  for (Eigen::Index i = 0; i < 500; ++i) x.row(i) << z(rng), z(rng);
  const Eigen::VectorXd y = x.col(0).array().square().matrix();
  const auto fit = fit_regression(x, y, {RegressionLearnerSpec::Family::LeastSquaresBasis, "quadratic"});
  EXPECT_LE((fit.predict(x) - y).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Regression, ClampKeepsUnitInterval) {
  Eigen::MatrixXd x(4, 1);
  x << 0, 1, 2, 3;
  Eigen::VectorXd y(4);
  y << -1, 0.5, 0.5, 2;
  RegressionLearnerSpec spec{RegressionLearnerSpec::Family::LeastSquaresBasis, "main", 10, true};
  const auto p = fit_regression(x, y, spec).predict(x);
  EXPECT_GE(p.minCoeff(), 0.0);
  EXPECT_LE(p.maxCoeff(), 1.0);
}

TEST(ResidualOracle, IrrelevantSetLeavesScoresUnchanged) {
  Rng rng(8);
  std::normal_distribution<double> z;
  const std::size_t n = 200;
  Eigen::MatrixXd x(n, 2);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) x.row(i) << z(rng), z(rng);
  std::vector<double> y(n, 1.0);
  std::vector<int> d(n, 1);
  const Dataset data(x, y, d, {"x1", "x2"});
  PredictionFunction full{(0.3 - 0.7 * x.col(1).array()).matrix(), "full"};
  const auto red = residual_oracle(full, data, {0}, {RegressionLearnerSpec::Family::LeastSquaresBasis, "main"});
  EXPECT_LE((red.scores - full.scores).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(ResidualOracle, IndependentRelevantFeatureCollapsesToMean) {
  Rng rng(9);
  std::normal_distribution<double> z;
  const std::size_t n = 10000;
  Eigen::MatrixXd x(n, 2);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) x.row(i) << z(rng), z(rng);
  std::vector<double> y(n, 1.0);
  std::vector<int> d(n, 1);
  const Dataset data(x, y, d, {"x1", "x2"});
  PredictionFunction full{x.col(0), "full"};
  const auto red = residual_oracle(full, data, {0}, {RegressionLearnerSpec::Family::LeastSquaresBasis, "main"});
  const double mean = full.scores.mean();
  const double sd = std::sqrt((red.scores.array() - red.scores.mean()).square().mean());
  EXPECT_NEAR(red.scores.mean(), mean, 1e-10);
  EXPECT_LE(sd, 0.05);
}

TEST(ResidualOracle, SetCoveringAllFeaturesIsContractError) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 2);
  const Eigen::VectorXd f = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(fit_residual(x, f, {0, 1}, {}), ContractError);
  EXPECT_THROW(fit_residual(x, f, {}, {}), ContractError);
  EXPECT_THROW(fit_residual(x, f, {4}, {}), ContractError);
}

TEST(ResidualOracle, RemovingAllSignalGivesChanceAuc) {
  const auto data = generate_scenario({2, 4000, 17, 0.0});
  const auto grid = build_time_grid(data, 0.5, GridPolicy::equal_spacing(20));
  const auto curves = predict_curves(*true_event_model(2), *no_censoring_model(), data.x(), grid, 0.0);
  const MeasureSpec auc{MeasureKind::Auc, 0.5};
  const auto full = oracle_prediction(auc, curves);
  const auto red = residual_oracle(full, data, {0, 1, 2, 3, 4}, {RegressionLearnerSpec::Family::LeastSquaresBasis, "main"});
  const auto m = masses_from_cdf(curves.event_cdf());
  const auto times = atom_times(grid);
  const auto vf = v_statistic_bruteforce(full.scores.head(300), m.topRows(300), times, auc);
  const auto vr = v_statistic_bruteforce(red.scores.head(300), m.topRows(300), times, auc);
  EXPECT_GT(vf.ratio(), 0.6);
  EXPECT_NEAR(vr.ratio(), 0.5, 0.05);
}

TEST(VStatistic, BrierSingleSubjectPerfect) {
  const auto grid = make_grid({0.5, 0.8}, 0.5);
  const auto c = point_mass_curves(grid, {1});
  const auto v = v_statistic_plugin({Eigen::VectorXd::Ones(1), "f"}, c, kBrier);
  EXPECT_DOUBLE_EQ(v.v1, 0.0);
  EXPECT_DOUBLE_EQ(v.v2, 1.0);
}

TEST(VStatistic, AucTwoPointMasses) {
  const auto grid = make_grid({0.3, 0.5, 0.8}, 0.5);
  const auto c = point_mass_curves(grid, {0, 2});
  Eigen::VectorXd f(2);
  f << 0.9, 0.2;
  const auto v = v_statistic_plugin({f, "f"}, c, kAuc);
  EXPECT_NEAR(v.v1, 0.25, 1e-15);
  EXPECT_NEAR(v.v2, 0.25, 1e-15);
  EXPECT_NEAR(v.ratio(), 1.0, 1e-15);
}

TEST(VStatistic, CindexConstantScoresIsZero) {
  const auto grid = make_grid({0.3, 0.5, 0.8}, 0.9);
  const auto c = point_mass_curves(grid, {0, 1, 2});
  const auto v = v_statistic_plugin({Eigen::VectorXd::Constant(3, 0.4), "f"}, c, kCindex);
  EXPECT_EQ(v.v1, 0.0);
  EXPECT_GT(v.v2, 0.0);
}

TEST(VStatistic, PointMassesMatchEmpiricalFormula) {
  Rng rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto grid = make_grid({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8}, 0.45);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 3 + static_cast<std::size_t>(rep % 6);
    std::vector<std::size_t> atom(n);
    std::vector<double> f(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
      atom[i] = static_cast<std::size_t>(u(rng) * 9.0);
      t[i] = atom[i] < 8 ? grid.points[atom[i]] : 1e300;
      f[i] = std::round(u(rng) * 4.0) / 4.0;
    }
    const auto c = point_mass_curves(grid, atom);
    const Eigen::VectorXd fv = Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(n));
    for (auto kind : {MeasureKind::Auc, MeasureKind::Brier, MeasureKind::SurvivalMse, MeasureKind::Cindex}) {
      const MeasureSpec spec{kind, 0.45};
      const auto got = v_statistic_plugin({fv, "f"}, c, spec);
      const auto want = empirical_v(spec, f, t);
      EXPECT_NEAR(got.v1, want.v1, 1e-12);
      EXPECT_NEAR(got.v2, want.v2, 1e-12);
    }
  }
}

TEST(VStatistic, SingleArgumentNormaliserIsOne) {
  const auto grid = make_grid({0.25, 0.5}, 0.5);
  const auto c = exponential_curves(grid, 4);
  for (const auto& spec : {kBrier, kMse}) {
    const auto v = v_statistic_plugin(oracle_prediction(spec, c), c, spec);
    EXPECT_NEAR(v.v2, 1.0, 1e-14);
  }
}

TEST(VStatistic, AucComplementWithTieFreePointMasses) {
  Rng rng(33);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto grid = make_grid({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}, 0.55);
  int checked = 0;
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<std::size_t> pool{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t n = 6;
    const std::vector<std::size_t> atom(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
    Eigen::VectorXd f(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = u(rng);
    const auto c = point_mass_curves(grid, atom);
    const auto a = v_statistic_plugin({f, "f"}, c, kAuc);
    const auto b = v_statistic_plugin({-f, "-f"}, c, kAuc);
    if (a.v2 <= 0.0) continue;
    ++checked;
    EXPECT_NEAR(b.ratio(), (a.v2 - a.v1) / a.v2, 1e-12);
  }
  EXPECT_GT(checked, 30);
}

TEST(VStatistic, PairwiseRatioInUnitInterval) {
  Rng rng(44);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto grid = make_grid({0.2, 0.4, 0.6, 0.8}, 0.6);
  for (int rep = 0; rep < 50; ++rep) {
    SurvivalCurveSet c;
    c.grid = grid;
    c.S.resize(5, 4);
    for (Eigen::Index i = 0; i < 5; ++i) {
      double s = 1.0;
      for (Eigen::Index j = 0; j < 4; ++j) c.S(i, j) = s *= u(rng);
    }
    c.G = Eigen::MatrixXd::Ones(5, 4);
    c.dL = hazard_increments(c.S);
    Eigen::VectorXd f(5);
    for (Eigen::Index i = 0; i < 5; ++i) f(i) = u(rng);
    for (const auto& spec : {MeasureSpec{MeasureKind::Auc, 0.6}, MeasureSpec{MeasureKind::Cindex, 0.6}}) {
      const auto v = v_statistic_plugin({f, "f"}, c, spec);
      EXPECT_GE(v.ratio(), 0.0);
      EXPECT_LE(v.ratio(), 1.0);
    }
  }
}
