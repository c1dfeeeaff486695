#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "cindex_boost.hpp"
#include "core_data.hpp"
#include "debias.hpp"
#include "errors.hpp"
#include "measures.hpp"
#include "normal.hpp"
#include "nuisance.hpp"
#include "rng.hpp"

namespace survim {

struct NuisanceSpec {
  std::string family = "lognormal-aft";  // marginal-km | lognormal-aft | discrete-hazard | injected
  std::string basis = "main";
};

enum class OracleMethod { Cdf, PseudoOutcome };

struct EstimatorConfig {
  MeasureSpec measure;
  std::vector<std::size_t> s;  // 0-based feature indices
  NuisanceSpec event;
  NuisanceSpec censoring{"lognormal-aft", "main"};
  RegressionLearnerSpec learner;
  OracleMethod oracle = OracleMethod::Cdf;
  BoostConfig boost;
  int K = 5;
  double alpha = 0.05;
  double eta_floor = 0.05;
  GridPolicy grid;
  bool clamp = false;
  unsigned threads = 1;
  // Closed-form nuisances that bypass fitting (simulation truth, tests).
  ModelPtr event_override;
  ModelPtr censor_override;
};

struct FoldDiagnostics {
  int fold = 0;
  std::size_t n = 0;
  double v1 = 0.0, v2 = 0.0, v1s = 0.0;
  double sigma2 = 0.0;
  bool full = true, reduced = true;
};

struct VimEstimate {
  double psi = 0.0;
  double se = 0.0;
  double ci_lower = 0.0, ci_upper = 0.0;
  double p_one_sided = 1.0;
  double v_full = 0.0, v_reduced = 0.0;
  double sigma2 = 0.0;  // variance estimate on the algorithm's own scale
  std::string algorithm;
  std::uint64_t seed = 0;
  int reps = 1;
  int fold_retries = 0;
  std::vector<FoldDiagnostics> folds;
};

inline double z_quantile(double alpha) { return normal::quantile(1.0 - alpha / 2.0); }

// ------------------------------------------------------------ one fold

struct FoldResult {
  FoldDiagnostics diag;
  Eigen::VectorXd f_full, f_reduced;
  Eigen::MatrixXd a, b;  // one-step pi masses and plug-in F masses on the test fold
  std::vector<double> times;
  VPair v_full, v_reduced;

  /// Influence function values on the fold, centred at (v1c, v2c).
  Eigen::VectorXd phi(bool full, const MeasureSpec& spec, double v1c, double v2c) const {
    return eif_components(full ? f_full : f_reduced, a, b, times, spec, v1c, v2c).phi;
  }
};

namespace detail {

inline ModelPtr fit_nuisance(const NuisanceSpec& spec, const Dataset& train, Target target, const TimeGrid& grid) {
  if (spec.family == "marginal-km") return fit_marginal_km(train, target);
  if (spec.family == "lognormal-aft")
    return fit_lognormal_aft(train, target, Basis::parse(spec.basis, train.p()));
  if (spec.family == "discrete-hazard")
    return fit_discrete_hazard(train, target, grid, Basis::parse(spec.basis, train.p()));
  if (spec.family == "injected") return inject_misspecification(grid, target);
  throw ConfigurationError("unknown nuisance family '" + spec.family + "'");
}

inline Eigen::VectorXd scores_from_survival(const MeasureSpec& spec, const Eigen::MatrixXd& S, const TimeGrid& grid) {
  SurvivalCurveSet c;
  c.grid = grid;
  c.S = S;
  return oracle_prediction(spec, c).scores;
}

inline std::vector<std::size_t> all_but(std::size_t p, const std::vector<std::size_t>& s) {
  std::vector<std::size_t> m;
  for (std::size_t j = 0; j < p; ++j)
    if (std::find(s.begin(), s.end(), j) == s.end()) m.push_back(j);
  return m;
}

}  // namespace detail

/// Fits nuisances on `train`, builds full and reduced prediction functions, the one-step
/// joint on `test`, and the fold's predictiveness and influence functions.
inline FoldResult run_fold(const Dataset& train, const Dataset& test, const TimeGrid& grid, const EstimatorConfig& cfg,
                           int fold_label, std::uint64_t seed) {
  const auto& spec = cfg.measure;
  std::size_t test_events = 0;
  for (std::size_t i = 0; i < test.n(); ++i)
    if (test.delta(i) == 1 && test.y(i) <= spec.tau) ++test_events;
  if (test_events == 0) throw FoldDegeneracyError(fold_label, "no observed events at or before tau");
  std::size_t train_events = 0;
  for (std::size_t i = 0; i < train.n(); ++i)
    if (train.delta(i) == 1 && train.y(i) <= spec.tau) ++train_events;
  if (train_events == 0) throw FoldDegeneracyError(fold_label, "training folds hold no events at or before tau");

  const ModelPtr ev = cfg.event_override ? cfg.event_override : detail::fit_nuisance(cfg.event, train, Target::Event, grid);
  const ModelPtr ce =
      cfg.censor_override ? cfg.censor_override : detail::fit_nuisance(cfg.censoring, train, Target::Censoring, grid);
  const SurvivalCurveSet test_curves = predict_curves(*ev, *ce, test.x(), grid, cfg.eta_floor);

  FoldResult out;
  const auto p = train.p();
  if (spec.kind == MeasureKind::Cindex) {
    const SurvivalCurveSet train_curves = predict_curves(*ev, *ce, train.x(), grid, cfg.eta_floor);
    const Eigen::MatrixXd w = pair_weights(train_curves, spec.tau);
    BoostConfig bc = cfg.boost;
    bc.seed = derive_seed(seed, 0xB0);
    std::vector<std::size_t> all(p);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto full = [&] {
      const auto choice = cv_select(train.x(), w, bc, all);
      return boost_cindex(train.x(), w, {choice.mstop, choice.zeta, bc.learning_rate, bc.subsample, derive_seed(seed, 0xF1)}, all);
    }();
    bc.seed = derive_seed(seed, 0xB1);
    const auto red_mask = detail::all_but(p, cfg.s);
    if (red_mask.empty()) throw ContractError("feature set s covers every feature; no residual features remain");
    const auto reduced = [&] {
      const auto choice = cv_select(train.x(), w, bc, red_mask);
      return boost_cindex(train.x(), w, {choice.mstop, choice.zeta, bc.learning_rate, bc.subsample, derive_seed(seed, 0xF2)}, red_mask);
    }();
    out.f_full = full.predict(test.x());
    out.f_reduced = reduced.predict(test.x());
  } else if (cfg.oracle == OracleMethod::Cdf) {
    out.f_full = oracle_prediction(spec, test_curves).scores;
    const Eigen::VectorXd train_full = detail::scores_from_survival(spec, predict_survival(*ev, train.x(), grid), grid);
    out.f_reduced = fit_residual(train.x(), train_full, cfg.s, cfg.learner).predict(test.x());
  } else {
    if (spec.kind == MeasureKind::SurvivalMse)
      throw ConfigurationError("pseudo-outcome oracle targets survival at tau; not available for survival-mse");
    const SurvivalCurveSet train_curves = predict_curves(*ev, *ce, train.x(), grid, cfg.eta_floor);
    const Eigen::VectorXd po = pseudo_outcomes(train, train_curves, spec.tau);
    RegressionLearnerSpec lf = cfg.learner;
    lf.clamp01 = true;
    const auto fit = fit_regression(train.x(), po, lf);
    // regression estimates survival at tau; AUC ranks by risk
    auto convert = [&](const Eigen::VectorXd& surv) -> Eigen::VectorXd {
      return spec.kind == MeasureKind::Auc ? Eigen::VectorXd((1.0 - surv.array()).matrix()) : surv;
    };
    const Eigen::VectorXd train_full = convert(fit.predict(train.x()));
    out.f_full = convert(fit.predict(test.x()));
    out.f_reduced = fit_residual(train.x(), train_full, cfg.s, cfg.learner).predict(test.x());
  }

  const DebiasedJoint joint = build_debiased_joint(test, test_curves);
  out.a = joint.masses();
  out.b = masses_from_cdf(test_curves.event_cdf());
  out.times = atom_times(grid);
  out.v_full = v_statistic_fast(out.f_full, out.a, out.times, spec);
  out.v_reduced = v_statistic_fast(out.f_reduced, out.a, out.times, spec);
  out.diag.fold = fold_label;
  out.diag.n = test.n();
  out.diag.v1 = out.v_full.v1;
  out.diag.v2 = out.v_full.v2;
  out.diag.v1s = out.v_reduced.v1;
  return out;
}

inline void check_identification(const Dataset& data, double tau) {
  const double last = last_event_time(data);
  if (tau > last)
    throw IdentificationError("tau = " + std::to_string(tau) + " lies beyond the last observed event time " +
                              std::to_string(last) + "; the target is not identified");
}

namespace detail {

inline void clamp_unit(VimEstimate& e, const MeasureSpec& spec) {
  if (spec.m() != 2) return;
  e.v_full = std::clamp(e.v_full, 0.0, 1.0);
  e.v_reduced = std::clamp(e.v_reduced, 0.0, 1.0);
  e.psi = e.v_full - e.v_reduced;
}

}  // namespace detail

// ---------------------------------------------------------- Algorithm 1

/// Cross-fitted one-step VIM with Wald inference (non-null importance).
inline VimEstimate algorithm1(const Dataset& data, const EstimatorConfig& cfg, std::uint64_t seed) {
  check_identification(data, cfg.measure.tau);
  const TimeGrid grid = build_time_grid(data, cfg.measure.tau, cfg.grid);
  const auto folds = make_folds(data.n(), cfg.K, seed);
  std::vector<FoldResult> res(static_cast<std::size_t>(cfg.K));
  parallel_for(static_cast<std::size_t>(cfg.K), cfg.threads, [&](std::size_t idx) {
    const int k = static_cast<int>(idx) + 1;
    const auto test_idx = folds.members(k);
    const auto train_idx = cfg.K == 1 ? test_idx : folds.complement(k);
    res[idx] = run_fold(data.subset(train_idx), data.subset(test_idx), grid, cfg, k, derive_seed(seed, 0xA1, idx));
  });
  VimEstimate e;
  e.algorithm = "crossfit";
  e.seed = seed;
  e.fold_retries = folds.retries;
  double s1 = 0.0, s1s = 0.0, s2 = 0.0, sig = 0.0;
  for (const auto& r : res) {
    s1 += r.diag.v1;
    s1s += r.diag.v1s;
    s2 += r.diag.v2;
  }
  // influence functions centred at the pooled one-step values
  const double dK = static_cast<double>(cfg.K);
  for (auto& r : res) {
    const Eigen::VectorXd d = r.phi(true, cfg.measure, s1 / dK, s2 / dK) - r.phi(false, cfg.measure, s1s / dK, s2 / dK);
    r.diag.sigma2 = d.squaredNorm() / static_cast<double>(r.diag.n);
    sig += r.diag.sigma2;
    e.folds.push_back(r.diag);
  }
  const double o = cfg.measure.orientation();
  e.v_full = o * s1 / s2;
  e.v_reduced = o * s1s / s2;
  e.psi = e.v_full - e.v_reduced;
  if (cfg.clamp) detail::clamp_unit(e, cfg.measure);
  e.sigma2 = sig / dK;
  e.se = std::sqrt(e.sigma2 / static_cast<double>(data.n()));
  const double z = z_quantile(cfg.alpha);
  e.ci_lower = e.psi - z * e.se;
  e.ci_upper = e.psi + z * e.se;
  e.p_one_sided = e.se > 0.0 ? 1.0 - normal::cdf(e.psi / e.se) : (e.psi > 0.0 ? 0.0 : 1.0);
  return e;
}

// ---------------------------------------------------------- Algorithm 2

/// Sample-split cross-fitted VIM: odd folds estimate the full predictiveness, even folds
/// the reduced one, which keeps inference valid under zero importance.
inline VimEstimate algorithm2(const Dataset& data, const EstimatorConfig& cfg, std::uint64_t seed) {
  check_identification(data, cfg.measure.tau);
  if (data.n() < 4 * static_cast<std::size_t>(cfg.K))
    throw ConfigurationError("sample splitting needs n >= 4K");
  const TimeGrid grid = build_time_grid(data, cfg.measure.tau, cfg.grid);
  const int K2 = 2 * cfg.K;
  const auto folds = make_folds(data.n(), K2, seed);
  std::vector<FoldResult> res(static_cast<std::size_t>(K2));
  parallel_for(static_cast<std::size_t>(K2), cfg.threads, [&](std::size_t idx) {
    const int k = static_cast<int>(idx) + 1;
    res[idx] = run_fold(data.subset(folds.complement(k)), data.subset(folds.members(k)), grid, cfg, k,
                        derive_seed(seed, 0xA2, idx));
  });
  VimEstimate e;
  e.algorithm = "samplesplit";
  e.seed = seed;
  e.fold_retries = folds.retries;
  double s1_odd = 0.0, s2_odd = 0.0, s1s_even = 0.0, s2_even = 0.0, sig_odd = 0.0, sig_even = 0.0;
  std::size_t n_s = 0;
  for (const auto& r : res) {
    if (r.diag.fold % 2 == 1) {
      s1_odd += r.diag.v1;
      s2_odd += r.diag.v2;
    } else {
      s1s_even += r.diag.v1s;
      s2_even += r.diag.v2;
      n_s += r.diag.n;
    }
  }
  const double dK = static_cast<double>(cfg.K);
  for (auto& r : res) {
    const bool odd = r.diag.fold % 2 == 1;
    r.diag.full = odd;
    r.diag.reduced = !odd;
    // influence functions centred at the pooled one-step values of the fold's half
    const Eigen::VectorXd phi = odd ? r.phi(true, cfg.measure, s1_odd / dK, s2_odd / dK)
                                    : r.phi(false, cfg.measure, s1s_even / dK, s2_even / dK);
    r.diag.sigma2 = phi.squaredNorm() / static_cast<double>(r.diag.n);
    (odd ? sig_odd : sig_even) += r.diag.sigma2;
    e.folds.push_back(r.diag);
  }
  const double o = cfg.measure.orientation();
  e.v_full = o * s1_odd / s2_odd;
  e.v_reduced = o * s1s_even / s2_even;
  e.psi = e.v_full - e.v_reduced;
  if (cfg.clamp) detail::clamp_unit(e, cfg.measure);
  const double n_star = static_cast<double>(data.n() - n_s);
  e.sigma2 = sig_odd / (dK * n_star) + sig_even / (dK * static_cast<double>(n_s));
  e.se = std::sqrt(e.sigma2);
  const double zq = z_quantile(cfg.alpha);
  e.ci_lower = e.psi - zq * e.se;
  e.ci_upper = e.psi + zq * e.se;
  e.p_one_sided = e.se > 0.0 ? 1.0 - normal::cdf(e.psi / e.se) : (e.psi > 0.0 ? 0.0 : 1.0);
  return e;
}

// ------------------------------------------------------------ aggregation

/// Compound Bonferroni-geometric rule: min(1, 2 min(N min p_i, e * geometric mean)).
inline double aggregate_pvalues(const std::vector<double>& p) {
  if (p.empty()) throw ContractError("cannot aggregate an empty p-value list");
  double mn = 1.0, logsum = 0.0;
  for (double v : p) {
    if (!(v > 0.0 && v <= 1.0)) throw ContractError("p-values must lie in (0, 1]; got " + std::to_string(v));
    mn = std::min(mn, v);
    logsum += std::log(v);
  }
  const double N = static_cast<double>(p.size());
  const double geo = std::exp(logsum / N);
  return std::min(1.0, 2.0 * std::min(N * mn, std::numbers::e * geo));
}

struct AggregatedEstimate {
  double psi = 0.0;
  double p_aggregated = 1.0;
  double ci_lower = 0.0, ci_upper = 0.0;
  int splits = 0;
  std::vector<VimEstimate> runs;
  double se = 0.0;  // mean per-split standard error, reported for reference
  double v_full = 0.0, v_reduced = 0.0;
};

namespace detail {

inline double two_sided(double psi, double se, double psi0) {
  if (!(se > 0.0)) return psi == psi0 ? 1.0 : std::numeric_limits<double>::min();
  const double z = std::abs(psi - psi0) / se;
  return std::max(std::numeric_limits<double>::min(), 2.0 * normal::sf(z));
}

// Single-split rule reduces to the split's own p-value so that R = 1 inverts to the Wald CI.
inline double combined_two_sided(const std::vector<VimEstimate>& runs, double psi0) {
  std::vector<double> ps;
  for (const auto& r : runs) ps.push_back(std::min(1.0, two_sided(r.psi, r.se, psi0)));
  return ps.size() == 1 ? ps[0] : aggregate_pvalues(ps);
}

}  // namespace detail

/// Confidence set {psi0 : aggregated two-sided p(psi0) >= alpha} by bracketed bisection.
inline std::pair<double, double> invert_aggregated(const std::vector<VimEstimate>& runs, double centre, double alpha,
                                                   double tol = 1e-6) {
  auto P = [&](double x) { return detail::combined_two_sided(runs, x); };
  if (P(centre) < alpha)
    throw InversionError("aggregated p-value at the point estimate is below alpha (" + std::to_string(P(centre)) +
                         "); splits disagree too strongly to invert");
  double scale = 0.0;
  for (const auto& r : runs) scale = std::max(scale, r.se);
  if (!(scale > 0.0)) scale = 1e-3;
  auto bound = [&](double dir) {
    double step = scale;
    int doublings = 0;
    while (P(centre + dir * step) >= alpha) {
      step *= 2.0;
      if (++doublings > 60)
        throw InversionError("bisection bracket not found after 60 doublings (last step " + std::to_string(step) + ")");
    }
    double in = centre, out = centre + dir * step;
    while (std::abs(out - in) > tol * 0.5) {
      const double mid = 0.5 * (in + out);
      if (P(mid) >= alpha) in = mid;
      else out = mid;
    }
    return 0.5 * (in + out);
  };
  return {bound(-1.0), bound(1.0)};
}

/// R runs of Algorithm 2 with counter-derived seeds; mean estimate, aggregated one-sided p,
/// and the inverted aggregated two-sided test as CI.
inline AggregatedEstimate repeat_and_aggregate(const Dataset& data, const EstimatorConfig& cfg, int R,
                                               std::uint64_t master_seed) {
  if (R < 1) throw ConfigurationError("repetitions must be at least 1");
  AggregatedEstimate out;
  out.splits = R;
  out.runs.resize(static_cast<std::size_t>(R));
  EstimatorConfig inner = cfg;
  inner.threads = 1;
  parallel_for(static_cast<std::size_t>(R), cfg.threads, [&](std::size_t r) {
    out.runs[r] = algorithm2(data, inner, R == 1 ? master_seed : derive_seed(master_seed, 0xAB, r));
  });
  std::vector<double> ps;
  for (const auto& run : out.runs) {
    out.psi += run.psi;
    out.se += run.se;
    out.v_full += run.v_full;
    out.v_reduced += run.v_reduced;
    ps.push_back(std::max(run.p_one_sided, std::numeric_limits<double>::min()));
  }
  out.psi /= R;
  out.se /= R;
  out.v_full /= R;
  out.v_reduced /= R;
  out.p_aggregated = R == 1 ? ps[0] : aggregate_pvalues(ps);
  const auto ci = invert_aggregated(out.runs, out.psi, cfg.alpha);
  out.ci_lower = ci.first;
  out.ci_upper = ci.second;
  return out;
}

inline VimEstimate run_estimator(const Dataset& data, const EstimatorConfig& cfg, const std::string& algorithm,
                                 std::uint64_t seed) {
  if (algorithm == "crossfit") return algorithm1(data, cfg, seed);
  if (algorithm == "samplesplit") return algorithm2(data, cfg, seed);
  throw ConfigurationError("unknown algorithm '" + algorithm + "' (expected crossfit or samplesplit)");
}

}  // namespace survim
