#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "core_data.hpp"
#include "errors.hpp"
#include "inference.hpp"
#include "measures.hpp"
#include "normal.hpp"
#include "rng.hpp"

namespace survim {

// --------------------------------------------------------------- scenarios

struct ScenarioSpec {
  int scenario = 1;  // 1..4
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  double censor_beta0 = 0.0;
};

inline std::size_t scenario_dimension(int scenario) {
  switch (scenario) {
    case 1:
    case 2: return 25;
    case 3:
    case 4: return 5;
  }
  throw ConfigurationError("scenario must be 1, 2, 3 or 4; got " + std::to_string(scenario));
}

inline Eigen::MatrixXd scenario_covariance(int scenario) {
  const auto p = static_cast<Eigen::Index>(scenario_dimension(scenario));
  Eigen::MatrixXd S = Eigen::MatrixXd::Identity(p, p);
  if (scenario == 1) {
    S(0, 5) = S(5, 0) = 0.7;
    S(1, 2) = S(2, 1) = -0.3;
  }
  return S;
}

inline const std::vector<double>& scenario4_censor_levels() {
  static const std::vector<double> v{0.85, 0.5, 0.0, -0.45, -0.85};
  return v;
}

/// Event-model terms: (a, b, coef) with b < 0 for main effects, 0-based.
struct EtaTerm {
  int a, b;
  double coef;
};

inline const std::vector<EtaTerm>& event_terms() {
  static const std::vector<EtaTerm> t{{0, -1, 0.5}, {1, -1, -0.3}, {0, 1, 0.1}, {2, 3, -0.1}, {0, 4, 0.1}};
  return t;
}

template <class Row>
double event_linear_predictor(const Row& x) {
  double eta = 0.0;
  for (const auto& t : event_terms()) eta += t.coef * x(t.a) * (t.b < 0 ? 1.0 : x(t.b));
  return eta;
}

template <class Row>
double censor_linear_predictor(const Row& x, double beta0) {
  return beta0 - 0.2 * x(0) + 0.2 * x(1);
}

inline Eigen::MatrixXd draw_features(std::size_t n, const Eigen::MatrixXd& sigma, Rng& rng) {
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw ConfigurationError("covariance matrix is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  std::normal_distribution<double> nd;
  const auto p = sigma.rows();
  Eigen::MatrixXd z(static_cast<Eigen::Index>(n), p);
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < p; ++j) z(i, j) = nd(rng);
  return z * L.transpose();
}

inline Dataset generate_scenario(const ScenarioSpec& spec) {
  if (spec.n < 1) throw ConfigurationError("scenario sample size must be positive");
  if (spec.scenario == 4) {
    const auto& lv = scenario4_censor_levels();
    if (std::none_of(lv.begin(), lv.end(), [&](double b) { return std::abs(b - spec.censor_beta0) < 1e-12; }))
      throw ConfigurationError("scenario 4 censor_beta0 must be one of 0.85, 0.5, 0, -0.45, -0.85");
  }
  Rng rng = make_rng(spec.seed, 0x5CE, static_cast<std::uint64_t>(spec.scenario));
  const Eigen::MatrixXd x = draw_features(spec.n, scenario_covariance(spec.scenario), rng);
  std::normal_distribution<double> nd;
  std::vector<double> y(spec.n);
  std::vector<int> d(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const auto row = x.row(static_cast<Eigen::Index>(i));
    const double lt = event_linear_predictor(row) + nd(rng);
    const double lc = censor_linear_predictor(row, spec.censor_beta0) + nd(rng);
    y[i] = std::exp(std::min(lt, lc));
    d[i] = lt <= lc ? 1 : 0;
  }
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < x.cols(); ++j) names.push_back("x" + std::to_string(j + 1));
  return Dataset(x, std::move(y), std::move(d), std::move(names));
}

inline double true_conditional_survival(int scenario, const Eigen::Ref<const Eigen::RowVectorXd>& x, double t) {
  if (static_cast<std::size_t>(x.size()) != scenario_dimension(scenario))
    throw ContractError("feature vector length does not match the scenario dimension");
  if (!(t > 0.0)) return 1.0;
  return normal::sf(std::log(t) - event_linear_predictor(x));
}

/// Closed-form event and censoring models for a scenario (used as exact nuisances).
inline ModelPtr true_event_model(int scenario) {
  return std::make_shared<FunctionModel>(
      [scenario](const Eigen::Ref<const Eigen::RowVectorXd>& x, double t) { return true_conditional_survival(scenario, x, t); },
      "true-event");
}

inline ModelPtr true_censor_model(double beta0) {
  return std::make_shared<FunctionModel>(
      [beta0](const Eigen::Ref<const Eigen::RowVectorXd>& x, double t) {
        return t > 0.0 ? normal::sf(std::log(t) - censor_linear_predictor(x, beta0)) : 1.0;
      },
      "true-censoring");
}

// -------------------------------------------------------------- true VIM

/// log T given the features outside s is normal when the event model is linear in X_s
/// conditionally; mean and variance per observation.
class ReducedLogTime {
 public:
  ReducedLogTime(int scenario, std::vector<std::size_t> s) : s_(std::move(s)) {
    const auto p = scenario_dimension(scenario);
    std::sort(s_.begin(), s_.end());
    s_.erase(std::unique(s_.begin(), s_.end()), s_.end());
    if (s_.empty()) throw UnsupportedSetError("feature set must be non-empty");
    for (auto j : s_)
      if (j >= p) throw UnsupportedSetError("feature x" + std::to_string(j + 1) + " does not exist in this scenario");
    for (const auto& t : event_terms())
      if (t.b >= 0 && in_s(t.a) && in_s(t.b))
        throw UnsupportedSetError("set contains both members of interaction x" + std::to_string(t.a + 1) + ":x" +
                                  std::to_string(t.b + 1) + "; no closed-form reduction");
    for (std::size_t j = 0; j < p; ++j)
      if (!in_s(j)) rest_.push_back(j);
    const Eigen::MatrixXd S = scenario_covariance(scenario);
    const auto ks = static_cast<Eigen::Index>(s_.size()), kr = static_cast<Eigen::Index>(rest_.size());
    Eigen::MatrixXd Sss(ks, ks), Ssr(ks, kr), Srr(kr, kr);
    for (Eigen::Index a = 0; a < ks; ++a) {
      for (Eigen::Index b = 0; b < ks; ++b) Sss(a, b) = S(s_[a], s_[b]);
      for (Eigen::Index b = 0; b < kr; ++b) Ssr(a, b) = S(s_[a], rest_[b]);
    }
    for (Eigen::Index a = 0; a < kr; ++a)
      for (Eigen::Index b = 0; b < kr; ++b) Srr(a, b) = S(rest_[a], rest_[b]);
    B_ = kr > 0 ? Eigen::MatrixXd(Srr.ldlt().solve(Ssr.transpose()).transpose()) : Eigen::MatrixXd::Zero(ks, 0);
    C_ = Sss - B_ * Ssr.transpose();
  }

  /// (mean, variance) of log T given x outside s; entries of x in s are ignored.
  template <class Row>
  std::pair<double, double> moments(const Row& x) const {
    const auto ks = static_cast<Eigen::Index>(s_.size());
    Eigen::VectorXd xr(static_cast<Eigen::Index>(rest_.size()));
    for (std::size_t b = 0; b < rest_.size(); ++b) xr(static_cast<Eigen::Index>(b)) = x(rest_[b]);
    const Eigen::VectorXd mu = B_ * xr;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(ks);
    double a = 0.0;
    for (const auto& t : event_terms()) {
      const int sa = pos(t.a);
      if (t.b < 0) {
        if (sa >= 0) c(sa) += t.coef;
        else a += t.coef * x(t.a);
        continue;
      }
      const int sb = pos(t.b);
      if (sa >= 0) c(sa) += t.coef * x(t.b);
      else if (sb >= 0) c(sb) += t.coef * x(t.a);
      else a += t.coef * x(t.a) * x(t.b);
    }
    return {a + c.dot(mu), c.dot(C_ * c) + 1.0};
  }

 private:
  bool in_s(std::size_t j) const { return std::binary_search(s_.begin(), s_.end(), j); }
  int pos(int j) const {
    const auto it = std::lower_bound(s_.begin(), s_.end(), static_cast<std::size_t>(j));
    return it != s_.end() && *it == static_cast<std::size_t>(j) ? static_cast<int>(it - s_.begin()) : -1;
  }
  std::vector<std::size_t> s_, rest_;
  Eigen::MatrixXd B_, C_;
};

namespace detail {

// Lognormal restricted mean E[min(T, tau)] for log T ~ N(mu, v).
inline double lognormal_rmst(double mu, double v, double tau) {
  const double sd = std::sqrt(v), lt = std::log(tau);
  return std::exp(mu + 0.5 * v) * normal::cdf((lt - mu - v) / sd) + tau * normal::sf((lt - mu) / sd);
}

inline double oracle_score(const MeasureSpec& spec, double mu, double v) {
  const double lt = std::log(spec.tau), sd = std::sqrt(v);
  switch (spec.kind) {
    case MeasureKind::Auc: return normal::cdf((lt - mu) / sd);
    case MeasureKind::Brier: return normal::sf((lt - mu) / sd);
    case MeasureKind::SurvivalMse: return lognormal_rmst(mu, v, spec.tau);
    case MeasureKind::Cindex: return -mu;
  }
  return 0.0;
}

// Empirical AUC P(f_case > f_control) over ideal data.
inline double empirical_auc(const std::vector<double>& f, const std::vector<double>& t, double tau, std::size_t lo,
                            std::size_t hi) {
  std::vector<double> ctrl;
  std::vector<double> cases;
  for (std::size_t i = lo; i < hi; ++i) (t[i] <= tau ? cases : ctrl).push_back(f[i]);
  if (cases.empty() || ctrl.empty()) throw DegenerateMeasureError("Monte Carlo sample has no cases or no controls");
  std::sort(ctrl.begin(), ctrl.end());
  double num = 0.0;
  for (double fc : cases) num += static_cast<double>(std::lower_bound(ctrl.begin(), ctrl.end(), fc) - ctrl.begin());
  return num / (static_cast<double>(cases.size()) * static_cast<double>(ctrl.size()));
}

// Empirical truncated C-index P(f_i > f_j | T_i < T_j, T_i <= tau) by a Fenwick sweep.
inline double empirical_cindex(const std::vector<double>& f, const std::vector<double>& t, double tau, std::size_t lo,
                               std::size_t hi) {
  const std::size_t n = hi - lo;
  std::vector<std::size_t> by_t(n), by_f(n);
  std::iota(by_t.begin(), by_t.end(), lo);
  std::iota(by_f.begin(), by_f.end(), lo);
  std::sort(by_t.begin(), by_t.end(), [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });
  std::sort(by_f.begin(), by_f.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
  std::vector<std::size_t> rank(n);  // 1-based dense rank; ties share the smallest
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = by_f[k];
    rank[i - lo] = (k > 0 && f[by_f[k - 1]] == f[i]) ? rank[by_f[k - 1] - lo] : k + 1;
  }
  std::vector<std::uint32_t> tree(n + 1, 0);
  auto add = [&](std::size_t r) {
    for (; r <= n; r += r & (~r + 1)) ++tree[r];
  };
  auto count = [&](std::size_t r) {
    std::uint64_t c = 0;
    for (; r > 0; r -= r & (~r + 1)) c += tree[r];
    return c;
  };
  double num = 0.0, den = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const std::size_t i = by_t[k];
    if (t[i] <= tau) {
      num += static_cast<double>(count(rank[i - lo] - 1));
      den += static_cast<double>(n - 1 - k);
    }
    add(rank[i - lo]);
  }
  if (den <= 0.0) throw DegenerateMeasureError("Monte Carlo sample has no comparable pairs");
  return num / den;
}

inline double empirical_predictiveness(const MeasureSpec& spec, const std::vector<double>& f,
                                       const std::vector<double>& t, std::size_t lo, std::size_t hi) {
  switch (spec.kind) {
    case MeasureKind::Auc: return empirical_auc(f, t, spec.tau, lo, hi);
    case MeasureKind::Cindex: return empirical_cindex(f, t, spec.tau, lo, hi);
    default: {
      double acc = 0.0;
      for (std::size_t i = lo; i < hi; ++i) acc += omega_single(spec, {f[i], t[i]});
      return -acc / static_cast<double>(hi - lo);
    }
  }
}

}  // namespace detail

struct TrueVim {
  double value = 0.0;
  double mc_se = 0.0;
  double v_full = 0.0, v_reduced = 0.0;
};

/// Monte Carlo truth on ideal (uncensored) data using closed-form oracle scores;
/// `s` is 0-based. The MC standard error comes from 20 batch means.
inline TrueVim true_vim_mc(int scenario, const MeasureSpec& spec, const std::vector<std::size_t>& s,
                           std::size_t mc_size, std::uint64_t seed) {
  if (mc_size < 1000) throw ConfigurationError("mc_size must be at least 1000");
  const ReducedLogTime red(scenario, s);
  Rng rng = make_rng(seed, 0x7AE, static_cast<std::uint64_t>(scenario));
  const Eigen::MatrixXd x = draw_features(mc_size, scenario_covariance(scenario), rng);
  std::normal_distribution<double> nd;
  std::vector<double> t(mc_size), f(mc_size), fs(mc_size);
  for (std::size_t i = 0; i < mc_size; ++i) {
    const auto row = x.row(static_cast<Eigen::Index>(i));
    const double eta = event_linear_predictor(row);
    t[i] = std::exp(eta + nd(rng));
    f[i] = detail::oracle_score(spec, eta, 1.0);
    const auto [mu, v] = red.moments(row);
    fs[i] = detail::oracle_score(spec, mu, v);
  }
  TrueVim out;
  out.v_full = detail::empirical_predictiveness(spec, f, t, 0, mc_size);
  out.v_reduced = detail::empirical_predictiveness(spec, fs, t, 0, mc_size);
  out.value = out.v_full - out.v_reduced;
  constexpr std::size_t B = 20;
  std::vector<double> bm;
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t lo = mc_size * b / B, hi = mc_size * (b + 1) / B;
    bm.push_back(detail::empirical_predictiveness(spec, f, t, lo, hi) -
                 detail::empirical_predictiveness(spec, fs, t, lo, hi));
  }
  const double mean = std::accumulate(bm.begin(), bm.end(), 0.0) / B;
  double ss = 0.0;
  for (double v : bm) ss += (v - mean) * (v - mean);
  out.mc_se = std::sqrt(ss / (B - 1) / B);
  return out;
}

inline double true_vim(int scenario, const MeasureSpec& spec, const std::vector<std::size_t>& s, std::size_t mc_size,
                       std::uint64_t seed = 20240601) {
  return true_vim_mc(scenario, spec, s, mc_size, seed).value;
}

// ------------------------------------------------------------------ study

struct StudyCell {
  int scenario = 3;
  double censor_beta0 = 0.0;
  std::size_t n = 1000;
};

struct StudyConfig {
  std::vector<StudyCell> cells;
  int replicates = 0;
  std::uint64_t seed = 1;
  std::string algorithm = "crossfit";
  int reps = 1;  // sample-splitting repetitions aggregated per replicate
  EstimatorConfig estimator;
  std::size_t truth_mc_size = 200000;
  std::optional<double> truth;  // fixed truth overrides the Monte Carlo oracle
  bool true_nuisances = false;  // use closed-form event and censoring models
  unsigned threads = 1;
  std::function<void(const struct ReplicateRow&)> progress;
};

struct ReplicateRow {
  std::size_t cell = 0;
  int scenario = 0;
  double censor_beta0 = 0.0;
  std::size_t n = 0;
  int replicate = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double truth = 0.0, alpha = 0.05;
  double psi = 0.0, se = 0.0, ci_lower = 0.0, ci_upper = 0.0, p_one_sided = 1.0, v_full = 0.0, v_reduced = 0.0;
};

struct SummaryRow {
  std::size_t cell = 0;
  int scenario = 0;
  double censor_beta0 = 0.0;
  std::size_t n = 0;
  int replicates = 0, failures = 0;
  double truth = 0.0, mean_psi = 0.0;
  double scaled_bias = 0.0, scaled_bias_se = 0.0;
  double scaled_var = 0.0, scaled_var_se = 0.0;
  double coverage = 0.0, coverage_se = 0.0;
  double width = 0.0, width_se = 0.0;
  double rejection = 0.0, rejection_se = 0.0;
};

struct StudyResult {
  std::vector<ReplicateRow> rows;
  std::vector<SummaryRow> summary;
};

/// Pure reduction of the replicate table, in row order.
inline std::vector<SummaryRow> summarize(const std::vector<ReplicateRow>& rows) {
  std::vector<SummaryRow> out;
  std::vector<std::size_t> cells;
  for (const auto& r : rows)
    if (std::find(cells.begin(), cells.end(), r.cell) == cells.end()) cells.push_back(r.cell);
  for (std::size_t c : cells) {
    SummaryRow s;
    std::vector<const ReplicateRow*> ok;
    for (const auto& r : rows) {
      if (r.cell != c) continue;
      s.cell = c;
      s.scenario = r.scenario;
      s.censor_beta0 = r.censor_beta0;
      s.n = r.n;
      s.truth = r.truth;
      ++s.replicates;
      if (r.ok) ok.push_back(&r);
      else ++s.failures;
    }
    const double R = static_cast<double>(ok.size());
    if (ok.empty()) {
      out.push_back(s);
      continue;
    }
    const double rn = std::sqrt(static_cast<double>(s.n));
    double mpsi = 0.0, cov = 0.0, wid = 0.0, rej = 0.0;
    for (const auto* r : ok) {
      mpsi += r->psi;
      cov += (r->ci_lower <= r->truth && r->truth <= r->ci_upper) ? 1.0 : 0.0;
      wid += r->ci_upper - r->ci_lower;
      rej += r->p_one_sided < r->alpha ? 1.0 : 0.0;
    }
    mpsi /= R;
    cov /= R;
    wid /= R;
    rej /= R;
    double var = 0.0, wvar = 0.0;
    for (const auto* r : ok) {
      var += (r->psi - mpsi) * (r->psi - mpsi);
      const double w = r->ci_upper - r->ci_lower - wid;
      wvar += w * w;
    }
    const double denom = R > 1.0 ? R - 1.0 : 1.0;
    var /= denom;
    wvar /= denom;
    s.mean_psi = mpsi;
    s.scaled_bias = rn * (mpsi - s.truth);
    s.scaled_bias_se = rn * std::sqrt(var / R);
    s.scaled_var = static_cast<double>(s.n) * var;
    s.scaled_var_se = s.scaled_var * std::sqrt(2.0 / denom);
    s.coverage = cov;
    s.coverage_se = std::sqrt(cov * (1.0 - cov) / R);
    s.width = wid;
    s.width_se = std::sqrt(wvar / R);
    s.rejection = rej;
    s.rejection_se = std::sqrt(rej * (1.0 - rej) / R);
    out.push_back(s);
  }
  return out;
}

inline ReplicateRow run_replicate(const StudyConfig& cfg, std::size_t cell_index, int replicate, double truth) {
  const auto& cell = cfg.cells[cell_index];
  ReplicateRow row;
  row.cell = cell_index;
  row.scenario = cell.scenario;
  row.censor_beta0 = cell.censor_beta0;
  row.n = cell.n;
  row.replicate = replicate;
  row.seed = derive_seed(cfg.seed, cell_index + 1, static_cast<std::uint64_t>(replicate));
  row.truth = truth;
  row.alpha = cfg.estimator.alpha;
  try {
    const Dataset data = generate_scenario({cell.scenario, cell.n, row.seed, cell.censor_beta0});
    EstimatorConfig est = cfg.estimator;
    est.threads = 1;
    if (cfg.true_nuisances) {
      est.event_override = true_event_model(cell.scenario);
      est.censor_override = true_censor_model(cell.censor_beta0);
    }
    const std::uint64_t es = derive_seed(row.seed, 0xE5);
    if (cfg.algorithm == "samplesplit" && cfg.reps > 1) {
      const auto agg = repeat_and_aggregate(data, est, cfg.reps, es);
      row.psi = agg.psi;
      row.se = agg.se;
      row.ci_lower = agg.ci_lower;
      row.ci_upper = agg.ci_upper;
      row.p_one_sided = agg.p_aggregated;
      row.v_full = agg.v_full;
      row.v_reduced = agg.v_reduced;
    } else {
      const auto e = run_estimator(data, est, cfg.algorithm, es);
      row.psi = e.psi;
      row.se = e.se;
      row.ci_lower = e.ci_lower;
      row.ci_upper = e.ci_upper;
      row.p_one_sided = e.p_one_sided;
      row.v_full = e.v_full;
      row.v_reduced = e.v_reduced;
    }
    row.ok = true;
  } catch (const Error& ex) {
    row.ok = false;
    row.error = ex.what();
  }
  return row;
}

inline StudyResult run_study(const StudyConfig& cfg) {
  if (cfg.replicates < 1) throw ConfigurationError("study needs at least one replicate");
  if (cfg.cells.empty()) throw ConfigurationError("study needs at least one scenario cell");
  if (cfg.algorithm != "crossfit" && cfg.algorithm != "samplesplit")
    throw ConfigurationError("unknown algorithm '" + cfg.algorithm + "'");
  if (cfg.reps > 1 && cfg.algorithm != "samplesplit")
    throw ConfigurationError("repetition aggregation applies to samplesplit only");
  std::vector<double> truths;
  for (std::size_t c = 0; c < cfg.cells.size(); ++c)
    truths.push_back(cfg.truth ? *cfg.truth
                               : true_vim(cfg.cells[c].scenario, cfg.estimator.measure, cfg.estimator.s,
                                          cfg.truth_mc_size, derive_seed(cfg.seed, 0x7E, c)));
  const std::size_t R = static_cast<std::size_t>(cfg.replicates);
  StudyResult res;
  res.rows.resize(cfg.cells.size() * R);
  std::mutex mu;
  parallel_for(res.rows.size(), cfg.threads, [&](std::size_t k) {
    const std::size_t c = k / R;
    res.rows[k] = run_replicate(cfg, c, static_cast<int>(k % R), truths[c]);
    if (cfg.progress) {
      std::lock_guard<std::mutex> lock(mu);
      cfg.progress(res.rows[k]);
    }
  });
  res.summary = summarize(res.rows);
  for (const auto& s : res.summary)
    if (static_cast<double>(s.failures) > 0.2 * static_cast<double>(s.replicates))
      throw StudyError("cell " + std::to_string(s.cell) + " failed in " + std::to_string(s.failures) + " of " +
                       std::to_string(s.replicates) + " replicates; first error: " + [&] {
                         for (const auto& r : res.rows)
                           if (r.cell == s.cell && !r.ok) return r.error;
                         return std::string();
                       }());
  return res;
}

// --------------------------------------------------------------- CSV I/O

namespace detail {

inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_clean(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

}  // namespace detail

inline const char* replicate_header() {
  return "cell,scenario,censor_beta0,n,replicate,seed,ok,truth,alpha,psi,se,ci_lower,ci_upper,p_one_sided,v_full,"
         "v_reduced,error";
}

inline void write_replicates(std::ostream& os, const std::vector<ReplicateRow>& rows) {
  using detail::fmt17;
  os << replicate_header() << "\n";
  for (const auto& r : rows)
    os << r.cell << "," << r.scenario << "," << fmt17(r.censor_beta0) << "," << r.n << "," << r.replicate << ","
       << r.seed << "," << (r.ok ? 1 : 0) << "," << fmt17(r.truth) << "," << fmt17(r.alpha) << "," << fmt17(r.psi)
       << "," << fmt17(r.se) << "," << fmt17(r.ci_lower) << "," << fmt17(r.ci_upper) << "," << fmt17(r.p_one_sided)
       << "," << fmt17(r.v_full) << "," << fmt17(r.v_reduced) << "," << detail::csv_clean(r.error) << "\n";
}

inline std::vector<ReplicateRow> read_replicates(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || detail::trim(line) != replicate_header())
    throw SchemaError("replicate table header does not match the expected columns");
  std::vector<ReplicateRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() < 16) throw DataValidationError(lineno - 1, "replicate row has too few columns");
    ReplicateRow r;
    try {
      r.cell = std::stoull(f[0]);
      r.scenario = std::stoi(f[1]);
      r.censor_beta0 = std::stod(f[2]);
      r.n = std::stoull(f[3]);
      r.replicate = std::stoi(f[4]);
      r.seed = std::stoull(f[5]);
      r.ok = f[6] == "1";
      r.truth = std::stod(f[7]);
      r.alpha = std::stod(f[8]);
      r.psi = std::stod(f[9]);
      r.se = std::stod(f[10]);
      r.ci_lower = std::stod(f[11]);
      r.ci_upper = std::stod(f[12]);
      r.p_one_sided = std::stod(f[13]);
      r.v_full = std::stod(f[14]);
      r.v_reduced = std::stod(f[15]);
    } catch (const std::exception&) {
      throw DataValidationError(lineno - 1, "unparseable value in replicate row");
    }
    if (f.size() > 16) r.error = f[16];
    rows.push_back(r);
  }
  return rows;
}

inline void write_summary(std::ostream& os, const std::vector<SummaryRow>& rows) {
  using detail::fmt17;
  os << "cell,scenario,censor_beta0,n,replicates,failures,truth,mean_psi,scaled_bias,scaled_bias_se,scaled_var,"
        "scaled_var_se,coverage,coverage_se,width,width_se,rejection,rejection_se\n";
  for (const auto& s : rows)
    os << s.cell << "," << s.scenario << "," << fmt17(s.censor_beta0) << "," << s.n << "," << s.replicates << ","
       << s.failures << "," << fmt17(s.truth) << "," << fmt17(s.mean_psi) << "," << fmt17(s.scaled_bias) << ","
       << fmt17(s.scaled_bias_se) << "," << fmt17(s.scaled_var) << "," << fmt17(s.scaled_var_se) << ","
       << fmt17(s.coverage) << "," << fmt17(s.coverage_se) << "," << fmt17(s.width) << "," << fmt17(s.width_se) << ","
       << fmt17(s.rejection) << "," << fmt17(s.rejection_se) << "\n";
}

}  // namespace survim
