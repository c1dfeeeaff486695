#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "core_data.hpp"
#include "errors.hpp"
#include "measures.hpp"
#include "nuisance.hpp"
#include "rng.hpp"

namespace survim {

/// w(i, j) = sum_{a: t_a <= tau} dF_i(a) * sum_{b: t_b > t_a} dF_j(b), masses including the tail atom.
inline Eigen::MatrixXd pair_weights(const SurvivalCurveSet& curves, double tau) {
  const Eigen::MatrixXd M = masses_from_cdf(curves.event_cdf());
  const auto times = atom_times(curves.grid);
  const Eigen::Index A = M.cols();
  Eigen::MatrixXd early = M;
  for (Eigen::Index a = 0; a < A; ++a)
    if (!(times[static_cast<std::size_t>(a)] <= tau)) early.col(a).setZero();
  Eigen::MatrixXd R(M.rows(), A);
  for (Eigen::Index k = 0; k < M.rows(); ++k) {
    double acc = 0.0;
    for (Eigen::Index a = A - 1; a >= 0; --a) {
      R(k, a) = acc;
      acc += M(k, a);
    }
  }
  return early * R.transpose();
}

namespace detail {

// 1 / (1 + exp(x)) without overflow.
inline double logistic_neg(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

}  // namespace detail

/// sum_{i != j} h(f_j - f_i) w(i, j) with h(s) = 1 / (1 + exp(s / zeta)).
inline double smoothed_objective(const Eigen::VectorXd& f, const Eigen::MatrixXd& w, double zeta) {
  if (!(zeta > 0.0)) throw ConfigurationError("zeta must be positive");
  const Eigen::Index n = f.size();
  double obj = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double h = detail::logistic_neg((f(j) - f(i)) / zeta);
      obj += w(i, j) * h + w(j, i) * (1.0 - h);
    }
  return obj;
}

inline Eigen::VectorXd smoothed_gradient(const Eigen::VectorXd& f, const Eigen::MatrixXd& w, double zeta) {
  if (!(zeta > 0.0)) throw ConfigurationError("zeta must be positive");
  const Eigen::Index n = f.size();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double h = detail::logistic_neg((f(j) - f(i)) / zeta);
      const double d = h * (1.0 - h) / zeta;
      const double c = d * (w(i, j) - w(j, i));
      g(i) += c;
      g(j) -= c;
    }
  return g;
}

/// Unsmoothed plug-in concordance sum_{i != j} 1{f_i > f_j} w(i, j) / sum_{i != j} w(i, j).
inline double plugin_cindex(const Eigen::VectorXd& f, const Eigen::MatrixXd& w) {
  double num = 0.0, den = 0.0;
  const Eigen::Index n = f.size();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      den += w(i, j);
      if (f(i) > f(j)) num += w(i, j);
    }
  return den > 0.0 ? num / den : 0.0;
}

struct BoostConfig {
  std::vector<int> mstop_candidates{100, 200, 300, 400, 500};
  std::vector<double> zeta_candidates{0.01, 0.05};
  double learning_rate = 0.1;
  int cv_folds = 5;
  double subsample = 1.0;
  std::uint64_t seed = 1;
};

/// Linear score x -> (x - center) . coef over the masked features.
struct LinearScore {
  Eigen::VectorXd coef;    // length p, zero outside the mask
  Eigen::VectorXd center;  // length p
  std::vector<int> selections;  // feature picked at each iteration
  int mstop = 0;
  double zeta = 0.0;
  bool constant = false;

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - center.transpose()) * coef;
  }
};

namespace detail {

// Component-wise linear boosting of the smoothed C-index. Calls on_iter(m, score) after
// iteration m (m = 0 before any update) so callers can snapshot a path.
template <class OnIter>
LinearScore boost_path(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w, double zeta, int mstop,
                       double lr, double subsample, std::uint64_t seed, const std::vector<std::size_t>& mask,
                       OnIter on_iter) {
  if (mask.empty()) throw ConfigurationError("boosting needs at least one feature");
  if (!(subsample > 0.0 && subsample <= 1.0)) throw ConfigurationError("subsample fraction must lie in (0, 1]");
  const Eigen::Index n = x.rows(), p = x.cols();
  LinearScore s;
  s.coef = Eigen::VectorXd::Zero(p);
  s.center = x.colwise().mean().transpose();
  s.zeta = zeta;
  const Eigen::MatrixXd xc = x.rowwise() - s.center.transpose();
  Eigen::VectorXd sd(p);
  for (Eigen::Index c = 0; c < p; ++c) sd(c) = std::sqrt(xc.col(c).squaredNorm() / static_cast<double>(n));
  double wsum = w.sum() - w.diagonal().sum();
  if (!(wsum > 0.0)) wsum = 1.0;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  on_iter(0, s);
  const auto take = static_cast<Eigen::Index>(std::max<double>(2.0, std::round(subsample * static_cast<double>(n))));
  for (int m = 1; m <= mstop; ++m) {
    std::vector<Eigen::Index> rows;
    if (take >= n) {
      rows.resize(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
    } else {
      Rng rng = make_rng(seed, 0xB005, static_cast<std::uint64_t>(m));
      std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
      std::shuffle(all.begin(), all.end(), rng);
      rows.assign(all.begin(), all.begin() + take);
      std::sort(rows.begin(), rows.end());
    }
    const auto r = static_cast<Eigen::Index>(rows.size());
    Eigen::VectorXd fs(r);
    Eigen::MatrixXd ws(r, r);
    for (Eigen::Index a = 0; a < r; ++a) {
      fs(a) = f(rows[static_cast<std::size_t>(a)]);
      for (Eigen::Index b = 0; b < r; ++b) ws(a, b) = w(rows[static_cast<std::size_t>(a)], rows[static_cast<std::size_t>(b)]);
    }
    const double scale = (take >= n) ? wsum : std::max(1e-300, ws.sum() - ws.diagonal().sum());
    const Eigen::VectorXd u = smoothed_gradient(fs, ws, zeta) / scale;
    double best = -1.0, best_b = 0.0;
    int best_c = -1;
    for (std::size_t c : mask) {
      const auto cc = static_cast<Eigen::Index>(c);
      if (!(sd(cc) > 0.0)) continue;
      double xu = 0.0, xx = 0.0, xm = 0.0;
      for (Eigen::Index a = 0; a < r; ++a) xm += xc(rows[static_cast<std::size_t>(a)], cc);
      xm /= static_cast<double>(r);
      for (Eigen::Index a = 0; a < r; ++a) {
        const double v = xc(rows[static_cast<std::size_t>(a)], cc) - xm;
        xu += v * u(a);
        xx += v * v;
      }
      if (!(xx > 0.0)) continue;
      const double gain = xu * xu / xx;
      if (gain > best) {
        best = gain;
        best_b = xu / xx;
        best_c = static_cast<int>(c);
      }
    }
    if (best_c < 0 || best <= 0.0) {
      // zero gradient: the iterate is final for every remaining m
      for (int rest = m; rest <= mstop; ++rest) on_iter(rest, s);
      break;
    }
    s.coef(best_c) += lr * best_b;
    f += lr * best_b * xc.col(best_c);
    s.selections.push_back(best_c);
    s.mstop = m;
    on_iter(m, s);
  }
  if (s.coef.isZero()) s.constant = true;
  return s;
}

}  // namespace detail

struct BoostParams {
  int mstop = 100;
  double zeta = 0.05;
  double learning_rate = 0.1;
  double subsample = 1.0;
  std::uint64_t seed = 1;
};

/// Gradient boosting of the smoothed C-index with component-wise linear base learners.
/// Gradients are normalised by the total pair weight so step sizes do not grow with n.
inline LinearScore boost_cindex(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w, const BoostParams& params,
                                const std::vector<std::size_t>& mask) {
  return detail::boost_path(x, w, params.zeta, params.mstop, params.learning_rate, params.subsample, params.seed, mask,
                            [](int, const LinearScore&) {});
}

struct CvChoice {
  int mstop = 0;
  double zeta = 0.0;
  double cv_cindex = 0.0;
  std::vector<std::pair<std::pair<int, double>, double>> table;  // ((mstop, zeta), mean cv C-index)
};

/// Five-fold (configurable) cross-validation over (mstop, zeta) by unsmoothed plug-in
/// C-index. Ties go to the smaller mstop, then the smaller zeta.
inline CvChoice cv_select(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w, const BoostConfig& cfg,
                          const std::vector<std::size_t>& mask) {
  if (cfg.mstop_candidates.empty() || cfg.zeta_candidates.empty())
    throw ConfigurationError("boosting candidate sets must be non-empty");
  std::vector<std::pair<int, double>> cands;
  for (int m : cfg.mstop_candidates)
    for (double z : cfg.zeta_candidates) cands.emplace_back(m, z);
  std::sort(cands.begin(), cands.end());
  CvChoice out;
  if (cands.size() == 1) {
    out.mstop = cands[0].first;
    out.zeta = cands[0].second;
    return out;
  }
  const auto n = static_cast<std::size_t>(x.rows());
  if (n < 10 * static_cast<std::size_t>(cfg.cv_folds))
    throw ConfigurationError("cv_select needs n >= 10 * cv_folds");
  const auto folds = make_folds(n, cfg.cv_folds, derive_seed(cfg.seed, 0xC5));
  const int max_m = *std::max_element(cfg.mstop_candidates.begin(), cfg.mstop_candidates.end());
  std::vector<double> score(cands.size(), 0.0);
  for (int k = 1; k <= cfg.cv_folds; ++k) {
    const auto tr = folds.complement(k), va = folds.members(k);
    Eigen::MatrixXd xtr(static_cast<Eigen::Index>(tr.size()), x.cols()), xva(static_cast<Eigen::Index>(va.size()), x.cols());
    Eigen::MatrixXd wtr(static_cast<Eigen::Index>(tr.size()), static_cast<Eigen::Index>(tr.size()));
    Eigen::MatrixXd wva(static_cast<Eigen::Index>(va.size()), static_cast<Eigen::Index>(va.size()));
    for (std::size_t a = 0; a < tr.size(); ++a) {
      xtr.row(static_cast<Eigen::Index>(a)) = x.row(static_cast<Eigen::Index>(tr[a]));
      for (std::size_t b = 0; b < tr.size(); ++b)
        wtr(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = w(static_cast<Eigen::Index>(tr[a]), static_cast<Eigen::Index>(tr[b]));
    }
    for (std::size_t a = 0; a < va.size(); ++a) {
      xva.row(static_cast<Eigen::Index>(a)) = x.row(static_cast<Eigen::Index>(va[a]));
      for (std::size_t b = 0; b < va.size(); ++b)
        wva(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = w(static_cast<Eigen::Index>(va[a]), static_cast<Eigen::Index>(va[b]));
    }
    for (double z : cfg.zeta_candidates) {
      detail::boost_path(xtr, wtr, z, max_m, cfg.learning_rate, cfg.subsample, derive_seed(cfg.seed, 0xCF, static_cast<std::uint64_t>(k)),
                         mask, [&](int m, const LinearScore& s) {
                           for (std::size_t c = 0; c < cands.size(); ++c)
                             if (cands[c].first == m && cands[c].second == z)
                               score[c] += plugin_cindex(s.predict(xva), wva) / cfg.cv_folds;
                         });
    }
  }
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < cands.size(); ++c) {
    out.table.push_back({cands[c], score[c]});
    if (score[c] > best) {
      best = score[c];
      out.mstop = cands[c].first;
      out.zeta = cands[c].second;
    }
  }
  out.cv_cindex = best;
  return out;
}

/// C-index oracle (or residual oracle when mask excludes s): tune by CV, refit on all rows.
inline LinearScore fit_cindex_oracle(const Eigen::MatrixXd& x, const SurvivalCurveSet& curves, double tau,
                                     const BoostConfig& cfg, const std::vector<std::size_t>& mask) {
  const Eigen::MatrixXd w = pair_weights(curves, tau);
  const auto choice = cv_select(x, w, cfg, mask);
  BoostParams bp;
  bp.mstop = choice.mstop;
  bp.zeta = choice.zeta;
  bp.learning_rate = cfg.learning_rate;
  bp.subsample = cfg.subsample;
  bp.seed = derive_seed(cfg.seed, 0xF1);
  return boost_cindex(x, w, bp, mask);
}

}  // namespace survim
