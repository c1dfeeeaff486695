#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "basis.hpp"
#include "core_data.hpp"
#include "errors.hpp"
#include "nuisance.hpp"

namespace survim {

enum class MeasureKind { Auc, Brier, SurvivalMse, Cindex };

struct MeasureSpec {
  MeasureKind kind = MeasureKind::Auc;
  double tau = 1.0;

  int m() const { return kind == MeasureKind::Auc || kind == MeasureKind::Cindex ? 2 : 1; }
  bool larger_is_better() const { return m() == 2; }
  /// Squared-error kernels are stored positively and negated when reported.
  double orientation() const { return larger_is_better() ? 1.0 : -1.0; }

  std::string name() const {
    switch (kind) {
      case MeasureKind::Auc: return "auc";
      case MeasureKind::Brier: return "brier";
      case MeasureKind::SurvivalMse: return "survival-mse";
      case MeasureKind::Cindex: return "cindex";
    }
    return "";
  }

  static MeasureSpec parse(const std::string& kind, double tau) {
    if (!(tau > 0.0)) throw ConfigurationError("measure tau must be positive");
    if (kind == "auc") return {MeasureKind::Auc, tau};
    if (kind == "brier") return {MeasureKind::Brier, tau};
    if (kind == "survival-mse") return {MeasureKind::SurvivalMse, tau};
    if (kind == "cindex") return {MeasureKind::Cindex, tau};
    throw ConfigurationError("unknown measure '" + kind + "' (expected auc, brier, survival-mse or cindex)");
  }
};

struct ScoreTime {
  double f;
  double t;
};

/// Unsymmetrized degree-2 kernel with the first argument as the "earlier/case" slot.
inline double omega_directed(const MeasureSpec& spec, ScoreTime a, ScoreTime b) {
  if (!(a.f > b.f) || !(a.t <= spec.tau)) return 0.0;
  if (spec.kind == MeasureKind::Auc) return b.t > spec.tau ? 1.0 : 0.0;
  return b.t > a.t ? 1.0 : 0.0;
}

inline double theta_directed(const MeasureSpec& spec, double ta, double tb) {
  if (!(ta <= spec.tau)) return 0.0;
  if (spec.kind == MeasureKind::Auc) return tb > spec.tau ? 1.0 : 0.0;
  return tb > ta ? 1.0 : 0.0;
}

inline double omega_single(const MeasureSpec& spec, ScoreTime a) {
  if (spec.kind == MeasureKind::Brier) {
    const double r = a.f - (a.t > spec.tau ? 1.0 : 0.0);
    return r * r;
  }
  const double r = a.f - std::min(a.t, spec.tau);
  return r * r;
}

inline double kernel_omega(const MeasureSpec& spec, std::span<const ScoreTime> pts) {
  if (pts.size() != static_cast<std::size_t>(spec.m()))
    throw ContractError(spec.name() + " kernel expects " + std::to_string(spec.m()) + " arguments, got " +
                        std::to_string(pts.size()));
  if (spec.m() == 1) return omega_single(spec, pts[0]);
  return 0.5 * (omega_directed(spec, pts[0], pts[1]) + omega_directed(spec, pts[1], pts[0]));
}

inline double kernel_theta(const MeasureSpec& spec, std::span<const double> times) {
  if (times.size() != static_cast<std::size_t>(spec.m()))
    throw ContractError(spec.name() + " kernel expects " + std::to_string(spec.m()) + " arguments, got " +
                        std::to_string(times.size()));
  if (spec.m() == 1) return 1.0;
  return 0.5 * (theta_directed(spec, times[0], times[1]) + theta_directed(spec, times[1], times[0]));
}

inline double kernel_omega2(const MeasureSpec& spec, ScoreTime a, ScoreTime b) {
  const ScoreTime p[2] = {a, b};
  return kernel_omega(spec, p);
}
inline double kernel_theta2(const MeasureSpec& spec, double a, double b) {
  const double t[2] = {a, b};
  return kernel_theta(spec, t);
}

// ------------------------------------------------------------ predictions

struct PredictionFunction {
  Eigen::VectorXd scores;
  std::string descriptor;
};

/// Closed-form oracle from conditional curves. The C-index has no closed form and is
/// produced by boosting instead.
inline PredictionFunction oracle_prediction(const MeasureSpec& spec, const SurvivalCurveSet& curves) {
  const std::size_t n = curves.n();
  const std::size_t ti = curves.grid.tau_index();
  PredictionFunction out;
  out.scores.resize(static_cast<Eigen::Index>(n));
  switch (spec.kind) {
    case MeasureKind::Auc:
      for (std::size_t i = 0; i < n; ++i) out.scores(static_cast<Eigen::Index>(i)) = curves.F(i, ti);
      out.descriptor = "cdf-at-tau";
      break;
    case MeasureKind::Brier:
      for (std::size_t i = 0; i < n; ++i) out.scores(static_cast<Eigen::Index>(i)) = 1.0 - curves.F(i, ti);
      out.descriptor = "cdf-at-tau";
      break;
    case MeasureKind::SurvivalMse: {
      const auto& pts = curves.grid.points;
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0, prev = 0.0;
        for (std::size_t j = 0; j < pts.size() && pts[j] <= spec.tau; ++j) {
          acc += curves.S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * (pts[j] - prev);
          prev = pts[j];
        }
        out.scores(static_cast<Eigen::Index>(i)) = acc;
      }
      out.descriptor = "rmst";
      break;
    }
    case MeasureKind::Cindex:
      throw ConfigurationError("the C-index oracle has no closed form; use boost_cindex");
  }
  return out;
}

/// Doubly-robust pseudo-outcome for one subject, evaluated term by term on the grid.
/// Its conditional mean is the survival probability at tau.
inline double pseudo_outcome(double y, int delta, const Eigen::Ref<const Eigen::RowVectorXd>& S,
                             const Eigen::Ref<const Eigen::RowVectorXd>& G, const TimeGrid& grid, double tau) {
  auto step = [&](const Eigen::Ref<const Eigen::RowVectorXd>& row, double t) {
    const std::size_t c = grid.count_le(t);
    return c == 0 ? 1.0 : row(static_cast<Eigen::Index>(c - 1));
  };
  auto m = [&](double t) {
    const double st = step(S, t);
    if (!(st > 0.0)) throw SingularityError("pseudo-outcome: S(t|x) = 0 at t = " + std::to_string(t));
    return step(S, std::max(t, tau)) / st;
  };
  const double q1 = static_cast<double>(delta) + (y >= tau ? 1.0 : 0.0);
  const double q2 = std::min(y, tau);
  const double gq = step(G, q2);
  if (!(gq > 0.0)) throw SingularityError("pseudo-outcome: G(q2|x) = 0");
  double p = q1 * (y >= tau ? 1.0 : 0.0) / gq;
  if (q1 != 1.0) p += (1.0 - q1) * m(q2) / gq;
  double prev = 1.0;
  for (std::size_t l = 0; l < grid.size() && grid.points[l] <= q2; ++l) {
    const double g = G(static_cast<Eigen::Index>(l));
    const double dl = (prev - g) / prev;
    if (dl != 0.0) p -= m(grid.points[l]) * dl / g;
    prev = g;
  }
  return p;
}

inline Eigen::VectorXd pseudo_outcomes(const Dataset& data, const SurvivalCurveSet& curves, double tau) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(data.n()));
  for (std::size_t i = 0; i < data.n(); ++i)
    out(static_cast<Eigen::Index>(i)) = pseudo_outcome(data.y(i), data.delta(i), curves.S.row(static_cast<Eigen::Index>(i)),
                                                       curves.G.row(static_cast<Eigen::Index>(i)), curves.grid, tau);
  return out;
}

// ----------------------------------------------------- regression learners

struct RegressionLearnerSpec {
  enum class Family { LeastSquaresBasis, Knn };
  Family family = Family::LeastSquaresBasis;
  std::string basis = "quadratic";
  std::size_t k = 10;
  bool clamp01 = false;
};

/// Fitted regression over full-width feature rows; excluded columns are ignored.
class RegressionFit {
 public:
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd out;
    if (spec_.family == RegressionLearnerSpec::Family::LeastSquaresBasis) {
      out = basis_.design(x) * coef_;
    } else {
      out.resize(x.rows());
      std::vector<std::pair<double, std::size_t>> d(static_cast<std::size_t>(train_x_.rows()));
      const std::size_t k = std::min<std::size_t>(spec_.k, d.size());
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index i = 0; i < train_x_.rows(); ++i) {
          double s = 0.0;
          for (std::size_t c : cols_) {
            const double diff = x(r, static_cast<Eigen::Index>(c)) - train_x_(i, static_cast<Eigen::Index>(c));
            s += diff * diff;
          }
          d[static_cast<std::size_t>(i)] = {s, static_cast<std::size_t>(i)};
        }
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
        double acc = 0.0;
        for (std::size_t u = 0; u < k; ++u) acc += train_y_(static_cast<Eigen::Index>(d[u].second));
        out(r) = acc / static_cast<double>(k);
      }
    }
    if (spec_.clamp01) out = out.cwiseMax(0.0).cwiseMin(1.0);
    return out;
  }

  const Eigen::VectorXd& coefficients() const { return coef_; }
  bool used_ridge() const { return ridge_; }

 private:
  friend RegressionFit fit_regression(const Eigen::MatrixXd&, const Eigen::VectorXd&, const RegressionLearnerSpec&,
                                      const std::vector<std::size_t>&);
  RegressionLearnerSpec spec_;
  Basis basis_;
  Eigen::VectorXd coef_;
  Eigen::MatrixXd train_x_;
  Eigen::VectorXd train_y_;
  std::vector<std::size_t> cols_;
  bool ridge_ = false;
};

/// Least squares on a basis (normal equations, 1e-8 ridge when rank deficient) or
/// k-nearest-neighbour averaging. `excluded` lists 0-based columns the learner may not use.
inline RegressionFit fit_regression(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                    const RegressionLearnerSpec& spec, const std::vector<std::size_t>& excluded = {}) {
  if (x.rows() == 0) throw ContractError("regression needs at least one row");
  if (x.rows() != y.size()) throw ContractError("regression inputs and targets differ in length");
  RegressionFit fit;
  fit.spec_ = spec;
  for (std::size_t c = 0; c < static_cast<std::size_t>(x.cols()); ++c)
    if (std::find(excluded.begin(), excluded.end(), c) == excluded.end()) fit.cols_.push_back(c);
  if (spec.family == RegressionLearnerSpec::Family::LeastSquaresBasis) {
    fit.basis_ = Basis::parse(spec.basis, static_cast<std::size_t>(x.cols()), excluded);
    const Eigen::MatrixXd D = fit.basis_.design(x);
    Eigen::MatrixXd A = D.transpose() * D;
    const Eigen::VectorXd b = D.transpose() * y;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
    qr.setThreshold(1e-10);
    if (qr.rank() < D.cols()) {
      A.diagonal().array() += 1e-8;
      fit.ridge_ = true;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    fit.coef_ = ldlt.solve(b);
    if (!fit.coef_.allFinite()) throw SingularityError("least-squares normal equations could not be solved");
  } else {
    if (spec.k < 1 || spec.k > static_cast<std::size_t>(x.rows()))
      throw ConfigurationError("knn k must lie in [1, n]");
    fit.train_x_ = x;
    fit.train_y_ = y;
  }
  return fit;
}

/// Residual oracle: regress full-model scores on the features outside s (0-based).
inline RegressionFit fit_residual(const Eigen::MatrixXd& x, const Eigen::VectorXd& full_scores,
                                  const std::vector<std::size_t>& s, const RegressionLearnerSpec& learner) {
  if (s.empty()) throw ContractError("feature set s must be non-empty");
  std::vector<std::size_t> uniq(s);
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (uniq.size() >= static_cast<std::size_t>(x.cols()))
    throw ContractError("feature set s covers every feature; no residual features remain");
  for (std::size_t c : uniq)
    if (c >= static_cast<std::size_t>(x.cols())) throw ContractError("feature index out of range in s");
  return fit_regression(x, full_scores, learner, uniq);
}

inline PredictionFunction residual_oracle(const PredictionFunction& full, const Dataset& data,
                                          const std::vector<std::size_t>& s, const RegressionLearnerSpec& learner) {
  const auto fit = fit_residual(data.x(), full.scores, s, learner);
  return {fit.predict(data.x()), "reduced"};
}

// ------------------------------------------------------- plug-in V oracle

struct VPair {
  double v1 = 0.0;
  double v2 = 0.0;
  double ratio() const { return v1 / v2; }
};

/// Atom masses of a CDF-like matrix C (n x J): columns are increments on the grid and the
/// final column holds the remaining mass 1 - C_J, placed at +infinity.
inline Eigen::MatrixXd masses_from_cdf(const Eigen::MatrixXd& C) {
  const Eigen::Index n = C.rows(), J = C.cols();
  Eigen::MatrixXd M(n, J + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    double prev = 0.0;
    for (Eigen::Index j = 0; j < J; ++j) {
      M(i, j) = C(i, j) - prev;
      prev = C(i, j);
    }
    M(i, J) = 1.0 - prev;
  }
  return M;
}

inline std::vector<double> atom_times(const TimeGrid& grid) {
  std::vector<double> t = grid.points;
  t.push_back(std::numeric_limits<double>::infinity());
  return t;
}

/// Explicit nested-loop V-statistics over subjects and atoms, O((nJ)^m).
inline VPair v_statistic_bruteforce(const Eigen::VectorXd& f, const Eigen::MatrixXd& masses,
                                    const std::vector<double>& times, const MeasureSpec& spec) {
  const Eigen::Index n = masses.rows(), A = masses.cols();
  VPair out;
  if (spec.m() == 1) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < A; ++j) {
        const ScoreTime p[1] = {{f(i), times[static_cast<std::size_t>(j)]}};
        const double t[1] = {times[static_cast<std::size_t>(j)]};
        out.v1 += kernel_omega(spec, p) * masses(i, j);
        out.v2 += kernel_theta(spec, t) * masses(i, j);
      }
    out.v1 /= static_cast<double>(n);
    out.v2 /= static_cast<double>(n);
    return out;
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k)
      for (Eigen::Index j = 0; j < A; ++j)
        for (Eigen::Index l = 0; l < A; ++l) {
          const double w = masses(i, j) * masses(k, l);
          const double tj = times[static_cast<std::size_t>(j)], tl = times[static_cast<std::size_t>(l)];
          out.v1 += kernel_omega2(spec, {f(i), tj}, {f(k), tl}) * w;
          out.v2 += kernel_theta2(spec, tj, tl) * w;
        }
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  out.v1 /= nn;
  out.v2 /= nn;
  return out;
}

/// Plug-in (V1, V2) using the masses of the conditional event CDFs.
inline VPair v_statistic_plugin(const PredictionFunction& f, const SurvivalCurveSet& curves, const MeasureSpec& spec) {
  return v_statistic_bruteforce(f.scores, masses_from_cdf(curves.event_cdf()), atom_times(curves.grid), spec);
}

}  // namespace survim
