#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "core_data.hpp"
#include "errors.hpp"
#include "measures.hpp"
#include "nuisance.hpp"

namespace survim {

namespace detail {

// Left limit G(t-) of the grid step function: value at the last grid point strictly below t.
inline double left_limit(const Eigen::Ref<const Eigen::RowVectorXd>& row, const TimeGrid& grid, double t) {
  const auto c = std::lower_bound(grid.points.begin(), grid.points.end(), t) - grid.points.begin();
  return c == 0 ? 1.0 : row(static_cast<Eigen::Index>(c - 1));
}

}  // namespace detail

/// chi(z, t_j) for every subject and grid point:
///   -S(t|x) [ delta 1{y<=t} / (S(y|x) G(y-|x)) - sum_{t_l <= t ^ y} dL(t_l|x) / (S(t_l|x) G(t_l-|x)) ].
/// Censoring survival enters through left limits, so the conditional mean of chi is exactly
/// zero when event and censoring times live on the grid.
inline Eigen::MatrixXd chi_matrix(const std::vector<double>& y, const std::vector<int>& delta,
                                  const SurvivalCurveSet& curves, double floor = 1e-12) {
  const std::size_t n = curves.n(), J = curves.J();
  if (y.size() != n || delta.size() != n) throw ContractError("chi: records and curves differ in length");
  Eigen::MatrixXd chi(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(J));
  const auto& pts = curves.grid.points;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto Srow = curves.S.row(ii);
    const auto Grow = curves.G.row(ii);
    double ev_term = 0.0;
    if (delta[i] == 1 && y[i] <= pts.back()) {
      const double den = curves.surv_at(i, y[i]) * detail::left_limit(Grow, curves.grid, y[i]);
      if (!(den >= floor))
        throw SingularityError("chi: S(y)G(y-) below " + std::to_string(floor) + " for subject " +
                               std::to_string(i + 1) + " at y = " + std::to_string(y[i]));
      ev_term = 1.0 / den;
    }
    double cum = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      if (pts[j] <= y[i]) {
        const double den = Srow(jj) * (j == 0 ? 1.0 : Grow(jj - 1));
        const double dl = curves.dL(ii, jj);
        if (dl != 0.0) {
          if (!(den >= floor))
            throw SingularityError("chi: S(t)G(t-) below " + std::to_string(floor) + " for subject " +
                                   std::to_string(i + 1) + " at grid point " + std::to_string(j + 1));
          cum += dl / den;
        }
      }
      const double first = y[i] <= pts[j] ? ev_term : 0.0;
      chi(ii, jj) = -Srow(jj) * (first - cum);
    }
  }
  return chi;
}

inline double chi(const ObservedRecord& r, const SurvivalCurveSet& curves_one, std::size_t j) {
  return chi_matrix({r.y}, {r.delta}, curves_one)(0, static_cast<Eigen::Index>(j));
}

/// Per-subject pi(z, t_j) = F(t_j|x) - chi(z, t_j) powering the one-step joint distribution.
struct DebiasedJoint {
  Eigen::MatrixXd x;   // fold features
  Eigen::MatrixXd pi;  // n x J
  TimeGrid grid;

  std::size_t n() const { return static_cast<std::size_t>(pi.rows()); }

  /// H*(x0, t0) = mean_i 1{x_i <= x0} pi(z_i, t0) with a right-continuous lookup in t0.
  double evaluate(const Eigen::Ref<const Eigen::RowVectorXd>& x0, double t0) const {
    const std::size_t c = grid.count_le(t0);
    if (c == 0 || pi.rows() == 0) return 0.0;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < pi.rows(); ++i)
      if ((x.row(i).array() <= x0.array()).all()) acc += pi(i, static_cast<Eigen::Index>(c - 1));
    return acc / static_cast<double>(pi.rows());
  }

  Eigen::MatrixXd masses() const { return masses_from_cdf(pi); }
};

inline DebiasedJoint build_debiased_joint(const Dataset& fold, const SurvivalCurveSet& curves) {
  if (fold.n() != curves.n()) throw ContractError("fold and curves differ in length");
  DebiasedJoint j;
  j.x = fold.x();
  j.grid = curves.grid;
  j.pi = curves.event_cdf() - chi_matrix(fold.y(), fold.delta(), curves);
  return j;
}

// ------------------------------------------------------ fast V-statistics

namespace detail {

inline std::vector<std::size_t> order_by_score(const Eigen::VectorXd& f) {
  std::vector<std::size_t> o(static_cast<std::size_t>(f.size()));
  std::iota(o.begin(), o.end(), std::size_t{0});
  std::stable_sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) {
    return f(static_cast<Eigen::Index>(a)) < f(static_cast<Eigen::Index>(b));
  });
  return o;
}

// Calls fn(begin, end) for each run of equal scores in ascending order.
template <class Fn>
void for_each_tie_group(const std::vector<std::size_t>& order, const Eigen::VectorXd& f, Fn fn) {
  std::size_t g = 0;
  while (g < order.size()) {
    std::size_t h = g + 1;
    while (h < order.size() && f(static_cast<Eigen::Index>(order[h])) == f(static_cast<Eigen::Index>(order[g]))) ++h;
    fn(g, h);
    g = h;
  }
}

// Suffix masses R(k, j) = sum_{l > j} M(k, l) for atoms j in [0, A).
inline Eigen::MatrixXd suffix_after(const Eigen::MatrixXd& M) {
  Eigen::MatrixXd R(M.rows(), M.cols());
  for (Eigen::Index k = 0; k < M.rows(); ++k) {
    double acc = 0.0;
    for (Eigen::Index j = M.cols() - 1; j >= 0; --j) {
      R(k, j) = acc;
      acc += M(k, j);
    }
  }
  return R;
}

// Prefix masses E(k, j) = sum_{l < j, t_l <= tau} M(k, l).
inline Eigen::MatrixXd prefix_before(const Eigen::MatrixXd& M, const std::vector<double>& times, double tau) {
  Eigen::MatrixXd E(M.rows(), M.cols());
  for (Eigen::Index k = 0; k < M.rows(); ++k) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      E(k, j) = acc;
      if (times[static_cast<std::size_t>(j)] <= tau) acc += M(k, j);
    }
  }
  return E;
}

inline Eigen::VectorXd early_mask(const std::vector<double>& times, double tau) {
  Eigen::VectorXd m(static_cast<Eigen::Index>(times.size()));
  for (std::size_t j = 0; j < times.size(); ++j) m(static_cast<Eigen::Index>(j)) = times[j] <= tau ? 1.0 : 0.0;
  return m;
}

}  // namespace detail

/// V1, V2 from atom masses in O(nA) after an O(n log n) sort. Agrees with
/// v_statistic_bruteforce; diagonal (i = k) pairs are included.
inline VPair v_statistic_fast(const Eigen::VectorXd& f, const Eigen::MatrixXd& M, const std::vector<double>& times,
                              const MeasureSpec& spec) {
  const Eigen::Index n = M.rows(), A = M.cols();
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  VPair out;
  if (spec.m() == 1) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < A; ++j) acc += omega_single(spec, {f(i), times[static_cast<std::size_t>(j)]}) * M(i, j);
    out.v1 = acc / static_cast<double>(n);
    out.v2 = 1.0;
    return out;
  }
  const Eigen::VectorXd early = detail::early_mask(times, spec.tau);
  const auto order = detail::order_by_score(f);
  if (spec.kind == MeasureKind::Auc) {
    const Eigen::VectorXd Av = M * early;
    const Eigen::VectorXd Bv = M.rowwise().sum() - Av;
    double lowB = 0.0, v1 = 0.0;
    detail::for_each_tie_group(order, f, [&](std::size_t g, std::size_t h) {
      double gA = 0.0, gB = 0.0;
      for (std::size_t u = g; u < h; ++u) {
        gA += Av(static_cast<Eigen::Index>(order[u]));
        gB += Bv(static_cast<Eigen::Index>(order[u]));
      }
      v1 += gA * lowB;
      lowB += gB;
    });
    out.v1 = v1 / nn;
    out.v2 = Av.sum() * Bv.sum() / nn;
    return out;
  }
  // C-index
  const Eigen::MatrixXd R = detail::suffix_after(M);
  Eigen::RowVectorXd racc = Eigen::RowVectorXd::Zero(A);
  double v1 = 0.0;
  detail::for_each_tie_group(order, f, [&](std::size_t g, std::size_t h) {
    for (std::size_t u = g; u < h; ++u) {
      const auto i = static_cast<Eigen::Index>(order[u]);
      v1 += (M.row(i).array() * early.transpose().array() * racc.array()).sum();
    }
    for (std::size_t u = g; u < h; ++u) racc += R.row(static_cast<Eigen::Index>(order[u]));
  });
  out.v1 = v1 / nn;
  const Eigen::RowVectorXd colM = M.colwise().sum();
  const Eigen::RowVectorXd colR = R.colwise().sum();
  out.v2 = (colM.array() * early.transpose().array() * colR.array()).sum() / nn;
  return out;
}

/// (v1*, v2*) = (V1(f, H*), V2(H*)).
inline VPair one_step_predictiveness(const Eigen::VectorXd& f, const DebiasedJoint& joint, const MeasureSpec& spec) {
  if (static_cast<std::size_t>(f.size()) != joint.n()) throw ContractError("scores and joint differ in length");
  return v_statistic_fast(f, joint.masses(), atom_times(joint.grid), spec);
}

// ------------------------------------------------------------------- EIF

struct EifComponents {
  Eigen::VectorXd phi_omega;
  Eigen::VectorXd phi_theta;
  Eigen::VectorXd phi;
};

/// Estimated influence function for one prediction function. `a` are pi masses, `b` the
/// plug-in F masses used for the leave-one-slot-out integrals, (v1c, v2c) the centring values.
inline EifComponents eif_components(const Eigen::VectorXd& f, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                    const std::vector<double>& times, const MeasureSpec& spec, double v1c,
                                    double v2c) {
  if (!(v2c > 0.0))
    throw DegenerateMeasureError("normaliser V2 = " + std::to_string(v2c) + " is not positive at tau = " +
                                 std::to_string(spec.tau) + " (no comparable pairs, or a debiased estimate below zero)");
  const Eigen::Index n = a.rows(), A = a.cols();
  const double dn = static_cast<double>(n);
  EifComponents out;
  out.phi_omega.resize(n);
  out.phi_theta.resize(n);
  if (spec.m() == 1) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < A; ++j) acc += omega_single(spec, {f(i), times[static_cast<std::size_t>(j)]}) * a(i, j);
      out.phi_omega(i) = acc - v1c;
      out.phi_theta(i) = a.row(i).sum() - v2c;
    }
  } else {
    const Eigen::VectorXd early = detail::early_mask(times, spec.tau);
    const auto order = detail::order_by_score(f);
    if (spec.kind == MeasureKind::Auc) {
      const Eigen::VectorXd Aa = a * early, Ba = a.rowwise().sum() - Aa;
      const Eigen::VectorXd Ab = b * early, Bb = b.rowwise().sum() - Ab;
      Eigen::VectorXd L(n), U(n);
      double acc = 0.0;
      detail::for_each_tie_group(order, f, [&](std::size_t g, std::size_t h) {
        for (std::size_t u = g; u < h; ++u) L(static_cast<Eigen::Index>(order[u])) = acc / dn;
        for (std::size_t u = g; u < h; ++u) acc += Bb(static_cast<Eigen::Index>(order[u]));
      });
      const double totA = Ab.sum();
      acc = 0.0;
      detail::for_each_tie_group(order, f, [&](std::size_t g, std::size_t h) {
        double gA = 0.0;
        for (std::size_t u = g; u < h; ++u) gA += Ab(static_cast<Eigen::Index>(order[u]));
        acc += gA;
        for (std::size_t u = g; u < h; ++u) U(static_cast<Eigen::Index>(order[u])) = (totA - acc) / dn;
      });
      const double mBb = Bb.mean(), mAb = Ab.mean();
      for (Eigen::Index i = 0; i < n; ++i) {
        out.phi_omega(i) = Aa(i) * L(i) + Ba(i) * U(i) - 2.0 * v1c;
        out.phi_theta(i) = Aa(i) * mBb + Ba(i) * mAb - 2.0 * v2c;
      }
    } else {
      const Eigen::MatrixXd Rb = detail::suffix_after(b);
      const Eigen::MatrixXd Eb = detail::prefix_before(b, times, spec.tau);
      const Eigen::RowVectorXd ew = early.transpose();
      Eigen::RowVectorXd lower = Eigen::RowVectorXd::Zero(A);
      Eigen::VectorXd low_part(n), up_part(n);
      detail::for_each_tie_group(order, f, [&](std::size_t g, std::size_t h) {
        for (std::size_t u = g; u < h; ++u) {
          const auto i = static_cast<Eigen::Index>(order[u]);
          low_part(i) = (a.row(i).array() * ew.array() * lower.array()).sum();
        }
        for (std::size_t u = g; u < h; ++u) lower += Rb.row(static_cast<Eigen::Index>(order[u]));
      });
      Eigen::RowVectorXd upper = Eigen::RowVectorXd::Zero(A);
      std::vector<std::size_t> rev(order.rbegin(), order.rend());
      detail::for_each_tie_group(rev, f, [&](std::size_t g, std::size_t h) {
        for (std::size_t u = g; u < h; ++u) {
          const auto i = static_cast<Eigen::Index>(rev[u]);
          up_part(i) = (a.row(i).array() * upper.array()).sum();
        }
        for (std::size_t u = g; u < h; ++u) upper += Eb.row(static_cast<Eigen::Index>(rev[u]));
      });
      const Eigen::RowVectorXd totR = Rb.colwise().sum(), totE = Eb.colwise().sum();
      for (Eigen::Index i = 0; i < n; ++i) {
        out.phi_omega(i) = (low_part(i) + up_part(i)) / dn - 2.0 * v1c;
        const double th = ((a.row(i).array() * ew.array() * totR.array()).sum() + (a.row(i).array() * totE.array()).sum()) / dn;
        out.phi_theta(i) = th - 2.0 * v2c;
      }
    }
  }
  const double v = v1c / v2c;
  out.phi = (out.phi_omega - v * out.phi_theta) / v2c;
  return out;
}

struct EifVector {
  EifComponents full;
  EifComponents reduced;
  VPair v_full;     // one-step (v1*, v2*)
  VPair v_reduced;  // (v1s*, v2*)
};

/// Influence functions of the full and reduced predictiveness on one fold, centred at the
/// fold's one-step values.
inline EifVector eif_evaluate(const Eigen::VectorXd& f_full, const Eigen::VectorXd& f_reduced,
                              const DebiasedJoint& joint, const SurvivalCurveSet& curves, const MeasureSpec& spec) {
  const Eigen::MatrixXd a = joint.masses();
  const Eigen::MatrixXd b = masses_from_cdf(curves.event_cdf());
  const auto times = atom_times(joint.grid);
  EifVector out;
  out.v_full = v_statistic_fast(f_full, a, times, spec);
  out.v_reduced = v_statistic_fast(f_reduced, a, times, spec);
  out.full = eif_components(f_full, a, b, times, spec, out.v_full.v1, out.v_full.v2);
  out.reduced = eif_components(f_reduced, a, b, times, spec, out.v_reduced.v1, out.v_reduced.v2);
  return out;
}

/// Direct one-step: plug-in ratio plus the mean estimated influence function (plug-in centring).
inline double direct_one_step(const Eigen::VectorXd& f, const DebiasedJoint& joint, const SurvivalCurveSet& curves,
                              const MeasureSpec& spec) {
  const Eigen::MatrixXd a = joint.masses();
  const Eigen::MatrixXd b = masses_from_cdf(curves.event_cdf());
  const auto times = atom_times(joint.grid);
  const VPair plug = v_statistic_fast(f, b, times, spec);
  const auto eif = eif_components(f, a, b, times, spec, plug.v1, plug.v2);
  return plug.ratio() + eif.phi.mean();
}

}  // namespace survim
