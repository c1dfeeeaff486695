#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "basis.hpp"
#include "core_data.hpp"
#include "errors.hpp"
#include "normal.hpp"

namespace survim {

enum class Target { Event, Censoring };

inline int target_indicator(Target t, int delta) { return t == Target::Event ? delta : 1 - delta; }

/// A fitted conditional survival model P(time > t | x) for the event or the censoring time.
class SurvivalModel {
 public:
  virtual ~SurvivalModel() = default;
  /// Rows are subjects, columns are the requested times.
  virtual Eigen::MatrixXd survival(const Eigen::MatrixXd& x, const std::vector<double>& times) const = 0;
  virtual std::string name() const = 0;
};

using ModelPtr = std::shared_ptr<const SurvivalModel>;

// ---------------------------------------------------------------- marginal KM

class KaplanMeierModel : public SurvivalModel {
 public:
  KaplanMeierModel(std::vector<double> jump_times, std::vector<double> surv)
      : times_(std::move(jump_times)), surv_(std::move(surv)) {}

  double at(double t) const {
    const auto k = std::upper_bound(times_.begin(), times_.end(), t) - times_.begin();
    return k == 0 ? 1.0 : surv_[static_cast<std::size_t>(k - 1)];
  }

  Eigen::MatrixXd survival(const Eigen::MatrixXd& x, const std::vector<double>& times) const override {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(times.size()));
    for (std::size_t j = 0; j < times.size(); ++j) out.col(static_cast<Eigen::Index>(j)).setConstant(at(times[j]));
    return out;
  }
  std::string name() const override { return "marginal-km"; }
  const std::vector<double>& jump_times() const { return times_; }
  const std::vector<double>& values() const { return surv_; }

 private:
  std::vector<double> times_;
  std::vector<double> surv_;
};

/// Product-limit estimator ignoring covariates. For the censoring target the roles of
/// events and censorings are swapped.
inline std::shared_ptr<KaplanMeierModel> fit_marginal_km(const Dataset& data, Target target) {
  std::vector<std::size_t> order(data.n());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return data.y(a) < data.y(b); });
  std::vector<double> times, surv;
  double s = 1.0;
  std::size_t at_risk = data.n();
  std::size_t k = 0;
  bool any = false;
  while (k < order.size()) {
    const double t = data.y(order[k]);
    std::size_t d = 0, m = 0;
    while (k + m < order.size() && data.y(order[k + m]) == t) {
      d += static_cast<std::size_t>(target_indicator(target, data.delta(order[k + m])));
      ++m;
    }
    if (d > 0) {
      any = true;
      s *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
      times.push_back(t);
      surv.push_back(s);
    }
    at_risk -= m;
    k += m;
  }
  if (!any)
    throw FitError(target == Target::Event ? "all observations censored: no events to fit"
                                           : "no censored observations: censoring distribution not estimable");
  return std::make_shared<KaplanMeierModel>(std::move(times), std::move(surv));
}

// ---------------------------------------------------------- log-normal AFT

class LognormalAftModel : public SurvivalModel {
 public:
  LognormalAftModel(Basis basis, Eigen::VectorXd beta, double sigma)
      : basis_(std::move(basis)), beta_(std::move(beta)), sigma_(sigma) {}

  Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& x) const { return basis_.design(x) * beta_; }

  Eigen::MatrixXd survival(const Eigen::MatrixXd& x, const std::vector<double>& times) const override {
    const Eigen::VectorXd lp = linear_predictor(x);
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(times.size()));
    for (std::size_t j = 0; j < times.size(); ++j) {
      const double lt = std::log(times[j]);
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        out(i, static_cast<Eigen::Index>(j)) = normal::sf((lt - lp(i)) / sigma_);
    }
    return out;
  }
  std::string name() const override { return "lognormal-aft"; }

  const Eigen::VectorXd& beta() const { return beta_; }
  double sigma() const { return sigma_; }
  const Basis& basis() const { return basis_; }

  int iterations = 0;
  double gradient_norm = 0.0;
  std::vector<double> loglik_trace;  // mean log-likelihood after each accepted step

 private:
  Basis basis_;
  Eigen::VectorXd beta_;
  double sigma_;
};

namespace detail {

/// Columns left over after a rank-revealing QR are reported as collinear.
inline void check_full_rank(const Eigen::MatrixXd& design, const Basis& basis, const std::vector<std::string>& names,
                            bool with_intercept) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  const auto rank = qr.rank();
  if (rank == design.cols()) return;
  std::string cols;
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index k = rank; k < design.cols(); ++k) {
    const auto c = static_cast<std::size_t>(perm(k));
    std::string nm;
    if (with_intercept) nm = c == 0 ? "(intercept)" : basis.term_name(c - 1, names);
    else nm = basis.term_name(c, names);
    cols += (cols.empty() ? "" : ", ") + nm;
  }
  throw FitError("design matrix is rank deficient (rank " + std::to_string(rank) + " of " +
                 std::to_string(design.cols()) + "); collinear columns: " + cols);
}

struct AftState {
  double ll = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

// Mean log-likelihood of the right-censored log-normal model in (beta, gamma = log sigma),
// dropping constants. Gradient and Hessian only when requested.
inline AftState aft_eval(const Eigen::MatrixXd& D, const Eigen::VectorXd& ly, const std::vector<int>& ev,
                         const Eigen::VectorXd& theta, bool derivs) {
  const Eigen::Index n = D.rows(), q = D.cols();
  const double gamma = theta(q);
  const double sigma = std::exp(gamma);
  const Eigen::VectorXd lp = D * theta.head(q);
  AftState st;
  Eigen::VectorXd wb(n), wg(n), hbb(n), hbg(n), hgg(n);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = (ly(i) - lp(i)) / sigma;
    if (ev[static_cast<std::size_t>(i)]) {
      ll += -gamma - 0.5 * z * z;
      if (derivs) {
        wb(i) = z / sigma;
        wg(i) = -1.0 + z * z;
        hbb(i) = -1.0 / (sigma * sigma);
        hbg(i) = -2.0 * z / sigma;
        hgg(i) = -2.0 * z * z;
      }
    } else {
      ll += normal::log_sf(z);
      if (derivs) {
        const double lam = normal::mills(z);
        const double g1 = -lam;
        const double g2 = -lam * (lam - z);
        wb(i) = lam / sigma;
        wg(i) = lam * z;
        hbb(i) = g2 / (sigma * sigma);
        hbg(i) = (g2 * z + g1) / sigma;
        hgg(i) = g2 * z * z + g1 * z;
      }
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  st.ll = ll * inv_n;
  if (derivs) {
    st.grad.resize(q + 1);
    st.grad.head(q) = D.transpose() * wb * inv_n;
    st.grad(q) = wg.sum() * inv_n;
    st.hess.resize(q + 1, q + 1);
    st.hess.topLeftCorner(q, q) = D.transpose() * hbb.asDiagonal() * D * inv_n;
    const Eigen::VectorXd cross = D.transpose() * hbg * inv_n;
    st.hess.block(0, q, q, 1) = cross;
    st.hess.block(q, 0, 1, q) = cross.transpose();
    st.hess(q, q) = hgg.sum() * inv_n;
  }
  return st;
}

}  // namespace detail

/// Right-censored log-normal maximum likelihood by safeguarded Newton (step halving,
/// ridge fallback when the Hessian is not negative definite).
inline std::shared_ptr<LognormalAftModel> fit_lognormal_aft(const Dataset& data, Target target, const Basis& basis,
                                                            double tol = 1e-8, int max_iter = 100) {
  const Eigen::MatrixXd D = basis.design(data.x());
  detail::check_full_rank(D, basis, data.feature_names(), true);
  const Eigen::Index n = D.rows(), q = D.cols();
  std::vector<int> ev(data.n());
  std::size_t n_ev = 0;
  for (std::size_t i = 0; i < data.n(); ++i) n_ev += static_cast<std::size_t>(ev[i] = target_indicator(target, data.delta(i)));
  if (n_ev == 0) throw FitError("no observed failures for the requested target");
  Eigen::VectorXd ly(n);
  for (Eigen::Index i = 0; i < n; ++i) ly(i) = std::log(data.y(static_cast<std::size_t>(i)));

  Eigen::VectorXd theta(q + 1);
  theta.head(q) = D.colPivHouseholderQr().solve(ly);
  const double sd = std::sqrt((ly - D * theta.head(q)).squaredNorm() / static_cast<double>(n));
  theta(q) = std::log(std::max(sd, 0.05));

  std::vector<double> trace;
  auto st = detail::aft_eval(D, ly, ev, theta, true);
  trace.push_back(st.ll);
  int it = 0;
  double gnorm = st.grad.cwiseAbs().maxCoeff();
  while (gnorm >= tol) {
    if (it >= max_iter) throw ConvergenceError("log-normal AFT did not converge in " + std::to_string(max_iter) + " iterations", gnorm);
    const Eigen::MatrixXd negH = -st.hess;
    Eigen::LLT<Eigen::MatrixXd> llt(negH);
    double ridge = 0.0;
    const double scale = std::max(1e-12, negH.diagonal().cwiseAbs().maxCoeff());
    while (llt.info() != Eigen::Success) {
      ridge = ridge == 0.0 ? 1e-8 * scale : ridge * 10.0;
      llt.compute(negH + ridge * Eigen::MatrixXd::Identity(q + 1, q + 1));
      if (ridge > 1e8 * scale) throw ConvergenceError("log-normal AFT Hessian cannot be regularised", gnorm);
    }
    const Eigen::VectorXd step = llt.solve(st.grad);
    double t = 1.0;
    Eigen::VectorXd cand;
    detail::AftState cs;
    bool accepted = false;
    for (int h = 0; h < 60; ++h) {
      cand = theta + t * step;
      cs = detail::aft_eval(D, ly, ev, cand, false);
      if (std::isfinite(cs.ll) && cs.ll > st.ll) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    ++it;
    if (!accepted) {
      // no ascent possible at working precision; accept only if already near stationarity
      if (gnorm < 1e-5) break;
      throw ConvergenceError("log-normal AFT line search failed", gnorm);
    }
    theta = cand;
    st = detail::aft_eval(D, ly, ev, theta, true);
    trace.push_back(st.ll);
    gnorm = st.grad.cwiseAbs().maxCoeff();
  }
  auto model = std::make_shared<LognormalAftModel>(basis, theta.head(q), std::exp(theta(q)));
  model->iterations = it;
  model->gradient_norm = gnorm;
  model->loglik_trace = std::move(trace);
  return model;
}

// ------------------------------------------------------ discrete hazard

class DiscreteHazardModel : public SurvivalModel {
 public:
  DiscreteHazardModel(Basis basis, TimeGrid grid, Eigen::VectorXd coef)
      : basis_(std::move(basis)), grid_(std::move(grid)), coef_(std::move(coef)) {}

  /// Survival on the model's own grid.
  Eigen::MatrixXd grid_survival(const Eigen::MatrixXd& x) const {
    const Eigen::MatrixXd B = basis_.design(x);
    const Eigen::Index q = B.cols();
    const std::size_t J = grid_.size();
    Eigen::MatrixXd S(x.rows(), static_cast<Eigen::Index>(J));
    const Eigen::VectorXd base = B * coef_.head(q);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double s = 1.0;
      for (std::size_t j = 0; j < J; ++j) {
        const double eta = base(i) + coef_(q) * interval_covariate(j);
        const double h = 1.0 / (1.0 + std::exp(-eta));
        s *= 1.0 - h;
        S(i, static_cast<Eigen::Index>(j)) = s;
      }
    }
    return S;
  }

  Eigen::MatrixXd survival(const Eigen::MatrixXd& x, const std::vector<double>& times) const override {
    const Eigen::MatrixXd S = grid_survival(x);
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(times.size()));
    for (std::size_t j = 0; j < times.size(); ++j) {
      const std::size_t c = grid_.count_le(times[j]);
      if (c == 0) out.col(static_cast<Eigen::Index>(j)).setOnes();
      else out.col(static_cast<Eigen::Index>(j)) = S.col(static_cast<Eigen::Index>(c - 1));
    }
    return out;
  }
  std::string name() const override { return "discrete-hazard"; }

  double interval_covariate(std::size_t j) const {
    return static_cast<double>(j + 1) / static_cast<double>(grid_.size());
  }
  const Eigen::VectorXd& coef() const { return coef_; }

 private:
  Basis basis_;
  TimeGrid grid_;
  Eigen::VectorXd coef_;  // [intercept, basis terms..., interval slope]
};

/// Pooled person-interval logistic regression on intervals (t_{j-1}, t_j] of the grid.
/// A subject contributes interval j when observed past t_{j-1}; a censoring inside an
/// interval drops that interval.
inline std::shared_ptr<DiscreteHazardModel> fit_discrete_hazard(const Dataset& data, Target target,
                                                                const TimeGrid& grid, const Basis& basis,
                                                                double tol = 1e-8, int max_iter = 100) {
  const std::size_t J = grid.size();
  if (J < 2) throw ConfigurationError("discrete-hazard model needs a grid with at least 2 points");
  const Eigen::MatrixXd B = basis.design(data.x());
  detail::check_full_rank(B, basis, data.feature_names(), true);
  const Eigen::Index q = B.cols();
  std::vector<std::pair<std::size_t, std::size_t>> rows;  // (subject, interval)
  std::vector<double> out, wt;
  std::vector<std::size_t> interval_rows(J, 0), interval_events(J, 0);
  for (std::size_t i = 0; i < data.n(); ++i) {
    const double y = data.y(i);
    const int e = target_indicator(target, data.delta(i));
    double prev = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      if (!(y > prev)) break;
      const double t = grid.points[j];
      double o = 0.0, w = 1.0;
      if (y > t || (e == 0 && y == t)) {
        o = 0.0;
      } else if (e == 1) {
        o = 1.0;
        ++interval_events[j];
      } else {
        w = 0.5;  // censored inside the interval: actuarial half exposure
      }
      rows.emplace_back(i, j);
      out.push_back(o);
      wt.push_back(w);
      ++interval_rows[j];
      prev = t;
    }
  }
  for (std::size_t j = 0; j < J; ++j) {
    if (interval_rows[j] > 0 && interval_events[j] == interval_rows[j])
      throw SeparationError("every subject at risk in interval " + std::to_string(j + 1) +
                            " fails there, so survival reaches 0; use a coarser grid");
    if (interval_rows[j] == 0) throw FitError("risk set of interval " + std::to_string(j + 1) + " is empty");
  }
  const Eigen::Index N = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd X(N, q + 1);
  Eigen::VectorXd yv(N), wv(N);
  for (Eigen::Index r = 0; r < N; ++r) {
    X.row(r).head(q) = B.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].first));
    X(r, q) = static_cast<double>(rows[static_cast<std::size_t>(r)].second + 1) / static_cast<double>(J);
    yv(r) = out[static_cast<std::size_t>(r)];
    wv(r) = wt[static_cast<std::size_t>(r)];
  }
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q + 1);
  const double ybar = std::clamp(yv.mean(), 1e-6, 1.0 - 1e-6);
  beta(0) = std::log(ybar / (1.0 - ybar));

  auto loglik = [&](const Eigen::VectorXd& b, Eigen::VectorXd& eta) {
    eta = X * b;
    double ll = 0.0;
    for (Eigen::Index r = 0; r < N; ++r) {
      const double e = eta(r);
      // log(1 + exp(e)) computed stably
      const double l1pe = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
      ll += wv(r) * (yv(r) * e - l1pe);
    }
    return ll / static_cast<double>(N);
  };
  auto guard = [&](const Eigen::VectorXd& eta) {
    if (eta.cwiseAbs().maxCoeff() > 30.0)
      throw SeparationError("separation detected in discrete-hazard fit (|linear predictor| > 30); "
                            "use a coarser grid");
  };
  Eigen::VectorXd eta;
  double ll = loglik(beta, eta);
  for (int it = 0;; ++it) {
    guard(eta);
    Eigen::VectorXd p(N), w(N);
    for (Eigen::Index r = 0; r < N; ++r) {
      p(r) = 1.0 / (1.0 + std::exp(-eta(r)));
      w(r) = wv(r) * p(r) * (1.0 - p(r));
    }
    const Eigen::VectorXd g = X.transpose() * (wv.array() * (yv - p).array()).matrix() / static_cast<double>(N);
    const double gnorm = g.cwiseAbs().maxCoeff();
    if (gnorm < tol) break;
    if (it >= max_iter) throw ConvergenceError("discrete-hazard fit did not converge", gnorm);
    Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X / static_cast<double>(N);
    H.diagonal().array() += 1e-12;
    const Eigen::VectorXd step = H.ldlt().solve(g);
    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd cand, ceta;
    for (int h = 0; h < 60; ++h) {
      cand = beta + t * step;
      const double cl = loglik(cand, ceta);
      if (std::isfinite(cl) && cl >= ll) {
        beta = cand;
        eta = ceta;
        ll = cl;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (gnorm < 1e-5) break;
      throw ConvergenceError("discrete-hazard line search failed", gnorm);
    }
  }
  guard(eta);
  return std::make_shared<DiscreteHazardModel>(basis, grid, beta);
}

// ---------------------------------------------------- injected / closed form

/// Covariate-free curve that ignores the data: censoring survival falls evenly from 1 to 0.1
/// over the grid, or the event CDF rises evenly from 0 to 0.9.
class InjectedModel : public SurvivalModel {
 public:
  InjectedModel(TimeGrid grid, Target target) : grid_(std::move(grid)), target_(target) {
    if (grid_.size() < 2) throw ConfigurationError("misspecification injector needs at least 2 grid points");
  }

  /// Survival-scale value at grid index j. Both targets share 1 - 0.9 (j-1)/(J-1).
  double grid_value(std::size_t j) const {
    return 1.0 - 0.9 * static_cast<double>(j) / static_cast<double>(grid_.size() - 1);
  }

  Eigen::MatrixXd survival(const Eigen::MatrixXd& x, const std::vector<double>& times) const override {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(times.size()));
    for (std::size_t j = 0; j < times.size(); ++j) {
      const std::size_t c = grid_.count_le(times[j]);
      out.col(static_cast<Eigen::Index>(j)).setConstant(c == 0 ? 1.0 : grid_value(c - 1));
    }
    return out;
  }
  std::string name() const override { return "injected"; }
  Target target() const { return target_; }

 private:
  TimeGrid grid_;
  Target target_;
};

inline std::shared_ptr<InjectedModel> inject_misspecification(const TimeGrid& grid, Target target) {
  return std::make_shared<InjectedModel>(grid, target);
}

/// Closed-form model S(t | x) supplied by the caller (truth oracles, tests).
class FunctionModel : public SurvivalModel {
 public:
  using Fn = std::function<double(const Eigen::Ref<const Eigen::RowVectorXd>&, double)>;
  explicit FunctionModel(Fn fn, std::string label = "closed-form") : fn_(std::move(fn)), label_(std::move(label)) {}

  Eigen::MatrixXd survival(const Eigen::MatrixXd& x, const std::vector<double>& times) const override {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(times.size()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Eigen::RowVectorXd xi = x.row(i);
      for (std::size_t j = 0; j < times.size(); ++j) out(i, static_cast<Eigen::Index>(j)) = fn_(xi, times[j]);
    }
    return out;
  }
  std::string name() const override { return label_; }

 private:
  Fn fn_;
  std::string label_;
};

// ------------------------------------------------------------ curve sets

/// Per-subject event survival S, censoring survival G and hazard increments dL on a grid.
struct SurvivalCurveSet {
  TimeGrid grid;
  Eigen::MatrixXd S;   // n x J
  Eigen::MatrixXd G;   // n x J, truncated below at the floor
  Eigen::MatrixXd dL;  // n x J, dL_j = (S_{j-1} - S_j) / S_{j-1}, S_0 = 1
  double eta_floor = 0.0;

  std::size_t n() const { return static_cast<std::size_t>(S.rows()); }
  std::size_t J() const { return grid.size(); }

  Eigen::MatrixXd event_cdf() const { return (1.0 - S.array()).matrix(); }
  Eigen::MatrixXd event_cumhaz() const {
    Eigen::MatrixXd L = dL;
    for (Eigen::Index j = 1; j < L.cols(); ++j) L.col(j) += L.col(j - 1);
    return L;
  }
  double F(std::size_t i, std::size_t j) const {
    return 1.0 - S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  double F_tau(std::size_t i) const { return F(i, grid.tau_index()); }

  /// Right-continuous step lookup of S at time t (1 before the first grid point).
  double surv_at(std::size_t i, double t) const {
    const std::size_t c = grid.count_le(t);
    return c == 0 ? 1.0 : S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c - 1));
  }
  double censor_at(std::size_t i, double t) const {
    const std::size_t c = grid.count_le(t);
    return c == 0 ? 1.0 : G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c - 1));
  }

  SurvivalCurveSet rows(const std::vector<std::size_t>& idx) const {
    SurvivalCurveSet out;
    out.grid = grid;
    out.eta_floor = eta_floor;
    out.S.resize(static_cast<Eigen::Index>(idx.size()), S.cols());
    out.G.resize(static_cast<Eigen::Index>(idx.size()), G.cols());
    out.dL.resize(static_cast<Eigen::Index>(idx.size()), dL.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto k = static_cast<Eigen::Index>(idx[r]);
      out.S.row(static_cast<Eigen::Index>(r)) = S.row(k);
      out.G.row(static_cast<Eigen::Index>(r)) = G.row(k);
      out.dL.row(static_cast<Eigen::Index>(r)) = dL.row(k);
    }
    return out;
  }
};

inline Eigen::MatrixXd predict_survival(const SurvivalModel& model, const Eigen::MatrixXd& x, const TimeGrid& grid) {
  Eigen::MatrixXd S = model.survival(x, grid.points);
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    double prev = 1.0;
    for (Eigen::Index j = 0; j < S.cols(); ++j) {
      double v = S(i, j);
      if (!std::isfinite(v)) throw FitError(model.name() + " produced a non-finite survival prediction");
      v = std::clamp(v, 0.0, 1.0);
      v = std::min(v, prev);  // guard against round-off increases
      S(i, j) = v;
      prev = v;
    }
  }
  return S;
}

/// Left-anchored hazard increments of a survival matrix.
inline Eigen::MatrixXd hazard_increments(const Eigen::MatrixXd& S) {
  Eigen::MatrixXd dL(S.rows(), S.cols());
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    double prev = 1.0;
    for (Eigen::Index j = 0; j < S.cols(); ++j) {
      if (prev <= 0.0)
        throw HazardDerivationError("subject " + std::to_string(i + 1) + ": survival reaches 0 before grid point " +
                                    std::to_string(j + 1) + "; hazard undefined");
      dL(i, j) = (prev - S(i, j)) / prev;
      prev = S(i, j);
    }
  }
  return dL;
}

inline SurvivalCurveSet predict_curves(const SurvivalModel& event_model, const SurvivalModel& censor_model,
                                       const Eigen::MatrixXd& x, const TimeGrid& grid, double eta_floor = 0.05) {
  if (!(eta_floor >= 0.0 && eta_floor < 1.0)) throw ConfigurationError("eta_floor must lie in [0, 1)");
  SurvivalCurveSet c;
  c.grid = grid;
  c.eta_floor = eta_floor;
  c.S = predict_survival(event_model, x, grid);
  c.G = predict_survival(censor_model, x, grid).cwiseMax(eta_floor);
  c.dL = hazard_increments(c.S);
  return c;
}

/// Covariate-free unit censoring survival, i.e. no censoring.
inline ModelPtr no_censoring_model() {
  return std::make_shared<FunctionModel>([](const Eigen::Ref<const Eigen::RowVectorXd>&, double) { return 1.0; },
                                         "no-censoring");
}

}  // namespace survim
