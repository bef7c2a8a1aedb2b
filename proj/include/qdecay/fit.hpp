#pragma once

// Weighted nonlinear least squares for the three model families the toolkit
// fits: single-exponential decay, the stretched long-tail law, and the
// biexponential correlation function.
//
// The engine is a damped Gauss-Newton (Levenberg-Marquardt) iteration.
// Bound constraints are imposed by smooth reparameterization instead of
// clipping: positive parameters are fitted as their logarithm and
// (0,1]-bounded parameters through a logistic map, which keeps the
// uncertainty propagation differentiable everywhere.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qdecay/decay_models.hpp"
#include "qdecay/errors.hpp"
#include "qdecay/linalg.hpp"
#include "qdecay/photon_stats.hpp"
#include "qdecay/rate_matrix.hpp"

namespace qdecay {

/// How a parameter is represented internally during optimization.
enum class Transform {
  none,       // unconstrained
  positive,   // theta = exp(u) > 0
  unit_open,  // theta = 1/(1+exp(-u)) in (0,1]; saturates to exactly 1.0
};

struct Parameter {
  std::string name;
  double init = 0.0;
  Transform transform = Transform::none;
  bool fixed = false;  // held at init, excluded from the optimization
};

/// Data to fit: points (x, y) with weights w = 1/sigma^2.
struct FitData {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> w;
};

/// y = model(x, theta) where theta follows the declared parameter order.
using ModelFn = std::function<double(double, const std::vector<double>&)>;

struct FitOptions {
  int max_iterations = 200;
  double chi2_rel_tol = 1e-13;  // accepted-step relative chi2 improvement
  double step_tol = 1e-12;      // max |du| considered a stall at the optimum
};

struct FitResult {
  std::map<std::string, double> parameters;
  std::map<std::string, double> uncertainties;  // 1 sigma; only if converged
  std::map<std::string, double> derived;
  double reduced_chi_square = 0.0;
  std::pair<double, double> window{0.0, 0.0};  // fitted x range
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
  // Covariance of the free parameters (external scale), for derived-quantity
  // propagation. free_names orders the rows/columns.
  std::vector<std::string> free_names;
  linalg::MatX covariance;
};

/// Non-convergence carrying the partial state, so callers can persist
/// diagnostics before failing.
class fit_convergence_error : public numeric_error {
 public:
  fit_convergence_error(const std::string& msg, FitResult partial)
      : numeric_error(msg), partial_(std::move(partial)) {}
  const FitResult& partial() const { return partial_; }

 private:
  FitResult partial_;
};

namespace fitdetail {

inline double to_external(double u, Transform t) {
  switch (t) {
    case Transform::none: return u;
    case Transform::positive: return std::exp(u);
    case Transform::unit_open: return 1.0 / (1.0 + std::exp(-u));
  }
  return u;
}

inline double to_internal(double theta, Transform t) {
  switch (t) {
    case Transform::none:
      return theta;
    case Transform::positive:
      if (!(theta > 0.0))
        throw model_error("fit: positive parameter initialized <= 0");
      return std::log(theta);
    case Transform::unit_open:
      if (!(theta > 0.0) || theta > 1.0)
        throw model_error("fit: unit-interval parameter initialized outside (0,1]");
      if (theta >= 1.0) return 40.0;  // logistic(40) rounds to exactly 1.0
      return std::log(theta / (1.0 - theta));
  }
  return theta;
}

/// d theta / d u at the current point.
inline double external_slope(double theta, Transform t) {
  switch (t) {
    case Transform::none: return 1.0;
    case Transform::positive: return theta;
    case Transform::unit_open: return theta * (1.0 - theta);
  }
  return 1.0;
}

}  // namespace fitdetail

/// Damped least squares over the free parameters. Returns the optimum with
/// covariance-derived 1-sigma uncertainties scaled by reduced chi-square.
/// Near-singular normal equations do not abort the fit: the covariance is
/// regularized and the degenerate parameter directions are named in a
/// warning, so flat directions (e.g. the rate of a zero-amplitude
/// exponential) surface to the caller instead of producing garbage errors.
inline FitResult damped_least_squares(const ModelFn& model, const FitData& data,
                                      const std::vector<Parameter>& params,
                                      const FitOptions& opt = {}) {
  const std::size_t m = data.x.size();
  if (data.y.size() != m || data.w.size() != m)
    throw model_error("fit: x, y, w must have equal length");
  std::vector<std::size_t> free_idx;
  for (std::size_t j = 0; j < params.size(); ++j)
    if (!params[j].fixed) free_idx.push_back(j);
  const std::size_t n = free_idx.size();
  if (n == 0) throw model_error("fit: no free parameters");
  if (m < n) throw model_error("fit: fewer data points than parameters");

  std::vector<double> theta(params.size());
  for (std::size_t j = 0; j < params.size(); ++j) theta[j] = params[j].init;
  std::vector<double> u(n);
  for (std::size_t j = 0; j < n; ++j)
    u[j] = fitdetail::to_internal(params[free_idx[j]].init,
                                  params[free_idx[j]].transform);

  auto apply = [&](const std::vector<double>& uv) {
    std::vector<double> th = theta;
    for (std::size_t j = 0; j < n; ++j)
      th[free_idx[j]] =
          fitdetail::to_external(uv[j], params[free_idx[j]].transform);
    return th;
  };
  auto chi2_of = [&](const std::vector<double>& th) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double r = data.y[i] - model(data.x[i], th);
      acc += data.w[i] * r * r;
    }
    return acc;
  };

  std::vector<double> th = apply(u);
  double chi2 = chi2_of(th);
  if (!std::isfinite(chi2))
    throw model_error("fit: initial residual is not finite");

  double lambda = 1e-3;
  int iter = 0;
  bool converged = false;
  linalg::MatX jtj(n, std::vector<double>(n, 0.0));
  std::vector<double> jtr(n, 0.0);
  std::vector<std::vector<double>> jac(m, std::vector<double>(n, 0.0));

  for (; iter < opt.max_iterations && !converged; ++iter) {
    // Central-difference Jacobian in internal coordinates.
    for (std::size_t j = 0; j < n; ++j) {
      const double h = 1e-6 * std::max(1.0, std::fabs(u[j]));
      std::vector<double> up = u, um = u;
      up[j] += h;
      um[j] -= h;
      const auto thp = apply(up);
      const auto thm = apply(um);
      for (std::size_t i = 0; i < m; ++i) {
        const double sw = std::sqrt(data.w[i]);
        jac[i][j] =
            sw * (model(data.x[i], thp) - model(data.x[i], thm)) / (2.0 * h);
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      jtr[j] = 0.0;
      for (std::size_t k = j; k < n; ++k) jtj[j][k] = 0.0;
    }
    for (std::size_t i = 0; i < m; ++i) {
      const double sw = std::sqrt(data.w[i]);
      const double r = sw * (data.y[i] - model(data.x[i], th));
      for (std::size_t j = 0; j < n; ++j) {
        jtr[j] += jac[i][j] * r;
        for (std::size_t k = j; k < n; ++k) jtj[j][k] += jac[i][j] * jac[i][k];
      }
    }
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < j; ++k) jtj[j][k] = jtj[k][j];

    // Marquardt scaling with a floor relative to the largest diagonal: a
    // dead Jacobian column (a parameter the model is locally insensitive
    // to, e.g. one saturated at a transform bound) would otherwise leave
    // the damped system singular at every lambda. Its row of jtj and its
    // jtr entry are exactly zero, so the floored pivot yields du = 0 for
    // that direction while the live directions still step.
    double max_diag = 0.0;
    for (std::size_t j = 0; j < n; ++j) max_diag = std::max(max_diag, jtj[j][j]);
    const double diag_floor = 1e-12 * max_diag + 1e-300;

    bool stepped = false;
    for (int raise = 0; raise < 40; ++raise) {
      linalg::MatX damped = jtj;
      for (std::size_t j = 0; j < n; ++j)
        damped[j][j] += lambda * std::max(jtj[j][j], diag_floor);
      std::vector<double> du;
      try {
        du = linalg::solve_dense(damped, jtr);
      } catch (const numeric_error&) {
        lambda = std::min(lambda * 4.0, 1e14);
        continue;
      }
      std::vector<double> unew = u;
      for (std::size_t j = 0; j < n; ++j) unew[j] += du[j];
      const auto thnew = apply(unew);
      const double chi2_new = chi2_of(thnew);
      if (std::isfinite(chi2_new) && chi2_new <= chi2) {
        const double drop = chi2 - chi2_new;
        double step = 0.0;
        for (double d : du) step = std::max(step, std::fabs(d));
        u = unew;
        th = thnew;
        chi2 = chi2_new;
        lambda = std::max(lambda / 3.0, 1e-12);
        stepped = true;
        if ((drop <= opt.chi2_rel_tol * std::max(chi2, 1e-30) &&
             step <= 1e-6) ||
            step <= opt.step_tol || chi2 == 0.0)
          converged = true;
        break;
      }
      lambda = std::min(lambda * 4.0, 1e14);
    }
    if (!stepped) {
      // No downhill step exists even at maximal damping: chi2 is at its
      // numerical floor. Accept when the residual is orthogonal to every
      // model direction (scale-free first-order condition, as in MINPACK's
      // gtol); a dead column -- e.g. a parameter saturated at a transform
      // bound -- is trivially orthogonal. Otherwise report non-convergence.
      const double rnorm = std::sqrt(std::max(chi2, 1e-300));
      double worst_cos = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double cnorm = std::sqrt(jtj[j][j]);
        if (cnorm > 0.0)
          worst_cos = std::max(worst_cos, std::fabs(jtr[j]) / (cnorm * rnorm));
      }
      converged = worst_cos <= 1e-4;
      break;
    }
  }

  FitResult res;
  res.iterations = iter;
  res.converged = converged;
  res.reduced_chi_square =
      chi2 / static_cast<double>(m > n ? m - n : 1);
  if (!data.x.empty()) {
    auto [lo, hi] = std::minmax_element(data.x.begin(), data.x.end());
    res.window = {*lo, *hi};
  }
  for (std::size_t j = 0; j < params.size(); ++j)
    res.parameters[params[j].name] = th[j];
  if (!converged)
    throw fit_convergence_error(
        "fit did not converge after " + std::to_string(iter) +
            " iterations (chi2 = " + std::to_string(chi2) + ")",
        res);

  // Covariance: eigen-regularized inverse of the weighted normal matrix,
  // scaled by reduced chi-square; mapped to external parameter scale.
  const auto eig = linalg::jacobi_eigen(jtj);
  const double emax = std::max(eig.values.back(), 0.0);
  std::vector<std::string> degenerate;
  linalg::MatX cov_u(n, std::vector<double>(n, 0.0));
  for (std::size_t e = 0; e < n; ++e) {
    double val = eig.values[e];
    if (!(val > emax * 1e-12)) {
      std::size_t worst = 0;
      for (std::size_t j = 1; j < n; ++j)
        if (std::fabs(eig.vectors[e][j]) > std::fabs(eig.vectors[e][worst]))
          worst = j;
      degenerate.push_back(params[free_idx[worst]].name);
      val = emax > 0.0 ? emax * 1e-12 : 1e-300;
    }
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        cov_u[j][k] += eig.vectors[e][j] * eig.vectors[e][k] / val;
  }
  if (!degenerate.empty()) {
    std::string msg = "non-identifiable parameter direction(s):";
    for (const auto& nm : degenerate) msg += " " + nm;
    res.warnings.push_back(msg);
  }
  const double scale = res.reduced_chi_square;
  res.free_names.resize(n);
  res.covariance.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    const auto& pj = params[free_idx[j]];
    res.free_names[j] = pj.name;
    const double sj = fitdetail::external_slope(th[free_idx[j]], pj.transform);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& pk = params[free_idx[k]];
      const double sk =
          fitdetail::external_slope(th[free_idx[k]], pk.transform);
      res.covariance[j][k] = cov_u[j][k] * scale * sj * sk;
    }
    res.uncertainties[pj.name] = std::sqrt(std::max(0.0, res.covariance[j][j]));
  }
  return res;
}

namespace fitdetail {

/// Bins of `hist` whose centers fall inside [t_lo, t_hi], with Poisson
/// weights 1/max(count, 1).
inline FitData histogram_window(const DecayHistogram& hist, double t_lo,
                                double t_hi) {
  FitData d;
  for (std::size_t i = 0; i < hist.bin_centers.size(); ++i) {
    const double t = hist.bin_centers[i];
    if (t < t_lo || t > t_hi) continue;
    d.x.push_back(t);
    d.y.push_back(static_cast<double>(hist.counts[i]));
    d.w.push_back(1.0 / std::max<double>(static_cast<double>(hist.counts[i]),
                                         1.0));
  }
  return d;
}

/// Mean of the last tenth of the window — the background estimate.
inline double tail_mean(const FitData& d) {
  const std::size_t n = d.y.size();
  const std::size_t first = n - std::max<std::size_t>(n / 10, 1);
  double acc = 0.0;
  for (std::size_t i = first; i < n; ++i) acc += d.y[i];
  return acc / static_cast<double>(n - first);
}

inline double covariance_entry(const FitResult& r, const std::string& a,
                               const std::string& b) {
  std::size_t ia = r.free_names.size(), ib = r.free_names.size();
  for (std::size_t i = 0; i < r.free_names.size(); ++i) {
    if (r.free_names[i] == a) ia = i;
    if (r.free_names[i] == b) ib = i;
  }
  if (ia == r.free_names.size() || ib == r.free_names.size()) return 0.0;
  return r.covariance[ia][ib];
}

}  // namespace fitdetail

/// Fit I(t) = amplitude * exp(-rate * t) + background over the window.
/// Derived output: lifetime = 1/rate.
inline FitResult fit_exponential(const DecayHistogram& hist, double t_lo,
                                 double t_hi) {
  FitData d = fitdetail::histogram_window(hist, t_lo, t_hi);
  std::size_t nonzero = 0;
  for (double y : d.y)
    if (y > 0.0) ++nonzero;
  if (nonzero < 10)
    throw model_error(
        "fit_exponential: window must contain at least 10 bins with counts");

  const double b0 = fitdetail::tail_mean(d);
  // Log-linear regression on background-subtracted counts for the start.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < d.x.size(); ++i) {
    const double v = d.y[i] - b0;
    if (v <= 0.0) continue;
    const double ly = std::log(v);
    sx += d.x[i];
    sy += ly;
    sxx += d.x[i] * d.x[i];
    sxy += d.x[i] * ly;
    ++used;
  }
  double rate0 = 1.0, amp0 = std::max(d.y.front(), 1.0);
  if (used >= 2) {
    const double denom = static_cast<double>(used) * sxx - sx * sx;
    if (denom > 0.0) {
      const double slope = (static_cast<double>(used) * sxy - sx * sy) / denom;
      const double icept = (sy - slope * sx) / static_cast<double>(used);
      if (slope < 0.0) rate0 = -slope;
      amp0 = std::exp(icept);
    }
  }
  std::vector<Parameter> params{
      {"amplitude", amp0, Transform::positive},
      {"rate", rate0, Transform::positive},
      {"background", b0, Transform::none},
  };
  ModelFn model = [](double t, const std::vector<double>& p) {
    return p[0] * std::exp(-p[1] * t) + p[2];
  };
  FitResult res = damped_least_squares(model, d, params);
  const double rate = res.parameters.at("rate");
  res.derived["lifetime"] = 1.0 / rate;
  const double sr = res.uncertainties.at("rate");
  res.uncertainties["lifetime"] = sr / (rate * rate);
  return res;
}

/// Fit the long-tail law I(t) = A t^(beta-1) exp(-(r t)^beta) + background.
/// Derived output: mean_lifetime = (1/r) Gamma(1/beta + 1) with first-order
/// uncertainty from the (r, beta) covariance.
inline FitResult fit_stretched(const DecayHistogram& hist, double t_lo,
                               double t_hi) {
  if (!(t_lo > 0.0))
    throw model_error("fit_stretched: window must start at t > 0 (the model "
                      "diverges at zero)");
  FitData d = fitdetail::histogram_window(hist, t_lo, t_hi);
  if (d.x.size() < 20)
    throw model_error("fit_stretched: window must contain at least 20 bins");

  const double b0 = fitdetail::tail_mean(d);
  const double beta0 = 0.8;
  // Early level: mean of the first few bins above background.
  const std::size_t head = std::max<std::size_t>(d.y.size() / 20, 3);
  double early = 0.0;
  for (std::size_t i = 0; i < head; ++i) early += d.y[i] - b0;
  early /= static_cast<double>(head);
  early = std::max(early, 1.0);
  // Crossing time of early/e gives the rate scale.
  double t_cross = d.x.back();
  for (std::size_t i = 0; i < d.x.size(); ++i) {
    if (d.y[i] - b0 <= early * std::exp(-1.0)) {
      t_cross = d.x[i];
      break;
    }
  }
  const double r0 = 1.0 / std::max(t_cross, d.x.front());
  const double shape0 =
      std::pow(d.x.front(), beta0 - 1.0) *
      std::exp(-std::pow(r0 * d.x.front(), beta0));
  const double a0 = std::max((d.y.front() - b0) / shape0, 1e-12);

  std::vector<Parameter> params{
      {"amplitude", a0, Transform::positive},
      {"rate", r0, Transform::positive},
      {"beta", beta0, Transform::unit_open},
      {"background", b0, Transform::none},
  };
  ModelFn model = [](double t, const std::vector<double>& p) {
    return p[0] * std::pow(t, p[2] - 1.0) *
               std::exp(-std::pow(p[1] * t, p[2])) +
           p[3];
  };
  FitResult res = damped_least_squares(model, d, params);

  const double r = res.parameters.at("rate");
  const double beta = res.parameters.at("beta");
  if (beta >= 1.0 - 1e-9)
    res.warnings.push_back("beta converged at its upper bound of 1");

  const double tau = average_lifetime(r, beta);
  res.derived["mean_lifetime"] = tau;
  // dtau/dr is analytic; dtau/dbeta by central difference inside (0,1].
  const double dtau_dr = -tau / r;
  double hb = std::min(1e-6, (1.0 - beta) * 0.5);
  double dtau_db;
  if (hb > 1e-12) {
    dtau_db = (average_lifetime(r, beta + hb) - average_lifetime(r, beta - hb)) /
              (2.0 * hb);
  } else {  // pinned at 1: one-sided difference
    hb = 1e-6;
    dtau_db = (average_lifetime(r, beta) - average_lifetime(r, beta - hb)) / hb;
  }
  const double var_r = fitdetail::covariance_entry(res, "rate", "rate");
  const double var_b = fitdetail::covariance_entry(res, "beta", "beta");
  const double cov_rb = fitdetail::covariance_entry(res, "rate", "beta");
  const double var_tau = dtau_dr * dtau_dr * var_r + dtau_db * dtau_db * var_b +
                         2.0 * dtau_dr * dtau_db * cov_rb;
  res.uncertainties["mean_lifetime"] = std::sqrt(std::max(0.0, var_tau));
  return res;
}

struct G2FitOptions {
  bool free_scale = false;       // fit an overall scale factor
  bool free_background = false;  // fit an additive offset
};

/// Fit g2(t) = scale * [1 - (1+a) e^{-l1|t|} + a e^{-l2|t|}] + background.
/// With scale and background held at their defaults (1 and 0) the model is
/// the pure biexponential form with g2(0) = 0 pinned. Weights come from the
/// Poisson variance of the raw coincidences when available.
/// Derived outputs: antibunching_time = 1/lambda1, bunching_time = 1/lambda2,
/// g2_zero = model value at t = 0.
inline FitResult fit_g2(const Correlogram& cg, const G2FitOptions& opt = {}) {
  const std::size_t nb = cg.lag_centers.size();
  if (nb < 8) throw model_error("fit_g2: too few correlogram bins");
  FitData d;
  d.x = cg.lag_centers;
  d.y = cg.g2_values;
  d.w.resize(nb);
  const bool have_raw = cg.raw_coincidences.size() == nb &&
                        cg.normalization.size() == nb;
  for (std::size_t i = 0; i < nb; ++i) {
    if (have_raw && cg.normalization[i] > 0.0) {
      // var(g2) = raw / norm^2  =>  w = norm^2 / max(raw, 1)
      const double norm = cg.normalization[i];
      const double raw =
          std::max<double>(static_cast<double>(cg.raw_coincidences[i]), 1.0);
      d.w[i] = norm * norm / raw;
    } else {
      d.w[i] = 1.0;
    }
  }

  // Starting values from curve geometry. Plateau from the outer 10% of lags,
  // dip width from the first recovery to (1 - 1/e) of the plateau, bunching
  // amplitude from the peak, tail rate from the peak's 1/e decay point.
  double plateau = 0.0;
  std::size_t n_out = std::max<std::size_t>(nb / 10, 2);
  for (std::size_t i = 0; i < n_out / 2; ++i) {
    plateau += d.y[i] + d.y[nb - 1 - i];
  }
  plateau /= 2.0 * static_cast<double>(n_out / 2);
  plateau = std::max(plateau, 0.1);
  double t_dip = cg.lag_centers.back() * 0.05;
  for (std::size_t i = nb / 2; i < nb; ++i) {
    if (d.y[i] >= plateau * (1.0 - std::exp(-1.0))) {
      t_dip = std::max(std::fabs(cg.lag_centers[i]), 1e-3);
      break;
    }
  }
  const double l1_0 = 1.0 / t_dip;
  double peak = 0.0, t_peak = t_dip;
  for (std::size_t i = 0; i < nb; ++i) {
    if (d.y[i] > peak) {
      peak = d.y[i];
      t_peak = std::fabs(cg.lag_centers[i]);
    }
  }
  const double a0 = std::max(peak / plateau - 1.0, 1e-3);
  double t_tail = std::max(t_peak * 10.0, t_dip * 50.0);
  for (std::size_t i = nb / 2; i < nb; ++i) {
    const double t = cg.lag_centers[i];
    if (t > t_peak && d.y[i] - plateau <= (peak - plateau) * std::exp(-1.0)) {
      t_tail = t;
      break;
    }
  }
  const double l2_0 = std::min(1.0 / t_tail, l1_0 * 0.3);

  auto run = [&](double l1i, double l2i) {
    std::vector<Parameter> params{
        {"lambda1", l1i, Transform::positive},
        {"lambda2", l2i, Transform::positive},
        {"a", a0, Transform::positive},
        {"scale", opt.free_scale ? plateau : 1.0, Transform::positive,
         !opt.free_scale},
        {"background", 0.0, Transform::none, !opt.free_background},
    };
    ModelFn model = [](double t, const std::vector<double>& p) {
      const double at = std::fabs(t);
      const double e1 = std::exp(-p[0] * at);
      const double e2 = std::exp(-p[1] * at);
      return p[3] * ((1.0 - e1) + p[2] * (e2 - e1)) + p[4];
    };
    return damped_least_squares(model, d, params);
  };

  FitResult res = run(l1_0, l2_0);
  if (res.parameters.at("lambda1") <= res.parameters.at("lambda2")) {
    // The two decay constants swapped roles; retry from exchanged starts.
    res = run(l2_0, l1_0);
    if (res.parameters.at("lambda1") <= res.parameters.at("lambda2"))
      throw numeric_error(
          "fit_g2: lambda1 <= lambda2 after convergence and retry; the "
          "correlogram does not separate the two time scales");
  }
  const double l1 = res.parameters.at("lambda1");
  const double l2 = res.parameters.at("lambda2");
  res.derived["antibunching_time"] = 1.0 / l1;
  res.derived["bunching_time"] = 1.0 / l2;
  res.uncertainties["antibunching_time"] =
      res.uncertainties.at("lambda1") / (l1 * l1);
  res.uncertainties["bunching_time"] =
      res.uncertainties.at("lambda2") / (l2 * l2);
  res.derived["g2_zero"] = res.parameters.at("background");
  return res;
}

}  // namespace qdecay
