#pragma once

// Deterministic integration of the population rate equations. Serves as the
// numerical oracle for the closed-form solutions and as the reference
// dynamics for the stochastic simulator.
//
// Integrator: Dormand-Prince 5(4) embedded Runge-Kutta with FSAL, adaptive
// step control on a mixed absolute/relative error norm. A fixed-step mode
// (no error control) is kept for convergence-order studies.

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "qdecay/decay_models.hpp"
#include "qdecay/errors.hpp"
#include "qdecay/rate_matrix.hpp"

namespace qdecay {

struct OdeOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  double fixed_step = 0.0;  // > 0 switches off adaptivity (order studies)
};

/// Trapping channel for the shelf: rate r32(t) = r32_prime * t^-alpha.
/// alpha = 0 yields a constant rate usable at any t >= 0.
struct TrappingSpec {
  double r32_prime = 0.0;
  double alpha = 0.0;

  static TrappingSpec constant(double r32) { return {r32, 0.0}; }
  static TrappingSpec power_law(double prefactor, double alpha_) {
    return {prefactor, alpha_};
  }

  bool is_power_law() const { return alpha != 0.0; }

  double rate_at(double t) const {
    if (alpha == 0.0) return r32_prime;
    return r32_prime * std::pow(t, -alpha);
  }

  void validate() const {
    if (r32_prime < 0.0)
      throw model_error("TrappingSpec: r32_prime must be >= 0");
    if (alpha < 0.0 || alpha >= 1.0)
      throw model_error("TrappingSpec: alpha must lie in [0, 1)");
  }
};

/// How the shelf's radiative rate enters the open-system dynamics.
/// `constant_rate` keeps r31 fixed (the physically expected behaviour);
/// `mirrors_trapping` substitutes r31 -> r32(t) so the total shelf depletion
/// becomes 2 r32(t), the closure used to derive the stretched decay law.
/// Keeping both makes the quality of that closure measurable.
enum class R31Mode { constant_rate, mirrors_trapping };

/// Open two-state system: bright state fed by the shelf, emission leaves.
///   dn2/dt = r32(t) n3 - r21 n2
///   dn3/dt = -(r31_eff + r32(t)) n3
struct ShelvedDecaySystem {
  double r21 = 1.0;
  double r31 = 0.0;
  TrappingSpec trapping;
  R31Mode r31_mode = R31Mode::constant_rate;

  void validate() const {
    if (!(r21 > 0.0)) throw model_error("ShelvedDecaySystem: r21 must be > 0");
    if (r31 < 0.0) throw model_error("ShelvedDecaySystem: r31 must be >= 0");
    trapping.validate();
  }
};

namespace detail {

// Dormand-Prince 5(4) tableau.
inline constexpr double kC[7] = {0.0,     1.0 / 5, 3.0 / 10, 4.0 / 5,
                                 8.0 / 9, 1.0,     1.0};
inline constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
// Difference between the 5th- and 4th-order weights (error estimator).
inline constexpr double kE[7] = {71.0 / 57600,      0.0,
                                 -71.0 / 16695,     71.0 / 1920,
                                 -17253.0 / 339200, 22.0 / 525,
                                 -1.0 / 40};

/// Advance y from t0 to t1. Rhs signature: void(double t, const State&, State&).
template <std::size_t N, typename Rhs>
std::array<double, N> integrate_segment(Rhs&& rhs, std::array<double, N> y,
                                        double t0, double t1,
                                        const OdeOptions& opt) {
  using State = std::array<double, N>;
  if (t1 <= t0) throw model_error("integrate_segment: t1 must exceed t0");
  double t = t0;
  const double span = t1 - t0;
  double h = opt.fixed_step > 0.0 ? opt.fixed_step : span * 1e-3;
  State k[7];
  rhs(t, y, k[0]);  // FSAL: stage 0 of the next step is stage 6 of this one
  while (t < t1) {
    h = std::min(h, t1 - t);
    if (!(h > std::fabs(t) * 1e-14) || !(t + h > t)) {
      throw numeric_error(
          "ODE step size underflow at t = " + std::to_string(t) +
          " ns (stiffness or a rate singularity inside the grid)");
    }
    State stage, ynew;
    for (int s = 1; s < 7; ++s) {
      for (std::size_t i = 0; i < N; ++i) {
        double acc = 0.0;
        for (int j = 0; j < s; ++j) acc += kA[s][j] * k[j][i];
        stage[i] = y[i] + h * acc;
      }
      rhs(t + kC[s] * h, stage, k[s]);
    }
    // Stage 6 already evaluates the 5th-order solution (FSAL property).
    ynew = stage;
    if (opt.fixed_step > 0.0) {
      y = ynew;
      t += h;
      k[0] = k[6];
      continue;
    }
    double err = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      double e = 0.0;
      for (int s = 0; s < 7; ++s) e += kE[s] * k[s][i];
      const double scale =
          opt.abs_tol +
          opt.rel_tol * std::max(std::fabs(y[i]), std::fabs(ynew[i]));
      err += (h * e / scale) * (h * e / scale);
    }
    err = std::sqrt(err / static_cast<double>(N));
    if (err <= 1.0) {
      y = ynew;
      t += h;
      k[0] = k[6];
    }
    // On rejection k[0] still holds f(t, y); only the step size changes.
    const double factor =
        err == 0.0 ? 5.0 : 0.9 * std::pow(err, -0.2);
    h *= std::min(5.0, std::max(0.2, factor));
  }
  return y;
}

inline void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw model_error("integrate_populations: empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw model_error("integrate_populations: grid must strictly increase");
}

inline double clamp_occupancy(double v, double tol) {
  if (v < 0.0 && v > -tol) return 0.0;
  if (v > 1.0 && v < 1.0 + tol) return 1.0;
  return v;
}

}  // namespace detail

/// Integrate the closed three-level system dp/dt = -M p along `grid`,
/// starting from occupancies `p0` at grid.front(). Total probability is
/// conserved to integrator tolerance.
inline PopulationTrajectory integrate_populations(const RateSet& rates,
                                                  const Vec3& p0,
                                                  const std::vector<double>& grid,
                                                  const OdeOptions& opt = {}) {
  detail::check_grid(grid);
  const Mat3 m = build_rate_matrix(rates);
  auto rhs = [&m](double, const std::array<double, 3>& p,
                  std::array<double, 3>& dp) {
    for (int i = 0; i < 3; ++i)
      dp[i] = -(m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2]);
  };
  PopulationTrajectory out;
  out.times = grid;
  out.p1.reserve(grid.size());
  out.p2.reserve(grid.size());
  out.p3.reserve(grid.size());
  std::array<double, 3> y{p0[0], p0[1], p0[2]};
  const double clamp = 100.0 * opt.abs_tol;
  auto push = [&](const std::array<double, 3>& p) {
    out.p1.push_back(detail::clamp_occupancy(p[0], clamp));
    out.p2.push_back(detail::clamp_occupancy(p[1], clamp));
    out.p3.push_back(detail::clamp_occupancy(p[2], clamp));
  };
  push(y);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    y = detail::integrate_segment(rhs, y, grid[i - 1], grid[i], opt);
    push(y);
  }
  return out;
}

/// Integrate the open shelf-fed system along `grid`, starting from
/// (n2_0, n3_0) at grid.front(). Emission leaves the system, so total
/// occupancy decays; p1 reports the accumulated ground population
/// 1 - p2 - p3. For a power-law trapping rate the grid must start at a
/// strictly positive time (the rate diverges at zero).
inline PopulationTrajectory integrate_populations(const ShelvedDecaySystem& sys,
                                                  double n2_0, double n3_0,
                                                  const std::vector<double>& grid,
                                                  const OdeOptions& opt = {}) {
  sys.validate();
  detail::check_grid(grid);
  if (n2_0 < 0.0 || n3_0 < 0.0 || n2_0 + n3_0 > 1.0)
    throw model_error("integrate_populations: invalid initial occupancies");
  if (sys.trapping.is_power_law() && !(grid.front() > 0.0))
    throw model_error(
        "integrate_populations: power-law trapping requires grid to start at "
        "t > 0 (rate singularity at zero)");
  auto rhs = [&sys](double t, const std::array<double, 2>& n,
                    std::array<double, 2>& dn) {
    const double r32 = sys.trapping.rate_at(t);
    const double r31 =
        sys.r31_mode == R31Mode::mirrors_trapping ? r32 : sys.r31;
    dn[0] = r32 * n[1] - sys.r21 * n[0];
    dn[1] = -(r31 + r32) * n[1];
  };
  PopulationTrajectory out;
  out.times = grid;
  std::array<double, 2> y{n2_0, n3_0};
  const double clamp = 100.0 * opt.abs_tol;
  auto push = [&](const std::array<double, 2>& n) {
    const double p2 = detail::clamp_occupancy(n[0], clamp);
    const double p3 = detail::clamp_occupancy(n[1], clamp);
    out.p2.push_back(p2);
    out.p3.push_back(p3);
    out.p1.push_back(detail::clamp_occupancy(1.0 - p2 - p3, clamp));
  };
  push(y);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    y = detail::integrate_segment(rhs, y, grid[i - 1], grid[i], opt);
    push(y);
  }
  return out;
}

}  // namespace qdecay
