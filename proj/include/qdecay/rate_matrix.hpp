#pragma once

// Three-level rate-equation model in matrix form: dp/dt = -M p for the
// occupancies p = (p1, p2, p3) of ground, bright, and shelving states.
// Provides the exact eigenstructure in closed form, the low-rate
// approximations, the steady state, and the second-order correlation
// g2(t) = p2(t)/p2(inf) both exact and in its biexponential approximation.

#include <array>
#include <cmath>

#include "qdecay/errors.hpp"
#include "qdecay/linalg.hpp"

namespace qdecay {

/// Transition rates of the three-level system, all in ns^-1.
/// Indices: 1 = ground, 2 = bright (emitting), 3 = metastable shelf.
struct RateSet {
  double r12 = 0.0;  // excitation, ground -> bright
  double r21 = 1.0;  // emission, bright -> ground
  double r13 = 0.0;  // excitation, ground -> shelf
  double r31 = 0.0;  // shelf -> ground
  double r32 = 0.0;  // shelf -> bright (trapping release)

  void validate() const {
    if (r12 < 0.0 || r13 < 0.0 || r31 < 0.0 || r32 < 0.0)
      throw model_error("RateSet: rates must be >= 0");
    if (!(r21 > 0.0))
      throw model_error("RateSet: r21 must be positive (emission channel)");
  }
};

/// dp/dt = -M p. Columns of M sum to zero (probability conservation).
inline Mat3 build_rate_matrix(const RateSet& k) {
  k.validate();
  return {{{k.r12 + k.r13, -k.r21, -k.r31},
           {-k.r12, k.r21, -k.r32},
           {-k.r13, 0.0, k.r32 + k.r31}}};
}

/// Decay eigenvalues of M in closed form, ordered lambda1 >= lambda2 >= 0,
/// with lambda3 = 0 exactly (conservation mode).
///
/// lambda1 is the larger root of lambda^2 - S lambda + e2, with S the trace
/// restricted to the decaying modes and e2 the sum of principal 2x2 minors.
/// lambda2 is computed as e2/lambda1 instead of the subtractive half of the
/// quadratic formula; the two are algebraically identical and the quotient
/// form avoids cancellation when lambda2 << lambda1 (the regime of interest
/// has lambda1/lambda2 of order 200).
inline std::array<double, 3> exact_eigenvalues(const RateSet& k) {
  k.validate();
  const double s = k.r12 + k.r13 + k.r21 + k.r32 + k.r31;
  const double disc = (k.r12 + k.r13 + k.r21 - k.r32 - k.r31) *
                          (k.r12 + k.r13 + k.r21 - k.r32 - k.r31) -
                      4.0 * k.r13 * k.r21 + 4.0 * k.r13 * k.r31;
  if (disc < 0.0)
    throw model_error(
        "exact_eigenvalues: negative discriminant, eigenvalues are complex");
  const double e2 = k.r13 * k.r21 + k.r12 * k.r31 + k.r12 * k.r32 +
                    k.r21 * k.r31 + k.r21 * k.r32 + k.r13 * k.r32;
  const double lambda1 = 0.5 * (s + std::sqrt(disc));
  const double lambda2 = e2 / lambda1;
  return {lambda1, lambda2, 0.0};
}

/// Low-rate approximation of the eigenvalues: the shelf rates r13, r31, r32
/// are treated as small against the optical cycle r12 + r21.
inline std::array<double, 3> approx_eigenvalues(const RateSet& k) {
  k.validate();
  const double lambda1 = k.r12 + k.r21;
  const double lambda2 = k.r32 + k.r31 + k.r21 * k.r13 / (k.r12 + k.r21);
  return {lambda1, lambda2, 0.0};
}

/// Normalized steady-state occupancies (p1, p2, p3), the null vector of M.
///
/// Closed form: (p1, p2, p3) proportional to
///   ( r21(r31+r32), r12(r31+r32) + r13 r32, r13 r21 ).
/// When the shelf is fully disconnected (r13 = 0 and r31 + r32 = 0) the
/// closed-form weights all vanish; the equilibrium of the remaining two-level
/// cycle is returned with p3 = 0.
inline Vec3 steady_state(const RateSet& k) {
  k.validate();
  if (k.r12 == 0.0 && k.r13 == 0.0)
    throw model_error("steady_state: no excitation channel (r12 = r13 = 0)");
  const double w1 = k.r21 * (k.r31 + k.r32);
  const double w2 = k.r12 * (k.r31 + k.r32) + k.r13 * k.r32;
  const double w3 = k.r13 * k.r21;
  const double sum = w1 + w2 + w3;
  if (sum == 0.0) {
    const double p2 = k.r12 / (k.r12 + k.r21);
    return {1.0 - p2, p2, 0.0};
  }
  const double p1 = w1 / sum;
  if (w3 == 0.0) return {p1, 1.0 - p1, 0.0};
  const double p2 = w2 / sum;
  const double p3 = std::max(0.0, 1.0 - p1 - p2);
  return {p1, p2, p3};
}

/// Low-rate expansion weights (a21, a22, a23) of
///   p2(t) = a21 e^{-lambda1 t} + a22 e^{-lambda2 t} + a23
/// for the initial condition p(0) = (1, 0, 0).
///
/// Implemented verbatim from the source model, including its five-term
/// denominator that drops the r13*r32 product kept by the steady-state
/// formula; the two expressions differ at second order in the small rates,
/// and the consistency test quantifies that gap rather than hiding it.
inline std::array<double, 3> approx_coefficients(const RateSet& k) {
  k.validate();
  const double a21 = -k.r12 / (k.r12 + k.r21);
  const double num = k.r12 * k.r32 + k.r13 * k.r32 + k.r12 * k.r31;
  const double den = k.r13 * k.r21 + k.r12 * k.r31 + k.r12 * k.r32 +
                     k.r21 * k.r31 + k.r21 * k.r32;
  // den = 0 forces num = 0 (both need r13 = 0 and r31 + r32 = 0): the shelf
  // never populates and the weight on the slow mode is zero.
  const double a23 = den == 0.0 ? 0.0 : num / den;
  const double a22 = -a21 - a23;
  return {a21, a22, a23};
}

/// Full modal expansion p_i(t) = sum_j coeff[i][j] exp(-lambda_j t).
struct EigenDecomposition {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda3 = 0.0;  // identically zero, kept for symmetry
  Mat3 coeff{};          // coeff[i][j] weights exp(-lambda_j t) in p_i(t)
};

/// Exact eigen-expansion of dp/dt = -M p for a given initial occupancy.
/// Throws when lambda1 and lambda2 collide to within 1e-9 relative: the
/// modal basis degenerates and no regime of the model operates there.
inline EigenDecomposition decompose(const RateSet& k,
                                    const Vec3& p0 = {1.0, 0.0, 0.0}) {
  const Mat3 m = build_rate_matrix(k);
  const auto lam = exact_eigenvalues(k);
  if (std::fabs(lam[0] - lam[1]) <= 1e-9 * lam[0])
    throw numeric_error("decompose: near-degenerate eigenvalues");
  Mat3 basis{};  // columns are eigenvectors
  for (int j = 0; j < 3; ++j) {
    Mat3 shifted = m;
    for (int i = 0; i < 3; ++i) shifted[i][i] -= lam[j];
    const Vec3 v = linalg::null_vector3(shifted);
    for (int i = 0; i < 3; ++i) basis[i][j] = v[i];
  }
  const Vec3 c = linalg::solve3(basis, p0);
  EigenDecomposition out;
  out.lambda1 = lam[0];
  out.lambda2 = lam[1];
  out.lambda3 = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out.coeff[i][j] = basis[i][j] * c[j];
  return out;
}

/// Occupancies at time t from a modal expansion.
inline Vec3 populations(const EigenDecomposition& d, double t) {
  const double e1 = std::exp(-d.lambda1 * t);
  const double e2 = std::exp(-d.lambda2 * t);
  Vec3 p{};
  for (int i = 0; i < 3; ++i)
    p[i] = d.coeff[i][0] * e1 + d.coeff[i][1] * e2 + d.coeff[i][2];
  return p;
}

/// Parameters of the biexponential correlation model
///   g2(t) = 1 - (1+a) e^{-lambda1 |t|} + a e^{-lambda2 |t|}.
struct G2Params {
  double lambda1 = 1.0;  // antibunching rate, ns^-1
  double lambda2 = 0.1;  // bunching decay rate, ns^-1
  double a = 0.0;        // bunching amplitude

  void validate() const {
    if (!(lambda1 > 0.0) || !(lambda2 > 0.0))
      throw model_error("G2Params: lambda1 and lambda2 must be positive");
    if (!(lambda1 > lambda2))
      throw model_error("G2Params: lambda1 must exceed lambda2");
    if (a < 0.0) throw model_error("G2Params: a must be >= 0");
  }
};

/// Biexponential correlation function, evaluated at |t| so the curve is even.
/// Grouped as (1 - e^{-l1|t|}) + a (e^{-l2|t|} - e^{-l1|t|}) which makes
/// g2(0) = 0 exact instead of relying on cancellation of three terms.
inline double g2_approx(double t, const G2Params& g) {
  g.validate();
  const double at = std::fabs(t);
  const double e1 = std::exp(-g.lambda1 * at);
  const double e2 = std::exp(-g.lambda2 * at);
  return (1.0 - e1) + g.a * (e2 - e1);
}

/// Map transition rates onto the biexponential parameters:
///   lambda1 = r12 + r21,
///   lambda2 = r32 + r31 + r21 r13/(r12 + r21),
///   a = r21 r13 / ((r31 + r32)(r12 + r21)).
inline G2Params g2_params_from_rates(const RateSet& k) {
  k.validate();
  if (k.r31 + k.r32 <= 0.0)
    throw model_error(
        "g2_params_from_rates: r31 + r32 must be positive (the shelf needs "
        "a depletion path)");
  G2Params g;
  g.lambda1 = k.r12 + k.r21;
  g.lambda2 = k.r32 + k.r31 + k.r21 * k.r13 / (k.r12 + k.r21);
  g.a = k.r21 * k.r13 / ((k.r31 + k.r32) * (k.r12 + k.r21));
  g.validate();  // rejects rate sets outside the approximation's domain
  return g;
}

/// Exact normalized correlation g2(t) = p2(t)/p2(inf) with p(0) = (1,0,0),
/// propagated through the full eigendecomposition (no small-rate forms).
///
/// p2(t) is assembled as a21 (e^{-l1 t} - 1) + a22 (e^{-l2 t} - 1) + p2(inf)
/// shifted so that g2(0) is exactly zero; the long-time limit then matches
/// the steady state to solver accuracy (~1e-13), far inside every stated
/// tolerance.
inline double g2_exact(double t, const RateSet& k) {
  if (t < 0.0) throw model_error("g2_exact: t must be >= 0");
  const Vec3 pinf = steady_state(k);
  if (!(pinf[1] > 0.0))
    throw model_error("g2_exact: p2(inf) = 0, correlation undefined");
  if (k.r13 == 0.0 && k.r31 + k.r32 == 0.0) {
    // Shelf disconnected: pure two-level cycling.
    return 1.0 - std::exp(-(k.r12 + k.r21) * t);
  }
  const EigenDecomposition d = decompose(k);
  // p2(t) = a21 e^{-l1 t} + a22 e^{-l2 t} + a23 with a21 + a22 + a23 = p2(0)
  // = 0 up to solver rounding; rewriting through expm1 pins p2(0) to zero.
  const double p2t = d.coeff[1][0] * std::expm1(-d.lambda1 * t) +
                     d.coeff[1][1] * std::expm1(-d.lambda2 * t);
  return p2t / pinf[1];
}

}  // namespace qdecay
