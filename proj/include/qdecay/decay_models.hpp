#pragma once

// Closed-form decay laws for a three-level emitter with a metastable
// shelving state. Two regimes are covered: a fast trapping regime where the
// bright-state population follows a biexponential, and a dispersive-trapping
// regime where the shelved population decays as a stretched exponential.
//
// Units: times in ns, rates in ns^-1 throughout.

#include <cmath>
#include <vector>

#include "qdecay/errors.hpp"
#include "qdecay/special.hpp"

namespace qdecay {

/// Parameters of the long-time luminescence law
///   I(t) = A t^(beta-1) exp(-(r t)^beta).
struct StretchedDecayParams {
  double amplitude_A = 1.0;  // intensity scale, counts * ns^-beta
  double rate_r = 1.0;       // effective decay rate, ns^-1
  double beta = 1.0;         // stretch exponent, (0, 1]

  void validate() const {
    if (!(amplitude_A > 0.0))
      throw model_error("StretchedDecayParams: amplitude_A must be positive");
    if (!(rate_r > 0.0))
      throw model_error("StretchedDecayParams: rate_r must be positive");
    if (!(beta > 0.0) || beta > 1.0)
      throw model_error("StretchedDecayParams: beta must lie in (0, 1]");
  }
};

/// Parameters of the fast-trapping (constant-rate) population solution.
/// r_prime is the total depletion rate of the shelf, r' = r31 + r32.
struct TwoLevelDecayParams {
  double n2_0 = 0.0;     // initial bright-state occupancy
  double n3_0 = 0.0;     // initial shelf occupancy
  double r21 = 1.0;      // emission rate, ns^-1
  double r_prime = 1.0;  // total shelf depletion rate r31 + r32, ns^-1
  double r32 = 0.5;      // shelf -> bright feed rate, ns^-1

  void validate() const {
    if (!(r21 > 0.0) || !(r_prime > 0.0) || !(r32 > 0.0))
      throw model_error("TwoLevelDecayParams: all rates must be positive");
    if (r32 > r_prime)
      throw model_error(
          "TwoLevelDecayParams: r32 cannot exceed r_prime = r31 + r32");
    if (n2_0 < 0.0 || n3_0 < 0.0)
      throw model_error("TwoLevelDecayParams: occupancies must be >= 0");
    if (n2_0 + n3_0 > 1.0)
      throw model_error("TwoLevelDecayParams: n2_0 + n3_0 must be <= 1");
  }
};

/// Power-law trapping channel r32(t) = r32_prime * t^-alpha together with
/// the shelf's radiative rate and initial occupancy.
struct PowerLawTrapping {
  double r32_prime = 1.0;  // trapping prefactor; r32_prime * t^-alpha is ns^-1
  double alpha = 0.0;      // dispersion exponent, [0, 1)
  double r31 = 0.0;        // shelf radiative rate, ns^-1
  double n3_0 = 1.0;       // initial shelf occupancy

  void validate() const {
    if (!(r32_prime > 0.0))
      throw model_error("PowerLawTrapping: r32_prime must be positive");
    if (alpha < 0.0 || alpha >= 1.0)
      throw model_error("PowerLawTrapping: alpha must lie in [0, 1)");
    if (r31 < 0.0) throw model_error("PowerLawTrapping: r31 must be >= 0");
    if (n3_0 < 0.0 || n3_0 > 1.0)
      throw model_error("PowerLawTrapping: n3_0 must lie in [0, 1]");
  }
};

/// Sampled occupancies of the three levels along a time grid.
struct PopulationTrajectory {
  std::vector<double> times;  // ns, strictly increasing
  std::vector<double> p1;
  std::vector<double> p2;
  std::vector<double> p3;
};

/// I(t) = A t^(beta-1) exp(-(r t)^beta).
///
/// For beta < 1 the t^(beta-1) factor diverges at t = 0 (integrably), so
/// evaluation at t <= 0 is rejected rather than clamped; silent clamping
/// would bias fits that bin close to zero delay.
inline double stretched_intensity(double t, const StretchedDecayParams& p) {
  p.validate();
  if (p.beta < 1.0) {
    if (!(t > 0.0))
      throw model_error("stretched_intensity: t must be > 0 for beta < 1");
    return p.amplitude_A * std::pow(t, p.beta - 1.0) *
           std::exp(-std::pow(p.rate_r * t, p.beta));
  }
  if (t < 0.0) throw model_error("stretched_intensity: t must be >= 0");
  return p.amplitude_A * std::exp(-p.rate_r * t);
}

/// Mean emission delay of the stretched law: <tau> = (1/r) Gamma(1/beta + 1).
inline double average_lifetime(double rate_r, double beta) {
  if (!(rate_r > 0.0))
    throw model_error("average_lifetime: rate_r must be positive");
  if (!(beta > 0.0) || beta > 1.0)
    throw model_error("average_lifetime: beta must lie in (0, 1]");
  return gamma_fn(1.0 / beta + 1.0) / rate_r;
}

/// Bright-state occupancy for constant trapping rates:
///   n2(t) = n2(0) e^{-r21 t} + n3(0) r32/(r21 - r') (e^{-r' t} - e^{-r21 t}).
///
/// The removable singularity at r21 = r' is reported as an error instead of
/// taking the analytic limit: the physical regimes of interest keep the two
/// rates far apart, and an exact collision signals a misconfigured input.
inline double case1_population_n2(double t, const TwoLevelDecayParams& p) {
  p.validate();
  if (t < 0.0) throw model_error("case1_population_n2: t must be >= 0");
  const double scale = std::max(p.r21, p.r_prime);
  if (std::fabs(p.r21 - p.r_prime) <= 1e-9 * scale)
    throw model_error(
        "case1_population_n2: r21 and r_prime are degenerate; the "
        "biexponential form does not apply");
  return p.n2_0 * std::exp(-p.r21 * t) +
         p.n3_0 * p.r32 / (p.r21 - p.r_prime) *
             (std::exp(-p.r_prime * t) - std::exp(-p.r21 * t));
}

/// Photon emission rate r21 * n2(t) in the fast-trapping regime.
inline double case1_intensity(double t, const TwoLevelDecayParams& p) {
  return p.r21 * case1_population_n2(t, p);
}

/// Effective rate of the stretched law induced by power-law trapping:
///   r = (2 r32_prime / (1 - alpha))^(1/(1-alpha)).
///
/// The factor 2 encodes the approximation r31 + r32(t) ~= 2 r32(t) used to
/// close the shelf equation; the unapproximated dynamics are available
/// through the ODE integrator so the error stays measurable.
inline double effective_rate_r(double r32_prime, double alpha) {
  if (!(r32_prime > 0.0))
    throw model_error("effective_rate_r: r32_prime must be positive");
  if (alpha < 0.0 || alpha >= 1.0)
    throw model_error("effective_rate_r: alpha must lie in [0, 1)");
  const double beta = 1.0 - alpha;
  return std::pow(2.0 * r32_prime / beta, 1.0 / beta);
}

/// Shelved-population decay under power-law trapping:
///   n3(t) = n3(0) exp(-(r t)^beta), beta = 1 - alpha.
inline double metastable_population_n3(double t, const PowerLawTrapping& p) {
  p.validate();
  if (t < 0.0) throw model_error("metastable_population_n3: t must be >= 0");
  const double beta = 1.0 - p.alpha;
  const double r = effective_rate_r(p.r32_prime, p.alpha);
  return p.n3_0 * std::exp(-std::pow(r * t, beta));
}

/// Instantaneous trapping rate r32(t) = r32_prime * t^-alpha.
inline double trapping_rate(double t, double r32_prime, double alpha) {
  if (!(r32_prime > 0.0))
    throw model_error("trapping_rate: r32_prime must be positive");
  if (alpha < 0.0 || alpha >= 1.0)
    throw model_error("trapping_rate: alpha must lie in [0, 1)");
  if (!(t > 0.0)) throw model_error("trapping_rate: t must be > 0");
  return r32_prime * std::pow(t, -alpha);
}

}  // namespace qdecay
