#pragma once

#include <cmath>
#include <numbers>

#include "qdecay/errors.hpp"

namespace qdecay {

/// Gamma function for positive real argument.
///
/// Lanczos approximation with g = 7 and 9 coefficients; relative error is
/// below 1e-13 on [0.5, 10] (validated against a quadrature oracle in the
/// test suite). Arguments below 0.5 go through the reflection formula.
inline double gamma_fn(double x) {
  if (!(x > 0.0)) throw model_error("gamma_fn: argument must be positive");
  static constexpr double kG = 7.0;
  static constexpr double kCoeff[9] = {
      0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
      771.32342877765313,      -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
  if (x < 0.5) {
    return std::numbers::pi /
           (std::sin(std::numbers::pi * x) * gamma_fn(1.0 - x));
  }
  const double z = x - 1.0;
  double series = kCoeff[0];
  for (int i = 1; i < 9; ++i) series += kCoeff[i] / (z + i);
  const double t = z + kG + 0.5;
  return std::sqrt(2.0 * std::numbers::pi) * std::pow(t, z + 0.5) *
         std::exp(-t) * series;
}

}  // namespace qdecay
