#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qdecay/rate_matrix.hpp"

using namespace qdecay;

namespace {

// The worked reference: slow shelving against a ~1 ns optical cycle.
RateSet reference_rates() {
  return {0.175, 1.0 / 0.93, 0.0015276, 0.002, 0.0025};
}

Eigen::Matrix3d to_eigen(const Mat3& m) {
  Eigen::Matrix3d out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out(i, j) = m[i][j];
  return out;
}

RateSet random_rates(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> expo(-3.0, 1.0);
  auto draw = [&] { return std::pow(10.0, expo(gen)); };
  RateSet k;
  k.r12 = draw();
  k.r21 = draw();
  k.r13 = draw();
  k.r31 = draw();
  k.r32 = draw();
  return k;
}

}  // namespace

TEST_CASE("closed-form eigenvalues for the reference rates") {
  const auto lam = exact_eigenvalues(reference_rates());
  CHECK(1.0 / lam[0] == Catch::Approx(0.7996925561719025).epsilon(1e-13));
  CHECK(1.0 / lam[1] == Catch::Approx(171.9438663895332).epsilon(1e-13));
  CHECK(lam[2] == 0.0);
}

TEST_CASE("closed-form eigenvalues match a general eigensolver") {
  std::mt19937_64 gen(20260819);
  int checked = 0;
  while (checked < 200) {
    const RateSet k = random_rates(gen);
    const Eigen::Matrix3d m = to_eigen(build_rate_matrix(k));
    Eigen::EigenSolver<Eigen::Matrix3d> solver(m);
    std::array<double, 3> ref{};
    bool complex_pair = false;
    for (int i = 0; i < 3; ++i) {
      const auto ev = solver.eigenvalues()(i);
      if (std::fabs(ev.imag()) > 1e-12 * std::fabs(ev.real()) + 1e-300)
        complex_pair = true;
      ref[i] = ev.real();
    }
    if (complex_pair) {
      CHECK_THROWS_AS(exact_eigenvalues(k), model_error);
      continue;
    }
    std::sort(ref.begin(), ref.end(), std::greater<>());
    const auto lam = exact_eigenvalues(k);
    CHECK(lam[0] == Catch::Approx(ref[0]).epsilon(1e-10));
    CHECK(lam[1] == Catch::Approx(ref[1]).epsilon(1e-10));
    CHECK(std::fabs(ref[2]) <= 1e-12 * lam[0]);
    ++checked;
  }
}

TEST_CASE("eigenvalues with strong shelf coupling are complex") {
  // Large r13 against r21 makes the discriminant negative.
  RateSet k{0.0, 1.0, 100.0, 0.0, 100.0};
  CHECK_THROWS_AS(exact_eigenvalues(k), model_error);
}

TEST_CASE("steady state is the normalized null vector") {
  std::mt19937_64 gen(77);
  for (int trial = 0; trial < 200; ++trial) {
    const RateSet k = random_rates(gen);
    const Vec3 p = steady_state(k);
    CHECK(p[0] + p[1] + p[2] == Catch::Approx(1.0).epsilon(1e-14));
    for (double v : p) CHECK(v >= 0.0);
    const Mat3 m = build_rate_matrix(k);
    double scale = 0.0;
    for (int i = 0; i < 3; ++i) {
      double resid = 0.0;
      for (int j = 0; j < 3; ++j) {
        resid += m[i][j] * p[j];
        scale = std::max(scale, std::fabs(m[i][j]));
      }
      CHECK(std::fabs(resid) <= 1e-13 * scale);
    }
  }
}

TEST_CASE("steady state for the reference rates") {
  const Vec3 p = steady_state(reference_rates());
  CHECK(p[1] == Catch::Approx(0.10880812716600093).epsilon(1e-13));
}

TEST_CASE("steady state limits") {
  // Shelf fully disconnected: two-level equilibrium, p3 exactly zero.
  RateSet k{0.3, 1.2, 0.0, 0.0, 0.0};
  const Vec3 p = steady_state(k);
  CHECK(p[1] == 0.3 / 1.5);
  CHECK(p[2] == 0.0);
  // Shelf reachable only through decay paths (r13 = 0): never occupied.
  RateSet k2{0.3, 1.2, 0.0, 0.01, 0.02};
  CHECK(steady_state(k2)[2] == 0.0);
  // No excitation at all: equilibrium undefined.
  RateSet k3{0.0, 1.0, 0.0, 0.1, 0.1};
  CHECK_THROWS_AS(steady_state(k3), model_error);
}

TEST_CASE("rate matrix conserves probability") {
  // Dyadic rates keep the column sums exactly zero in floating point.
  RateSet k{0.25, 1.5, 0.125, 0.0625, 0.5};
  const Mat3 m = build_rate_matrix(k);
  for (int j = 0; j < 3; ++j)
    CHECK(m[0][j] + m[1][j] + m[2][j] == 0.0);
}

TEST_CASE("low-rate eigenvalue approximation in its regime") {
  const RateSet k = reference_rates();
  const auto exact = exact_eigenvalues(k);
  const auto approx = approx_eigenvalues(k);
  CHECK(approx[0] == Catch::Approx(exact[0]).epsilon(1e-3));
  CHECK(approx[1] == Catch::Approx(exact[1]).epsilon(1e-3));
  CHECK(approx[0] == k.r12 + k.r21);
}

TEST_CASE("modal expansion reproduces the dynamics") {
  const RateSet k = reference_rates();
  const EigenDecomposition d = decompose(k);
  const Mat3 m = build_rate_matrix(k);

  // Initial condition recovered.
  const Vec3 p0 = populations(d, 0.0);
  CHECK(p0[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(p0[1] == Catch::Approx(0.0).margin(1e-12));
  CHECK(p0[2] == Catch::Approx(0.0).margin(1e-12));

  for (double t : {0.1, 1.0, 20.0, 300.0}) {
    const Vec3 p = populations(d, t);
    CHECK(p[0] + p[1] + p[2] == Catch::Approx(1.0).margin(1e-12));
    // dp/dt = -M p, component-wise.
    for (int i = 0; i < 3; ++i) {
      const double dpi = oracles::derivative(
          [&, i](double s) { return populations(d, s)[i]; }, t, 1e-3);
      double rhs = 0.0;
      for (int j = 0; j < 3; ++j) rhs -= m[i][j] * p[j];
      CHECK(dpi == Catch::Approx(rhs).margin(1e-9));
    }
  }

  // Long-time limit is the steady state.
  const Vec3 pinf = steady_state(k);
  const Vec3 plate = populations(d, 1e5);
  for (int i = 0; i < 3; ++i)
    CHECK(plate[i] == Catch::Approx(pinf[i]).margin(1e-12));
}

TEST_CASE("decompose rejects degenerate spectra") {
  // r13 = 4, r21 = 1, r32 = 1 collapses the discriminant to zero.
  RateSet k{0.0, 1.0, 4.0, 0.0, 1.0};
  CHECK_THROWS_AS(decompose(k), numeric_error);
}

TEST_CASE("low-rate expansion weights") {
  const RateSet k = reference_rates();
  const auto a = approx_coefficients(k);
  // p2(0) = 0 by construction.
  CHECK(a[0] + a[1] + a[2] == 0.0);
  // The constant term approximates the steady-state occupancy; its
  // denominator drops one second-order product, so the agreement is at the
  // few-1e-4 level, not exact.
  const double p2inf = steady_state(k)[1];
  CHECK(a[2] == Catch::Approx(p2inf).epsilon(1e-3));
  CHECK(a[2] != p2inf);
  // And the exact modal weights are nearby (first-order in the shelf rates;
  // the slow-mode weight is the least accurate, at ~0.6% here).
  const EigenDecomposition d = decompose(k);
  CHECK(a[0] == Catch::Approx(d.coeff[1][0]).epsilon(2e-2));
  CHECK(a[1] == Catch::Approx(d.coeff[1][1]).epsilon(2e-2));
  CHECK(a[2] == Catch::Approx(d.coeff[1][2]).epsilon(2e-2));
}

TEST_CASE("biexponential correlation model") {
  G2Params g{1.0 / 0.8, 1.0 / 172.0, 0.25};
  CHECK(g2_approx(0.0, g) == 0.0);
  CHECK(g2_approx(0.5, g) ==
        Catch::Approx(0.580197525456623).epsilon(1e-14));
  CHECK(g2_approx(2.0, g) == Catch::Approx(1.14450361068565).epsilon(1e-14));
  CHECK(g2_approx(10.0, g) == Catch::Approx(1.23587491281781).epsilon(1e-14));
  CHECK(g2_approx(172.0, g) ==
        Catch::Approx(1.09196986029286).epsilon(1e-14));
  // Even in t.
  CHECK(g2_approx(-2.0, g) == g2_approx(2.0, g));
  // Far past the slow timescale the correlation is flat at one.
  CHECK(g2_approx(50.0 / g.lambda2, g) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("correlation model parameter validation") {
  CHECK_THROWS_AS((G2Params{0.1, 0.5, 0.2}.validate()), model_error);
  CHECK_THROWS_AS((G2Params{1.0, 1.0, 0.2}.validate()), model_error);
  CHECK_THROWS_AS((G2Params{1.0, 0.1, -0.1}.validate()), model_error);
  CHECK_NOTHROW((G2Params{1.0, 0.1, 0.0}.validate()));
}

TEST_CASE("rates map onto the correlation model") {
  const RateSet k = reference_rates();
  const G2Params g = g2_params_from_rates(k);
  CHECK(g.lambda1 == k.r12 + k.r21);
  CHECK(g.a == Catch::Approx(0.2919515516376406).epsilon(1e-14));
  // Without a shelf depletion path the bunching amplitude diverges.
  RateSet bad = k;
  bad.r31 = bad.r32 = 0.0;
  CHECK_THROWS_AS(g2_params_from_rates(bad), model_error);
}

TEST_CASE("exact correlation function") {
  const RateSet k = reference_rates();
  CHECK(g2_exact(0.0, k) == 0.0);
  CHECK(g2_exact(0.5, k) == Catch::Approx(0.59768689003358).epsilon(1e-12));
  CHECK(g2_exact(2.0, k) == Catch::Approx(1.17860259879023).epsilon(1e-12));
  CHECK(g2_exact(50.0, k) == Catch::Approx(1.21496379229236).epsilon(1e-12));
  CHECK(g2_exact(400.0, k) == Catch::Approx(1.02807618104614).epsilon(1e-12));
  // Long-time limit.
  const auto lam = exact_eigenvalues(k);
  CHECK(g2_exact(50.0 / lam[1], k) == Catch::Approx(1.0).margin(1e-6));
  CHECK_THROWS_AS(g2_exact(-1.0, k), model_error);
}

TEST_CASE("exact correlation of a pure two-level cycle") {
  RateSet k{0.4, 1.6, 0.0, 0.0, 0.0};
  CHECK(g2_exact(0.0, k) == 0.0);
  CHECK(g2_exact(1.0, k) ==
        Catch::Approx(1.0 - std::exp(-2.0)).epsilon(1e-14));
}

TEST_CASE("exact and approximate correlation agree in the low-rate regime") {
  const RateSet k = reference_rates();
  const G2Params g = g2_params_from_rates(k);
  for (double t : {0.5, 2.0, 50.0, 400.0}) {
    CHECK(g2_approx(t, g) == Catch::Approx(g2_exact(t, k)).epsilon(5e-3));
  }
}
