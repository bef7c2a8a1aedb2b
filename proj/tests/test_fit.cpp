#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "qdecay/fit.hpp"
#include "qdecay/rng.hpp"

using namespace qdecay;

namespace {

DecayHistogram poisson_histogram(const std::function<double(double)>& mean_fn,
                                 double bin_width, std::size_t n_bins,
                                 std::uint64_t seed) {
  DecayHistogram h;
  h.bin_width = bin_width;
  rng::Xoshiro256 gen(seed);
  for (std::size_t i = 0; i < n_bins; ++i) {
    const double t = (static_cast<double>(i) + 0.5) * bin_width;
    h.bin_centers.push_back(t);
    h.counts.push_back(rng::poisson(gen, mean_fn(t)));
  }
  return h;
}

}  // namespace

TEST_CASE("engine solves a linear model exactly") {
  FitData d;
  for (int i = 0; i < 30; ++i) {
    const double x = 0.5 * i;
    d.x.push_back(x);
    d.y.push_back(3.0 - 0.7 * x);
    d.w.push_back(1.0);
  }
  std::vector<Parameter> params{{"offset", 1.0, Transform::none},
                                {"slope", 0.0, Transform::none}};
  ModelFn model = [](double x, const std::vector<double>& p) {
    return p[0] + p[1] * x;
  };
  const FitResult res = damped_least_squares(model, d, params);
  CHECK(res.converged);
  CHECK(res.parameters.at("offset") == Catch::Approx(3.0).margin(1e-9));
  CHECK(res.parameters.at("slope") == Catch::Approx(-0.7).margin(1e-9));
  CHECK(res.reduced_chi_square < 1e-15);
  CHECK(res.window.first == 0.0);
  CHECK(res.window.second == Catch::Approx(14.5));
  CHECK(res.free_names.size() == 2);
}

TEST_CASE("engine names non-identifiable directions instead of failing") {
  FitData d;
  for (int i = 0; i < 20; ++i) {
    d.x.push_back(i);
    d.y.push_back(5.0);
    d.w.push_back(1.0);
  }
  // Only the sum p0 + p1 is determined.
  std::vector<Parameter> params{{"first", 2.0, Transform::none},
                                {"second", 2.0, Transform::none}};
  ModelFn model = [](double, const std::vector<double>& p) {
    return p[0] + p[1];
  };
  const FitResult res = damped_least_squares(model, d, params);
  CHECK(res.converged);
  CHECK(res.parameters.at("first") + res.parameters.at("second") ==
        Catch::Approx(5.0).margin(1e-9));
  REQUIRE(!res.warnings.empty());
  CHECK(res.warnings.front().find("non-identifiable") != std::string::npos);
}

TEST_CASE("engine reports non-convergence with the partial state") {
  FitData d;
  for (int i = 1; i <= 40; ++i) {
    const double x = 0.25 * i;
    d.x.push_back(x);
    d.y.push_back(10.0 * std::exp(-0.9 * x));
    d.w.push_back(1.0);
  }
  std::vector<Parameter> params{{"amplitude", 1.0, Transform::positive},
                                {"rate", 5.0, Transform::positive}};
  ModelFn model = [](double x, const std::vector<double>& p) {
    return p[0] * std::exp(-p[1] * x);
  };
  FitOptions opt;
  opt.max_iterations = 1;  // far too few from this poor start
  bool thrown = false;
  try {
    damped_least_squares(model, d, params, opt);
  } catch (const fit_convergence_error& e) {
    thrown = true;
    CHECK(e.partial().iterations == 1);
    CHECK(!e.partial().converged);
    CHECK(e.partial().parameters.count("rate") == 1);
  }
  CHECK(thrown);
  // And with enough iterations the same problem is easy.
  const FitResult ok = damped_least_squares(model, d, params);
  CHECK(ok.parameters.at("rate") == Catch::Approx(0.9).margin(1e-6));
}

TEST_CASE("engine validates its inputs") {
  FitData d;
  d.x = {1.0, 2.0};
  d.y = {1.0};
  d.w = {1.0, 1.0};
  std::vector<Parameter> params{{"p", 1.0, Transform::none}};
  ModelFn model = [](double, const std::vector<double>& p) { return p[0]; };
  CHECK_THROWS_AS(damped_least_squares(model, d, params), model_error);
  d.y = {1.0, 2.0};
  std::vector<Parameter> all_fixed{{"p", 1.0, Transform::none, true}};
  CHECK_THROWS_AS(damped_least_squares(model, d, all_fixed), model_error);
}

TEST_CASE("exponential fit recovers a noisy decay") {
  const double amp = 4000.0, rate = 0.21, bg = 25.0;
  const auto h = poisson_histogram(
      [&](double t) { return amp * std::exp(-rate * t) + bg; }, 0.25, 200,
      2024);
  const FitResult res = fit_exponential(h, 0.0, 50.0);
  CHECK(res.converged);
  const double s_rate = res.uncertainties.at("rate");
  CHECK(s_rate > 0.0);
  CHECK(res.parameters.at("rate") == Catch::Approx(rate).margin(4.0 * s_rate));
  CHECK(res.parameters.at("background") == Catch::Approx(bg).margin(10.0));
  CHECK(res.derived.at("lifetime") ==
        Catch::Approx(1.0 / res.parameters.at("rate")).epsilon(1e-12));
  // Poisson weights were used, so chi2/dof should sit near one.
  CHECK(res.reduced_chi_square == Catch::Approx(1.0).margin(0.25));
}

TEST_CASE("exponential fit needs a populated window") {
  DecayHistogram h;
  h.bin_width = 1.0;
  for (int i = 0; i < 30; ++i) {
    h.bin_centers.push_back(i + 0.5);
    h.counts.push_back(0);
  }
  h.counts[2] = 5;
  CHECK_THROWS_AS(fit_exponential(h, 0.0, 30.0), model_error);
}

TEST_CASE("stretched fit recovers the long-tail parameters") {
  const double r = 1.0 / 194.4, beta = 0.876, amp = 12000.0;
  StretchedDecayParams p{amp, r, beta};
  const auto h = poisson_histogram(
      [&](double t) { return stretched_intensity(t, p); }, 1.0, 4000, 777);
  std::int64_t total = 0;
  for (auto c : h.counts) total += c;
  REQUIRE(total > 1000000);  // enough statistics for tight recovery

  const FitResult res = fit_stretched(h, 20.0, 4000.0);
  CHECK(res.converged);
  CHECK(1.0 / res.parameters.at("rate") == Catch::Approx(194.4).epsilon(0.05));
  CHECK(res.parameters.at("beta") == Catch::Approx(beta).margin(0.02));
  CHECK(res.derived.at("mean_lifetime") ==
        Catch::Approx(207.689).epsilon(0.05));
  CHECK(res.uncertainties.at("mean_lifetime") > 0.0);
  // The derived lifetime must be the closed-form map of the fitted pair.
  CHECK(res.derived.at("mean_lifetime") ==
        average_lifetime(res.parameters.at("rate"),
                         res.parameters.at("beta")));
}

TEST_CASE("stretched fit rejects a window touching zero") {
  DecayHistogram h;
  h.bin_width = 1.0;
  for (int i = 0; i < 50; ++i) {
    h.bin_centers.push_back(i + 0.5);
    h.counts.push_back(100);
  }
  CHECK_THROWS_AS(fit_stretched(h, 0.0, 50.0), model_error);
  CHECK_THROWS_AS(fit_stretched(h, 40.0, 45.0), model_error);  // < 20 bins
}

TEST_CASE("stretched fit of a plain exponential pushes beta to one") {
  const auto h = poisson_histogram(
      [&](double t) { return 5000.0 * std::exp(-t / 150.0); }, 2.0, 1500,
      31415);
  const FitResult res = fit_stretched(h, 10.0, 3000.0);
  CHECK(res.converged);
  CHECK(res.parameters.at("beta") > 0.97);
  CHECK(res.derived.at("mean_lifetime") == Catch::Approx(150.0).epsilon(0.05));
}

TEST_CASE("correlation fit recovers noiseless model parameters") {
  const G2Params truth{1.0 / 0.8, 1.0 / 172.0, 0.292};
  Correlogram cg;
  const double width = 2.0;
  const int half = 300;
  for (int k = -half; k < half; ++k) {
    const double lag = (k + 0.5) * width;
    cg.lag_centers.push_back(lag);
    cg.g2_values.push_back(g2_approx(lag, truth));
  }
  const FitResult res = fit_g2(cg);
  CHECK(res.converged);
  CHECK(res.parameters.at("lambda1") ==
        Catch::Approx(truth.lambda1).epsilon(1e-6));
  CHECK(res.parameters.at("lambda2") ==
        Catch::Approx(truth.lambda2).epsilon(1e-6));
  CHECK(res.parameters.at("a") == Catch::Approx(truth.a).epsilon(1e-6));
  CHECK(res.derived.at("antibunching_time") ==
        Catch::Approx(0.8).epsilon(1e-6));
  CHECK(res.derived.at("bunching_time") == Catch::Approx(172.0).epsilon(1e-6));
  // Scale and background stayed fixed at their defaults.
  CHECK(res.parameters.at("scale") == 1.0);
  CHECK(res.parameters.at("background") == 0.0);
  CHECK(res.uncertainties.count("scale") == 0);
  CHECK(res.derived.at("g2_zero") == 0.0);
}

TEST_CASE("correlation fit can free the background") {
  const G2Params truth{0.9, 0.02, 0.4};
  Correlogram cg;
  for (int k = -400; k < 400; ++k) {
    const double lag = (k + 0.5) * 1.0;
    cg.lag_centers.push_back(lag);
    cg.g2_values.push_back(g2_approx(lag, truth) * 0.97 + 0.05);
  }
  G2FitOptions opt;
  opt.free_scale = true;
  opt.free_background = true;
  const FitResult res = fit_g2(cg, opt);
  CHECK(res.converged);
  CHECK(res.parameters.at("scale") == Catch::Approx(0.97).margin(1e-4));
  CHECK(res.parameters.at("background") == Catch::Approx(0.05).margin(1e-4));
  CHECK(res.derived.at("g2_zero") ==
        Catch::Approx(res.parameters.at("background")));
  CHECK(res.uncertainties.count("scale") == 1);
}

TEST_CASE("correlation fit uses Poisson weights from raw counts") {
  const G2Params truth{1.1, 0.015, 0.35};
  Correlogram cg;
  rng::Xoshiro256 gen(55);
  for (int k = -250; k < 250; ++k) {
    const double lag = (k + 0.5) * 2.0;
    const double norm = 5e4;
    const double g2 = g2_approx(lag, truth);
    const auto raw = rng::poisson(gen, norm * g2);
    cg.lag_centers.push_back(lag);
    cg.raw_coincidences.push_back(raw);
    cg.normalization.push_back(norm);
    cg.g2_values.push_back(static_cast<double>(raw) / norm);
  }
  const FitResult res = fit_g2(cg);
  CHECK(res.converged);
  CHECK(res.parameters.at("lambda1") ==
        Catch::Approx(truth.lambda1).epsilon(0.05));
  CHECK(res.parameters.at("lambda2") ==
        Catch::Approx(truth.lambda2).epsilon(0.05));
  CHECK(res.reduced_chi_square == Catch::Approx(1.0).margin(0.25));
}

TEST_CASE("correlation fit validates the bin count") {
  Correlogram cg;
  for (int k = -3; k < 3; ++k) {
    cg.lag_centers.push_back(k + 0.5);
    cg.g2_values.push_back(1.0);
  }
  CHECK_THROWS_AS(fit_g2(cg), model_error);
}
