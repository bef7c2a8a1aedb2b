// End-to-end consistency: stochastic streams reduced by the measurement
// pipeline must reproduce the generating model's parameters.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qdecay/qdecay.hpp"

using namespace qdecay;

TEST_CASE("pulsed stream -> histogram -> stretched fit closes the loop") {
  const double beta = 0.876;
  const double r = 1.0 / 194.4;
  PulsedExperimentConfig cfg;
  cfg.rep_period = 5000.0;
  cfg.n_pulses = 150000;
  cfg.init_p2 = 0.0;
  cfg.init_p3 = 1.0;
  cfg.r21 = 1.0;
  // beta * r^beta makes the shelf-exit survival exactly exp(-(rt)^beta).
  cfg.trapping = TrappingSpec::power_law(beta * std::pow(r, beta), 1.0 - beta);
  cfg.seed = 121;

  const PhotonStream stream = simulate_pulsed_trpl(cfg, 4);
  const DecayHistogram hist = tcspc_histogram(stream, cfg.rep_period, 2.0);
  const FitResult fit = fit_stretched(hist, 20.0, 5000.0);

  CHECK(fit.converged);
  CHECK(1.0 / fit.parameters.at("rate") == Catch::Approx(194.4).epsilon(0.04));
  CHECK(fit.parameters.at("beta") == Catch::Approx(beta).margin(0.02));
  CHECK(fit.derived.at("mean_lifetime") ==
        Catch::Approx(average_lifetime(r, beta)).epsilon(0.04));
}

TEST_CASE("cw stream -> correlogram -> g2 fit recovers the model rates") {
  CwExperimentConfig cfg;
  cfg.rates = {0.175, 1.0 / 0.93, 0.0015276, 0.002, 0.0025};
  cfg.duration = 1e8;
  cfg.detection_efficiency = 0.05;
  cfg.seed = 2;

  const PhotonStream stream = simulate_cw_stream(cfg, 4);
  REQUIRE(stream.timestamps.size() > 400000);
  const auto [a, b] = hbt_split(stream, 0.5, 1);
  const Correlogram cg = hbt_correlate(a, b, 400.0, 0.25, 4);
  const FitResult fit = fit_g2(cg);

  const G2Params expected = g2_params_from_rates(cfg.rates);
  CHECK(fit.converged);
  CHECK(fit.parameters.at("lambda1") ==
        Catch::Approx(expected.lambda1).epsilon(0.15));
  CHECK(fit.parameters.at("lambda2") ==
        Catch::Approx(expected.lambda2).epsilon(0.05));
  CHECK(fit.parameters.at("a") == Catch::Approx(expected.a).epsilon(0.10));

  // The correlogram itself should track the exact correlation function.
  double worst = 0.0;
  for (std::size_t k = 0; k < cg.lag_centers.size(); ++k) {
    const double t = std::fabs(cg.lag_centers[k]);
    if (t < 2.0) continue;  // skip the deepest dip bins (few counts)
    const double model = g2_exact(t, cfg.rates);
    const double sigma =
        std::sqrt(static_cast<double>(
            std::max<std::int64_t>(cg.raw_coincidences[k], 1))) /
        cg.normalization[k];
    worst = std::max(worst, std::fabs(cg.g2_values[k] - model) / sigma);
  }
  CHECK(worst < 6.0);  // no bin strays many sigma from the exact curve
}

TEST_CASE("fit report serializes and restores") {
  DecayHistogram h;
  h.bin_width = 1.0;
  rng::Xoshiro256 gen(9);
  for (int i = 0; i < 120; ++i) {
    h.bin_centers.push_back(i + 0.5);
    h.counts.push_back(
        rng::poisson(gen, 3000.0 * std::exp(-0.08 * (i + 0.5)) + 10.0));
  }
  const FitResult res = fit_exponential(h, 0.0, 120.0);
  const std::string bytes = io::format_histogram_csv(h);
  const FitReport rep = make_fit_report("trace.csv", bytes, "exponential", res);

  const nlohmann::json j = to_json(rep);
  CHECK(j.at("model") == "exponential");
  CHECK(j.at("input").at("path") == "trace.csv");
  CHECK(j.at("toolkit_version") == std::string(kVersion));
  CHECK(j.at("fit").at("converged").get<bool>());

  const FitReport back = fit_report_from_json(j);
  CHECK(back.input_hash == rep.input_hash);
  CHECK(back.result.parameters.at("rate") ==
        Catch::Approx(res.parameters.at("rate")));
  CHECK(back.result.reduced_chi_square ==
        Catch::Approx(res.reduced_chi_square));
  CHECK(back.result.window.first == res.window.first);
  CHECK(back.result.free_names == res.free_names);
}
