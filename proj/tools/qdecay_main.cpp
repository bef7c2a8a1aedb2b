// Command-line front end for the long-lifetime emitter toolkit.
//
// Subcommands:
//   lifetime   mean emission delay of the stretched decay law
//   eigen      closed-form eigenvalues / steady state of the rate matrix
//   g2-model   tabulate the analytic correlation function
//   simulate   stochastic photon-stream generation (pulsed or CW)
//   histogram  fold a timestamp stream into a TCSPC decay histogram
//   correlate  HBT cross-correlogram of a photon stream
//   fit        weighted least-squares fits (exponential / stretched / g2)
//   sweep      simulate+fit across a grid of trapping parameters
//
// Exit codes: 0 success; 2 invalid input, configuration, or model domain;
// 3 numerical failure (non-convergence, degeneracy).

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qdecay/qdecay.hpp"

namespace {

using namespace qdecay;

std::string format_sigma(double value, double sigma) {
  char buf[80];
  std::snprintf(buf, sizeof buf, "%.6g +- %.3g", value, sigma);
  return buf;
}

// ---------------------------------------------------------------------------
// lifetime

struct LifetimeArgs {
  double r_inv = 0.0;
  double beta = 0.0;
  bool json = false;
};

int cmd_lifetime(const LifetimeArgs& a) {
  if (!(a.r_inv > 0.0))
    throw model_error("lifetime: 1/r must be positive (ns)");
  const double tau = average_lifetime(1.0 / a.r_inv, a.beta);
  if (a.json) {
    nlohmann::json j{{"rate_inv_ns", a.r_inv},
                     {"beta", a.beta},
                     {"mean_lifetime_ns", tau}};
    std::printf("%s\n", j.dump(2).c_str());
  } else {
    std::printf("mean_lifetime_ns = %.4g\n", tau);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eigen

struct RateArgs {
  double r12 = 0.0, r21 = 1.0, r13 = 0.0, r31 = 0.0, r32 = 0.0;
  RateSet rates() const { return {r12, r21, r13, r31, r32}; }
};

void add_rate_flags(CLI::App* app, RateArgs& r) {
  app->add_option("--r12", r.r12, "excitation rate ground->bright (ns^-1)");
  app->add_option("--r21", r.r21, "emission rate bright->ground (ns^-1)");
  app->add_option("--r13", r.r13, "excitation rate ground->shelf (ns^-1)");
  app->add_option("--r31", r.r31, "decay rate shelf->ground (ns^-1)");
  app->add_option("--r32", r.r32, "trapping rate shelf->bright (ns^-1)");
}

int cmd_eigen(const RateArgs& ra, bool json) {
  const RateSet k = ra.rates();
  const auto exact = exact_eigenvalues(k);
  const auto approx = approx_eigenvalues(k);
  const auto pinf = steady_state(k);
  const auto coeff = approx_coefficients(k);
  if (json) {
    nlohmann::json j;
    j["eigenvalues_ns_inv"] = {{"exact", {exact[0], exact[1], exact[2]}},
                               {"approx", {approx[0], approx[1], approx[2]}}};
    j["decay_times_ns"] = {{"fast", 1.0 / exact[0]}, {"slow", 1.0 / exact[1]}};
    j["steady_state"] = {pinf[0], pinf[1], pinf[2]};
    j["expansion_coefficients"] = {coeff[0], coeff[1], coeff[2]};
    std::printf("%s\n", j.dump(2).c_str());
    return 0;
  }
  std::printf("eigenvalues_ns_inv (exact):  lambda1=%.10g lambda2=%.10g "
              "lambda3=0\n",
              exact[0], exact[1]);
  std::printf("eigenvalues_ns_inv (approx): lambda1=%.10g lambda2=%.10g "
              "lambda3=0\n",
              approx[0], approx[1]);
  std::printf("decay_times_ns: fast=%.6g slow=%.6g\n", 1.0 / exact[0],
              1.0 / exact[1]);
  std::printf("steady_state: p1=%.10g p2=%.10g p3=%.10g\n", pinf[0], pinf[1],
              pinf[2]);
  std::printf("bright_expansion: a21=%.10g a22=%.10g a23=%.10g\n", coeff[0],
              coeff[1], coeff[2]);
  return 0;
}

// ---------------------------------------------------------------------------
// g2-model

struct G2ModelArgs {
  RateArgs rates;
  bool have_rates = false;
  double lambda1 = 0.0, lambda2 = 0.0, a = -1.0;
  std::string model = "exact";
  double t_max = 500.0;
  double bin_width = 0.5;
  std::string output;
};

int cmd_g2_model(const G2ModelArgs& ga) {
  Correlogram c;
  const auto half = static_cast<std::int64_t>(
      std::llround(ga.t_max / ga.bin_width));
  if (half < 1) throw model_error("g2-model: t-max must exceed bin-width");
  const std::size_t nb = 2 * static_cast<std::size_t>(half);
  c.lag_centers.resize(nb);
  c.g2_values.resize(nb);
  c.raw_coincidences.assign(nb, 0);
  c.normalization.assign(nb, 0.0);

  std::optional<G2Params> params;
  std::optional<RateSet> rates;
  if (ga.have_rates) {
    rates = ga.rates.rates();
    if (ga.model == "approx") params = g2_params_from_rates(*rates);
    else if (ga.model != "exact")
      throw config_error("g2-model: --model must be exact or approx");
  } else {
    if (!(ga.lambda1 > 0.0) || !(ga.lambda2 > 0.0) || ga.a < 0.0)
      throw config_error(
          "g2-model: provide either rate flags (--r12 ...) or all of "
          "--lambda1, --lambda2, --a");
    params = G2Params{ga.lambda1, ga.lambda2, ga.a};
    params->validate();
  }
  for (std::size_t i = 0; i < nb; ++i) {
    const double lag =
        (static_cast<double>(i) - static_cast<double>(half) + 0.5) *
        ga.bin_width;
    c.lag_centers[i] = lag;
    c.g2_values[i] =
        params ? g2_approx(lag, *params) : g2_exact(std::fabs(lag), *rates);
  }
  const std::string csv = io::format_correlogram_csv(c);
  if (ga.output.empty()) {
    std::fputs(csv.c_str(), stdout);
  } else {
    io::write_file(ga.output, csv);
    std::printf("wrote %zu bins to %s\n", nb, ga.output.c_str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string config_path;
  std::string output_override;
  int workers = 1;
};

int cmd_simulate(const SimulateArgs& sa) {
  const io::Config cfg = io::Config::parse_file(sa.config_path);
  const std::string type = cfg.require_string("experiment", "type");
  const std::uint64_t seed = cfg.get_u64("experiment", "seed", 0);
  std::string output = sa.output_override.empty()
                           ? cfg.get_string("experiment", "output", "")
                           : sa.output_override;
  if (output.empty())
    throw config_error(
        "simulate: no output path ([experiment] output or --output)");

  if (type == "pulsed") {
    PulsedExperimentConfig pc;
    pc.rep_period = cfg.get_double("pulsed", "rep_period_ns", 1000.0);
    pc.n_pulses = cfg.get_u64("pulsed", "n_pulses", 0);
    if (pc.n_pulses == 0)
      throw config_error("simulate: [pulsed] n_pulses must be set and > 0");
    pc.init_p2 = cfg.get_double("pulsed", "init_p2", 1.0);
    pc.init_p3 = cfg.get_double("pulsed", "init_p3", 0.0);
    pc.r21 = cfg.get_double("pulsed", "r21", 1.0);
    pc.r31 = cfg.get_double("pulsed", "r31", 0.0);
    pc.trapping.r32_prime = cfg.get_double("pulsed", "r32_prime", 0.0);
    pc.trapping.alpha = cfg.get_double("pulsed", "alpha", 0.0);
    pc.t_min = cfg.get_double("pulsed", "t_min_ns", 0.01);
    pc.detection_efficiency =
        cfg.get_double("pulsed", "detection_efficiency", 1.0);
    pc.seed = seed;
    cfg.reject_unknown();
    pc.validate();
    const PhotonStream stream = simulate_pulsed_trpl(pc, sa.workers);
    io::write_timestamps(output, stream);
    std::printf("pulsed stream: %zu photons over %llu pulses (%.6g ns)\n",
                stream.timestamps.size(),
                static_cast<unsigned long long>(pc.n_pulses),
                stream.duration);
    if (pc.trapping.is_power_law() && pc.r31 == 0.0) {
      // With no competing shelf loss, the hazard r32' t^(-alpha) integrates
      // to a stretched-exponential emission law with r = (r32'/beta)^(1/beta).
      const double beta = 1.0 - pc.trapping.alpha;
      const double r = std::pow(pc.trapping.r32_prime / beta, 1.0 / beta);
      std::printf("effective stretched law: rate_ns_inv=%.6g (1/r=%.6g ns) "
                  "beta=%.6g mean_lifetime_ns=%.6g\n",
                  r, 1.0 / r, beta, average_lifetime(r, beta));
    } else if (pc.trapping.is_power_law()) {
      std::printf("power-law trapping (r32_prime=%.6g, alpha=%.6g) with "
                  "constant shelf loss r31=%.6g ns^-1: emission is not a pure "
                  "stretched law\n",
                  pc.trapping.r32_prime, pc.trapping.alpha, pc.r31);
    } else {
      std::printf("shelf rates: r31=%.6g ns^-1, r32=%.6g ns^-1\n", pc.r31,
                  pc.trapping.r32_prime);
    }
    std::printf("wrote %s\n", output.c_str());
    return 0;
  }
  if (type == "cw") {
    CwExperimentConfig cc;
    cc.rates.r12 = cfg.get_double("cw", "r12", 0.0);
    cc.rates.r21 = cfg.get_double("cw", "r21", 1.0);
    cc.rates.r13 = cfg.get_double("cw", "r13", 0.0);
    cc.rates.r31 = cfg.get_double("cw", "r31", 0.0);
    cc.rates.r32 = cfg.get_double("cw", "r32", 0.0);
    cc.duration = cfg.require_double("cw", "duration_ns");
    cc.segment_length = cfg.get_double("cw", "segment_length_ns", 1e6);
    cc.detection_efficiency =
        cfg.get_double("cw", "detection_efficiency", 1.0);
    cc.seed = seed;
    const std::string channels = cfg.get_string("cw", "channels", "merged");
    const double split_prob = cfg.get_double("cw", "split_prob", 0.5);
    const std::uint64_t split_seed = cfg.get_u64("cw", "split_seed", 1);
    cfg.reject_unknown();
    cc.validate();
    const PhotonStream stream = simulate_cw_stream(cc, sa.workers);
    if (channels == "split") {
      const auto [a, b] = hbt_split(stream, split_prob, split_seed);
      io::write_timestamps(output, a, b);
      std::printf("cw stream: %zu photons (A=%zu, B=%zu) over %.6g ns\n",
                  stream.timestamps.size(), a.timestamps.size(),
                  b.timestamps.size(), cc.duration);
    } else if (channels == "merged") {
      io::write_timestamps(output, stream);
      std::printf("cw stream: %zu photons over %.6g ns\n",
                  stream.timestamps.size(), cc.duration);
    } else {
      throw config_error("simulate: [cw] channels must be merged or split");
    }
    const auto lam = exact_eigenvalues(cc.rates);
    const auto pinf = steady_state(cc.rates);
    std::printf("decay_times_ns: fast=%.6g slow=%.6g\n", 1.0 / lam[0],
                1.0 / lam[1]);
    std::printf("steady_state: p1=%.6g p2=%.6g p3=%.6g; expected detected "
                "rate %.6g ns^-1\n",
                pinf[0], pinf[1], pinf[2],
                cc.detection_efficiency * cc.rates.r21 * pinf[1]);
    std::printf("wrote %s\n", output.c_str());
    return 0;
  }
  throw config_error("simulate: [experiment] type must be pulsed or cw");
}

// ---------------------------------------------------------------------------
// histogram

struct HistogramArgs {
  std::string input;
  double sync_period = 0.0;
  double bin_width = 1.0;
  std::string output;
};

int cmd_histogram(const HistogramArgs& ha) {
  const auto loaded = io::read_timestamps(ha.input);
  const DecayHistogram h =
      tcspc_histogram(loaded.merged, ha.sync_period, ha.bin_width);
  io::write_histogram_csv(ha.output, h);
  std::printf("histogram: %zu photons into %zu bins of %.6g ns; wrote %s\n",
              loaded.merged.timestamps.size(), h.bin_centers.size(),
              ha.bin_width, ha.output.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// correlate

struct CorrelateArgs {
  std::string input;
  std::string input_b;
  double max_lag = 500.0;
  double bin_width = 0.5;
  double split_prob = 0.5;
  std::uint64_t split_seed = 1;
  std::string output;
  int workers = 1;
};

int cmd_correlate(const CorrelateArgs& ca) {
  PhotonStream a, b;
  if (!ca.input_b.empty()) {
    a = io::read_timestamps(ca.input).merged;
    b = io::read_timestamps(ca.input_b).merged;
    const double t = std::max(a.duration, b.duration);
    a.duration = b.duration = t;
  } else {
    const auto loaded = io::read_timestamps(ca.input);
    if (loaded.has_channels) {
      a = loaded.channel_a;
      b = loaded.channel_b;
    } else {
      auto split = hbt_split(loaded.merged, ca.split_prob, ca.split_seed);
      a = std::move(split.first);
      b = std::move(split.second);
    }
  }
  const Correlogram c =
      hbt_correlate(a, b, ca.max_lag, ca.bin_width, ca.workers);
  io::write_correlogram_csv(ca.output, c);
  std::int64_t pairs = 0;
  for (auto v : c.raw_coincidences) pairs += v;
  std::printf("correlogram: %lld pairs (A=%zu, B=%zu photons) into %zu bins; "
              "wrote %s\n",
              static_cast<long long>(pairs), a.timestamps.size(),
              b.timestamps.size(), c.lag_centers.size(), ca.output.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string kind;
  std::string input;
  double window_lo = std::numeric_limits<double>::quiet_NaN();
  double window_hi = std::numeric_limits<double>::quiet_NaN();
  std::string report_path;
  bool free_scale = false;
  bool free_background = false;
};

void print_fit_row(const std::string& kind, const FitResult& r) {
  std::string row = kind + ":";
  for (const auto& [name, value] : r.parameters) {
    const auto it = r.uncertainties.find(name);
    char buf[96];
    if (it != r.uncertainties.end())
      std::snprintf(buf, sizeof buf, " %s=%.6g+-%.3g", name.c_str(), value,
                    it->second);
    else
      std::snprintf(buf, sizeof buf, " %s=%.6g", name.c_str(), value);
    row += buf;
  }
  for (const auto& [name, value] : r.derived) {
    const auto it = r.uncertainties.find(name);
    char buf[96];
    if (it != r.uncertainties.end())
      std::snprintf(buf, sizeof buf, " %s=%.6g+-%.3g", name.c_str(), value,
                    it->second);
    else
      std::snprintf(buf, sizeof buf, " %s=%.6g", name.c_str(), value);
    row += buf;
  }
  char tail[64];
  std::snprintf(tail, sizeof tail, " chi2_red=%.4g iterations=%d",
                r.reduced_chi_square, r.iterations);
  row += tail;
  std::printf("%s\n", row.c_str());
  for (const auto& w : r.warnings)
    std::printf("warning: %s\n", w.c_str());
}

void persist_report(const FitArgs& fa, const std::string& bytes,
                    const FitResult& result) {
  if (fa.report_path.empty()) return;
  const FitReport rep =
      make_fit_report(fa.input, bytes, fa.kind, result);
  io::write_file(fa.report_path, to_json(rep).dump(2) + "\n");
  std::printf("report written to %s\n", fa.report_path.c_str());
}

int cmd_fit(const FitArgs& fa) {
  const std::string bytes = io::read_file(fa.input);
  FitResult result;
  try {
    if (fa.kind == "exponential" || fa.kind == "stretched") {
      const DecayHistogram h = io::parse_histogram_csv(bytes, fa.input);
      double lo = fa.window_lo, hi = fa.window_hi;
      if (std::isnan(lo)) lo = fa.kind == "exponential" ? 0.0 : 20.0;
      if (std::isnan(hi))
        hi = fa.kind == "exponential" ? 10.0 : h.bin_centers.back();
      result = fa.kind == "exponential" ? fit_exponential(h, lo, hi)
                                        : fit_stretched(h, lo, hi);
    } else if (fa.kind == "g2") {
      const Correlogram c = io::parse_correlogram_csv(bytes, fa.input);
      G2FitOptions opt;
      opt.free_scale = fa.free_scale;
      opt.free_background = fa.free_background;
      result = fit_g2(c, opt);
    } else {
      throw config_error(
          "fit: --kind must be exponential, stretched, or g2");
    }
  } catch (const fit_convergence_error& e) {
    // Persist what the optimizer reached so the failure can be inspected.
    persist_report(fa, bytes, e.partial());
    throw;
  }
  print_fit_row(fa.kind, result);
  persist_report(fa, bytes, result);
  return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
  std::string config_path;
  std::string output;
  int workers = 1;
};

int cmd_sweep(const SweepArgs& sa) {
  const io::Config cfg = io::Config::parse_file(sa.config_path);
  const std::uint64_t count = cfg.get_u64("sweep", "count", 0);
  const std::uint64_t seed = cfg.get_u64("sweep", "seed", 0);
  double rp_start = 0.0, rp_stop = 0.0, al_start = 0.0, al_stop = 0.0;
  if (count > 0) {
    rp_start = cfg.require_double("sweep", "r32_prime_start");
    rp_stop = cfg.require_double("sweep", "r32_prime_stop");
    al_start = cfg.require_double("sweep", "alpha_start");
    al_stop = cfg.require_double("sweep", "alpha_stop");
    if (!(rp_start > 0.0) || !(rp_stop > 0.0))
      throw config_error("sweep: r32_prime bounds must be positive");
  } else {
    // Touch the grid keys so an empty sweep doesn't flag them as unknown.
    (void)cfg.get_double("sweep", "r32_prime_start", 0.0);
    (void)cfg.get_double("sweep", "r32_prime_stop", 0.0);
    (void)cfg.get_double("sweep", "alpha_start", 0.0);
    (void)cfg.get_double("sweep", "alpha_stop", 0.0);
  }

  PulsedExperimentConfig base;
  base.rep_period = cfg.get_double("pulsed", "rep_period_ns", 5000.0);
  base.n_pulses = cfg.get_u64("pulsed", "n_pulses", 200000);
  base.init_p2 = cfg.get_double("pulsed", "init_p2", 0.0);
  base.init_p3 = cfg.get_double("pulsed", "init_p3", 1.0);
  base.r21 = cfg.get_double("pulsed", "r21", 1.0);
  base.r31 = cfg.get_double("pulsed", "r31", 0.0);
  base.t_min = cfg.get_double("pulsed", "t_min_ns", 0.01);
  base.detection_efficiency =
      cfg.get_double("pulsed", "detection_efficiency", 1.0);
  const double bin_width = cfg.get_double("histogram", "bin_width_ns", 1.0);
  const double win_lo = cfg.get_double("fit", "window_lo_ns", 20.0);
  const double win_hi =
      cfg.get_double("fit", "window_hi_ns", base.rep_period);
  cfg.reject_unknown();

  std::string table = "index,r32_prime,alpha,rate_inv_ns,beta,"
                      "mean_lifetime_ns,status\n";
  std::vector<double> lifetimes;
  std::vector<double> betas;
  std::size_t failures = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    const double frac =
        count > 1 ? static_cast<double>(i) / static_cast<double>(count - 1)
                  : 0.0;
    // Geometric in the prefactor (it spans decades), linear in alpha.
    const double rp = rp_start * std::pow(rp_stop / rp_start, frac);
    const double al = al_start + (al_stop - al_start) * frac;
    char row[256];
    try {
      PulsedExperimentConfig pc = base;
      pc.trapping = TrappingSpec::power_law(rp, al);
      pc.seed = seed + i;  // single-point sweeps compose with `simulate`
      pc.validate();
      const PhotonStream stream = simulate_pulsed_trpl(pc, sa.workers);
      const DecayHistogram h =
          tcspc_histogram(stream, pc.rep_period, bin_width);
      const FitResult fr = fit_stretched(h, win_lo, win_hi);
      const double rate = fr.parameters.at("rate");
      const double beta = fr.parameters.at("beta");
      const double tau = fr.derived.at("mean_lifetime");
      std::snprintf(row, sizeof row, "%llu,%.10g,%.10g,%.10g,%.10g,%.10g,ok\n",
                    static_cast<unsigned long long>(i), rp, al, 1.0 / rate,
                    beta, tau);
      lifetimes.push_back(tau);
      betas.push_back(beta);
    } catch (const std::exception& e) {
      ++failures;
      std::string msg = e.what();
      for (char& c : msg)
        if (c == ',' || c == '\n') c = ';';
      std::snprintf(row, sizeof row, "%llu,%.10g,%.10g,,,,error: %s\n",
                    static_cast<unsigned long long>(i), rp, al, msg.c_str());
      lifetimes.clear();  // a failed point breaks the trend statement
    }
    table += row;
  }
  io::write_file(sa.output, table);
  std::printf("sweep: %llu points (%zu failed); wrote %s\n",
              static_cast<unsigned long long>(count), failures,
              sa.output.c_str());
  if (lifetimes.size() == count && count > 1) {
    bool decreasing = true, increasing_beta = true;
    for (std::size_t i = 1; i < lifetimes.size(); ++i) {
      if (!(lifetimes[i] < lifetimes[i - 1])) decreasing = false;
      if (!(betas[i] > betas[i - 1])) increasing_beta = false;
    }
    std::printf("mean_lifetime trend: %s; beta trend: %s\n",
                decreasing ? "monotonically decreasing" : "not monotonic",
                increasing_beta ? "monotonically increasing"
                                : "not monotonic");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-level emitter toolkit: analytic decay laws, stochastic "
               "photon streams, TCSPC/HBT statistics, and model fitting"};
  app.require_subcommand(1);
  app.set_version_flag("--version", qdecay::kVersion);

  LifetimeArgs la;
  auto* lifetime = app.add_subcommand(
      "lifetime", "mean emission delay of the stretched decay law");
  lifetime->add_option("r_inv", la.r_inv, "1/r in ns")->required();
  lifetime->add_option("beta", la.beta, "stretch exponent in (0,1]")
      ->required();
  lifetime->add_flag("--json", la.json, "machine-readable output");

  RateArgs ea;
  bool eigen_json = false;
  auto* eigen = app.add_subcommand(
      "eigen", "eigenvalues and steady state of the three-level rate matrix");
  add_rate_flags(eigen, ea);
  eigen->add_flag("--json", eigen_json, "machine-readable output");

  G2ModelArgs ga;
  auto* g2model = app.add_subcommand(
      "g2-model", "tabulate the analytic correlation function as CSV");
  add_rate_flags(g2model, ga.rates);
  g2model->add_option("--lambda1", ga.lambda1, "fast rate (ns^-1)");
  g2model->add_option("--lambda2", ga.lambda2, "slow rate (ns^-1)");
  g2model->add_option("--a", ga.a, "bunching amplitude");
  g2model->add_option("--model", ga.model,
                      "exact | approx (with rate flags; default exact)");
  g2model->add_option("--t-max", ga.t_max, "maximum |lag| in ns");
  g2model->add_option("--bin-width", ga.bin_width, "lag bin width in ns");
  g2model->add_option("--output", ga.output, "CSV path (stdout if omitted)");

  SimulateArgs sa;
  auto* simulate =
      app.add_subcommand("simulate", "generate a stochastic photon stream");
  simulate->add_option("--config", sa.config_path, "experiment config file")
      ->required();
  simulate->add_option("--output", sa.output_override,
                       "timestamp file (overrides config)");
  simulate->add_option("--workers", sa.workers,
                       "max parallel workers (output is identical for any "
                       "value)");

  HistogramArgs ha;
  auto* histogram = app.add_subcommand(
      "histogram", "fold a timestamp stream into a decay histogram");
  histogram->add_option("--input", ha.input, "timestamp file")->required();
  histogram->add_option("--sync-period", ha.sync_period, "pulse period (ns)")
      ->required();
  histogram->add_option("--bin-width", ha.bin_width, "bin width (ns)");
  histogram->add_option("--output", ha.output, "histogram CSV")->required();

  CorrelateArgs ca;
  auto* correlate = app.add_subcommand(
      "correlate", "HBT cross-correlogram of photon streams");
  correlate->add_option("--input", ca.input, "timestamp file (channel A, or "
                        "both channels, or unsplit)")->required();
  correlate->add_option("--input-b", ca.input_b,
                        "timestamp file for channel B");
  correlate->add_option("--max-lag", ca.max_lag, "maximum |lag| (ns)");
  correlate->add_option("--bin-width", ca.bin_width, "lag bin width (ns)");
  correlate->add_option("--split-prob", ca.split_prob,
                        "software beamsplitter probability for unsplit input");
  correlate->add_option("--split-seed", ca.split_seed,
                        "software beamsplitter seed");
  correlate->add_option("--output", ca.output, "correlogram CSV")->required();
  correlate->add_option("--workers", ca.workers, "max parallel workers");

  FitArgs fa;
  auto* fit = app.add_subcommand(
      "fit", "least-squares fit of a histogram or correlogram");
  fit->add_option("--kind", fa.kind, "exponential | stretched | g2")
      ->required();
  fit->add_option("--input", fa.input, "histogram or correlogram CSV")
      ->required();
  fit->add_option("--window-lo", fa.window_lo, "fit window start (ns)");
  fit->add_option("--window-hi", fa.window_hi, "fit window end (ns)");
  fit->add_option("--report", fa.report_path, "write a JSON fit report here");
  fit->add_flag("--free-scale", fa.free_scale,
                "g2 only: fit an overall scale factor");
  fit->add_flag("--free-background", fa.free_background,
                "g2 only: fit an additive background");

  SweepArgs swa;
  auto* sweep = app.add_subcommand(
      "sweep", "simulate and fit across a grid of trapping parameters");
  sweep->add_option("--config", swa.config_path, "sweep config file")
      ->required();
  sweep->add_option("--output", swa.output, "result table CSV")->required();
  sweep->add_option("--workers", swa.workers, "max parallel workers");

  try {
    app.parse(argc, argv);
    if (lifetime->parsed()) return cmd_lifetime(la);
    if (eigen->parsed()) return cmd_eigen(ea, eigen_json);
    if (g2model->parsed()) {
      ga.have_rates = g2model->count("--r12") || g2model->count("--r21") ||
                      g2model->count("--r13") || g2model->count("--r31") ||
                      g2model->count("--r32");
      return cmd_g2_model(ga);
    }
    if (simulate->parsed()) return cmd_simulate(sa);
    if (histogram->parsed()) return cmd_histogram(ha);
    if (correlate->parsed()) return cmd_correlate(ca);
    if (fit->parsed()) return cmd_fit(fa);
    if (sweep->parsed()) return cmd_sweep(swa);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit 0; bad usage exits 2
  } catch (const qdecay::numeric_error& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const qdecay::model_error& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return 2;
  } catch (const qdecay::config_error& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
