// Drives the installed command-line binary end to end through temp files.
// The binary path arrives in the QDECAY_CLI environment variable.

#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "qdecay/io.hpp"
#include "qdecay/report.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* p = std::getenv("QDECAY_CLI");
  REQUIRE(p != nullptr);
  return p;
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / name;
}

RunResult run(const std::string& args) {
  const fs::path out = temp_file("qdecay_cli_stdout.txt");
  const fs::path err = temp_file("qdecay_cli_stderr.txt");
  const std::string cmd = cli_path() + " " + args + " > " + out.string() +
                          " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = qdecay::io::read_file(out.string());
  r.err = qdecay::io::read_file(err.string());
  return r;
}

}  // namespace

TEST_CASE("lifetime command") {
  const RunResult r = run("lifetime 194.4 0.876");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("207.7") != std::string::npos);

  const RunResult j = run("lifetime 194.4 0.876 --json");
  CHECK(j.exit_code == 0);
  const auto parsed = nlohmann::json::parse(j.out);
  CHECK(parsed.at("mean_lifetime_ns").get<double>() ==
        Catch::Approx(207.6890934759556).epsilon(1e-12));
}

TEST_CASE("lifetime command rejects bad arguments") {
  CHECK(run("lifetime 194.4 1.5").exit_code == 2);   // beta out of range
  CHECK(run("lifetime -5 0.9").exit_code == 2);      // negative time
  CHECK(run("frobnicate").exit_code == 2);           // unknown subcommand
  CHECK(run("").exit_code == 2);                     // missing subcommand
  CHECK(run("--version").exit_code == 0);
  CHECK(run("--help").exit_code == 0);
}

TEST_CASE("eigen command") {
  const RunResult r =
      run("eigen --r12 0.175 --r21 1.0752688172043012 --r13 0.0015276 "
          "--r31 0.002 --r32 0.0025 --json");
  CHECK(r.exit_code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("decay_times_ns").at("fast").get<double>() ==
        Catch::Approx(0.7996925561719025).epsilon(1e-12));
  CHECK(j.at("decay_times_ns").at("slow").get<double>() ==
        Catch::Approx(171.9438663895332).epsilon(1e-12));
  CHECK(j.at("steady_state")[1].get<double>() ==
        Catch::Approx(0.10880812716600093).epsilon(1e-12));
}

TEST_CASE("g2-model command produces a fittable correlogram") {
  const fs::path csv = temp_file("qdecay_cli_g2model.csv");
  const RunResult r = run("g2-model --lambda1 1.25 --lambda2 0.0058 --a 0.29 "
                          "--t-max 400 --bin-width 0.5 --output " +
                          csv.string());
  REQUIRE(r.exit_code == 0);
  const auto cg = qdecay::io::read_correlogram_csv(csv.string());
  CHECK(cg.lag_centers.size() == 1600);
  // Symmetric grid, no bin centered at zero.
  CHECK(cg.lag_centers.front() == Catch::Approx(-399.75));
  CHECK(cg.lag_centers.back() == Catch::Approx(399.75));

  const fs::path report = temp_file("qdecay_cli_g2fit.json");
  const RunResult f = run("fit --kind g2 --input " + csv.string() +
                          " --report " + report.string());
  CHECK(f.exit_code == 0);
  CHECK(f.out.find("lambda1") != std::string::npos);
  const auto rep = qdecay::fit_report_from_json(
      nlohmann::json::parse(qdecay::io::read_file(report.string())));
  CHECK(rep.model == "g2");
  CHECK(rep.result.parameters.at("lambda1") == Catch::Approx(1.25).epsilon(1e-5));
  CHECK(rep.result.parameters.at("lambda2") ==
        Catch::Approx(0.0058).epsilon(1e-5));
  // The report fingerprints its input.
  CHECK(rep.input_hash ==
        qdecay::io::to_hex(qdecay::io::fnv1a64(
            qdecay::io::read_file(csv.string()))));
  fs::remove(csv);
  fs::remove(report);
}

TEST_CASE("simulate/histogram/fit pipeline over files") {
  const fs::path cfgp = temp_file("qdecay_cli_pulsed.ini");
  const fs::path ts = temp_file("qdecay_cli_pulsed.txt");
  const fs::path hist = temp_file("qdecay_cli_pulsed_hist.csv");
  qdecay::io::write_file(cfgp.string(),
                         "[experiment]\n"
                         "type = pulsed\n"
                         "seed = 5\n"
                         "[pulsed]\n"
                         "rep_period_ns = 200\n"
                         "n_pulses = 30000\n"
                         "r21 = 0.1\n");
  const RunResult sim =
      run("simulate --config " + cfgp.string() + " --output " + ts.string());
  REQUIRE(sim.exit_code == 0);
  CHECK(sim.out.find("30000") != std::string::npos);

  const RunResult h = run("histogram --input " + ts.string() +
                          " --sync-period 200 --bin-width 1 --output " +
                          hist.string());
  REQUIRE(h.exit_code == 0);
  const RunResult f = run("fit --kind exponential --input " + hist.string() +
                          " --window-lo 0 --window-hi 200");
  CHECK(f.exit_code == 0);
  // Generated with a 10 ns lifetime.
  CHECK(f.out.find("lifetime=") != std::string::npos);
  const auto pos = f.out.find("lifetime=");
  const double fitted = std::strtod(f.out.c_str() + pos + 9, nullptr);
  CHECK(fitted == Catch::Approx(10.0).epsilon(0.05));
  fs::remove(cfgp);
  fs::remove(ts);
  fs::remove(hist);
}

TEST_CASE("simulate output is byte-identical across reruns and workers") {
  const fs::path cfgp = temp_file("qdecay_cli_det.ini");
  qdecay::io::write_file(cfgp.string(),
                         "[experiment]\n"
                         "type = cw\n"
                         "seed = 77\n"
                         "[cw]\n"
                         "r12 = 0.175\n"
                         "r21 = 1.075\n"
                         "r13 = 0.0015\n"
                         "r31 = 0.002\n"
                         "r32 = 0.0025\n"
                         "duration_ns = 2000000\n"
                         "segment_length_ns = 250000\n"
                         "detection_efficiency = 0.2\n");
  const fs::path t1 = temp_file("qdecay_cli_det1.txt");
  const fs::path t2 = temp_file("qdecay_cli_det2.txt");
  const fs::path t3 = temp_file("qdecay_cli_det3.txt");
  REQUIRE(run("simulate --config " + cfgp.string() + " --output " +
              t1.string() + " --workers 1")
              .exit_code == 0);
  REQUIRE(run("simulate --config " + cfgp.string() + " --output " +
              t2.string() + " --workers 6")
              .exit_code == 0);
  REQUIRE(run("simulate --config " + cfgp.string() + " --output " +
              t3.string() + " --workers 1")
              .exit_code == 0);
  const std::string b1 = qdecay::io::read_file(t1.string());
  CHECK(b1 == qdecay::io::read_file(t2.string()));
  CHECK(b1 == qdecay::io::read_file(t3.string()));
  CHECK(!b1.empty());
  fs::remove(cfgp);
  fs::remove(t1);
  fs::remove(t2);
  fs::remove(t3);
}

TEST_CASE("simulate rejects unknown config keys") {
  const fs::path cfgp = temp_file("qdecay_cli_badkey.ini");
  qdecay::io::write_file(cfgp.string(),
                         "[experiment]\n"
                         "type = pulsed\n"
                         "[pulsed]\n"
                         "n_pulses = 10\n"
                         "rep_periods_ns = 100\n");  // typo
  const fs::path out = temp_file("qdecay_cli_badkey.txt");
  const RunResult r =
      run("simulate --config " + cfgp.string() + " --output " + out.string());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("rep_periods_ns") != std::string::npos);
  fs::remove(cfgp);
}

TEST_CASE("correlate command with split channels") {
  const fs::path cfgp = temp_file("qdecay_cli_cwsplit.ini");
  qdecay::io::write_file(cfgp.string(),
                         "[experiment]\n"
                         "type = cw\n"
                         "seed = 3\n"
                         "[cw]\n"
                         "r12 = 0.3\n"
                         "r21 = 1.0\n"
                         "r13 = 0.002\n"
                         "r31 = 0.001\n"
                         "r32 = 0.004\n"
                         "duration_ns = 5000000\n"
                         "channels = split\n");
  const fs::path ts = temp_file("qdecay_cli_cwsplit.txt");
  const fs::path cg = temp_file("qdecay_cli_cwsplit.csv");
  REQUIRE(run("simulate --config " + cfgp.string() + " --output " + ts.string())
              .exit_code == 0);
  const RunResult c = run("correlate --input " + ts.string() +
                          " --max-lag 300 --bin-width 1 --output " +
                          cg.string());
  REQUIRE(c.exit_code == 0);
  const auto parsed = qdecay::io::read_correlogram_csv(cg.string());
  CHECK(parsed.lag_centers.size() == 600);
  std::int64_t pairs = 0;
  for (auto v : parsed.raw_coincidences) pairs += v;
  CHECK(pairs > 0);
  fs::remove(cfgp);
  fs::remove(ts);
  fs::remove(cg);
}

TEST_CASE("fit reports IO failures cleanly") {
  CHECK(run("fit --kind exponential --input nonexistent_qdecay.csv")
            .exit_code == 2);
  CHECK(run("fit --kind nonsense --input nonexistent_qdecay.csv").exit_code ==
        2);
}

TEST_CASE("sweep command writes the result table") {
  const fs::path cfgp = temp_file("qdecay_cli_sweep.ini");
  qdecay::io::write_file(cfgp.string(),
                         "[sweep]\n"
                         "count = 3\n"
                         "seed = 11\n"
                         "r32_prime_start = 0.004\n"
                         "r32_prime_stop = 0.02\n"
                         "alpha_start = 0.3\n"
                         "alpha_stop = 0.1\n"
                         "[pulsed]\n"
                         "rep_period_ns = 2000\n"
                         "n_pulses = 40000\n"
                         "[histogram]\n"
                         "bin_width_ns = 2\n"
                         "[fit]\n"
                         "window_lo_ns = 10\n");
  const fs::path table = temp_file("qdecay_cli_sweep.csv");
  const RunResult r =
      run("sweep --config " + cfgp.string() + " --output " + table.string() +
          " --workers 4");
  REQUIRE(r.exit_code == 0);
  const auto lines = qdecay::io::read_file(table.string());
  CHECK(lines.find("index,r32_prime,alpha,rate_inv_ns,beta,mean_lifetime_ns,"
                   "status") != std::string::npos);
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 4);  // header + 3
  CHECK(lines.find(",ok") != std::string::npos);
  fs::remove(cfgp);
  fs::remove(table);
}
