#pragma once

// Persisted fit reports: JSON documents binding a fit result to the exact
// input it was computed from (path + content hash) and the toolkit version.

#include <ctime>
#include <string>

#include <json.hpp>

#include "qdecay/fit.hpp"
#include "qdecay/io.hpp"
#include "qdecay/version.hpp"

namespace qdecay {

struct FitReport {
  std::string input_path;
  std::string input_hash;  // fnv1a64 of the input file bytes, hex
  std::string model;       // exponential | stretched | g2
  FitResult result;
  std::string version = kVersion;
  std::string timestamp;  // ISO 8601 UTC, time of the run
};

inline std::string utc_timestamp_now() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json to_json(const FitResult& r) {
  nlohmann::json j;
  j["parameters"] = r.parameters;
  j["uncertainties"] = r.uncertainties;
  j["derived"] = r.derived;
  j["reduced_chi_square"] = r.reduced_chi_square;
  j["window_ns"] = {r.window.first, r.window.second};
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["warnings"] = r.warnings;
  j["free_parameters"] = r.free_names;
  j["covariance"] = r.covariance;
  return j;
}

inline FitResult fit_result_from_json(const nlohmann::json& j) {
  FitResult r;
  r.parameters = j.at("parameters").get<std::map<std::string, double>>();
  r.uncertainties =
      j.at("uncertainties").get<std::map<std::string, double>>();
  r.derived = j.at("derived").get<std::map<std::string, double>>();
  r.reduced_chi_square = j.at("reduced_chi_square").get<double>();
  r.window = {j.at("window_ns")[0].get<double>(),
              j.at("window_ns")[1].get<double>()};
  r.iterations = j.at("iterations").get<int>();
  r.converged = j.at("converged").get<bool>();
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  r.free_names = j.at("free_parameters").get<std::vector<std::string>>();
  r.covariance = j.at("covariance").get<linalg::MatX>();
  return r;
}

inline nlohmann::json to_json(const FitReport& rep) {
  nlohmann::json j;
  j["input"] = {{"path", rep.input_path}, {"fnv1a64", rep.input_hash}};
  j["model"] = rep.model;
  j["fit"] = to_json(rep.result);
  j["toolkit_version"] = rep.version;
  j["timestamp_utc"] = rep.timestamp;
  return j;
}

inline FitReport fit_report_from_json(const nlohmann::json& j) {
  FitReport rep;
  rep.input_path = j.at("input").at("path").get<std::string>();
  rep.input_hash = j.at("input").at("fnv1a64").get<std::string>();
  rep.model = j.at("model").get<std::string>();
  rep.result = fit_result_from_json(j.at("fit"));
  rep.version = j.at("toolkit_version").get<std::string>();
  rep.timestamp = j.at("timestamp_utc").get<std::string>();
  return rep;
}

/// Build a report for a fit of `model` on the file at `input_path`.
inline FitReport make_fit_report(const std::string& input_path,
                                 const std::string& input_bytes,
                                 const std::string& model,
                                 const FitResult& result) {
  FitReport rep;
  rep.input_path = input_path;
  rep.input_hash = io::to_hex(io::fnv1a64(input_bytes));
  rep.model = model;
  rep.result = result;
  rep.timestamp = utc_timestamp_now();
  return rep;
}

}  // namespace qdecay
