#pragma once

// File formats and configuration parsing.
//
// Everything is plain text chosen for diff-ability:
//   histogram CSV     header "time_ns,counts"
//   correlogram CSV   header "lag_ns,g2,coincidences"
//   timestamp files   one ns value per line, optional channel column (A/B)
//   config files      INI-style [section] blocks of key = value lines
//
// Loaders validate shape invariants (ordering, uniform grids, sign) and
// throw config_error with the offending line where possible.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qdecay/errors.hpp"
#include "qdecay/photon_stats.hpp"
#include "qdecay/simulate.hpp"

namespace qdecay::io {

/// FNV-1a 64-bit hash, used to fingerprint input files in fit reports.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw config_error("cannot write file: " + path);
  out << content;
  if (!out) throw config_error("write failed: " + path);
}

namespace iodetail {

inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) {
    if (cur.back() == '\r') cur.pop_back();
    lines.push_back(cur);
  }
  return lines;
}

inline double parse_double(const std::string& s, const std::string& where) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || end != begin + s.size() || !std::isfinite(v))
    throw config_error("not a finite number: '" + s + "' in " + where);
  return v;
}

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace iodetail

// ---------------------------------------------------------------------------
// Histogram CSV

inline std::string format_histogram_csv(const DecayHistogram& h) {
  std::string out = "time_ns,counts\n";
  char buf[64];
  for (std::size_t i = 0; i < h.bin_centers.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10g,%lld\n", h.bin_centers[i],
                  static_cast<long long>(h.counts[i]));
    out += buf;
  }
  return out;
}

inline void write_histogram_csv(const std::string& path,
                                const DecayHistogram& h) {
  write_file(path, format_histogram_csv(h));
}

inline DecayHistogram parse_histogram_csv(const std::string& text,
                                          const std::string& origin) {
  const auto lines = iodetail::split_lines(text);
  if (lines.empty() || lines[0] != "time_ns,counts")
    throw config_error(origin + ": expected header 'time_ns,counts'");
  DecayHistogram h;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto cells = iodetail::split_csv_row(lines[ln]);
    if (cells.size() != 2)
      throw config_error(origin + ": line " + std::to_string(ln + 1) +
                         " must have 2 columns");
    const std::string where = origin + " line " + std::to_string(ln + 1);
    h.bin_centers.push_back(iodetail::parse_double(cells[0], where));
    const double c = iodetail::parse_double(cells[1], where);
    if (c < 0.0 || c != std::floor(c))
      throw config_error(where + ": counts must be non-negative integers");
    h.counts.push_back(static_cast<std::int64_t>(c));
  }
  if (h.bin_centers.size() < 2)
    throw config_error(origin + ": need at least 2 histogram rows");
  const double width = h.bin_centers[1] - h.bin_centers[0];
  if (!(width > 0.0))
    throw config_error(origin + ": bin centers must increase");
  for (std::size_t i = 1; i < h.bin_centers.size(); ++i) {
    const double d = h.bin_centers[i] - h.bin_centers[i - 1];
    if (std::fabs(d - width) > 1e-9 * std::max(width, std::fabs(d)))
      throw config_error(origin + ": bin grid is not uniform near row " +
                         std::to_string(i + 1));
  }
  h.bin_width = width;
  return h;
}

inline DecayHistogram read_histogram_csv(const std::string& path) {
  return parse_histogram_csv(read_file(path), path);
}

// ---------------------------------------------------------------------------
// Correlogram CSV

inline std::string format_correlogram_csv(const Correlogram& c) {
  std::string out = "lag_ns,g2,coincidences\n";
  char buf[96];
  for (std::size_t i = 0; i < c.lag_centers.size(); ++i) {
    const long long raw = i < c.raw_coincidences.size()
                              ? static_cast<long long>(c.raw_coincidences[i])
                              : 0;
    std::snprintf(buf, sizeof buf, "%.10g,%.17g,%lld\n", c.lag_centers[i],
                  c.g2_values[i], raw);
    out += buf;
  }
  return out;
}

inline void write_correlogram_csv(const std::string& path,
                                  const Correlogram& c) {
  write_file(path, format_correlogram_csv(c));
}

/// Parse a correlogram. The file stores raw pair counts and the normalized
/// values; the per-bin normalization is reconstructed as raw/g2 where both
/// are positive, and filled in elsewhere by linear regression against |lag|
/// (the exact functional form of the finite-window correction), so that
/// Poisson weighting stays consistent across bins with zero counts.
inline Correlogram parse_correlogram_csv(const std::string& text,
                                         const std::string& origin) {
  const auto lines = iodetail::split_lines(text);
  if (lines.empty() || lines[0] != "lag_ns,g2,coincidences")
    throw config_error(origin + ": expected header 'lag_ns,g2,coincidences'");
  Correlogram c;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto cells = iodetail::split_csv_row(lines[ln]);
    if (cells.size() != 3)
      throw config_error(origin + ": line " + std::to_string(ln + 1) +
                         " must have 3 columns");
    const std::string where = origin + " line " + std::to_string(ln + 1);
    c.lag_centers.push_back(iodetail::parse_double(cells[0], where));
    const double g2 = iodetail::parse_double(cells[1], where);
    if (g2 < 0.0) throw config_error(where + ": g2 must be >= 0");
    c.g2_values.push_back(g2);
    const double raw = iodetail::parse_double(cells[2], where);
    if (raw < 0.0 || raw != std::floor(raw))
      throw config_error(where + ": coincidences must be non-negative integers");
    c.raw_coincidences.push_back(static_cast<std::int64_t>(raw));
  }
  const std::size_t nb = c.lag_centers.size();
  if (nb < 2) throw config_error(origin + ": need at least 2 bins");
  for (std::size_t i = 1; i < nb; ++i)
    if (!(c.lag_centers[i] > c.lag_centers[i - 1]))
      throw config_error(origin + ": lag grid must increase");
  // Reconstruct per-bin normalization (see docstring).
  c.normalization.assign(nb, 0.0);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < nb; ++i) {
    if (c.raw_coincidences[i] > 0 && c.g2_values[i] > 0.0) {
      const double x = std::fabs(c.lag_centers[i]);
      const double y = static_cast<double>(c.raw_coincidences[i]) /
                       c.g2_values[i];
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++used;
    }
  }
  if (used >= 2) {
    const double denom = static_cast<double>(used) * sxx - sx * sx;
    const double slope =
        denom > 0.0 ? (static_cast<double>(used) * sxy - sx * sy) / denom : 0.0;
    const double icept = (sy - slope * sx) / static_cast<double>(used);
    for (std::size_t i = 0; i < nb; ++i) {
      const double fitted = icept + slope * std::fabs(c.lag_centers[i]);
      c.normalization[i] = std::max(fitted, 0.0);
    }
  }
  return c;
}

inline Correlogram read_correlogram_csv(const std::string& path) {
  return parse_correlogram_csv(read_file(path), path);
}

// ---------------------------------------------------------------------------
// Timestamp files

inline std::string format_timestamps(const PhotonStream& s) {
  std::string out;
  out.reserve(s.timestamps.size() * 14);
  char buf[48];
  for (double t : s.timestamps) {
    std::snprintf(buf, sizeof buf, "%.4f\n", t);
    out += buf;
  }
  return out;
}

inline void write_timestamps(const std::string& path, const PhotonStream& s) {
  write_file(path, format_timestamps(s));
}

/// Two detector channels merged by arrival time, labelled A / B.
inline std::string format_timestamps(const PhotonStream& a,
                                     const PhotonStream& b) {
  std::string out;
  out.reserve((a.timestamps.size() + b.timestamps.size()) * 16);
  char buf[48];
  std::size_t i = 0, j = 0;
  while (i < a.timestamps.size() || j < b.timestamps.size()) {
    const bool take_a =
        j >= b.timestamps.size() ||
        (i < a.timestamps.size() && a.timestamps[i] <= b.timestamps[j]);
    if (take_a) {
      std::snprintf(buf, sizeof buf, "%.4f A\n", a.timestamps[i++]);
    } else {
      std::snprintf(buf, sizeof buf, "%.4f B\n", b.timestamps[j++]);
    }
    out += buf;
  }
  return out;
}

inline void write_timestamps(const std::string& path, const PhotonStream& a,
                             const PhotonStream& b) {
  write_file(path, format_timestamps(a, b));
}

struct LoadedStream {
  PhotonStream merged;
  PhotonStream channel_a;
  PhotonStream channel_b;
  bool has_channels = false;
};

/// Read a timestamp file. Values must be non-decreasing; ties introduced by
/// the fixed-precision format are separated by one ulp to restore strict
/// ordering. The observation window is taken as the last arrival time.
inline LoadedStream read_timestamps(const std::string& path) {
  const std::string text = read_file(path);
  LoadedStream out;
  std::size_t ln = 0;
  const char* p = text.c_str();
  const char* end = p + text.size();
  double prev = -std::numeric_limits<double>::infinity();
  while (p < end) {
    ++ln;
    const char* eol =
        static_cast<const char*>(std::memchr(p, '\n', end - p));
    if (!eol) eol = end;
    std::string line(p, eol);
    p = eol < end ? eol + 1 : end;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    char* after = nullptr;
    const double t = std::strtod(line.c_str(), &after);
    if (after == line.c_str() || !std::isfinite(t) || t < 0.0)
      throw config_error(path + " line " + std::to_string(ln) +
                         ": expected a non-negative time in ns");
    std::string rest = iodetail::trim(std::string(after));
    if (t < prev)
      throw config_error(path + " line " + std::to_string(ln) +
                         ": timestamps must be non-decreasing");
    prev = t;
    if (rest.empty()) {
      out.merged.timestamps.push_back(t);
    } else if (rest == "A" || rest == "B") {
      out.has_channels = true;
      out.merged.timestamps.push_back(t);
      (rest == "A" ? out.channel_a : out.channel_b).timestamps.push_back(t);
    } else {
      throw config_error(path + " line " + std::to_string(ln) +
                         ": channel must be A or B");
    }
  }
  detail::make_strictly_increasing(out.merged.timestamps);
  detail::make_strictly_increasing(out.channel_a.timestamps);
  detail::make_strictly_increasing(out.channel_b.timestamps);
  const double dur =
      out.merged.timestamps.empty() ? 0.0 : out.merged.timestamps.back();
  out.merged.duration = out.channel_a.duration = out.channel_b.duration = dur;
  return out;
}

// ---------------------------------------------------------------------------
// Config files

/// Sectioned key = value configuration. '#' and ';' start comments. Every
/// key a command reads is recorded; reject_unknown() then reports all keys
/// that exist in the file but were never consumed — unknown keys are hard
/// errors so a typo cannot silently fall back to a default.
class Config {
 public:
  static Config parse_string(const std::string& text,
                             const std::string& origin) {
    Config cfg;
    cfg.origin_ = origin;
    std::string section;
    const auto lines = iodetail::split_lines(text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      std::string line = lines[ln];
      const auto hash = line.find_first_of("#;");
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = iodetail::trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw config_error(origin + " line " + std::to_string(ln + 1) +
                             ": malformed section header");
        section = iodetail::trim(line.substr(1, line.size() - 2));
        if (section.empty())
          throw config_error(origin + " line " + std::to_string(ln + 1) +
                             ": empty section name");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw config_error(origin + " line " + std::to_string(ln + 1) +
                           ": expected key = value");
      const std::string key = iodetail::trim(line.substr(0, eq));
      const std::string value = iodetail::trim(line.substr(eq + 1));
      if (key.empty())
        throw config_error(origin + " line " + std::to_string(ln + 1) +
                           ": empty key");
      if (section.empty())
        throw config_error(origin + " line " + std::to_string(ln + 1) +
                           ": key outside any [section]");
      auto [it, inserted] = cfg.values_[section].emplace(key, value);
      if (!inserted)
        throw config_error(origin + " line " + std::to_string(ln + 1) +
                           ": duplicate key '" + section + "." + key + "'");
    }
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    return parse_string(read_file(path), path);
  }

  bool has(const std::string& section, const std::string& key) const {
    touch(section, key);
    auto s = values_.find(section);
    return s != values_.end() && s->second.count(key) > 0;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    touch(section, key);
    auto s = values_.find(section);
    if (s == values_.end()) return fallback;
    auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
  }

  std::string require_string(const std::string& section,
                             const std::string& key) const {
    touch(section, key);
    auto s = values_.find(section);
    if (s != values_.end()) {
      auto k = s->second.find(key);
      if (k != s->second.end()) return k->second;
    }
    throw config_error(origin_ + ": missing required key '" + section + "." +
                       key + "'");
  }

  double get_double(const std::string& section, const std::string& key,
                    double fallback) const {
    touch(section, key);
    auto s = values_.find(section);
    if (s == values_.end()) return fallback;
    auto k = s->second.find(key);
    if (k == s->second.end()) return fallback;
    return iodetail::parse_double(k->second,
                                  origin_ + " key " + section + "." + key);
  }

  double require_double(const std::string& section,
                        const std::string& key) const {
    return iodetail::parse_double(require_string(section, key),
                                  origin_ + " key " + section + "." + key);
  }

  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const {
    touch(section, key);
    auto s = values_.find(section);
    if (s == values_.end()) return fallback;
    auto k = s->second.find(key);
    if (k == s->second.end()) return fallback;
    const std::string& v = k->second;
    char* endp = nullptr;
    const unsigned long long parsed = std::strtoull(v.c_str(), &endp, 10);
    if (endp == v.c_str() || endp != v.c_str() + v.size())
      throw config_error(origin_ + " key " + section + "." + key +
                         ": not a non-negative integer: '" + v + "'");
    return parsed;
  }

  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const {
    touch(section, key);
    auto s = values_.find(section);
    if (s == values_.end()) return fallback;
    auto k = s->second.find(key);
    if (k == s->second.end()) return fallback;
    if (k->second == "true" || k->second == "1") return true;
    if (k->second == "false" || k->second == "0") return false;
    throw config_error(origin_ + " key " + section + "." + key +
                       ": expected true/false");
  }

  /// Throw listing every key present in the file that no getter asked for.
  void reject_unknown() const {
    std::vector<std::string> unknown;
    for (const auto& [section, kv] : values_)
      for (const auto& [key, value] : kv)
        if (touched_.count(section + "." + key) == 0)
          unknown.push_back(section + "." + key);
    if (!unknown.empty()) {
      std::string msg = origin_ + ": unknown configuration key(s):";
      for (const auto& k : unknown) msg += " " + k;
      throw config_error(msg);
    }
  }

  const std::string& origin() const { return origin_; }

 private:
  void touch(const std::string& section, const std::string& key) const {
    touched_.insert(section + "." + key);
  }

  std::string origin_;
  std::map<std::string, std::map<std::string, std::string>> values_;
  mutable std::set<std::string> touched_;
};

}  // namespace qdecay::io
