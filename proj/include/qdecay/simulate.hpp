#pragma once

// Stochastic photon-stream generation for the two experiment types the
// toolkit analyses: pulsed excitation (TRPL histograms) and continuous-wave
// excitation (HBT correlation).
//
// Both simulators decompose the run into independent work units — pulses,
// grouped into fixed-size chunks, or fixed-length time segments — and give
// every unit its own RNG substream derived from (seed, unit index). The
// merged result is therefore bitwise identical for any worker count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <thread>
#include <utility>
#include <vector>

#include "qdecay/errors.hpp"
#include "qdecay/ode.hpp"
#include "qdecay/rate_matrix.hpp"
#include "qdecay/rng.hpp"

namespace qdecay {

/// Detected photon arrival times over an observation window [0, duration].
struct PhotonStream {
  std::vector<double> timestamps;      // ns, strictly increasing
  std::vector<std::uint8_t> channels;  // empty, or one 0/1 label per photon
  double duration = 0.0;               // ns
};

/// Pulsed-excitation experiment: each pulse instantaneously prepares the
/// emitter (bright with probability init_p2, shelved with init_p3, ground
/// otherwise) and the decay is followed as a continuous-time jump process.
/// Emission beyond the repetition period folds into later windows, as in a
/// real measurement.
struct PulsedExperimentConfig {
  double rep_period = 1000.0;  // ns between pulses
  std::uint64_t n_pulses = 0;
  double init_p2 = 1.0;  // post-pulse bright occupancy probability
  double init_p3 = 0.0;  // post-pulse shelf occupancy probability
  double r21 = 1.0;      // emission rate, ns^-1
  double r31 = 0.0;      // shelf -> ground rate, ns^-1
  TrappingSpec trapping;  // shelf -> bright channel; alpha = 0 is constant
  double detection_efficiency = 1.0;  // [0, 1]
  std::uint64_t seed = 0;
  // The power-law rate diverges at t -> 0; below t_min it is held at its
  // t_min value. Defaults to two orders of magnitude below a ~1 ns emission
  // lifetime, where the shelf physics is immaterial.
  double t_min = 0.01;  // ns

  void validate() const {
    if (!(rep_period > 0.0))
      throw model_error("PulsedExperimentConfig: rep_period must be > 0");
    if (init_p2 < 0.0 || init_p3 < 0.0 || init_p2 + init_p3 > 1.0)
      throw model_error(
          "PulsedExperimentConfig: init_p2, init_p3 must be >= 0 with "
          "init_p2 + init_p3 <= 1");
    if (!(r21 > 0.0))
      throw model_error("PulsedExperimentConfig: r21 must be > 0");
    if (r31 < 0.0)
      throw model_error("PulsedExperimentConfig: r31 must be >= 0");
    trapping.validate();
    if (detection_efficiency < 0.0 || detection_efficiency > 1.0)
      throw model_error(
          "PulsedExperimentConfig: detection_efficiency must lie in [0, 1]");
    if (trapping.is_power_law() && !(t_min > 0.0))
      throw config_error(
          "PulsedExperimentConfig: power-law trapping needs t_min > 0 (the "
          "rate bound diverges at t = 0)");
    if (init_p3 > 0.0 && r31 == 0.0 && trapping.r32_prime == 0.0)
      throw model_error(
          "PulsedExperimentConfig: shelf is populated but has no exit "
          "channel (r31 = 0 and no trapping)");
  }
};

/// Shelf diagnostics from the pulsed simulator, in within-pulse time.
/// One exit_times entry per pulse that started shelved (every shelf
/// eventually empties); trap_times holds the subset that left via the
/// shelf -> bright channel. Together they allow an empirical estimate of
/// the instantaneous trapping rate.
struct ShelfTrace {
  std::vector<double> trap_times;
  std::vector<double> exit_times;
};

struct PulsedResult {
  PhotonStream stream;
  ShelfTrace shelf;
};

/// Continuous-wave experiment: the full three-level system cycles under
/// constant rates; photons are recorded on bright -> ground transitions.
/// The run is split into segments, each starting from an independent
/// steady-state draw; segments far exceed the correlation time, so the
/// concatenated stream is statistically stationary.
struct CwExperimentConfig {
  RateSet rates;
  double duration = 0.0;              // ns
  double detection_efficiency = 1.0;  // [0, 1]
  std::uint64_t seed = 0;
  double segment_length = 1e6;  // ns per independent work unit

  void validate() const {
    rates.validate();
    if (!(duration > 0.0))
      throw model_error("CwExperimentConfig: duration must be > 0");
    if (detection_efficiency < 0.0 || detection_efficiency > 1.0)
      throw model_error(
          "CwExperimentConfig: detection_efficiency must lie in [0, 1]");
    if (!(segment_length > 0.0))
      throw model_error("CwExperimentConfig: segment_length must be > 0");
    if (rates.r12 == 0.0 && rates.r13 == 0.0)
      throw model_error("CwExperimentConfig: no excitation channel");
  }
};

struct CwResult {
  PhotonStream stream;
  std::array<double, 3> dwell{};  // total ns spent in each level
};

namespace detail {

/// Run fn(unit) for unit in [0, n_units) across up to `workers` threads.
/// Units must be independent; callers pre-allocate per-unit output slots.
template <typename Fn>
void parallel_units(std::size_t n_units, int workers, Fn&& fn) {
  const std::size_t nw = std::min<std::size_t>(
      std::max(workers, 1), n_units == 0 ? 1 : n_units);
  if (nw <= 1) {
    for (std::size_t i = 0; i < n_units; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto drain = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n_units) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(nw - 1);
  for (std::size_t w = 1; w < nw; ++w) pool.emplace_back(drain);
  drain();
  for (auto& th : pool) th.join();
}

/// Enforce strict monotonicity after merging: equal neighbours (possible in
/// principle from 53-bit uniforms, vanishingly rare) are nudged up one ulp.
inline void make_strictly_increasing(std::vector<double>& ts) {
  for (std::size_t i = 1; i < ts.size(); ++i)
    if (!(ts[i] > ts[i - 1]))
      ts[i] = std::nextafter(ts[i - 1],
                             std::numeric_limits<double>::infinity());
}

// One pulse: at most one photon (no re-excitation between pulses). Appends
// the within-pulse emission time; optionally records shelf diagnostics.
inline void run_one_pulse(const PulsedExperimentConfig& cfg,
                          std::uint64_t pulse_idx,
                          std::vector<double>& photons, ShelfTrace* trace) {
  rng::Xoshiro256 gen(rng::substream_seed(cfg.seed, pulse_idx));
  const double u0 = rng::uniform01(gen);
  double t = 0.0;
  bool bright = false;
  if (u0 <= cfg.init_p2) {
    bright = true;
  } else if (u0 <= cfg.init_p2 + cfg.init_p3) {
    // Shelved: competing exit channels r31 (constant) and r32(t). The
    // time-dependent channel is sampled by thinning: the proposal rate is
    // the current total, which bounds the true rate at all later times
    // because the regularized trapping rate never increases.
    auto r32_eff = [&cfg](double tt) {
      return cfg.trapping.rate_at(std::max(tt, cfg.t_min));
    };
    for (;;) {
      const double bound = cfg.r31 + r32_eff(t);
      t += rng::exponential(gen, bound);
      const double actual = cfg.r31 + r32_eff(t);
      if (rng::uniform01(gen) * bound <= actual) {
        if (rng::uniform01(gen) * actual <= cfg.r31) {
          if (trace) trace->exit_times.push_back(t);
          return;  // decayed straight to ground, no detected photon
        }
        if (trace) {
          trace->exit_times.push_back(t);
          trace->trap_times.push_back(t);
        }
        bright = true;
        break;
      }
    }
  } else {
    return;  // pulse left the emitter in the ground state
  }
  if (!bright) return;
  t += rng::exponential(gen, cfg.r21);
  if (rng::bernoulli(gen, cfg.detection_efficiency)) photons.push_back(t);
}

}  // namespace detail

/// Pulsed-excitation simulation with shelf diagnostics.
inline PulsedResult simulate_pulsed_trpl_detailed(
    const PulsedExperimentConfig& cfg, int workers = 1,
    bool record_shelf = false) {
  cfg.validate();
  constexpr std::uint64_t kChunk = 4096;  // pulses per work unit
  const std::uint64_t n_chunks = (cfg.n_pulses + kChunk - 1) / kChunk;
  std::vector<std::vector<double>> chunk_photons(n_chunks);
  std::vector<ShelfTrace> chunk_traces(record_shelf ? n_chunks : 0);
  detail::parallel_units(n_chunks, workers, [&](std::size_t c) {
    const std::uint64_t first = c * kChunk;
    const std::uint64_t last = std::min(first + kChunk, cfg.n_pulses);
    ShelfTrace* trace = record_shelf ? &chunk_traces[c] : nullptr;
    std::vector<double> local;
    for (std::uint64_t p = first; p < last; ++p) {
      const std::size_t before = local.size();
      detail::run_one_pulse(cfg, p, local, trace);
      // Shift the (single) new photon into absolute experiment time.
      for (std::size_t i = before; i < local.size(); ++i)
        local[i] += static_cast<double>(p) * cfg.rep_period;
    }
    chunk_photons[c] = std::move(local);
  });

  PulsedResult out;
  out.stream.duration =
      static_cast<double>(cfg.n_pulses) * cfg.rep_period;
  std::size_t total = 0;
  for (const auto& v : chunk_photons) total += v.size();
  out.stream.timestamps.reserve(total);
  for (auto& v : chunk_photons)
    out.stream.timestamps.insert(out.stream.timestamps.end(), v.begin(),
                                 v.end());
  // Long shelved tails overlap later pulse windows, so the merged stream is
  // only approximately ordered; arrivals past the acquisition end are lost.
  std::stable_sort(out.stream.timestamps.begin(),
                   out.stream.timestamps.end());
  while (!out.stream.timestamps.empty() &&
         out.stream.timestamps.back() > out.stream.duration)
    out.stream.timestamps.pop_back();
  detail::make_strictly_increasing(out.stream.timestamps);
  for (auto& tr : chunk_traces) {
    out.shelf.trap_times.insert(out.shelf.trap_times.end(),
                                tr.trap_times.begin(), tr.trap_times.end());
    out.shelf.exit_times.insert(out.shelf.exit_times.end(),
                                tr.exit_times.begin(), tr.exit_times.end());
  }
  return out;
}

inline PhotonStream simulate_pulsed_trpl(const PulsedExperimentConfig& cfg,
                                         int workers = 1) {
  return simulate_pulsed_trpl_detailed(cfg, workers).stream;
}

/// Continuous-wave simulation with per-level dwell-time accounting.
inline CwResult simulate_cw_detailed(const CwExperimentConfig& cfg,
                                     int workers = 1) {
  cfg.validate();
  const Vec3 pinf = steady_state(cfg.rates);
  const std::size_t n_seg = static_cast<std::size_t>(
      std::ceil(cfg.duration / cfg.segment_length));
  struct SegmentOut {
    std::vector<double> photons;
    std::array<double, 3> dwell{};
  };
  std::vector<SegmentOut> segs(n_seg);
  const std::vector<double> weights{pinf[0], pinf[1], pinf[2]};
  detail::parallel_units(n_seg, workers, [&](std::size_t s) {
    rng::Xoshiro256 gen(rng::substream_seed(cfg.seed, s));
    const double t0 = static_cast<double>(s) * cfg.segment_length;
    const double t1 = std::min(t0 + cfg.segment_length, cfg.duration);
    SegmentOut& out = segs[s];
    int level = static_cast<int>(rng::pick_category(gen, weights));  // 0,1,2
    double t = t0;
    for (;;) {
      double total = 0.0;
      switch (level) {
        case 0: total = cfg.rates.r12 + cfg.rates.r13; break;
        case 1: total = cfg.rates.r21; break;
        case 2: total = cfg.rates.r31 + cfg.rates.r32; break;
      }
      if (!(total > 0.0)) {  // absorbing level: sit out the segment
        out.dwell[level] += t1 - t;
        break;
      }
      const double w = rng::exponential(gen, total);
      if (t + w >= t1) {
        out.dwell[level] += t1 - t;
        break;
      }
      t += w;
      out.dwell[level] += w;
      const double u = rng::uniform01(gen) * total;
      switch (level) {
        case 0:
          level = u <= cfg.rates.r12 ? 1 : 2;
          break;
        case 1:
          if (rng::bernoulli(gen, cfg.detection_efficiency))
            out.photons.push_back(t);
          level = 0;
          break;
        case 2:
          level = u <= cfg.rates.r31 ? 0 : 1;
          break;
      }
    }
  });

  CwResult out;
  out.stream.duration = cfg.duration;
  std::size_t total = 0;
  for (const auto& s : segs) total += s.photons.size();
  out.stream.timestamps.reserve(total);
  for (auto& s : segs) {
    out.stream.timestamps.insert(out.stream.timestamps.end(),
                                 s.photons.begin(), s.photons.end());
    for (int i = 0; i < 3; ++i) out.dwell[i] += s.dwell[i];
  }
  detail::make_strictly_increasing(out.stream.timestamps);
  return out;
}

inline PhotonStream simulate_cw_stream(const CwExperimentConfig& cfg,
                                       int workers = 1) {
  return simulate_cw_detailed(cfg, workers).stream;
}

}  // namespace qdecay
