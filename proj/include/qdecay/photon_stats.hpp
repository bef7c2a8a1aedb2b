#pragma once

// Reduction of photon timestamp streams to the two standard measurement
// artifacts: the TCSPC decay histogram (time since last sync pulse) and the
// normalized HBT cross-correlogram g2(lag).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "qdecay/errors.hpp"
#include "qdecay/rng.hpp"
#include "qdecay/simulate.hpp"

namespace qdecay {

/// Uniformly binned photon-delay histogram.
struct DecayHistogram {
  std::vector<double> bin_centers;   // ns, strictly increasing, uniform
  std::vector<std::int64_t> counts;  // >= 0
  double bin_width = 0.0;            // ns
};

/// Normalized pair-correlation histogram, symmetric about zero lag.
/// g2_values[k] = raw_coincidences[k] / normalization[k].
struct Correlogram {
  std::vector<double> lag_centers;            // ns
  std::vector<double> g2_values;              // dimensionless
  std::vector<std::int64_t> raw_coincidences; // pair counts per bin
  std::vector<double> normalization;          // expected counts if uncorrelated
};

/// Histogram of (timestamp mod sync_period): the TCSPC view of a pulsed
/// stream, folding delayed emission into the window of a later pulse
/// exactly as the instrument does. Total counts equal the stream length.
inline DecayHistogram tcspc_histogram(const PhotonStream& stream,
                                      double sync_period, double bin_width) {
  if (!(bin_width > 0.0) || !(sync_period > bin_width))
    throw model_error("tcspc_histogram: need sync_period > bin_width > 0");
  const auto n_bins = static_cast<std::size_t>(
      std::ceil(sync_period / bin_width - 1e-9));
  DecayHistogram h;
  h.bin_width = bin_width;
  h.bin_centers.resize(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k)
    h.bin_centers[k] = (static_cast<double>(k) + 0.5) * bin_width;
  h.counts.assign(n_bins, 0);
  for (double t : stream.timestamps) {
    const double folded = std::fmod(t, sync_period);
    auto k = static_cast<std::size_t>(folded / bin_width);
    if (k >= n_bins) k = n_bins - 1;  // folded == period up-rounding guard
    ++h.counts[k];
  }
  return h;
}

/// Random 50/50-style beamsplitter: photon i goes to the first output with
/// probability split_prob, to the second otherwise. Deterministic per seed.
inline std::pair<PhotonStream, PhotonStream> hbt_split(
    const PhotonStream& stream, double split_prob, std::uint64_t seed) {
  if (split_prob < 0.0 || split_prob > 1.0)
    throw model_error("hbt_split: split_prob must lie in [0, 1]");
  rng::Xoshiro256 gen(seed);
  PhotonStream a, b;
  a.duration = b.duration = stream.duration;
  for (double t : stream.timestamps) {
    if (rng::bernoulli(gen, split_prob))
      a.timestamps.push_back(t);
    else
      b.timestamps.push_back(t);
  }
  return {std::move(a), std::move(b)};
}

/// All-pairs cross-correlation of two sorted streams. Every pair with
/// (t_b - t_a) inside (-max_lag, +max_lag) lands in a uniform bin of width
/// bin_width; bins are normalized by the uncorrelated-stream expectation
///   N_a * N_b * bin_width * (T - |lag|) / T^2,
/// where the (T - |lag|) factor is the exact overlap length of the two
/// observation windows at that lag. Uncorrelated streams give g2 = 1.
inline Correlogram hbt_correlate(const PhotonStream& a, const PhotonStream& b,
                                 double max_lag, double bin_width,
                                 int workers = 1) {
  if (!(bin_width > 0.0) || !(max_lag > bin_width))
    throw model_error("hbt_correlate: need max_lag > bin_width > 0");
  if (a.timestamps.empty() || b.timestamps.empty())
    throw model_error(
        "hbt_correlate: empty stream, correlogram cannot be normalized");
  double t_obs = std::max(a.duration, b.duration);
  t_obs = std::max({t_obs, a.timestamps.back(), b.timestamps.back()});
  if (!(max_lag < t_obs))
    throw model_error("hbt_correlate: max_lag must be below the observation "
                      "window length");

  const auto half_bins =
      static_cast<std::int64_t>(std::llround(max_lag / bin_width));
  const double span = static_cast<double>(half_bins) * bin_width;
  const std::size_t n_bins = 2 * static_cast<std::size_t>(half_bins);

  // Partition stream A; each unit fills a private accumulator, merged by
  // addition, so the result is independent of the partitioning.
  constexpr std::size_t kChunk = 1 << 16;
  const std::size_t n_units = (a.timestamps.size() + kChunk - 1) / kChunk;
  std::vector<std::vector<std::int64_t>> partial(
      n_units, std::vector<std::int64_t>(n_bins, 0));
  detail::parallel_units(n_units, workers, [&](std::size_t unit) {
    auto& bins = partial[unit];
    const std::size_t first = unit * kChunk;
    const std::size_t last = std::min(first + kChunk, a.timestamps.size());
    // Two-pointer sweep: b_lo tracks the first partner above t_a - span.
    std::size_t b_lo = static_cast<std::size_t>(
        std::lower_bound(b.timestamps.begin(), b.timestamps.end(),
                         a.timestamps[first] - span) -
        b.timestamps.begin());
    for (std::size_t i = first; i < last; ++i) {
      const double ta = a.timestamps[i];
      while (b_lo < b.timestamps.size() && b.timestamps[b_lo] < ta - span)
        ++b_lo;
      for (std::size_t j = b_lo;
           j < b.timestamps.size() && b.timestamps[j] < ta + span; ++j) {
        const double lag = b.timestamps[j] - ta;
        const auto k =
            static_cast<std::int64_t>(std::floor(lag / bin_width)) + half_bins;
        if (k >= 0 && k < static_cast<std::int64_t>(n_bins)) ++bins[k];
      }
    }
  });

  Correlogram c;
  c.lag_centers.resize(n_bins);
  c.raw_coincidences.assign(n_bins, 0);
  for (const auto& bins : partial)
    for (std::size_t k = 0; k < n_bins; ++k) c.raw_coincidences[k] += bins[k];
  c.g2_values.resize(n_bins);
  c.normalization.resize(n_bins);
  const double na = static_cast<double>(a.timestamps.size());
  const double nb = static_cast<double>(b.timestamps.size());
  for (std::size_t k = 0; k < n_bins; ++k) {
    const double center =
        (static_cast<double>(k) - static_cast<double>(half_bins) + 0.5) *
        bin_width;
    c.lag_centers[k] = center;
    const double overlap = t_obs - std::fabs(center);
    c.normalization[k] = na * nb * bin_width * overlap / (t_obs * t_obs);
    c.g2_values[k] =
        static_cast<double>(c.raw_coincidences[k]) / c.normalization[k];
  }
  return c;
}

}  // namespace qdecay
