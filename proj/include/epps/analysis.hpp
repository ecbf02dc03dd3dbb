#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "epps/correlator.hpp"
#include "epps/tomography.hpp"

namespace epps {

struct NegativitySample {
  double tau_ps = 0.0;   // bin center
  double value = 0.0;    // 2n in that bin
  double weight = 0.0;   // summed coincidence counts (physical emission weight)
  double sigma = 0.0;    // per-bin 1-sigma, 0 when unknown
};

// Count-weighted mean of 2n over bins with centers in [0, t1]; the sigma is
// the weighted propagation of the per-bin sigmas.
std::pair<double, double> t1_weighted_negativity(std::span<const NegativitySample> series,
                                                 double t1_ps);

std::vector<NegativitySample> negativity_samples(
    const std::vector<ReconstructionResult>& bins);

struct RateSeriesBundle {
  std::vector<RateSample> x;
  std::vector<RateSample> xx;
  std::vector<RateSample> combined;
};

struct StabilityOptions {
  int pairing = 2;  // consecutive iterations reconstructed together
  double iteration_duration_s = 0.0;  // spacing of the negativity time axis
  // Coincidence window integrated for the per-group reconstruction.
  std::int64_t neg_window_lo_ps = -100;
  std::int64_t neg_window_hi_ps = 162;
  WindowOptions window;
};

struct NegativityPoint {
  double t_center_s = 0.0;
  double value = 0.0;
  double sigma = 0.0;
};

struct StabilityReport {
  double window_s = 0.0;
  RateSeriesBundle rates;
  std::vector<NegativityPoint> negativity_series;
  double mean_rate_hz = 0.0;
  double max_rate_hz = 0.0;
  double fluctuation = 0.0;      // (max - min) / mean over combined rate windows
  double fluctuation_rms = 0.0;  // std / mean, reported alongside
  double min_negativity = 0.0;
  double mean_negativity = 0.0;
};

// Long-run characterization: groups `pairing` consecutive tomography
// iterations, reconstructs one 2n per group from the summed dataset, and
// summarizes the detection-rate series.
StabilityReport stability_report(const std::vector<TomographyDataset>& iterations,
                                 const RateSeriesBundle& rates, double rate_window_s,
                                 const StabilityOptions& options);

}  // namespace epps
