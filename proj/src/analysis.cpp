#include "epps/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "epps/errors.hpp"

namespace epps {

std::pair<double, double> t1_weighted_negativity(std::span<const NegativitySample> series,
                                                 double t1_ps) {
  if (series.empty()) throw DataError("empty negativity series");
  if (!(t1_ps > 0.0)) throw ConfigError("T1 must be positive");

  double min_tau = series[0].tau_ps, max_tau = series[0].tau_ps;
  double spacing = t1_ps;
  for (std::size_t i = 0; i < series.size(); ++i) {
    min_tau = std::min(min_tau, series[i].tau_ps);
    max_tau = std::max(max_tau, series[i].tau_ps);
    if (i > 0) spacing = std::min(spacing, std::abs(series[i].tau_ps - series[i - 1].tau_ps));
  }
  if (min_tau > spacing || max_tau < t1_ps - spacing)
    throw DataError("negativity series does not cover [0, T1]");

  double num = 0.0, den = 0.0, var = 0.0;
  for (const auto& s : series) {
    if (s.tau_ps < 0.0 || s.tau_ps > t1_ps) continue;
    num += s.weight * s.value;
    den += s.weight;
    var += s.weight * s.weight * s.sigma * s.sigma;
  }
  if (den <= 0.0) throw DataError("no weighted bins inside [0, T1]");
  return {num / den, std::sqrt(var) / den};
}

std::vector<NegativitySample> negativity_samples(
    const std::vector<ReconstructionResult>& bins) {
  std::vector<NegativitySample> series;
  series.reserve(bins.size());
  for (const auto& b : bins) {
    NegativitySample s;
    s.tau_ps = 0.5 * static_cast<double>(b.tau_bin_ps.first + b.tau_bin_ps.second);
    s.value = b.negativity;
    s.weight = b.total_counts;
    s.sigma = std::isfinite(b.sigma_negativity) ? b.sigma_negativity : 0.0;
    series.push_back(s);
  }
  return series;
}

StabilityReport stability_report(const std::vector<TomographyDataset>& iterations,
                                 const RateSeriesBundle& rates, double rate_window_s,
                                 const StabilityOptions& options) {
  if (options.pairing < 1) throw ConfigError("pairing must be >= 1");
  if (iterations.size() < static_cast<std::size_t>(options.pairing))
    throw DataError("need at least " + std::to_string(options.pairing) +
                    " tomography iterations, got " + std::to_string(iterations.size()));

  StabilityReport report;
  report.window_s = rate_window_s;
  report.rates = rates;

  const std::size_t groups = iterations.size() / static_cast<std::size_t>(options.pairing);
  for (std::size_t g = 0; g < groups; ++g) {
    TomographyDataset merged = iterations[g * options.pairing];
    for (int k = 1; k < options.pairing; ++k)
      merged.add(iterations[g * options.pairing + static_cast<std::size_t>(k)]);
    const ReconstructionResult res = reconstruct_window(
        merged, options.neg_window_lo_ps, options.neg_window_hi_ps, options.window);
    NegativityPoint point;
    point.t_center_s = (static_cast<double>(g) + 0.5) * options.pairing *
                       options.iteration_duration_s;
    point.value = res.negativity;
    point.sigma = std::isfinite(res.sigma_negativity) ? res.sigma_negativity : 0.0;
    report.negativity_series.push_back(point);
  }

  report.min_negativity = report.negativity_series[0].value;
  report.mean_negativity = 0.0;
  for (const auto& p : report.negativity_series) {
    report.min_negativity = std::min(report.min_negativity, p.value);
    report.mean_negativity += p.value;
  }
  report.mean_negativity /= static_cast<double>(report.negativity_series.size());

  if (!rates.combined.empty()) {
    double sum = 0.0, min_rate = rates.combined[0].rate_hz, max_rate = min_rate;
    for (const auto& s : rates.combined) {
      sum += s.rate_hz;
      min_rate = std::min(min_rate, s.rate_hz);
      max_rate = std::max(max_rate, s.rate_hz);
    }
    report.mean_rate_hz = sum / static_cast<double>(rates.combined.size());
    report.max_rate_hz = max_rate;
    if (report.mean_rate_hz > 0.0) {
      report.fluctuation = (max_rate - min_rate) / report.mean_rate_hz;
      double ss = 0.0;
      for (const auto& s : rates.combined) {
        const double d = s.rate_hz - report.mean_rate_hz;
        ss += d * d;
      }
      report.fluctuation_rms =
          std::sqrt(ss / static_cast<double>(rates.combined.size())) / report.mean_rate_hz;
    }
  }
  return report;
}

}  // namespace epps
