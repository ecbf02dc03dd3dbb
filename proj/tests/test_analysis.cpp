#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "epps/analysis.hpp"
#include "epps/constants.hpp"
#include "epps/errors.hpp"
#include "epps/fitting.hpp"
#include "epps/random.hpp"
#include "epps/simulator.hpp"
#include "test_util.hpp"

using namespace epps;

namespace {

CoincidenceHistogram synthetic_emg_histogram(double t1, double sigma, double amplitude,
                                             double baseline, bool poisson,
                                             std::uint64_t seed = 1) {
  CoincidenceHistogram hist;
  hist.bin_width_ps = 8;
  hist.tau_min_ps = -400;
  hist.tau_max_ps = 1200;
  hist.counts.assign(static_cast<std::size_t>((hist.tau_max_ps - hist.tau_min_ps) / 8), 0);
  Rng rng(seed);
  for (std::size_t b = 0; b < hist.bin_count(); ++b) {
    const double mu =
        amplitude * exp_gauss_decay(hist.bin_center_ps(b), t1, sigma, 0.0) + baseline;
    hist.counts[b] = poisson ? rng.poisson(mu)
                             : static_cast<std::uint64_t>(std::llround(mu));
  }
  return hist;
}

std::vector<std::pair<double, double>> synthetic_fss_samples(double e0, double delta,
                                                             double phase_rad, double noise,
                                                             int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<double, double>> samples;
  for (int i = 0; i < n; ++i) {
    const double theta = 180.0 * i / n;
    const double energy = e0 + 0.5 * delta * std::cos(4.0 * theta * kPi / 180.0 + phase_rad) +
                          (noise > 0.0 ? rng.normal(0.0, noise) : 0.0);
    samples.emplace_back(theta, energy);
  }
  return samples;
}

std::vector<std::pair<double, double>> synthetic_rabi_scan(double a, double p_pi,
                                                           double gamma, double c,
                                                           bool poisson,
                                                           std::uint64_t seed = 2) {
  Rng rng(seed);
  std::vector<std::pair<double, double>> scan;
  for (double p = 0.0; p <= 40.0; p += 1.0) {
    const double u = std::sqrt(p / p_pi);
    const double s = std::sin(0.5 * kPi * u);
    const double mu = a * s * s * std::exp(-gamma * u) + c;
    scan.emplace_back(p, poisson ? static_cast<double>(rng.poisson(mu)) : mu);
  }
  return scan;
}

}  // namespace

TEST_CASE("lifetime fit recovers the decay constant of a noiseless curve") {
  const double sigma = 50.0 / 2.355;
  const auto hist = synthetic_emg_histogram(162.0, sigma, 5000.0, 2.0, false);
  const FitResult fit = fit_lifetime(hist, 50.0, {-300.0, 1100.0});
  CHECK(fit.converged);
  CHECK(fit.params.at("T1") == doctest::Approx(162.0).epsilon(0.005));
  CHECK(fit.sigmas.at("T1") < 1.0);
  CHECK(fit.model_curve.size() > 20);
}

TEST_CASE("lifetime fit on poisson data stays within the quoted error") {
  const double sigma = 50.0 / 2.355;
  const auto hist = synthetic_emg_histogram(162.0, sigma, 4000.0, 1.0, true, 9);
  const FitResult fit = fit_lifetime(hist, 50.0, {-300.0, 1100.0});
  CHECK(fit.converged);
  CHECK(std::abs(fit.params.at("T1") - 162.0) < 5.0 * std::max(fit.sigmas.at("T1"), 1.0));
  CHECK(fit.reduced_chi2 < 2.0);
  CHECK(fit.reduced_chi2 > 0.3);
}

TEST_CASE("zero-jitter lifetime fit matches a log-linear slope estimate") {
  const auto hist = synthetic_emg_histogram(150.0, 0.0, 20000.0, 0.0, false);
  const FitResult fit = fit_lifetime(hist, 0.0, {8.0, 1100.0});

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (std::size_t b = 0; b < hist.bin_count(); ++b) {
    const double x = hist.bin_center_ps(b);
    if (x < 8.0 || x > 1100.0 || hist.counts[b] == 0) continue;
    const double y = std::log(static_cast<double>(hist.counts[b]));
    sx += x; sy += y; sxx += x * x; sxy += x * y;
    ++n;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double t1_loglin = -1.0 / slope;
  CHECK(fit.params.at("T1") == doctest::Approx(t1_loglin).epsilon(0.01));
}

TEST_CASE("closed-loop lifetime from a simulated stream") {
  SimConfig config;
  config.rep_rate_ghz = 0.25;
  config.pulse_count = 400'000;
  config.seed = 321;
  const auto records = simulate_pair_stream(config);
  CorrelationOptions opt;
  opt.channel_a = SimConfig::kChannelX;
  opt.channel_b = SimConfig::kChannelXX;
  opt.bin_width_ps = 8;
  opt.window_ps = 2000;
  const CoincidenceHistogram hist = cross_correlate(records, opt);
  const FitResult fit = fit_lifetime(hist, 50.0, {-150.0, 1000.0});
  CHECK(fit.params.at("T1") >= 157.0);
  CHECK(fit.params.at("T1") <= 167.0);
}

TEST_CASE("lifetime fit preconditions") {
  const auto hist = synthetic_emg_histogram(162.0, 20.0, 10.0, 0.0, false);
  CHECK_THROWS_AS(fit_lifetime(hist, 50.0, {900.0, 1100.0}), DataError);
  CHECK_THROWS_AS(fit_lifetime(hist, 50.0, {500.0, 100.0}), DataError);
}

TEST_CASE("fss fit recovers the splitting at the paper noise level") {
  int hits = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto samples =
        synthetic_fss_samples(1000.0, 2.54, 0.7, 0.05, 36, 100 + trial);
    const FitResult fit = fit_fss(samples);
    CHECK(fit.converged);
    if (std::abs(fit.params.at("delta") - 2.54) <= 0.12) ++hits;
    CHECK(fit.params.at("delta") >= 0.0);
  }
  CHECK(hits >= 19);
}

TEST_CASE("fss amplitude is invariant under offsets and 45-degree shifts") {
  const auto base = synthetic_fss_samples(1000.0, 2.54, 0.3, 0.02, 36, 55);
  const double delta0 = fit_fss(base).params.at("delta");

  auto shifted_energy = base;
  for (auto& s : shifted_energy) s.second += 137.0;
  CHECK(std::abs(fit_fss(shifted_energy).params.at("delta") - delta0) < 1e-9);

  auto shifted_angle = base;
  for (auto& s : shifted_angle) s.first += 45.0;
  CHECK(std::abs(fit_fss(shifted_angle).params.at("delta") - delta0) < 1e-9);
}

TEST_CASE("fss model repeats every 45 degrees and flags flat data") {
  const auto samples = synthetic_fss_samples(500.0, 1.8, 0.0, 0.0, 36, 1);
  const FitResult fit = fit_fss(samples);
  const double e0 = fit.params.at("E0");
  const double delta = fit.params.at("delta");
  const double phase = fit.params.at("phase_deg") * kPi / 180.0;
  auto model = [&](double theta) {
    return e0 + 0.5 * delta * std::cos(4.0 * theta * kPi / 180.0 + phase);
  };
  for (double theta : {3.0, 20.0, 71.0}) {
    // cos(4 theta) symmetry: the splitting envelope repeats every 45 degrees
    // (sign-flipped about E0) and the full curve every 90 degrees.
    CHECK(std::abs(model(theta + 45.0) - e0) ==
          doctest::Approx(std::abs(model(theta) - e0)).epsilon(1e-9));
    CHECK(model(theta + 90.0) == doctest::Approx(model(theta)).epsilon(1e-9));
  }

  const auto flat = synthetic_fss_samples(500.0, 0.0, 0.0, 0.05, 36, 2);
  const FitResult flat_fit = fit_fss(flat);
  CHECK(flat_fit.params.at("delta") < 0.1);
  CHECK(std::find(flat_fit.flags.begin(), flat_fit.flags.end(), "ambiguous_phase") !=
        flat_fit.flags.end());
}

TEST_CASE("fss fit preconditions") {
  std::vector<std::pair<double, double>> few = {{0, 1}, {10, 1}, {20, 1}};
  CHECK_THROWS_AS(fit_fss(few), DataError);
  std::vector<std::pair<double, double>> narrow;
  for (int i = 0; i < 12; ++i) narrow.emplace_back(i * 5.0, 1.0);
  CHECK_THROWS_AS(fit_fss(narrow), DataError);
}

TEST_CASE("rabi fit recovers the pi-pulse power") {
  const auto scan = synthetic_rabi_scan(1e5, 9.0, 0.02, 50.0, true, 77);
  const FitResult fit = fit_rabi(scan);
  CHECK(fit.converged);
  CHECK(std::abs(fit.params.at("P_pi") - 9.0) < 0.2);
  CHECK(fit.params.at("gamma") >= 0.0);
}

TEST_CASE("undamped rabi model returns to baseline at four pi-powers") {
  const auto scan = synthetic_rabi_scan(5e4, 9.0, 0.0, 25.0, false);
  const FitResult fit = fit_rabi(scan);
  CHECK(std::abs(fit.params.at("P_pi") - 9.0) < 0.05);
  // Model value at P = 4 P_pi equals the background: sin^2(pi) = 0.
  double at_36 = 0.0;
  for (const auto& [x, y] : fit.model_curve)
    if (std::abs(x - 36.0) < 1e-9) at_36 = y;
  CHECK(at_36 == doctest::Approx(fit.params.at("C")).epsilon(1e-3));
}

TEST_CASE("rabi pi-power estimate is invariant under count rescaling") {
  const auto scan = synthetic_rabi_scan(2e4, 9.0, 0.05, 10.0, true, 13);
  auto scaled = scan;
  for (auto& s : scaled) s.second *= 1000.0;
  const double p1 = fit_rabi(scan).params.at("P_pi");
  const double p2 = fit_rabi(scaled).params.at("P_pi");
  CHECK(std::abs(p1 - p2) / p1 < 1e-6);
}

TEST_CASE("rabi fit needs an interior maximum") {
  std::vector<std::pair<double, double>> rising;
  for (double p = 0.0; p <= 8.0; p += 1.0) rising.emplace_back(p, p * p);
  CHECK_THROWS_AS(fit_rabi(rising), DataError);
  std::vector<std::pair<double, double>> tiny = {{0, 0}, {1, 1}, {2, 4}};
  CHECK_THROWS_AS(fit_rabi(tiny), DataError);
}

TEST_CASE("t1-weighted negativity") {
  SUBCASE("constant series averages to the constant") {
    std::vector<NegativitySample> series;
    for (double tau = 4.0; tau < 200.0; tau += 8.0)
      series.push_back({tau, 1.0, 100.0 * std::exp(-tau / 162.0), 0.01});
    const auto [value, sigma] = t1_weighted_negativity(series, 162.0);
    CHECK(value == doctest::Approx(1.0));
    CHECK(sigma > 0.0);
  }

  SUBCASE("two-bin toy value") {
    std::vector<NegativitySample> series = {{40.0, 1.0, 300.0, 0.0},
                                            {120.0, 0.8, 100.0, 0.0}};
    const auto [value, sigma] = t1_weighted_negativity(series, 162.0);
    CHECK(value == doctest::Approx(0.95));
    CHECK(sigma == 0.0);
  }

  SUBCASE("weighted mean stays within the sample range") {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<NegativitySample> series;
      double lo = 1.0, hi = 0.0;
      for (double tau = 2.0; tau < 170.0; tau += 8.0) {
        const double v = 0.7 + 0.3 * test::urand();
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        series.push_back({tau, v, 1.0 + 500.0 * test::urand(), 0.0});
      }
      const auto [value, sigma] = t1_weighted_negativity(series, 162.0);
      CHECK(value >= lo - 1e-12);
      CHECK(value <= hi + 1e-12);
    }
  }

  SUBCASE("series must cover the window") {
    std::vector<NegativitySample> late = {{150.0, 1.0, 10.0, 0.0},
                                          {160.0, 1.0, 10.0, 0.0}};
    CHECK_THROWS_AS(t1_weighted_negativity(late, 162.0), DataError);
    std::vector<NegativitySample> early = {{2.0, 1.0, 10.0, 0.0}, {10.0, 1.0, 10.0, 0.0}};
    CHECK_THROWS_AS(t1_weighted_negativity(early, 162.0), DataError);
  }
}

namespace {

struct StabilityFixture {
  std::vector<TomographyDataset> datasets;
  RateSeriesBundle rates;
  double combo_duration_s = 0.0;
  double rate_window_s = 0.0;

  explicit StabilityFixture(int iterations, DriftProfile drift = {},
                            std::uint64_t seed = 1234) {
    SimConfig config;
    config.rep_rate_ghz = 0.2;
    config.cascade.fss_uev = 0.0;
    config.detector_jitter_fwhm_ps = 0.0;
    config.electronics_jitter_fwhm_ps = 0.0;
    config.efficiency_x = 0.6;
    config.efficiency_xx = 0.6;
    config.drift = drift;
    const std::uint64_t pulses = 40'000;
    const double secs = pulses * config.rep_period_ps() / 1e12;
    combo_duration_s = secs;
    rate_window_s = 0.45 * secs;

    CorrelationOptions opt;
    opt.channel_a = SimConfig::kChannelX;
    opt.channel_b = SimConfig::kChannelXX;
    opt.bin_width_ps = 8;
    opt.window_ps = 2400;

    double clock = 0.0;
    for (int iter = 0; iter < iterations; ++iter) {
      SimConfig c = config;
      c.seed = mix_seed(seed, static_cast<std::uint64_t>(iter));
      c.run_time_offset_s = iter * 36.0 * secs;
      std::vector<CoincidenceHistogram> hists;
      simulate_tomography_run(c, secs, [&](const LabeledStream& s) {
        hists.push_back(cross_correlate(s.records, opt, {s.basis_xx, s.basis_x}));
        for (auto [series, ch] : {std::pair{&rates.x, SimConfig::kChannelX},
                                  std::pair{&rates.xx, SimConfig::kChannelXX},
                                  std::pair{&rates.combined, kAllChannels}}) {
          auto samples = rate_series(s.records, ch, rate_window_s);
          for (auto sample : samples) {
            sample.t_center_s += clock;
            series->push_back(sample);
          }
        }
        clock += secs;
      });
      datasets.push_back(assemble_dataset(hists));
    }
  }

  StabilityOptions options() const {
    StabilityOptions o;
    o.pairing = 2;
    o.iteration_duration_s = 36.0 * combo_duration_s;
    o.neg_window_lo_ps = -50;
    o.neg_window_hi_ps = 700;
    o.window.background.window_lo_ps = -2000;
    o.window.background.window_hi_ps = -500;
    return o;
  }
};

}  // namespace

TEST_CASE("stability report on a drift-free run") {
  const StabilityFixture fix(4);
  const StabilityReport report =
      stability_report(fix.datasets, fix.rates, fix.rate_window_s, fix.options());

  CHECK(report.negativity_series.size() == 2);
  CHECK(report.min_negativity > 0.95);
  CHECK(report.mean_negativity > 0.95);

  // Expected combined rate: both arms pass half the time at 60 % efficiency.
  const double expected = 0.2e9 * 0.5 * (0.6 + 0.6);
  CHECK(report.mean_rate_hz == doctest::Approx(expected).epsilon(0.05));
  CHECK(report.fluctuation < 0.15);
  CHECK(report.max_rate_hz >= report.mean_rate_hz);

  // Paired-group value agrees with the single full reconstruction.
  TomographyDataset merged = fix.datasets[0];
  for (std::size_t i = 1; i < fix.datasets.size(); ++i) merged.add(fix.datasets[i]);
  WindowOptions wopt;
  wopt.background = fix.options().window.background;
  wopt.bootstrap_resamples = 100;
  const ReconstructionResult full = reconstruct_window(merged, -50, 700, wopt);
  for (const auto& p : report.negativity_series)
    CHECK(std::abs(p.value - full.negativity) <=
          std::max(2.0 * full.sigma_negativity, 0.02));
}

TEST_CASE("sinusoidal efficiency drift moves the rates but not the negativity") {
  DriftProfile drift;
  drift.kind = DriftProfile::Kind::Sinusoidal;
  drift.amplitude = 0.10;
  const StabilityFixture steady(4, {}, 99);
  DriftProfile d = drift;
  d.period_or_slope = 4 * 36.0 * steady.combo_duration_s;  // one full cycle per run
  const StabilityFixture drifting(4, d, 99);

  const StabilityReport steady_report = stability_report(
      steady.datasets, steady.rates, steady.rate_window_s, steady.options());
  const StabilityReport drift_report = stability_report(
      drifting.datasets, drifting.rates, drifting.rate_window_s, drifting.options());

  CHECK(drift_report.fluctuation > steady_report.fluctuation + 0.05);
  CHECK(drift_report.fluctuation == doctest::Approx(0.2).epsilon(0.35));
  CHECK(std::abs(drift_report.mean_negativity - steady_report.mean_negativity) < 0.02);
}

TEST_CASE("stability report rejects too few iterations") {
  const StabilityFixture fix(1);
  CHECK_THROWS_AS(
      stability_report(fix.datasets, fix.rates, fix.rate_window_s, fix.options()),
      DataError);
}
