#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "epps/constants.hpp"
#include "epps/correlator.hpp"
#include "epps/errors.hpp"
#include "epps/simulator.hpp"
#include "test_util.hpp"

using namespace epps;

namespace {

SimConfig ideal_config() {
  SimConfig c;
  c.rep_rate_ghz = 0.2;  // 5 ns period keeps cross-pulse pairs out of the peak
  c.pulse_count = 200'000;
  c.excitation_power_uw = 9.0;
  c.pi_pulse_power_uw = 9.0;
  c.cascade.fss_uev = 0.0;
  c.cascade.t1_x_ps = 162.0;
  c.cascade.t1_xx_ps = 120.0;
  c.efficiency_x = 1.0;
  c.efficiency_xx = 1.0;
  c.detector_jitter_fwhm_ps = 0.0;
  c.electronics_jitter_fwhm_ps = 0.0;
  c.seed = 11;
  return c;
}

std::uint64_t center_coincidences(const std::vector<TimeTagRecord>& records,
                                  std::int64_t window_ps) {
  CorrelationOptions opt;
  opt.channel_a = SimConfig::kChannelX;
  opt.channel_b = SimConfig::kChannelXX;
  opt.bin_width_ps = 8;
  opt.window_ps = window_ps;
  return cross_correlate(records, opt).total_counts();
}

}  // namespace

TEST_CASE("excitation probability follows the Rabi formula") {
  SimConfig c = ideal_config();
  c.excitation_power_uw = 9.0;
  CHECK(c.excitation_probability() == doctest::Approx(1.0));
  c.excitation_power_uw = 0.0;
  CHECK(c.excitation_probability() == doctest::Approx(0.0));
  c.excitation_power_uw = 2.25;  // quarter of the pi power, area pi/4
  CHECK(c.excitation_probability() == doctest::Approx(0.5));
  c.excitation_power_uw = 36.0;  // area 2 pi
  CHECK(c.excitation_probability() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("streams are deterministic, sorted and non-negative") {
  SimConfig c = ideal_config();
  c.pulse_count = 20'000;
  c.detector_jitter_fwhm_ps = 20.0;
  c.electronics_jitter_fwhm_ps = 41.2311;
  c.dark_rate_x_hz = 5e5;
  c.dark_rate_xx_hz = 5e5;
  const auto a = simulate_pair_stream(c);
  const auto b = simulate_pair_stream(c);
  REQUIRE(a.size() == b.size());
  CHECK(a == b);
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i - 1].timestamp <= a[i].timestamp);

  c.seed = 12;
  const auto other = simulate_pair_stream(c);
  CHECK(other != a);
}

TEST_CASE("no efficiency and no darks means an empty stream") {
  SimConfig c = ideal_config();
  c.efficiency_x = 0.0;
  c.efficiency_xx = 0.0;
  CHECK(simulate_pair_stream(c).empty());
}

TEST_CASE("HH coincidences at the pi pulse hit the projector rate") {
  SimConfig c = ideal_config();
  const auto records = simulate_pair_stream(c);
  const double n = static_cast<double>(c.pulse_count);
  const double expected = 0.5 * n;
  const double sigma = std::sqrt(n * 0.25);
  CHECK(std::abs(static_cast<double>(center_coincidences(records, 2400)) - expected) <
        5.0 * sigma);
}

TEST_CASE("anticorrelated combinations stay empty for phi+") {
  SimConfig c = ideal_config();
  c.basis_xx = 'H';
  c.basis_x = 'V';
  CHECK(center_coincidences(simulate_pair_stream(c), 2400) == 0);
  c.basis_xx = 'V';
  c.basis_x = 'H';
  CHECK(center_coincidences(simulate_pair_stream(c), 2400) == 0);
}

TEST_CASE("singles rates match excitation, projection and efficiency") {
  SimConfig c = ideal_config();
  c.excitation_power_uw = 2.25;  // excitation probability 0.5
  c.efficiency_x = 0.37;
  c.efficiency_xx = 0.81;
  const auto records = simulate_pair_stream(c);
  double singles_x = 0.0, singles_xx = 0.0;
  for (const auto& r : records) {
    if (r.channel == SimConfig::kChannelX) singles_x += 1.0;
    else singles_xx += 1.0;
  }
  const double n = static_cast<double>(c.pulse_count);
  const double expected_x = n * 0.5 * 0.5 * c.efficiency_x;
  const double expected_xx = n * 0.5 * 0.5 * c.efficiency_xx;
  CHECK(std::abs(singles_x - expected_x) < 5.0 * std::sqrt(expected_x));
  CHECK(std::abs(singles_xx - expected_xx) < 5.0 * std::sqrt(expected_xx));
}

TEST_CASE("fine-structure precession shows up as a D-D fringe") {
  SimConfig c = ideal_config();
  c.cascade.fss_uev = 20.0;  // 207 ps fringe period, well resolved within T1
  c.basis_xx = 'D';
  c.basis_x = 'D';
  c.pulse_count = 400'000;
  const auto records = simulate_pair_stream(c);

  CorrelationOptions opt;
  opt.channel_a = SimConfig::kChannelX;
  opt.channel_b = SimConfig::kChannelXX;
  opt.bin_width_ps = 4;
  opt.window_ps = 1000;
  const CoincidenceHistogram hist = cross_correlate(records, opt);

  // Discrete Fourier scan of the detrended positive-delay histogram.
  std::vector<double> tau, excess;
  for (std::size_t b = 0; b < hist.bin_count(); ++b) {
    const double center = hist.bin_center_ps(b);
    if (center < 0.0 || center > 800.0) continue;
    tau.push_back(center);
    excess.push_back(static_cast<double>(hist.counts[b]) *
                     std::exp(center / c.cascade.t1_x_ps));
  }
  double mean = 0.0;
  for (double e : excess) mean += e;
  mean /= static_cast<double>(excess.size());

  const double f0 = c.cascade.omega() / (2.0 * kPi);
  double best_f = 0.0, best_mag = 0.0;
  for (double f = 0.3 * f0; f <= 3.0 * f0; f += 0.02 * f0) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < tau.size(); ++i)
      acc += (excess[i] - mean) * std::exp(std::complex<double>(0.0, -2.0 * kPi * f * tau[i]));
    if (std::abs(acc) > best_mag) {
      best_mag = std::abs(acc);
      best_f = f;
    }
  }
  CHECK(best_f == doctest::Approx(f0).epsilon(0.1));
}

TEST_CASE("dark counts are flagged and roughly Poisson") {
  SimConfig c = ideal_config();
  c.efficiency_x = 0.0;
  c.efficiency_xx = 0.0;
  c.dark_rate_x_hz = 2e6;
  c.dark_rate_xx_hz = 1e6;
  const auto records = simulate_pair_stream(c);
  double darks_x = 0.0, darks_xx = 0.0;
  for (const auto& r : records) {
    CHECK((r.flags & 1) == 1);
    if (r.channel == SimConfig::kChannelX) darks_x += 1.0;
    else darks_xx += 1.0;
  }
  const double duration_s = c.duration_s();
  CHECK(std::abs(darks_x - 2e6 * duration_s) < 5.0 * std::sqrt(2e6 * duration_s));
  CHECK(std::abs(darks_xx - 1e6 * duration_s) < 5.0 * std::sqrt(1e6 * duration_s));
}

TEST_CASE("tomography run labels 36 deterministic sub-streams") {
  SimConfig c = ideal_config();
  c.pulse_count = 0;

  SUBCASE("zero integration time gives 36 empty labeled streams") {
    const auto streams = simulate_tomography_run(c, 0.0);
    REQUIRE(streams.size() == 36);
    for (const auto& s : streams) {
      CHECK(s.records.empty());
      CHECK(s.header.basis_label[0] == s.basis_xx);
      CHECK(s.header.basis_label[1] == s.basis_x);
    }
  }

  SUBCASE("per-combination sub-seeds are deterministic") {
    const double secs = 2000.0 * c.rep_period_ps() / kPicosecondsPerSecond;
    const auto one = simulate_tomography_run(c, secs);
    const auto two = simulate_tomography_run(c, secs);
    REQUIRE(one.size() == 36);
    bool identical = true;
    std::size_t nonempty = 0;
    for (std::size_t i = 0; i < 36; ++i) {
      identical = identical && one[i].records == two[i].records;
      nonempty += one[i].records.empty() ? 0 : 1;
    }
    CHECK(identical);
    CHECK(nonempty == 36);
    CHECK(one[0].records != one[7].records);
  }
}

TEST_CASE("rabi scan reproduces the pulse-area curve") {
  SimConfig c = ideal_config();
  c.efficiency_xx = 0.8;
  std::vector<double> powers;
  for (double p = 0.0; p <= 40.0; p += 1.0) powers.push_back(p);
  const auto scan = simulate_rabi_scan(c, powers, 200'000);
  REQUIRE(scan.size() == powers.size());

  CHECK(scan[0].detected == 0);  // no power, no darks

  std::size_t max_idx = 0;
  for (std::size_t i = 0; i < scan.size(); ++i)
    if (scan[i].detected > scan[max_idx].detected) max_idx = i;
  CHECK(scan[max_idx].power_uw == doctest::Approx(9.0));

  // Pulse area 2 pi at four times the pi power.
  CHECK(static_cast<double>(scan[36].detected) < 5.0 * std::sqrt(200'000.0 * 1e-3));

  const auto repeat = simulate_rabi_scan(c, powers, 200'000);
  bool identical = true;
  for (std::size_t i = 0; i < scan.size(); ++i)
    identical = identical && scan[i].detected == repeat[i].detected;
  CHECK(identical);
}

TEST_CASE("drift profiles modulate the efficiency") {
  DriftProfile drift;
  drift.kind = DriftProfile::Kind::Sinusoidal;
  drift.amplitude = 0.1;
  drift.period_or_slope = 10.0;
  CHECK(drift.factor(0.0) == doctest::Approx(1.0));
  CHECK(drift.factor(2.5) == doctest::Approx(1.1));
  CHECK(drift.factor(7.5) == doctest::Approx(0.9));

  DriftProfile linear;
  linear.kind = DriftProfile::Kind::Linear;
  linear.amplitude = 0.2;
  linear.period_or_slope = 0.01;
  CHECK(linear.factor(10.0) == doctest::Approx(1.1));
  CHECK(linear.factor(1000.0) == doctest::Approx(1.2));  // clamped at the amplitude

  DriftProfile bad;
  bad.kind = DriftProfile::Kind::Sinusoidal;
  bad.amplitude = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("configuration validation rejects unphysical runs") {
  SimConfig c = ideal_config();
  c.efficiency_x = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  c = ideal_config();
  c.rep_rate_ghz = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  c = ideal_config();
  c.pulse_count = 4'000'000'000'000'000'000ULL;  // overflows the ps range
  CHECK_THROWS_AS(c.validate(), ConfigError);

  c = ideal_config();
  c.basis_x = 'Z';
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("two-photon jitter defaults combine to 50 ps FWHM") {
  SimConfig c;
  const double per_channel = c.channel_jitter_sigma_ps() * kFwhmPerSigma;
  CHECK(std::sqrt(2.0) * per_channel == doctest::Approx(50.0).epsilon(1e-4));
}
