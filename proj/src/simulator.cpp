#include "epps/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "epps/constants.hpp"
#include "epps/errors.hpp"
#include "epps/random.hpp"

namespace epps {

double DriftProfile::factor(double t_s) const {
  switch (kind) {
    case Kind::None:
      return 1.0;
    case Kind::Sinusoidal:
      return 1.0 + amplitude * std::sin(2.0 * kPi * t_s / period_or_slope);
    case Kind::Linear:
      return 1.0 + std::clamp(period_or_slope * t_s, -amplitude, amplitude);
  }
  return 1.0;
}

void DriftProfile::validate() const {
  if (amplitude < 0.0 || amplitude >= 1.0)
    throw ConfigError("drift amplitude must be in [0, 1)");
  if (kind == Kind::Sinusoidal && !(period_or_slope > 0.0))
    throw ConfigError("sinusoidal drift needs a positive period");
}

double SimConfig::duration_s() const {
  return static_cast<double>(pulse_count) * rep_period_ps() / kPicosecondsPerSecond;
}

double SimConfig::excitation_probability() const {
  if (pi_pulse_power_uw <= 0.0) throw ConfigError("pi-pulse power must be positive");
  const double area = std::sqrt(excitation_power_uw / pi_pulse_power_uw);
  const double s = std::sin(0.5 * kPi * area);
  return std::clamp(s * s, 0.0, 1.0);
}

double SimConfig::channel_jitter_sigma_ps() const {
  const double fwhm2 = detector_jitter_fwhm_ps * detector_jitter_fwhm_ps +
                       0.5 * electronics_jitter_fwhm_ps * electronics_jitter_fwhm_ps;
  return sigma_from_fwhm(std::sqrt(fwhm2));
}

void SimConfig::validate() const {
  if (!(rep_rate_ghz > 0.0)) throw ConfigError("repetition rate must be positive");
  if (excitation_power_uw < 0.0) throw ConfigError("excitation power must be >= 0");
  if (pi_pulse_power_uw <= 0.0) throw ConfigError("pi-pulse power must be positive");
  if (efficiency_x < 0.0 || efficiency_x > 1.0 || efficiency_xx < 0.0 ||
      efficiency_xx > 1.0)
    throw ConfigError("efficiencies must be in [0, 1]");
  if (detector_jitter_fwhm_ps < 0.0 || electronics_jitter_fwhm_ps < 0.0)
    throw ConfigError("jitter must be >= 0");
  if (dark_rate_x_hz < 0.0 || dark_rate_xx_hz < 0.0)
    throw ConfigError("dark rates must be >= 0");
  cascade.validate();
  drift.validate();
  try {
    BasisState::index_of(basis_xx);
    BasisState::index_of(basis_x);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  // Keep headroom for emission delays and jitter above the last pulse.
  const double last_ps = static_cast<double>(pulse_count) * rep_period_ps() + 1e6;
  if (last_ps >= static_cast<double>(std::numeric_limits<std::int64_t>::max()))
    throw ConfigError("run length overflows the 64-bit picosecond timestamp range");
}

StreamHeader make_stream_header(const SimConfig& config) {
  StreamHeader header;
  header.channel_count = 2;
  header.basis_label = {config.basis_xx, config.basis_x};
  return header;
}

std::vector<TimeTagRecord> simulate_pair_stream(const SimConfig& config) {
  config.validate();
  Rng rng(config.seed);

  const double period_ps = config.rep_period_ps();
  const double p_excite = config.excitation_probability();
  const double jitter_sigma = config.channel_jitter_sigma_ps();
  const double omega = config.cascade.omega();

  // Joint projection amplitudes: <b a|psi(tau)> = (alpha + e^{i w tau} beta)/sqrt2
  // with alpha = conj(b_H a_H), beta = conj(b_V a_V), evaluated for the four
  // outcomes (pass/orthogonal on each arm). Rotating the analyzer kets into
  // the QD eigenbasis absorbs basis_rotation_deg.
  const double rot = -config.cascade.basis_rotation_deg * kPi / 180.0;
  Matrix2c unrotate;
  unrotate << std::cos(rot), std::sin(rot), -std::sin(rot), std::cos(rot);
  const BasisState& bxx = BasisState::from_label(config.basis_xx);
  const BasisState& bx = BasisState::from_label(config.basis_x);
  const Vector2c kets_xx[2] = {unrotate * bxx.ket, unrotate * bxx.orthogonal().ket};
  const Vector2c kets_x[2] = {unrotate * bx.ket, unrotate * bx.orthogonal().ket};
  Complex alpha[4], beta[4];
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      alpha[2 * i + j] = std::conj(kets_xx[i](0) * kets_x[j](0));
      beta[2 * i + j] = std::conj(kets_xx[i](1) * kets_x[j](1));
    }

  std::vector<TimeTagRecord> records;
  records.reserve(static_cast<std::size_t>(
      static_cast<double>(config.pulse_count) * p_excite *
          (config.efficiency_x + config.efficiency_xx) * 0.55 +
      64.0));

  const bool drifting = config.drift.kind != DriftProfile::Kind::None;
  double eff_x = config.efficiency_x;
  double eff_xx = config.efficiency_xx;

  auto emit = [&](double t_ps, std::uint16_t channel) {
    const double jittered = t_ps + (jitter_sigma > 0.0 ? rng.normal(0.0, jitter_sigma) : 0.0);
    TimeTagRecord rec;
    rec.timestamp = jittered <= 0.0 ? 0 : static_cast<std::uint64_t>(std::llround(jittered));
    rec.channel = channel;
    records.push_back(rec);
  };

  for (std::uint64_t k = 0; k < config.pulse_count; ++k) {
    if (p_excite < 1.0 && !rng.bernoulli(p_excite)) continue;
    const double t_pulse = static_cast<double>(k) * period_ps;
    const double delay_xx = rng.exponential(config.cascade.t1_xx_ps);
    const double delay_x = rng.exponential(config.cascade.t1_x_ps);
    const double t_xx = t_pulse + delay_xx;
    const double t_x = t_xx + delay_x;

    const Complex phase = std::exp(Complex(0.0, omega * delay_x));
    double probs[4];
    for (int o = 0; o < 4; ++o) probs[o] = 0.5 * std::norm(alpha[o] + phase * beta[o]);
    const double u = rng.uniform() * (probs[0] + probs[1] + probs[2] + probs[3]);
    int outcome = 0;
    double acc = probs[0];
    while (outcome < 3 && u >= acc) acc += probs[++outcome];
    const bool pass_xx = outcome < 2;
    const bool pass_x = (outcome & 1) == 0;

    if (drifting) {
      const double t_s =
          config.run_time_offset_s + t_pulse / kPicosecondsPerSecond;
      const double f = config.drift.factor(t_s);
      eff_xx = std::clamp(config.efficiency_xx * f, 0.0, 1.0);
      eff_x = std::clamp(config.efficiency_x * f, 0.0, 1.0);
    }
    if (pass_xx && rng.bernoulli(eff_xx)) emit(t_xx, SimConfig::kChannelXX);
    if (pass_x && rng.bernoulli(eff_x)) emit(t_x, SimConfig::kChannelX);
  }

  const double duration_ps = static_cast<double>(config.pulse_count) * period_ps;
  const double duration_s = duration_ps / kPicosecondsPerSecond;
  auto add_darks = [&](double rate_hz, std::uint16_t channel) {
    const std::uint64_t n = rng.poisson(rate_hz * duration_s);
    for (std::uint64_t i = 0; i < n; ++i) {
      TimeTagRecord rec;
      rec.timestamp = static_cast<std::uint64_t>(rng.uniform() * duration_ps);
      rec.channel = channel;
      rec.flags = 1;
      records.push_back(rec);
    }
  };
  add_darks(config.dark_rate_xx_hz, SimConfig::kChannelXX);
  add_darks(config.dark_rate_x_hz, SimConfig::kChannelX);

  std::sort(records.begin(), records.end(), record_order);
  return records;
}

void simulate_tomography_run(const SimConfig& config, double seconds_per_combination,
                             const std::function<void(const LabeledStream&)>& sink) {
  config.validate();
  if (seconds_per_combination < 0.0)
    throw ConfigError("integration time per combination must be >= 0");
  const auto& bases = BasisState::tomography_set();
  const auto pulses = static_cast<std::uint64_t>(
      std::llround(seconds_per_combination * config.rep_rate_ghz * 1e9));
  int combo = 0;
  for (const auto& b_xx : bases) {
    for (const auto& b_x : bases) {
      SimConfig c = config;
      c.basis_xx = b_xx.label;
      c.basis_x = b_x.label;
      c.pulse_count = pulses;
      c.seed = mix_seed(config.seed, static_cast<std::uint64_t>(combo));
      c.run_time_offset_s = config.run_time_offset_s + combo * seconds_per_combination;
      LabeledStream stream;
      stream.basis_xx = b_xx.label;
      stream.basis_x = b_x.label;
      stream.header = make_stream_header(c);
      stream.records = simulate_pair_stream(c);
      stream.header.record_count = stream.records.size();
      sink(stream);
      ++combo;
    }
  }
}

std::vector<LabeledStream> simulate_tomography_run(const SimConfig& config,
                                                   double seconds_per_combination) {
  std::vector<LabeledStream> streams;
  streams.reserve(36);
  simulate_tomography_run(config, seconds_per_combination,
                          [&](const LabeledStream& s) { streams.push_back(s); });
  return streams;
}

std::vector<RabiPoint> simulate_rabi_scan(const SimConfig& config,
                                          const std::vector<double>& powers_uw,
                                          std::uint64_t pulses_per_point) {
  config.validate();
  for (double p : powers_uw)
    if (p < 0.0) throw ConfigError("scan powers must be >= 0");
  Rng rng(config.seed);
  std::vector<RabiPoint> scan;
  scan.reserve(powers_uw.size());
  const double dark_mean = config.dark_rate_xx_hz * static_cast<double>(pulses_per_point) *
                           config.rep_period_ps() / kPicosecondsPerSecond;
  for (double power : powers_uw) {
    SimConfig c = config;
    c.excitation_power_uw = power;
    const double p_detect = c.excitation_probability() * config.efficiency_xx;
    RabiPoint point;
    point.power_uw = power;
    point.detected = rng.binomial(pulses_per_point, p_detect) + rng.poisson(dark_mean);
    scan.push_back(point);
  }
  return scan;
}

}  // namespace epps
