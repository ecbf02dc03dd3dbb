#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "epps/quantum.hpp"
#include "epps/timetag.hpp"

namespace epps {

// Slow modulation of the detection efficiencies over the run.
//   sinusoidal: factor = 1 + amplitude * sin(2 pi t / period_or_slope)
//   linear:     factor = 1 + clamp(period_or_slope * t, -amplitude, +amplitude)
// with t the run time in seconds (stream time plus run_time_offset_s).
struct DriftProfile {
  enum class Kind { None, Sinusoidal, Linear };
  Kind kind = Kind::None;
  double amplitude = 0.0;        // fractional, in [0, 1)
  double period_or_slope = 0.0;  // seconds (sinusoidal) or 1/second (linear)

  double factor(double t_s) const;
  void validate() const;
};

struct SimConfig {
  double rep_rate_ghz = 1.0;
  std::uint64_t pulse_count = 0;
  double excitation_power_uw = 9.0;
  double pi_pulse_power_uw = 9.0;
  CascadeModelParams cascade;
  double efficiency_x = 1.0;
  double efficiency_xx = 1.0;
  double detector_jitter_fwhm_ps = 20.0;
  // Shared TCSPC electronics jitter, split evenly between the channels; the
  // default combines with two 20 ps detectors to a 50 ps two-photon FWHM.
  double electronics_jitter_fwhm_ps = 41.2311;
  double dark_rate_x_hz = 0.0;
  double dark_rate_xx_hz = 0.0;
  char basis_xx = 'H';
  char basis_x = 'H';
  std::uint64_t seed = 1;
  DriftProfile drift;
  double run_time_offset_s = 0.0;  // drift phase offset for sequential runs

  // XX channel is 0, X channel is 1.
  static constexpr std::uint16_t kChannelXX = 0;
  static constexpr std::uint16_t kChannelX = 1;

  double rep_period_ps() const { return 1000.0 / rep_rate_ghz; }
  double duration_s() const;
  // sin^2((pi/2) sqrt(P / P_pi)), clamped to [0, 1].
  double excitation_probability() const;
  // Per-channel Gaussian timing jitter actually applied to timestamps.
  double channel_jitter_sigma_ps() const;
  void validate() const;
};

StreamHeader make_stream_header(const SimConfig& config);

// Monte-Carlo time-tag stream of one pulsed-excitation run: per pulse the XX
// state is populated with the Rabi excitation probability, the cascade emits
// at exponential delays, the joint polarization outcome is sampled from the
// precessing two-photon state projected on (basis_xx, basis_x), and surviving
// photons receive per-arm efficiency thinning and timing jitter. Dark counts
// are uniform Poisson on both channels (flag bit 0 set). Sorted, deterministic
// for a fixed config.
std::vector<TimeTagRecord> simulate_pair_stream(const SimConfig& config);

struct LabeledStream {
  char basis_xx;
  char basis_x;
  StreamHeader header;
  std::vector<TimeTagRecord> records;
};

// One simulate_pair_stream per (basis_xx, basis_x) in {H,V,D,A,R,L}^2, with
// per-combination sub-seeds derived from config.seed and drift time advancing
// across combinations. The sink receives the 36 streams in canonical order.
void simulate_tomography_run(const SimConfig& config, double seconds_per_combination,
                             const std::function<void(const LabeledStream&)>& sink);
std::vector<LabeledStream> simulate_tomography_run(const SimConfig& config,
                                                   double seconds_per_combination);

struct RabiPoint {
  double power_uw = 0.0;
  std::uint64_t detected = 0;
};

// Power scan of the detected XX count (no polarizer): per point
// Binomial(pulses, excitation_probability * efficiency_xx) plus dark counts.
std::vector<RabiPoint> simulate_rabi_scan(const SimConfig& config,
                                          const std::vector<double>& powers_uw,
                                          std::uint64_t pulses_per_point);

}  // namespace epps
