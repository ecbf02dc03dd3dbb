#include "epps/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "epps/errors.hpp"

namespace epps {

namespace {

using nlohmann::json;

void reject_unknown(const json& node, const std::set<std::string>& known,
                    const std::string& path) {
  for (const auto& [key, value] : node.items())
    if (!known.contains(key))
      throw ConfigError("unknown configuration key '" + path + key + "'");
}

template <typename T>
T get_or(const json& node, const std::string& key, T fallback) {
  if (!node.contains(key)) return fallback;
  try {
    return node.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("configuration key '" + key + "' has the wrong type");
  }
}

char get_basis(const json& node, const std::string& key, char fallback) {
  if (!node.contains(key)) return fallback;
  const auto s = node.at(key).get<std::string>();
  if (s.size() != 1) throw ConfigError("'" + key + "' must be a single basis letter");
  return s[0];
}

}  // namespace

std::uint64_t fnv1a_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string raw = buffer.str();

  json root;
  try {
    root = json::parse(raw);
  } catch (const json::exception& e) {
    throw ConfigError("configuration is not valid JSON: " + std::string(e.what()));
  }

  reject_unknown(root, {"schema_version", "simulation", "analysis"}, "");
  const int schema = get_or<int>(root, "schema_version", -1);
  if (schema != kConfigSchemaVersion)
    throw ConfigError("unsupported schema_version (expected " +
                      std::to_string(kConfigSchemaVersion) + ")");
  if (!root.contains("simulation"))
    throw ConfigError("configuration is missing the 'simulation' section");

  RunConfig cfg;
  cfg.config_hash = fnv1a_hash(raw);

  const json& sim = root.at("simulation");
  reject_unknown(sim,
                 {"rep_rate_ghz", "pulse_count", "seconds_per_combination",
                  "excitation_power_uw", "pi_pulse_power_uw", "efficiency_x",
                  "efficiency_xx", "detector_jitter_fwhm_ps", "electronics_jitter_fwhm_ps",
                  "dark_rate_x_hz", "dark_rate_xx_hz", "seed", "iterations", "cascade",
                  "drift", "basis_xx", "basis_x"},
                 "simulation.");
  SimConfig& s = cfg.simulation;
  s.rep_rate_ghz = get_or<double>(sim, "rep_rate_ghz", s.rep_rate_ghz);
  s.excitation_power_uw = get_or<double>(sim, "excitation_power_uw", s.excitation_power_uw);
  s.pi_pulse_power_uw = get_or<double>(sim, "pi_pulse_power_uw", s.pi_pulse_power_uw);
  s.efficiency_x = get_or<double>(sim, "efficiency_x", s.efficiency_x);
  s.efficiency_xx = get_or<double>(sim, "efficiency_xx", s.efficiency_xx);
  s.detector_jitter_fwhm_ps =
      get_or<double>(sim, "detector_jitter_fwhm_ps", s.detector_jitter_fwhm_ps);
  s.electronics_jitter_fwhm_ps =
      get_or<double>(sim, "electronics_jitter_fwhm_ps", s.electronics_jitter_fwhm_ps);
  s.dark_rate_x_hz = get_or<double>(sim, "dark_rate_x_hz", s.dark_rate_x_hz);
  s.dark_rate_xx_hz = get_or<double>(sim, "dark_rate_xx_hz", s.dark_rate_xx_hz);
  s.seed = get_or<std::uint64_t>(sim, "seed", s.seed);
  s.basis_xx = get_basis(sim, "basis_xx", s.basis_xx);
  s.basis_x = get_basis(sim, "basis_x", s.basis_x);
  cfg.iterations = get_or<int>(sim, "iterations", 1);
  if (cfg.iterations < 1) throw ConfigError("iterations must be >= 1");

  const bool has_pulses = sim.contains("pulse_count");
  const bool has_seconds = sim.contains("seconds_per_combination");
  if (has_pulses == has_seconds)
    throw ConfigError(
        "specify exactly one of simulation.pulse_count and "
        "simulation.seconds_per_combination");
  if (has_pulses) {
    s.pulse_count = sim.at("pulse_count").get<std::uint64_t>();
    cfg.seconds_per_combination =
        static_cast<double>(s.pulse_count) / (s.rep_rate_ghz * 1e9);
  } else {
    cfg.seconds_per_combination = sim.at("seconds_per_combination").get<double>();
    if (cfg.seconds_per_combination < 0.0)
      throw ConfigError("seconds_per_combination must be >= 0");
    s.pulse_count = static_cast<std::uint64_t>(
        std::llround(cfg.seconds_per_combination * s.rep_rate_ghz * 1e9));
  }

  if (sim.contains("cascade")) {
    const json& c = sim.at("cascade");
    reject_unknown(
        c, {"fss_uev", "t1_x_ps", "t1_xx_ps", "jitter_fwhm_2ph_ps", "basis_rotation_deg"},
        "simulation.cascade.");
    s.cascade.fss_uev = get_or<double>(c, "fss_uev", s.cascade.fss_uev);
    s.cascade.t1_x_ps = get_or<double>(c, "t1_x_ps", s.cascade.t1_x_ps);
    s.cascade.t1_xx_ps = get_or<double>(c, "t1_xx_ps", s.cascade.t1_xx_ps);
    s.cascade.jitter_fwhm_2ph_ps =
        get_or<double>(c, "jitter_fwhm_2ph_ps", s.cascade.jitter_fwhm_2ph_ps);
    s.cascade.basis_rotation_deg =
        get_or<double>(c, "basis_rotation_deg", s.cascade.basis_rotation_deg);
  }

  if (sim.contains("drift")) {
    const json& d = sim.at("drift");
    reject_unknown(d, {"kind", "amplitude", "period_or_slope"}, "simulation.drift.");
    const std::string kind = get_or<std::string>(d, "kind", "none");
    if (kind == "none") s.drift.kind = DriftProfile::Kind::None;
    else if (kind == "sinusoidal") s.drift.kind = DriftProfile::Kind::Sinusoidal;
    else if (kind == "linear") s.drift.kind = DriftProfile::Kind::Linear;
    else throw ConfigError("drift.kind must be one of none, sinusoidal, linear");
    s.drift.amplitude = get_or<double>(d, "amplitude", 0.0);
    s.drift.period_or_slope = get_or<double>(d, "period_or_slope", 0.0);
  }

  if (root.contains("analysis")) {
    const json& a = root.at("analysis");
    reject_unknown(a,
                   {"bin_width_ps", "window_ps", "channel_a", "channel_b", "tau_min_ps",
                    "tau_max_ps", "tau_bin_ps", "bootstrap_resamples", "background",
                    "min_counts", "rate_window_s", "pairing", "neg_window_lo_ps",
                    "neg_window_hi_ps", "fit_range_ps"},
                   "analysis.");
    AnalysisConfig& an = cfg.analysis;
    an.correlation.bin_width_ps =
        get_or<std::int64_t>(a, "bin_width_ps", an.correlation.bin_width_ps);
    an.correlation.window_ps = get_or<std::int64_t>(a, "window_ps", an.correlation.window_ps);
    an.correlation.channel_a =
        get_or<std::uint16_t>(a, "channel_a", an.correlation.channel_a);
    an.correlation.channel_b =
        get_or<std::uint16_t>(a, "channel_b", an.correlation.channel_b);
    an.tau_min_ps = get_or<std::int64_t>(a, "tau_min_ps", an.tau_min_ps);
    an.tau_max_ps = get_or<std::int64_t>(a, "tau_max_ps", an.tau_max_ps);
    an.tau_bin_ps = get_or<std::int64_t>(a, "tau_bin_ps", an.tau_bin_ps);
    an.bootstrap_resamples = get_or<int>(a, "bootstrap_resamples", an.bootstrap_resamples);
    an.min_counts = get_or<double>(a, "min_counts", an.min_counts);
    an.rate_window_s = get_or<double>(a, "rate_window_s", an.rate_window_s);
    an.pairing = get_or<int>(a, "pairing", an.pairing);
    an.neg_window_lo_ps = get_or<std::int64_t>(a, "neg_window_lo_ps", an.neg_window_lo_ps);
    an.neg_window_hi_ps = get_or<std::int64_t>(a, "neg_window_hi_ps", an.neg_window_hi_ps);
    if (a.contains("fit_range_ps")) {
      const json& r = a.at("fit_range_ps");
      if (!r.is_array() || r.size() != 2)
        throw ConfigError("analysis.fit_range_ps must be a [lo, hi] pair");
      an.fit_range_lo_ps = r[0].get<double>();
      an.fit_range_hi_ps = r[1].get<double>();
    }
    if (a.contains("background")) {
      const json& b = a.at("background");
      reject_unknown(b, {"enabled", "window_lo_ps", "window_hi_ps"},
                     "analysis.background.");
      an.background.enabled = get_or<bool>(b, "enabled", an.background.enabled);
      an.background.window_lo_ps =
          get_or<std::int64_t>(b, "window_lo_ps", an.background.window_lo_ps);
      an.background.window_hi_ps =
          get_or<std::int64_t>(b, "window_hi_ps", an.background.window_hi_ps);
    }
  }

  cfg.simulation.validate();
  return cfg;
}

}  // namespace epps
