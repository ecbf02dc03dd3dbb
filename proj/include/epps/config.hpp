#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "epps/simulator.hpp"
#include "epps/tomography.hpp"

namespace epps {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

// Analysis knobs carried by a run configuration; the CLI can override most
// of them with flags.
struct AnalysisConfig {
  CorrelationOptions correlation;
  std::int64_t tau_min_ps = -104;
  std::int64_t tau_max_ps = 800;
  std::int64_t tau_bin_ps = 8;
  int bootstrap_resamples = 0;
  BackgroundOptions background;
  double min_counts = 200.0;
  double rate_window_s = 1.0;
  int pairing = 2;
  std::int64_t neg_window_lo_ps = -100;
  std::int64_t neg_window_hi_ps = 162;
  double fit_range_lo_ps = -150.0;
  double fit_range_hi_ps = 800.0;
};

struct RunConfig {
  SimConfig simulation;
  double seconds_per_combination = 0.0;
  int iterations = 1;
  AnalysisConfig analysis;
  std::uint64_t config_hash = 0;  // FNV-1a of the raw config bytes
};

// Parses and schema-validates a JSON run configuration; unknown keys are
// rejected with their path named.
RunConfig load_run_config(const std::filesystem::path& path);

std::uint64_t fnv1a_hash(const std::string& bytes);

}  // namespace epps
