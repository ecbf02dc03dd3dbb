// Command-line front end: simulation, correlation, tomography, fits and the
// long-run stability report, all batch-driven and deterministic per seed.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <thread>

#include "epps/analysis.hpp"
#include "epps/config.hpp"
#include "epps/constants.hpp"
#include "epps/correlator.hpp"
#include "epps/errors.hpp"
#include "epps/fitting.hpp"
#include "epps/quantum.hpp"
#include "epps/random.hpp"
#include "epps/simulator.hpp"
#include "epps/timetag.hpp"
#include "epps/tomography.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNonConvergence = 3;

unsigned worker_threads() {
  if (const char* env = std::getenv("EPPS_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// All file outputs go through a temp-then-rename step.
void atomic_write_text(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw epps::DataError("cannot open '" + tmp.string() + "' for writing");
    out << content;
    if (!out) throw epps::DataError("I/O failure writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const json& doc) {
  atomic_write_text(path, doc.dump(2) + "\n");
}

json json_header() {
  return json{{"schema_version", epps::kConfigSchemaVersion},
              {"tool_version", epps::kToolVersion}};
}

std::vector<fs::path> qtt_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw epps::DataError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".qtt")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw epps::DataError("no .qtt streams in '" + dir.string() + "'");
  return files;
}

std::vector<fs::path> iteration_dirs(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir))
    throw epps::DataError("'" + run_dir.string() + "' is not a directory");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(run_dir))
    if (entry.is_directory()) {
      bool has_stream = false;
      for (const auto& f : fs::directory_iterator(entry.path()))
        if (f.is_regular_file() && f.path().extension() == ".qtt") {
          has_stream = true;
          break;
        }
      if (has_stream) dirs.push_back(entry.path());
    }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty())
    throw epps::DataError("no iteration subdirectories with .qtt streams in '" +
                          run_dir.string() + "'");
  return dirs;
}

json fit_result_json(const epps::FitResult& fit) {
  json doc = json_header();
  doc["params"] = fit.params;
  doc["sigmas"] = fit.sigmas;
  doc["reduced_chi2"] = fit.reduced_chi2;
  doc["converged"] = fit.converged;
  doc["flags"] = fit.flags;
  return doc;
}

std::string model_curve_csv(const epps::FitResult& fit, const std::string& x_name,
                            const std::string& y_name) {
  std::string csv = x_name + "," + y_name + "\n";
  char line[80];
  for (const auto& [x, y] : fit.model_curve) {
    std::snprintf(line, sizeof line, "%.9g,%.9g\n", x, y);
    csv += line;
  }
  return csv;
}

// Reads two-column numeric CSV, skipping comment and header lines.
std::vector<std::pair<double, double>> read_xy_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw epps::DataError("cannot open '" + path.string() + "'");
  std::vector<std::pair<double, double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    try {
      rows.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      continue;  // header or stray text line
    }
  }
  if (rows.empty()) throw epps::DataError("no numeric rows in '" + path.string() + "'");
  return rows;
}

template <typename Fn>
void parallel_for_each(const std::vector<fs::path>& items, Fn&& fn) {
  const unsigned threads = std::min<unsigned>(worker_threads(),
                                              static_cast<unsigned>(items.size()));
  if (threads <= 1) {
    for (const auto& item : items) fn(item);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> futures;
  for (unsigned t = 0; t < threads; ++t)
    futures.push_back(std::async(std::launch::async, [&] {
      for (std::size_t i = next.fetch_add(1); i < items.size(); i = next.fetch_add(1))
        fn(items[i]);
    }));
  for (auto& f : futures) f.get();
}

// ---------------------------------------------------------------------------

int cmd_simulate(const fs::path& config_path, const fs::path& out_dir) {
  const epps::RunConfig cfg = epps::load_run_config(config_path);
  fs::create_directories(out_dir);

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    fs::path dir = out_dir;
    if (cfg.iterations > 1) {
      char name[32];
      std::snprintf(name, sizeof name, "iter_%03d", iter + 1);
      dir = out_dir / name;
      fs::create_directories(dir);
    }
    epps::SimConfig sim = cfg.simulation;
    sim.seed = epps::mix_seed(cfg.simulation.seed, 1000000 + static_cast<std::uint64_t>(iter));
    sim.run_time_offset_s = iter * 36.0 * cfg.seconds_per_combination;
    epps::simulate_tomography_run(
        sim, cfg.seconds_per_combination, [&](const epps::LabeledStream& stream) {
          const std::string name = std::string() + stream.basis_xx + stream.basis_x + ".qtt";
          const fs::path tmp = dir / (name + ".tmp");
          epps::write_stream(tmp, stream.header, stream.records);
          fs::rename(tmp, dir / name);
        });
  }

  json manifest = json_header();
  manifest["config_hash"] = cfg.config_hash;
  manifest["format_version"] = 1;
  manifest["seed"] = cfg.simulation.seed;
  manifest["iterations"] = cfg.iterations;
  manifest["seconds_per_combination"] = cfg.seconds_per_combination;
  manifest["parameters"] = {
      {"rep_rate_ghz", cfg.simulation.rep_rate_ghz},
      {"pulse_count", cfg.simulation.pulse_count},
      {"excitation_power_uw", cfg.simulation.excitation_power_uw},
      {"pi_pulse_power_uw", cfg.simulation.pi_pulse_power_uw},
      {"efficiency_x", cfg.simulation.efficiency_x},
      {"efficiency_xx", cfg.simulation.efficiency_xx},
      {"detector_jitter_fwhm_ps", cfg.simulation.detector_jitter_fwhm_ps},
      {"electronics_jitter_fwhm_ps", cfg.simulation.electronics_jitter_fwhm_ps},
      {"dark_rate_x_hz", cfg.simulation.dark_rate_x_hz},
      {"dark_rate_xx_hz", cfg.simulation.dark_rate_xx_hz},
      {"fss_uev", cfg.simulation.cascade.fss_uev},
      {"t1_x_ps", cfg.simulation.cascade.t1_x_ps},
      {"t1_xx_ps", cfg.simulation.cascade.t1_xx_ps},
      {"jitter_fwhm_2ph_ps", cfg.simulation.cascade.jitter_fwhm_2ph_ps},
      {"basis_rotation_deg", cfg.simulation.cascade.basis_rotation_deg}};
  write_json(out_dir / "manifest.json", manifest);
  std::cout << "wrote " << cfg.iterations << " iteration(s) of 36 streams to " << out_dir
            << "\n";
  return kExitOk;
}

struct CorrelateFlags {
  std::int64_t bin_width_ps = 8;
  std::int64_t window_ps = 25000;
  std::uint16_t channel_a = 1;
  std::uint16_t channel_b = 0;
  int auto_channel = -1;
  std::int64_t g2_period_ps = 0;
  std::int64_t g2_halfwidth_ps = 400;
  int g2_side_peaks = 10;
};

int cmd_correlate(const fs::path& in_dir, const fs::path& out_dir,
                  const CorrelateFlags& flags) {
  const auto files = qtt_files(in_dir);
  fs::create_directories(out_dir);

  epps::CorrelationOptions opt;
  opt.bin_width_ps = flags.bin_width_ps;
  opt.window_ps = flags.window_ps;
  opt.channel_a = flags.channel_a;
  opt.channel_b = flags.channel_b;

  std::mutex mutex;
  std::vector<std::string> rate_rows;
  std::exception_ptr failure;
  parallel_for_each(files, [&](const fs::path& file) {
    try {
      const epps::CoincidenceHistogram hist = epps::cross_correlate_file(file, opt);
      std::string label = hist.label_string();
      if (label == "--") label = file.stem().string();
      const fs::path tmp = out_dir / (label + ".csv.tmp");
      epps::write_histogram_csv(hist, tmp);
      fs::rename(tmp, out_dir / (label + ".csv"));
      char row[256];
      std::snprintf(row, sizeof row, "%s,%s,%llu,%llu,%.9g,%.9g,%.9g,%llu\n",
                    file.filename().string().c_str(), label.c_str(),
                    static_cast<unsigned long long>(hist.total_singles_a),
                    static_cast<unsigned long long>(hist.total_singles_b), hist.duration_s,
                    hist.duration_s > 0.0 ? hist.total_singles_a / hist.duration_s : 0.0,
                    hist.duration_s > 0.0 ? hist.total_singles_b / hist.duration_s : 0.0,
                    static_cast<unsigned long long>(hist.total_counts()));
      std::lock_guard lock(mutex);
      rate_rows.emplace_back(row);
    } catch (...) {
      std::lock_guard lock(mutex);
      if (!failure) failure = std::current_exception();
    }
  });
  if (failure) std::rethrow_exception(failure);

  std::sort(rate_rows.begin(), rate_rows.end());
  std::string csv =
      "file,label,singles_a,singles_b,duration_s,rate_a_hz,rate_b_hz,coincidences\n";
  for (const auto& row : rate_rows) csv += row;
  atomic_write_text(out_dir / "rates.csv", csv);

  if (flags.auto_channel >= 0) {
    epps::CoincidenceHistogram merged_auto;
    bool first = true;
    for (const auto& file : files) {
      const auto hist = epps::auto_correlate_file(
          file, static_cast<std::uint16_t>(flags.auto_channel), flags.bin_width_ps,
          flags.window_ps);
      if (first) {
        merged_auto = hist;
        first = false;
      } else {
        merged_auto.add(hist);
      }
    }
    char name[48];
    std::snprintf(name, sizeof name, "auto_ch%d.csv", flags.auto_channel);
    const fs::path tmp = out_dir / (std::string(name) + ".tmp");
    epps::write_histogram_csv(merged_auto, tmp);
    fs::rename(tmp, out_dir / name);
    if (flags.g2_period_ps > 0) {
      const epps::G2Result g2 = epps::g2_from_histogram(
          merged_auto, flags.g2_period_ps, flags.g2_halfwidth_ps, flags.g2_side_peaks);
      json doc = json_header();
      doc["g2_zero"] = g2.g2_zero;
      doc["sigma"] = g2.sigma;
      doc["purity"] = 1.0 - g2.g2_zero;
      doc["center_counts"] = g2.center_counts;
      doc["mean_side_counts"] = g2.mean_side_counts;
      write_json(out_dir / "g2.json", doc);
    }
  }
  std::cout << "correlated " << files.size() << " stream(s) into " << out_dir << "\n";
  return kExitOk;
}

json rho_json(const epps::Matrix4c& rho) {
  json entries = json::array();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      entries.push_back(json::array({rho(r, c).real(), rho(r, c).imag()}));
  return entries;
}

struct TomoFlags {
  CorrelateFlags correlate;
  std::int64_t tau_min_ps = -104;
  std::int64_t tau_max_ps = 800;
  std::int64_t tau_bin_ps = 8;
  int bootstrap = 0;
  std::int64_t bg_lo_ps = -450;
  std::int64_t bg_hi_ps = -150;
  bool no_background = false;
  double min_counts = 200.0;
};

int cmd_tomo(const fs::path& in_dir, const fs::path& out_dir, const TomoFlags& flags) {
  epps::CorrelationOptions opt;
  opt.bin_width_ps = flags.correlate.bin_width_ps;
  opt.window_ps = flags.correlate.window_ps;
  opt.channel_a = flags.correlate.channel_a;
  opt.channel_b = flags.correlate.channel_b;
  const epps::TomographyDataset dataset = epps::assemble_dataset_from_directory(in_dir, opt);

  epps::TimeResolvedOptions tr;
  tr.min_counts = flags.min_counts;
  tr.window.background.enabled = !flags.no_background;
  tr.window.background.window_lo_ps = flags.bg_lo_ps;
  tr.window.background.window_hi_ps = flags.bg_hi_ps;
  tr.window.bootstrap_resamples = flags.bootstrap;
  const epps::TimeResolvedReconstruction rec = epps::reconstruct_time_resolved(
      dataset, {flags.tau_min_ps, flags.tau_max_ps}, flags.tau_bin_ps, tr);

  fs::create_directories(out_dir);
  json doc = json_header();
  doc["tau_bin_ps"] = flags.tau_bin_ps;
  doc["bootstrap_resamples"] = flags.bootstrap;
  if (flags.bootstrap == 0) doc["sigmas_omitted"] = true;
  json bins = json::array();
  for (const auto& b : rec.bins) {
    json entry;
    entry["tau_lo_ps"] = b.tau_bin_ps.first;
    entry["tau_hi_ps"] = b.tau_bin_ps.second;
    entry["rho"] = rho_json(b.rho);
    entry["negativity_2n"] = b.negativity;
    entry["sigma_2n"] = b.sigma_negativity;  // NaN serializes as null
    entry["nll"] = b.nll;
    entry["iterations"] = b.iterations;
    entry["converged"] = b.converged;
    entry["counts"] = b.total_counts;
    bins.push_back(entry);
  }
  doc["bins"] = bins;
  json skipped = json::array();
  for (const auto& s : rec.skipped)
    skipped.push_back({{"tau_lo_ps", s.tau_bin_ps.first},
                       {"tau_hi_ps", s.tau_bin_ps.second},
                       {"counts", s.total_counts}});
  doc["skipped"] = skipped;
  write_json(out_dir / "tomo.json", doc);

  std::string csv = "tau_center_ps,negativity_2n,sigma_2n,counts\n";
  char line[128];
  for (const auto& b : rec.bins) {
    std::snprintf(line, sizeof line, "%.1f,%.9g,%.9g,%.9g\n",
                  0.5 * static_cast<double>(b.tau_bin_ps.first + b.tau_bin_ps.second),
                  b.negativity, b.sigma_negativity, b.total_counts);
    csv += line;
  }
  atomic_write_text(out_dir / "fig4b.csv", csv);

  double max_neg = 0.0;
  for (const auto& b : rec.bins) max_neg = std::max(max_neg, b.negativity);
  std::cout << "reconstructed " << rec.bins.size() << " tau bins (max 2n = " << max_neg
            << "), skipped " << rec.skipped.size() << "\n";
  return kExitOk;
}

int cmd_fit(const std::string& kind, const fs::path& in_file, const fs::path& out_dir,
            double jitter_fwhm, double fit_min, double fit_max) {
  fs::create_directories(out_dir);
  epps::FitResult fit;
  std::string x_name = "x", y_name = "model";
  if (kind == "lifetime") {
    const epps::CoincidenceHistogram hist = epps::read_histogram_csv(in_file);
    fit = epps::fit_lifetime(hist, jitter_fwhm, {fit_min, fit_max});
    x_name = "tau_ps";
    y_name = "counts_model";
  } else if (kind == "fss") {
    const auto samples = read_xy_csv(in_file);
    fit = epps::fit_fss(samples);
    x_name = "hwp_deg";
    y_name = "energy_uev_model";
  } else if (kind == "rabi") {
    const auto samples = read_xy_csv(in_file);
    fit = epps::fit_rabi(samples);
    x_name = "power_uw";
    y_name = "counts_model";
  } else {
    throw epps::ConfigError("unknown fit kind '" + kind + "' (lifetime|fss|rabi)");
  }

  write_json(out_dir / ("fit_" + kind + ".json"), fit_result_json(fit));
  atomic_write_text(out_dir / ("fit_" + kind + "_model.csv"),
                    model_curve_csv(fit, x_name, y_name));
  for (const auto& [name, value] : fit.params)
    std::cout << name << " = " << value << " +- " << fit.sigmas.at(name) << "\n";
  if (!fit.converged)
    throw epps::ConvergenceError("fit did not converge (partial output retained)");
  return kExitOk;
}

struct ReportFlags {
  CorrelateFlags correlate;
  int pairing = 2;
  double rate_window_s = 0.0;  // 0: one window per combination stream
  std::int64_t neg_lo_ps = -100;
  std::int64_t neg_hi_ps = 162;
  int bootstrap = 0;
  std::int64_t bg_lo_ps = -450;
  std::int64_t bg_hi_ps = -150;
};

int cmd_report(const fs::path& run_dir, const fs::path& out_dir, const ReportFlags& flags) {
  const auto dirs = iteration_dirs(run_dir);

  epps::CorrelationOptions opt;
  opt.bin_width_ps = flags.correlate.bin_width_ps;
  opt.window_ps = flags.correlate.window_ps;
  opt.channel_a = flags.correlate.channel_a;
  opt.channel_b = flags.correlate.channel_b;

  // Per-combination singles laid on a synthetic sequential timeline.
  std::vector<epps::TomographyDataset> datasets;
  epps::RateSeriesBundle rates;
  double clock_s = 0.0;
  double iteration_duration_s = 0.0;
  double rate_window_s = flags.rate_window_s;
  for (const auto& dir : dirs) {
    const auto files = qtt_files(dir);
    std::vector<epps::CoincidenceHistogram> hists;
    for (const auto& file : files) {
      const auto hist = epps::cross_correlate_file(file, opt);
      hists.push_back(hist);
      if (rate_window_s <= 0.0)
        rate_window_s = std::max(hist.duration_s * 0.9, 1e-6);
      for (auto [series, channel] :
           {std::pair{&rates.x, epps::SimConfig::kChannelX},
            std::pair{&rates.xx, epps::SimConfig::kChannelXX},
            std::pair{&rates.combined, epps::kAllChannels}}) {
        const auto samples = epps::rate_series_file(file, channel, rate_window_s);
        for (auto s : samples) {
          s.t_center_s += clock_s;
          series->push_back(s);
        }
      }
      clock_s += hist.duration_s;
    }
    datasets.push_back(epps::assemble_dataset(hists));
    if (iteration_duration_s == 0.0) iteration_duration_s = clock_s;
  }

  epps::StabilityOptions sopt;
  sopt.pairing = flags.pairing;
  sopt.iteration_duration_s = iteration_duration_s;
  sopt.neg_window_lo_ps = flags.neg_lo_ps;
  sopt.neg_window_hi_ps = flags.neg_hi_ps;
  sopt.window.background.window_lo_ps = flags.bg_lo_ps;
  sopt.window.background.window_hi_ps = flags.bg_hi_ps;
  sopt.window.bootstrap_resamples = flags.bootstrap;
  const epps::StabilityReport report =
      epps::stability_report(datasets, rates, rate_window_s, sopt);

  fs::create_directories(out_dir);
  json doc = json_header();
  doc["iterations"] = dirs.size();
  doc["pairing"] = flags.pairing;
  doc["rate_window_s"] = rate_window_s;
  doc["mean_rate_hz"] = report.mean_rate_hz;
  doc["max_rate_hz"] = report.max_rate_hz;
  doc["fluctuation_peak_to_peak"] = report.fluctuation;
  doc["fluctuation_rms"] = report.fluctuation_rms;
  doc["min_negativity_2n"] = report.min_negativity;
  doc["mean_negativity_2n"] = report.mean_negativity;
  json neg = json::array();
  for (const auto& p : report.negativity_series)
    neg.push_back({{"t_center_s", p.t_center_s}, {"negativity_2n", p.value},
                   {"sigma_2n", p.sigma}});
  doc["negativity_series"] = neg;
  write_json(out_dir / "report.json", doc);

  std::string fig5a = "t_center_s,rate_x_hz,rate_xx_hz,rate_combined_hz\n";
  char line[160];
  for (std::size_t i = 0; i < report.rates.combined.size(); ++i) {
    const double rx = i < report.rates.x.size() ? report.rates.x[i].rate_hz : 0.0;
    const double rxx = i < report.rates.xx.size() ? report.rates.xx[i].rate_hz : 0.0;
    std::snprintf(line, sizeof line, "%.9g,%.9g,%.9g,%.9g\n",
                  report.rates.combined[i].t_center_s, rx, rxx,
                  report.rates.combined[i].rate_hz);
    fig5a += line;
  }
  atomic_write_text(out_dir / "fig5a.csv", fig5a);

  std::string fig5b = "t_center_s,negativity_2n,sigma_2n\n";
  for (const auto& p : report.negativity_series) {
    std::snprintf(line, sizeof line, "%.9g,%.9g,%.9g\n", p.t_center_s, p.value, p.sigma);
    fig5b += line;
  }
  atomic_write_text(out_dir / "fig5b.csv", fig5b);

  std::printf("iterations      %zu\n", dirs.size());
  std::printf("mean rate       %.3f kHz\n", report.mean_rate_hz / 1e3);
  std::printf("max rate        %.3f kHz\n", report.max_rate_hz / 1e3);
  std::printf("fluctuation     %.2f %% (peak-to-peak), %.2f %% (rms)\n",
              100.0 * report.fluctuation, 100.0 * report.fluctuation_rms);
  std::printf("min 2n          %.4f\n", report.min_negativity);
  std::printf("mean 2n         %.4f\n", report.mean_negativity);
  return kExitOk;
}

int cmd_model_curve(double fss_uev, double t1_ps, double jitter_fwhm_ps, double rotation_deg,
                    double tau_max_ps, double step_ps, const fs::path& out_file) {
  if (step_ps <= 0.0 || tau_max_ps <= 0.0)
    throw epps::ConfigError("tau range and step must be positive");
  epps::CascadeModelParams params;
  params.fss_uev = fss_uev;
  params.t1_x_ps = t1_ps;
  params.jitter_fwhm_2ph_ps = jitter_fwhm_ps;
  params.basis_rotation_deg = rotation_deg;
  std::vector<double> grid;
  for (double tau = 0.0; tau <= tau_max_ps + 1e-9; tau += step_ps) grid.push_back(tau);
  const auto curve = epps::model_negativity_curve(params, grid);
  std::string csv = "tau_ps,negativity_2n\n";
  char line[80];
  for (const auto& [tau, neg] : curve) {
    std::snprintf(line, sizeof line, "%.9g,%.9g\n", tau, neg);
    csv += line;
  }
  atomic_write_text(out_file, csv);
  std::cout << "wrote " << curve.size() << " model points to " << out_file << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entangled photon pair source simulation and analysis toolkit"};
  app.require_subcommand(1);

  // simulate
  std::string sim_config, sim_out;
  auto* simulate = app.add_subcommand("simulate", "Generate 36-basis time-tag streams");
  simulate->add_option("--config", sim_config, "Run configuration JSON file")->required();
  simulate->add_option("--out", sim_out, "Output directory")->required();

  // correlate
  std::string cor_in, cor_out;
  CorrelateFlags cor;
  auto* correlate = app.add_subcommand("correlate", "Histogram coincidences per stream");
  correlate->add_option("--in", cor_in, "Directory of .qtt streams")->required();
  correlate->add_option("--out", cor_out, "Output directory")->required();
  correlate->add_option("--bin", cor.bin_width_ps, "Bin width in ps (default 8)");
  correlate->add_option("--window", cor.window_ps, "Pairing window in ps (default 25000)");
  correlate->add_option("--a-channel", cor.channel_a,
                        "Channel taken as 'a' in delta = t_a - t_b (default 1, the X arm)");
  correlate->add_option("--b-channel", cor.channel_b,
                        "Channel taken as 'b' in delta = t_a - t_b (default 0, the XX arm)");
  correlate->add_option("--auto-channel", cor.auto_channel,
                        "Also write the auto-correlation of this channel");
  correlate->add_option("--g2-period", cor.g2_period_ps,
                        "Repetition period in ps for g2 estimation from the auto histogram");
  correlate->add_option("--g2-halfwidth", cor.g2_halfwidth_ps,
                        "Peak integration halfwidth in ps (default 400)");
  correlate->add_option("--g2-peaks", cor.g2_side_peaks,
                        "Side peaks per side for g2 normalization (default 10)");

  // tomo
  std::string tomo_in, tomo_out;
  TomoFlags tomo;
  auto* tomo_cmd = app.add_subcommand("tomo", "Time-resolved density-matrix reconstruction");
  tomo_cmd->add_option("--in", tomo_in, "Directory with the 36 .qtt streams")->required();
  tomo_cmd->add_option("--out", tomo_out, "Output directory")->required();
  tomo_cmd->add_option("--bin", tomo.correlate.bin_width_ps, "Histogram bin width in ps");
  tomo_cmd->add_option("--window", tomo.correlate.window_ps, "Pairing window in ps");
  tomo_cmd->add_option("--a-channel", tomo.correlate.channel_a, "Channel 'a' (default 1)");
  tomo_cmd->add_option("--b-channel", tomo.correlate.channel_b, "Channel 'b' (default 0)");
  tomo_cmd->add_option("--tau-min", tomo.tau_min_ps, "Reconstruction range start in ps");
  tomo_cmd->add_option("--tau-max", tomo.tau_max_ps, "Reconstruction range end in ps");
  tomo_cmd->add_option("--tau-bin", tomo.tau_bin_ps,
                       "Reconstruction bin in ps (multiple of --bin)");
  tomo_cmd->add_option("--bootstrap", tomo.bootstrap,
                       "Bootstrap resamples per bin (0 omits sigmas, else >= 100)");
  tomo_cmd->add_option("--bg-lo", tomo.bg_lo_ps,
                       "Accidental-background window start in ps (default -450)");
  tomo_cmd->add_option("--bg-hi", tomo.bg_hi_ps,
                       "Accidental-background window end in ps (default -150)");
  tomo_cmd->add_flag("--no-background", tomo.no_background,
                     "Disable accidental-background subtraction");
  tomo_cmd->add_option("--min-counts", tomo.min_counts,
                       "Skip tau bins with fewer raw counts (default 200)");

  // fit
  std::string fit_kind, fit_in, fit_out = ".";
  double fit_jitter = 50.0, fit_min = -150.0, fit_max = 800.0;
  auto* fit_cmd = app.add_subcommand("fit", "Lifetime / fine-structure / Rabi curve fits");
  fit_cmd->add_option("--kind", fit_kind, "One of lifetime, fss, rabi")->required();
  fit_cmd->add_option("--in", fit_in,
                      "Input file (histogram CSV for lifetime; x,y CSV otherwise)")
      ->required();
  fit_cmd->add_option("--out", fit_out, "Output directory (default .)");
  fit_cmd->add_option("--jitter-fwhm", fit_jitter,
                      "Two-photon jitter FWHM in ps held fixed in the lifetime fit");
  fit_cmd->add_option("--fit-min", fit_min, "Lifetime fit range start in ps");
  fit_cmd->add_option("--fit-max", fit_max, "Lifetime fit range end in ps");

  // report
  std::string rep_run, rep_out;
  ReportFlags rep;
  auto* report_cmd = app.add_subcommand("report", "Long-run stability report");
  report_cmd->add_option("--run", rep_run, "Run directory with iteration subdirectories")
      ->required();
  report_cmd->add_option("--out", rep_out, "Output directory")->required();
  report_cmd->add_option("--pairing", rep.pairing,
                         "Consecutive iterations per negativity point (default 2)");
  report_cmd->add_option("--rate-window", rep.rate_window_s,
                         "Rate window in seconds (default: one window per stream)");
  report_cmd->add_option("--bin", rep.correlate.bin_width_ps, "Histogram bin width in ps");
  report_cmd->add_option("--window", rep.correlate.window_ps, "Pairing window in ps");
  report_cmd->add_option("--a-channel", rep.correlate.channel_a, "Channel 'a' (default 1)");
  report_cmd->add_option("--b-channel", rep.correlate.channel_b, "Channel 'b' (default 0)");
  report_cmd->add_option("--neg-lo", rep.neg_lo_ps,
                         "Coincidence window start in ps for the per-group 2n");
  report_cmd->add_option("--neg-hi", rep.neg_hi_ps,
                         "Coincidence window end in ps for the per-group 2n");
  report_cmd->add_option("--bootstrap", rep.bootstrap,
                         "Bootstrap resamples per group (0 omits sigmas, else >= 100)");
  report_cmd->add_option("--bg-lo", rep.bg_lo_ps,
                         "Accidental-background window start in ps (default -450)");
  report_cmd->add_option("--bg-hi", rep.bg_hi_ps,
                         "Accidental-background window end in ps (default -150)");

  // model-curve
  double mc_fss = 2.54, mc_t1 = 162.0, mc_jitter = 50.0, mc_rot = 0.0, mc_tau_max = 810.0,
         mc_step = 8.0;
  std::string mc_out = "model_curve.csv";
  auto* model_cmd = app.add_subcommand("model-curve",
                                       "Negativity-vs-delay theory curve for ideal source");
  model_cmd->add_option("--fss", mc_fss, "Fine-structure splitting in ueV (default 2.54)");
  model_cmd->add_option("--t1", mc_t1, "X lifetime in ps (default 162)");
  model_cmd->add_option("--jitter", mc_jitter, "Two-photon jitter FWHM in ps (default 50)");
  model_cmd->add_option("--rotation", mc_rot, "Eigenbasis rotation in degrees (default 0)");
  model_cmd->add_option("--tau-max", mc_tau_max, "Grid end in ps");
  model_cmd->add_option("--step", mc_step, "Grid step in ps");
  model_cmd->add_option("--out", mc_out, "Output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim_config, sim_out);
    if (correlate->parsed()) return cmd_correlate(cor_in, cor_out, cor);
    if (tomo_cmd->parsed()) return cmd_tomo(tomo_in, tomo_out, tomo);
    if (fit_cmd->parsed()) return cmd_fit(fit_kind, fit_in, fit_out, fit_jitter, fit_min, fit_max);
    if (report_cmd->parsed()) return cmd_report(rep_run, rep_out, rep);
    if (model_cmd->parsed())
      return cmd_model_curve(mc_fss, mc_t1, mc_jitter, mc_rot, mc_tau_max, mc_step, mc_out);
  } catch (const epps::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const epps::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNonConvergence;
  } catch (const epps::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
