#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "epps/correlator.hpp"
#include "epps/quantum.hpp"

namespace epps {

// The 36 coincidence histograms of a full polarization tomography, keyed by
// (basis_xx, basis_x) in {H,V,D,A,R,L}^2 on a common bin grid.
struct TomographyDataset {
  std::array<CoincidenceHistogram, 36> histograms;

  static std::size_t index_of(char basis_xx, char basis_x);
  static std::pair<char, char> labels_of(std::size_t index);
  const CoincidenceHistogram& at(char basis_xx, char basis_x) const;
  CoincidenceHistogram& at(char basis_xx, char basis_x);
  // Checks that all 36 entries are present, labeled and on identical grids.
  void validate() const;
  // Element-wise accumulation of another iteration.
  void add(const TomographyDataset& other);
};

// Builds a dataset from labeled histograms; missing or duplicate basis
// combinations are rejected with the offending pair named.
TomographyDataset assemble_dataset(const std::vector<CoincidenceHistogram>& histograms);
// Reads every *.qtt stream in `directory` and correlates it on the common
// grid given by `options`; stream basis labels key the 36 slots.
TomographyDataset assemble_dataset_from_directory(const std::filesystem::path& directory,
                                                  const CorrelationOptions& options);

struct MleOptions {
  // Relative per-combination exposures; empty means equal (the paper's fixed
  // integration time per combination).
  std::vector<double> exposures;
  int max_iterations = 2000;
  double nll_tolerance = 1e-9;
  double param_tolerance = 1e-8;
  int random_starts = 1;
  std::uint64_t seed = 7;
};

struct ReconstructionResult {
  Matrix4c rho = Matrix4c::Zero();
  std::pair<std::int64_t, std::int64_t> tau_bin_ps{0, 0};
  double nll = 0.0;
  int iterations = 0;
  bool converged = false;
  double negativity = 0.0;
  double sigma_negativity = 0.0;  // NaN when no bootstrap was run
  double total_counts = 0.0;

  DensityMatrix density_matrix() const { return DensityMatrix::from_matrix(rho); }
};

// Maximum-likelihood state reconstruction from the 36 projection counts (in
// canonical basis order, XX index major). rho = T^dagger T / tr(T^dagger T)
// with T lower triangular (16 real parameters) minimizing the Poisson
// negative log-likelihood sum_i [N p_i - n_i ln(N p_i)] with a single fitted
// scale N. BFGS with analytic gradients, multi-start (maximally mixed,
// projected linear inversion, random), ties broken by the lexicographically
// smallest parameter vector.
ReconstructionResult reconstruct_mle(const std::array<double, 36>& counts,
                                     const MleOptions& options = {});

struct BackgroundOptions {
  bool enabled = true;
  // Accidental-only delta-tau window, away from the coincidence peaks; the
  // default sits just left of the cascade peak at zero delay.
  std::int64_t window_lo_ps = -450;
  std::int64_t window_hi_ps = -150;
};

// Flat accidental level per histogram bin, estimated per combination from an
// off-peak side region.
std::array<double, 36> estimate_background(const TomographyDataset& dataset,
                                           const BackgroundOptions& options);

struct WindowOptions {
  BackgroundOptions background;
  MleOptions mle;
  int bootstrap_resamples = 0;  // 0 disables the bootstrap
  std::uint64_t bootstrap_seed = 99;
};

// Single reconstruction from the counts integrated over [tau_lo, tau_hi).
ReconstructionResult reconstruct_window(const TomographyDataset& dataset,
                                        std::int64_t tau_lo_ps, std::int64_t tau_hi_ps,
                                        const WindowOptions& options = {});

struct TimeResolvedOptions {
  WindowOptions window;
  double min_counts = 200.0;  // raw counts below this skip the bin
};

struct SkippedBin {
  std::pair<std::int64_t, std::int64_t> tau_bin_ps;
  double total_counts = 0.0;
};

struct TimeResolvedReconstruction {
  std::vector<ReconstructionResult> bins;
  std::vector<SkippedBin> skipped;
};

// One MLE per tau bin of width `bin_ps` (a multiple of the histogram bin
// width) across tau_range; range endpoints snap outward to the histogram
// grid. Bins below the count floor are skipped and reported.
TimeResolvedReconstruction reconstruct_time_resolved(
    const TomographyDataset& dataset, std::pair<std::int64_t, std::int64_t> tau_range_ps,
    std::int64_t bin_ps, const TimeResolvedOptions& options = {});

struct BootstrapResult {
  double sigma_negativity = 0.0;
  double sigma_fidelity_phiplus = 0.0;
};

// Poisson-resamples the 36 counts and re-runs the MLE; deterministic for a
// fixed seed. Requires n_resamples >= 100.
BootstrapResult bootstrap_uncertainty(const std::array<double, 36>& counts,
                                      int n_resamples, std::uint64_t seed,
                                      const MleOptions& options = {});

// Projection probabilities p_i = <proj_i|rho|proj_i> for all 36 combinations.
std::array<double, 36> projection_probabilities(const DensityMatrix& rho);

}  // namespace epps
