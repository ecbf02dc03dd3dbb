#include "epps/tomography.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "epps/errors.hpp"
#include "epps/random.hpp"

namespace epps {

namespace {

constexpr int kNumProjectors = 36;
constexpr int kNumParams = 16;
constexpr double kProbFloor = 1e-14;

using Params = Eigen::Matrix<double, kNumParams, 1>;

const std::array<Vector4c, kNumProjectors>& projector_kets() {
  static const std::array<Vector4c, kNumProjectors> kets = [] {
    std::array<Vector4c, kNumProjectors> k;
    const auto& set = BasisState::tomography_set();
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) {
        Vector4c v;
        v << set[i].ket(0) * set[j].ket(0), set[i].ket(0) * set[j].ket(1),
            set[i].ket(1) * set[j].ket(0), set[i].ket(1) * set[j].ket(1);
        k[6 * i + j] = v;
      }
    return k;
  }();
  return kets;
}

Matrix4c t_from_params(const Params& x) {
  Matrix4c t = Matrix4c::Zero();
  t(0, 0) = x[0];
  t(1, 1) = x[1];
  t(2, 2) = x[2];
  t(3, 3) = x[3];
  t(1, 0) = Complex(x[4], x[5]);
  t(2, 0) = Complex(x[6], x[7]);
  t(2, 1) = Complex(x[8], x[9]);
  t(3, 0) = Complex(x[10], x[11]);
  t(3, 1) = Complex(x[12], x[13]);
  t(3, 2) = Complex(x[14], x[15]);
  return t;
}

Params params_from_t(const Matrix4c& t) {
  Params x;
  x << t(0, 0).real(), t(1, 1).real(), t(2, 2).real(), t(3, 3).real(), t(1, 0).real(),
      t(1, 0).imag(), t(2, 0).real(), t(2, 0).imag(), t(2, 1).real(), t(2, 1).imag(),
      t(3, 0).real(), t(3, 0).imag(), t(3, 1).real(), t(3, 1).imag(), t(3, 2).real(),
      t(3, 2).imag();
  return x;
}

Matrix4c rho_from_params(const Params& x) {
  const Matrix4c t = t_from_params(x);
  Matrix4c rho = t.adjoint() * t;
  const double s = rho.trace().real();
  if (s <= 0.0) return Matrix4c::Identity() / 4.0;
  rho /= s;
  return 0.5 * (rho + rho.adjoint().eval());
}

// Scale to unit tr(T^dagger T) and make each diagonal entry non-negative by
// row sign flips; used for deterministic tie-breaking.
Params canonicalize(Params x) {
  double s = x.squaredNorm();
  if (s > 0.0) x /= std::sqrt(s);
  static const int row_of[kNumParams] = {0, 1, 2, 3, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3, 3, 3};
  bool flip[4];
  for (int r = 0; r < 4; ++r) flip[r] = x[r] < 0.0;
  for (int p = 0; p < kNumParams; ++p)
    if (flip[row_of[p]]) x[p] = -x[p];
  return x;
}

struct Objective {
  const std::array<double, 36>& counts;
  const std::vector<double>& exposures;
  double total_counts;

  double exposure(int i) const { return exposures.empty() ? 1.0 : exposures[i]; }

  // f = (sum n) ln(sum_j e_j q_j) - sum_i n_i ln q_i, scale invariant in T.
  double value_and_gradient(const Params& x, Params* grad) const {
    const auto& kets = projector_kets();
    const Matrix4c t = t_from_params(x);
    std::array<Vector4c, kNumProjectors> tv;
    std::array<double, kNumProjectors> q;
    const double s = t.squaredNorm();
    const double floor = kProbFloor * std::max(s, 1e-300);
    double w = 0.0;
    for (int i = 0; i < kNumProjectors; ++i) {
      tv[i] = t * kets[i];
      q[i] = std::max(tv[i].squaredNorm(), floor);
      w += exposure(i) * q[i];
    }
    double f = total_counts * std::log(w);
    for (int i = 0; i < kNumProjectors; ++i) f -= counts[i] * std::log(q[i]);

    if (grad) {
      Matrix4c a = Matrix4c::Zero();
      for (int i = 0; i < kNumProjectors; ++i) {
        double c = total_counts * exposure(i) / w;
        if (tv[i].squaredNorm() > floor) c -= counts[i] / q[i];
        a += c * (tv[i] * kets[i].adjoint());
      }
      (*grad)[0] = 2.0 * a(0, 0).real();
      (*grad)[1] = 2.0 * a(1, 1).real();
      (*grad)[2] = 2.0 * a(2, 2).real();
      (*grad)[3] = 2.0 * a(3, 3).real();
      (*grad)[4] = 2.0 * a(1, 0).real();
      (*grad)[5] = 2.0 * a(1, 0).imag();
      (*grad)[6] = 2.0 * a(2, 0).real();
      (*grad)[7] = 2.0 * a(2, 0).imag();
      (*grad)[8] = 2.0 * a(2, 1).real();
      (*grad)[9] = 2.0 * a(2, 1).imag();
      (*grad)[10] = 2.0 * a(3, 0).real();
      (*grad)[11] = 2.0 * a(3, 0).imag();
      (*grad)[12] = 2.0 * a(3, 1).real();
      (*grad)[13] = 2.0 * a(3, 1).imag();
      (*grad)[14] = 2.0 * a(3, 2).real();
      (*grad)[15] = 2.0 * a(3, 2).imag();
    }
    return f;
  }
};

struct BfgsOutcome {
  Params x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

BfgsOutcome minimize_bfgs(const Objective& obj, Params x0, const MleOptions& opt) {
  using Hessian = Eigen::Matrix<double, kNumParams, kNumParams>;
  BfgsOutcome out;
  Params g, g_new;
  double f = obj.value_and_gradient(x0, &g);
  Params x = x0;
  Hessian h = Hessian::Identity();
  bool h_scaled = false;
  int stall = 0;

  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    out.iterations = iter + 1;
    if (g.cwiseAbs().maxCoeff() < 1e-10 * (1.0 + std::abs(f))) {
      out.converged = true;
      break;
    }
    Params p = -(h * g);
    double slope = g.dot(p);
    if (!(slope < 0.0)) {
      h = Hessian::Identity();
      h_scaled = false;
      p = -g;
      slope = g.dot(p);
      if (!(slope < 0.0)) {
        out.converged = true;
        break;
      }
    }

    // Armijo backtracking; keep the first trial step a bounded move.
    const double step0 = std::min(1.0, 8.0 / std::max(1.0, p.cwiseAbs().maxCoeff()));
    double step = step0;
    double f_new = f;
    Params x_new = x;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      x_new = x + step * p;
      f_new = obj.value_and_gradient(x_new, nullptr);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (h_scaled || iter == 0) {
        // Retry once along the raw gradient before giving up.
        h = Hessian::Identity();
        h_scaled = false;
        continue;
      }
      out.converged = true;  // no descent possible at machine precision
      break;
    }

    obj.value_and_gradient(x_new, &g_new);
    const Params s = x_new - x;
    const Params y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!h_scaled) {
        h *= sy / y.squaredNorm();
        h_scaled = true;
      }
      const Params hy = h * y;
      const double yhy = y.dot(hy);
      h += ((sy + yhy) / (sy * sy)) * (s * s.transpose());
      const Hessian cross = (hy * s.transpose()) / sy;
      h -= cross + cross.transpose();
    }

    // Converged when a full step no longer moves the objective, or when
    // several consecutive steps stall below the tolerances (degenerate
    // curvature at the positivity boundary).
    const bool full_step = step == step0 && step0 == 1.0;
    const bool f_done = std::abs(f - f_new) < opt.nll_tolerance;
    const bool x_done = (x_new - x).cwiseAbs().maxCoeff() < opt.param_tolerance;
    x = x_new;
    f = f_new;
    g = g_new;
    stall = (f_done && x_done) ? stall + 1 : 0;
    if ((full_step && f_done && x_done) || stall >= 5) {
      out.converged = true;
      break;
    }
  }
  out.x = x;
  out.f = f;
  return out;
}

// Unconstrained least-squares inversion of the projection probabilities;
// may be unphysical, used only to seed the MLE.
Matrix4c linear_inversion(const std::array<double, 36>& counts,
                          const std::vector<double>& exposures) {
  static const auto design = [] {
    // Hermitian operator basis: 4 diagonal, then (re, im) pairs per off-diagonal.
    std::array<Matrix4c, kNumParams> basis;
    int m = 0;
    for (int d = 0; d < 4; ++d) {
      basis[m] = Matrix4c::Zero();
      basis[m](d, d) = 1.0;
      ++m;
    }
    for (int r = 0; r < 4; ++r)
      for (int c = r + 1; c < 4; ++c) {
        basis[m] = Matrix4c::Zero();
        basis[m](r, c) = 1.0;
        basis[m](c, r) = 1.0;
        ++m;
        basis[m] = Matrix4c::Zero();
        basis[m](r, c) = Complex(0.0, 1.0);
        basis[m](c, r) = Complex(0.0, -1.0);
        ++m;
      }
    Eigen::Matrix<double, kNumProjectors, kNumParams> a;
    const auto& kets = projector_kets();
    for (int i = 0; i < kNumProjectors; ++i)
      for (int j = 0; j < kNumParams; ++j)
        a(i, j) = (kets[i].adjoint() * basis[j] * kets[i])(0, 0).real();
    struct Design {
      std::array<Matrix4c, kNumParams> basis;
      Eigen::ColPivHouseholderQR<Eigen::Matrix<double, kNumProjectors, kNumParams>> qr;
    };
    return Design{basis, a.colPivHouseholderQr()};
  }();

  double total = 0.0, exp_total = 0.0;
  for (int i = 0; i < kNumProjectors; ++i) {
    total += counts[i];
    exp_total += exposures.empty() ? 1.0 : exposures[i];
  }
  const double scale = 4.0 * total / std::max(exp_total, 1e-300);
  Eigen::Matrix<double, kNumProjectors, 1> y;
  for (int i = 0; i < kNumProjectors; ++i) {
    const double e = exposures.empty() ? 1.0 : exposures[i];
    y(i) = counts[i] / std::max(scale * e, 1e-300);
  }
  const Eigen::Matrix<double, kNumParams, 1> coef = design.qr.solve(y);
  Matrix4c rho = Matrix4c::Zero();
  for (int j = 0; j < kNumParams; ++j) rho += coef[j] * design.basis[j];
  return rho;
}

// Lower-triangular T with T^dagger T = rho (a reversed Cholesky factor).
Matrix4c lower_factor(const Matrix4c& rho) {
  Matrix4c flipped;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) flipped(r, c) = rho(3 - r, 3 - c);
  Eigen::LLT<Matrix4c> llt(flipped + 1e-12 * Matrix4c::Identity());
  const Matrix4c l = llt.matrixL();
  Matrix4c t;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) t(r, c) = std::conj(l(3 - c, 3 - r));
  return t;
}

Params projected_start(const std::array<double, 36>& counts,
                       const std::vector<double>& exposures) {
  Matrix4c raw = linear_inversion(counts, exposures);
  raw = 0.5 * (raw + raw.adjoint().eval());
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(raw);
  Eigen::Vector4d evals = es.eigenvalues().cwiseMax(1e-6);
  evals /= evals.sum();
  const Matrix4c rho = es.eigenvectors() * evals.asDiagonal() * es.eigenvectors().adjoint();
  Params x = params_from_t(lower_factor(rho));
  const double n = x.norm();
  return n > 0.0 ? Params(x / n) : x;
}

double reported_nll(const Matrix4c& rho, const std::array<double, 36>& counts,
                    const std::vector<double>& exposures) {
  const auto& kets = projector_kets();
  double total = 0.0, wp = 0.0;
  std::array<double, kNumProjectors> p;
  for (int i = 0; i < kNumProjectors; ++i) {
    p[i] = std::max((kets[i].adjoint() * rho * kets[i])(0, 0).real(), kProbFloor);
    const double e = exposures.empty() ? 1.0 : exposures[i];
    total += counts[i];
    wp += e * p[i];
  }
  const double n_scale = total / std::max(wp, 1e-300);
  double nll = 0.0;
  for (int i = 0; i < kNumProjectors; ++i) {
    const double e = exposures.empty() ? 1.0 : exposures[i];
    const double mu = std::max(n_scale * e * p[i], 1e-300);
    nll += mu - (counts[i] > 0.0 ? counts[i] * std::log(mu) : 0.0);
  }
  return nll;
}

}  // namespace

std::size_t TomographyDataset::index_of(char basis_xx, char basis_x) {
  return static_cast<std::size_t>(6 * BasisState::index_of(basis_xx) +
                                  BasisState::index_of(basis_x));
}

std::pair<char, char> TomographyDataset::labels_of(std::size_t index) {
  static const char order[] = {'H', 'V', 'D', 'A', 'R', 'L'};
  return {order[index / 6], order[index % 6]};
}

const CoincidenceHistogram& TomographyDataset::at(char basis_xx, char basis_x) const {
  return histograms[index_of(basis_xx, basis_x)];
}

CoincidenceHistogram& TomographyDataset::at(char basis_xx, char basis_x) {
  return histograms[index_of(basis_xx, basis_x)];
}

void TomographyDataset::validate() const {
  const CoincidenceHistogram& ref = histograms[0];
  if (ref.counts.empty()) throw DataError("tomography dataset has empty histograms");
  for (std::size_t i = 0; i < histograms.size(); ++i) {
    const auto [bxx, bx] = labels_of(i);
    const CoincidenceHistogram& h = histograms[i];
    if (h.basis_label[0] != bxx || h.basis_label[1] != bx)
      throw DataError(std::string("dataset slot ") + bxx + bx + " holds histogram labeled " +
                      h.label_string());
    if (h.bin_width_ps != ref.bin_width_ps || h.tau_min_ps != ref.tau_min_ps ||
        h.tau_max_ps != ref.tau_max_ps)
      throw DataError(std::string("inconsistent histogram binning for combination ") + bxx +
                      bx);
  }
}

void TomographyDataset::add(const TomographyDataset& other) {
  for (std::size_t i = 0; i < histograms.size(); ++i) histograms[i].add(other.histograms[i]);
}

TomographyDataset assemble_dataset(const std::vector<CoincidenceHistogram>& histograms) {
  TomographyDataset ds;
  std::array<bool, 36> seen{};
  for (const auto& h : histograms) {
    const std::size_t idx = TomographyDataset::index_of(h.basis_label[0], h.basis_label[1]);
    if (seen[idx])
      throw DataError("duplicate basis combination " + h.label_string());
    seen[idx] = true;
    ds.histograms[idx] = h;
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i]) {
      const auto [bxx, bx] = TomographyDataset::labels_of(i);
      throw DataError(std::string("missing basis combination ") + bxx + bx);
    }
  ds.validate();
  return ds;
}

TomographyDataset assemble_dataset_from_directory(const std::filesystem::path& directory,
                                                  const CorrelationOptions& options) {
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::is_directory(directory))
    throw DataError("'" + directory.string() + "' is not a directory");
  for (const auto& entry : std::filesystem::directory_iterator(directory))
    if (entry.is_regular_file() && entry.path().extension() == ".qtt")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<CoincidenceHistogram> hists;
  hists.reserve(files.size());
  for (const auto& f : files) hists.push_back(cross_correlate_file(f, options));
  return assemble_dataset(hists);
}

ReconstructionResult reconstruct_mle(const std::array<double, 36>& counts,
                                     const MleOptions& options) {
  if (!options.exposures.empty() && options.exposures.size() != 36)
    throw ConfigError("exposure vector must have 36 entries");
  double total = 0.0;
  bool any = false;
  for (double n : counts) {
    if (n < 0.0 || !std::isfinite(n)) throw DataError("negative or non-finite count");
    total += n;
    any = any || n > 0.0;
  }
  if (!any) throw DataError("all 36 projection counts are zero");

  const Objective obj{counts, options.exposures, total};

  std::vector<Params> starts;
  Params mixed = Params::Zero();
  mixed[0] = mixed[1] = mixed[2] = mixed[3] = 0.5;
  starts.push_back(mixed);
  starts.push_back(projected_start(counts, options.exposures));
  Rng rng(options.seed);
  for (int r = 0; r < std::max(1, options.random_starts); ++r) {
    Params x;
    for (int i = 0; i < kNumParams; ++i) x[i] = rng.normal();
    const double n = x.norm();
    starts.push_back(n > 0.0 ? Params(x / n) : mixed);
  }

  BfgsOutcome best;
  bool have_best = false;
  for (const auto& s : starts) {
    BfgsOutcome cand = minimize_bfgs(obj, s, options);
    if (!have_best) {
      best = cand;
      have_best = true;
      continue;
    }
    const double df = cand.f - best.f;
    if (df < -1e-12) {
      best = cand;
    } else if (std::abs(df) <= 1e-12) {
      const Params a = canonicalize(cand.x);
      const Params b = canonicalize(best.x);
      for (int i = 0; i < kNumParams; ++i) {
        if (a[i] < b[i] - 1e-15) {
          best = cand;
          break;
        }
        if (a[i] > b[i] + 1e-15) break;
      }
    }
  }

  ReconstructionResult result;
  result.rho = rho_from_params(best.x);
  result.nll = reported_nll(result.rho, counts, options.exposures);
  result.iterations = best.iterations;
  result.converged = best.converged;
  result.negativity = negativity_2n(result.rho);
  result.sigma_negativity = std::numeric_limits<double>::quiet_NaN();
  result.total_counts = total;
  return result;
}

std::array<double, 36> estimate_background(const TomographyDataset& dataset,
                                           const BackgroundOptions& options) {
  std::array<double, 36> level{};
  if (!options.enabled) return level;
  if (options.window_hi_ps <= options.window_lo_ps)
    throw ConfigError("background window must be non-empty");
  for (std::size_t i = 0; i < dataset.histograms.size(); ++i) {
    const CoincidenceHistogram& h = dataset.histograms[i];
    double sum = 0.0;
    std::uint64_t bins = 0;
    for (std::size_t b = 0; b < h.bin_count(); ++b) {
      const double c = h.bin_center_ps(b);
      if (c >= static_cast<double>(options.window_lo_ps) &&
          c <= static_cast<double>(options.window_hi_ps)) {
        sum += static_cast<double>(h.counts[b]);
        ++bins;
      }
    }
    level[i] = bins > 0 ? sum / static_cast<double>(bins) : 0.0;
  }
  return level;
}

namespace {

ReconstructionResult reconstruct_window_impl(const TomographyDataset& dataset,
                                             std::int64_t lo, std::int64_t hi,
                                             const std::array<double, 36>& background,
                                             const WindowOptions& options) {
  const CoincidenceHistogram& ref = dataset.histograms[0];
  const auto first = static_cast<std::size_t>((lo - ref.tau_min_ps) / ref.bin_width_ps);
  const auto count = static_cast<std::size_t>((hi - lo) / ref.bin_width_ps);
  std::array<double, 36> counts{};
  double raw_total = 0.0;
  for (std::size_t i = 0; i < dataset.histograms.size(); ++i) {
    double raw = 0.0;
    for (std::size_t b = first; b < first + count; ++b)
      raw += static_cast<double>(dataset.histograms[i].counts[b]);
    raw_total += raw;
    counts[i] = std::max(0.0, raw - background[i] * static_cast<double>(count));
  }
  ReconstructionResult result = reconstruct_mle(counts, options.mle);
  result.tau_bin_ps = {lo, hi};
  result.total_counts = raw_total;
  if (options.bootstrap_resamples > 0) {
    const BootstrapResult bs = bootstrap_uncertainty(counts, options.bootstrap_resamples,
                                                     options.bootstrap_seed, options.mle);
    result.sigma_negativity = bs.sigma_negativity;
  }
  return result;
}

std::int64_t snap_down(std::int64_t value, std::int64_t origin, std::int64_t width) {
  std::int64_t offset = value - origin;
  std::int64_t q = offset / width;
  if (offset % width != 0 && offset < 0) --q;
  return origin + q * width;
}

}  // namespace

ReconstructionResult reconstruct_window(const TomographyDataset& dataset,
                                        std::int64_t tau_lo_ps, std::int64_t tau_hi_ps,
                                        const WindowOptions& options) {
  dataset.validate();
  const CoincidenceHistogram& ref = dataset.histograms[0];
  std::int64_t lo = std::max(snap_down(tau_lo_ps, ref.tau_min_ps, ref.bin_width_ps),
                             ref.tau_min_ps);
  std::int64_t hi = snap_down(tau_hi_ps, ref.tau_min_ps, ref.bin_width_ps);
  if (hi < tau_hi_ps) hi += ref.bin_width_ps;
  hi = std::min(hi, ref.tau_max_ps);
  if (hi <= lo) throw DataError("empty reconstruction window");
  const auto background = estimate_background(dataset, options.background);
  return reconstruct_window_impl(dataset, lo, hi, background, options);
}

TimeResolvedReconstruction reconstruct_time_resolved(
    const TomographyDataset& dataset, std::pair<std::int64_t, std::int64_t> tau_range_ps,
    std::int64_t bin_ps, const TimeResolvedOptions& options) {
  dataset.validate();
  const CoincidenceHistogram& ref = dataset.histograms[0];
  if (bin_ps <= 0 || bin_ps % ref.bin_width_ps != 0)
    throw ConfigError("reconstruction bin must be a positive multiple of the histogram bin (" +
                      std::to_string(ref.bin_width_ps) + " ps)");
  if (tau_range_ps.second <= tau_range_ps.first)
    throw DataError("empty reconstruction range");

  std::int64_t lo = std::max(snap_down(tau_range_ps.first, ref.tau_min_ps, ref.bin_width_ps),
                             ref.tau_min_ps);
  const auto background = estimate_background(dataset, options.window.background);
  const std::size_t bins_per_slice = static_cast<std::size_t>(bin_ps / ref.bin_width_ps);

  TimeResolvedReconstruction out;
  for (std::int64_t start = lo; start + bin_ps <= ref.tau_max_ps &&
                                start < tau_range_ps.second;
       start += bin_ps) {
    const std::int64_t stop = start + bin_ps;
    const auto first = static_cast<std::size_t>((start - ref.tau_min_ps) / ref.bin_width_ps);
    double raw_total = 0.0;
    for (const auto& h : dataset.histograms)
      for (std::size_t b = first; b < first + bins_per_slice; ++b)
        raw_total += static_cast<double>(h.counts[b]);
    if (raw_total < options.min_counts) {
      out.skipped.push_back({{start, stop}, raw_total});
      continue;
    }
    out.bins.push_back(
        reconstruct_window_impl(dataset, start, stop, background, options.window));
  }
  if (out.bins.empty() && out.skipped.empty())
    throw DataError("reconstruction range contains no histogram bins");
  return out;
}

BootstrapResult bootstrap_uncertainty(const std::array<double, 36>& counts,
                                      int n_resamples, std::uint64_t seed,
                                      const MleOptions& options) {
  if (n_resamples < 100)
    throw ConfigError("bootstrap needs at least 100 resamples");
  Rng rng(seed);
  const DensityMatrix phi_plus = bell_state(BellKind::PhiPlus);
  std::vector<double> negs, fids;
  negs.reserve(n_resamples);
  fids.reserve(n_resamples);
  for (int r = 0; r < n_resamples; ++r) {
    std::array<double, 36> resampled;
    for (int i = 0; i < 36; ++i)
      resampled[i] = static_cast<double>(rng.poisson(std::max(counts[i], 0.0)));
    bool any = false;
    for (double v : resampled) any = any || v > 0.0;
    if (!any) resampled = counts;
    const ReconstructionResult res = reconstruct_mle(resampled, options);
    negs.push_back(res.negativity);
    fids.push_back(fidelity_to(res.density_matrix(), phi_plus));
  }
  auto sample_std = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
  };
  return {sample_std(negs), sample_std(fids)};
}

std::array<double, 36> projection_probabilities(const DensityMatrix& rho) {
  std::array<double, 36> p{};
  const auto& kets = projector_kets();
  for (int i = 0; i < 36; ++i)
    p[i] = std::clamp((kets[i].adjoint() * rho.matrix() * kets[i])(0, 0).real(), 0.0, 1.0);
  return p;
}

}  // namespace epps
