#include "epps/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "epps/constants.hpp"
#include "epps/errors.hpp"

namespace epps {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double erfcx_positive(double b) {
  // exp(b^2) erfc(b) for b >= 0; asymptotic series once exp(b^2) overflows.
  if (b < 25.0) return std::exp(b * b) * std::erfc(b);
  const double inv2 = 1.0 / (2.0 * b * b);
  return (1.0 - inv2 * (1.0 - 3.0 * inv2)) / (b * std::sqrt(kPi));
}

Eigen::VectorXd clamp_to_bounds(Eigen::VectorXd p, const LevMarProblem& problem) {
  if (problem.lower_bounds.size() == p.size())
    p = p.cwiseMax(problem.lower_bounds);
  if (problem.upper_bounds.size() == p.size())
    p = p.cwiseMin(problem.upper_bounds);
  return p;
}

double chi_square(const LevMarProblem& problem, const Eigen::VectorXd& p) {
  double chi2 = 0.0;
  for (std::size_t i = 0; i < problem.x.size(); ++i) {
    const double r = problem.y[i] - problem.model(problem.x[i], p);
    chi2 += problem.weight[i] * r * r;
  }
  return chi2;
}

}  // namespace

LevMarOutcome levmar_fit(const LevMarProblem& problem, const Eigen::VectorXd& initial,
                         const LevMarOptions& options) {
  const auto n_data = static_cast<Eigen::Index>(problem.x.size());
  const Eigen::Index n_params = initial.size();
  if (n_data < n_params) throw DataError("fewer data points than fit parameters");

  LevMarOutcome out;
  Eigen::VectorXd p = clamp_to_bounds(initial, problem);
  double chi2 = chi_square(problem, p);
  double lambda = options.initial_lambda;

  Eigen::MatrixXd jac(n_data, n_params);
  Eigen::VectorXd residual(n_data);

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    out.iterations = iter + 1;
    for (Eigen::Index i = 0; i < n_data; ++i)
      residual(i) = problem.y[i] - problem.model(problem.x[i], p);
    for (Eigen::Index j = 0; j < n_params; ++j) {
      const double step = std::max(1e-9, 1e-6 * std::abs(p(j)));
      Eigen::VectorXd shifted = p;
      shifted(j) += step;
      for (Eigen::Index i = 0; i < n_data; ++i)
        jac(i, j) = (problem.model(problem.x[i], shifted) -
                     (problem.y[i] - residual(i))) /
                    step;
    }

    Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(n_params, n_params);
    Eigen::VectorXd jtr = Eigen::VectorXd::Zero(n_params);
    for (Eigen::Index i = 0; i < n_data; ++i) {
      const double w = problem.weight[i];
      jtj.noalias() += w * jac.row(i).transpose() * jac.row(i);
      jtr.noalias() += w * residual(i) * jac.row(i).transpose();
    }

    bool stepped = false;
    for (int attempt = 0; attempt < 30; ++attempt) {
      Eigen::MatrixXd damped = jtj;
      for (Eigen::Index j = 0; j < n_params; ++j)
        damped(j, j) += lambda * std::max(jtj(j, j), 1e-12);
      const Eigen::VectorXd delta = damped.ldlt().solve(jtr);
      const Eigen::VectorXd candidate = clamp_to_bounds(p + delta, problem);
      const double chi2_new = chi_square(problem, candidate);
      if (std::isfinite(chi2_new) && chi2_new <= chi2) {
        const double rel_change = (candidate - p).cwiseAbs().maxCoeff() /
                                  std::max(1.0, p.cwiseAbs().maxCoeff());
        const bool tiny = rel_change < options.param_tolerance;
        p = candidate;
        chi2 = chi2_new;
        lambda = std::max(lambda / 3.0, 1e-12);
        stepped = true;
        if (tiny) out.converged = true;
        break;
      }
      lambda *= 4.0;
    }
    if (!stepped) {
      out.converged = true;  // stalled at machine precision
      break;
    }
    if (out.converged) break;
  }

  // Covariance from the undamped normal matrix at the optimum.
  for (Eigen::Index i = 0; i < n_data; ++i)
    residual(i) = problem.y[i] - problem.model(problem.x[i], p);
  for (Eigen::Index j = 0; j < n_params; ++j) {
    const double step = std::max(1e-9, 1e-6 * std::abs(p(j)));
    Eigen::VectorXd shifted = p;
    shifted(j) += step;
    for (Eigen::Index i = 0; i < n_data; ++i)
      jac(i, j) =
          (problem.model(problem.x[i], shifted) - (problem.y[i] - residual(i))) / step;
  }
  Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(n_params, n_params);
  for (Eigen::Index i = 0; i < n_data; ++i)
    jtj.noalias() += problem.weight[i] * jac.row(i).transpose() * jac.row(i);
  out.covariance = jtj.ldlt().solve(Eigen::MatrixXd::Identity(n_params, n_params));
  out.params = p;
  out.chi2 = chi2;
  return out;
}

double exp_gauss_decay(double t, double t1, double sigma, double t0) {
  const double dt = t - t0;
  if (sigma <= 0.0) return dt >= 0.0 ? std::exp(-dt / t1) : 0.0;
  const double b = sigma / (std::numbers::sqrt2 * t1) - dt / (std::numbers::sqrt2 * sigma);
  if (b >= 0.0) {
    const double z = dt / sigma;
    return 0.5 * erfcx_positive(b) * std::exp(-0.5 * z * z);
  }
  const double a = 0.5 * sigma * sigma / (t1 * t1) - dt / t1;
  return 0.5 * std::exp(a) * std::erfc(b);
}

FitResult fit_lifetime(const CoincidenceHistogram& hist, double jitter_fwhm_ps,
                       std::pair<double, double> fit_range_ps) {
  if (jitter_fwhm_ps < 0.0) throw ConfigError("jitter FWHM must be >= 0");
  if (!(fit_range_ps.second > fit_range_ps.first))
    throw DataError("degenerate lifetime fit range");
  const double sigma = jitter_fwhm_ps / 2.355;

  std::vector<double> x, y, w;
  std::size_t nonzero = 0;
  for (std::size_t b = 0; b < hist.bin_count(); ++b) {
    const double c = hist.bin_center_ps(b);
    if (c < fit_range_ps.first || c > fit_range_ps.second) continue;
    const double count = static_cast<double>(hist.counts[b]);
    x.push_back(c);
    y.push_back(count);
    w.push_back(1.0 / std::max(count, 1.0));
    if (count > 0.0) ++nonzero;
  }
  if (nonzero < 20)
    throw DataError("lifetime fit needs at least 20 nonzero bins in range, found " +
                    std::to_string(nonzero));

  // Initial guesses from the peak and the tail centroid.
  std::size_t peak = 0;
  for (std::size_t i = 1; i < y.size(); ++i)
    if (y[i] > y[peak]) peak = i;
  std::vector<double> sorted_y = y;
  std::sort(sorted_y.begin(), sorted_y.end());
  double b0 = 0.0;
  const std::size_t low_n = std::max<std::size_t>(1, sorted_y.size() / 10);
  for (std::size_t i = 0; i < low_n; ++i) b0 += sorted_y[i];
  b0 /= static_cast<double>(low_n);
  const double a0 = std::max(y[peak] - b0, 1.0);
  double t1_0 = 0.0, mass = 0.0;
  for (std::size_t i = peak; i < y.size(); ++i) {
    const double excess = std::max(y[i] - b0, 0.0);
    t1_0 += excess * (x[i] - x[peak]);
    mass += excess;
  }
  t1_0 = mass > 0.0 ? std::max(t1_0 / mass, 2.0 * static_cast<double>(hist.bin_width_ps))
                    : 100.0;

  LevMarProblem problem;
  problem.x = x;
  problem.y = y;
  problem.weight = w;
  problem.model = [sigma](double t, const Eigen::VectorXd& p) {
    return p(1) * exp_gauss_decay(t, p(0), sigma, p(3)) + p(2);
  };
  problem.lower_bounds = (Eigen::VectorXd(4) << 1e-3, 0.0, -kInf, -kInf).finished();
  problem.upper_bounds = Eigen::VectorXd();

  Eigen::VectorXd initial(4);
  initial << t1_0, a0, b0, x[peak] - sigma * sigma / std::max(t1_0, 1.0);
  const LevMarOutcome fit = levmar_fit(problem, initial);

  FitResult result;
  result.params = {{"T1", fit.params(0)},
                   {"A", fit.params(1)},
                   {"B", fit.params(2)},
                   {"t0", fit.params(3)}};
  result.sigmas = {{"T1", std::sqrt(std::max(fit.covariance(0, 0), 0.0))},
                   {"A", std::sqrt(std::max(fit.covariance(1, 1), 0.0))},
                   {"B", std::sqrt(std::max(fit.covariance(2, 2), 0.0))},
                   {"t0", std::sqrt(std::max(fit.covariance(3, 3), 0.0))}};
  result.reduced_chi2 = fit.chi2 / std::max<std::size_t>(1, x.size() - 4);
  result.converged = fit.converged;
  if (!fit.converged) result.flags.push_back("max_iterations");
  result.model_curve.reserve(x.size());
  for (double xi : x) result.model_curve.emplace_back(xi, problem.model(xi, fit.params));
  return result;
}

FitResult fit_fss(std::span<const std::pair<double, double>> samples) {
  if (samples.size() < 8)
    throw DataError("fine-structure fit needs at least 8 samples");
  double lo = samples[0].first, hi = samples[0].first;
  for (const auto& s : samples) {
    lo = std::min(lo, s.first);
    hi = std::max(hi, s.first);
  }
  if (hi - lo < 90.0)
    throw DataError("fine-structure samples must span at least 90 degrees of HWP angle");

  // E0 + (delta/2) cos(4 theta + phi) is linear in (E0, a, b) with
  // a = (delta/2) cos(phi), b = -(delta/2) sin(phi); the least-squares
  // optimum is the exact 3x3 normal-equation solve seeded from the 4-theta
  // Fourier component, no iteration needed.
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d aty = Eigen::Vector3d::Zero();
  for (const auto& s : samples) {
    const double t = 4.0 * s.first * kPi / 180.0;
    const Eigen::Vector3d row(1.0, std::cos(t), std::sin(t));
    ata += row * row.transpose();
    aty += row * s.second;
  }
  const Eigen::Vector3d lin = ata.ldlt().solve(aty);
  const double a = lin(1), b = lin(2);
  const double r = std::hypot(a, b);
  const double delta = 2.0 * r;
  const double phase = std::remainder(std::atan2(-b, a), 2.0 * kPi);

  auto model = [&](double theta) {
    const double t = 4.0 * theta * kPi / 180.0;
    return lin(0) + a * std::cos(t) + b * std::sin(t);
  };
  double ssr = 0.0;
  for (const auto& s : samples) {
    const double res = s.second - model(s.first);
    ssr += res * res;
  }
  const double dof = std::max<std::size_t>(1, samples.size() - 3);
  const double s2 = ssr / dof;
  const Eigen::Matrix3d cov = ata.inverse() * s2;

  // Delta-method propagation onto (delta, phase).
  double sigma_delta = 0.0, sigma_phase = 0.0;
  if (r > 0.0) {
    const Eigen::Vector2d grad_delta(2.0 * a / r, 2.0 * b / r);
    const Eigen::Vector2d grad_phase(b / (r * r), -a / (r * r));
    const Eigen::Matrix2d cov_ab = cov.bottomRightCorner<2, 2>();
    sigma_delta = std::sqrt(std::max(0.0, grad_delta.dot(cov_ab * grad_delta)));
    sigma_phase = std::sqrt(std::max(0.0, grad_phase.dot(cov_ab * grad_phase)));
  }

  FitResult result;
  result.params = {{"E0", lin(0)}, {"delta", delta}, {"phase_deg", phase * 180.0 / kPi}};
  result.sigmas = {{"E0", std::sqrt(std::max(cov(0, 0), 0.0))},
                   {"delta", sigma_delta},
                   {"phase_deg", sigma_phase * 180.0 / kPi}};
  result.reduced_chi2 = s2;
  result.converged = true;
  if (sigma_delta <= 0.0 || delta / sigma_delta < 3.0)
    result.flags.push_back("ambiguous_phase");
  for (const auto& s : samples) result.model_curve.emplace_back(s.first, model(s.first));
  return result;
}

FitResult fit_rabi(std::span<const std::pair<double, double>> samples) {
  if (samples.size() < 6) throw DataError("Rabi fit needs at least 6 samples");
  std::vector<std::pair<double, double>> pts(samples.begin(), samples.end());
  std::sort(pts.begin(), pts.end());

  // First local maximum of a 3-point moving average seeds P_pi.
  std::vector<double> smooth(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double sum = pts[i].second;
    int n = 1;
    if (i > 0) { sum += pts[i - 1].second; ++n; }
    if (i + 1 < pts.size()) { sum += pts[i + 1].second; ++n; }
    smooth[i] = sum / n;
  }
  std::size_t max_idx = 0;
  bool found = false;
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    if (smooth[i] >= smooth[i - 1] && smooth[i] > smooth[i + 1]) {
      max_idx = i;
      found = true;
      break;
    }
  }
  if (!found || max_idx + 1 >= pts.size())
    throw DataError("no interior Rabi maximum detectable in the scan");

  double c0 = pts[0].second;
  for (const auto& p : pts) c0 = std::min(c0, p.second);
  const double a0 = std::max(smooth[max_idx] - c0, 1.0);
  const double ppi0 = std::max(pts[max_idx].first, 1e-6);

  LevMarProblem problem;
  for (const auto& p : pts) {
    problem.x.push_back(p.first);
    problem.y.push_back(p.second);
    problem.weight.push_back(1.0 / std::max(p.second, 1.0));
  }
  problem.model = [](double power, const Eigen::VectorXd& p) {
    const double u = std::sqrt(std::max(power, 0.0) / p(1));
    const double s = std::sin(0.5 * kPi * u);
    return p(0) * s * s * std::exp(-p(2) * u) + p(3);
  };
  problem.lower_bounds = (Eigen::VectorXd(4) << 0.0, 1e-9, 0.0, -kInf).finished();

  Eigen::VectorXd initial(4);
  initial << a0, ppi0, 0.05, c0;
  const LevMarOutcome fit = levmar_fit(problem, initial);

  FitResult result;
  result.params = {{"A", fit.params(0)},
                   {"P_pi", fit.params(1)},
                   {"gamma", fit.params(2)},
                   {"C", fit.params(3)}};
  result.sigmas = {{"A", std::sqrt(std::max(fit.covariance(0, 0), 0.0))},
                   {"P_pi", std::sqrt(std::max(fit.covariance(1, 1), 0.0))},
                   {"gamma", std::sqrt(std::max(fit.covariance(2, 2), 0.0))},
                   {"C", std::sqrt(std::max(fit.covariance(3, 3), 0.0))}};
  result.reduced_chi2 = fit.chi2 / std::max<std::size_t>(1, pts.size() - 4);
  result.converged = fit.converged;
  if (!fit.converged) result.flags.push_back("max_iterations");
  for (double xi : problem.x) result.model_curve.emplace_back(xi, problem.model(xi, fit.params));
  return result;
}

}  // namespace epps
