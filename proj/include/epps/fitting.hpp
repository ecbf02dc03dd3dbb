#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "epps/correlator.hpp"

namespace epps {

// Parameter estimates with 1-sigma uncertainties and goodness of fit.
struct FitResult {
  std::map<std::string, double> params;
  std::map<std::string, double> sigmas;
  double reduced_chi2 = 0.0;
  bool converged = false;
  std::vector<std::pair<double, double>> model_curve;  // at the input abscissae
  std::vector<std::string> flags;
};

// Dense Levenberg-Marquardt with a forward-difference Jacobian and optional
// box projection. Weights are 1/variance; the covariance at the optimum is
// (J^T W J)^-1.
struct LevMarOptions {
  int max_iterations = 500;
  double param_tolerance = 1e-8;
  double initial_lambda = 1e-3;
};

struct LevMarProblem {
  std::function<double(double x, const Eigen::VectorXd& p)> model;
  std::vector<double> x, y, weight;
  Eigen::VectorXd lower_bounds;  // size 0 or n_params; -inf entries unbounded
  Eigen::VectorXd upper_bounds;
};

struct LevMarOutcome {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;
  double chi2 = 0.0;
  int iterations = 0;
  bool converged = false;
};

LevMarOutcome levmar_fit(const LevMarProblem& problem, const Eigen::VectorXd& initial,
                         const LevMarOptions& options = {});

// Exponential decay convolved with a Gaussian, normalized so that the
// sigma -> 0 limit is exp(-(t - t0)/t1) for t >= t0.
double exp_gauss_decay(double t, double t1, double sigma, double t0);

// Fits A * EMG(tau; T1, sigma, t0) + B to a coincidence histogram with the
// jitter sigma held fixed at jitter_fwhm_ps / (2 sqrt(2 ln 2)); Poisson
// weights (variance = max(count, 1)). Parameters: T1, A, B, t0.
FitResult fit_lifetime(const CoincidenceHistogram& hist, double jitter_fwhm_ps,
                       std::pair<double, double> fit_range_ps);

// Fits E(theta) = E0 + (delta/2) cos(4 theta + phase) to polarization-resolved
// emission energies; delta reported as |delta|. Parameters: E0, delta,
// phase_deg. Flags "ambiguous_phase" when delta / sigma_delta < 3.
FitResult fit_fss(std::span<const std::pair<double, double>> samples);

// Fits I(P) = A sin^2((pi/2) sqrt(P/P_pi)) exp(-gamma sqrt(P/P_pi)) + C to a
// power scan. Parameters: A, P_pi, gamma (>= 0), C.
FitResult fit_rabi(std::span<const std::pair<double, double>> samples);

}  // namespace epps
