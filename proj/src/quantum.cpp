#include "epps/quantum.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

#include "epps/errors.hpp"

namespace epps {

namespace {

constexpr double kHermitianTol = 1e-12;
constexpr double kTraceTol = 1e-12;
constexpr double kPsdNoiseFloor = -1e-9;

double deg_to_rad(double deg) { return deg * kPi / 180.0; }

Matrix2c rotation_2d(double theta_rad) {
  const double c = std::cos(theta_rad), s = std::sin(theta_rad);
  Matrix2c r;
  r << c, s, -s, c;
  return r;
}

Vector4c kron(const Vector2c& a, const Vector2c& b) {
  Vector4c v;
  v << a(0) * b(0), a(0) * b(1), a(1) * b(0), a(1) * b(1);
  return v;
}

Vector4c cascade_ket(double tau_ps, const CascadeModelParams& params) {
  const Complex phase = std::exp(Complex(0.0, params.omega() * tau_ps));
  Vector4c psi = Vector4c::Zero();
  psi(0) = 1.0 / std::numbers::sqrt2;
  psi(3) = phase / std::numbers::sqrt2;
  if (params.basis_rotation_deg != 0.0) {
    const Matrix2c u = rotation_2d(deg_to_rad(params.basis_rotation_deg));
    Matrix4c uu = Matrix4c::Zero();
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k)
          for (int l = 0; l < 2; ++l) uu(2 * i + k, 2 * j + l) = u(i, j) * u(k, l);
    psi = uu * psi;
  }
  return psi;
}

}  // namespace

DensityMatrix DensityMatrix::from_matrix(const Matrix4c& m) {
  for (int r = 0; r < 4; ++r) {
    if (!std::isfinite(m(r, r).real()) || !std::isfinite(m(r, r).imag()))
      throw DataError("density matrix has non-finite entries");
    for (int c = r; c < 4; ++c) {
      if (std::abs(m(r, c) - std::conj(m(c, r))) > kHermitianTol)
        throw DataError("density matrix is not Hermitian within 1e-12");
    }
  }
  const Complex tr = m.trace();
  if (std::abs(tr - Complex(1.0, 0.0)) > kTraceTol)
    throw DataError("density matrix trace differs from 1 by more than 1e-12");

  Matrix4c sym = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(sym);
  const Eigen::Vector4d evals = es.eigenvalues();
  if (evals.minCoeff() < kPsdNoiseFloor)
    throw DataError("density matrix is not positive semidefinite (min eigenvalue " +
                    std::to_string(evals.minCoeff()) + ")");
  if (evals.minCoeff() < 0.0) {
    Eigen::Vector4d clamped = evals.cwiseMax(0.0);
    clamped /= clamped.sum();
    sym = es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().adjoint();
  }
  return DensityMatrix(sym);
}

const BasisState& BasisState::from_label(char label) {
  const auto& set = tomography_set();
  for (const auto& b : set)
    if (b.label == label) return b;
  throw DataError(std::string("unknown polarization basis label '") + label + "'");
}

const std::array<BasisState, 6>& BasisState::tomography_set() {
  static const std::array<BasisState, 6> set = [] {
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    std::array<BasisState, 6> s;
    s[0] = {'H', (Vector2c() << 1.0, 0.0).finished()};
    s[1] = {'V', (Vector2c() << 0.0, 1.0).finished()};
    s[2] = {'D', (Vector2c() << inv_sqrt2, inv_sqrt2).finished()};
    s[3] = {'A', (Vector2c() << inv_sqrt2, -inv_sqrt2).finished()};
    s[4] = {'R', (Vector2c() << inv_sqrt2, Complex(0.0, inv_sqrt2)).finished()};
    s[5] = {'L', (Vector2c() << inv_sqrt2, Complex(0.0, -inv_sqrt2)).finished()};
    return s;
  }();
  return set;
}

const BasisState& BasisState::orthogonal() const {
  const int i = index_of(label);
  return tomography_set()[i ^ 1];
}

int BasisState::index_of(char label) {
  static const char order[] = {'H', 'V', 'D', 'A', 'R', 'L'};
  for (int i = 0; i < 6; ++i)
    if (order[i] == label) return i;
  throw DataError(std::string("unknown polarization basis label '") + label + "'");
}

void CascadeModelParams::validate() const {
  if (!(t1_x_ps > 0.0) || !(t1_xx_ps > 0.0))
    throw ConfigError("cascade lifetimes must be positive");
  if (jitter_fwhm_2ph_ps < 0.0) throw ConfigError("two-photon jitter must be >= 0");
  if (fss_uev < 0.0) throw ConfigError("fine-structure splitting must be >= 0");
}

DensityMatrix bell_state(BellKind kind) {
  Vector4c psi = Vector4c::Zero();
  const double a = 1.0 / std::numbers::sqrt2;
  switch (kind) {
    case BellKind::PhiPlus: psi(0) = a; psi(3) = a; break;
    case BellKind::PhiMinus: psi(0) = a; psi(3) = -a; break;
    case BellKind::PsiPlus: psi(1) = a; psi(2) = a; break;
    case BellKind::PsiMinus: psi(1) = a; psi(2) = -a; break;
  }
  return DensityMatrix::from_matrix(psi * psi.adjoint());
}

DensityMatrix ideal_cascade_state(double tau_ps, const CascadeModelParams& params) {
  if (!std::isfinite(tau_ps)) throw DataError("emission delay must be finite");
  params.validate();
  const Vector4c psi = cascade_ket(tau_ps, params);
  return DensityMatrix::from_matrix(psi * psi.adjoint());
}

DensityMatrix jitter_averaged_state(double tau_ps, const CascadeModelParams& params) {
  if (!std::isfinite(tau_ps)) throw DataError("measured delay must be finite");
  params.validate();
  if (params.jitter_fwhm_2ph_ps == 0.0)
    return ideal_cascade_state(std::max(tau_ps, 0.0), params);

  const double sigma = sigma_from_fwhm(params.jitter_fwhm_2ph_ps);
  const double lo = std::max(0.0, tau_ps - 6.0 * sigma);
  const double hi = tau_ps + 6.0 * sigma;
  if (hi <= lo) return ideal_cascade_state(0.0, params);

  const double step = std::min(1.0, sigma / 8.0);
  const int n = std::max(2, static_cast<int>(std::ceil((hi - lo) / step)) + 1);
  const double h = (hi - lo) / (n - 1);

  // Only the phase of the HH-VV coherence varies across the window, so the
  // average reduces to a complex phase average in the eigenbasis.
  Complex phase_sum = 0.0;
  double weight_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = lo + h * i;
    const double z = (tau_ps - t) / sigma;
    const double w = std::exp(-0.5 * z * z - t / params.t1_x_ps) *
                     ((i == 0 || i == n - 1) ? 0.5 : 1.0);
    phase_sum += w * std::exp(Complex(0.0, params.omega() * t));
    weight_sum += w;
  }
  if (weight_sum <= 0.0) return ideal_cascade_state(0.0, params);
  const Complex coherence = 0.5 * phase_sum / weight_sum;

  Matrix4c rho = Matrix4c::Zero();
  rho(0, 0) = 0.5;
  rho(3, 3) = 0.5;
  rho(0, 3) = std::conj(coherence);
  rho(3, 0) = coherence;
  if (params.basis_rotation_deg != 0.0) {
    const Matrix2c u = rotation_2d(deg_to_rad(params.basis_rotation_deg));
    Matrix4c uu = Matrix4c::Zero();
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k)
          for (int l = 0; l < 2; ++l) uu(2 * i + k, 2 * j + l) = u(i, j) * u(k, l);
    rho = uu * rho * uu.adjoint();
  }
  return DensityMatrix::from_matrix(rho);
}

Matrix4c partial_transpose(const Matrix4c& rho, Subsystem subsystem) {
  Matrix4c out;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int ap = 0; ap < 2; ++ap)
        for (int bp = 0; bp < 2; ++bp) {
          if (subsystem == Subsystem::Second)
            out(2 * a + b, 2 * ap + bp) = rho(2 * a + bp, 2 * ap + b);
          else
            out(2 * a + b, 2 * ap + bp) = rho(2 * ap + b, 2 * a + bp);
        }
  return out;
}

Matrix4c partial_transpose(const DensityMatrix& rho, Subsystem subsystem) {
  return partial_transpose(rho.matrix(), subsystem);
}

double negativity_2n(const Matrix4c& rho) {
  const Matrix4c pt = partial_transpose(rho, Subsystem::Second);
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(pt, Eigen::EigenvaluesOnly);
  double neg = 0.0;
  for (int i = 0; i < 4; ++i) neg += std::max(0.0, -es.eigenvalues()(i));
  return std::clamp(2.0 * neg, 0.0, 1.0);
}

double negativity_2n(const DensityMatrix& rho) { return negativity_2n(rho.matrix()); }

double fidelity_to(const DensityMatrix& rho, const DensityMatrix& pure_target) {
  const double purity = (pure_target.matrix() * pure_target.matrix()).trace().real();
  if (purity < 1.0 - 1e-6)
    throw DataError("fidelity target must be pure (tr rho^2 = " + std::to_string(purity) + ")");
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(pure_target.matrix());
  Eigen::Index top;
  es.eigenvalues().maxCoeff(&top);
  const Vector4c phi = es.eigenvectors().col(top);
  const double f = (phi.adjoint() * rho.matrix() * phi)(0, 0).real();
  return std::clamp(f, 0.0, 1.0);
}

double projector_probability(const DensityMatrix& rho, const BasisState& basis_xx,
                             const BasisState& basis_x) {
  const Vector4c proj = kron(basis_xx.ket, basis_x.ket);
  const double p = (proj.adjoint() * rho.matrix() * proj)(0, 0).real();
  return std::clamp(p, 0.0, 1.0);
}

Matrix2c jones_retarder(double retardance_deg, double fast_axis_deg) {
  const double theta = deg_to_rad(fast_axis_deg);
  Matrix2c retard = Matrix2c::Zero();
  retard(0, 0) = 1.0;
  retard(1, 1) = std::exp(Complex(0.0, deg_to_rad(retardance_deg)));
  return rotation_2d(theta) * retard * rotation_2d(-theta);
}

WaveplateSetting basis_projection_settings(const BasisState& basis) {
  // Fixed angle table for the QWP -> HWP -> PBS analyzer chain; the QWP
  // renders the state linear, the HWP rotates it onto H.
  WaveplateSetting s;
  switch (basis.label) {
    case 'H': s = {0.0, 0.0}; break;
    case 'V': s = {45.0, 0.0}; break;
    case 'D': s = {67.5, 45.0}; break;
    case 'A': s = {22.5, 45.0}; break;
    case 'R': s = {45.0, 45.0}; break;
    case 'L': s = {0.0, 45.0}; break;
    default:
      throw DataError(std::string("no projection settings for basis '") + basis.label + "'");
  }
  const Matrix2c chain = jones_retarder(180.0, s.hwp_deg) * jones_retarder(90.0, s.qwp_deg);
  const Vector2c out = chain * basis.ket;
  if (std::norm(out(0)) < 1.0 - 1e-9)
    throw std::logic_error("projection settings failed internal verification");
  return s;
}

std::vector<std::pair<double, double>> model_negativity_curve(
    const CascadeModelParams& params, const std::vector<double>& tau_grid_ps) {
  for (std::size_t i = 0; i < tau_grid_ps.size(); ++i) {
    if (!std::isfinite(tau_grid_ps[i])) throw DataError("tau grid must be finite");
    if (i > 0 && tau_grid_ps[i] <= tau_grid_ps[i - 1])
      throw DataError("tau grid must be strictly ascending");
  }
  std::vector<std::pair<double, double>> curve;
  curve.reserve(tau_grid_ps.size());
  for (double tau : tau_grid_ps)
    curve.emplace_back(tau, negativity_2n(jitter_averaged_state(tau, params)));
  return curve;
}

}  // namespace epps
