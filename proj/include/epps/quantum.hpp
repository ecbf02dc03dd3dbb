#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "epps/constants.hpp"

namespace epps {

using Complex = std::complex<double>;
using Matrix2c = Eigen::Matrix2cd;
using Matrix4c = Eigen::Matrix4cd;
using Vector2c = Eigen::Vector2cd;
using Vector4c = Eigen::Vector4cd;

// Two-photon polarization density matrix in the product basis
// {|HH>, |HV>, |VH>, |VV>}; the first slot is the XX photon, the second the
// X photon. Construction goes through from_matrix(), which enforces
// Hermiticity (1e-12 per entry), unit trace (1e-12) and positivity.
// Eigenvalues in [-1e-9, 0) are treated as numerical noise: they are clamped
// to zero and the state renormalized. Anything more negative is rejected.
class DensityMatrix {
 public:
  static DensityMatrix from_matrix(const Matrix4c& m);

  const Matrix4c& matrix() const { return m_; }
  Complex operator()(int row, int col) const { return m_(row, col); }

 private:
  explicit DensityMatrix(Matrix4c m) : m_(std::move(m)) {}
  Matrix4c m_;
};

enum class BellKind { PhiPlus, PhiMinus, PsiPlus, PsiMinus };

// Single-photon measurement basis states with the fixed conventions
// H=(1,0), V=(0,1), D=(H+V)/sqrt2, A=(H-V)/sqrt2, R=(H+iV)/sqrt2,
// L=(H-iV)/sqrt2.
struct BasisState {
  char label;
  Vector2c ket;

  static const BasisState& from_label(char label);
  // The six tomography projections in canonical order H,V,D,A,R,L.
  static const std::array<BasisState, 6>& tomography_set();
  // The orthogonal partner within the set (H<->V, D<->A, R<->L).
  const BasisState& orthogonal() const;
  static int index_of(char label);
};

// Parameters of the biexciton-exciton cascade emission model.
struct CascadeModelParams {
  double fss_uev = 2.54;              // exciton fine-structure splitting
  double t1_x_ps = 162.0;             // X lifetime
  double t1_xx_ps = 120.0;            // XX lifetime
  double jitter_fwhm_2ph_ps = 50.0;   // two-photon detection jitter (FWHM)
  double basis_rotation_deg = 0.0;    // lab H/V vs QD eigenbasis offset

  // Precession angular frequency in rad/ps.
  double omega() const { return fss_uev / kHbarUevPs; }
  void validate() const;
};

// Half-wave / quarter-wave plate fast-axis angles, normalized to [0, 180).
struct WaveplateSetting {
  double hwp_deg = 0.0;
  double qwp_deg = 0.0;
};

DensityMatrix bell_state(BellKind kind);

// Pure cascade state |psi(tau)> = (|HH> + e^{i w tau} |VV>)/sqrt2, rotated by
// basis_rotation_deg on both qubits. tau is the X-XX emission delay (>= 0 in
// the physical model; the phase convention attaches e^{+i w tau} to |VV>).
DensityMatrix ideal_cascade_state(double tau_ps, const CascadeModelParams& params);

// Detection-time averaged state at measured delay tau:
//   rho(tau) = int K(tau - t) w(t) rho_ideal(t) dt / int K(tau - t) w(t) dt
// with K a Gaussian of FWHM jitter_fwhm_2ph_ps and w(t) = exp(-t/T1_X) on
// t >= 0. Trapezoid quadrature, step <= 1 ps, kernel range +-6 sigma.
DensityMatrix jitter_averaged_state(double tau_ps, const CascadeModelParams& params);

// Transpose of the chosen subsystem's indices. The result is Hermitian and
// trace preserving but in general not positive; hence a raw matrix.
enum class Subsystem { First, Second };
Matrix4c partial_transpose(const Matrix4c& rho, Subsystem subsystem = Subsystem::Second);
Matrix4c partial_transpose(const DensityMatrix& rho, Subsystem subsystem = Subsystem::Second);

// Entanglement negativity 2n = 2 * sum |lambda^-| over negative eigenvalues
// of the partial transpose; 1 for maximally entangled, 0 for separable.
double negativity_2n(const DensityMatrix& rho);
double negativity_2n(const Matrix4c& rho);

// Overlap <phi|rho|phi> with a pure target |phi><phi|. Mixed targets are
// rejected (general Uhlmann fidelity is out of scope).
double fidelity_to(const DensityMatrix& rho, const DensityMatrix& pure_target);

// <b_xx b_x| rho |b_xx b_x>.
double projector_probability(const DensityMatrix& rho, const BasisState& basis_xx,
                             const BasisState& basis_x);

// Jones matrix of a linear retarder, R(theta) diag(1, e^{i delta}) R(-theta),
// where R is the axes-rotation matrix [[cos, sin], [-sin, cos]]. With this
// convention a quarter-wave plate at 45 degrees maps H to R.
Matrix2c jones_retarder(double retardance_deg, double fast_axis_deg);

// (HWP, QWP) angles such that HWP * QWP maps `basis` onto H (the PBS
// transmission port). Light traverses the QWP first.
WaveplateSetting basis_projection_settings(const BasisState& basis);

// negativity_2n(jitter_averaged_state(tau)) on an ascending grid.
std::vector<std::pair<double, double>> model_negativity_curve(
    const CascadeModelParams& params, const std::vector<double>& tau_grid_ps);

}  // namespace epps
