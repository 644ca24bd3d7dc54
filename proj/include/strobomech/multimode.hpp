#pragma once

// Two mechanical resonators read out through one cavity. Collective
// quadratures turn the pair into an effective single mode under pulsed
// measurement; the resulting steady state maps back to a two-mode squeezed
// thermal state of the local modes.

#include <cmath>
#include <limits>
#include <numbers>

#include "strobomech/errors.hpp"
#include "strobomech/gaussian.hpp"
#include "strobomech/strobo_maps.hpp"

namespace strobomech {

struct TwoModeParams {
  double omega_1 = 1.1;
  double omega_2 = 0.9;
  double gamma = 0.0;
  double n_bar = 0.0;
  double chi = 0.0;

  double omega() const { return 0.5 * (omega_1 + omega_2); }
  double Omega() const { return 0.5 * (omega_1 - omega_2); }
  // half of the fundamental period 2 T1 T2 / (T1 + T2)
  double bae_spacing() const { return std::numbers::pi / omega(); }

  void validate() const {
    if (!(omega_2 > 0.0) || !(omega_1 > omega_2) || !std::isfinite(omega_1)) {
      throw DomainError("need omega_1 > omega_2 > 0");
    }
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("gamma must be positive");
    if (!(n_bar >= 0.0) || !std::isfinite(n_bar)) throw DomainError("n_bar must be >= 0");
    if (!(chi >= 0.0) || !std::isfinite(chi)) throw DomainError("chi must be >= 0");
  }
};

enum class Spacing { Bae, Cooling };

struct CollectiveSteadyState {
  double n_eff = 0.0;
  double r_eff = 0.0;
};

/// (X1, P1, X2, P2) -> (X, Y, Z, W), where with c = cos(Omega t), s = sin(Omega t)
///   X = X+ c + P- s,  Y = P+ c - X- s,  Z = X- c + P+ s,  W = P- c - X+ s.
/// (X, Y) and (Z, W) are canonical pairs.
inline SymplecticTransform collective_transform(double t, double Omega) {
  const auto [c, s] = exact_cos_sin(Omega * t);
  const double r = std::numbers::sqrt2 / 2.0;
  Matrix m(4, 4);
  m << c, s, c, -s,
      -s, c, s, c,
       c, s, -c, s,
      -s, c, -s, -c;
  return SymplecticTransform(m * r, 1e-12);
}

/// Local covariance at time t from the covariance of (X, Y, Z, W).
inline Matrix collective_to_local(const Matrix& collective_cov, double t, double Omega) {
  const Matrix s = collective_transform(t, Omega).matrix();
  // s is orthogonal as well as symplectic
  return symmetrized(s.transpose() * collective_cov * s);
}

/// Invert diag((n + 1/2) e^{-r}, (n + 1/2) e^{r}).
inline CollectiveSteadyState collective_from_variances(double sigma_X, double sigma_Y) {
  if (!(sigma_X > 0.0) || !(sigma_Y > 0.0)) throw DomainError("variances must be positive");
  if (sigma_X > sigma_Y * (1.0 + 1e-12)) {
    throw InternalError("collective steady state has sigma_X > sigma_Y");
  }
  CollectiveSteadyState out;
  out.n_eff = std::max(std::sqrt(sigma_X * sigma_Y) - 0.5, 0.0);
  out.r_eff = std::max(0.5 * std::log(sigma_Y / sigma_X), 0.0);
  return out;
}

/// Stroboscopic steady state of (X, Y): the single-mode result at the mean
/// frequency with measurement strength sqrt(2) chi.
inline SteadyState collective_variances(const TwoModeParams& p, Spacing spacing) {
  p.validate();
  const PhysicalParams single{p.omega(), p.gamma, p.n_bar, std::numbers::sqrt2 * p.chi, 0.0};
  if (spacing == Spacing::Bae) return bae_steady_exact(single);
  return steady_fixed_point(cooling_map(single), p.n_bar);
}

inline CollectiveSteadyState collective_steady(const TwoModeParams& p, Spacing spacing) {
  const SteadyState s = collective_variances(p, spacing);
  return collective_from_variances(s.sigma_X, s.sigma_P);
}

/// A = (n + 1/2) cosh(2r) 1,  C = -(n + 1/2) sinh(2r) sigma_z.
inline GaussianState two_mode_state(const CollectiveSteadyState& css) {
  if (!(css.n_eff >= 0.0) || !(css.r_eff >= 0.0)) throw DomainError("n_eff and r_eff must be >= 0");
  // the small eigenvalue v e^{-2r} drowns in the rounding of the v e^{2r} entries
  if (100.0 * std::numeric_limits<double>::epsilon() * std::exp(4.0 * css.r_eff) > 1.0) {
    throw NumericalError("r_eff too large for a double-precision covariance");
  }
  const double v = css.n_eff + 0.5;
  const double a = v * std::cosh(2.0 * css.r_eff);
  const double c = v * std::sinh(2.0 * css.r_eff);
  Matrix m = Matrix::Zero(4, 4);
  m.diagonal().setConstant(a);
  m(0, 2) = m(2, 0) = -c;
  m(1, 3) = m(3, 1) = c;
  return GaussianState(m);
}

/// r_eff > ln sqrt(1 + 2 n_eff)
inline bool is_entangled(const CollectiveSteadyState& css) {
  return css.r_eff > 0.5 * std::log1p(2.0 * css.n_eff);
}

/// Direct simulation in the local interaction picture: damp both modes for
/// one pulse spacing, then measure X1(t) + X2(t) with strength chi, where
/// Xj(t) = Xj cos(omega_j t) + Pj sin(omega_j t). Starts thermal at t = 0;
/// returns the local covariance right after pulse n_pulses.
inline Matrix two_mode_local_simulation(const TwoModeParams& p, Spacing spacing, long n_pulses) {
  p.validate();
  if (n_pulses < 0) throw UsageError("n_pulses must be >= 0");
  const double dt = spacing == Spacing::Bae ? p.bae_spacing() : 0.5 * p.bae_spacing();
  const double keep = std::exp(-p.gamma * dt);
  const double lose = -std::expm1(-p.gamma * dt);
  const Matrix omega = symplectic_form(2);
  const double pointer = p.chi > 0.0 ? 1.0 / (2.0 * p.chi * p.chi) : 0.0;
  Matrix s = Matrix::Identity(4, 4) * (p.n_bar + 0.5);
  for (long k = 1; k <= n_pulses; ++k) {
    const double t = k * dt;
    s = keep * s + lose * (p.n_bar + 0.5) * Matrix::Identity(4, 4);
    if (p.chi == 0.0) continue;
    Vector a(4);
    a << std::cos(p.omega_1 * t), std::sin(p.omega_1 * t), std::cos(p.omega_2 * t), std::sin(p.omega_2 * t);
    const Vector sa = s * a;
    s -= sa * sa.transpose() / (a.dot(sa) + pointer);
    const Vector kick = omega * a;
    s += 0.5 * p.chi * p.chi * kick * kick.transpose();
    s = symmetrized(s);
  }
  return s;
}

}  // namespace strobomech
