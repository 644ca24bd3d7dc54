#pragma once

// Rectangular drive pulse through a resonant cavity: intracavity amplitude,
// the effective measurement strength chi, the cavity self-squeezing zeta,
// and the exact two-mode pulse transform (cavity, mechanics).

#include <cmath>
#include <string>
#include <vector>

#include "strobomech/errors.hpp"
#include "strobomech/gaussian.hpp"

namespace strobomech {

// Rates in units of omega_m, times in units of 1/omega_m unless omega_m is
// set explicitly.
struct PulseParams {
  double g0 = 0.0;
  double n_photons = 1.0;
  double kappa = 1.0;
  double tau = 1.0;
  double omega_m = 1.0;

  void validate() const {
    if (!(g0 > 0.0) || !std::isfinite(g0)) throw DomainError("g0 must be positive");
    if (!(n_photons >= 1.0) || !std::isfinite(n_photons)) throw DomainError("N_p must be >= 1");
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw DomainError("kappa must be positive");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("tau must be positive");
    if (!(omega_m > 0.0) || !std::isfinite(omega_m)) throw DomainError("omega_m must be positive");
  }

  /// Non-fatal: the pulse is meant to be long against 1/kappa and short
  /// against 1/omega_m.
  std::vector<std::string> hierarchy_warnings() const {
    std::vector<std::string> w;
    if (kappa * tau < 1.0) w.push_back("kappa*tau < 1: pulse shorter than the cavity lifetime");
    if (omega_m * tau > 1.0) w.push_back("omega_m*tau > 1: pulse not short against the mechanical period");
    return w;
  }

  // peak intracavity amplitude for a long pulse, 2 sqrt(N_p / (kappa tau))
  double amplitude() const { return 2.0 * std::sqrt(n_photons / (kappa * tau)); }

  double g_ad() const { return g0 * amplitude(); }
};

/// Intracavity amplitude for a rectangular input pulse on [-tau/2, tau/2].
inline double cavity_field(double t, const PulseParams& p) {
  p.validate();
  const double half = 0.5 * p.tau;
  if (t <= -half) return 0.0;
  const double a = p.amplitude();
  if (t <= half) return -a * std::expm1(-0.5 * p.kappa * (t + half));
  // ring-down: f+ - f- = e^{-kappa/2 (t - tau/2)} (1 - e^{-kappa tau / 2})
  return a * std::exp(-0.5 * p.kappa * (t - half)) * -std::expm1(-0.5 * p.kappa * p.tau);
}

struct MagnusCoefficients {
  double g_ad = 0.0;
  double chi_ad = 0.0;   // g_ad * tau, the adiabatic short-pulse value
  double chi = 0.0;
  double zeta = 0.0;
  double nonqnd_ratio = 0.0;  // 2 omega_m / kappa
};

/// Closed forms of the first two Magnus terms for the full pulse including
/// the cavity ring-down.
inline MagnusCoefficients magnus_coefficients(const PulseParams& p) {
  p.validate();
  const double w = p.omega_m, k = p.kappa, tau = p.tau;
  MagnusCoefficients m;
  m.g_ad = p.g_ad();
  m.chi_ad = m.g_ad * tau;
  m.chi = 2.0 * (m.g_ad / w) * std::sin(0.5 * w * tau) / (1.0 + 4.0 * (w / k) * (w / k));
  // double time integral of g(t1) g(t2) sin(w (t1 - t2)) over t2 < t1
  const double wt = w * tau;
  const double sin_deficit = wt < 1e-3 ? wt * wt * wt / 6.0 * (1.0 - wt * wt / 20.0) : wt - std::sin(wt);
  const double w3 = w * w * w;
  m.zeta = m.g_ad * m.g_ad *
           (k * k * k * sin_deficit + 4.0 * k * w3 * tau + 8.0 * w3 * std::expm1(-0.5 * k * tau)) /
           (k * w * w * (k * k + 4.0 * w * w));
  m.nonqnd_ratio = 2.0 * w / k;
  return m;
}

/// exp(i zeta Xc^2 / 2) exp(i chi Xc Xm + i chi r Xc Pm) on (Xc, Pc, Xm, Pm).
/// All terms contain Xc only through products with commuting operators, so
/// the two exponentials merge into one.
inline SymplecticTransform nonqnd_symplectic(double chi, double zeta, double nonqnd_ratio) {
  if (!std::isfinite(chi) || !std::isfinite(zeta) || !std::isfinite(nonqnd_ratio)) {
    throw DomainError("pulse coefficients must be finite");
  }
  Matrix k = Matrix::Zero(4, 4);
  k(0, 0) = zeta;
  k(0, 2) = k(2, 0) = chi;
  k(0, 3) = k(3, 0) = chi * nonqnd_ratio;
  return SymplecticTransform::from_generator(k);
}

inline SymplecticTransform nonqnd_symplectic(const MagnusCoefficients& m) {
  return nonqnd_symplectic(m.chi, m.zeta, m.nonqnd_ratio);
}

}  // namespace strobomech
