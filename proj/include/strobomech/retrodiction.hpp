#pragma once

// Estimating mechanical position from a stroboscopic record y_i = x_i + m_i,
// with x_i = e^{-gamma T / 2} x_{i-1} + d_i. Everything is classical once the
// pulses are spaced by half a period, so the posterior is an ordinary
// Gaussian with a tridiagonal precision matrix.

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "strobomech/errors.hpp"
#include "strobomech/gaussian.hpp"

namespace strobomech {

struct RecordModel {
  int n = 2;
  double sigma_m2 = 1.0;    // measurement variance 1/(2 chi^2)
  double sigma_d2 = 1.0;    // diffusion per pulse (n_bar + 1/2)(1 - e^{-gamma T})
  double gamma_T = 0.0;
  double sigma_x0_2 = std::numeric_limits<double>::infinity();  // prior on x_0

  /// Pulses every half period, so gamma T = pi / Q. A non-positive prior
  /// variance means thermal, n_bar + 1/2.
  static RecordModel from_physical(int n, double chi, double n_bar, double Q,
                                   double sigma_x0_2 = 0.0) {
    if (!(chi > 0.0) || !std::isfinite(chi)) throw DomainError("chi must be positive");
    if (!(n_bar >= 0.0) || !std::isfinite(n_bar)) throw DomainError("n_bar must be >= 0");
    if (!(Q > 0.0) || !std::isfinite(Q)) throw DomainError("Q must be positive");
    RecordModel m;
    m.n = n;
    m.gamma_T = std::numbers::pi / Q;
    m.sigma_m2 = 1.0 / (2.0 * chi * chi);
    m.sigma_d2 = (n_bar + 0.5) * -std::expm1(-m.gamma_T);
    m.sigma_x0_2 = sigma_x0_2 > 0.0 ? sigma_x0_2 : n_bar + 0.5;
    m.validate();
    return m;
  }

  void validate() const {
    if (n < 2) throw DomainError("need at least two measurements");
    if (!(sigma_m2 > 0.0) || !std::isfinite(sigma_m2)) throw DomainError("sigma_m^2 must be positive");
    if (!(sigma_d2 > 0.0) || !std::isfinite(sigma_d2)) throw DomainError("sigma_d^2 must be positive");
    if (!(gamma_T >= 0.0) || !std::isfinite(gamma_T)) throw DomainError("gamma T must be >= 0");
    if (!(sigma_x0_2 > 0.0)) throw DomainError("prior variance must be positive");
  }

  double decay() const { return std::exp(-0.5 * gamma_T); }
};

struct MeasurementRecord {
  Vector y;
  std::optional<Vector> x;  // ground truth, when simulated
};

struct RetrodictionResult {
  Vector posterior_mean;
  Vector posterior_var_diag;
  Vector weights_row1;  // x_0 estimate = weights_row1 . y
};

struct SymTridiagonal {
  Vector diag;
  Vector off;  // off(i) couples i and i + 1

  int size() const { return static_cast<int>(diag.size()); }

  Matrix to_dense() const {
    const int n = size();
    Matrix m = Matrix::Zero(n, n);
    m.diagonal() = diag;
    for (int i = 0; i + 1 < n; ++i) m(i, i + 1) = m(i + 1, i) = off(i);
    return m;
  }
};

inline SymTridiagonal build_precision(const RecordModel& m) {
  m.validate();
  const double e = std::exp(-m.gamma_T);
  SymTridiagonal q;
  q.diag = Vector::Constant(m.n, 1.0 / m.sigma_m2 + (1.0 + e) / m.sigma_d2);
  q.off = Vector::Constant(m.n - 1, -m.decay() / m.sigma_d2);
  q.diag(0) = 1.0 / m.sigma_x0_2 + 1.0 / m.sigma_m2 + e / m.sigma_d2;
  q.diag(m.n - 1) = 1.0 / m.sigma_m2 + 1.0 / m.sigma_d2;
  return q;
}

/// LDL^T of a symmetric tridiagonal matrix, pivots from both ends.
class TridiagonalFactor {
 public:
  explicit TridiagonalFactor(SymTridiagonal t) : t_(std::move(t)) {
    const int n = t_.size();
    if (n < 1 || t_.off.size() != n - 1) throw UsageError("inconsistent tridiagonal sizes");
    fwd_.resize(n);
    bwd_.resize(n);
    fwd_(0) = t_.diag(0);
    for (int i = 1; i < n; ++i) fwd_(i) = t_.diag(i) - t_.off(i - 1) * t_.off(i - 1) / fwd_(i - 1);
    bwd_(n - 1) = t_.diag(n - 1);
    for (int i = n - 2; i >= 0; --i) bwd_(i) = t_.diag(i) - t_.off(i) * t_.off(i) / bwd_(i + 1);
    for (int i = 0; i < n; ++i) {
      if (!(fwd_(i) > 0.0) || !std::isfinite(fwd_(i))) {
        throw DomainError("precision matrix is not positive definite (pivot " + std::to_string(i) + ")");
      }
    }
  }

  int size() const { return t_.size(); }

  Vector solve(const Vector& rhs) const {
    const int n = size();
    if (rhs.size() != n) throw UsageError("right-hand side has the wrong length");
    Vector z = rhs;
    for (int i = 1; i < n; ++i) z(i) -= t_.off(i - 1) / fwd_(i - 1) * z(i - 1);
    z(n - 1) /= fwd_(n - 1);
    for (int i = n - 2; i >= 0; --i) z(i) = (z(i) - t_.off(i) * z(i + 1)) / fwd_(i);
    return z;
  }

  // (T^-1)_ii = 1 / (fwd_i + bwd_i - T_ii)
  Vector inverse_diagonal() const {
    return (fwd_ + bwd_ - t_.diag).cwiseInverse();
  }

 private:
  SymTridiagonal t_;
  Vector fwd_, bwd_;
};

inline RetrodictionResult solve_posterior(const RecordModel& m, const Vector& y) {
  m.validate();
  if (y.size() != m.n) {
    throw UsageError("record has " + std::to_string(y.size()) + " entries, model expects " + std::to_string(m.n));
  }
  const TridiagonalFactor f(build_precision(m));
  RetrodictionResult r;
  r.posterior_mean = f.solve(y) / m.sigma_m2;
  r.posterior_var_diag = f.inverse_diagonal();
  Vector e1 = Vector::Zero(m.n);
  e1(0) = 1.0;
  r.weights_row1 = f.solve(e1) / m.sigma_m2;
  return r;
}

/// Entry (i, j), 1-based, of the inverse of the n x n tridiagonal matrix
/// with off-diagonal a, diagonal b and both corners 1. Works for either sign
/// of b^2 - 4a^2. Powers of the roots only enter through ratios bounded by
/// one, so large n does not overflow.
inline double analytic_inverse_entry(double a, double b, int n, int i, int j) {
  if (n < 2) throw UsageError("need n >= 2");
  if (i < 1 || j < 1 || i > n || j > n) throw UsageError("index out of range");
  if (i > j) std::swap(i, j);
  if (a == 0.0) return i == j ? (i == 1 || i == n ? 1.0 : 1.0 / b) : 0.0;
  using C = std::complex<double>;
  const double disc = b * b - 4.0 * a * a;
  if (std::abs(disc) <= 1e-14 * b * b) throw DomainError("closed form degenerates at b^2 = 4a^2");
  const C root = std::sqrt(C(disc)) / 2.0;
  C big = b / 2.0 + root, small = b / 2.0 - root;
  if (std::abs(small) > std::abs(big)) std::swap(big, small);
  const C sqrt_disc = big - small;
  const C rho = small / big;
  // nu(k) / big^k
  auto nu = [&](int k) { return std::pow(rho, k) * (big - 1.0) - (small - 1.0); };
  const C a_big = a / big;
  const C num = std::pow(-a_big, j - i) * nu(i - 1) * nu(n - j);
  const C den = sqrt_disc * (nu(n - 1) - a * a_big * nu(n - 2));
  return (num / den).real();
}

struct TridiagonalRatios {
  double a = 0.0;
  double b = 0.0;
  double q11 = 0.0;
};

/// M = Q_xx / [Q_xx]_11: off-diagonal a, interior diagonal b.
inline TridiagonalRatios precision_ratios(const RecordModel& m) {
  const SymTridiagonal q = build_precision(m);
  return {q.off(0) / q.diag(0), q.diag(1) / q.diag(0), q.diag(0)};
}

namespace detail {

struct Roots {
  double plus, minus, sqrt_disc;
};

inline Roots relevant_roots(double a, double b) {
  const double quarter = b * b / 4.0 - a * a;
  if (!(quarter > 0.0) || !(b > 0.0)) {
    throw DomainError("only the non-oscillatory branch b^2/4 > a^2 is supported here");
  }
  const double s = std::sqrt(quarter);
  // minus root without cancellation: xi+ xi- = a^2
  const double plus = b / 2.0 + s;
  return {plus, a * a / plus, 2.0 * s};
}

}  // namespace detail

/// Weights (M^-1)_{1j}, j = 1..n, in the n -> infinity limit. The x_0
/// estimate is weights . y / ([Q_xx]_11 sigma_m^2).
inline Vector initial_weights(const RecordModel& m) {
  m.validate();
  const auto r = precision_ratios(m);
  const auto xi = detail::relevant_roots(r.a, r.b);
  Vector w(m.n);
  const double ratio = -r.a / xi.plus;
  const double norm = 1.0 / (1.0 - r.a * r.a / xi.plus);
  double p = 1.0;
  for (int j = 0; j < m.n; ++j) {
    w(j) = p * norm;
    p *= ratio;
  }
  return w;
}

/// [Q_xx^-1]_ii for i deep inside a long record, as a function of i (1-based).
inline double variance_at(const RecordModel& m, int i) {
  m.validate();
  if (i < 1) throw UsageError("index must be >= 1");
  const auto r = precision_ratios(m);
  const auto xi = detail::relevant_roots(r.a, r.b);
  const double rho = xi.minus / xi.plus;
  const double mm = (std::pow(rho, i - 1) * (xi.plus - 1.0) - xi.minus + 1.0) /
                    (xi.sqrt_disc * (1.0 - r.a * r.a / xi.plus));
  return mm / r.q11;
}

/// Limit of variance_at for i -> infinity.
inline double steady_variance_exact(const RecordModel& m) {
  m.validate();
  const auto r = precision_ratios(m);
  const auto xi = detail::relevant_roots(r.a, r.b);
  return (1.0 - xi.minus) / (xi.sqrt_disc * (1.0 - r.a * r.a / xi.plus)) / r.q11;
}

struct VarianceFormulas {
  double initial_var = 0.0;
  double steady_var = 0.0;
};

/// Leading order in 1/Q: sqrt(pi (n_bar + 1/2) / (2 Q chi^2)) and half of it.
inline VarianceFormulas variance_formulas(const RecordModel& m) {
  m.validate();
  if (!(m.gamma_T > 0.0)) throw DomainError("variance formulas need gamma T > 0");
  const double thermal = m.sigma_d2 / -std::expm1(-m.gamma_T);
  VarianceFormulas v;
  v.initial_var = std::sqrt(m.gamma_T * thermal * m.sigma_m2);
  v.steady_var = 0.5 * v.initial_var;
  return v;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Zero noise variances are allowed here, unlike in the posterior.
inline MeasurementRecord simulate_record(const RecordModel& m, std::uint64_t seed, double x0) {
  if (m.n < 1) throw DomainError("need at least one measurement");
  if (!(m.sigma_m2 >= 0.0) || !(m.sigma_d2 >= 0.0) || !(m.gamma_T >= 0.0)) {
    throw DomainError("variances must be >= 0");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const double sd = std::sqrt(m.sigma_d2), sm = std::sqrt(m.sigma_m2), k = m.decay();
  MeasurementRecord rec;
  rec.y.resize(m.n);
  Vector x(m.n);
  x(0) = x0;
  for (int i = 1; i < m.n; ++i) x(i) = k * x(i - 1) + sd * unit(rng);
  for (int i = 0; i < m.n; ++i) rec.y(i) = x(i) + sm * unit(rng);
  rec.x = std::move(x);
  return rec;
}

struct Calibration {
  long trials = 0;
  double predicted_var0 = 0.0;
  double empirical_var0 = 0.0;
  double standard_error = 0.0;  // of empirical_var0
  double z_score = 0.0;
  double residual_mean = 0.0;   // normalized residuals over all i and trials
  double residual_var = 0.0;
};

/// Called once per trial with (trial, x_0, estimate of x_0).
using TrialVisitor = std::function<void(long, double, double)>;

/// x_0 is drawn from the prior; trial k uses seed splitmix64(master_seed + k).
inline Calibration calibrate(const RecordModel& m, long trials, std::uint64_t master_seed,
                             const TrialVisitor& visit = {}) {
  m.validate();
  if (trials < 2) throw UsageError("need at least two trials");
  if (!std::isfinite(m.sigma_x0_2)) throw DomainError("calibration needs a finite prior");
  const TridiagonalFactor f(build_precision(m));
  const Vector var = f.inverse_diagonal();
  const Vector inv_sd = var.cwiseSqrt().cwiseInverse();
  double sum_e2 = 0.0, sum_r = 0.0, sum_r2 = 0.0;
  for (long k = 0; k < trials; ++k) {
    const std::uint64_t seed = splitmix64(master_seed + static_cast<std::uint64_t>(k));
    std::mt19937_64 prior_rng(splitmix64(seed));
    const double x0 = std::sqrt(m.sigma_x0_2) * std::normal_distribution<double>(0.0, 1.0)(prior_rng);
    const MeasurementRecord rec = simulate_record(m, seed, x0);
    const Vector err = f.solve(rec.y) / m.sigma_m2 - *rec.x;
    sum_e2 += err(0) * err(0);
    if (visit) visit(k, x0, x0 + err(0));
    const Vector z = err.cwiseProduct(inv_sd);
    sum_r += z.sum();
    sum_r2 += z.squaredNorm();
  }
  Calibration c;
  c.trials = trials;
  c.predicted_var0 = var(0);
  c.empirical_var0 = sum_e2 / static_cast<double>(trials);
  // variance of a mean of squares of zero-mean Gaussians
  c.standard_error = c.predicted_var0 * std::sqrt(2.0 / static_cast<double>(trials));
  c.z_score = (c.empirical_var0 - c.predicted_var0) / c.standard_error;
  const double count = static_cast<double>(trials) * m.n;
  c.residual_mean = sum_r / count;
  c.residual_var = sum_r2 / count - c.residual_mean * c.residual_mean;
  return c;
}

}  // namespace strobomech
