#pragma once

// Single-mode covariance maps for a pulsed position measurement and for the
// free, damped evolution between pulses, their stroboscopic fixed points,
// and the closed-form steady states for half-period (backaction evading)
// and quarter-period (cooling) pulse spacing.

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "strobomech/errors.hpp"
#include "strobomech/gaussian.hpp"

namespace strobomech {

struct PhysicalParams {
  double omega_m = 1.0;
  double gamma = 0.0;
  double n_bar = 0.0;
  double chi = 0.0;
  double r_pulse = 0.0;

  static PhysicalParams from_Q(double Q, double n_bar, double chi, double r_pulse = 0.0,
                               double omega_m = 1.0) {
    if (!(Q > 0.0)) throw DomainError("quality factor must be positive");
    PhysicalParams p{omega_m, omega_m / Q, n_bar, chi, r_pulse};
    p.validate();
    return p;
  }

  double Q() const {
    if (!(gamma > 0.0)) throw DomainError("Q undefined for gamma = 0");
    return omega_m / gamma;
  }

  // z = (2 n + 1) chi^2 with the effective (pulse-squeezing enhanced) chi
  double z() const {
    const double c = chi * std::exp(0.5 * r_pulse);
    return (2.0 * n_bar + 1.0) * c * c;
  }

  void validate() const {
    if (!(omega_m > 0.0) || !std::isfinite(omega_m)) throw DomainError("omega_m must be positive");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw DomainError("gamma must be >= 0");
    if (!(n_bar >= 0.0) || !std::isfinite(n_bar)) throw DomainError("n_bar must be >= 0");
    if (!(chi >= 0.0) || !std::isfinite(chi)) throw DomainError("chi must be >= 0");
    if (!std::isfinite(r_pulse)) throw DomainError("r_pulse must be finite");
  }
};

/// A squeezed input pulse with parameter r acts as an unsqueezed pulse with
/// strength chi * e^{r/2}.
inline double effective_chi(const PhysicalParams& p) { return p.chi * std::exp(0.5 * p.r_pulse); }

inline Cov2 thermal_cov(double n_bar) { return Cov2::Identity() * (n_bar + 0.5); }

// --- elementary maps -------------------------------------------------------
//
// Both maps are also provided in increment form, map(s) - s, evaluated
// without forming map(s) first. Near a fixed point with weak damping the
// increment is many orders of magnitude smaller than s, and computing it
// directly keeps its relative accuracy.

inline void check_cov2(const Cov2& cov) {
  if (!cov.allFinite()) throw DomainError("covariance has non-finite entries");
  if (std::abs(cov(0, 1) - cov(1, 0)) > kSymmetryTol * std::max(1.0, cov.cwiseAbs().maxCoeff())) {
    throw DomainError("covariance is not symmetric");
  }
}

inline Cov2 measurement_increment(const Cov2& cov, double chi) {
  check_cov2(cov);
  if (!(chi >= 0.0)) throw DomainError("chi must be >= 0");
  const double x = cov(0, 0);
  const double c = cov(0, 1);
  const double chi2 = chi * chi;
  const double d = 1.0 + 2.0 * chi2 * x;
  if (!(d > 0.0)) throw DomainError("measurement map: 1 + 2 chi^2 sigma_X <= 0");
  Cov2 inc;
  inc(0, 0) = -2.0 * chi2 * x * x / d;
  inc(1, 1) = 0.5 * chi2 - 2.0 * chi2 * c * c / d;
  inc(0, 1) = inc(1, 0) = -2.0 * chi2 * x * c / d;
  return inc;
}

/// sigma_X' = sigma_X / d, sigma_P' = sigma_P + chi^2/2 - 2 chi^2 sigma_XP^2 / d,
/// sigma_XP' = sigma_XP / d with d = 1 + 2 chi^2 sigma_X.
inline Cov2 measurement_map(const Cov2& cov, double chi) {
  const Cov2 inc = measurement_increment(cov, chi);
  Cov2 out;
  out(0, 0) = cov(0, 0) / (1.0 + 2.0 * chi * chi * cov(0, 0));
  out(0, 1) = out(1, 0) = cov(0, 1) / (1.0 + 2.0 * chi * chi * cov(0, 0));
  out(1, 1) = cov(1, 1) + inc(1, 1);
  return out;
}

inline Cov2 thermal_rotation_increment(const Cov2& cov, double phi, double gamma_t, double n_bar) {
  check_cov2(cov);
  if (!(gamma_t >= 0.0)) throw UsageError("gamma_t must be >= 0");
  if (!(n_bar >= 0.0)) throw DomainError("n_bar must be >= 0");
  const Cov2 r = rotation_matrix(phi);
  const double keep = std::exp(-gamma_t);
  const double lose = -std::expm1(-gamma_t);
  const Cov2 rotated = r * cov * r.transpose();
  Cov2 inc = keep * (rotated - cov) + lose * (thermal_cov(n_bar) - cov);
  inc(1, 0) = inc(0, 1);
  return inc;
}

/// e^{-gt} R s R^T + (1 - e^{-gt}) (n + 1/2) I
inline Cov2 thermal_rotation_map(const Cov2& cov, double phi, double gamma_t, double n_bar) {
  check_cov2(cov);
  if (!(gamma_t >= 0.0)) throw UsageError("gamma_t must be >= 0");
  if (!(n_bar >= 0.0)) throw DomainError("n_bar must be >= 0");
  const Cov2 r = rotation_matrix(phi);
  Cov2 out = std::exp(-gamma_t) * (r * cov * r.transpose()) - std::expm1(-gamma_t) * thermal_cov(n_bar);
  out(1, 0) = out(0, 1);
  return out;
}

// --- map algebra -------------------------------------------------------------

struct Measurement {
  double chi = 0.0;
};

struct ThermalRotation {
  double phi = 0.0;
  double gamma_t = 0.0;
  double n_bar = 0.0;
};

class StroboMap;

// Constituents are stored in application order: maps.front() acts first.
struct Composition {
  std::vector<StroboMap> maps;
};

class StroboMap {
 public:
  using Variant = std::variant<Measurement, ThermalRotation, Composition>;

  StroboMap(Measurement m) : v_(m) {
    if (!(m.chi >= 0.0)) throw DomainError("chi must be >= 0");
  }
  StroboMap(ThermalRotation t) : v_(t) {
    if (!(t.gamma_t >= 0.0)) throw UsageError("gamma_t must be >= 0");
    if (!(t.n_bar >= 0.0)) throw DomainError("n_bar must be >= 0");
  }
  StroboMap(Composition c) : v_(std::move(c)) {}

  const Variant& variant() const noexcept { return v_; }

  Cov2 apply(const Cov2& cov) const {
    return std::visit(
        [&](const auto& m) -> Cov2 {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, Measurement>) {
            return measurement_map(cov, m.chi);
          } else if constexpr (std::is_same_v<T, ThermalRotation>) {
            return thermal_rotation_map(cov, m.phi, m.gamma_t, m.n_bar);
          } else {
            Cov2 s = cov;
            for (const auto& inner : m.maps) s = inner.apply(s);
            return s;
          }
        },
        v_);
  }

  /// apply(cov) - cov, accumulated stage by stage.
  Cov2 increment(const Cov2& cov) const {
    return std::visit(
        [&](const auto& m) -> Cov2 {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, Measurement>) {
            return measurement_increment(cov, m.chi);
          } else if constexpr (std::is_same_v<T, ThermalRotation>) {
            return thermal_rotation_increment(cov, m.phi, m.gamma_t, m.n_bar);
          } else {
            Cov2 total = Cov2::Zero();
            Cov2 s = cov;
            for (const auto& inner : m.maps) {
              const Cov2 step = inner.increment(s);
              total += step;
              s += step;
            }
            return total;
          }
        },
        v_);
  }

 private:
  Variant v_;
};

/// outer o inner: inner acts first.
inline StroboMap compose(const StroboMap& outer, const StroboMap& inner) {
  return StroboMap(Composition{{inner, outer}});
}

// --- fixed points ----------------------------------------------------------

enum class FixedPointMethod {
  Newton,   // Newton on the increment, finite-difference Jacobian
  Iterate,  // plain repeated application
};

struct FixedPointOptions {
  double tol = 1e-12;
  long max_iter = 10'000'000;
  FixedPointMethod method = FixedPointMethod::Newton;
};

struct FixedPointResult {
  Cov2 cov;
  double residual = 0.0;  // largest entry of map(s) - s relative to the entry's scale
  long iterations = 0;
};

namespace detail {

// Per-entry scales: the two variances can differ by many orders of
// magnitude, so each entry is judged against its own size.
inline Eigen::Vector3d entry_scale(const Cov2& s) {
  const double x = std::max(std::abs(s(0, 0)), 1e-300);
  const double p = std::max(std::abs(s(1, 1)), 1e-300);
  return {x, p, std::sqrt(x * p)};
}

inline double relative_size(const Cov2& d, const Cov2& s) {
  const Eigen::Vector3d sc = entry_scale(s);
  return std::max({std::abs(d(0, 0)) / sc(0), std::abs(d(1, 1)) / sc(1), std::abs(d(0, 1)) / sc(2)});
}

inline Eigen::Vector3d pack(const Cov2& s) { return {s(0, 0), s(1, 1), s(0, 1)}; }

inline Cov2 unpack(const Eigen::Vector3d& v) {
  Cov2 s;
  s << v(0), v(2), v(2), v(1);
  return s;
}

inline bool admissible(const Cov2& s) {
  return s(0, 0) > 0.0 && s(1, 1) > 0.0 && s.determinant() >= 0.25 * (1.0 - 1e-9);
}

}  // namespace detail

/// Fixed point of s -> s + increment(s). Newton's method converges in a
/// handful of steps where plain iteration needs O(1/(gamma T)) of them.
inline FixedPointResult solve_fixed_point(const std::function<Cov2(const Cov2&)>& increment,
                                          const Cov2& seed, const FixedPointOptions& opts = {}) {
  if (!(opts.tol > 0.0) || opts.max_iter < 1) throw UsageError("invalid fixed-point options");
  Cov2 s = seed;
  Cov2 inc = increment(s);
  double res = detail::relative_size(inc, s);

  if (opts.method == FixedPointMethod::Iterate) {
    long it = 0;
    while (res >= opts.tol) {
      if (it >= opts.max_iter) throw ConvergenceError("fixed-point iteration did not converge", res, it);
      s += inc;
      s(1, 0) = s(0, 1);
      inc = increment(s);
      res = detail::relative_size(inc, s);
      ++it;
    }
    return {s, res, it};
  }

  const long newton_cap = std::min<long>(opts.max_iter, 500);
  double prev_step = std::numeric_limits<double>::infinity();
  for (long it = 0; it < newton_cap; ++it) {
    const Eigen::Vector3d v = detail::pack(s);
    const Eigen::Vector3d f = detail::pack(inc);
    const Eigen::Vector3d scale = detail::entry_scale(s);
    Eigen::Matrix3d jac;
    for (int k = 0; k < 3; ++k) {
      const double h = 1e-6 * scale(k);
      Eigen::Vector3d vp = v, vm = v;
      vp(k) += h;
      vm(k) -= h;
      jac.col(k) = (detail::pack(increment(detail::unpack(vp))) -
                    detail::pack(increment(detail::unpack(vm)))) / (2.0 * h);
    }
    Eigen::Vector3d step = jac.fullPivLu().solve(-f);
    if (!step.allFinite()) step = f;  // singular Jacobian: fall back to one plain step

    // damp until the trial point is a valid covariance and the residual drops
    double lambda = 1.0;
    Cov2 trial;
    Cov2 trial_inc;
    double trial_res = 0.0;
    for (int halvings = 0;; ++halvings) {
      trial = detail::unpack(v + lambda * step);
      if (detail::admissible(trial)) {
        trial_inc = increment(trial);
        trial_res = detail::relative_size(trial_inc, trial);
        if (trial_res < res || halvings >= 40 || res < opts.tol) break;
      } else if (halvings >= 60) {
        throw NumericalError("fixed point: Newton step left the physical region");
      }
      lambda *= 0.5;
    }
    const double step_rel = detail::relative_size(detail::unpack(lambda * step), s);
    s = trial;
    inc = trial_inc;
    res = trial_res;
    // done once steps reach roundoff, or stop shrinking inside the tolerance
    if (res < opts.tol && (step_rel < 1e-13 || step_rel >= prev_step)) return {s, res, it + 1};
    prev_step = step_rel;
  }
  if (res < opts.tol) return {s, res, newton_cap};
  throw ConvergenceError("Newton fixed-point solve did not converge", res, newton_cap);
}

inline FixedPointResult fixed_point(const StroboMap& map, const Cov2& seed,
                                    const FixedPointOptions& opts = {}) {
  return solve_fixed_point([&](const Cov2& s) { return map.increment(s); }, seed, opts);
}

// --- stroboscopic protocols ------------------------------------------------

// Which map acts last in one period: the post-measurement state
// (MeasureLast, E_U o E_th) or the post-evolution state (ThermalLast).
enum class Ordering { MeasureLast, ThermalLast };

inline double pulse_gamma_t(const PhysicalParams& p, double phi) {
  p.validate();
  return p.gamma * phi / p.omega_m;
}

inline StroboMap protocol_map(const PhysicalParams& p, double phi, Ordering order) {
  const StroboMap meas(Measurement{effective_chi(p)});
  const StroboMap therm(ThermalRotation{phi, pulse_gamma_t(p, phi), p.n_bar});
  return order == Ordering::MeasureLast ? compose(meas, therm) : compose(therm, meas);
}

/// Pulses every k half periods.
inline StroboMap bae_map(const PhysicalParams& p, Ordering order = Ordering::MeasureLast, int k = 1) {
  if (k < 1) throw UsageError("pulse spacing multiple k must be >= 1");
  return protocol_map(p, k * std::numbers::pi, order);
}

/// Pulses every k quarter periods (k odd for cooling).
inline StroboMap cooling_map(const PhysicalParams& p, Ordering order = Ordering::MeasureLast,
                             int k = 1) {
  if (k < 1) throw UsageError("pulse spacing multiple k must be >= 1");
  return protocol_map(p, k * std::numbers::pi / 2.0, order);
}

struct SteadyState {
  double sigma_X = 0.0;
  double sigma_P = 0.0;
  double sigma_XP = 0.0;
  double purity = 0.0;

  Cov2 cov() const {
    Cov2 c;
    c << sigma_X, sigma_XP, sigma_XP, sigma_P;
    return c;
  }
};

inline SteadyState steady_from_cov(const Cov2& c) {
  return {c(0, 0), c(1, 1), c(0, 1), 0.5 / std::sqrt(c.determinant())};
}

inline void require_damping(const PhysicalParams& p) {
  p.validate();
  if (!(p.gamma > 0.0)) throw DomainError("steady state requires gamma > 0 (no unique fixed point)");
}

/// Post-measurement steady state for pulses every k half periods.
inline SteadyState bae_steady_exact(const PhysicalParams& p, int k = 1) {
  require_damping(p);
  if (k < 1) throw UsageError("pulse spacing multiple k must be >= 1");
  const double gt = pulse_gamma_t(p, k * std::numbers::pi);
  if (!(gt > 0.0)) throw DomainError("gamma T underflows to zero");
  const double c = effective_chi(p);
  const double z = (2.0 * p.n_bar + 1.0) * c * c;
  const double coth = 1.0 / std::tanh(0.5 * gt);
  SteadyState s;
  s.sigma_X = (2.0 * p.n_bar + 1.0) / (1.0 + z + std::sqrt(1.0 + z * z + 2.0 * z * coth));
  s.sigma_P = p.n_bar + 0.5 + c * c / (2.0 * -std::expm1(-gt));
  s.purity = 0.5 / std::sqrt(s.sigma_X * s.sigma_P);
  return s;
}

/// Leading large-Q terms of the backaction-evading steady state, with the
/// large-Q purity formula.
inline SteadyState bae_steady_largeQ(const PhysicalParams& p) {
  require_damping(p);
  const double c = effective_chi(p);
  if (!(c > 0.0)) throw DomainError("large-Q expansion is singular at chi = 0");
  const double Q = p.Q();
  const double n = p.n_bar;
  const double pi = std::numbers::pi;
  SteadyState s;
  s.sigma_X = std::sqrt(2.0 * pi * (n + 0.5)) / (2.0 * c * std::sqrt(Q));
  s.sigma_P = n + 0.5 + Q * c * c / (2.0 * pi);
  s.purity = std::pow(pi, 0.25) * std::pow(Q / (2.0 * n + 1.0), 0.25) *
             std::sqrt(c / (2.0 * pi * n + Q * c * c));
  return s;
}

/// Smallest Q at which the large-Q expressions are within 1% of the exact
/// ones. The simpler bound 1e4/chi^2 holds only for z <= 1.
inline double bae_largeQ_min_Q(const PhysicalParams& p) {
  const double z = p.z();
  if (!(z > 0.0)) throw DomainError("validity bound undefined at chi = 0");
  return 1e4 * (1.0 + z) * (1.0 + z) / z;
}

/// chi at which the large-Q sigma_X equals the vacuum variance.
inline double bae_squeezing_threshold_chi(double n_bar, double Q) {
  if (!(Q > 0.0) || !(n_bar >= 0.0)) throw DomainError("invalid n_bar or Q");
  return std::sqrt(2.0 * std::numbers::pi * (n_bar + 0.5) / Q);
}

// 1/Q coefficients of the quarter-period cooling steady state.
inline double cooling_F(double chi, double n_bar) {
  if (!(chi > 0.0)) throw DomainError("cooling correction singular at chi = 0");
  const double c2 = chi * chi, c4 = c2 * c2, c6 = c4 * c2;
  const double root = std::sqrt(c4 + 4.0);
  return std::numbers::pi *
         (-4.0 * n_bar * c2 + (4.0 * n_bar * (c4 + 2.0) + c6 + 2.0 * c4 + 4.0 * c2 + 4.0) / root -
          c4 - 2.0 * c2 - 2.0) /
         (8.0 * c2);
}

inline double cooling_G(double chi, double n_bar) {
  if (!(chi > 0.0)) throw DomainError("cooling correction singular at chi = 0");
  const double c2 = chi * chi, c4 = c2 * c2;
  const double root = std::sqrt(c4 + 4.0);
  return std::numbers::pi * (2.0 * n_bar * (c4 + 2.0) + c4 - root + 2.0) / (4.0 * c2 * root);
}

/// Q -> infinity limit: a minimum-uncertainty state.
inline SteadyState cooling_steady_leading(double chi) {
  if (!(chi >= 0.0)) throw DomainError("chi must be >= 0");
  const double c2 = chi * chi;
  const double root = std::sqrt(4.0 + c2 * c2);
  SteadyState s;
  s.sigma_X = 1.0 / (root + c2);  // (root - c2) / 4 without the cancellation
  s.sigma_P = (root + c2) / 4.0;
  s.purity = 0.5 / std::sqrt(s.sigma_X * s.sigma_P);
  return s;
}

/// Post-measurement state for pulses every quarter period, to first order in 1/Q.
inline SteadyState cooling_steady_largeQ(const PhysicalParams& p) {
  require_damping(p);
  const double c = effective_chi(p);
  if (!(c > 0.0)) throw DomainError("cooling steady state singular at chi = 0");
  const double Q = p.Q();
  SteadyState s = cooling_steady_leading(c);
  s.sigma_X += cooling_F(c, p.n_bar) / Q;
  s.sigma_P += cooling_G(c, p.n_bar) / Q;
  s.purity = 0.5 / std::sqrt(s.sigma_X * s.sigma_P);
  return s;
}

/// Numerical stroboscopic steady state of the given map, seeded thermal.
inline SteadyState steady_fixed_point(const StroboMap& map, double n_bar,
                                      const FixedPointOptions& opts = {}) {
  return steady_from_cov(fixed_point(map, thermal_cov(n_bar), opts).cov);
}

}  // namespace strobomech
