#pragma once

// Optomechanical pulses beyond the ideal position measurement.
//
// Discrete model: each pulse couples an input field mode to the cavity,
// the cavity to the mechanics, and the reflected field is homodyned.
// Modes are ordered (in, cavity, mechanics).
//
// Continuous model: cavity and mechanics (ordered (cavity, mechanics), the
// mechanics in the frame rotating at omega_m) evolve under the full pulsed
// drive, cavity decay, mechanical damping, and continuous homodyne
// detection of the cavity output phase quadrature.

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "strobomech/errors.hpp"
#include "strobomech/gaussian.hpp"
#include "strobomech/pulse.hpp"
#include "strobomech/strobo_maps.hpp"

namespace strobomech {

struct OptomechParams {
  PulseParams pulse;
  double Q = 1e6;
  double n_bar = 0.0;
  double eta = 1.0;  // detection efficiency

  double omega_m() const { return pulse.omega_m; }
  double gamma() const { return pulse.omega_m / Q; }
  // pulse spacing: half a mechanical period
  double period() const { return std::numbers::pi / pulse.omega_m; }

  void validate() const {
    pulse.validate();
    if (!(Q > 0.0) || !std::isfinite(Q)) throw DomainError("Q must be positive");
    if (!(n_bar >= 0.0) || !std::isfinite(n_bar)) throw DomainError("n_bar must be >= 0");
    if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("eta must lie in [0, 1]");
  }
};

// --- measurement plumbing --------------------------------------------------

/// Detection with efficiency eta: mix the mode with vacuum on a beamsplitter
/// of transmissivity eta and drop the vacuum port.
inline Matrix apply_efficiency(const Matrix& cov, int mode, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("eta must lie in [0, 1]");
  if (mode < 0 || 2 * mode + 1 >= cov.rows()) throw UsageError("mode index out of range");
  Matrix out = cov;
  const double t = std::sqrt(eta);
  out.middleRows(2 * mode, 2) *= t;
  out.middleCols(2 * mode, 2) *= t;
  out.block(2 * mode, 2 * mode, 2, 2) += Matrix::Identity(2, 2) * (0.5 * (1.0 - eta));
  return out;
}

/// Conditional covariance of the other modes after a general-dyne
/// measurement of `mode` with measured-quadrature projector `proj`:
/// A - C (proj B proj)^+ C^T. Homodyne of X is proj = diag(1, 0).
inline Matrix condition_general_dyne(const Matrix& cov, int mode, const Eigen::Matrix2d& proj) {
  const auto n = cov.rows();
  if (mode < 0 || 2 * mode + 1 >= n) throw UsageError("mode index out of range");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i != 2 * mode && i != 2 * mode + 1) keep.push_back(i);
  }
  const auto m = static_cast<Eigen::Index>(keep.size());
  Matrix a(m, m), c(m, 2);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) a(i, j) = cov(keep[i], keep[j]);
    c(i, 0) = cov(keep[i], 2 * mode);
    c(i, 1) = cov(keep[i], 2 * mode + 1);
  }
  const Eigen::Matrix2d b = cov.block<2, 2>(2 * mode, 2 * mode);
  const Eigen::Matrix2d pbp = proj * b * proj;
  const Eigen::Matrix2d pinv = pbp.completeOrthogonalDecomposition().pseudoInverse();
  return symmetrized(a - c * pinv * c.transpose());
}

inline Matrix condition_homodyne(const Matrix& cov, int mode, int quadrature) {
  if (quadrature != 0 && quadrature != 1) throw UsageError("quadrature must be 0 (X) or 1 (P)");
  Eigen::Matrix2d proj = Eigen::Matrix2d::Zero();
  proj(quadrature, quadrature) = 1.0;
  return condition_general_dyne(cov, mode, proj);
}

// --- discrete three-mode pulse ---------------------------------------------

/// exp{i chi Xm Xc + i sqrt(kappa tau) (Pc Xin - Xc Pin)} on (in, cavity, mechanics).
inline SymplecticTransform extended_pulse_unitary(double chi, double kappa_tau) {
  if (!(chi >= 0.0) || !std::isfinite(chi)) throw DomainError("chi must be >= 0");
  if (!(kappa_tau > 0.0) || !std::isfinite(kappa_tau)) throw DomainError("kappa*tau must be positive");
  const double theta = std::sqrt(kappa_tau);
  enum { Xin = 0, Pin, Xc, Pc, Xm, Pm };
  Matrix k = Matrix::Zero(6, 6);
  k(Xm, Xc) = k(Xc, Xm) = chi;
  k(Pc, Xin) = k(Xin, Pc) = theta;
  k(Xc, Pin) = k(Pin, Xc) = -theta;
  return SymplecticTransform::from_generator(k);
}

/// Pulse strength of the discrete model: g tau with g = 2 g0 sqrt(N_p / (kappa tau)).
inline double extended_chi(const PulseParams& p) { return p.g_ad() * p.tau; }

struct ExtendedState {
  GaussianState state;         // (in, cavity, mechanics), ready for the next pulse
  Cov2 post_measurement;       // mechanics right after conditioning
};

class ExtendedPulse {
 public:
  explicit ExtendedPulse(const OptomechParams& p)
      : params_(p), unitary_((p.validate(), extended_pulse_unitary(extended_chi(p.pulse),
                                                                  p.pulse.kappa * p.pulse.tau))) {}

  /// Mechanics right after one pulse: couple, detect P of the reflected
  /// field, trace out the field and the cavity.
  Cov2 measure(const Matrix& cov3) const {
    const Matrix& s = unitary_.matrix();
    Matrix evolved = symmetrized(s * cov3 * s.transpose());
    evolved = apply_efficiency(evolved, 0, params_.eta);
    const Matrix cond = condition_homodyne(evolved, 0, 1);  // (cavity, mechanics)
    return cond.bottomRightCorner<2, 2>();
  }

  /// Mechanics with fresh vacuum in-mode and cavity.
  Cov2 measure_mechanics(const Cov2& mech) const {
    Matrix cov3 = Matrix::Identity(6, 6) * 0.5;
    cov3.bottomRightCorner<2, 2>() = mech;
    return measure(cov3);
  }

  Cov2 evolve(const Cov2& mech) const {
    return thermal_rotation_map(mech, std::numbers::pi, params_.gamma() * params_.period(), params_.n_bar);
  }

  const SymplecticTransform& unitary() const noexcept { return unitary_; }

 private:
  OptomechParams params_;
  SymplecticTransform unitary_;
};

inline Matrix with_fresh_field(const Cov2& mech) {
  Matrix cov3 = Matrix::Identity(6, 6) * 0.5;
  cov3.bottomRightCorner<2, 2>() = mech;
  return cov3;
}

/// One stroboscopic cycle: pulse, homodyne, half-period damped rotation of
/// the mechanics, fresh vacuum in-mode and cavity.
inline ExtendedState strobo_step_extended(const GaussianState& state, const OptomechParams& p) {
  if (state.n_modes() != 3) throw UsageError("extended model expects 3 modes (in, cavity, mechanics)");
  const ExtendedPulse pulse(p);
  const Cov2 post = pulse.measure(state.cov());
  if (!is_physical(post)) throw InternalError("non-physical mechanics after conditioning");
  const Cov2 next = pulse.evolve(post);
  return {GaussianState(with_fresh_field(next)), post};
}

struct ExtendedSteadyState {
  Cov2 pre_pulse;
  Cov2 post_pulse;
  long iterations = 0;
};

/// Stroboscopic fixed point of the discrete model.
inline ExtendedSteadyState extended_fixed_point(const OptomechParams& p,
                                                const FixedPointOptions& opts = {}) {
  const ExtendedPulse pulse(p);
  auto cycle = [&](const Cov2& m) { return pulse.evolve(pulse.measure_mechanics(m)); };
  const auto fp = solve_fixed_point([&](const Cov2& m) { return Cov2(cycle(m) - m); },
                                    thermal_cov(p.n_bar), opts);
  return {fp.cov, pulse.measure_mechanics(fp.cov), fp.iterations};
}

/// Large-Q steady state of the discrete model (post-pulse mechanics).
inline SteadyState extended_steady_largeQ(const OptomechParams& p) {
  p.validate();
  const double kt = p.pulse.kappa * p.pulse.tau;
  const double theta = std::sqrt(kt);
  const double s = std::sin(0.5 * theta);
  if (s * s < 1e-12) {
    throw DomainError("sqrt(kappa*tau) is a multiple of 2 pi: the reflected field carries no information");
  }
  const double g = p.pulse.g_ad();
  const double k = p.pulse.kappa;
  const double n = p.n_bar;
  const double pi = std::numbers::pi;
  SteadyState out;
  out.sigma_X = k * std::sqrt(2.0 * pi * (n + 0.5)) / (4.0 * g * s * s * std::sqrt(kt * p.Q));
  out.sigma_P = n + 0.5 + g * g * p.Q * p.pulse.tau * (1.0 - std::cos(theta)) / (pi * k);
  out.purity = 0.5 / std::sqrt(out.sigma_X * out.sigma_P);
  return out;
}

// --- continuous conditional evolution ----------------------------------------

using Mat4 = Eigen::Matrix4d;

struct RiccatiOptions {
  double dt = 0.0;       // 0 picks min(1/kappa, 1/omega_m) / 100
  bool condition = true;  // false gives the unconditional (averaged) evolution
  bool drive = true;      // false switches the optomechanical coupling off
};

struct RiccatiSample {
  double t = 0.0;
  Cov2 mechanics;
  double purity = 0.0;          // of the mechanics marginal
  double log_negativity = 0.0;  // cavity-mechanics
};

class RiccatiModel {
 public:
  RiccatiModel(const OptomechParams& p, const RiccatiOptions& opts = {}) : p_(p), opts_(opts) {
    p_.validate();
    const double limit = std::min(1.0 / p_.pulse.kappa, 1.0 / p_.omega_m());
    if (opts_.dt == 0.0) opts_.dt = limit / 100.0;
    if (!(opts_.dt > 0.0) || opts_.dt > limit / 50.0 * (1.0 + 1e-12)) {
      throw UsageError("dt must satisfy 0 < dt <= min(1/kappa, 1/omega_m)/50");
    }
    const double k = p_.pulse.kappa, gam = p_.gamma();
    diffusion_.setZero();
    diffusion_.diagonal() << 0.5 * k, 0.5 * k, gam * (p_.n_bar + 0.5), gam * (p_.n_bar + 0.5);
    damping_.setZero();
    damping_.diagonal() << -0.5 * k, -0.5 * k, -0.5 * gam, -0.5 * gam;
  }

  const OptomechParams& params() const noexcept { return p_; }
  double dt() const noexcept { return opts_.dt; }

  /// Optomechanical coupling g0 * alpha summed over all pulses centred at
  /// k T, k >= 0, whose ring-down has not died out.
  double coupling(double t) const {
    if (!opts_.drive) return 0.0;
    const double T = p_.period();
    const double ring = 80.0 / p_.pulse.kappa + p_.pulse.tau;
    double g = 0.0;
    const long last = static_cast<long>(std::floor((t + 0.5 * p_.pulse.tau) / T));
    for (long k = last; k >= 0 && t - k * T < ring; --k) g += cavity_field(t - k * T, p_.pulse);
    return p_.pulse.g0 * g;
  }

  Mat4 drift(double t) const {
    // H = -g(t) Xc (Xm cos wt + Pm sin wt); Heisenberg drift is Omega * Hessian
    const double g = coupling(t);
    const double w = p_.omega_m();
    const double c = -g * std::cos(w * t), s = -g * std::sin(w * t);
    Mat4 a = damping_;
    // rows: dXc = dH/dPc = 0, dPc = -dH/dXc, dXm = dH/dPm, dPm = -dH/dXm
    a(1, 2) += -c;
    a(1, 3) += -s;
    a(2, 0) += s;
    a(3, 0) += -c;
    return a;
  }

  Mat4 rhs(double t, const Mat4& sig) const {
    const Mat4 a = drift(t);
    Mat4 out = a * sig + sig * a.transpose() + diffusion_;
    if (opts_.condition && p_.eta > 0.0) {
      Eigen::Vector4d v = sig.col(1);
      v(1) -= 0.5;
      out -= 2.0 * p_.eta * p_.pulse.kappa * v * v.transpose();
    }
    return out;
  }

  Mat4 step(double t, const Mat4& sig, double h) const {
    const Mat4 k1 = rhs(t, sig);
    const Mat4 k2 = rhs(t + 0.5 * h, sig + 0.5 * h * k1);
    const Mat4 k3 = rhs(t + 0.5 * h, sig + 0.5 * h * k2);
    const Mat4 k4 = rhs(t + h, sig + h * k3);
    Mat4 out = sig + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    return 0.5 * (out + out.transpose());
  }

  long steps_per_period() const { return static_cast<long>(std::ceil(p_.period() / opts_.dt - 1e-9)); }

  /// Evolve over [t0, t0 + T] in steps_per_period() equal steps. The
  /// visitor, if any, sees the state at every step start.
  template <class Visitor>
  Mat4 propagate_period(double t0, Mat4 sig, Visitor&& visit) const {
    const long n = steps_per_period();
    const double h = p_.period() / static_cast<double>(n);
    for (long i = 0; i < n; ++i) {
      const double t = t0 + i * h;
      visit(t, sig);
      sig = step(t, sig, h);
    }
    if (!sig.allFinite()) throw NumericalError("Riccati integration diverged; reduce dt");
    return sig;
  }

  Mat4 propagate_period(double t0, const Mat4& sig) const {
    return propagate_period(t0, sig, [](double, const Mat4&) {});
  }

 private:
  OptomechParams p_;
  RiccatiOptions opts_;
  Mat4 diffusion_;
  Mat4 damping_;
};

inline RiccatiSample make_sample(double t, const Mat4& sig) {
  RiccatiSample s;
  s.t = t;
  s.mechanics = sig.bottomRightCorner<2, 2>();
  s.purity = 0.5 / std::sqrt(s.mechanics.determinant());
  s.log_negativity = log_negativity(Matrix(sig));
  return s;
}

inline void require_physical(const Mat4& sig, double t) {
  if (!is_physical(Matrix(sig), 1e-7)) {
    throw NumericalError("covariance left the physical region at t = " + std::to_string(t) +
                         "; reduce dt");
  }
}

/// Time series from cavity vacuum and thermal mechanics at t = 0, sampled
/// every `sample_every` steps.
inline std::vector<RiccatiSample> riccati_trajectory(const OptomechParams& p, double t_end,
                                                     const RiccatiOptions& opts = {},
                                                     long sample_every = 1,
                                                     const Mat4* initial = nullptr) {
  const RiccatiModel model(p, opts);
  if (!(t_end >= 0.0)) throw UsageError("t_end must be >= 0");
  if (sample_every < 1) throw UsageError("sample_every must be >= 1");
  Mat4 sig = Mat4::Identity() * 0.5;
  sig(2, 2) = sig(3, 3) = p.n_bar + 0.5;
  if (initial) sig = *initial;
  const double h = model.dt();
  const long n = static_cast<long>(std::ceil(t_end / h - 1e-9));
  std::vector<RiccatiSample> out;
  out.reserve(static_cast<size_t>(n / sample_every + 2));
  for (long i = 0; i <= n; ++i) {
    const double t = i * h;
    if (i % sample_every == 0 || i == n) {
      require_physical(sig, t);
      out.push_back(make_sample(t, sig));
    }
    if (i < n) sig = model.step(t, sig, h);
  }
  return out;
}

struct PeriodicSteadyState {
  Mat4 cov;                  // at the start of a pulse window, t = -tau/2
  double mean_sigma_X = 0.0;  // period average of the mechanics X variance
  double squeezing_db = 0.0;  // of the averaged variance
  double mean_purity = 0.0;
  double mean_log_negativity = 0.0;
  double residual = 0.0;
  long newton_iterations = 0;
};

namespace detail {

inline constexpr int kTri[10][2] = {{0, 0}, {0, 1}, {0, 2}, {0, 3}, {1, 1},
                                    {1, 2}, {1, 3}, {2, 2}, {2, 3}, {3, 3}};

inline Eigen::Matrix<double, 10, 1> pack4(const Mat4& s) {
  Eigen::Matrix<double, 10, 1> v;
  for (int k = 0; k < 10; ++k) v(k) = s(kTri[k][0], kTri[k][1]);
  return v;
}

inline Mat4 unpack4(const Eigen::Matrix<double, 10, 1>& v) {
  Mat4 s;
  for (int k = 0; k < 10; ++k) s(kTri[k][0], kTri[k][1]) = s(kTri[k][1], kTri[k][0]) = v(k);
  return s;
}

inline Eigen::Matrix<double, 10, 1> scale4(const Mat4& s) {
  Eigen::Matrix<double, 10, 1> v;
  for (int k = 0; k < 10; ++k) v(k) = std::sqrt(s(kTri[k][0], kTri[k][0]) * s(kTri[k][1], kTri[k][1]));
  return v;
}

}  // namespace detail

/// Mechanics steady state of the discrete model used as the Newton seed.
inline Mat4 periodic_seed(const OptomechParams& p) {
  const auto m = magnus_coefficients(p.pulse);
  const auto ss = bae_steady_exact(PhysicalParams::from_Q(p.Q, p.n_bar, m.chi));
  Mat4 s = Mat4::Identity() * 0.5;
  s(2, 2) = ss.sigma_X;
  s(3, 3) = ss.sigma_P;
  return s;
}

/// T-periodic conditional state. One period later the mechanics frame has
/// turned by pi relative to the drive, so periodicity reads
/// sigma(t + T) = J sigma(t) J with J = diag(1, 1, -1, -1); the fixed point
/// of that period map is found by Newton's method with a central-difference
/// Jacobian over the 10 independent entries.
inline PeriodicSteadyState periodic_steady_state(const OptomechParams& p, const RiccatiOptions& opts = {},
                                                 double tol = 1e-9, int max_newton = 60) {
  const RiccatiModel model(p, opts);
  const double t0 = -0.5 * p.pulse.tau + p.period();  // window after one pulse, previous ring-down included
  Mat4 j = Mat4::Identity();
  j(2, 2) = j(3, 3) = -1.0;
  auto period_map = [&](const Mat4& s) { return Mat4(j * model.propagate_period(t0, s) * j); };
  auto residual_of = [&](const Mat4& s, const Mat4& f) {
    return ((detail::pack4(f) - detail::pack4(s)).cwiseQuotient(detail::scale4(s))).cwiseAbs().maxCoeff();
  };

  using Vec10 = Eigen::Matrix<double, 10, 1>;
  using Mat10 = Eigen::Matrix<double, 10, 10>;
  Mat4 s = periodic_seed(p);
  Mat4 f = period_map(s);
  double res = residual_of(s, f);
  int it = 0;
  for (; it < max_newton && res >= tol; ++it) {
    const Vec10 v = detail::pack4(s);
    const Vec10 sc = detail::scale4(s);
    const Vec10 fv = detail::pack4(f) - v;
    Mat10 jac;
    for (int k = 0; k < 10; ++k) {
      const double h = 1e-6 * sc(k);
      Vec10 vp = v, vm = v;
      vp(k) += h;
      vm(k) -= h;
      const Mat4 sp = detail::unpack4(vp), sm = detail::unpack4(vm);
      jac.col(k) = ((detail::pack4(period_map(sp)) - vp) - (detail::pack4(period_map(sm)) - vm)) / (2.0 * h);
    }
    const Vec10 dv = jac.fullPivLu().solve(-fv);
    if (!dv.allFinite()) throw NumericalError("periodic steady state: singular Jacobian");
    double lambda = 1.0;
    for (int halvings = 0;; ++halvings) {
      const Mat4 trial = detail::unpack4(v + lambda * dv);
      Eigen::LLT<Mat4> llt(trial);
      if (llt.info() == Eigen::Success && is_physical(Matrix(trial), 1e-7)) {
        const Mat4 ft = period_map(trial);
        const double rt = residual_of(trial, ft);
        if (rt < res || halvings >= 30) {
          s = trial;
          f = ft;
          res = rt;
          break;
        }
      } else if (halvings >= 60) {
        throw NumericalError("periodic steady state: Newton step left the physical region");
      }
      lambda *= 0.5;
    }
  }
  if (res >= tol) throw ConvergenceError("periodic steady state did not converge", res, it);

  PeriodicSteadyState out;
  out.cov = s;
  out.residual = res;
  out.newton_iterations = it;
  long count = 0;
  model.propagate_period(t0, s, [&](double t, const Mat4& sig) {
    const RiccatiSample smp = make_sample(t, sig);
    out.mean_sigma_X += smp.mechanics(0, 0);
    out.mean_purity += smp.purity;
    out.mean_log_negativity += smp.log_negativity;
    ++count;
  });
  require_physical(s, t0);
  out.mean_sigma_X /= count;
  out.mean_purity /= count;
  out.mean_log_negativity /= count;
  out.squeezing_db = squeezing_db(out.mean_sigma_X);
  return out;
}

/// Purity of the ideal backaction-evading steady state whose sigma_X equals
/// the given value, at the same n_bar and Q.
inline double ideal_qnd_purity_at(double sigma_X, double n_bar, double Q) {
  auto sx = [&](double chi) { return bae_steady_exact(PhysicalParams::from_Q(Q, n_bar, chi)).sigma_X; };
  if (!(sigma_X > 0.0) || sigma_X >= n_bar + 0.5) throw DomainError("sigma_X outside the reachable range");
  double lo = 0.0, hi = 1.0;
  while (sx(hi) > sigma_X) {
    hi *= 2.0;
    if (hi > 1e12) throw DomainError("sigma_X unreachable");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (sx(mid) > sigma_X ? lo : hi) = mid;
  }
  return bae_steady_exact(PhysicalParams::from_Q(Q, n_bar, 0.5 * (lo + hi))).purity;
}

}  // namespace strobomech
