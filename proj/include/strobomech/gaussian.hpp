#pragma once

// Multimode Gaussian states in the interleaved quadrature ordering
// (X1, P1, X2, P2, ...) with vacuum variance 1/2, plus the symplectic
// transforms that act on them and the scalar figures of merit used
// throughout the library (purity, squeezing in dB, log-negativity).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "strobomech/errors.hpp"

namespace strobomech {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Cov2 = Eigen::Matrix2d;

inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kPhysicalityTol = 1e-9;
inline constexpr double kSymplecticTol = 1e-10;

/// Standard symplectic form: direct sum of [[0, 1], [-1, 0]] blocks.
inline Matrix symplectic_form(int n_modes) {
  Matrix omega = Matrix::Zero(2 * n_modes, 2 * n_modes);
  for (int k = 0; k < n_modes; ++k) {
    omega(2 * k, 2 * k + 1) = 1.0;
    omega(2 * k + 1, 2 * k) = -1.0;
  }
  return omega;
}

/// cos/sin with exact values at integer multiples of pi/2, so that quarter-
/// and half-period rotations do not leak roundoff into off-diagonal terms.
inline std::pair<double, double> exact_cos_sin(double phi) {
  const double quarters = phi / (std::numbers::pi / 2.0);
  const double nearest = std::round(quarters);
  if (std::abs(quarters - nearest) < 1e-12) {
    switch (static_cast<long long>(nearest) & 3) {
      case 0: return {1.0, 0.0};
      case 1: return {0.0, 1.0};
      case 2: return {-1.0, 0.0};
      default: return {0.0, -1.0};
    }
  }
  return {std::cos(phi), std::sin(phi)};
}

/// Free harmonic evolution of (X, P) by phase phi: X -> X cos + P sin.
inline Cov2 rotation_matrix(double phi) {
  const auto [c, s] = exact_cos_sin(phi);
  Cov2 r;
  r << c, s, -s, c;
  return r;
}

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

inline bool is_symmetric(const Matrix& cov, double tol = kSymmetryTol) {
  if (cov.rows() != cov.cols()) return false;
  const double scale = std::max(1.0, max_abs(cov));
  return max_abs(cov - cov.transpose()) <= tol * scale;
}

/// Symplectic spectrum, ascending, one value per mode. Uses the Cholesky
/// factor L of cov: the eigenvalues of Omega*cov coincide with those of the
/// antisymmetric L^T Omega L, whose squared singular values are nu_k^2.
inline Vector symplectic_eigenvalues(const Matrix& cov) {
  if (cov.rows() != cov.cols() || cov.rows() % 2 != 0) {
    throw UsageError("covariance must be square with even dimension");
  }
  const int n_modes = static_cast<int>(cov.rows() / 2);
  Eigen::LLT<Matrix> llt(symmetrized(cov));
  if (llt.info() != Eigen::Success) {
    throw DomainError("covariance matrix is not positive definite");
  }
  const Matrix lower = llt.matrixL();
  const Matrix a = lower.transpose() * symplectic_form(n_modes) * lower;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a.transpose() * a, Eigen::EigenvaluesOnly);
  const Vector squares = eig.eigenvalues();
  Vector nu(n_modes);
  for (int k = 0; k < n_modes; ++k) {
    // eigenvalues come in degenerate pairs; average each pair
    const double pair = 0.5 * (squares(2 * k) + squares(2 * k + 1));
    nu(k) = std::sqrt(std::max(pair, 0.0));
  }
  return nu;
}

/// Uncertainty principle cov + i Omega / 2 >= 0, i.e. all nu_k >= 1/2 - tol.
inline bool is_physical(const Matrix& cov, double tol = kPhysicalityTol) {
  if (!cov.allFinite() || !is_symmetric(cov, 1e-9)) return false;
  Eigen::LLT<Matrix> llt(symmetrized(cov));
  if (llt.info() != Eigen::Success) return false;
  return symplectic_eigenvalues(cov).minCoeff() >= 0.5 - tol;
}

class SymplecticTransform {
 public:
  explicit SymplecticTransform(Matrix matrix, double tol = kSymplecticTol)
      : matrix_(std::move(matrix)) {
    if (matrix_.rows() != matrix_.cols() || matrix_.rows() % 2 != 0 || matrix_.rows() == 0) {
      throw UsageError("symplectic matrix must be square with positive even dimension");
    }
    if (symplectic_residual() > tol) {
      throw DomainError("matrix is not symplectic: |S Omega S^T - Omega| = " +
                        std::to_string(symplectic_residual()));
    }
  }

  static SymplecticTransform identity(int n_modes) {
    return SymplecticTransform(Matrix::Identity(2 * n_modes, 2 * n_modes));
  }

  static SymplecticTransform rotation(double phi) {
    return SymplecticTransform(Matrix(rotation_matrix(phi)));
  }

  // X1' = cos X1 + sin X2, X2' = -sin X1 + cos X2, same for P. theta = pi/4
  // is the balanced splitter.
  static SymplecticTransform beamsplitter(double theta) {
    const auto [c, s] = exact_cos_sin(theta);
    Matrix m = Matrix::Zero(4, 4);
    m(0, 0) = c; m(0, 2) = s;
    m(1, 1) = c; m(1, 3) = s;
    m(2, 0) = -s; m(2, 2) = c;
    m(3, 1) = -s; m(3, 3) = c;
    return SymplecticTransform(std::move(m));
  }

  /// Heisenberg action of U = exp(i xi^T K xi / 2) for symmetric K:
  /// U^dag xi U = exp(-Omega K) xi.
  static SymplecticTransform from_generator(const Matrix& hessian) {
    if (hessian.rows() != hessian.cols() || hessian.rows() % 2 != 0) {
      throw UsageError("generator must be square with even dimension");
    }
    if (!is_symmetric(hessian)) throw UsageError("generator must be symmetric");
    const int n_modes = static_cast<int>(hessian.rows() / 2);
    const Matrix exponent = -symplectic_form(n_modes) * hessian;
    return SymplecticTransform(exponent.exp(), 1e-9);
  }

  const Matrix& matrix() const noexcept { return matrix_; }
  int n_modes() const noexcept { return static_cast<int>(matrix_.rows() / 2); }

  double symplectic_residual() const {
    const Matrix omega = symplectic_form(n_modes());
    return max_abs(matrix_ * omega * matrix_.transpose() - omega);
  }

  // S^{-1} = -Omega S^T Omega
  SymplecticTransform inverse() const {
    const Matrix omega = symplectic_form(n_modes());
    return SymplecticTransform(-omega * matrix_.transpose() * omega, 1e-8);
  }

  SymplecticTransform direct_sum(const SymplecticTransform& other) const {
    const auto n = matrix_.rows();
    const auto m = other.matrix_.rows();
    Matrix out = Matrix::Zero(n + m, n + m);
    out.topLeftCorner(n, n) = matrix_;
    out.bottomRightCorner(m, m) = other.matrix_;
    return SymplecticTransform(std::move(out), 1e-8);
  }

  friend SymplecticTransform operator*(const SymplecticTransform& lhs,
                                       const SymplecticTransform& rhs) {
    if (lhs.n_modes() != rhs.n_modes()) throw UsageError("mode count mismatch in composition");
    return SymplecticTransform(lhs.matrix_ * rhs.matrix_, 1e-8);
  }

 private:
  Matrix matrix_;
};

class GaussianState {
 public:
  GaussianState(Vector mean, Matrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
    if (cov_.rows() != cov_.cols() || cov_.rows() % 2 != 0 || cov_.rows() == 0) {
      throw UsageError("covariance must be square with positive even dimension");
    }
    if (mean_.size() != cov_.rows()) throw UsageError("mean and covariance sizes differ");
    if (!cov_.allFinite() || !mean_.allFinite()) throw DomainError("state has non-finite entries");
    if (!is_symmetric(cov_)) throw DomainError("covariance matrix is not symmetric");
    cov_ = symmetrized(cov_);
    if (symplectic_eigenvalues(cov_).minCoeff() < 0.5 - kPhysicalityTol) {
      throw DomainError("covariance violates the uncertainty principle");
    }
  }

  explicit GaussianState(const Matrix& cov) : GaussianState(Vector::Zero(cov.rows()), cov) {}

  static GaussianState vacuum(int n_modes) { return thermal(n_modes, 0.0); }

  static GaussianState thermal(int n_modes, double n_bar) {
    if (n_modes < 1) throw UsageError("need at least one mode");
    if (!(n_bar >= 0.0)) throw DomainError("thermal occupation must be >= 0");
    return GaussianState(Matrix::Identity(2 * n_modes, 2 * n_modes) * (n_bar + 0.5));
  }

  int n_modes() const noexcept { return static_cast<int>(cov_.rows() / 2); }
  const Vector& mean() const noexcept { return mean_; }
  const Matrix& cov() const noexcept { return cov_; }

  /// Marginal on the listed modes, in the listed order.
  GaussianState reduced(std::span<const int> modes) const {
    const auto k = static_cast<Eigen::Index>(modes.size());
    Vector m(2 * k);
    Matrix c(2 * k, 2 * k);
    for (Eigen::Index a = 0; a < k; ++a) {
      const int ma = modes[a];
      if (ma < 0 || ma >= n_modes()) throw UsageError("mode index out of range");
      m.segment<2>(2 * a) = mean_.segment<2>(2 * ma);
      for (Eigen::Index b = 0; b < k; ++b) {
        c.block<2, 2>(2 * a, 2 * b) = cov_.block<2, 2>(2 * ma, 2 * modes[b]);
      }
    }
    return GaussianState(std::move(m), std::move(c));
  }

  GaussianState reduced(std::initializer_list<int> modes) const {
    const std::vector<int> v(modes);
    return reduced(std::span<const int>(v));
  }

 private:
  Vector mean_;
  Matrix cov_;
};

inline GaussianState apply_symplectic(const GaussianState& state, const SymplecticTransform& s) {
  if (s.n_modes() != state.n_modes()) throw UsageError("symplectic/state dimension mismatch");
  return GaussianState(s.matrix() * state.mean(),
                       symmetrized(s.matrix() * state.cov() * s.matrix().transpose()));
}

/// mu = 1 / (2^N sqrt(det cov))
inline double purity(const Matrix& cov) {
  Eigen::LLT<Matrix> llt(symmetrized(cov));
  if (llt.info() != Eigen::Success) throw DomainError("purity: covariance not positive definite");
  const int n_modes = static_cast<int>(cov.rows() / 2);
  // sqrt(det) = prod diag(L); accumulate in log space
  double log_sqrt_det = 0.0;
  for (Eigen::Index i = 0; i < cov.rows(); ++i) log_sqrt_det += std::log(llt.matrixLLT()(i, i));
  return std::exp(-n_modes * std::numbers::ln2 - log_sqrt_det);
}

inline double purity(const GaussianState& state) { return purity(state.cov()); }

/// -10 log10(2 v): positive means the quadrature is below vacuum noise.
inline double squeezing_db(double variance) {
  if (!(variance > 0.0)) throw DomainError("squeezing_db: variance must be positive");
  return -10.0 * std::log10(2.0 * variance);
}

inline double squeezing_db(const GaussianState& state, int quadrature_index) {
  if (quadrature_index < 0 || quadrature_index >= state.cov().rows()) {
    throw UsageError("quadrature index out of range");
  }
  return squeezing_db(state.cov()(quadrature_index, quadrature_index));
}

/// Flip P of one mode (partial transposition at the covariance level).
inline Matrix partial_transpose(const Matrix& cov, int mode) {
  Matrix out = cov;
  const int p = 2 * mode + 1;
  out.row(p) *= -1.0;
  out.col(p) *= -1.0;
  return out;
}

/// Smallest symplectic eigenvalue of the partial transpose of a two-mode
/// covariance, from the invariants det A, det B, det C, det cov.
inline double min_pt_symplectic_eigenvalue(const Matrix& cov) {
  if (cov.rows() != 4 || cov.cols() != 4) throw UsageError("two-mode covariance expected");
  const Eigen::Matrix2d a = cov.topLeftCorner<2, 2>();
  const Eigen::Matrix2d b = cov.bottomRightCorner<2, 2>();
  const Eigen::Matrix2d c = cov.topRightCorner<2, 2>();
  const double delta = a.determinant() + b.determinant() - 2.0 * c.determinant();
  const double det = cov.determinant();
  const double disc = std::max(delta * delta - 4.0 * det, 0.0);
  // (delta - sqrt(disc)) / 2 written to avoid cancellation
  const double large = 0.5 * (delta + std::sqrt(disc));
  if (!(large > 0.0)) throw DomainError("log_negativity: degenerate covariance");
  return std::sqrt(std::max(det / large, 0.0));
}

/// E_N = max(0, -ln(2 nu_min)) of the partially transposed state.
inline double log_negativity(const Matrix& cov) {
  if (cov.rows() != 4 || cov.cols() != 4) {
    throw UsageError("log_negativity requires a two-mode state");
  }
  const double nu = min_pt_symplectic_eigenvalue(cov);
  if (!(nu > 0.0)) throw DomainError("log_negativity: singular covariance");
  return std::max(0.0, -std::log(2.0 * nu));
}

inline double log_negativity(const GaussianState& state) {
  if (state.n_modes() != 2) throw UsageError("log_negativity requires a two-mode state");
  return log_negativity(state.cov());
}

}  // namespace strobomech
