#pragma once

// Reference LASSO solvers: complex soft thresholding, ISTA and scaled-dual
// ADMM. The batched variants take one measurement per column.

#include <cmath>
#include <random>
#include <vector>

#include "thadmm/array_geometry.hpp"
#include "thadmm/toeplitz.hpp"
#include "thadmm/types.hpp"

namespace thadmm {

/// e^{j arg z} max(|z| - kappa, 0); exactly zero inside the dead zone.
template <typename Real>
Complex<Real> soft_threshold(Complex<Real> z, Real kappa) {
  const Real mag = std::abs(z);
  if (mag <= kappa) return Complex<Real>(0);
  return z * ((mag - kappa) / mag);
}

template <typename Derived>
auto soft_threshold(const Eigen::MatrixBase<Derived>& z, typename Derived::RealScalar kappa) {
  using Real = typename Derived::RealScalar;
  return z.unaryExpr([kappa](const Complex<Real>& v) { return soft_threshold(v, kappa); }).eval();
}

/// Largest singular value through power iteration on A^H A.
template <typename Real>
Real max_singular_value(const ComplexMat<Real>& A, int max_iterations = 100000, Real tol = Real(1e-14)) {
  const Index n = A.cols();
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<Real> gauss;
  ComplexVec<Real> v(n);
  for (Index i = 0; i < n; ++i) v[i] = Complex<Real>(gauss(rng), gauss(rng));
  v.normalize();

  Real lambda = 0;
  for (int it = 0; it < max_iterations; ++it) {
    ComplexVec<Real> w = A.adjoint() * (A * v);
    const Real next = v.dot(w).real();
    const Real wn = w.norm();
    if (wn == Real(0)) return Real(0);
    v = w / wn;
    if (it > 0 && std::abs(next - lambda) <= tol * std::abs(next)) return std::sqrt(next);
    lambda = next;
  }
  const ComplexVec<Real> w = A.adjoint() * (A * v);
  throw NumericalError("max_singular_value: power iteration did not converge", (w - lambda * v).norm());
}

template <typename Real>
Real max_singular_value(const Dictionary<Real>& dict) {
  return max_singular_value<Real>(dict.A);
}

/// 0.5 ||y - A x||^2 + tau ||x||_1 with the complex-modulus l1 norm.
template <typename Real>
Real lasso_objective(const ComplexMat<Real>& A, const ComplexVec<Real>& y, const ComplexVec<Real>& x, Real tau) {
  if (A.rows() != y.size() || A.cols() != x.size()) throw InvalidArgument("lasso_objective: shape mismatch");
  return Real(0.5) * (y - A * x).squaredNorm() + tau * x.cwiseAbs().sum();
}

template <typename Real = double>
struct IstaConfig {
  Real mu = 0;   // 1 / sigma_max(A)^2
  Real tau = 0;  // l1 weight; threshold is mu * tau
  int iterations = 100;

  Real kappa() const { return mu * tau; }
  void validate() const {
    if (!(mu > 0) || !(tau > 0)) throw InvalidArgument("IstaConfig: mu and tau must be positive");
    if (iterations < 0) throw InvalidArgument("IstaConfig: negative iteration count");
  }

  /// Config whose threshold mu*tau equals kappa.
  static IstaConfig with_threshold(Real mu, Real kappa, int iterations) { return {mu, kappa / mu, iterations}; }
};

enum class ThresholdConvention { kScaled, kStandard };

template <typename Real = double>
struct AdmmConfig {
  Real rho = 1;
  Real tau = 0;
  int iterations = 50;
  ThresholdConvention threshold_convention = ThresholdConvention::kScaled;

  // kScaled: rho * tau. kStandard: tau / rho.
  Real kappa() const { return threshold_convention == ThresholdConvention::kScaled ? rho * tau : tau / rho; }
  void validate() const {
    if (!(rho > 0) || !(tau > 0)) throw InvalidArgument("AdmmConfig: rho and tau must be positive");
    if (iterations < 0) throw InvalidArgument("AdmmConfig: negative iteration count");
  }
};

enum class TraceMode { kAll, kFinal };

/// ISTA iterates x^(1..T) (or just x^(T)).
template <typename Real>
std::vector<ComplexVec<Real>> ista_run(const ComplexMat<Real>& A, const ComplexVec<Real>& y, const IstaConfig<Real>& cfg,
                                       const ComplexVec<Real>& x0, TraceMode mode = TraceMode::kAll) {
  cfg.validate();
  if (A.rows() != y.size() || A.cols() != x0.size()) throw InvalidArgument("ista_run: shape mismatch");
  const Index n = A.cols();
  const ComplexMat<Real> W1 = ComplexMat<Real>::Identity(n, n) - cfg.mu * (A.adjoint() * A);
  const ComplexVec<Real> b = cfg.mu * (A.adjoint() * y);
  const Real kappa = cfg.kappa();

  std::vector<ComplexVec<Real>> trace;
  ComplexVec<Real> x = x0;
  for (int t = 0; t < cfg.iterations; ++t) {
    x = soft_threshold(W1 * x + b, kappa);
    if (mode == TraceMode::kAll) trace.push_back(x);
  }
  if (mode == TraceMode::kFinal) trace.push_back(x);
  return trace;
}

/// Batched ISTA from x = 0; one measurement per column of Y.
template <typename Real>
ComplexMat<Real> ista_solve(const ComplexMat<Real>& A, const ComplexMat<Real>& Y, const IstaConfig<Real>& cfg) {
  cfg.validate();
  const Index n = A.cols();
  const ComplexMat<Real> W1 = ComplexMat<Real>::Identity(n, n) - cfg.mu * (A.adjoint() * A);
  const ComplexMat<Real> B = cfg.mu * (A.adjoint() * Y);
  const Real kappa = cfg.kappa();
  ComplexMat<Real> X = ComplexMat<Real>::Zero(n, Y.cols());
  for (int t = 0; t < cfg.iterations; ++t) X = soft_threshold(W1 * X + B, kappa);
  return X;
}

template <typename Real = double>
struct AdmmIterate {
  ComplexVec<Real> x, z, v;
};

/// ADMM for the LASSO with scaled dual v. (A^H A + rho I) is Hermitian
/// Toeplitz plus a scalar, so it is Levinson-factored once.
template <typename Real>
std::vector<AdmmIterate<Real>> admm_run(const Dictionary<Real>& dict, const ComplexVec<Real>& y, const AdmmConfig<Real>& cfg,
                                        const ComplexVec<Real>& x0, const ComplexVec<Real>& z0, const ComplexVec<Real>& v0,
                                        TraceMode mode = TraceMode::kAll) {
  cfg.validate();
  const Index n = dict.cols();
  if (dict.rows() != y.size() || x0.size() != n || z0.size() != n || v0.size() != n)
    throw InvalidArgument("admm_run: shape mismatch");
  const LevinsonFactor<Real> factor(gram_generator(dict), cfg.rho);
  const ComplexVec<Real> Ahy = dict.A.adjoint() * y;
  const Real kappa = cfg.kappa();

  std::vector<AdmmIterate<Real>> trace;
  AdmmIterate<Real> it{x0, z0, v0};
  for (int t = 0; t < cfg.iterations; ++t) {
    it.x = factor.solve(Ahy + cfg.rho * (it.z - it.v));
    it.z = soft_threshold(it.x + it.v, kappa);
    it.v = it.x + it.v - it.z;
    if (mode == TraceMode::kAll) trace.push_back(it);
  }
  if (mode == TraceMode::kFinal) trace.push_back(it);
  return trace;
}

/// Batched ADMM from zero state; returns the final z per column.
template <typename Real>
ComplexMat<Real> admm_solve(const Dictionary<Real>& dict, const ComplexMat<Real>& Y, const AdmmConfig<Real>& cfg) {
  cfg.validate();
  const Index n = dict.cols();
  const LevinsonFactor<Real> factor(gram_generator(dict), cfg.rho);
  const ComplexMat<Real> Ahy = dict.A.adjoint() * Y;
  const Real kappa = cfg.kappa();
  ComplexMat<Real> Z = ComplexMat<Real>::Zero(n, Y.cols());
  ComplexMat<Real> V = Z;
  for (int t = 0; t < cfg.iterations; ++t) {
    const ComplexMat<Real> X = factor.solve(Ahy + cfg.rho * (Z - V));
    const ComplexMat<Real> S = X + V;
    Z = soft_threshold(S, kappa);
    V = S - Z;
  }
  return Z;
}

}  // namespace thadmm
