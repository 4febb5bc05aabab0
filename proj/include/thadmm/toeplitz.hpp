#pragma once

// Hermitian Toeplitz matrices stored by their first column, together with a
// Levinson-Durbin factorization for shifted solves and the PSD lift
//   W = T + max(-lambda_min(T), 0) I.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "thadmm/array_geometry.hpp"
#include "thadmm/types.hpp"

namespace thadmm {

/// Hermitian Toeplitz matrix: D[i,j] = gen[i-j] for i >= j, conj(gen[j-i]) above.
template <typename Real = double>
struct HermToeplitz {
  ComplexVec<Real> gen;

  HermToeplitz() = default;
  explicit HermToeplitz(ComplexVec<Real> g) : gen(std::move(g)) {
    if (gen.size() == 0) throw InvalidArgument("HermToeplitz: empty generator");
    if (gen[0].imag() != Real(0)) throw InvalidArgument("HermToeplitz: generator diagonal must be real");
  }

  Index size() const { return gen.size(); }

  Complex<Real> operator()(Index i, Index j) const {
    return i >= j ? gen[i - j] : std::conj(gen[j - i]);
  }
};

template <typename Real>
ComplexMat<Real> to_dense(const HermToeplitz<Real>& T) {
  const Index n = T.size();
  ComplexMat<Real> D(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) D(i, j) = T(i, j);
  return D;
}

template <typename Real>
ComplexVec<Real> matvec(const HermToeplitz<Real>& T, const ComplexVec<Real>& v) {
  const Index n = T.size();
  if (v.size() != n) throw InvalidArgument("matvec: dimension mismatch");
  ComplexVec<Real> out = ComplexVec<Real>::Zero(n);
  for (Index i = 0; i < n; ++i) {
    Complex<Real> acc(0);
    for (Index j = 0; j <= i; ++j) acc += T.gen[i - j] * v[j];
    for (Index j = i + 1; j < n; ++j) acc += std::conj(T.gen[j - i]) * v[j];
    out[i] = acc;
  }
  return out;
}

/// General Toeplitz expansion from the first column and the strictly-upper
/// first-row entries row_tail[d-1] = D[0, d].
template <typename Real>
ComplexMat<Real> toeplitz_dense(const ComplexVec<Real>& col, const ComplexVec<Real>& row_tail) {
  const Index n = col.size();
  if (row_tail.size() != n - 1) throw InvalidArgument("toeplitz_dense: row/column length mismatch");
  ComplexMat<Real> D(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) D(i, j) = i >= j ? col[i - j] : row_tail[j - i - 1];
  return D;
}

/// Sums of G along each diagonal: lower[d] = sum_{i-j=d} G(i,j) for d >= 0,
/// upper[d-1] = sum_{j-i=d} G(i,j) for d >= 1. This is the adjoint of the
/// Toeplitz expansion.
template <typename Real>
struct DiagonalSums {
  ComplexVec<Real> lower;
  ComplexVec<Real> upper;
};

template <typename Real>
DiagonalSums<Real> diagonal_sums(const ComplexMat<Real>& G) {
  const Index n = G.rows();
  DiagonalSums<Real> s{ComplexVec<Real>::Zero(n), ComplexVec<Real>::Zero(std::max<Index>(n - 1, 0))};
  for (Index j = 0; j < n; ++j) {
    for (Index i = j; i < n; ++i) s.lower[i - j] += G(i, j);
    for (Index i = 0; i < j; ++i) s.upper[j - i - 1] += G(i, j);
  }
  return s;
}

/// Adjoint of the Hermitian expansion: maps a dense gradient G (convention
/// dL/dRe + j dL/dIm per entry) onto the generator. Entry 0 is real.
template <typename Real>
ComplexVec<Real> hermitian_generator_adjoint(const ComplexMat<Real>& G) {
  const DiagonalSums<Real> s = diagonal_sums(G);
  ComplexVec<Real> g(s.lower.size());
  g[0] = Complex<Real>(s.lower[0].real(), Real(0));
  for (Index d = 1; d < g.size(); ++d) g[d] = s.lower[d] + std::conj(s.upper[d - 1]);
  return g;
}

/// Generator of A^H A for a dictionary over a uniform grid.
template <typename Real>
HermToeplitz<Real> gram_generator(const Dictionary<Real>& dict) {
  if (!dict.grid.is_uniform()) throw InvalidArgument("gram_generator: frequency grid is not uniform");
  const Index n = dict.grid.N;
  const Real step = dict.grid.spacing();
  const Real two_pi = Real(2) * std::numbers::pi_v<Real>;
  ComplexVec<Real> gen = ComplexVec<Real>::Zero(n);
  for (Index d = 0; d < n; ++d) {
    Complex<Real> acc(0);
    for (int p : dict.layout.positions) acc += std::polar(Real(1), -two_pi * Real(p) * Real(d) * step);
    gen[d] = acc;
  }
  gen[0] = Complex<Real>(Real(dict.layout.size()), Real(0));
  return HermToeplitz<Real>(std::move(gen));
}

/// Levinson-Durbin factorization of T + shift*I as U D^{-1} U^H, where column
/// k of the unit upper-triangular U is the order-k backward predictor.
/// Building costs O(N^2); each solve is two triangular products.
template <typename Real = double>
class LevinsonFactor {
 public:
  static constexpr Real kBreakdown = Real(1) - Real(1e-12);

  LevinsonFactor(const HermToeplitz<Real>& T, Real shift) : n_(T.size()), U_(ComplexMat<Real>::Zero(n_, n_)), e_(n_), reflection_(std::max<Index>(n_ - 1, 0)) {
    const Real e0 = T.gen[0].real() + shift;
    if (!(e0 > Real(0))) throw SingularityError("levinson: non-positive leading entry (order 0)", 0);
    e_[0] = e0;
    U_(0, 0) = Complex<Real>(1);

    ComplexVec<Real> a = ComplexVec<Real>::Zero(n_);
    ComplexVec<Real> next(n_);
    a[0] = Complex<Real>(1);
    for (Index k = 0; k + 1 < n_; ++k) {
      Complex<Real> delta(0);
      for (Index i = 0; i <= k; ++i) delta += T.gen[k + 1 - i] * a[i];
      const Complex<Real> gamma = -delta / e_[k];
      reflection_[k] = gamma;
      if (std::abs(gamma) >= kBreakdown) {
        std::ostringstream os;
        os << "levinson: breakdown at order " << (k + 1) << " (|reflection| = " << std::abs(gamma) << ")";
        throw SingularityError(os.str(), k + 1);
      }
      next[0] = a[0];
      for (Index i = 1; i <= k; ++i) next[i] = a[i] + gamma * std::conj(a[k + 1 - i]);
      next[k + 1] = gamma * std::conj(a[0]);
      a.head(k + 2) = next.head(k + 2);
      e_[k + 1] = e_[k] * (Real(1) - std::norm(gamma));
      for (Index i = 0; i <= k + 1; ++i) U_(i, k + 1) = std::conj(a[k + 1 - i]);
    }
  }

  Index size() const { return n_; }
  const ComplexVec<Real>& reflection_coefficients() const { return reflection_; }
  const RealVec<Real>& prediction_errors() const { return e_; }

  template <typename Derived>
  ComplexMat<Real> solve(const Eigen::MatrixBase<Derived>& rhs) const {
    if (rhs.rows() != n_) throw InvalidArgument("levinson: dimension mismatch");
    ComplexMat<Real> y = rhs;
    y = U_.template triangularView<Eigen::Upper>().adjoint() * y;
    for (Index k = 0; k < n_; ++k) y.row(k) /= e_[k];
    y = U_.template triangularView<Eigen::Upper>() * y;
    return y;
  }

 private:
  Index n_;
  ComplexMat<Real> U_;
  RealVec<Real> e_;
  ComplexVec<Real> reflection_;
};

/// Solves (T + shift*I) x = b.
template <typename Real>
ComplexVec<Real> levinson_solve(const HermToeplitz<Real>& T, Real shift, const ComplexVec<Real>& b) {
  if (b.size() != T.size()) throw InvalidArgument("levinson_solve: dimension mismatch");
  return LevinsonFactor<Real>(T, shift).solve(b);
}

template <typename Real = double>
struct PsdLiftResult {
  Real lifted_shift = 0;  // max(-lambda_min, 0)
  Real lambda_min = 0;
  ComplexVec<Real> eigvec_min;
};

/// Smallest eigenvalue through a dense Hermitian eigendecomposition.
template <typename Real>
PsdLiftResult<Real> min_eigenvalue(const HermToeplitz<Real>& T) {
  const ComplexMat<Real> D = to_dense(T);
  Eigen::SelfAdjointEigenSolver<ComplexMat<Real>> es(D);
  if (es.info() != Eigen::Success) {
    throw NumericalError("min_eigenvalue: eigensolver did not converge", std::numeric_limits<double>::quiet_NaN());
  }
  PsdLiftResult<Real> r;
  r.lambda_min = es.eigenvalues()[0];
  r.eigvec_min = es.eigenvectors().col(0);
  r.eigvec_min /= r.eigvec_min.norm();
  r.lifted_shift = std::max(-r.lambda_min, Real(0));
  return r;
}

/// T together with the scalar shift that makes T + shift*I PSD.
template <typename Real = double>
struct LiftedToeplitz {
  HermToeplitz<Real> base;
  PsdLiftResult<Real> info;

  Real shift() const { return info.lifted_shift; }
  HermToeplitz<Real> as_toeplitz() const {
    HermToeplitz<Real> out = base;
    out.gen[0] += shift();
    return out;
  }
  ComplexMat<Real> dense() const {
    ComplexMat<Real> D = to_dense(base);
    D.diagonal().array() += shift();
    return D;
  }
};

template <typename Real>
LiftedToeplitz<Real> psd_lift(const HermToeplitz<Real>& T) {
  return LiftedToeplitz<Real>{T, min_eigenvalue(T)};
}

}  // namespace thadmm
