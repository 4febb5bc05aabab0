#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace thadmm {

template <typename Real>
using Complex = std::complex<Real>;

template <typename Real>
using ComplexVec = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;

template <typename Real>
using ComplexMat = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Real>
using RealVec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

using cd = std::complex<double>;
using CVec = ComplexVec<double>;
using CMat = ComplexMat<double>;
using RVec = RealVec<double>;

using Index = Eigen::Index;

// Error taxonomy. Everything derives from std::runtime_error except the
// argument/domain errors, which reuse the standard logic-error types.
using InvalidArgument = std::invalid_argument;
using DomainError = std::domain_error;

class SingularityError : public std::runtime_error {
 public:
  SingularityError(const std::string& what, Index order)
      : std::runtime_error(what), order_(order) {}
  Index order() const noexcept { return order_; }

 private:
  Index order_;
};

class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class ConditioningError : public std::runtime_error {
 public:
  ConditioningError(const std::string& what, double rcond)
      : std::runtime_error(what), rcond_(rcond) {}
  double rcond() const noexcept { return rcond_; }

 private:
  double rcond_;
};

class FeasibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace thadmm
