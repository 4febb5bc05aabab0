#pragma once

// Linear-array geometry on a lattice of spacing gamma*lambda: steering
// vectors, uniform frequency grids and the steering dictionary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "thadmm/types.hpp"

namespace thadmm {

/// Element positions p_m (integers, in units of gamma*lambda).
struct ArrayLayout {
  std::vector<int> positions;
  double gamma = 0.5;

  ArrayLayout() = default;
  ArrayLayout(std::vector<int> p, double g) : positions(std::move(p)), gamma(g) { validate(); }

  Index size() const { return static_cast<Index>(positions.size()); }

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("ArrayLayout: gamma must lie in (0, 1)");
    if (positions.empty()) throw InvalidArgument("ArrayLayout: no elements");
    for (std::size_t i = 0; i < positions.size(); ++i) {
      if (positions[i] < 0) throw InvalidArgument("ArrayLayout: negative position");
      if (i > 0 && positions[i] <= positions[i - 1])
        throw InvalidArgument("ArrayLayout: positions must be strictly increasing");
    }
  }

  friend bool operator==(const ArrayLayout&, const ArrayLayout&) = default;
};

/// Uniform grid f_n = -1/2 + n/N over [-1/2, 1/2).
template <typename Real = double>
struct FrequencyGrid {
  Index N = 0;
  RealVec<Real> freqs;

  FrequencyGrid() = default;
  explicit FrequencyGrid(Index n) : N(n), freqs(n) {
    if (n <= 0) throw InvalidArgument("FrequencyGrid: N must be positive");
    for (Index k = 0; k < n; ++k) freqs[k] = Real(-0.5) + Real(k) / Real(n);
  }

  // Arbitrary bins; used to exercise the uniformity checks.
  static FrequencyGrid from_values(RealVec<Real> values) {
    FrequencyGrid g;
    g.N = values.size();
    g.freqs = std::move(values);
    return g;
  }

  Real spacing() const { return N > 1 ? freqs[1] - freqs[0] : Real(1); }

  bool is_uniform(Real tol = Real(1e-12)) const {
    if (N < 2) return true;
    const Real step = spacing();
    for (Index k = 1; k < N; ++k)
      if (std::abs((freqs[k] - freqs[k - 1]) - step) > tol) return false;
    return step > 0;
  }
};

template <typename Real = double>
struct Dictionary {
  ArrayLayout layout;
  FrequencyGrid<Real> grid;
  ComplexMat<Real> A;

  Index rows() const { return A.rows(); }
  Index cols() const { return A.cols(); }
};

template <typename Real = double>
ComplexVec<Real> steering_vector(const ArrayLayout& layout, Real f) {
  ComplexVec<Real> a(layout.size());
  const Real two_pi = Real(2) * std::numbers::pi_v<Real>;
  for (Index m = 0; m < layout.size(); ++m) {
    const Real phase = two_pi * Real(layout.positions[m]) * f;
    a[m] = std::polar(Real(1), phase);
  }
  return a;
}

template <typename Real = double>
Dictionary<Real> build_dictionary(const ArrayLayout& layout, const FrequencyGrid<Real>& grid) {
  Dictionary<Real> d{layout, grid, ComplexMat<Real>(layout.size(), grid.N)};
  for (Index n = 0; n < grid.N; ++n) d.A.col(n) = steering_vector<Real>(layout, grid.freqs[n]);
  return d;
}

/// Draws M distinct lattice positions from {0, ..., full_aperture}. Both
/// endpoints are always kept so the aperture is preserved.
inline ArrayLayout subsample_positions(int full_aperture, int M, std::uint64_t seed, double gamma = 0.5) {
  if (full_aperture < 0 || M <= 0) throw InvalidArgument("subsample_positions: bad aperture or count");
  if (M > full_aperture + 1) throw InvalidArgument("subsample_positions: M exceeds full_aperture + 1");
  if (M == 1) return ArrayLayout({0}, gamma);

  std::vector<int> interior(static_cast<std::size_t>(std::max(full_aperture - 1, 0)));
  std::iota(interior.begin(), interior.end(), 1);
  std::mt19937_64 rng(seed);
  std::shuffle(interior.begin(), interior.end(), rng);

  std::vector<int> pos{0, full_aperture};
  pos.insert(pos.end(), interior.begin(), interior.begin() + (M - 2));
  std::sort(pos.begin(), pos.end());
  return ArrayLayout(std::move(pos), gamma);
}

/// asin(f / gamma) in degrees.
template <typename Real = double>
Real freq_to_angle(Real f, Real gamma) {
  const Real s = f / gamma;
  if (std::abs(s) > Real(1)) throw DomainError("freq_to_angle: |f / gamma| > 1");
  return std::asin(s) * Real(180) / std::numbers::pi_v<Real>;
}

}  // namespace thadmm
