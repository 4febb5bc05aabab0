#pragma once

// Reverse-mode gradients of a real loss with respect to the raw network
// parameters. Complex quantities carry their gradient as one complex number
// g = dL/dRe + j dL/dIm, so that dL = Re(sum conj(g) * dz).

#include <string>
#include <vector>

#include "thadmm/unfolded_nets.hpp"

namespace thadmm {

/// Same layout as the network's layers; each field holds dL/d(raw field).
struct GradientSet {
  Arch arch = Arch::kTHAdmmNet;
  std::vector<LayerParams> layers;

  static GradientSet zeros_like(const Network& net);
  RVec flatten() const;
  bool all_finite() const;
};

struct GradOptions {
  // Treat the PSD lift max(-lambda_min, 0) as a constant.
  bool stop_gradient_eta = false;
};

/// Gradient through one soft threshold S_kappa(s): returns dL/ds and adds
/// dL/dkappa to kappa_grad.
CMat soft_threshold_backward(const CMat& pre, double kappa, const CMat& out_grad, double& kappa_grad);

/// loss_grad is dL/d(output) with one column per measurement.
GradientSet backward(const Network& net, const ForwardTrace& trace, const CMat& loss_grad, const GradOptions& opts = {});

struct FiniteDiffReport {
  bool excluded = false;  // sample sits near a nondifferentiable point
  std::string exclusion_reason;
  bool passed = true;
  double worst_rel_error = 0.0;
  Index worst_layer = -1;
  std::string worst_param;
  Index worst_index = -1;
  char worst_component = ' ';  // 'r' or 'i' for complex entries, 's' for scalars
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  Index checked = 0;
};

/// Central differences on every raw real degree of freedom of the NMSE loss
/// of one sample. Relative error is |a - n| / max(|a|, |n|, abs_floor); the
/// floor sits above the roundoff of a central difference at step 1e-5, so
/// coordinates whose true derivative is zero do not fail on noise.
FiniteDiffReport finite_diff_check(const Network& net, const Dictionary<double>& dict, const CVec& y, const CVec& x,
                                   double step, double tolerance, const GradOptions& opts = {}, double abs_floor = 1e-5);

}  // namespace thadmm
