#include "thadmm/grad_engine.hpp"

#include <cmath>
#include <sstream>

namespace thadmm {

namespace {

struct Zeroer {
  void operator()(std::string_view, CMat& m) const { m.setZero(); }
  void operator()(std::string_view, CVec& v) const { v.setZero(); }
  void operator()(std::string_view, double& d) const { d = 0.0; }
};

double nmse(const CVec& x_hat, const CVec& x) { return (x_hat - x).squaredNorm() / x.squaredNorm(); }

// Gradient of the ISTA-family recursion; fills g.layers from the last layer down.
void backward_lista(const Network& net, const ForwardTrace& tr, const CMat& loss_grad, GradientSet& g) {
  CMat gX = loss_grad;
  for (Index t = net.depth() - 1; t >= 0; --t) {
    const LayerParams& p = net.layers[t];
    const LayerCache& c = tr.layers[t];
    LayerParams& out = g.layers[t];

    double g_beta = 0.0;
    const CMat gC = soft_threshold_backward(c.pre, c.beta, gX, g_beta);
    out.beta_raw = g_beta * sigmoid(p.beta_raw);
    out.w2 = gC * tr.Y.adjoint();

    // x^(0) = 0, so the first layer's W1 receives no gradient.
    CMat gW1 = CMat::Zero(net.N, net.N);
    if (t > 0) {
      gW1.noalias() = gC * c.x_in.adjoint();
      gX = c.w1.adjoint() * gC;
    }
    switch (net.arch) {
      case Arch::kLista: out.w = gW1; break;
      case Arch::kTLista: {
        DiagonalSums<double> s = diagonal_sums(gW1);
        out.gen = std::move(s.lower);
        out.gen_row = std::move(s.upper);
        break;
      }
      default: out.gen = hermitian_generator_adjoint(gW1); break;
    }
  }
}

// Gradient of the ADMM-family recursion. Per layer:
//   r = A^H y + eta (z - v),  x = B^{-1} r,  s = x + v,  z' = S(s),  v' = s - z'.
void backward_admm(const Network& net, const ForwardTrace& tr, const CMat& loss_grad, const GradOptions& opts, GradientSet& g) {
  CMat gZ = loss_grad;
  CMat gV = CMat::Zero(loss_grad.rows(), loss_grad.cols());
  for (Index t = net.depth() - 1; t >= 0; --t) {
    const LayerParams& p = net.layers[t];
    const LayerCache& c = tr.layers[t];
    LayerParams& out = g.layers[t];

    double g_beta = 0.0;
    const CMat gS = gV + soft_threshold_backward(c.pre, c.beta, gZ - gV, g_beta);
    out.beta_raw = g_beta * sigmoid(p.beta_raw);

    // B is Hermitian for THADMM-Net; ADMM-Net solves with B^H.
    const CMat gR = c.levinson ? c.levinson->solve(gS) : CMat(c.lu->adjoint().solve(gS));
    const CMat gB = -(gR * c.x.adjoint());
    const CMat diff = c.z_in - c.v_in;
    const double g_eta = gB.diagonal().real().sum() + (gR.conjugate().cwiseProduct(diff)).sum().real();

    if (net.arch == Arch::kTHAdmmNet) {
      out.gen = hermitian_generator_adjoint(gB);
      // eta = max(-lambda_min, 0) + rho; the zero branch is taken at lambda_min = 0.
      if (!opts.stop_gradient_eta && -c.lift.lambda_min > 0.0) {
        const CMat vvh = c.lift.eigvec_min * c.lift.eigvec_min.adjoint();
        out.gen -= g_eta * hermitian_generator_adjoint(vvh);
      }
    } else {
      out.w = gB;
    }
    out.rho_raw = g_eta * sigmoid(p.rho_raw);

    gZ = c.eta * gR;
    gV = gS - c.eta * gR;
  }
}

}  // namespace

GradientSet GradientSet::zeros_like(const Network& net) {
  GradientSet g{net.arch, net.layers};
  for (LayerParams& p : g.layers) for_each_param(net.arch, p, Zeroer{});
  return g;
}

RVec GradientSet::flatten() const {
  Network shape{arch, 0, 0, layers};
  return thadmm::flatten(shape);
}

bool GradientSet::all_finite() const { return flatten().allFinite(); }

CMat soft_threshold_backward(const CMat& pre, double kappa, const CMat& out_grad, double& kappa_grad) {
  CMat gin(pre.rows(), pre.cols());
  double gk = 0.0;
  for (Index i = 0; i < pre.size(); ++i) {
    const cd s = pre.data()[i];
    const double mag = std::abs(s);
    if (mag <= kappa) {
      gin.data()[i] = cd(0.0);
      continue;
    }
    // S(s) = s (1 - kappa/|s|); u = s/|s|.
    const cd g = out_grad.data()[i];
    const cd u = s / mag;
    const double r = kappa / mag;
    const double c = (std::conj(g) * u).real();
    gin.data()[i] = (1.0 - r) * g + (r * c) * u;
    gk -= c;
  }
  kappa_grad += gk;
  return gin;
}

GradientSet backward(const Network& net, const ForwardTrace& trace, const CMat& loss_grad, const GradOptions& opts) {
  if (trace.arch != net.arch || static_cast<Index>(trace.layers.size()) != net.depth())
    throw InvalidArgument("backward: activations do not belong to this network");
  if (loss_grad.rows() != net.N || loss_grad.cols() != trace.output.cols())
    throw InvalidArgument("backward: loss gradient shape mismatch");

  GradientSet g = GradientSet::zeros_like(net);
  if (is_lista_family(net.arch))
    backward_lista(net, trace, loss_grad, g);
  else
    backward_admm(net, trace, loss_grad, opts, g);
  return g;
}

namespace {

struct Coordinate {
  Index layer;
  std::string name;
  Index entry;
  char component;
  bool skip;
};

std::vector<Coordinate> coordinates(const Network& net) {
  std::vector<Coordinate> out;
  const bool herm = has_hermitian_generator(net.arch);
  for (Index t = 0; t < net.depth(); ++t) {
    for_each_param(net.arch, net.layers[t], [&](std::string_view name, const auto& field) {
      if constexpr (std::is_same_v<std::decay_t<decltype(field)>, double>) {
        out.push_back({t, std::string(name), 0, 's', false});
      } else {
        for (Index i = 0; i < field.size(); ++i) {
          out.push_back({t, std::string(name), i, 'r', false});
          // The imaginary part of a Hermitian diagonal is not a parameter.
          out.push_back({t, std::string(name), i, 'i', herm && name == "gen" && i == 0});
        }
      }
    });
  }
  return out;
}

}  // namespace

FiniteDiffReport finite_diff_check(const Network& net, const Dictionary<double>& dict, const CVec& y, const CVec& x,
                                   double step, double tolerance, const GradOptions& opts, double abs_floor) {
  if (!(step > 0.0)) throw InvalidArgument("finite_diff_check: step must be positive");
  FiniteDiffReport rep;
  if (net.depth() == 0) return rep;

  const ForwardTrace tr = forward(net, CMat(y), dict);
  const double margin = 10.0 * step;
  for (Index t = 0; t < net.depth(); ++t) {
    const LayerCache& c = tr.layers[t];
    const double closest = ((c.pre.array().abs() - c.beta).abs()).minCoeff();
    if (closest < margin) {
      std::ostringstream os;
      os << "soft-threshold input within " << closest << " of the dead-zone boundary at layer " << t;
      rep.excluded = true;
      rep.exclusion_reason = os.str();
      return rep;
    }
    if (net.arch == Arch::kTHAdmmNet && !opts.stop_gradient_eta && std::abs(c.lift.lambda_min) < margin) {
      rep.excluded = true;
      rep.exclusion_reason = "lambda_min within 10*step of zero at layer " + std::to_string(t);
      return rep;
    }
  }

  const CMat loss_grad = 2.0 * (tr.output.col(0) - x) / x.squaredNorm();
  const RVec analytic = backward(net, tr, loss_grad, opts).flatten();

  const RVec base = flatten(net);
  const std::vector<Coordinate> coords = coordinates(net);
  Network probe = net;
  for (Index k = 0; k < base.size(); ++k) {
    const Coordinate& co = coords[static_cast<std::size_t>(k)];
    if (co.skip) continue;
    RVec pert = base;
    pert[k] = base[k] + step;
    unflatten(probe, pert);
    const double lp = nmse(infer(probe, y, dict), x);
    pert[k] = base[k] - step;
    unflatten(probe, pert);
    const double lm = nmse(infer(probe, y, dict), x);
    const double numeric = (lp - lm) / (2.0 * step);

    const double a = analytic[k];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), abs_floor});
    ++rep.checked;
    if (rel > rep.worst_rel_error) {
      rep.worst_rel_error = rel;
      rep.worst_layer = co.layer;
      rep.worst_param = co.name;
      rep.worst_index = co.entry;
      rep.worst_component = co.component;
      rep.worst_analytic = a;
      rep.worst_numeric = numeric;
    }
  }
  rep.passed = rep.worst_rel_error <= tolerance;
  return rep;
}

}  // namespace thadmm
