#include "thadmm/unfolded_nets.hpp"

#include <sstream>

#include "thadmm/classic_solvers.hpp"

namespace thadmm {

namespace {

bool same(const CMat& a, const CMat& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}
bool same(const CVec& a, const CVec& b) { return a.size() == b.size() && (a.size() == 0 || a == b); }

void check_input(const Network& net, const CMat& Y, const Dictionary<double>& dict) {
  if (Y.rows() != net.M || dict.rows() != net.M || dict.cols() != net.N)
    throw InvalidArgument("forward: shape mismatch between network, dictionary and measurements");
}

}  // namespace

std::string_view arch_name(Arch arch) {
  switch (arch) {
    case Arch::kLista: return "LISTA";
    case Arch::kTLista: return "TLISTA";
    case Arch::kTHLista: return "THLISTA";
    case Arch::kAdmmNet: return "ADMMNet";
    case Arch::kTHAdmmNet: return "THADMMNet";
  }
  return "?";
}

Arch parse_arch(std::string_view name) {
  for (Arch a : {Arch::kLista, Arch::kTLista, Arch::kTHLista, Arch::kAdmmNet, Arch::kTHAdmmNet})
    if (arch_name(a) == name) return a;
  throw InvalidArgument("unknown architecture '" + std::string(name) + "'");
}

bool operator==(const LayerParams& a, const LayerParams& b) {
  return same(a.w, b.w) && same(a.gen, b.gen) && same(a.gen_row, b.gen_row) && same(a.w2, b.w2) &&
         a.rho_raw == b.rho_raw && a.beta_raw == b.beta_raw;
}

bool operator==(const Network& a, const Network& b) {
  return a.arch == b.arch && a.M == b.M && a.N == b.N && a.layers == b.layers;
}

std::int64_t param_count(Arch arch, Index T, Index M, Index N) {
  std::int64_t per_layer = 0;
  switch (arch) {
    case Arch::kLista: per_layer = N * N + M * N + 1; break;
    case Arch::kTLista: per_layer = 2 * N + M * N; break;
    case Arch::kTHLista: per_layer = N + M * N + 1; break;
    case Arch::kAdmmNet: per_layer = N * N + 2; break;
    case Arch::kTHAdmmNet: per_layer = N + 2; break;
  }
  return static_cast<std::int64_t>(T) * per_layer;
}

std::int64_t param_count(const Network& net) { return param_count(net.arch, net.depth(), net.M, net.N); }

Network init_network(Arch arch, Index T, const Dictionary<double>& dict, InitValues init) {
  if (T < 1) throw InvalidArgument("init_network: depth must be at least 1");
  const Index M = dict.rows();
  const Index N = dict.cols();
  const HermToeplitz<double> gram = gram_generator(dict);

  LayerParams layer;
  layer.beta_raw = inverse_softplus(init.beta);
  if (is_lista_family(arch)) {
    const double sigma = max_singular_value(dict);
    const double mu = 1.0 / (sigma * sigma);
    CVec col = -mu * gram.gen;
    col[0] = cd(1.0 - mu * gram.gen[0].real(), 0.0);
    layer.w2 = mu * dict.A.adjoint();
    if (arch == Arch::kLista) {
      layer.w = CMat::Identity(N, N) - mu * (dict.A.adjoint() * dict.A);
    } else {
      layer.gen = col;
      if (arch == Arch::kTLista) layer.gen_row = col.tail(N - 1).conjugate();
    }
  } else {
    layer.rho_raw = inverse_softplus(init.rho);
    if (arch == Arch::kAdmmNet)
      layer.w = dict.A.adjoint() * dict.A;
    else
      layer.gen = gram.gen;
  }

  Network net{arch, M, N, std::vector<LayerParams>(static_cast<std::size_t>(T), layer)};
  return net;
}

CMat lista_w1(Arch arch, const LayerParams& p) {
  switch (arch) {
    case Arch::kLista: return p.w;
    case Arch::kTLista: return toeplitz_dense(p.gen, p.gen_row);
    case Arch::kTHLista: return to_dense(HermToeplitz<double>(p.gen));
    default: throw InvalidArgument("lista_w1: not an ISTA-family architecture");
  }
}

ForwardTrace forward_lista(const Network& net, const CMat& Y, const Dictionary<double>& dict) {
  if (!is_lista_family(net.arch)) throw InvalidArgument("forward_lista: wrong architecture");
  check_input(net, Y, dict);
  ForwardTrace tr;
  tr.arch = net.arch;
  tr.Y = Y;
  tr.layers.resize(net.layers.size());

  CMat X = CMat::Zero(net.N, Y.cols());
  for (std::size_t t = 0; t < net.layers.size(); ++t) {
    const LayerParams& p = net.layers[t];
    LayerCache& c = tr.layers[t];
    c.w1 = lista_w1(net.arch, p);
    c.beta = p.beta();
    c.pre = p.w2 * Y;
    if (t > 0) c.pre.noalias() += c.w1 * X;
    c.x_in = std::move(X);
    X = soft_threshold(c.pre, c.beta);
  }
  tr.output = std::move(X);
  return tr;
}

namespace {

// Shared ADMM-family recursion. solve(c, R) applies (W + eta I)^{-1}.
template <typename Prepare>
ForwardTrace forward_admm_family(const Network& net, const CMat& Y, const Dictionary<double>& dict, Prepare&& prepare) {
  check_input(net, Y, dict);
  ForwardTrace tr;
  tr.arch = net.arch;
  tr.Y = Y;
  tr.AhY = dict.A.adjoint() * Y;
  tr.layers.resize(net.layers.size());

  CMat Z = CMat::Zero(net.N, Y.cols());
  CMat V = CMat::Zero(net.N, Y.cols());
  for (std::size_t t = 0; t < net.layers.size(); ++t) {
    const LayerParams& p = net.layers[t];
    LayerCache& c = tr.layers[t];
    prepare(p, c);
    c.beta = p.beta();
    const CMat R = tr.AhY + c.eta * (Z - V);
    c.x = c.levinson ? c.levinson->solve(R) : c.lu->solve(R);
    c.pre = c.x + V;
    c.z_in = std::move(Z);
    c.v_in = std::move(V);
    Z = soft_threshold(c.pre, c.beta);
    V = c.pre - Z;
  }
  tr.output = std::move(Z);
  return tr;
}

}  // namespace

ForwardTrace forward_thadmm(const Network& net, const CMat& Y, const Dictionary<double>& dict) {
  if (net.arch != Arch::kTHAdmmNet) throw InvalidArgument("forward_thadmm: wrong architecture");
  return forward_admm_family(net, Y, dict, [](const LayerParams& p, LayerCache& c) {
    const HermToeplitz<double> T(p.gen);
    c.lift = min_eigenvalue(T);
    c.eta = c.lift.lifted_shift + p.rho();
    // W_TH + eta I has smallest eigenvalue lambda_min + eta >= rho > 0.
    if (!(c.lift.lambda_min + c.eta > 0.0)) {
      std::ostringstream os;
      os << "forward_thadmm: layer operator not positive definite (lambda_min + eta = " << c.lift.lambda_min + c.eta << ")";
      throw SingularityError(os.str(), 0);
    }
    c.levinson.emplace(T, c.eta);
  });
}

ForwardTrace forward_admmnet(const Network& net, const CMat& Y, const Dictionary<double>& dict) {
  if (net.arch != Arch::kAdmmNet) throw InvalidArgument("forward_admmnet: wrong architecture");
  return forward_admm_family(net, Y, dict, [](const LayerParams& p, LayerCache& c) {
    c.eta = p.rho();
    CMat B = p.w;
    B.diagonal().array() += c.eta;
    c.lu.emplace(B);
    const double rc = c.lu->rcond();
    if (!(rc >= kMinRcond)) {
      std::ostringstream os;
      os << "forward_admmnet: W + rho I is numerically singular (rcond estimate " << rc << ")";
      throw ConditioningError(os.str(), rc);
    }
  });
}

ForwardTrace forward(const Network& net, const CMat& Y, const Dictionary<double>& dict) {
  switch (net.arch) {
    case Arch::kAdmmNet: return forward_admmnet(net, Y, dict);
    case Arch::kTHAdmmNet: return forward_thadmm(net, Y, dict);
    default: return forward_lista(net, Y, dict);
  }
}

CVec infer(const Network& net, const CVec& y, const Dictionary<double>& dict) {
  return forward(net, CMat(y), dict).output.col(0);
}

namespace {

struct Flattener {
  std::vector<double>& out;
  void operator()(std::string_view, const CMat& m) const {
    for (Index i = 0; i < m.size(); ++i) {
      out.push_back(m.data()[i].real());
      out.push_back(m.data()[i].imag());
    }
  }
  void operator()(std::string_view, const CVec& v) const {
    for (Index i = 0; i < v.size(); ++i) {
      out.push_back(v[i].real());
      out.push_back(v[i].imag());
    }
  }
  void operator()(std::string_view, const double& d) const { out.push_back(d); }
};

struct Unflattener {
  const RVec& in;
  Index& pos;
  template <typename M>
  void fill(M& m) const {
    for (Index i = 0; i < m.size(); ++i) {
      m.data()[i] = cd(in[pos], in[pos + 1]);
      pos += 2;
    }
  }
  void operator()(std::string_view, CMat& m) const { fill(m); }
  void operator()(std::string_view, CVec& v) const { fill(v); }
  void operator()(std::string_view, double& d) const { d = in[pos++]; }
};

}  // namespace

RVec flatten(const Network& net) {
  std::vector<double> out;
  for (const LayerParams& p : net.layers) for_each_param(net.arch, p, Flattener{out});
  return Eigen::Map<RVec>(out.data(), static_cast<Index>(out.size()));
}

void unflatten(Network& net, const RVec& flat) {
  if (flat.size() != real_dof_count(net)) throw InvalidArgument("unflatten: size mismatch");
  Index pos = 0;
  for (LayerParams& p : net.layers) for_each_param(net.arch, p, Unflattener{flat, pos});
}

Index real_dof_count(const Network& net) {
  Index n = 0;
  for (const LayerParams& p : net.layers) {
    for_each_param(net.arch, p, [&n](std::string_view, const auto& field) {
      if constexpr (std::is_same_v<std::decay_t<decltype(field)>, double>)
        n += 1;
      else
        n += 2 * field.size();
    });
  }
  return n;
}

}  // namespace thadmm
