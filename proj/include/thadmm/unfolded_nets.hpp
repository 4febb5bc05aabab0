#pragma once

// Deep-unfolded ISTA/ADMM networks. Every forward pass is batched: one
// measurement per column of Y, one estimate per column of the output.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/LU>

#include "thadmm/array_geometry.hpp"
#include "thadmm/toeplitz.hpp"
#include "thadmm/types.hpp"

namespace thadmm {

enum class Arch { kLista, kTLista, kTHLista, kAdmmNet, kTHAdmmNet };

std::string_view arch_name(Arch arch);
Arch parse_arch(std::string_view name);

inline bool is_lista_family(Arch a) { return a == Arch::kLista || a == Arch::kTLista || a == Arch::kTHLista; }

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double inverse_softplus(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Raw (unconstrained) parameters of one layer. Only the fields used by the
/// architecture are populated; the rest stay empty.
///   LISTA      w (N x N), w2 (N x M), beta_raw
///   TLISTA     gen (first column), gen_row (first-row tail), w2, beta_raw
///   THLISTA    gen (Hermitian generator), w2, beta_raw
///   ADMM-Net   w (N x N), rho_raw, beta_raw
///   THADMM-Net gen (Hermitian generator), rho_raw, beta_raw
struct LayerParams {
  CMat w;
  CVec gen;
  CVec gen_row;
  CMat w2;
  double rho_raw = 0.0;
  double beta_raw = 0.0;

  double beta() const { return softplus(beta_raw); }
  double rho() const { return softplus(rho_raw); }
};

bool operator==(const LayerParams& a, const LayerParams& b);

/// Visits the fields an architecture uses, in checkpoint order.
/// f(name, field) receives CMat&, CVec& or double&.
template <typename Params, typename F>
void for_each_param(Arch arch, Params& p, F&& f) {
  switch (arch) {
    case Arch::kLista:
      f(std::string_view("w"), p.w);
      f(std::string_view("w2"), p.w2);
      break;
    case Arch::kTLista:
      f(std::string_view("gen"), p.gen);
      f(std::string_view("gen_row"), p.gen_row);
      f(std::string_view("w2"), p.w2);
      break;
    case Arch::kTHLista:
      f(std::string_view("gen"), p.gen);
      f(std::string_view("w2"), p.w2);
      break;
    case Arch::kAdmmNet:
      f(std::string_view("w"), p.w);
      f(std::string_view("rho_raw"), p.rho_raw);
      break;
    case Arch::kTHAdmmNet:
      f(std::string_view("gen"), p.gen);
      f(std::string_view("rho_raw"), p.rho_raw);
      break;
  }
  f(std::string_view("beta_raw"), p.beta_raw);
}

/// A generator whose imaginary diagonal part is not a degree of freedom.
inline bool has_hermitian_generator(Arch a) { return a == Arch::kTHLista || a == Arch::kTHAdmmNet; }

struct Network {
  Arch arch = Arch::kTHAdmmNet;
  Index M = 0;
  Index N = 0;
  std::vector<LayerParams> layers;

  Index depth() const { return static_cast<Index>(layers.size()); }
};

bool operator==(const Network& a, const Network& b);

/// Per-layer count under the reporting convention (complex entries count once).
std::int64_t param_count(Arch arch, Index T, Index M, Index N);
std::int64_t param_count(const Network& net);

/// Number of raw real degrees of freedom (what the optimizer updates).
Index real_dof_count(const Network& net);

struct InitValues {
  double beta = 0.1;
  double rho = 1.0;
};

/// Layers start at their iterative-algorithm values: W1 = I - mu A^H A and
/// W2 = mu A^H for the ISTA family, W = A^H A for the ADMM family.
Network init_network(Arch arch, Index T, const Dictionary<double>& dict, InitValues init = {});

/// Effective dense W1 for a LISTA-family layer.
CMat lista_w1(Arch arch, const LayerParams& p);

/// Activations of one layer, kept for the backward pass.
struct LayerCache {
  CMat x_in;  // ISTA family: x^(t)
  CMat z_in;  // ADMM family: z^(t), v^(t), x^(t+1)
  CMat v_in;
  CMat x;
  CMat pre;  // argument of the soft threshold
  double beta = 0.0;

  CMat w1;  // ISTA family: effective W1

  // ADMM family: eta = lift + rho, and the factorization of W + eta I.
  double eta = 0.0;
  PsdLiftResult<double> lift;
  std::optional<LevinsonFactor<double>> levinson;
  std::optional<Eigen::PartialPivLU<CMat>> lu;
};

struct ForwardTrace {
  Arch arch = Arch::kTHAdmmNet;
  CMat Y;
  CMat AhY;
  std::vector<LayerCache> layers;
  CMat output;
};

/// Estimation condition guard for (W + rho I) in ADMM-Net.
inline constexpr double kMinRcond = 1e-13;

ForwardTrace forward_lista(const Network& net, const CMat& Y, const Dictionary<double>& dict);
ForwardTrace forward_thadmm(const Network& net, const CMat& Y, const Dictionary<double>& dict);
ForwardTrace forward_admmnet(const Network& net, const CMat& Y, const Dictionary<double>& dict);

/// Dispatches on net.arch.
ForwardTrace forward(const Network& net, const CMat& Y, const Dictionary<double>& dict);

/// Single-measurement convenience wrapper.
CVec infer(const Network& net, const CVec& y, const Dictionary<double>& dict);

/// Flattens raw parameters into real values (re, im interleaved per complex
/// entry, column-major, fields in for_each_param order) and back.
RVec flatten(const Network& net);
void unflatten(Network& net, const RVec& flat);

}  // namespace thadmm
