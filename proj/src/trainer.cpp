#include "thadmm/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

namespace thadmm {

double nmse_loss(const CVec& x_hat, const CVec& x) {
  const double energy = x.squaredNorm();
  if (!(energy > 0.0)) throw InvalidArgument("nmse_loss: ground truth is zero");
  return (x_hat - x).squaredNorm() / energy;
}

double batch_nmse(const CMat& X_hat, const CMat& X) {
  double sum = 0.0;
  for (Index b = 0; b < X.cols(); ++b) sum += nmse_loss(X_hat.col(b), X.col(b));
  return sum / static_cast<double>(X.cols());
}

CMat batch_nmse_grad(const CMat& X_hat, const CMat& X) {
  CMat g = X_hat - X;
  const double scale = 2.0 / static_cast<double>(X.cols());
  for (Index b = 0; b < X.cols(); ++b) g.col(b) *= scale / X.col(b).squaredNorm();
  return g;
}

double to_db(double value) {
  if (!(value > 0.0)) return -100.0;
  return std::max(10.0 * std::log10(value), -100.0);
}

void TrainConfig::validate() const {
  if (epochs < 0 || batch_size <= 0 || chunk <= 0 || learning_rate < 0.0)
    throw InvalidArgument("TrainConfig: epochs, batch size and chunk must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.eps > 0.0))
    throw InvalidArgument("TrainConfig: invalid Adam constants");
}

TrainState TrainState::fresh(Network net, std::uint64_t seed) {
  TrainState s;
  const Index n = real_dof_count(net);
  s.net = std::move(net);
  s.m = RVec::Zero(n);
  s.v = RVec::Zero(n);
  s.seed = seed;
  return s;
}

void adam_step(TrainState& state, const RVec& grad, double learning_rate, const AdamConfig& adam) {
  if (grad.size() != state.m.size()) throw InvalidArgument("adam_step: gradient shape mismatch");
  if (!grad.allFinite()) {
    Index bad = 0;
    for (Index i = 0; i < grad.size(); ++i)
      if (!std::isfinite(grad[i])) {
        bad = i;
        break;
      }
    std::ostringstream os;
    os << "adam_step: non-finite gradient at flat index " << bad << " (step " << state.step << ")";
    throw NonFiniteError(os.str());
  }
  ++state.step;
  state.m = adam.beta1 * state.m + (1.0 - adam.beta1) * grad;
  state.v = adam.beta2 * state.v + (1.0 - adam.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(state.step));
  RVec params = flatten(state.net);
  params.array() -= learning_rate * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + adam.eps);
  unflatten(state.net, params);
}

void adam_step(TrainState& state, const GradientSet& grads, double learning_rate, const AdamConfig& adam) {
  if (grads.arch != state.net.arch) throw InvalidArgument("adam_step: gradient architecture mismatch");
  adam_step(state, grads.flatten(), learning_rate, adam);
}

double batch_gradient(const Network& net, const Dictionary<double>& dict, const CMat& Y, const CMat& X, Index chunk,
                      const GradOptions& opts, RVec& grad) {
  grad = RVec::Zero(real_dof_count(net));
  const Index total = Y.cols();
  double loss_sum = 0.0;
  for (Index start = 0; start < total; start += chunk) {
    const Index cols = std::min(chunk, total - start);
    const CMat Yc = Y.middleCols(start, cols);
    const CMat Xc = X.middleCols(start, cols);
    const ForwardTrace tr = forward(net, Yc, dict);
    loss_sum += batch_nmse(tr.output, Xc) * static_cast<double>(cols);
    // Scale so the chunk gradients sum to the gradient of the batch mean.
    CMat g = batch_nmse_grad(tr.output, Xc) * (static_cast<double>(cols) / static_cast<double>(total));
    grad += backward(net, tr, g, opts).flatten();
  }
  return loss_sum / static_cast<double>(total);
}

CMat predict(const Network& net, const Dictionary<double>& dict, const CMat& Y, Index chunk) {
  CMat out(net.N, Y.cols());
  for (Index start = 0; start < Y.cols(); start += chunk) {
    const Index cols = std::min(chunk, Y.cols() - start);
    out.middleCols(start, cols) = forward(net, Y.middleCols(start, cols), dict).output;
  }
  return out;
}

double evaluate_nmse(const Network& net, const Dictionary<double>& dict, const CMat& Y, const CMat& X, Index chunk) {
  return batch_nmse(predict(net, dict, Y, chunk), X);
}

namespace {

std::vector<Index> epoch_permutation(std::uint64_t seed, int epoch, Index n) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x7a1du};
  std::mt19937_64 rng(seq);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

}  // namespace

void train(TrainState& state, const Dictionary<double>& dict, const Dataset& train_set, const Dataset& val_set,
           const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  const Network& net = state.net;
  if (train_set.M() != net.M || train_set.N() != net.N || val_set.M() != net.M || val_set.N() != net.N)
    throw InvalidArgument("train: dataset dimensions do not match the network");
  if (train_set.size() == 0 || val_set.size() == 0) throw InvalidArgument("train: empty dataset");
  if (cfg.batch_size > train_set.size()) throw InvalidArgument("train: batch size exceeds the training set");

  const CMat Y_all = measurements(train_set);
  const CMat X_all = ground_truths(train_set);
  const CMat Y_val = measurements(val_set);
  const CMat X_val = ground_truths(val_set);
  const Index n = train_set.size();

  for (int e = 0; e < cfg.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<Index> perm = epoch_permutation(state.seed, state.epoch, n);
    double loss_sum = 0.0;
    for (Index start = 0; start < n; start += cfg.batch_size) {
      const Index cols = std::min(cfg.batch_size, n - start);
      CMat Y(net.M, cols), X(net.N, cols);
      for (Index j = 0; j < cols; ++j) {
        const Index src = perm[static_cast<std::size_t>(start + j)];
        Y.col(j) = Y_all.col(src);
        X.col(j) = X_all.col(src);
      }
      RVec grad;
      const double loss = batch_gradient(state.net, dict, Y, X, cfg.chunk, cfg.grad, grad);
      if (!std::isfinite(loss)) throw NonFiniteError("train: non-finite batch loss");
      loss_sum += loss * static_cast<double>(cols);
      if (cfg.clip_norm > 0.0) {
        const double norm = grad.norm();
        if (norm > cfg.clip_norm) grad *= cfg.clip_norm / norm;
      }
      adam_step(state, grad, cfg.learning_rate, cfg.adam);
      if (hooks.on_step) hooks.on_step(state);
    }
    ++state.epoch;

    EpochRecord rec;
    rec.epoch = state.epoch;
    rec.train_nmse_db = to_db(loss_sum / static_cast<double>(n));
    rec.val_nmse_db = to_db(evaluate_nmse(state.net, dict, Y_val, X_val, std::max<Index>(cfg.chunk, 512)));
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!std::isfinite(rec.train_nmse_db) || !std::isfinite(rec.val_nmse_db))
      throw NonFiniteError("train: non-finite epoch loss");
    state.history.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(state, rec);
    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() && state.epoch % cfg.checkpoint_every == 0)
      save_checkpoint(state, cfg.checkpoint_path);
  }
}

void write_loss_csv(const std::vector<EpochRecord>& history, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << "epoch,train_nmse_db,val_nmse_db,wall_seconds\n";
  os << std::setprecision(10);
  for (const EpochRecord& r : history)
    os << r.epoch << ',' << r.train_nmse_db << ',' << r.val_nmse_db << ',' << r.wall_seconds << '\n';
  if (!os) throw IoError("write to '" + path + "' failed");
}

}  // namespace thadmm
