#pragma once

// NMSE training of unfolded networks with Adam over the raw real parameters.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "thadmm/datagen.hpp"
#include "thadmm/grad_engine.hpp"
#include "thadmm/unfolded_nets.hpp"

namespace thadmm {

/// ||x_hat - x||^2 / ||x||^2.
double nmse_loss(const CVec& x_hat, const CVec& x);

/// Mean NMSE over columns.
double batch_nmse(const CMat& X_hat, const CMat& X);

/// d(mean NMSE)/dX_hat for a batch, one column per sample.
CMat batch_nmse_grad(const CMat& X_hat, const CMat& X);

/// 10 log10(value), floored at -100 dB.
double to_db(double value);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  int epochs = 30;
  Index batch_size = 2048;
  double learning_rate = 1e-4;
  AdamConfig adam;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // epochs; 0 disables intermediate checkpoints
  std::string checkpoint_path;
  double clip_norm = 0.0;  // 0 disables gradient-norm clipping
  Index chunk = 256;       // columns per forward/backward; does not change results
  GradOptions grad;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_nmse_db = 0.0;
  double val_nmse_db = 0.0;
  double wall_seconds = 0.0;
};

struct TrainState {
  Network net;
  RVec m;  // Adam first moments, congruent with flatten(net)
  RVec v;  // Adam second moments
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  int epoch = 0;  // completed epochs; the shuffle for epoch e is derived from (seed, e)
  std::vector<EpochRecord> history;

  static TrainState fresh(Network net, std::uint64_t seed);
};

/// One bias-corrected Adam update; throws NonFiniteError on NaN/Inf gradients.
void adam_step(TrainState& state, const RVec& grad, double learning_rate, const AdamConfig& adam = {});
void adam_step(TrainState& state, const GradientSet& grads, double learning_rate, const AdamConfig& adam = {});

/// Mean-NMSE gradient of a batch, accumulated over fixed-size column chunks
/// in order. Returns the batch mean NMSE.
double batch_gradient(const Network& net, const Dictionary<double>& dict, const CMat& Y, const CMat& X, Index chunk,
                      const GradOptions& opts, RVec& grad);

/// Mean NMSE of the network over a whole set.
double evaluate_nmse(const Network& net, const Dictionary<double>& dict, const CMat& Y, const CMat& X, Index chunk = 512);

/// Network estimates for all columns of Y.
CMat predict(const Network& net, const Dictionary<double>& dict, const CMat& Y, Index chunk = 512);

struct TrainHooks {
  std::function<void(const TrainState&)> on_step;
  std::function<void(const TrainState&, const EpochRecord&)> on_epoch;
};

/// Runs cfg.epochs more epochs on state. Reported losses are
/// 10 log10(mean NMSE); the training value averages the pre-update batch
/// losses, the validation value is the full set after the epoch.
void train(TrainState& state, const Dictionary<double>& dict, const Dataset& train_set, const Dataset& val_set,
           const TrainConfig& cfg, const TrainHooks& hooks = {});

void write_loss_csv(const std::vector<EpochRecord>& history, const std::string& path);

// Checkpoints are JSON; see checkpoint.cpp for the layout.
void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);
/// Same, but rejects a checkpoint of a different architecture.
TrainState load_checkpoint(const std::string& path, Arch expected);

std::string checkpoint_to_string(const TrainState& state);
TrainState checkpoint_from_string(const std::string& text);

}  // namespace thadmm
