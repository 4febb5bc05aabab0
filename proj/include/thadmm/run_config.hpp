#pragma once

// Experiment configuration as dotted key-value text:
//
//   # comment
//   array.gamma = 0.5
//   model.arch = THADMMNet
//
// Keys not given keep the profile defaults ("paper" or "desk").

#include <cstdint>
#include <string>
#include <vector>

#include "thadmm/classic_solvers.hpp"
#include "thadmm/datagen.hpp"
#include "thadmm/eval_metrics.hpp"
#include "thadmm/trainer.hpp"
#include "thadmm/unfolded_nets.hpp"

namespace thadmm {

struct SplitConfig {
  std::uint64_t count = 0;  // per SNR level for the test split
  double snr_db = 15.0;     // fixed-SNR splits
  double separation = 1.0;  // min_sep = 1 / (separation * M)
  int k_min = 1;
  int k_max = 8;

  friend bool operator==(const SplitConfig&, const SplitConfig&) = default;
};

struct RunConfig {
  std::string experiment = "thadmm";
  std::string profile = "paper";
  std::uint64_t seed = 1;

  double gamma = 0.5;
  int full_aperture = 50;
  int M = 20;
  std::uint64_t array_seed = 1;
  std::vector<int> positions;  // explicit layout; empty means subsample with array_seed
  Index N = 256;

  SplitConfig train{100000, 15.0, 1.0, 1, 8};
  SplitConfig val{20000, 15.0, 1.0, 1, 8};
  SplitConfig test{1000, 15.0, 3.0, 1, 8};
  double test_snr_min = 0.0;
  double test_snr_max = 35.0;
  double test_snr_step = 5.0;
  bool noise_per_component = false;

  Arch arch = Arch::kTHAdmmNet;
  Index depth = 15;
  bool stop_gradient_eta = false;

  int epochs = 30;
  Index batch_size = 2048;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int checkpoint_every = 0;
  double clip_norm = 0.0;
  Index chunk = 256;

  Index delta1 = 2;
  double delta2 = 0.4;
  double baseline_tau = 1.0;
  double baseline_rho = 1.0;
  int ista_iterations = 100;
  int admm_iterations = 50;
  ThresholdConvention threshold_convention = ThresholdConvention::kScaled;

  std::string out_dir = "out";

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  void validate() const;

  // Derived objects.
  ArrayLayout layout() const;
  /// Copy with the layout pinned into `positions`.
  RunConfig resolved() const;
  FrequencyGrid<double> grid() const;
  DatasetSpec dataset_spec(const std::string& split) const;  // "train", "val", "test"
  TrainConfig train_config() const;
  EvalParams eval_params() const { return {delta1, delta2}; }
};

/// Defaults of a named profile: "paper" or "desk".
RunConfig profile_defaults(const std::string& profile);

/// Applies key-value text on top of base.
RunConfig parse_config(const std::string& text, const RunConfig& base);
RunConfig load_config(const std::string& path, const RunConfig& base);

/// Canonical text: every key, fixed order, shortest round-trip numbers.
std::string serialize_config(const RunConfig& cfg);

/// Sub-seed for a named stream (layout, train, val, test, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

}  // namespace thadmm
