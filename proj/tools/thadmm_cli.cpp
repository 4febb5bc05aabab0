// thadmm: data generation, training, evaluation and gradient checks for
// unfolded sparse DoA networks.
//
//   thadmm gen-data   --profile desk --out run/
//   thadmm train      --profile desk --out run/ --arch THADMMNet --depth 15
//   thadmm eval       --profile desk --out run/ --checkpoint run/THADMMNet_T15.json --baselines ista,admm,oracle
//   thadmm infer      --checkpoint run/THADMMNet_T15.json --data run/test.bin --index 0
//   thadmm check-grad --arch TLISTA
//
// Settings resolve in order: profile defaults, --config file, --set overrides,
// then the --seed and --out flags.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "thadmm/classic_solvers.hpp"
#include "thadmm/datagen.hpp"
#include "thadmm/eval_metrics.hpp"
#include "thadmm/grad_engine.hpp"
#include "thadmm/run_config.hpp"
#include "thadmm/trainer.hpp"
#include "thadmm/unfolded_nets.hpp"

namespace fs = std::filesystem;
using namespace thadmm;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string profile = "paper";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "Key-value config file")->check(CLI::ExistingFile);
  cmd->add_option("--profile", o.profile, "Default profile")->check(CLI::IsMember({"paper", "desk"}));
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--set", o.overrides, "Override a config key (key=value), repeatable");
}

RunConfig resolve_config(const CommonOptions& o) {
  RunConfig cfg = profile_defaults(o.profile);
  if (!o.config_path.empty()) cfg = load_config(o.config_path, cfg);
  std::string text;
  for (const std::string& kv : o.overrides) text += kv + "\n";
  cfg = parse_config(text, cfg);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.out_dir = *o.out;
  cfg.validate();
  return cfg;
}

std::string out_path(const RunConfig& cfg, const std::string& name) { return (fs::path(cfg.out_dir) / name).string(); }

Dictionary<double> make_dictionary(const RunConfig& cfg) { return build_dictionary(cfg.layout(), cfg.grid()); }

Dataset load_split(const RunConfig& cfg, const std::string& split) {
  const std::string path = out_path(cfg, split + ".bin");
  if (!fs::exists(path)) throw IoError("missing dataset '" + path + "'; run gen-data first");
  Dataset ds = read_dataset(path);
  if (ds.M() != cfg.M || ds.N() != cfg.N)
    throw MismatchError("dataset '" + path + "' has M=" + std::to_string(ds.M()) + ", N=" + std::to_string(ds.N()) +
                        " but the config has M=" + std::to_string(cfg.M) + ", N=" + std::to_string(cfg.N));
  return ds;
}

std::string model_name(Arch arch, Index depth) { return std::string(arch_name(arch)) + "_T" + std::to_string(depth); }

// gen-data ------------------------------------------------------------------

int cmd_gen_data(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const ArrayLayout layout = cfg.layout();
  const FrequencyGrid<double> grid = cfg.grid();
  for (const std::string split : {"train", "val", "test"}) {
    const DatasetSpec spec = cfg.dataset_spec(split);
    const Dataset ds = generate_dataset(spec, layout, grid);
    const std::string path = out_path(cfg, split + ".bin");
    write_dataset(ds, path);
    std::ostringstream snr;
    if (spec.snr_levels_db.size() == 1) {
      snr << "fixed " << spec.snr_levels_db.front() << " dB";
    } else {
      snr << "sweep " << spec.snr_levels_db.front() << ".." << spec.snr_levels_db.back() << " dB ("
          << spec.snr_levels_db.size() << " levels x " << spec.count_per_snr << ")";
    }
    std::cout << split << ": " << ds.size() << " samples, SNR " << snr.str() << ", min_sep " << std::setprecision(6)
              << spec.min_sep << " -> " << path << "\n";
  }
  const std::string cfg_path = out_path(cfg, "config.txt");
  std::ofstream(cfg_path) << serialize_config(cfg.resolved());
  std::cout << "config -> " << cfg_path << "\n";
  return 0;
}

// train ---------------------------------------------------------------------

int cmd_train(const RunConfig& cfg, const std::string& resume) {
  fs::create_directories(cfg.out_dir);
  const Dictionary<double> dict = make_dictionary(cfg);
  const Dataset train_set = load_split(cfg, "train");
  const Dataset val_set = load_split(cfg, "val");

  TrainConfig tc = cfg.train_config();
  const std::string name = model_name(cfg.arch, cfg.depth);
  const std::string ckpt = out_path(cfg, name + ".json");
  tc.checkpoint_path = ckpt;

  TrainState state = resume.empty() ? TrainState::fresh(init_network(cfg.arch, cfg.depth, dict), tc.seed)
                                    : load_checkpoint(resume, cfg.arch);
  if (state.net.M != cfg.M || state.net.N != cfg.N || state.net.depth() != cfg.depth)
    throw MismatchError("checkpoint '" + resume + "' does not match the configured M, N and depth");

  std::cout << name << ": " << param_count(state.net) << " parameters (" << real_dof_count(state.net)
            << " real degrees of freedom)\n";
  TrainHooks hooks;
  hooks.on_epoch = [](const TrainState&, const EpochRecord& r) {
    std::cout << "epoch " << r.epoch << ": train " << std::fixed << std::setprecision(3) << r.train_nmse_db << " dB, val "
              << r.val_nmse_db << " dB, " << std::setprecision(1) << r.wall_seconds << " s" << std::defaultfloat
              << std::endl;
  };
  train(state, dict, train_set, val_set, tc, hooks);
  save_checkpoint(state, ckpt);
  const std::string loss = out_path(cfg, name + "_loss.csv");
  write_loss_csv(state.history, loss);
  std::cout << "checkpoint -> " << ckpt << "\nloss -> " << loss << "\n";
  return 0;
}

// eval ----------------------------------------------------------------------

struct Method {
  std::string name;
  Estimator estimator;
};

std::vector<Method> build_methods(const RunConfig& cfg, const Dictionary<double>& dict,
                                  const std::vector<std::string>& checkpoints, const std::vector<std::string>& baselines,
                                  const Dataset& test_set) {
  std::vector<Method> methods;
  for (const std::string& path : checkpoints) {
    auto net = std::make_shared<Network>(load_checkpoint(path).net);
    if (net->M != cfg.M || net->N != cfg.N) throw MismatchError("checkpoint '" + path + "' does not match the config M, N");
    methods.push_back({model_name(net->arch, net->depth()),
                       [net, &dict](const CMat& Y) { return predict(*net, dict, Y); }});
  }
  const double mu = 1.0 / std::pow(max_singular_value(dict), 2);
  for (const std::string& b : baselines) {
    if (b == "ista") {
      const IstaConfig<double> ic{mu, cfg.baseline_tau, cfg.ista_iterations};
      methods.push_back({"ISTA-" + std::to_string(ic.iterations),
                         [ic, &dict](const CMat& Y) { return ista_solve<double>(dict.A, Y, ic); }});
    } else if (b == "admm") {
      const AdmmConfig<double> ac{cfg.baseline_rho, cfg.baseline_tau, cfg.admm_iterations, cfg.threshold_convention};
      methods.push_back({"ADMM-" + std::to_string(ac.iterations),
                         [ac, &dict](const CMat& Y) { return admm_solve<double>(dict, Y, ac); }});
    } else if (b == "oracle") {
      // The estimator only sees Y, so it returns the stored ground truth in order.
      methods.push_back({"oracle", [&test_set](const CMat& Y) {
                           if (Y.cols() != test_set.size()) throw InvalidArgument("oracle: expects the full test set");
                           return ground_truths(test_set);
                         }});
    } else if (b == "zero") {
      methods.push_back({"zero", [&dict](const CMat& Y) { return CMat::Zero(dict.cols(), Y.cols()).eval(); }});
    } else {
      throw InvalidArgument("unknown baseline '" + b + "' (expected ista, admm, oracle or zero)");
    }
  }
  if (methods.empty()) throw InvalidArgument("eval: give at least one --checkpoint or --baselines entry");
  return methods;
}

int cmd_eval(const RunConfig& cfg, const std::vector<std::string>& checkpoints, const std::vector<std::string>& baselines,
             const std::vector<Index>& spectra) {
  fs::create_directories(cfg.out_dir);
  const Dictionary<double> dict = make_dictionary(cfg);
  const Dataset test_set = load_split(cfg, "test");
  const std::vector<Method> methods = build_methods(cfg, dict, checkpoints, baselines, test_set);
  const CMat Y = measurements(test_set);

  std::vector<MetricsReport> reports;
  std::vector<CMat> estimates;
  for (const Method& m : methods) {
    const auto t0 = std::chrono::steady_clock::now();
    CMat X_hat = m.estimator(Y);
    reports.push_back(evaluate_predictions(m.name, X_hat, test_set, dict.grid, cfg.gamma, cfg.eval_params()));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << m.name << " (" << std::fixed << std::setprecision(1) << secs << " s)" << std::defaultfloat << "\n";
    for (const SnrMetrics& l : reports.back().levels) {
      std::cout << "  " << std::setw(5) << l.snr_db << " dB  Pd " << std::fixed << std::setprecision(4) << l.detection_rate
                << "  NMSE " << std::setprecision(2) << l.nmse_db << " dB  RMSE ";
      if (l.rmse_deg)
        std::cout << std::setprecision(3) << *l.rmse_deg << " deg";
      else
        std::cout << "n/a";
      std::cout << std::defaultfloat << "\n";
    }
    if (!spectra.empty()) estimates.push_back(std::move(X_hat));
  }
  const std::string csv = out_path(cfg, "results.csv");
  write_results_csv(reports, csv);
  std::cout << "results -> " << csv << "\n";

  for (Index idx : spectra) {
    if (idx < 0 || idx >= test_set.size()) throw InvalidArgument("spectrum index " + std::to_string(idx) + " out of range");
    std::vector<std::pair<std::string, CVec>> cols;
    for (std::size_t k = 0; k < methods.size(); ++k) cols.emplace_back(methods[k].name, estimates[k].col(idx));
    const std::string path = out_path(cfg, "spectrum_" + std::to_string(idx) + ".csv");
    write_spectra_csv(path, dict.grid, cfg.gamma, test_set.samples[static_cast<std::size_t>(idx)].x, cols);
    std::cout << "spectrum -> " << path << "\n";
  }
  return 0;
}

// infer ---------------------------------------------------------------------

int cmd_infer(const RunConfig& cfg, const std::string& checkpoint, const std::string& data_path, Index index) {
  const Network net = load_checkpoint(checkpoint).net;
  if (net.M != cfg.M || net.N != cfg.N) throw MismatchError("checkpoint does not match the configured M, N");
  const Dictionary<double> dict = make_dictionary(cfg);
  const Dataset ds = read_dataset(data_path);
  if (ds.M() != net.M) throw MismatchError("dataset and checkpoint disagree on M");
  if (index < 0 || index >= ds.size()) throw InvalidArgument("sample index out of range");
  const Sample& s = ds.samples[static_cast<std::size_t>(index)];
  const CVec x_hat = infer(net, s.y, dict);
  const PeakSpectrum pk = find_peaks(x_hat);
  const double peak_max = pk.values.empty() ? 0.0 : *std::max_element(pk.values.begin(), pk.values.end());

  std::cout << "sample " << index << ": SNR " << s.snr_db << " dB, K = " << s.K << "\n";
  std::cout << "estimated sources (peaks >= " << cfg.delta2 << " x strongest):\n";
  for (std::size_t p = 0; p < pk.indices.size(); ++p) {
    if (pk.values[p] < cfg.delta2 * peak_max) continue;
    const Index b = pk.indices[p];
    std::cout << "  bin " << std::setw(4) << b << "  f " << std::fixed << std::setprecision(5) << std::setw(9)
              << dict.grid.freqs[b] << "  theta " << std::setprecision(2) << std::setw(7)
              << freq_to_angle(dict.grid.freqs[b], cfg.gamma) << " deg  |x| " << std::setprecision(4) << pk.values[p]
              << std::defaultfloat << "\n";
  }
  std::cout << "ground truth:\n";
  for (Index b = 0; b < s.x.size(); ++b) {
    if (s.x[b] == cd(0)) continue;
    std::cout << "  bin " << std::setw(4) << b << "  theta " << std::fixed << std::setprecision(2) << std::setw(7)
              << freq_to_angle(dict.grid.freqs[b], cfg.gamma) << " deg  |x| " << std::setprecision(4) << std::abs(s.x[b])
              << std::defaultfloat << "\n";
  }
  return 0;
}

// check-grad ----------------------------------------------------------------

int cmd_check_grad(const std::string& arch_str, Index M, Index N, Index T, int samples, double step, double tol,
                   std::uint64_t seed, bool stop_gradient_eta) {
  const Arch arch = parse_arch(arch_str);
  const ArrayLayout layout = subsample_positions(static_cast<int>(2 * M), static_cast<int>(M), seed);
  const Dictionary<double> dict = build_dictionary(layout, FrequencyGrid<double>(N));
  Network net = init_network(arch, T, dict);

  // Move off the initialization, where the Gram lift sits exactly at lambda_min = 0.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 0.05);
  RVec flat = flatten(net);
  for (Index i = 0; i < flat.size(); ++i) flat[i] += gauss(rng);
  unflatten(net, flat);
  if (has_hermitian_generator(arch))
    for (LayerParams& p : net.layers) p.gen[0] = cd(p.gen[0].real(), 0.0);

  DatasetSpec spec;
  spec.count_per_snr = static_cast<std::uint64_t>(samples) * 4;
  spec.snr_levels_db = {15.0};
  spec.min_sep = 1.0 / static_cast<double>(2 * M);
  spec.k_range = {1, 3};
  spec.seed = seed;

  GradOptions opts;
  opts.stop_gradient_eta = stop_gradient_eta;
  int passed = 0;
  int failed = 0;
  for (std::uint64_t i = 0; passed + failed < samples && i < spec.count_per_snr; ++i) {
    const Sample s = generate_sample(spec, i, layout, dict.grid);
    const FiniteDiffReport r = finite_diff_check(net, dict, s.y, s.x, step, tol, opts);
    if (r.excluded) {
      std::cout << "sample " << i << ": excluded (" << r.exclusion_reason << ")\n";
      continue;
    }
    (r.passed ? passed : failed)++;
    std::cout << "sample " << i << ": " << (r.passed ? "ok" : "FAIL") << "  worst rel " << std::setprecision(3)
              << r.worst_rel_error << " at layer " << r.worst_layer << " " << r.worst_param << "[" << r.worst_index << "]"
              << r.worst_component << " (analytic " << r.worst_analytic << ", numeric " << r.worst_numeric << "), "
              << r.checked << " dofs\n";
  }
  std::cout << arch_name(arch) << ": " << passed << " passed, " << failed << " failed\n";
  if (passed + failed < samples) throw NumericalError("check-grad: too many excluded samples", 0.0);
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unfolded sparse DoA networks: data, training, evaluation"};
  app.require_subcommand(1);

  CommonOptions common;

  auto* gen = app.add_subcommand("gen-data", "Generate train/val/test datasets");
  add_common(gen, common);

  auto* tr = app.add_subcommand("train", "Train one network");
  add_common(tr, common);
  std::string arch_opt;
  Index depth_opt = 0;
  std::string resume;
  tr->add_option("--arch", arch_opt, "LISTA, TLISTA, THLISTA, ADMMNet or THADMMNet");
  tr->add_option("--depth", depth_opt, "Number of layers");
  tr->add_option("--resume", resume, "Continue from a checkpoint")->check(CLI::ExistingFile);

  auto* ev = app.add_subcommand("eval", "Evaluate networks and baselines over the test sweep");
  add_common(ev, common);
  std::vector<std::string> checkpoints;
  std::vector<std::string> baselines;
  std::vector<Index> spectra;
  ev->add_option("--checkpoint", checkpoints, "Trained checkpoint, repeatable")->check(CLI::ExistingFile);
  ev->add_option("--baselines", baselines, "ista, admm, oracle, zero")->delimiter(',');
  ev->add_option("--spectra", spectra, "Test-sample indices to dump as spectrum CSVs")->delimiter(',');

  auto* inf = app.add_subcommand("infer", "Estimate source angles for one stored measurement");
  add_common(inf, common);
  std::string inf_ckpt;
  std::string inf_data;
  Index inf_index = 0;
  inf->add_option("--checkpoint", inf_ckpt, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  inf->add_option("--data", inf_data, "Dataset file")->required()->check(CLI::ExistingFile);
  inf->add_option("--index", inf_index, "Sample index");

  auto* cg = app.add_subcommand("check-grad", "Compare analytic and finite-difference gradients");
  std::string cg_arch = "THADMMNet";
  Index cg_m = 6, cg_n = 16, cg_t = 3;
  int cg_samples = 10;
  double cg_step = 1e-5, cg_tol = 1e-4;
  std::uint64_t cg_seed = 1;
  bool cg_stop = false;
  cg->add_option("--arch", cg_arch, "Architecture");
  cg->add_option("--m", cg_m, "Array elements");
  cg->add_option("--n", cg_n, "Grid size");
  cg->add_option("--depth", cg_t, "Layers");
  cg->add_option("--samples", cg_samples, "Samples to check");
  cg->add_option("--step", cg_step, "Central-difference step");
  cg->add_option("--tol", cg_tol, "Relative tolerance");
  cg->add_option("--seed", cg_seed, "Seed");
  cg->add_flag("--stop-gradient-eta", cg_stop, "Treat the PSD lift as a constant");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*cg) return cmd_check_grad(cg_arch, cg_m, cg_n, cg_t, cg_samples, cg_step, cg_tol, cg_seed, cg_stop);
    RunConfig cfg = resolve_config(common);
    if (*gen) return cmd_gen_data(cfg);
    if (*tr) {
      if (!arch_opt.empty()) cfg.arch = parse_arch(arch_opt);
      if (depth_opt > 0) cfg.depth = depth_opt;
      cfg.validate();
      return cmd_train(cfg, resume);
    }
    if (*ev) return cmd_eval(cfg, checkpoints, baselines, spectra);
    if (*inf) return cmd_infer(cfg, inf_ckpt, inf_data, inf_index);
  } catch (const std::exception& e) {
    std::cerr << "thadmm: error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
