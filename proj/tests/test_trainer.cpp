#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "test_support.hpp"
#include "thadmm/trainer.hpp"

using namespace thadmm;
using thadmm::testing::perturb_network;
using thadmm::testing::random_cmat;
using thadmm::testing::random_cvec;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  Dictionary<double> dict = build_dictionary(subsample_positions(16, 8, 3, 0.5), FrequencyGrid<double>(32));
  Dataset train_set;
  Dataset val_set;

  explicit Fixture(std::uint64_t train_count = 64) {
    DatasetSpec s;
    s.count_per_snr = train_count;
    s.snr_levels_db = {15.0};
    s.min_sep = 1.0 / 8.0;
    s.k_range = {1, 4};
    s.seed = 11;
    train_set = generate_dataset(s, dict.layout, dict.grid);
    s.count_per_snr = 32;
    s.seed = 12;
    val_set = generate_dataset(s, dict.layout, dict.grid);
  }
};

std::string temp_file(const std::string& name) { return (fs::temp_directory_path() / ("thadmm_" + name)).string(); }

TrainConfig quick_config(int epochs, double lr) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 16;
  c.learning_rate = lr;
  c.chunk = 8;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(NmseLoss, ClosedFormCases) {
  std::mt19937_64 rng(1);
  const CVec x = random_cvec(rng, 10);
  EXPECT_EQ(nmse_loss(x, x), 0.0);
  EXPECT_DOUBLE_EQ(nmse_loss(CVec::Zero(10), x), 1.0);
  EXPECT_DOUBLE_EQ(nmse_loss(2.0 * x, x), 1.0);
  EXPECT_THROW(nmse_loss(x, CVec::Zero(10)), InvalidArgument);
}

TEST(NmseLoss, BatchGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  const CMat X = random_cmat(rng, 5, 3), Xh = random_cmat(rng, 5, 3);
  const CMat G = batch_nmse_grad(Xh, X);
  const double h = 1e-6;
  for (Index i = 0; i < Xh.size(); ++i) {
    for (cd dir : {cd(1, 0), cd(0, 1)}) {
      CMat p = Xh, m = Xh;
      p.data()[i] += h * dir;
      m.data()[i] -= h * dir;
      const double num = (batch_nmse(p, X) - batch_nmse(m, X)) / (2 * h);
      EXPECT_NEAR(dir.real() != 0 ? G.data()[i].real() : G.data()[i].imag(), num, 1e-8);
    }
  }
}

TEST(ToDb, FloorAndValues) {
  EXPECT_DOUBLE_EQ(to_db(1.0), 0.0);
  EXPECT_DOUBLE_EQ(to_db(0.1), -10.0);
  EXPECT_EQ(to_db(0.0), -100.0);
  EXPECT_EQ(to_db(1e-20), -100.0);
}

TEST(AdamStep, ScalarOracle) {
  // Independent scalar Adam on one coordinate with constant gradient 1.
  Fixture f(16);
  Network net = init_network(Arch::kTHAdmmNet, 1, f.dict);
  TrainState s = TrainState::fresh(net, 0);
  const Index n = real_dof_count(net);
  RVec g = RVec::Zero(n);
  const Index k = n - 1;  // beta_raw
  g[k] = 1.0;
  const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double theta = flatten(net)[k], m = 0, v = 0;
  for (int t = 1; t <= 5; ++t) {
    adam_step(s, g, lr);
    m = b1 * m + (1 - b1);
    v = b2 * v + (1 - b2);
    theta -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
    EXPECT_NEAR(flatten(s.net)[k], theta, 1e-15);
    if (t == 1) EXPECT_NEAR(flatten(s.net)[k] - flatten(net)[k], -lr, 1e-10);
  }
  EXPECT_EQ(s.step, 5);
}

TEST(AdamStep, ZeroGradientLeavesParametersAndAdvancesStep) {
  Fixture f(16);
  const Network net = init_network(Arch::kTLista, 2, f.dict);
  TrainState s = TrainState::fresh(net, 0);
  adam_step(s, RVec::Zero(real_dof_count(net)), 1e-2);
  EXPECT_EQ(s.net, net);
  EXPECT_EQ(s.step, 1);
}

TEST(AdamStep, NonFiniteGradientAborts) {
  Fixture f(16);
  TrainState s = TrainState::fresh(init_network(Arch::kLista, 1, f.dict), 0);
  RVec g = RVec::Zero(s.m.size());
  g[3] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(adam_step(s, g, 1e-3), NonFiniteError);
  EXPECT_EQ(s.step, 0);
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  Fixture f;
  const Network net = init_network(Arch::kTHAdmmNet, 3, f.dict);
  TrainState s = TrainState::fresh(net, 1);
  train(s, f.dict, f.train_set, f.val_set, quick_config(3, 0.0));
  EXPECT_EQ(s.net, net);
  ASSERT_EQ(s.history.size(), 3u);
  for (const EpochRecord& r : s.history) EXPECT_EQ(r.val_nmse_db, s.history.front().val_nmse_db);
  EXPECT_EQ(s.step, 12);
}

TEST(Train, OverfitsASingleSample) {
  Fixture f(1);
  TrainState s = TrainState::fresh(init_network(Arch::kTHAdmmNet, 3, f.dict), 1);
  TrainConfig c = quick_config(150, 1e-2);
  c.batch_size = 1;
  const double before = evaluate_nmse(s.net, f.dict, measurements(f.train_set), ground_truths(f.train_set));
  train(s, f.dict, f.train_set, f.val_set, c);
  const double after = evaluate_nmse(s.net, f.dict, measurements(f.train_set), ground_truths(f.train_set));
  EXPECT_LT(after, 0.5 * before);
  EXPECT_LT(s.history.back().train_nmse_db, s.history.front().train_nmse_db);
}

TEST(Train, ReproducibleAndPsdAfterEveryStep) {
  Fixture f;
  TrainState a = TrainState::fresh(init_network(Arch::kTHAdmmNet, 2, f.dict), 7);
  TrainState b = a;
  int steps = 0;
  TrainHooks hooks;
  hooks.on_step = [&](const TrainState& s) {
    ++steps;
    for (const LayerParams& p : s.net.layers) {
      const PsdLiftResult<double> lift = min_eigenvalue(HermToeplitz<double>(p.gen));
      CMat B = to_dense(HermToeplitz<double>(p.gen));
      B.diagonal().array() += lift.lifted_shift + p.rho();
      EXPECT_GT(thadmm::testing::min_eig_real_embedding(B), 0.0);
    }
  };
  train(a, f.dict, f.train_set, f.val_set, quick_config(2, 1e-2), hooks);
  train(b, f.dict, f.train_set, f.val_set, quick_config(2, 1e-2));
  EXPECT_EQ(steps, 8);
  EXPECT_EQ(a.net, b.net);
  EXPECT_EQ(a.m, b.m);
  EXPECT_EQ(a.v, b.v);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].train_nmse_db, b.history[i].train_nmse_db);
    EXPECT_EQ(a.history[i].val_nmse_db, b.history[i].val_nmse_db);
    EXPECT_TRUE(std::isfinite(a.history[i].val_nmse_db));
  }
}

TEST(Train, ResumingMatchesAnUninterruptedRun) {
  Fixture f;
  TrainState full = TrainState::fresh(init_network(Arch::kTLista, 2, f.dict), 5);
  TrainState part = full;
  train(full, f.dict, f.train_set, f.val_set, quick_config(2, 1e-3));
  train(part, f.dict, f.train_set, f.val_set, quick_config(1, 1e-3));
  TrainState resumed = checkpoint_from_string(checkpoint_to_string(part));
  train(resumed, f.dict, f.train_set, f.val_set, quick_config(1, 1e-3));
  EXPECT_EQ(resumed.net, full.net);
  EXPECT_EQ(resumed.step, full.step);
}

TEST(Train, RejectsOversizedBatch) {
  Fixture f(8);
  TrainState s = TrainState::fresh(init_network(Arch::kLista, 1, f.dict), 0);
  EXPECT_THROW(train(s, f.dict, f.train_set, f.val_set, quick_config(1, 1e-3)), InvalidArgument);
}

TEST(Checkpoint, RoundTripIsBitwise) {
  Fixture f(16);
  std::mt19937_64 rng(4);
  for (Arch a : {Arch::kLista, Arch::kTLista, Arch::kTHLista, Arch::kAdmmNet, Arch::kTHAdmmNet}) {
    Network net = init_network(a, a == Arch::kTHAdmmNet ? 15 : 2, f.dict);
    perturb_network(net, rng, 0.1);
    TrainState s = TrainState::fresh(net, 99);
    RVec g = RVec::Random(s.m.size());
    if (has_hermitian_generator(a)) g.setConstant(0.01);
    s.m = g;
    s.v = g.cwiseAbs2();
    s.step = 17;
    s.epoch = 3;
    const std::string path = temp_file(std::string(arch_name(a)) + "_ckpt.json");
    save_checkpoint(s, path);
    const TrainState back = load_checkpoint(path, a);
    EXPECT_EQ(back.net, s.net) << arch_name(a);
    EXPECT_EQ(back.m, s.m);
    EXPECT_EQ(back.v, s.v);
    EXPECT_EQ(back.step, 17);
    EXPECT_EQ(back.epoch, 3);
    EXPECT_EQ(back.seed, 99u);
  }
}

TEST(Checkpoint, FieldOrderIsFixed) {
  Fixture f(16);
  const std::string text = checkpoint_to_string(TrainState::fresh(init_network(Arch::kTHAdmmNet, 1, f.dict), 0));
  const auto pos = [&](const std::string& key) { return text.find("\"" + key + "\""); };
  EXPECT_LT(pos("format_version"), pos("arch"));
  EXPECT_LT(pos("arch"), pos("T"));
  EXPECT_LT(pos("N"), pos("layers"));
  EXPECT_LT(pos("gen"), pos("rho_raw"));
  EXPECT_LT(pos("rho_raw"), pos("beta_raw"));
  EXPECT_LT(pos("beta_raw"), pos("optimizer"));
}

TEST(Checkpoint, ArchitectureMismatchIsExplicit) {
  Fixture f(16);
  const std::string path = temp_file("tlista_ckpt.json");
  save_checkpoint(TrainState::fresh(init_network(Arch::kTLista, 1, f.dict), 0), path);
  EXPECT_THROW(load_checkpoint(path, Arch::kTHAdmmNet), MismatchError);
  EXPECT_NO_THROW(load_checkpoint(path, Arch::kTLista));
}

TEST(Checkpoint, TruncatedOrMalformedInputIsAFormatError) {
  Fixture f(16);
  const std::string text = checkpoint_to_string(TrainState::fresh(init_network(Arch::kTHAdmmNet, 2, f.dict), 0));
  for (double frac : {0.1, 0.5, 0.99}) {
    EXPECT_THROW(checkpoint_from_string(text.substr(0, static_cast<std::size_t>(frac * text.size()))), FormatError);
  }
  std::string bad = text;
  bad.replace(bad.find("THADMMNet"), 9, "BOGUSNETS");
  EXPECT_ANY_THROW(checkpoint_from_string(bad));
  std::string wrong_len = text;
  wrong_len.replace(wrong_len.find("\"T\": 2"), 6, "\"T\": 3");
  EXPECT_THROW(checkpoint_from_string(wrong_len), FormatError);
  EXPECT_THROW(load_checkpoint(temp_file("missing_ckpt.json")), IoError);
}

TEST(LossCsv, HeaderAndRows) {
  const std::string path = temp_file("loss.csv");
  write_loss_csv({{1, -1.5, -2.0, 0.25}, {2, -3.0, -3.5, 0.5}}, path);
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "epoch,train_nmse_db,val_nmse_db,wall_seconds");
  std::getline(is, line);
  EXPECT_EQ(line, "1,-1.5,-2,0.25");
}
