#include <gtest/gtest.h>

#include "thadmm/run_config.hpp"

using namespace thadmm;

TEST(RunConfig, PaperDefaults) {
  const RunConfig c = profile_defaults("paper");
  EXPECT_EQ(c.M, 20);
  EXPECT_EQ(c.full_aperture, 50);
  EXPECT_EQ(c.N, 256);
  EXPECT_EQ(c.dataset_spec("train").total(), 100000u);
  EXPECT_EQ(c.dataset_spec("val").total(), 20000u);
  const DatasetSpec test = c.dataset_spec("test");
  EXPECT_EQ(test.total(), 8000u);
  EXPECT_EQ(test.snr_levels_db, (std::vector<double>{0, 5, 10, 15, 20, 25, 30, 35}));
  EXPECT_DOUBLE_EQ(test.min_sep, 1.0 / 60.0);
  EXPECT_DOUBLE_EQ(c.dataset_spec("train").min_sep, 1.0 / 20.0);
  const TrainConfig t = c.train_config();
  EXPECT_EQ(t.epochs, 30);
  EXPECT_EQ(t.batch_size, 2048);
  EXPECT_EQ(t.learning_rate, 1e-4);
  EXPECT_EQ(c.eval_params().delta1, 2);
  EXPECT_EQ(c.eval_params().delta2, 0.4);
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfig, DeskProfile) {
  const RunConfig c = profile_defaults("desk");
  EXPECT_EQ(c.N, 128);
  EXPECT_EQ(c.dataset_spec("train").total(), 20000u);
  EXPECT_EQ(c.dataset_spec("val").total(), 4000u);
  EXPECT_EQ(c.dataset_spec("test").total(), 6400u);
  EXPECT_EQ(c.epochs, 20);
  EXPECT_EQ(c.batch_size, 2048);
  EXPECT_THROW(profile_defaults("huge"), InvalidArgument);
}

TEST(RunConfig, SplitsUseDistinctSeeds) {
  const RunConfig c = profile_defaults("desk");
  EXPECT_NE(c.dataset_spec("train").seed, c.dataset_spec("val").seed);
  EXPECT_NE(c.dataset_spec("val").seed, c.dataset_spec("test").seed);
  RunConfig d = c;
  d.seed = 2;
  EXPECT_NE(c.dataset_spec("train").seed, d.dataset_spec("train").seed);
  EXPECT_THROW(c.dataset_spec("holdout"), InvalidArgument);
}

TEST(RunConfig, ParseOverridesAndComments) {
  const RunConfig base = profile_defaults("paper");
  const RunConfig c = parse_config(
      "# comment line\n"
      "array.gamma = 0.25   # trailing comment\n"
      "model.arch=TLISTA\n"
      "model.depth = 30\n"
      "data.noise_per_component = true\n"
      "\n"
      "eval.threshold_convention = standard\n",
      base);
  EXPECT_EQ(c.gamma, 0.25);
  EXPECT_EQ(c.arch, Arch::kTLista);
  EXPECT_EQ(c.depth, 30);
  EXPECT_TRUE(c.noise_per_component);
  EXPECT_EQ(c.threshold_convention, ThresholdConvention::kStandard);
  EXPECT_EQ(c.N, base.N);
}

TEST(RunConfig, ParseErrors) {
  const RunConfig base;
  EXPECT_THROW(parse_config("array.bogus = 1\n", base), FormatError);
  EXPECT_THROW(parse_config("array.m 20\n", base), FormatError);
  EXPECT_THROW(parse_config("array.m = twenty\n", base), FormatError);
  EXPECT_THROW(parse_config("data.noise_per_component = yes\n", base), FormatError);
  EXPECT_THROW(parse_config("model.arch = MLP\n", base), InvalidArgument);
  EXPECT_THROW(load_config("/nonexistent/config.txt", base), IoError);
}

TEST(RunConfig, SerializeRoundTrip) {
  RunConfig c = profile_defaults("desk");
  c.learning_rate = 3.3e-4;
  c.gamma = 0.1 + 0.2;  // needs all 17 digits
  c.arch = Arch::kTHLista;
  c.positions = {0, 3, 9, 50};
  c.M = 4;
  const std::string text = serialize_config(c);
  const RunConfig back = parse_config(text, RunConfig{});
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_config(back), text);
}

TEST(RunConfig, LayoutFromSeedOrExplicitPositions) {
  RunConfig c = profile_defaults("desk");
  const ArrayLayout a = c.layout();
  EXPECT_EQ(a.size(), 20);
  EXPECT_EQ(a.positions.front(), 0);
  EXPECT_EQ(a.positions.back(), 50);
  const RunConfig r = c.resolved();
  EXPECT_EQ(r.positions, a.positions);
  EXPECT_EQ(parse_config(serialize_config(r), RunConfig{}).layout(), a);
  c.array_seed = 2;
  EXPECT_NE(c.layout(), a);
  c.positions = {0, 1, 2};
  EXPECT_THROW(c.layout(), InvalidArgument);
}

TEST(RunConfig, ValidationCatchesBadValues) {
  RunConfig c;
  c.M = 60;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = RunConfig{};
  c.delta2 = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = RunConfig{};
  c.depth = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(DeriveSeed, StableAndStreamDependent) {
  EXPECT_EQ(derive_seed(1, "train"), derive_seed(1, "train"));
  EXPECT_NE(derive_seed(1, "train"), derive_seed(1, "val"));
  EXPECT_NE(derive_seed(1, "train"), derive_seed(2, "train"));
}
