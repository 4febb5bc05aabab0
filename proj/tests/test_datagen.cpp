#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>

#include "test_support.hpp"
#include "thadmm/datagen.hpp"

using namespace thadmm;
namespace fs = std::filesystem;

namespace {

ArrayLayout desk_layout() { return subsample_positions(50, 20, 1, 0.5); }

std::string temp_file(const std::string& name) { return (fs::temp_directory_path() / ("thadmm_" + name)).string(); }

std::vector<char> slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

DatasetSpec small_spec(std::uint64_t seed = 5) {
  DatasetSpec s;
  s.count_per_snr = 25;
  s.snr_levels_db = {0.0, 10.0, 20.0};
  s.min_sep = 1.0 / 60.0;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(CircularDistance, WrapsAroundHalf) {
  EXPECT_NEAR(circular_distance(-0.49, 0.49), 0.02, 1e-15);
  EXPECT_NEAR(circular_distance(0.1, 0.3), 0.2, 1e-15);
  EXPECT_NEAR(circular_distance(0.25, -0.25), 0.5, 1e-15);
}

TEST(SampleScene, SingleTargetAlwaysAccepted) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_scene(rng, 0.9, {1, 1}).K(), 1);
}

TEST(SampleScene, SeparationAndAmplitudeRanges) {
  std::mt19937_64 rng(2);
  const double min_sep = 1.0 / 20.0;
  for (int draw = 0; draw < 10000; ++draw) {
    const Scene s = sample_scene(rng, min_sep, {8, 8});
    ASSERT_EQ(s.K(), 8);
    for (Index a = 0; a < 8; ++a) {
      EXPECT_GE(s.freqs[a], -0.5);
      EXPECT_LT(s.freqs[a], 0.5);
      EXPECT_LE(std::abs(s.amps[a]), 1.0);
      for (Index b = a + 1; b < 8; ++b) {
        // Independent recomputation of the circular gap.
        double d = std::abs(s.freqs[a] - s.freqs[b]);
        d = std::min(d, 1.0 - d);
        EXPECT_GE(d, min_sep);
      }
    }
  }
}

TEST(SampleScene, CountRangeIsInclusive) {
  std::mt19937_64 rng(3);
  std::vector<int> seen(9, 0);
  for (int i = 0; i < 4000; ++i) ++seen[static_cast<std::size_t>(sample_scene(rng, 0.01, {1, 8}).K())];
  EXPECT_EQ(seen[0], 0);
  for (int k = 1; k <= 8; ++k) EXPECT_GT(seen[static_cast<std::size_t>(k)], 350);
}

TEST(SampleScene, InfeasibleSeparationIsReported) {
  std::mt19937_64 rng(4);
  EXPECT_THROW(sample_scene(rng, 0.2, {1, 5}), FeasibilityError);
  EXPECT_THROW(sample_scene(rng, 0.1, {0, 3}), InvalidArgument);
}

TEST(Synthesize, ElementwiseOracle) {
  const ArrayLayout layout = desk_layout();
  Scene one{RVec::Zero(1), CVec::Ones(1)};
  const CVec y1 = synthesize_measurement(one, layout);
  EXPECT_LT((y1 - CVec::Ones(20)).norm(), 1e-15);

  Scene two{RVec(2), CVec(2)};
  two.freqs << 0.123, -0.317;
  two.amps << cd(0.4, -0.2), cd(-0.7, 0.1);
  const CVec y = synthesize_measurement(two, layout);
  for (Index m = 0; m < 20; ++m) {
    cd ref(0, 0);
    for (Index k = 0; k < 2; ++k) {
      const double ph = 2 * std::numbers::pi * layout.positions[m] * two.freqs[k];
      ref += two.amps[k] * cd(std::cos(ph), std::sin(ph));
    }
    EXPECT_NEAR(std::abs(y[m] - ref), 0.0, 1e-13);
  }
  EXPECT_EQ(synthesize_measurement(Scene{RVec(0), CVec(0)}, layout).norm(), 0.0);
}

TEST(AddNoise, SigmaFormula) {
  std::mt19937_64 rng(5);
  CVec unit = CVec::Zero(4);
  unit[0] = 1.0;
  EXPECT_DOUBLE_EQ(add_noise_at_snr(unit, 0.0, rng).sigma2, 1.0);
  CVec ten = CVec::Constant(10, cd(1.0, 0.0));
  EXPECT_NEAR(add_noise_at_snr(ten, 10.0, rng).sigma2, 1.0, 1e-15);
  EXPECT_THROW(add_noise_at_snr(CVec::Zero(3), 5.0, rng), InvalidArgument);
}

TEST(AddNoise, MonteCarloSnrMatchesTarget) {
  std::mt19937_64 rng(6);
  const CVec yc = synthesize_measurement(Scene{RVec::Constant(1, 0.1), CVec::Constant(1, cd(0.8, 0.3))}, desk_layout());
  for (double snr : {0.0, 15.0, 30.0}) {
    double noise = 0.0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) noise += (add_noise_at_snr(yc, snr, rng).y - yc).squaredNorm();
    const double measured = 10.0 * std::log10(yc.squaredNorm() / (noise / draws));
    EXPECT_NEAR(measured, snr, 0.1);
  }
  // Per-component convention: energy grows by M, i.e. 10 log10(20) dB lower SNR.
  double noise = 0.0;
  for (int i = 0; i < 10000; ++i) noise += (add_noise_at_snr(yc, 15.0, rng, true).y - yc).squaredNorm();
  EXPECT_NEAR(10.0 * std::log10(yc.squaredNorm() / (noise / 10000)), 15.0 - 10.0 * std::log10(20.0), 0.1);
}

TEST(GridGroundTruth, OnGridAndTieBreak) {
  const FrequencyGrid<double> g(64);
  for (Index n : {0, 5, 32, 63}) EXPECT_EQ(nearest_bin(g.freqs[n], g), n);
  EXPECT_EQ(nearest_bin(-0.5 + 5.5 / 64.0, g), 5);
  // Just below +1/2 wraps circularly onto bin 0 (f = -1/2).
  EXPECT_EQ(nearest_bin(0.5 - 0.1 / 64.0, g), 0);

  Scene s{RVec(2), CVec(2)};
  s.freqs << g.freqs[3], g.freqs[40] + 0.2 / 64.0;
  s.amps << cd(0.5, 0), cd(0, 0.25);
  const auto x = grid_ground_truth(s, g);
  ASSERT_TRUE(x);
  EXPECT_EQ((*x)[3], cd(0.5, 0));
  EXPECT_EQ((*x)[40], cd(0, 0.25));
  EXPECT_EQ(((*x).array() != cd(0, 0)).count(), 2);

  s.freqs << g.freqs[3], g.freqs[3] + 0.1 / 64.0;
  EXPECT_FALSE(grid_ground_truth(s, g));
}

TEST(GridGroundTruth, GriddingErrorIsAtMostHalfABin) {
  std::mt19937_64 rng(7);
  const FrequencyGrid<double> g(128);
  for (int i = 0; i < 2000; ++i) {
    const Scene s = sample_scene(rng, 1.0 / 20.0, {1, 8});
    for (Index k = 0; k < s.K(); ++k)
      EXPECT_LE(circular_distance(s.freqs[k], g.freqs[nearest_bin(s.freqs[k], g)]), 0.5 / 128.0 + 1e-15);
  }
}

TEST(GenerateDataset, StoredSamplesSatisfyInvariants) {
  const ArrayLayout layout = desk_layout();
  const FrequencyGrid<double> grid(128);
  const DatasetSpec spec = small_spec();
  const Dataset ds = generate_dataset(spec, layout, grid);
  ASSERT_EQ(ds.size(), 75);
  EXPECT_EQ(ds.header.flags & kFlagSnrSweep, kFlagSnrSweep);
  for (Index i = 0; i < ds.size(); ++i) {
    const Sample& s = ds.samples[static_cast<std::size_t>(i)];
    EXPECT_EQ(s.snr_db, spec.snr_levels_db[static_cast<std::size_t>(i / 25)]);
    EXPECT_EQ((s.x.array() != cd(0, 0)).count(), static_cast<Index>(s.K));
    for (Index k = 0; k < s.scene.K(); ++k) EXPECT_EQ(s.x[nearest_bin(s.scene.freqs[k], grid)], s.scene.amps[k]);
    for (Index a = 0; a < s.scene.K(); ++a)
      for (Index b = a + 1; b < s.scene.K(); ++b)
        EXPECT_GE(circular_distance(s.scene.freqs[a], s.scene.freqs[b]), spec.min_sep);
  }
}

TEST(GenerateDataset, SameSeedGivesIdenticalFiles) {
  const ArrayLayout layout = desk_layout();
  const FrequencyGrid<double> grid(64);
  const std::string a = temp_file("det_a.bin"), b = temp_file("det_b.bin"), c = temp_file("det_c.bin");
  write_dataset(generate_dataset(small_spec(9), layout, grid), a);
  write_dataset(generate_dataset(small_spec(9), layout, grid), b);
  write_dataset(generate_dataset(small_spec(10), layout, grid), c);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_NE(slurp(a), slurp(c));
  // Sample i does not depend on how many samples precede it.
  DatasetSpec shorter = small_spec(9);
  EXPECT_EQ(generate_sample(shorter, 7, layout, grid).y, generate_dataset(small_spec(9), layout, grid).samples[7].y);
}

TEST(DatasetFile, RoundTripIsBitwiseAndLayoutMatches) {
  const ArrayLayout layout = desk_layout();
  const FrequencyGrid<double> grid(32);
  DatasetSpec spec = small_spec();
  spec.noise_per_component = true;
  const Dataset ds = generate_dataset(spec, layout, grid);
  const std::string path = temp_file("rt.bin");
  write_dataset(ds, path);
  const Dataset back = read_dataset(path);
  EXPECT_EQ(back.header.M, 20u);
  EXPECT_EQ(back.header.N, 32u);
  EXPECT_EQ(back.header.count, 75u);
  EXPECT_EQ(back.header.flags, kFlagSnrSweep | kFlagNoisePerComponent);
  ASSERT_EQ(back.size(), ds.size());
  for (Index i = 0; i < ds.size(); ++i) {
    const Sample& a = ds.samples[static_cast<std::size_t>(i)];
    const Sample& b = back.samples[static_cast<std::size_t>(i)];
    EXPECT_EQ(a.y, b.y);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.snr_db, b.snr_db);
    EXPECT_EQ(a.K, b.K);
  }
  const std::vector<char> bytes = slurp(path);
  const std::size_t expected = 4 + 4 + 4 + 4 + 8 + 4 + 75 * (8 + 4 + 16 * (20 + 32));
  ASSERT_EQ(bytes.size(), expected);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "THDN");
  // Little-endian version field.
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], 0);
  // First sample's snr_db, decoded by hand.
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(bytes[28 + static_cast<std::size_t>(i)]);
  double snr;
  std::memcpy(&snr, &bits, 8);
  EXPECT_EQ(snr, ds.samples[0].snr_db);
}

TEST(DatasetFile, TruncationAndBadMagicAreFormatErrors) {
  const Dataset ds = generate_dataset(small_spec(), desk_layout(), FrequencyGrid<double>(16));
  const std::string path = temp_file("trunc.bin");
  write_dataset(ds, path);
  std::vector<char> bytes = slurp(path);
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 9));
  }
  EXPECT_THROW(read_dataset(path), FormatError);
  bytes[0] = 'X';
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  EXPECT_THROW(read_dataset(path), FormatError);
  EXPECT_THROW(read_dataset(temp_file("does_not_exist.bin")), IoError);
}

TEST(Stacking, MeasurementsAndTruthsByColumn) {
  const Dataset ds = generate_dataset(small_spec(), desk_layout(), FrequencyGrid<double>(16));
  const CMat Y = measurements(ds, 10, 20);
  const CMat X = ground_truths(ds);
  ASSERT_EQ(Y.cols(), 10);
  ASSERT_EQ(X.cols(), 75);
  EXPECT_EQ(CVec(Y.col(3)), ds.samples[13].y);
  EXPECT_EQ(CVec(X.col(74)), ds.samples[74].x);
}
