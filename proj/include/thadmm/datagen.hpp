#pragma once

// Synthetic single-snapshot scenes and the little-endian dataset file.
//
// File layout:
//   "THDN" | version u32 (=1) | M u32 | N u32 | count u64 | flags u32
//   per sample: snr_db f64 | K u32 | y: M x (re f64, im f64) | x: N x (re f64, im f64)

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "thadmm/array_geometry.hpp"
#include "thadmm/types.hpp"

namespace thadmm {

struct Scene {
  RVec freqs;
  CVec amps;

  Index K() const { return freqs.size(); }
};

struct Sample {
  CVec y;
  CVec x;
  double snr_db = 0.0;
  std::uint32_t K = 0;
  Scene scene;  // only populated for freshly generated samples
};

inline constexpr std::uint32_t kDatasetVersion = 1;

enum DatasetFlags : std::uint32_t {
  kFlagSnrSweep = 1u << 0,
  kFlagNoisePerComponent = 1u << 1,
};

struct DatasetHeader {
  std::uint32_t version = kDatasetVersion;
  std::uint32_t M = 0;
  std::uint32_t N = 0;
  std::uint64_t count = 0;
  std::uint32_t flags = 0;
};

struct Dataset {
  DatasetHeader header;
  std::vector<Sample> samples;

  Index size() const { return static_cast<Index>(samples.size()); }
  Index M() const { return header.M; }
  Index N() const { return header.N; }
};

/// Circular distance on the unit-period frequency axis.
double circular_distance(double a, double b);

struct KRange {
  int min = 1;
  int max = 8;
};

inline constexpr int kMaxSceneRejections = 100000;

/// K ~ U{k.min..k.max}, frequencies rejection-sampled on [-1/2, 1/2) with
/// pairwise circular separation >= min_sep, |amp| ~ U(0,1), arg ~ U(0, 2pi).
Scene sample_scene(std::mt19937_64& rng, double min_sep, KRange k);

/// Noise-free sum of steering vectors at the (off-grid) scene frequencies.
CVec synthesize_measurement(const Scene& scene, const ArrayLayout& layout);

struct NoisyMeasurement {
  CVec y;
  double sigma2 = 0.0;
};

/// sigma2 = ||y_c||^2 / 10^(snr/10). By default the total expected noise
/// energy equals sigma2 (per-component variance sigma2 / M); with
/// noise_per_component each component has variance sigma2.
NoisyMeasurement add_noise_at_snr(const CVec& y_clean, double snr_db, std::mt19937_64& rng,
                                  bool noise_per_component = false);

/// Nearest-bin assignment (circular, ties to the lower index). Returns
/// nullopt on a bin collision.
std::optional<CVec> grid_ground_truth(const Scene& scene, const FrequencyGrid<double>& grid);

/// Index of the grid bin nearest to f.
Index nearest_bin(double f, const FrequencyGrid<double>& grid);

struct DatasetSpec {
  std::uint64_t count_per_snr = 0;
  std::vector<double> snr_levels_db;  // one entry = fixed SNR
  double min_sep = 0.0;
  KRange k_range;
  std::uint64_t seed = 0;
  bool noise_per_component = false;

  std::uint64_t total() const { return count_per_snr * snr_levels_db.size(); }
};

/// One RNG stream per (seed, sample index).
std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index);

Sample generate_sample(const DatasetSpec& spec, std::uint64_t index, const ArrayLayout& layout,
                       const FrequencyGrid<double>& grid);
Dataset generate_dataset(const DatasetSpec& spec, const ArrayLayout& layout, const FrequencyGrid<double>& grid);

void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

/// Stacks measurements (M x count) and ground truths (N x count).
CMat measurements(const Dataset& ds, Index begin = 0, Index end = -1);
CMat ground_truths(const Dataset& ds, Index begin = 0, Index end = -1);

}  // namespace thadmm
