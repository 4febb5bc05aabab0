#include "thadmm/datagen.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace thadmm {

double circular_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), 1.0);
  return std::min(d, 1.0 - d);
}

Scene sample_scene(std::mt19937_64& rng, double min_sep, KRange k) {
  if (k.min < 1 || k.max < k.min) throw InvalidArgument("sample_scene: bad target-count range");
  if (!(min_sep * k.max < 1.0)) throw FeasibilityError("sample_scene: separation infeasible for the target count");

  std::uniform_int_distribution<int> count(k.min, k.max);
  std::uniform_real_distribution<double> freq(-0.5, 0.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int K = count(rng);
  std::vector<double> f;
  f.reserve(static_cast<std::size_t>(K));
  int rejections = 0;
  while (static_cast<int>(f.size()) < K) {
    const double cand = freq(rng);
    bool ok = true;
    for (double g : f) ok = ok && circular_distance(cand, g) >= min_sep;
    if (ok) {
      f.push_back(cand);
      continue;
    }
    if (++rejections > kMaxSceneRejections) throw FeasibilityError("sample_scene: rejection cap exceeded");
    // A greedy draw can paint itself into a corner; restart the scene now and then.
    if (rejections % 1000 == 0) f.clear();
  }

  Scene s{RVec(K), CVec(K)};
  for (int i = 0; i < K; ++i) {
    s.freqs[i] = f[static_cast<std::size_t>(i)];
    const double mag = unit(rng);
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    s.amps[i] = std::polar(mag, phase);
  }
  return s;
}

CVec synthesize_measurement(const Scene& scene, const ArrayLayout& layout) {
  CVec y = CVec::Zero(layout.size());
  for (Index k = 0; k < scene.K(); ++k) y += scene.amps[k] * steering_vector<double>(layout, scene.freqs[k]);
  return y;
}

NoisyMeasurement add_noise_at_snr(const CVec& y_clean, double snr_db, std::mt19937_64& rng, bool noise_per_component) {
  const double energy = y_clean.squaredNorm();
  if (!(energy > 0.0)) throw InvalidArgument("add_noise_at_snr: clean measurement is zero");
  const double sigma2 = energy / std::pow(10.0, snr_db / 10.0);
  const double per_component = noise_per_component ? sigma2 : sigma2 / static_cast<double>(y_clean.size());
  std::normal_distribution<double> gauss(0.0, std::sqrt(per_component / 2.0));
  NoisyMeasurement out{y_clean, sigma2};
  for (Index m = 0; m < out.y.size(); ++m) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    out.y[m] += cd(re, im);
  }
  return out;
}

Index nearest_bin(double f, const FrequencyGrid<double>& grid) {
  const double pos = (f + 0.5) * static_cast<double>(grid.N);
  Index lower = static_cast<Index>(std::floor(pos));
  if (pos - static_cast<double>(lower) > 0.5) ++lower;
  lower %= grid.N;
  if (lower < 0) lower += grid.N;
  return lower;
}

std::optional<CVec> grid_ground_truth(const Scene& scene, const FrequencyGrid<double>& grid) {
  CVec x = CVec::Zero(grid.N);
  std::vector<bool> used(static_cast<std::size_t>(grid.N), false);
  for (Index k = 0; k < scene.K(); ++k) {
    const Index bin = nearest_bin(scene.freqs[k], grid);
    if (used[static_cast<std::size_t>(bin)]) return std::nullopt;
    used[static_cast<std::size_t>(bin)] = true;
    x[bin] = scene.amps[k];
  }
  return x;
}

std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

Sample generate_sample(const DatasetSpec& spec, std::uint64_t index, const ArrayLayout& layout,
                       const FrequencyGrid<double>& grid) {
  if (spec.snr_levels_db.empty() || spec.count_per_snr == 0) throw InvalidArgument("generate_sample: empty spec");
  std::mt19937_64 rng = sample_rng(spec.seed, index);
  const double snr = spec.snr_levels_db[static_cast<std::size_t>(index / spec.count_per_snr)];
  for (int attempt = 0; attempt < kMaxSceneRejections; ++attempt) {
    Scene scene = sample_scene(rng, spec.min_sep, spec.k_range);
    std::optional<CVec> x = grid_ground_truth(scene, grid);
    if (!x) continue;  // two targets on one bin: draw a new scene
    NoisyMeasurement m = add_noise_at_snr(synthesize_measurement(scene, layout), snr, rng, spec.noise_per_component);
    Sample s;
    s.y = std::move(m.y);
    s.x = std::move(*x);
    s.snr_db = snr;
    s.K = static_cast<std::uint32_t>(scene.K());
    s.scene = std::move(scene);
    return s;
  }
  throw FeasibilityError("generate_sample: could not draw a collision-free scene");
}

Dataset generate_dataset(const DatasetSpec& spec, const ArrayLayout& layout, const FrequencyGrid<double>& grid) {
  Dataset ds;
  ds.header.M = static_cast<std::uint32_t>(layout.size());
  ds.header.N = static_cast<std::uint32_t>(grid.N);
  ds.header.count = spec.total();
  ds.header.flags = (spec.snr_levels_db.size() > 1 ? kFlagSnrSweep : 0u) |
                    (spec.noise_per_component ? kFlagNoisePerComponent : 0u);
  ds.samples.reserve(static_cast<std::size_t>(ds.header.count));
  for (std::uint64_t i = 0; i < ds.header.count; ++i) ds.samples.push_back(generate_sample(spec, i, layout, grid));
  return ds;
}

namespace {

constexpr std::array<char, 4> kMagic{'T', 'H', 'D', 'N'};

template <typename T>
void put(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(bytes.data(), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  std::array<char, sizeof(T)> bytes;
  if (!is.read(bytes.data(), sizeof(T))) throw FormatError("dataset: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

void put_complex(std::ostream& os, const CVec& v) {
  for (Index i = 0; i < v.size(); ++i) {
    put<double>(os, v[i].real());
    put<double>(os, v[i].imag());
  }
}

CVec get_complex(std::istream& is, Index n) {
  CVec v(n);
  for (Index i = 0; i < n; ++i) {
    const double re = get<double>(is);
    const double im = get<double>(is);
    v[i] = cd(re, im);
  }
  return v;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, ds.header.version);
  put<std::uint32_t>(os, ds.header.M);
  put<std::uint32_t>(os, ds.header.N);
  put<std::uint64_t>(os, static_cast<std::uint64_t>(ds.samples.size()));
  put<std::uint32_t>(os, ds.header.flags);
  for (const Sample& s : ds.samples) {
    if (s.y.size() != ds.M() || s.x.size() != ds.N()) throw InvalidArgument("write_dataset: sample shape mismatch");
    put<double>(os, s.snr_db);
    put<std::uint32_t>(os, s.K);
    put_complex(os, s.y);
    put_complex(os, s.x);
  }
  if (!os) throw IoError("write to '" + path + "' failed");
}

Dataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw FormatError("dataset: bad magic in '" + path + "'");
  Dataset ds;
  ds.header.version = get<std::uint32_t>(is);
  if (ds.header.version != kDatasetVersion) throw FormatError("dataset: unsupported version");
  ds.header.M = get<std::uint32_t>(is);
  ds.header.N = get<std::uint32_t>(is);
  ds.header.count = get<std::uint64_t>(is);
  ds.header.flags = get<std::uint32_t>(is);
  if (ds.header.M == 0 || ds.header.N == 0) throw FormatError("dataset: zero dimension");

  ds.samples.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(ds.header.count, 1u << 20)));
  for (std::uint64_t i = 0; i < ds.header.count; ++i) {
    Sample s;
    s.snr_db = get<double>(is);
    s.K = get<std::uint32_t>(is);
    s.y = get_complex(is, ds.M());
    s.x = get_complex(is, ds.N());
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

CMat measurements(const Dataset& ds, Index begin, Index end) {
  if (end < 0) end = ds.size();
  CMat Y(ds.M(), end - begin);
  for (Index i = begin; i < end; ++i) Y.col(i - begin) = ds.samples[static_cast<std::size_t>(i)].y;
  return Y;
}

CMat ground_truths(const Dataset& ds, Index begin, Index end) {
  if (end < 0) end = ds.size();
  CMat X(ds.N(), end - begin);
  for (Index i = begin; i < end; ++i) X.col(i - begin) = ds.samples[static_cast<std::size_t>(i)].x;
  return X;
}

}  // namespace thadmm
