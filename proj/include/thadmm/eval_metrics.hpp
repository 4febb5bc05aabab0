#pragma once

// Peak-based detection rate, angular RMSE and NMSE over SNR sweeps. Bin
// neighbourhoods and target-to-peak distances are circular.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "thadmm/array_geometry.hpp"
#include "thadmm/datagen.hpp"
#include "thadmm/types.hpp"

namespace thadmm {

struct PeakSpectrum {
  std::vector<Index> indices;  // strictly increasing
  std::vector<double> values;  // |x_hat| at each peak
};

/// Circular local maxima of |x_hat|. A flat run of equal magnitudes counts
/// once, at its leftmost bin, when both bins bounding the run are lower.
PeakSpectrum find_peaks(const CVec& x_hat);

/// Circular index distance on an N-bin grid.
Index bin_distance(Index a, Index b, Index N);

struct TargetMatch {
  Index q = 0;                      // ground-truth bin
  std::vector<Index> candidates;    // peaks within delta1 bins
  std::vector<Index> accepted;      // candidates with peak/|x(q)| >= delta2
  std::optional<Index> matched;     // closest accepted bin, ties to the lower index

  bool detected() const { return !accepted.empty(); }
};

struct MatchResult {
  std::vector<TargetMatch> targets;

  Index detected_count() const;
};

MatchResult match_targets(const CVec& x, const PeakSpectrum& peaks, Index delta1, double delta2);

/// Fraction of the K ground-truth targets that were detected.
double detection_rate(const MatchResult& m, Index K);

/// Mean squared angular error (deg^2) over one vector's detected targets;
/// nullopt when nothing was detected.
std::optional<double> vector_angular_mse(const MatchResult& m, const FrequencyGrid<double>& grid, double gamma);

/// sqrt of the mean, over vectors with at least one detection, of the
/// per-vector mean squared angular error. nullopt when no vector qualifies.
std::optional<double> angular_rmse(const std::vector<MatchResult>& matches, const FrequencyGrid<double>& grid, double gamma);

struct EvalParams {
  Index delta1 = 2;
  double delta2 = 0.4;
};

struct SnrMetrics {
  double snr_db = 0.0;
  double detection_rate = 0.0;
  std::optional<double> rmse_deg;
  double nmse_db = 0.0;
  Index n_vectors = 0;
  Index n_rmse_vectors = 0;
};

struct MetricsReport {
  std::string method;
  std::vector<SnrMetrics> levels;  // ascending SNR

  const SnrMetrics* at(double snr_db) const;
};

/// Estimates for every column of Y (M x count) as columns of an N x count matrix.
using Estimator = std::function<CMat(const CMat& Y)>;

MetricsReport evaluate_predictions(const std::string& method, const CMat& X_hat, const Dataset& test_set,
                                   const FrequencyGrid<double>& grid, double gamma, const EvalParams& params);

MetricsReport evaluate_sweep(const std::string& method, const Estimator& estimator, const Dataset& test_set,
                             const FrequencyGrid<double>& grid, double gamma, const EvalParams& params);

/// snr_db,method,detection_rate,rmse_deg,nmse_db,n_vectors (rmse empty when absent).
void write_results_csv(const std::vector<MetricsReport>& reports, const std::string& path);
std::string results_csv(const std::vector<MetricsReport>& reports);

/// bin,freq,angle_deg,truth,<method>... magnitudes for one sample.
void write_spectra_csv(const std::string& path, const FrequencyGrid<double>& grid, double gamma, const CVec& truth,
                       const std::vector<std::pair<std::string, CVec>>& estimates);

}  // namespace thadmm
