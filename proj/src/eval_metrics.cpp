#include "thadmm/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace thadmm {

PeakSpectrum find_peaks(const CVec& x_hat) {
  PeakSpectrum pk;
  const Index n = x_hat.size();
  if (n == 0) return pk;
  const RVec mag = x_hat.cwiseAbs();
  auto at = [&](Index i) { return mag[((i % n) + n) % n]; };

  // Runs of equal magnitude; a run containing every bin has no peak.
  for (Index s = 0; s < n; ++s) {
    const double v = mag[s];
    if (!(v > 0.0) || at(s - 1) == v) continue;  // not the start of a run
    Index len = 1;
    while (len < n && at(s + len) == v) ++len;
    if (len == n) continue;
    if (at(s - 1) < v && at(s + len) < v) {
      pk.indices.push_back(s);
      pk.values.push_back(v);
    }
  }
  return pk;
}

Index bin_distance(Index a, Index b, Index N) {
  const Index d = std::abs(a - b) % N;
  return std::min(d, N - d);
}

Index MatchResult::detected_count() const {
  return static_cast<Index>(std::count_if(targets.begin(), targets.end(), [](const TargetMatch& t) { return t.detected(); }));
}

MatchResult match_targets(const CVec& x, const PeakSpectrum& peaks, Index delta1, double delta2) {
  if (delta1 < 0) throw InvalidArgument("match_targets: delta1 must be non-negative");
  if (!(delta2 > 0.0 && delta2 <= 1.0)) throw InvalidArgument("match_targets: delta2 must lie in (0, 1]");
  const Index n = x.size();
  MatchResult out;
  for (Index q = 0; q < n; ++q) {
    const double truth = std::abs(x[q]);
    if (truth == 0.0) continue;
    TargetMatch t;
    t.q = q;
    Index best_dist = n + 1;
    for (std::size_t p = 0; p < peaks.indices.size(); ++p) {
      const Index j = peaks.indices[p];
      const Index d = bin_distance(j, q, n);
      if (d > delta1) continue;
      t.candidates.push_back(j);
      if (peaks.values[p] / truth >= delta2) {
        t.accepted.push_back(j);
        // Peaks are visited in increasing index order, so strict < keeps the lower index on ties.
        if (d < best_dist) {
          best_dist = d;
          t.matched = j;
        }
      }
    }
    out.targets.push_back(std::move(t));
  }
  return out;
}

double detection_rate(const MatchResult& m, Index K) {
  if (K < 1) throw InvalidArgument("detection_rate: K must be at least 1");
  return static_cast<double>(m.detected_count()) / static_cast<double>(K);
}

std::optional<double> vector_angular_mse(const MatchResult& m, const FrequencyGrid<double>& grid, double gamma) {
  double sum = 0.0;
  Index count = 0;
  for (const TargetMatch& t : m.targets) {
    if (!t.matched) continue;
    const double err = freq_to_angle(grid.freqs[t.q], gamma) - freq_to_angle(grid.freqs[*t.matched], gamma);
    sum += err * err;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

std::optional<double> angular_rmse(const std::vector<MatchResult>& matches, const FrequencyGrid<double>& grid, double gamma) {
  double sum = 0.0;
  Index count = 0;
  for (const MatchResult& m : matches) {
    if (const auto e = vector_angular_mse(m, grid, gamma)) {
      sum += *e;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return std::sqrt(sum / static_cast<double>(count));
}

const SnrMetrics* MetricsReport::at(double snr_db) const {
  for (const SnrMetrics& l : levels)
    if (l.snr_db == snr_db) return &l;
  return nullptr;
}

MetricsReport evaluate_predictions(const std::string& method, const CMat& X_hat, const Dataset& test_set,
                                   const FrequencyGrid<double>& grid, double gamma, const EvalParams& params) {
  if (X_hat.cols() != test_set.size() || X_hat.rows() != test_set.N())
    throw InvalidArgument("evaluate_predictions: estimate shape mismatch");

  struct Accum {
    double pd_sum = 0.0;
    double nmse_sum = 0.0;
    Index n = 0;
    std::vector<MatchResult> matches;
  };
  std::map<double, Accum> by_snr;
  for (Index i = 0; i < test_set.size(); ++i) {
    const Sample& s = test_set.samples[static_cast<std::size_t>(i)];
    const CVec xh = X_hat.col(i);
    MatchResult m = match_targets(s.x, find_peaks(xh), params.delta1, params.delta2);
    Accum& a = by_snr[s.snr_db];
    a.pd_sum += detection_rate(m, static_cast<Index>(m.targets.size()));
    a.nmse_sum += (xh - s.x).squaredNorm() / s.x.squaredNorm();
    ++a.n;
    a.matches.push_back(std::move(m));
  }

  MetricsReport rep{method, {}};
  for (auto& [snr, a] : by_snr) {
    SnrMetrics l;
    l.snr_db = snr;
    l.n_vectors = a.n;
    l.detection_rate = a.pd_sum / static_cast<double>(a.n);
    const double mean_nmse = a.nmse_sum / static_cast<double>(a.n);
    l.nmse_db = mean_nmse > 0.0 ? std::max(10.0 * std::log10(mean_nmse), -100.0) : -100.0;
    l.rmse_deg = angular_rmse(a.matches, grid, gamma);
    l.n_rmse_vectors = static_cast<Index>(std::count_if(a.matches.begin(), a.matches.end(),
                                                        [](const MatchResult& m) { return m.detected_count() > 0; }));
    rep.levels.push_back(l);
  }
  return rep;
}

MetricsReport evaluate_sweep(const std::string& method, const Estimator& estimator, const Dataset& test_set,
                             const FrequencyGrid<double>& grid, double gamma, const EvalParams& params) {
  return evaluate_predictions(method, estimator(measurements(test_set)), test_set, grid, gamma, params);
}

std::string results_csv(const std::vector<MetricsReport>& reports) {
  std::ostringstream os;
  os << "snr_db,method,detection_rate,rmse_deg,nmse_db,n_vectors\n" << std::setprecision(10);
  for (const MetricsReport& r : reports) {
    for (const SnrMetrics& l : r.levels) {
      os << l.snr_db << ',' << r.method << ',' << l.detection_rate << ',';
      if (l.rmse_deg) os << *l.rmse_deg;
      os << ',' << l.nmse_db << ',' << l.n_vectors << '\n';
    }
  }
  return os.str();
}

void write_results_csv(const std::vector<MetricsReport>& reports, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << results_csv(reports);
  if (!os) throw IoError("write to '" + path + "' failed");
}

void write_spectra_csv(const std::string& path, const FrequencyGrid<double>& grid, double gamma, const CVec& truth,
                       const std::vector<std::pair<std::string, CVec>>& estimates) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << "bin,freq,angle_deg,truth";
  for (const auto& [name, _] : estimates) os << ',' << name;
  os << '\n' << std::setprecision(10);
  for (Index n = 0; n < grid.N; ++n) {
    os << n << ',' << grid.freqs[n] << ',' << freq_to_angle(grid.freqs[n], gamma) << ',' << std::abs(truth[n]);
    for (const auto& [_, est] : estimates) os << ',' << std::abs(est[n]);
    os << '\n';
  }
  if (!os) throw IoError("write to '" + path + "' failed");
}

}  // namespace thadmm
