#pragma once

// Extreme-value statistics: the centering m_N, the Z_N statistic, recentred
// maxima and a few distributional diagnostics for comparing resolutions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "membrane/batch.hpp"
#include "membrane/error.hpp"
#include "membrane/lattice.hpp"

namespace membrane::extremes {

/// m_N = (1/π) log N − (3/(16π)) log log N.
inline double centering(int n) {
  if (n < 3) throw PreconditionError("centering: n must be at least 3");
  const double l = std::log(double(n));
  return l / M_PI - 3.0 / (16.0 * M_PI) * std::log(l);
}

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      c_ += (sum_ - t) + x;
    else
      c_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + c_; }

 private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

/// √8 Σ_v (log N − πψ_v) e^{−8(log N − πψ_v)} over the box sites.
inline double z_statistic(const lattice::Field& f) {
  const int n = f.grid().n();
  if (n < 2) throw PreconditionError("z_statistic: n must be at least 2");
  const double l = std::log(double(n));
  const auto& grid = f.grid();
  CompensatedSum s;
  for (std::size_t k = 0; k < grid.site_count(); ++k) {
    const double a = l - M_PI * f(grid.site(k));
    s.add(a * std::exp(-8.0 * a));
  }
  return std::sqrt(8.0) * s.value();
}

struct FieldMax {
  double value = 0.0;
  lattice::Site site{};
};

/// Max over box sites; ties go to the lexicographically first site.
inline FieldMax field_max(const lattice::Field& f) {
  const auto& grid = f.grid();
  FieldMax m{-std::numeric_limits<double>::infinity(), {}};
  for (std::size_t k = 0; k < grid.site_count(); ++k) {
    const lattice::Site v = grid.site(k);
    const double x = f(v);
    if (x > m.value) m = {x, v};
  }
  return m;
}

inline SampleSummary summarize(const lattice::Field& f, std::uint64_t index) {
  const FieldMax m = field_max(f);
  return {index, m.value, m.site, z_statistic(f)};
}

/// M − m_N per sample.
inline std::vector<double> recentred_max(const SampleBatch& batch) {
  if (batch.samples.empty()) throw PreconditionError("recentred_max: empty batch");
  const double m = centering(batch.grid.n());
  std::vector<double> out;
  out.reserve(batch.samples.size());
  for (const auto& s : batch.samples) out.push_back(s.max - m);
  return out;
}

/// Least-squares slope of log CCDF over the upper quartile, with plotting
/// positions (n+1−i)/(n+1) for the i-th smallest value (1-based).
inline double tail_slope(std::vector<double> values) {
  const std::size_t n = values.size();
  if (n < 100) throw PreconditionError("tail_slope: need at least 100 values");
  std::sort(values.begin(), values.end());
  if (!(values.back() > values.front())) throw PreconditionError("tail_slope: degenerate (constant) input");
  const std::size_t first = (3 * n) / 4;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t i = first; i < n; ++i) {
    const double x = values[i];
    const double y = std::log(double(n - i) / double(n + 1));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  const double den = double(m) * sxx - sx * sx;
  if (!(den > 0.0)) throw PreconditionError("tail_slope: degenerate upper quartile");
  return (double(m) * sxy - sx * sy) / den;
}

/// Two-sample Kolmogorov–Smirnov statistic sup |F_a − F_b|.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw PreconditionError("ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

/// Linear-interpolation quantile of sorted data.
inline double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw PreconditionError("quantile: empty sample");
  const double pos = p * double(sorted.size() - 1);
  const auto lo = std::size_t(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - double(lo)) * (sorted[hi] - sorted[lo]);
}

inline constexpr double kQuantileLevels[] = {0.05, 0.25, 0.5, 0.75, 0.95};

struct LevelStats {
  int n = 0;
  std::size_t count = 0;
  double centering = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  std::vector<double> quantiles;
  double mean_z = 0.0;
  double fraction_z_positive = 0.0;
  std::optional<double> tail_slope;  // needs ≥ 100 samples
  std::vector<double> recentred;
};

struct Histogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;
};

struct ExtremesReport {
  std::vector<LevelStats> levels;
  std::vector<double> ks_consecutive;
  std::vector<double> mean_difference_consecutive;
  std::vector<Histogram> histograms;
};

inline LevelStats level_stats(const SampleBatch& batch) {
  LevelStats s;
  s.n = batch.grid.n();
  s.count = batch.count();
  s.centering = centering(s.n);
  s.recentred = recentred_max(batch);
  CompensatedSum sum, zsum;
  std::size_t positive = 0;
  for (double v : s.recentred) sum.add(v);
  s.mean = sum.value() / double(s.count);
  CompensatedSum ss;
  for (double v : s.recentred) ss.add((v - s.mean) * (v - s.mean));
  s.variance = s.count > 1 ? ss.value() / double(s.count - 1) : 0.0;
  for (const auto& x : batch.samples) {
    zsum.add(x.z);
    positive += x.z > 0.0;
  }
  s.mean_z = zsum.value() / double(s.count);
  s.fraction_z_positive = double(positive) / double(s.count);
  std::vector<double> sorted = s.recentred;
  std::sort(sorted.begin(), sorted.end());
  for (double p : kQuantileLevels) s.quantiles.push_back(quantile(sorted, p));
  if (s.count >= 100 && sorted.back() > sorted.front()) s.tail_slope = tail_slope(sorted);
  return s;
}

/// Histograms over a common range so levels compare bin by bin.
inline std::vector<Histogram> histograms(const std::vector<LevelStats>& levels, int bins = 20) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& l : levels)
    for (double v : l.recentred) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  std::vector<Histogram> out;
  for (const auto& l : levels) {
    Histogram h;
    for (int b = 0; b <= bins; ++b) h.edges.push_back(lo + (hi - lo) * b / bins);
    h.counts.assign(std::size_t(bins), 0);
    for (double v : l.recentred) {
      auto b = std::size_t(std::floor((v - lo) / (hi - lo) * bins));
      h.counts[std::min(b, std::size_t(bins - 1))]++;
    }
    out.push_back(std::move(h));
  }
  return out;
}

/// Batches must be ordered by increasing n.
inline ExtremesReport extremes_report(const std::vector<SampleBatch>& batches) {
  ExtremesReport r;
  for (const auto& b : batches) r.levels.push_back(level_stats(b));
  for (std::size_t i = 1; i < r.levels.size(); ++i) {
    r.ks_consecutive.push_back(ks_distance(r.levels[i - 1].recentred, r.levels[i].recentred));
    r.mean_difference_consecutive.push_back(r.levels[i].mean - r.levels[i - 1].mean);
  }
  r.histograms = histograms(r.levels);
  return r;
}

inline nlohmann::json to_json(const ExtremesReport& r) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& l : r.levels) {
    nlohmann::json q = nlohmann::json::object();
    for (std::size_t i = 0; i < l.quantiles.size(); ++i) {
      std::ostringstream key;
      key << "q" << kQuantileLevels[i];
      q[key.str()] = l.quantiles[i];
    }
    levels.push_back({{"n", l.n},
                      {"count", l.count},
                      {"centering", l.centering},
                      {"mean_recentred_max", l.mean},
                      {"variance_recentred_max", l.variance},
                      {"quantiles", q},
                      {"mean_z", l.mean_z},
                      {"fraction_z_positive", l.fraction_z_positive},
                      {"tail_slope", l.tail_slope ? nlohmann::json(*l.tail_slope) : nlohmann::json(nullptr)},
                      {"tail_slope_reference", -8.0 * M_PI}});
  }
  return {{"levels", levels},
          {"ks_consecutive", r.ks_consecutive},
          {"mean_difference_consecutive", r.mean_difference_consecutive}};
}

inline std::string histogram_csv(const Histogram& h) {
  std::ostringstream os;
  os.precision(17);
  os << "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b) os << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.counts[b] << '\n';
  return os.str();
}

}  // namespace membrane::extremes
