#pragma once

// Fixed-length summary statistics of a point pattern: log count, a distance
// curve (L-function in 2-D, pair proportions in 1-D) and quadrat extremes and
// log-variance for several quadrat sizes.

#include <cstddef>
#include <span>
#include <vector>

#include "lgcpflow/pointproc.hpp"

namespace lgcpflow {

inline constexpr double kLogVarFloor = -30.0;

struct SummaryConfig {
  int dim = 2;
  int m = 40;
  double r_max = 0.2;
  std::vector<int> q_list{2, 3, 4, 5, 10};

  static SummaryConfig defaults(int dim, double window_measure = 1.0);
  void validate() const;

  // 1-D: m points from 0 to r_max inclusive. 2-D: the same grid with r = 0
  // dropped, since L(0) - 0 carries no information.
  std::vector<double> r_grid() const;
  std::size_t distance_block_size() const;
  std::size_t length() const;

  friend bool operator==(const SummaryConfig&, const SummaryConfig&) = default;
};

struct SummaryVector {
  std::vector<double> values;
  bool degenerate = false;  // set when a degenerate-input rule fired

  std::size_t size() const { return values.size(); }
};

struct DistanceCurve {
  std::vector<double> values;
  bool degenerate = false;
};

// L(r) - r from Ripley's K with translation edge correction on the unit
// square. Patterns with fewer than two points give zeros and the flag.
DistanceCurve l_function(const PointPattern& pattern, std::span<const double> r_grid);

// Fraction of unordered pairs with |a - b| <= r, per r.
DistanceCurve pair_proportion(const PointPattern& pattern, std::span<const double> r_grid);

struct QuadratStats {
  double p_max = 0.0;
  double p_min = 0.0;
  double p_logvar = kLogVarFloor;
};

// q intervals in 1-D, q x q squares in 2-D; unbiased variance of the
// per-cell proportions, floored at exp(-30) before the log.
QuadratStats quadrat_stats(const PointPattern& pattern, int q);

SummaryVector compose_summary(const PointPattern& pattern, const SummaryConfig& config);

class SummaryStandardizer {
 public:
  SummaryStandardizer() = default;
  SummaryStandardizer(std::vector<double> means, std::vector<double> sds);

  static SummaryStandardizer fit(std::span<const SummaryVector> bank);
  static SummaryStandardizer fit(std::span<const std::vector<double>> bank);
  static SummaryStandardizer identity(std::size_t length);

  SummaryVector apply(const SummaryVector& v) const;
  void apply_inplace(std::span<double> v) const;

  const std::vector<double>& means() const { return means_; }
  const std::vector<double>& sds() const { return sds_; }
  std::size_t size() const { return means_.size(); }

  friend bool operator==(const SummaryStandardizer&, const SummaryStandardizer&) = default;

 private:
  std::vector<double> means_;
  std::vector<double> sds_;
};

namespace kernels {

// Translation-corrected pair weights accumulated into the bins of an
// ascending r grid: out[k] = sum over ordered pairs i != j with d_ij <= r[k]
// of 1 / ((1 - |dx|)(1 - |dy|)). OpenMP over fixed row chunks, so results
// do not depend on the thread count.
std::vector<double> translation_pair_sums(std::span<const Point> points, std::span<const double> r_grid);

// Unordered 1-D pair counts with |a - b| <= r[k].
std::vector<double> pair_counts_1d(std::span<const Point> points, std::span<const double> r_grid);

}  // namespace kernels

namespace reference {

std::vector<double> translation_pair_sums(std::span<const Point> points, std::span<const double> r_grid);
std::vector<double> pair_counts_1d(std::span<const Point> points, std::span<const double> r_grid);

}  // namespace reference

}  // namespace lgcpflow
