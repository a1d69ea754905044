#pragma once

// Recovery metrics for point estimates and credible intervals, and
// posterior-predictive zero-probability function envelopes.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "lgcpflow/pointproc.hpp"
#include "lgcpflow/posterior.hpp"

namespace lgcpflow {

// sqrt(sum (truth - estimate)^2 / (hi - lo)), with [lo, hi] the prior range.
double nrsse(std::span<const double> truths, std::span<const double> estimates, double bound_lo, double bound_hi);

// 1 - SS_res / SS_tot, SS_tot about the mean of the truths.
double r_squared(std::span<const double> truths, std::span<const double> estimates);

// Linear-interpolation quantile, h = (n - 1) p on the sorted sample.
double quantile(std::span<const double> sorted, double p);

// Equal-tailed interval at `level`.
std::pair<double, double> credible_interval(std::span<const double> draws, double level = 0.95);

struct DatasetRecovery {
  ThetaParams truth;
  ThetaParams mean;
  std::array<std::pair<double, double>, 3> ci95{};
};

struct RecoveryReport {
  std::vector<DatasetRecovery> datasets;
  std::array<double, 3> nrsse{};
  std::array<double, 3> r2{};

  std::size_t size() const { return datasets.size(); }
  // Needs at least two datasets and non-constant truths per parameter.
  static RecoveryReport build(std::vector<DatasetRecovery> datasets, const PriorBox& prior);
  // One row per dataset.
  void write_csv(std::ostream& out) const;
  void write_metrics(std::ostream& out) const;
};

DatasetRecovery summarize_posterior(const ThetaParams& truth, const PosteriorDraws& draws);

enum class EdgeMode {
  none,    // every admissible cell center is a reference location
  border,  // only centers at least r from the window boundary (minus sampling)
};

// Fraction of reference locations u with min_i |u - x_i| > r, per r.
std::vector<double> zpf_estimate(const PointPattern& pattern, const DomainMask& mask, std::span<const double> r_grid,
                                 EdgeMode edge = EdgeMode::none);

struct EnvelopeCurve {
  std::vector<double> r_grid;
  std::vector<double> observed;
  std::vector<double> sim_mean;
  std::vector<double> lo95;
  std::vector<double> hi95;

  std::size_t size() const { return r_grid.size(); }
  bool contains_observed(std::size_t k) const { return lo95[k] <= observed[k] && observed[k] <= hi95[k]; }
  double coverage() const;
  // CSV "r,observed,sim_mean,lo95,hi95".
  void write_csv(std::ostream& out) const;
};

inline constexpr long kMinEnvelopeSims = 100;

// Simulates n_sims patterns at theta (replicate i from stream i of seed) and
// returns pointwise mean and 2.5% / 97.5% quantiles of their ZPF curves.
EnvelopeCurve envelope(const ThetaParams& theta, const DomainMask& mask, const PointPattern& observed, long n_sims,
                       std::span<const double> r_grid, std::uint64_t seed, EdgeMode edge = EdgeMode::none);

std::vector<double> default_zpf_grid(int count = 20, double r_max = 0.1);

namespace reference {
std::vector<double> zpf_estimate(const PointPattern& pattern, const DomainMask& mask, std::span<const double> r_grid,
                                 EdgeMode edge = EdgeMode::none);
EnvelopeCurve envelope(const ThetaParams& theta, const DomainMask& mask, const PointPattern& observed, long n_sims,
                       std::span<const double> r_grid, std::uint64_t seed, EdgeMode edge = EdgeMode::none);
}  // namespace reference

}  // namespace lgcpflow
