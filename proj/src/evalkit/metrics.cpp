#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "lgcpflow/errors.hpp"
#include "lgcpflow/evalkit.hpp"

namespace lgcpflow {

double nrsse(std::span<const double> truths, std::span<const double> estimates, double bound_lo, double bound_hi) {
  if (truths.size() != estimates.size()) throw DomainError("nrsse: length mismatch");
  if (truths.empty()) throw DomainError("nrsse: empty input");
  if (!(bound_hi > bound_lo)) throw DomainError("nrsse: bound_hi must exceed bound_lo");
  double ss = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const double d = truths[i] - estimates[i];
    ss += d * d;
  }
  return std::sqrt(ss / (bound_hi - bound_lo));
}

double r_squared(std::span<const double> truths, std::span<const double> estimates) {
  if (truths.size() != estimates.size()) throw DomainError("r_squared: length mismatch");
  if (truths.size() < 2) throw DomainError("r_squared: need at least two values");
  double mean = 0.0;
  for (double t : truths) mean += t;
  mean /= static_cast<double>(truths.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    ss_tot += (truths[i] - mean) * (truths[i] - mean);
    ss_res += (truths[i] - estimates[i]) * (truths[i] - estimates[i]);
  }
  if (ss_tot == 0.0) throw DomainError("r_squared: truths are constant");
  return 1.0 - ss_res / ss_tot;
}

double quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile of an empty sample");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::pair<double, double> credible_interval(std::span<const double> draws, double level) {
  if (draws.empty()) throw DomainError("credible_interval: no draws");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("credible_interval: level must lie in (0, 1)");
  std::vector<double> s(draws.begin(), draws.end());
  std::sort(s.begin(), s.end());
  const double tail = 0.5 * (1.0 - level);
  return {quantile(s, tail), quantile(s, 1.0 - tail)};
}

DatasetRecovery summarize_posterior(const ThetaParams& truth, const PosteriorDraws& draws) {
  if (draws.size() == 0) throw DomainError("summarize_posterior: no draws");
  DatasetRecovery d;
  d.truth = truth;
  d.mean = draws.mean();
  for (std::size_t k = 0; k < 3; ++k) d.ci95[k] = credible_interval(draws.component(k), 0.95);
  return d;
}

RecoveryReport RecoveryReport::build(std::vector<DatasetRecovery> datasets, const PriorBox& prior) {
  if (datasets.empty()) throw DomainError("recovery report needs at least one dataset");
  RecoveryReport rep;
  rep.datasets = std::move(datasets);
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<double> t, e;
    for (const auto& d : rep.datasets) {
      t.push_back(d.truth.as_array()[k]);
      e.push_back(d.mean.as_array()[k]);
    }
    rep.nrsse[k] = lgcpflow::nrsse(t, e, prior.lo[k], prior.hi[k]);
    rep.r2[k] = lgcpflow::r_squared(t, e);
  }
  return rep;
}

void RecoveryReport::write_csv(std::ostream& out) const {
  static const char* names[] = {"mu", "rho", "sigma2"};
  out << "dataset";
  for (const char* n : names) out << ',' << n << "_true," << n << "_mean," << n << "_lo95," << n << "_hi95";
  out << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    const auto& d = datasets[i];
    out << i;
    for (std::size_t k = 0; k < 3; ++k)
      out << ',' << d.truth.as_array()[k] << ',' << d.mean.as_array()[k] << ',' << d.ci95[k].first << ','
          << d.ci95[k].second;
    out << '\n';
  }
}

void RecoveryReport::write_metrics(std::ostream& out) const {
  static const char* names[] = {"mu", "rho", "sigma2"};
  out << "parameter,nrsse,r2,datasets\n" << std::setprecision(10);
  for (std::size_t k = 0; k < 3; ++k) out << names[k] << ',' << nrsse[k] << ',' << r2[k] << ',' << size() << '\n';
}

}  // namespace lgcpflow
