#include <algorithm>
#include <cmath>
#include <numbers>

#include "lgcpflow/errors.hpp"
#include "lgcpflow/summaries.hpp"

namespace lgcpflow {

SummaryConfig SummaryConfig::defaults(int dim, double window_measure) {
  SummaryConfig c;
  c.dim = dim;
  c.m = 40;
  c.r_max = 0.2 * window_measure;
  if (dim == 1) {
    c.q_list = {2, 3, 4, 5, 10, 20};
  } else {
    c.q_list = {2, 3, 4, 5, 10};
  }
  c.validate();
  return c;
}

void SummaryConfig::validate() const {
  if (dim != 1 && dim != 2) throw DomainError("summary dimension must be 1 or 2");
  if (m < (dim == 2 ? 2 : 1)) throw DomainError("summary m too small");
  if (!(r_max > 0.0)) throw DomainError("r_max must be positive");
  for (int q : q_list)
    if (q < 2) throw DomainError("quadrat sizes must be >= 2");
}

std::vector<double> SummaryConfig::r_grid() const {
  std::vector<double> grid;
  if (m == 1) return {r_max};
  const double step = r_max / (m - 1);
  for (int k = dim == 2 ? 1 : 0; k < m; ++k) grid.push_back(k == m - 1 ? r_max : k * step);
  return grid;
}

std::size_t SummaryConfig::distance_block_size() const {
  return static_cast<std::size_t>(dim == 2 ? m - 1 : m);
}

std::size_t SummaryConfig::length() const {
  return 1 + distance_block_size() + 3 * q_list.size();
}

DistanceCurve l_function(const PointPattern& pattern, std::span<const double> r_grid) {
  if (pattern.dim != 2) throw DomainError("l_function needs a 2-D pattern");
  DistanceCurve out{std::vector<double>(r_grid.size(), 0.0), false};
  const std::size_t n = pattern.n();
  if (n < 2) {
    out.degenerate = true;
    return out;
  }
  if (!std::is_sorted(r_grid.begin(), r_grid.end())) throw DomainError("r grid must be ascending");
  const std::vector<double> sums = kernels::translation_pair_sums(pattern.points, r_grid);
  // lambda^2 |W| estimated by n (n - 1) / |W| with |W| = 1.
  const double norm = static_cast<double>(n) * static_cast<double>(n - 1);
  for (std::size_t k = 0; k < r_grid.size(); ++k) {
    const double k_hat = sums[k] / norm;
    out.values[k] = std::sqrt(k_hat / std::numbers::pi) - r_grid[k];
  }
  return out;
}

DistanceCurve pair_proportion(const PointPattern& pattern, std::span<const double> r_grid) {
  if (pattern.dim != 1) throw DomainError("pair_proportion needs a 1-D pattern");
  DistanceCurve out{std::vector<double>(r_grid.size(), 0.0), false};
  const std::size_t n = pattern.n();
  if (n < 2) {
    out.degenerate = true;
    return out;
  }
  const std::vector<double> counts = kernels::pair_counts_1d(pattern.points, r_grid);
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  for (std::size_t k = 0; k < r_grid.size(); ++k) out.values[k] = counts[k] / pairs;
  return out;
}

QuadratStats quadrat_stats(const PointPattern& pattern, int q) {
  if (q < 2) throw DomainError("quadrat size must be >= 2");
  const std::size_t n = pattern.n();
  if (n == 0) return {};
  const std::size_t cells = pattern.dim == 1 ? static_cast<std::size_t>(q)
                                             : static_cast<std::size_t>(q) * static_cast<std::size_t>(q);
  std::vector<double> counts(cells, 0.0);
  auto axis = [q](double v) {
    return static_cast<std::size_t>(std::clamp(static_cast<int>(std::floor(v * q)), 0, q - 1));
  };
  for (const auto& p : pattern.points) {
    std::size_t c = axis(p.x);
    if (pattern.dim == 2) c += axis(p.y) * static_cast<std::size_t>(q);
    counts[c] += 1.0;
  }
  QuadratStats s;
  s.p_max = 0.0;
  s.p_min = 1.0;
  double mean = 0.0;
  for (auto& c : counts) {
    c /= static_cast<double>(n);
    s.p_max = std::max(s.p_max, c);
    s.p_min = std::min(s.p_min, c);
    mean += c;
  }
  mean /= static_cast<double>(cells);
  double ss = 0.0;
  for (double c : counts) ss += (c - mean) * (c - mean);
  const double var = ss / static_cast<double>(cells - 1);
  s.p_logvar = std::log(std::max(var, std::exp(kLogVarFloor)));
  return s;
}

SummaryVector compose_summary(const PointPattern& pattern, const SummaryConfig& config) {
  config.validate();
  if (pattern.dim != config.dim) throw DomainError("summary config and pattern dimensions differ");
  SummaryVector out;
  out.values.reserve(config.length());
  const std::size_t n = pattern.n();
  out.degenerate = n == 0;
  out.values.push_back(std::log(static_cast<double>(std::max<std::size_t>(n, 1))));

  const std::vector<double> grid = config.r_grid();
  DistanceCurve curve = config.dim == 2 ? l_function(pattern, grid) : pair_proportion(pattern, grid);
  out.degenerate = out.degenerate || curve.degenerate;
  out.values.insert(out.values.end(), curve.values.begin(), curve.values.end());

  for (int q : config.q_list) {
    const QuadratStats s = quadrat_stats(pattern, q);
    out.values.push_back(s.p_max);
    out.values.push_back(s.p_min);
    out.values.push_back(s.p_logvar);
  }
  return out;
}

SummaryStandardizer::SummaryStandardizer(std::vector<double> means, std::vector<double> sds)
    : means_(std::move(means)), sds_(std::move(sds)) {
  if (means_.size() != sds_.size()) throw DomainError("standardizer means/sds length mismatch");
  for (double s : sds_)
    if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("standardizer sds must be positive");
}

SummaryStandardizer SummaryStandardizer::identity(std::size_t length) {
  return SummaryStandardizer(std::vector<double>(length, 0.0), std::vector<double>(length, 1.0));
}

SummaryStandardizer SummaryStandardizer::fit(std::span<const std::vector<double>> bank) {
  if (bank.size() < 2) throw DomainError("standardizer needs at least two vectors");
  const std::size_t len = bank.front().size();
  std::vector<double> mean(len, 0.0), sd(len, 0.0);
  for (const auto& v : bank) {
    if (v.size() != len) throw DomainError("bank vectors differ in length");
    for (std::size_t k = 0; k < len; ++k) mean[k] += v[k];
  }
  const double count = static_cast<double>(bank.size());
  for (auto& m : mean) m /= count;
  for (const auto& v : bank)
    for (std::size_t k = 0; k < len; ++k) sd[k] += (v[k] - mean[k]) * (v[k] - mean[k]);
  for (auto& s : sd) {
    s = std::sqrt(s / (count - 1.0));
    if (!(s > 0.0)) s = 1.0;
  }
  return SummaryStandardizer(std::move(mean), std::move(sd));
}

SummaryStandardizer SummaryStandardizer::fit(std::span<const SummaryVector> bank) {
  std::vector<std::vector<double>> rows;
  rows.reserve(bank.size());
  for (const auto& v : bank) rows.push_back(v.values);
  return fit(std::span<const std::vector<double>>(rows));
}

void SummaryStandardizer::apply_inplace(std::span<double> v) const {
  if (v.size() != means_.size()) throw DomainError("summary length does not match standardizer");
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = (v[k] - means_[k]) / sds_[k];
}

SummaryVector SummaryStandardizer::apply(const SummaryVector& v) const {
  SummaryVector out = v;
  apply_inplace(out.values);
  return out;
}

}  // namespace lgcpflow
