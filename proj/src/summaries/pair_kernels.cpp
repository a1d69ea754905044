#include <algorithm>
#include <cmath>

#include "lgcpflow/summaries.hpp"

namespace lgcpflow {

namespace {

// Index of the first grid value >= d, or grid size when d exceeds them all.
std::size_t first_bin(std::span<const double> r_grid, double d) {
  return static_cast<std::size_t>(std::lower_bound(r_grid.begin(), r_grid.end(), d) - r_grid.begin());
}

void cumulate(std::vector<double>& bins) {
  for (std::size_t k = 1; k < bins.size(); ++k) bins[k] += bins[k - 1];
}

constexpr std::size_t kRowChunks = 64;

}  // namespace

namespace reference {

std::vector<double> translation_pair_sums(std::span<const Point> points, std::span<const double> r_grid) {
  std::vector<double> out(r_grid.size(), 0.0);
  const double r_top = r_grid.empty() ? 0.0 : r_grid.back();
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (i == j) continue;
      const double dx = points[i].x - points[j].x;
      const double dy = points[i].y - points[j].y;
      const double d = std::sqrt(dx * dx + dy * dy);
      if (d > r_top) continue;
      const double w = 1.0 / ((1.0 - std::abs(dx)) * (1.0 - std::abs(dy)));
      for (std::size_t k = 0; k < r_grid.size(); ++k)
        if (d <= r_grid[k]) out[k] += w;
    }
  }
  return out;
}

std::vector<double> pair_counts_1d(std::span<const Point> points, std::span<const double> r_grid) {
  std::vector<double> out(r_grid.size(), 0.0);
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      const double d = std::abs(points[i].x - points[j].x);
      for (std::size_t k = 0; k < r_grid.size(); ++k)
        if (d <= r_grid[k]) out[k] += 1.0;
    }
  return out;
}

}  // namespace reference

namespace kernels {

std::vector<double> translation_pair_sums(std::span<const Point> points, std::span<const double> r_grid) {
  const std::size_t n = points.size();
  const std::size_t bins = r_grid.size();
  if (bins == 0 || n < 2) return std::vector<double>(bins, 0.0);
  const double r_top = r_grid.back();
  const std::size_t chunks = std::min(kRowChunks, n);
  std::vector<double> partial(chunks * (bins + 1), 0.0);

  // Unordered pairs i < j; each carries weight twice in the ordered sum.
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t c = 0; c < chunks; ++c) {
    double* hist = partial.data() + c * (bins + 1);
    for (std::size_t i = c; i < n; i += chunks) {
      const Point pi = points[i];
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = pi.x - points[j].x;
        const double dy = pi.y - points[j].y;
        const double d2 = dx * dx + dy * dy;
        if (d2 > r_top * r_top) continue;
        const double d = std::sqrt(d2);
        const std::size_t b = first_bin(r_grid, d);
        hist[b] += 2.0 / ((1.0 - std::abs(dx)) * (1.0 - std::abs(dy)));
      }
    }
  }

  std::vector<double> out(bins, 0.0);
  for (std::size_t c = 0; c < chunks; ++c)
    for (std::size_t k = 0; k < bins; ++k) out[k] += partial[c * (bins + 1) + k];
  cumulate(out);
  return out;
}

std::vector<double> pair_counts_1d(std::span<const Point> points, std::span<const double> r_grid) {
  std::vector<double> xs(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) xs[i] = points[i].x;
  std::sort(xs.begin(), xs.end());
  std::vector<double> out(r_grid.size(), 0.0);
  // Two-pointer sweep per radius over the sorted coordinates.
  for (std::size_t k = 0; k < r_grid.size(); ++k) {
    const double r = r_grid[k];
    std::size_t lo = 0;
    double count = 0.0;
    for (std::size_t hi = 0; hi < xs.size(); ++hi) {
      while (xs[hi] - xs[lo] > r) ++lo;
      count += static_cast<double>(hi - lo);
    }
    out[k] = count;
  }
  return out;
}

}  // namespace kernels

}  // namespace lgcpflow
