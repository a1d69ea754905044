#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>

#include "lgcpflow/errors.hpp"
#include "lgcpflow/evalkit.hpp"

namespace lgcpflow {

namespace {

void check_grid(std::span<const double> r_grid) {
  for (double r : r_grid)
    if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("zpf: r values must be finite and >= 0");
}

std::vector<Point> reference_sites(const DomainMask& mask) {
  std::vector<Point> out;
  out.reserve(mask.admissible_count());
  for (std::size_t c = 0; c < mask.size(); ++c)
    if (mask.admissible(c)) out.push_back(mask.cell_center(c));
  if (out.empty()) throw DomainError("zpf: mask has no admissible cells");
  return out;
}

double boundary_distance(const Point& u, int dim) {
  double d = std::min(u.x, 1.0 - u.x);
  if (dim == 2) d = std::min({d, u.y, 1.0 - u.y});
  return d;
}

std::vector<double> curve_from_distances(std::span<const Point> sites, std::span<const double> nearest, int dim,
                                         std::span<const double> r_grid, EdgeMode edge) {
  std::vector<double> out(r_grid.size());
  if (edge == EdgeMode::none) {
    std::vector<double> sorted(nearest.begin(), nearest.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < r_grid.size(); ++k) {
      const auto le = std::upper_bound(sorted.begin(), sorted.end(), r_grid[k]) - sorted.begin();
      out[k] = static_cast<double>(sorted.size() - static_cast<std::size_t>(le)) / static_cast<double>(sorted.size());
    }
    return out;
  }
  for (std::size_t k = 0; k < r_grid.size(); ++k) {
    std::size_t used = 0, missed = 0;
    for (std::size_t i = 0; i < sites.size(); ++i) {
      if (boundary_distance(sites[i], dim) < r_grid[k]) continue;
      ++used;
      missed += nearest[i] > r_grid[k];
    }
    if (used == 0) throw DomainError("zpf: no reference location is " + std::to_string(r_grid[k]) + " from the boundary");
    out[k] = static_cast<double>(missed) / static_cast<double>(used);
  }
  return out;
}

}  // namespace

std::vector<double> zpf_estimate(const PointPattern& pattern, const DomainMask& mask, std::span<const double> r_grid,
                                 EdgeMode edge) {
  check_grid(r_grid);
  if (pattern.dim != mask.dim()) throw DomainError("zpf: pattern and mask dimensions differ");
  const auto sites = reference_sites(mask);
  std::vector<Point> pts = pattern.points;
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.x < b.x; });

  std::vector<double> nearest(sites.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const Point u = sites[i];
    double best2 = std::numeric_limits<double>::infinity();
    const auto start = std::lower_bound(pts.begin(), pts.end(), u.x, [](const Point& p, double x) { return p.x < x; });
    for (auto it = start; it != pts.end(); ++it) {
      const double dx = it->x - u.x;
      if (dx * dx >= best2) break;
      const double dy = it->y - u.y;
      best2 = std::min(best2, dx * dx + dy * dy);
    }
    for (auto it = start; it != pts.begin();) {
      --it;
      const double dx = u.x - it->x;
      if (dx * dx >= best2) break;
      const double dy = it->y - u.y;
      best2 = std::min(best2, dx * dx + dy * dy);
    }
    nearest[i] = std::sqrt(best2);
  }
  return curve_from_distances(sites, nearest, mask.dim(), r_grid, edge);
}

namespace reference {

std::vector<double> zpf_estimate(const PointPattern& pattern, const DomainMask& mask, std::span<const double> r_grid,
                                 EdgeMode edge) {
  check_grid(r_grid);
  if (pattern.dim != mask.dim()) throw DomainError("zpf: pattern and mask dimensions differ");
  const auto sites = reference_sites(mask);
  std::vector<double> nearest(sites.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < sites.size(); ++i)
    for (const Point& p : pattern.points)
      nearest[i] = std::min(nearest[i], std::hypot(p.x - sites[i].x, p.y - sites[i].y));
  return curve_from_distances(sites, nearest, mask.dim(), r_grid, edge);
}

}  // namespace reference

std::vector<double> default_zpf_grid(int count, double r_max) {
  if (count < 1 || !(r_max > 0.0)) throw DomainError("zpf grid needs count >= 1 and r_max > 0");
  std::vector<double> r(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) r[static_cast<std::size_t>(k)] = r_max * (k + 1) / count;
  return r;
}

double EnvelopeCurve::coverage() const {
  if (r_grid.empty()) return 0.0;
  std::size_t in = 0;
  for (std::size_t k = 0; k < size(); ++k) in += contains_observed(k);
  return static_cast<double>(in) / static_cast<double>(size());
}

void EnvelopeCurve::write_csv(std::ostream& out) const {
  out << "r,observed,sim_mean,lo95,hi95\n" << std::setprecision(17);
  for (std::size_t k = 0; k < size(); ++k)
    out << r_grid[k] << ',' << observed[k] << ',' << sim_mean[k] << ',' << lo95[k] << ',' << hi95[k] << '\n';
}

namespace {

EnvelopeCurve assemble(std::span<const double> r_grid, std::vector<double> observed,
                       const std::vector<std::vector<double>>& sims) {
  EnvelopeCurve c;
  c.r_grid.assign(r_grid.begin(), r_grid.end());
  c.observed = std::move(observed);
  const std::size_t R = r_grid.size();
  c.sim_mean.assign(R, 0.0);
  c.lo95.resize(R);
  c.hi95.resize(R);
  std::vector<double> col(sims.size());
  for (std::size_t k = 0; k < R; ++k) {
    for (std::size_t i = 0; i < sims.size(); ++i) col[i] = sims[i][k];
    double s = 0.0;
    for (double v : col) s += v;
    c.sim_mean[k] = s / static_cast<double>(col.size());
    std::sort(col.begin(), col.end());
    c.lo95[k] = quantile(col, 0.025);
    c.hi95[k] = quantile(col, 0.975);
  }
  return c;
}

void check_envelope_args(const DomainMask& mask, const PointPattern& observed, long n_sims) {
  if (n_sims < kMinEnvelopeSims) throw DomainError("envelope needs at least 100 simulations");
  if (observed.dim != mask.dim()) throw DomainError("envelope: pattern and mask dimensions differ");
}

}  // namespace

EnvelopeCurve envelope(const ThetaParams& theta, const DomainMask& mask, const PointPattern& observed, long n_sims,
                       std::span<const double> r_grid, std::uint64_t seed, EdgeMode edge) {
  check_envelope_args(mask, observed, n_sims);
  auto obs = lgcpflow::zpf_estimate(observed, mask, r_grid, edge);
  const LgcpSimulator sim(theta, mask);
  std::vector<std::vector<double>> curves(static_cast<std::size_t>(n_sims));
  std::string failure;
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < n_sims; ++i) {
    try {
      const auto p = sim.simulate(derive_seed(seed, static_cast<std::uint64_t>(i)));
      curves[static_cast<std::size_t>(i)] = lgcpflow::zpf_estimate(p, mask, r_grid, edge);
    } catch (const std::exception& e) {
#pragma omp critical
      if (failure.empty()) failure = e.what();
    }
  }
  if (!failure.empty()) throw ResourceError("envelope simulation failed: " + failure);
  return assemble(r_grid, std::move(obs), curves);
}

namespace reference {

EnvelopeCurve envelope(const ThetaParams& theta, const DomainMask& mask, const PointPattern& observed, long n_sims,
                       std::span<const double> r_grid, std::uint64_t seed, EdgeMode edge) {
  check_envelope_args(mask, observed, n_sims);
  auto obs = reference::zpf_estimate(observed, mask, r_grid, edge);
  const LgcpSimulator sim(theta, mask);
  std::vector<std::vector<double>> curves;
  for (long i = 0; i < n_sims; ++i)
    curves.push_back(reference::zpf_estimate(sim.simulate(derive_seed(seed, static_cast<std::uint64_t>(i))), mask,
                                             r_grid, edge));
  return assemble(r_grid, std::move(obs), curves);
}

}  // namespace reference

}  // namespace lgcpflow
