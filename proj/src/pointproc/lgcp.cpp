#include <cmath>
#include <sstream>

#include "lgcpflow/errors.hpp"
#include "lgcpflow/pointproc.hpp"

namespace lgcpflow {

LgcpSimulator::LgcpSimulator(const ThetaParams& theta, DomainMask mask, double count_cap)
    : theta_(theta),
      mask_(std::move(mask)),
      count_cap_(count_cap),
      sampler_(mask_.window(), theta.rho, theta.sigma2) {
  if (theta.coords != Coords::constrained) throw DomainError("LGCP simulation expects constrained theta");
  if (!std::isfinite(theta.mu)) throw DomainError("mu must be finite");
}

PointPattern LgcpSimulator::simulate(std::uint64_t seed) const { return simulate(seed, nullptr); }

PointPattern LgcpSimulator::simulate(std::uint64_t seed, GridField* field_out) const {
  Rng rng = make_rng(seed);
  std::vector<double> z = sampler_.draw(theta_.mu, rng);

  const Window& w = mask_.window();
  const double area = w.cell_area();
  const double width = w.cell_width();
  const std::size_t cells = mask_.size();

  std::vector<double> rate(cells, 0.0);
  double total = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    if (!mask_.admissible(c)) continue;
    rate[c] = std::exp(z[c]) * area;
    total += rate[c];
  }
  if (!(total <= count_cap_)) {
    std::ostringstream msg;
    msg << "expected point count " << total << " exceeds cap " << count_cap_;
    throw ResourceError(msg.str());
  }

  PointPattern pattern;
  pattern.dim = w.dim;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t c = 0; c < cells; ++c) {
    if (rate[c] <= 0.0) continue;
    std::poisson_distribution<long> pois(rate[c]);
    const long k = pois(rng);
    const Point o = mask_.cell_origin(c);
    for (long i = 0; i < k; ++i) {
      Point p{o.x + unit(rng) * width, 0.0};
      if (w.dim == 2) p.y = o.y + unit(rng) * width;
      // Keep the point inside its own cell under rounding.
      if (mask_.cell_of(p) != c) p = mask_.cell_center(c);
      pattern.points.push_back(p);
    }
  }
  if (field_out) *field_out = GridField{mask_, std::move(z)};
  return pattern;
}

PointPattern simulate_lgcp(const ThetaParams& theta, const DomainMask& mask, std::uint64_t seed,
                           double count_cap) {
  return LgcpSimulator(theta, mask, count_cap).simulate(seed);
}

double expected_count(const ThetaParams& theta, const DomainMask& mask) {
  return std::exp(theta.mu + 0.5 * theta.sigma2) * mask.admissible_area();
}

std::vector<int> cell_counts(const PointPattern& pattern, const DomainMask& mask) {
  if (pattern.dim != mask.dim()) throw DomainError("pattern and mask dimensions differ");
  std::vector<int> counts(mask.size(), 0);
  for (const auto& p : pattern.points) {
    const std::size_t c = mask.cell_of(p);
    if (!mask.admissible(c)) {
      std::ostringstream msg;
      msg << "point (" << p.x << ", " << p.y << ") lies in excluded cell " << c;
      throw DomainError(msg.str());
    }
    ++counts[c];
  }
  return counts;
}

double grid_loglik(const GridField& field, const PointPattern& pattern) {
  const DomainMask& mask = field.mask;
  if (field.values.size() != mask.size()) throw DomainError("field size does not match mask");
  if (pattern.dim != mask.dim()) throw DomainError("pattern and field dimensions differ");
  const double area = mask.window().cell_area();
  double ll = 0.0;
  for (std::size_t c = 0; c < mask.size(); ++c)
    if (mask.admissible(c)) ll -= std::exp(field.values[c]) * area;
  for (const auto& p : pattern.points) {
    const std::size_t c = mask.cell_of(p);
    if (!mask.admissible(c)) throw DomainError("point lies in an excluded cell");
    ll += field.values[c];
  }
  return ll;
}

double grid_loglik(std::span<const double> field, std::span<const int> counts, const DomainMask& mask) {
  const double area = mask.window().cell_area();
  double ll = 0.0;
  for (std::size_t c = 0; c < mask.size(); ++c) {
    if (!mask.admissible(c)) continue;
    ll += static_cast<double>(counts[c]) * field[c] - std::exp(field[c]) * area;
  }
  return ll;
}

}  // namespace lgcpflow
