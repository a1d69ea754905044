#include <algorithm>
#include <cmath>
#include <limits>

#include "lgcpflow/errors.hpp"
#include "lgcpflow/pointproc.hpp"

namespace lgcpflow {

PriorBox PriorBox::for_window_measure(double window_measure) {
  PriorBox box;
  box.hi[1] = 0.15 * window_measure;
  return box;
}

bool PriorBox::strictly_contains(const ThetaParams& theta) const {
  const auto v = theta.as_array();
  for (std::size_t k = 0; k < 3; ++k)
    if (!(v[k] > lo[k] && v[k] < hi[k])) return false;
  return true;
}

ThetaParams sample_prior(const PriorBox& box, Rng& rng) {
  std::array<double, 3> v{};
  for (std::size_t k = 0; k < 3; ++k) {
    // uniform_open keeps draws off the open lower bounds.
    v[k] = box.lo[k] + box.width(k) * uniform_open(rng);
    if (!(v[k] < box.hi[k])) v[k] = std::nextafter(box.hi[k], box.lo[k]);
  }
  return ThetaParams::from_array(v, Coords::constrained);
}

ThetaParams sample_prior(const Window& window, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return sample_prior(PriorBox::for_window_measure(window.measure()), rng);
}

namespace {

double logit(double p) { return std::log(p) - std::log1p(-p); }

double inv_logit(double u) {
  return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
}

ThetaParams unconstrain(const ThetaParams& theta, const PriorBox& box, bool clamp) {
  if (theta.coords != Coords::constrained) throw DomainError("to_unconstrained expects constrained theta");
  auto v = theta.as_array();
  for (std::size_t k = 0; k < 3; ++k) {
    double unit = (v[k] - box.lo[k]) / box.width(k);
    if (clamp) {
      if (!std::isfinite(unit)) throw DomainError("non-finite parameter");
      unit = std::clamp(unit, kTrainingUnitClamp, 1.0 - kTrainingUnitClamp);
    } else if (!(v[k] > box.lo[k] && v[k] < box.hi[k])) {
      throw DomainError("parameter on or outside its prior bound");
    }
    v[k] = logit(unit);
  }
  return ThetaParams::from_array(v, Coords::unconstrained);
}

}  // namespace

ThetaParams to_unconstrained(const ThetaParams& theta, const PriorBox& box) {
  return unconstrain(theta, box, false);
}

ThetaParams to_unconstrained_clamped(const ThetaParams& theta, const PriorBox& box) {
  return unconstrain(theta, box, true);
}

ThetaParams to_constrained(const ThetaParams& theta, const PriorBox& box) {
  if (theta.coords != Coords::unconstrained) throw DomainError("to_constrained expects unconstrained theta");
  auto v = theta.as_array();
  for (std::size_t k = 0; k < 3; ++k) {
    if (!std::isfinite(v[k])) throw DomainError("non-finite unconstrained parameter");
    // Map from whichever bound is nearer so saturation keeps precision.
    double c = v[k] >= 0.0 ? box.hi[k] - box.width(k) * inv_logit(-v[k])
                           : box.lo[k] + box.width(k) * inv_logit(v[k]);
    c = std::clamp(c, std::nextafter(box.lo[k], box.hi[k]), std::nextafter(box.hi[k], box.lo[k]));
    v[k] = c;
  }
  return ThetaParams::from_array(v, Coords::constrained);
}

double log_jacobian_unconstrained(const ThetaParams& u, const PriorBox& box) {
  const auto v = u.as_array();
  double s = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    // log(width * sigmoid(u) * (1 - sigmoid(u))), stable for large |u|.
    const double a = std::abs(v[k]);
    s += std::log(box.width(k)) - a - 2.0 * std::log1p(std::exp(-a));
  }
  return s;
}

}  // namespace lgcpflow
