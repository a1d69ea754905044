#include <algorithm>
#include <cmath>
#include <sstream>

#include "lgcpflow/errors.hpp"
#include "lgcpflow/pointproc.hpp"

namespace lgcpflow {

double exp_cov(const Point& si, const Point& sj, double sigma2, double rho) {
  if (!(rho > 0.0)) throw DomainError("exp_cov: rho must be positive");
  if (!(sigma2 >= 0.0)) throw DomainError("exp_cov: sigma2 must be non-negative");
  const double d = std::hypot(si.x - sj.x, si.y - sj.y);
  return sigma2 * std::exp(-d / rho);
}

Eigen::MatrixXd grid_covariance(const Window& window, double rho, double sigma2) {
  const DomainMask full(window);
  const auto n = static_cast<Eigen::Index>(window.cell_count());
  std::vector<Point> centers(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) centers[static_cast<std::size_t>(i)] = full.cell_center(static_cast<std::size_t>(i));

  Eigen::MatrixXd c(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    c(j, j) = sigma2;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double v = exp_cov(centers[static_cast<std::size_t>(i)], centers[static_cast<std::size_t>(j)], sigma2, rho);
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

GaussianFieldSampler::GaussianFieldSampler(const Window& window, double rho, double sigma2)
    : window_(window), rho_(rho), sigma2_(sigma2) {
  if (!(rho > 0.0)) throw DomainError("GP range rho must be positive");
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw DomainError("GP variance must be finite and >= 0");
  if (sigma2 == 0.0) {
    degenerate_ = true;
    return;
  }
  const Eigen::MatrixXd cov = grid_covariance(window, rho, sigma2);
  // 1e-10 sigma2 escalating x10 up to 1e-4 sigma2.
  for (double rel = 1e-10; rel <= 1e-4 * (1.0 + 1e-9); rel *= 10.0) {
    jitter_ = rel * sigma2;
    Eigen::MatrixXd m = cov;
    m.diagonal().array() += jitter_;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) {
      chol_ = llt.matrixL();
      return;
    }
  }
  std::ostringstream msg;
  msg << "Cholesky failed for rho=" << rho << " sigma2=" << sigma2 << " after jitter " << jitter_;
  throw NumericalError(msg.str());
}

void GaussianFieldSampler::color(double mean, std::span<const double> whitened,
                                 std::span<double> out) const {
  const auto n = window_.cell_count();
  if (whitened.size() != n || out.size() != n) throw DomainError("field size mismatch");
  if (degenerate_) {
    std::fill(out.begin(), out.end(), mean);
    return;
  }
  // Row-wise lower-triangular product; column-major storage makes the
  // column sweep the cache-friendly order.
  for (std::size_t i = 0; i < n; ++i) out[i] = mean;
  const double* l = chol_.data();
  for (std::size_t j = 0; j < n; ++j) {
    const double z = whitened[j];
    const double* col = l + j * n;
    for (std::size_t i = j; i < n; ++i) out[i] += col[i] * z;
  }
}

std::vector<double> GaussianFieldSampler::draw(double mean, Rng& rng) const {
  const auto n = window_.cell_count();
  std::vector<double> out(n, mean);
  if (degenerate_) return out;
  std::vector<double> z(n);
  for (auto& v : z) v = standard_normal(rng);
  color(mean, z, out);
  return out;
}

GridField sample_gp_grid(const ThetaParams& theta, const DomainMask& mask, std::uint64_t seed) {
  if (theta.coords != Coords::constrained) throw DomainError("sample_gp_grid expects constrained theta");
  GaussianFieldSampler sampler(mask.window(), theta.rho, theta.sigma2);
  Rng rng = make_rng(seed);
  return GridField{mask, sampler.draw(theta.mu, rng)};
}

}  // namespace lgcpflow
