#pragma once

// Gridded LGCP posterior sampler used as the reference for amortized
// posteriors. The latent field is whitened, Z = mu + L(rho, sigma2) w with
// w ~ N(0, I); elliptical slice sampling updates w and an adaptive random-
// walk Metropolis step updates the logit-transformed (mu, rho, sigma2) with w
// held fixed.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "lgcpflow/pointproc.hpp"
#include "lgcpflow/posterior.hpp"
#include "lgcpflow/rng.hpp"

namespace lgcpflow {

struct ChainConfig {
  long n_iters = 10000;
  long burn_in = 2000;
  long thin = 1;
  std::array<double, 3> scales{0.2, 0.5, 0.5};  // initial proposal sds, unconstrained coords
  long adapt_window = 50;
  double target_accept = 0.3;
  bool check_cache = false;

  void validate() const;
};

// Data and prior for one chain: per-cell counts on a mask plus the box.
struct LgcpTarget {
  DomainMask mask;
  std::vector<int> counts;
  PriorBox prior;

  LgcpTarget(const PointPattern& pattern, DomainMask mask);
  double loglik(std::span<const double> field) const { return grid_loglik(field, counts, mask); }
};

struct ChainState {
  ThetaParams theta;  // constrained
  std::vector<double> whitened;
  std::vector<double> field;  // mu + L w, cached
  double log_lik = 0.0;
  double log_post = 0.0;  // log_lik - |w|^2 / 2 (uniform prior is constant)
  std::shared_ptr<const GaussianFieldSampler> sampler;

  static ChainState initial(const LgcpTarget& target, const ThetaParams& theta);
  // Recompute field and log densities from theta and w.
  void refresh(const LgcpTarget& target);
};

// One elliptical slice update of an N(0, I) vector under `loglik`; returns the
// accepted log-likelihood. Always moves to an accepted point.
double ess_step(std::vector<double>& w, double current_loglik,
                const std::function<double(std::span<const double>)>& loglik, Rng& rng);

void ess_update_field(ChainState& state, const LgcpTarget& target, Rng& rng);
ChainState ess_update_field(ChainState state, const LgcpTarget& target, std::uint64_t seed);

// Joint random-walk proposal u' = u + chol * N(0, I) in unconstrained coords.
// A zero scale leaves that component exactly unchanged.
bool mh_update_hyper(ChainState& state, const LgcpTarget& target, const Eigen::Matrix3d& proposal_chol, Rng& rng);
bool mh_update_hyper(ChainState& state, const LgcpTarget& target, const std::array<double, 3>& scales, Rng& rng);

struct ParamTrace {
  double mean = 0.0, sd = 0.0, min = 0.0, max = 0.0;
};

struct ChainDiagnostics {
  double accept_rate = 0.0;          // hyperparameter moves after burn-in
  double burn_in_accept_rate = 0.0;
  double final_scale = 1.0;          // adapted global multiplier
  std::array<double, 3> proposal_sd{};  // marginal proposal sds after adaptation
  std::array<ParamTrace, 3> traces{};
  long n_draws = 0;
  double max_cache_error = 0.0;

  void write(std::ostream& out) const;
};

struct ChainResult {
  PosteriorDraws draws;
  ChainDiagnostics diagnostics;
};

ChainResult run_chain(const PointPattern& pattern, const DomainMask& mask, const ChainConfig& config,
                      std::uint64_t seed);

// Independent chains, one per seed, run concurrently.
std::vector<ChainResult> run_chains(const PointPattern& pattern, const DomainMask& mask, const ChainConfig& config,
                                    std::span<const std::uint64_t> seeds);

namespace reference {
std::vector<ChainResult> run_chains(const PointPattern& pattern, const DomainMask& mask, const ChainConfig& config,
                                    std::span<const std::uint64_t> seeds);
}

}  // namespace lgcpflow
