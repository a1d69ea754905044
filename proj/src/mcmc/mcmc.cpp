#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "lgcpflow/errors.hpp"
#include "lgcpflow/mcmc.hpp"

namespace lgcpflow {

void ChainConfig::validate() const {
  if (n_iters < 1) throw DomainError("chain needs at least one iteration");
  if (burn_in < 0 || burn_in >= n_iters) throw DomainError("burn_in must lie in [0, n_iters)");
  if (thin < 1) throw DomainError("thin must be >= 1");
  if (adapt_window < 1) throw DomainError("adapt_window must be >= 1");
  for (double s : scales)
    if (!(s >= 0.0)) throw DomainError("proposal scales must be non-negative");
}

LgcpTarget::LgcpTarget(const PointPattern& pattern, DomainMask mask_)
    : mask(std::move(mask_)), counts(cell_counts(pattern, mask)),
      prior(PriorBox::for_window_measure(mask.window().measure())) {}

void ChainState::refresh(const LgcpTarget& target) {
  if (!sampler) sampler = std::make_shared<GaussianFieldSampler>(target.mask.window(), theta.rho, theta.sigma2);
  field.resize(whitened.size());
  sampler->color(theta.mu, whitened, field);
  log_lik = target.loglik(field);
  double ww = 0.0;
  for (double v : whitened) ww += v * v;
  log_post = log_lik - 0.5 * ww;
}

ChainState ChainState::initial(const LgcpTarget& target, const ThetaParams& theta) {
  if (!target.prior.strictly_contains(theta)) throw DomainError("initial theta outside the prior box");
  ChainState s;
  s.theta = theta;
  s.whitened.assign(target.mask.size(), 0.0);
  s.refresh(target);
  return s;
}

double ess_step(std::vector<double>& w, double current_loglik,
                const std::function<double(std::span<const double>)>& loglik, Rng& rng) {
  const std::size_t n = w.size();
  std::vector<double> nu(n), prop(n);
  for (auto& v : nu) v = standard_normal(rng);
  const double log_y = current_loglik + std::log(uniform_open(rng));
  double angle = 2.0 * std::numbers::pi * uniform_open(rng);
  double lo = angle - 2.0 * std::numbers::pi, hi = angle;
  for (int tries = 0; tries < 200; ++tries) {
    const double c = std::cos(angle), s = std::sin(angle);
    for (std::size_t i = 0; i < n; ++i) prop[i] = w[i] * c + nu[i] * s;
    const double ll = loglik(prop);
    if (ll > log_y) {
      w.swap(prop);
      return ll;
    }
    if (angle < 0.0) {
      lo = angle;
    } else {
      hi = angle;
    }
    angle = lo + (hi - lo) * uniform_open(rng);
  }
  // The bracket has collapsed onto the current point.
  return current_loglik;
}

void ess_update_field(ChainState& state, const LgcpTarget& target, Rng& rng) {
  std::vector<double> field(state.whitened.size());
  const auto loglik = [&](std::span<const double> w) {
    state.sampler->color(state.theta.mu, w, field);
    return target.loglik(field);
  };
  ess_step(state.whitened, state.log_lik, loglik, rng);
  state.refresh(target);
}

ChainState ess_update_field(ChainState state, const LgcpTarget& target, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  ess_update_field(state, target, rng);
  return state;
}

bool mh_update_hyper(ChainState& state, const LgcpTarget& target, const Eigen::Matrix3d& proposal_chol, Rng& rng) {
  Eigen::Vector3d z;
  for (int k = 0; k < 3; ++k) z[k] = standard_normal(rng);
  const Eigen::Vector3d step = proposal_chol.triangularView<Eigen::Lower>() * z;
  const double log_u = std::log(uniform_open(rng));

  const ThetaParams u = to_unconstrained(state.theta, target.prior);
  auto uv = u.as_array();
  auto cur = state.theta.as_array();
  std::array<double, 3> next_u = uv;
  std::array<bool, 3> moves{};
  for (int k = 0; k < 3; ++k) {
    moves[static_cast<std::size_t>(k)] = proposal_chol.row(k).cwiseAbs().sum() > 0.0;
    next_u[static_cast<std::size_t>(k)] += step[k];
  }
  const auto mapped = to_constrained(ThetaParams::from_array(next_u, Coords::unconstrained), target.prior).as_array();
  std::array<double, 3> next = cur;
  for (std::size_t k = 0; k < 3; ++k)
    if (moves[k]) next[k] = mapped[k];
    else next_u[k] = uv[k];
  const ThetaParams proposal = ThetaParams::from_array(next, Coords::constrained);

  std::shared_ptr<const GaussianFieldSampler> sampler = state.sampler;
  if (proposal.rho != state.theta.rho || proposal.sigma2 != state.theta.sigma2)
    sampler = std::make_shared<GaussianFieldSampler>(target.mask.window(), proposal.rho, proposal.sigma2);
  std::vector<double> field(state.whitened.size());
  sampler->color(proposal.mu, state.whitened, field);
  const double ll = target.loglik(field);

  const double log_ratio = ll - state.log_lik +
                           log_jacobian_unconstrained(ThetaParams::from_array(next_u, Coords::unconstrained), target.prior) -
                           log_jacobian_unconstrained(u, target.prior);
  if (!(log_u < log_ratio)) return false;
  state.theta = proposal;
  state.sampler = std::move(sampler);
  state.field = std::move(field);
  state.log_post += ll - state.log_lik;
  state.log_lik = ll;
  return true;
}

bool mh_update_hyper(ChainState& state, const LgcpTarget& target, const std::array<double, 3>& scales, Rng& rng) {
  Eigen::Matrix3d chol = Eigen::Matrix3d::Zero();
  for (int k = 0; k < 3; ++k) chol(k, k) = scales[static_cast<std::size_t>(k)];
  return mh_update_hyper(state, target, chol, rng);
}

void ChainDiagnostics::write(std::ostream& out) const {
  static const char* names[] = {"mu", "rho", "sigma2"};
  out << "accept_rate = " << accept_rate << '\n'
      << "burn_in_accept_rate = " << burn_in_accept_rate << '\n'
      << "final_scale = " << final_scale << '\n'
      << "n_draws = " << n_draws << '\n';
  for (std::size_t k = 0; k < 3; ++k) {
    out << names[k] << ".proposal_sd = " << proposal_sd[k] << '\n'
        << names[k] << ".mean = " << traces[k].mean << '\n'
        << names[k] << ".sd = " << traces[k].sd << '\n'
        << names[k] << ".min = " << traces[k].min << '\n'
        << names[k] << ".max = " << traces[k].max << '\n';
  }
  if (max_cache_error > 0.0) out << "max_cache_error = " << max_cache_error << '\n';
}

namespace {

ThetaParams starting_point(const LgcpTarget& target) {
  long n = 0;
  for (int c : target.counts) n += c;
  const double area = std::max(target.mask.admissible_area(), 1e-12);
  const double sigma2 = 1.0;
  double mu = std::log(std::max<double>(static_cast<double>(n), 1.0) / area) - 0.5 * sigma2;
  const PriorBox& b = target.prior;
  mu = std::clamp(mu, b.lo[0] + 0.02 * b.width(0), b.hi[0] - 0.02 * b.width(0));
  return ThetaParams{mu, b.lo[1] + 0.33 * b.width(1), sigma2, Coords::constrained};
}

struct Welford {
  long n = 0;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d m2 = Eigen::Matrix3d::Zero();
  void add(const Eigen::Vector3d& x) {
    ++n;
    const Eigen::Vector3d d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean).transpose();
  }
  Eigen::Matrix3d cov() const { return m2 / static_cast<double>(n - 1); }
};

}  // namespace

ChainResult run_chain(const PointPattern& pattern, const DomainMask& mask, const ChainConfig& config,
                      std::uint64_t seed) {
  config.validate();
  const LgcpTarget target(pattern, mask);
  Rng rng = make_rng(seed);
  ChainState state = ChainState::initial(target, starting_point(target));

  Eigen::Matrix3d shape = Eigen::Matrix3d::Zero();
  for (int k = 0; k < 3; ++k) shape(k, k) = config.scales[static_cast<std::size_t>(k)];
  double log_scale = 0.0;
  Welford welford;
  long window_accepts = 0, burn_accepts = 0, post_accepts = 0;
  constexpr long kMinCovSamples = 200;

  ChainResult result;
  ChainDiagnostics& diag = result.diagnostics;
  for (long it = 0; it < config.n_iters; ++it) {
    ess_update_field(state, target, rng);
    const bool accepted = mh_update_hyper(state, target, Eigen::Matrix3d(std::exp(log_scale) * shape), rng);

    if (it < config.burn_in) {
      window_accepts += accepted;
      burn_accepts += accepted;
      const auto u = to_unconstrained(state.theta, target.prior).as_array();
      welford.add(Eigen::Vector3d(u[0], u[1], u[2]));
      if ((it + 1) % config.adapt_window == 0) {
        const double rate = static_cast<double>(window_accepts) / static_cast<double>(config.adapt_window);
        log_scale += 2.0 * (rate - config.target_accept);
        window_accepts = 0;
        // Learn the proposal shape from the burn-in path; only when every
        // scale is active so zero-scale components stay frozen.
        const bool all_active = std::all_of(config.scales.begin(), config.scales.end(), [](double s) { return s > 0.0; });
        if (all_active && welford.n >= kMinCovSamples) {
          Eigen::Matrix3d cov = (2.38 * 2.38 / 3.0) * welford.cov();
          cov.diagonal().array() += 1e-8;
          Eigen::LLT<Eigen::Matrix3d> llt(cov);
          if (llt.info() == Eigen::Success) {
            const double old_trace = (std::exp(log_scale) * shape).squaredNorm();
            shape = llt.matrixL();
            // Keep the overall step size continuous across the swap.
            log_scale = 0.5 * std::log(old_trace / shape.squaredNorm());
          }
        }
      }
    } else {
      post_accepts += accepted;
      if ((it - config.burn_in) % config.thin == 0) result.draws.draws.push_back(state.theta);
    }

    if (config.check_cache) {
      ChainState fresh = state;
      fresh.sampler.reset();
      fresh.refresh(target);
      diag.max_cache_error = std::max(diag.max_cache_error, std::abs(fresh.log_post - state.log_post));
    }
  }

  const long post = config.n_iters - config.burn_in;
  diag.accept_rate = static_cast<double>(post_accepts) / static_cast<double>(post);
  diag.burn_in_accept_rate = config.burn_in > 0 ? static_cast<double>(burn_accepts) / static_cast<double>(config.burn_in) : 0.0;
  diag.final_scale = std::exp(log_scale);
  const Eigen::Matrix3d final_chol = std::exp(log_scale) * shape;
  for (int k = 0; k < 3; ++k) diag.proposal_sd[static_cast<std::size_t>(k)] = final_chol.row(k).norm();
  diag.n_draws = static_cast<long>(result.draws.size());
  for (std::size_t k = 0; k < 3; ++k) {
    const auto v = result.draws.component(k);
    ParamTrace& t = diag.traces[k];
    if (v.empty()) continue;
    double s = 0.0, ss = 0.0;
    for (double x : v) s += x;
    t.mean = s / static_cast<double>(v.size());
    for (double x : v) ss += (x - t.mean) * (x - t.mean);
    t.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    t.min = *std::min_element(v.begin(), v.end());
    t.max = *std::max_element(v.begin(), v.end());
  }
  result.draws.source = "mcmc seed=" + std::to_string(seed);
  return result;
}

std::vector<ChainResult> run_chains(const PointPattern& pattern, const DomainMask& mask, const ChainConfig& config,
                                    std::span<const std::uint64_t> seeds) {
  std::vector<ChainResult> out(seeds.size());
  std::string failure;
  const auto count = static_cast<long>(seeds.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < count; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = run_chain(pattern, mask, config, seeds[static_cast<std::size_t>(i)]);
    } catch (const std::exception& e) {
#pragma omp critical
      if (failure.empty()) failure = e.what();
    }
  }
  if (!failure.empty()) throw NumericalError("chain failed: " + failure);
  return out;
}

namespace reference {

std::vector<ChainResult> run_chains(const PointPattern& pattern, const DomainMask& mask, const ChainConfig& config,
                                    std::span<const std::uint64_t> seeds) {
  std::vector<ChainResult> out;
  for (auto s : seeds) out.push_back(run_chain(pattern, mask, config, s));
  return out;
}

}  // namespace reference

}  // namespace lgcpflow
