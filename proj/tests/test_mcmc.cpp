#include <cmath>

#include "doctest.h"
#include "lgcpflow/errors.hpp"
#include "lgcpflow/evalkit.hpp"
#include "lgcpflow/mcmc.hpp"

using namespace lgcpflow;

TEST_CASE("zero scale always accepts and keeps theta") {
  const DomainMask m(Window(1, 10));
  const auto p = simulate_lgcp({4.0, 0.05, 1.0}, m, 1);
  const LgcpTarget target(p, m);
  ChainState s = ChainState::initial(target, {4.0, 0.05, 1.0});
  Rng rng = make_rng(2);
  for (int i = 0; i < 20; ++i) {
    CHECK(mh_update_hyper(s, target, std::array<double, 3>{0.0, 0.0, 0.0}, rng));
    CHECK(s.theta == ThetaParams{4.0, 0.05, 1.0});
  }
}

TEST_CASE("updates are deterministic given a seed") {
  const DomainMask m(Window(1, 20));
  const auto p = simulate_lgcp({4.5, 0.05, 1.0}, m, 3);
  const LgcpTarget target(p, m);
  const ChainState s = ChainState::initial(target, {4.5, 0.05, 1.0});
  const auto a = ess_update_field(s, target, 9);
  const auto b = ess_update_field(s, target, 9);
  CHECK(a.whitened == b.whitened);
  ChainState c1 = s, c2 = s;
  Rng r1 = make_rng(5), r2 = make_rng(5);
  for (int i = 0; i < 10; ++i) CHECK(mh_update_hyper(c1, target, std::array<double, 3>{0.3, 0.3, 0.3}, r1) ==
                                     mh_update_hyper(c2, target, std::array<double, 3>{0.3, 0.3, 0.3}, r2));
  CHECK(c1.theta == c2.theta);
}

TEST_CASE("ESS leaves N(0, I) invariant under a constant likelihood") {
  std::vector<double> w(4, 0.0);
  Rng rng = make_rng(7);
  const auto flat = [](std::span<const double>) { return 0.0; };
  const int n = 10000;
  std::vector<double> ss(4, 0.0), s(4, 0.0);
  for (int i = 0; i < n; ++i) {
    ess_step(w, 0.0, flat, rng);
    for (int k = 0; k < 4; ++k) {
      s[k] += w[k];
      ss[k] += w[k] * w[k];
    }
  }
  for (int k = 0; k < 4; ++k) {
    const double var = ss[k] / n - (s[k] / n) * (s[k] / n);
    CHECK(var == doctest::Approx(1.0).epsilon(0.06));
  }
}

TEST_CASE("ESS matches an importance-sampling oracle on a 4-cell grid") {
  // Empty pattern, fixed theta: target density proportional to
  // N(w; 0, I) exp(-sum exp(mu + (L w)_c) |cell|).
  const DomainMask m(Window(2, 2));
  const PointPattern empty{2, {}};
  const LgcpTarget target(empty, m);
  const ThetaParams th{3.2, 0.1, 0.5};
  ChainState s = ChainState::initial(target, th);
  Rng rng = make_rng(11);
  const int n = 40000;
  std::vector<std::vector<double>> trace(4);
  for (int i = 0; i < n; ++i) {
    ess_update_field(s, target, rng);
    for (int c = 0; c < 4; ++c) trace[c].push_back(s.field[c]);
  }
  // Self-normalized importance sampling from the prior as the oracle.
  Rng orng = make_rng(12);
  std::vector<double> num(4, 0.0);
  double den = 0.0;
  for (int i = 0; i < 1000000; ++i) {
    const auto z = s.sampler->draw(th.mu, orng);
    const double wgt = std::exp(target.loglik(z));
    den += wgt;
    for (int c = 0; c < 4; ++c) num[c] += wgt * z[c];
  }
  for (int c = 0; c < 4; ++c) {
    double mean = 0.0;
    for (double v : trace[c]) mean += v;
    mean /= n;
    // Batch means for the chain's standard error.
    const int batches = 40, bs = n / batches;
    double bss = 0.0;
    for (int b = 0; b < batches; ++b) {
      double bm = 0.0;
      for (int i = b * bs; i < (b + 1) * bs; ++i) bm += trace[c][i];
      bm /= bs;
      bss += (bm - mean) * (bm - mean);
    }
    const double se = std::sqrt(bss / (batches - 1) / batches);
    // All four cells are exchangeable on a 2 x 2 grid.
    const double oracle = (num[0] + num[1] + num[2] + num[3]) / (4.0 * den);
    CHECK_MESSAGE(std::abs(mean - oracle) < 3.0 * se + 0.01, "cell " << c << " chain " << mean << " oracle " << oracle);
    CHECK(oracle < th.mu);  // no data pulls intensity down
  }
}

TEST_CASE("single admissible cell: mu posterior against the Poisson quadrature") {
  // G = 2 with one cell masked: a single cell of area 0.5.
  DomainMask m(Window(1, 2));
  m.set(1, false);
  PointPattern p{1, {}};
  const int count = 60;
  for (int i = 0; i < count; ++i) p.points.push_back({0.01 + 0.48 * i / count, 0.0});
  ChainConfig cfg;
  cfg.n_iters = 20000;
  cfg.burn_in = 2000;
  const auto res = run_chain(p, m, cfg, 3);
  // Analytic p(mu | N) for a homogeneous count on the cell.
  double z = 0.0;
  std::vector<double> grid, dens;
  for (int i = 0; i <= 3000; ++i) {
    const double mu = 3.0 + 3.0 * i / 3000.0;
    grid.push_back(mu);
    dens.push_back(std::exp(-0.5 * std::exp(mu) + count * mu - (count * std::log(2.0 * count) - count)));
    z += dens.back();
  }
  double acc = 0.0, lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double prev = acc;
    acc += dens[i] / z;
    if (prev < 0.025 && acc >= 0.025) lo = grid[i];
    if (prev < 0.975 && acc >= 0.975) hi = grid[i];
  }
  const double mean_mu = res.diagnostics.traces[0].mean;
  CHECK_MESSAGE(mean_mu >= lo, "posterior mean " << mean_mu << " interval " << lo << ".." << hi);
  CHECK_MESSAGE(mean_mu <= hi, "posterior mean " << mean_mu << " interval " << lo << ".." << hi);
}

TEST_CASE("chain bookkeeping") {
  const DomainMask m(Window(1, 30));
  const auto p = simulate_lgcp({4.5, 0.05, 1.0}, m, 4);
  ChainConfig cfg;
  cfg.n_iters = 1200;
  cfg.burn_in = 200;
  cfg.check_cache = true;
  const auto a = run_chain(p, m, cfg, 1);
  CHECK(a.draws.size() == 1000);
  for (const auto& t : a.draws.draws) REQUIRE(PriorBox{}.strictly_contains(t));
  CHECK(a.diagnostics.max_cache_error < 1e-8);
  cfg.thin = 2;
  cfg.check_cache = false;
  const auto b = run_chain(p, m, cfg, 1);
  CHECK(std::abs(static_cast<long>(b.draws.size()) - 500) <= 1);

  PointPattern rev = p;
  std::reverse(rev.points.begin(), rev.points.end());
  cfg.thin = 1;
  const auto c = run_chain(rev, m, cfg, 1);
  const auto d = run_chain(p, m, cfg, 1);
  CHECK(c.draws.draws == d.draws.draws);

  const std::uint64_t seeds[] = {1, 2};
  const auto par = run_chains(p, m, cfg, seeds);
  const auto ser = reference::run_chains(p, m, cfg, seeds);
  CHECK(par[0].draws.draws == ser[0].draws.draws);
  CHECK(par[1].draws.draws == ser[1].draws.draws);

  ChainConfig bad;
  bad.burn_in = bad.n_iters;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("adapted acceptance rate on 1-D data") {
  const DomainMask m(Window(1, 100));
  const auto p = simulate_lgcp({4.5, 0.05, 1.0}, m, 8);
  const auto res = run_chain(p, m, ChainConfig{}, 2);
  CHECK(res.diagnostics.accept_rate > 0.15);
  CHECK(res.diagnostics.accept_rate < 0.5);
}
