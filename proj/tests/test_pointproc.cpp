#include <cmath>
#include <sstream>

#include "doctest.h"
#include "lgcpflow/errors.hpp"
#include "lgcpflow/pointproc.hpp"

using namespace lgcpflow;

TEST_CASE("exp_cov closed forms") {
  CHECK(exp_cov({0.3, 0.3}, {0.3, 0.3}, 1.7, 0.1) == doctest::Approx(1.7));
  CHECK(exp_cov({0.0, 0.0}, {0.1, 0.0}, 1.0, 0.1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  const double tiny = exp_cov({0.0, 0.0}, {1.0, 0.0}, 1.0, 0.01);
  CHECK(tiny >= 0.0);
  CHECK(tiny < 1e-40);
  CHECK_THROWS_AS(exp_cov({0, 0}, {1, 0}, 1.0, 0.0), DomainError);
}

TEST_CASE("mask areas and text format") {
  DomainMask m(Window(2, 4));
  CHECK(m.admissible_area() == doctest::Approx(1.0));
  m.set(0, false);
  m.set(5, false);
  CHECK(m.admissible_count() == 14);
  CHECK(m.admissible_area() == doctest::Approx(14.0 / 16.0));

  std::stringstream ss;
  m.write(ss);
  const DomainMask back = DomainMask::read(ss);
  CHECK(back == m);

  // Top row in the file is the highest y row.
  std::istringstream in("mask 2 2\n10\n00\n");
  const DomainMask top = DomainMask::read(in);
  CHECK(top.admissible(2));
  CHECK_FALSE(top.admissible(0));

  std::istringstream one("mask 5 1\n01110\n");
  const DomainMask line = DomainMask::read(one);
  CHECK(line.dim() == 1);
  CHECK(line.admissible_area() == doctest::Approx(0.6));

  std::istringstream bad("mask 2 2\n1x\n00\n");
  CHECK_THROWS_AS(DomainMask::read(bad), FormatError);
  std::istringstream short_rows("mask 2 2\n10\n");
  CHECK_THROWS_AS(DomainMask::read(short_rows), FormatError);
}

TEST_CASE("point pattern csv round trip and validation") {
  PointPattern p{2, {{0.125, 0.5}, {0.9, 0.0}}};
  std::stringstream ss;
  p.write_csv(ss);
  const PointPattern back = PointPattern::read_csv(ss);
  CHECK(back.dim == 2);
  CHECK(back.points == p.points);

  std::istringstream one("x\n0.5\n0.25\n");
  CHECK(PointPattern::read_csv(one).dim == 1);
  std::istringstream outside("x,y\n1.5,0.2\n");
  CHECK_THROWS(PointPattern::read_csv(outside));
}

TEST_CASE("sigma2 = 0 gives a constant field") {
  const DomainMask m(Window(2, 6));
  const GridField f = sample_gp_grid({4.2, 0.05, 0.0}, m, 3);
  for (double v : f.values) CHECK(v == 4.2);
}

TEST_CASE("GP cell variance and covariance, theta = (4, 0.1, 1)") {
  // 1-D grid of 20 cells: centers 0.1 apart are cells 2 and 4.
  const Window w(1, 20);
  const GaussianFieldSampler s(w, 0.1, 1.0);
  Rng rng = make_rng(77);
  const int n = 10000;
  double s2 = 0.0, s4 = 0.0, s22 = 0.0, s44 = 0.0, s24 = 0.0;
  std::vector<double> prod(n), sq(n);
  for (int i = 0; i < n; ++i) {
    const auto z = s.draw(4.0, rng);
    const double a = z[2] - 4.0, b = z[4] - 4.0;
    s2 += a;
    s4 += b;
    s22 += a * a;
    s44 += b * b;
    s24 += a * b;
    prod[i] = a * b;
    sq[i] = a * a;
  }
  auto mc_check = [n](const std::vector<double>& v, double target) {
    double m = 0.0, ss = 0.0;
    for (double x : v) m += x;
    m /= n;
    for (double x : v) ss += (x - m) * (x - m);
    const double se = std::sqrt(ss / (n - 1) / n);
    CHECK(std::abs(m - target) < 3.0 * se);
  };
  mc_check(sq, 1.0);
  mc_check(prod, std::exp(-1.0));
}

TEST_CASE("jitter stays within the schedule") {
  const GaussianFieldSampler s(Window(2, 20), 0.15, 2.0);
  CHECK(s.jitter() <= 1e-4 * 2.0);
  CHECK(s.factor().rows() == 400);
}

TEST_CASE("all-false mask gives an empty pattern") {
  const DomainMask m(Window(2, 5), false);
  CHECK(simulate_lgcp({5.0, 0.05, 1.0}, m, 1).empty());
}

TEST_CASE("homogeneous Poisson mean count, mu = 3") {
  const DomainMask m(Window(2, 10));
  const LgcpSimulator sim({3.0, 0.05, 0.0}, m);
  const int reps = 2000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < reps; ++i) {
    const double n = static_cast<double>(sim.simulate(derive_seed(9, i)).n());
    s += n;
    ss += n * n;
  }
  const double mean = s / reps;
  const double var = (ss - reps * mean * mean) / (reps - 1);
  CHECK(std::abs(mean - std::exp(3.0)) < 3.0 * std::sqrt(var / reps));
  // Dispersion index: (reps - 1) var / mean ~ chi^2(reps - 1); 0.5% / 99.5%
  // quantiles of chi^2(1999) are about 1842.6 and 2161.6.
  const double d = (reps - 1) * var / mean;
  CHECK(d > 1842.6);
  CHECK(d < 2161.6);
}

TEST_CASE("points land in admissible cells and simulation is deterministic") {
  DomainMask m(Window(2, 8));
  for (std::size_t c = 0; c < m.size(); c += 3) m.set(c, false);
  for (int s = 0; s < 20; ++s) {
    const ThetaParams th = sample_prior(m.window(), s);
    const PointPattern p = simulate_lgcp(th, m, s);
    for (const auto& pt : p.points) REQUIRE(m.admissible(m.cell_of(pt)));
    CHECK(simulate_lgcp(th, m, s).points == p.points);
  }
}

TEST_CASE("count cap raises a resource error") {
  const DomainMask m(Window(1, 10));
  CHECK_THROWS_AS(simulate_lgcp({6.0, 0.05, 0.0}, m, 1, 10.0), ResourceError);
}

TEST_CASE("expected_count formula") {
  const DomainMask full(Window(2, 10));
  CHECK(expected_count({3.0, 0.1, 0.0}, full) == doctest::Approx(20.0855).epsilon(1e-5));
  CHECK(expected_count({6.0, 0.1, 2.0}, full) == doctest::Approx(1096.63).epsilon(1e-5));
  DomainMask half(Window(2, 10));
  for (std::size_t c = 0; c < 50; ++c) half.set(c, false);
  CHECK(expected_count({3.0, 0.1, 0.0}, half) == doctest::Approx(10.043).epsilon(1e-4));
}

TEST_CASE("prior draws") {
  const Window w(2, 10);
  double s = 0.0;
  const int n = 100000;
  Rng rng = make_rng(5);
  const PriorBox box;
  for (int i = 0; i < n; ++i) {
    const ThetaParams t = sample_prior(box, rng);
    REQUIRE(t.mu >= 3.0);
    REQUIRE(t.mu <= 6.0);
    REQUIRE(t.rho > 0.0);
    REQUIRE(t.rho < 0.15);
    REQUIRE(t.sigma2 > 0.0);
    REQUIRE(t.sigma2 < 2.0);
    s += t.mu;
  }
  CHECK(std::abs(s / n - 4.5) < 3.0 * std::sqrt(0.75 / n));
  CHECK(sample_prior(w, 12) == sample_prior(w, 12));
}

TEST_CASE("logit transforms") {
  const PriorBox box;
  const ThetaParams mid = to_unconstrained({4.5, 0.5 * (1e-6 + 0.15), 1.0}, box);
  CHECK(std::abs(mid.mu) < 1e-12);
  CHECK(mid.coords == Coords::unconstrained);

  const ThetaParams t{4.0, 0.05, 1.0};
  const ThetaParams back = to_constrained(to_unconstrained(t, box), box);
  CHECK(std::abs(back.mu - 4.0) < 1e-12);
  CHECK(std::abs(back.rho - 0.05) < 1e-12);
  CHECK(std::abs(back.sigma2 - 1.0) < 1e-12);

  CHECK_THROWS_AS(to_unconstrained({3.0, 0.05, 1.0}, box), DomainError);

  const ThetaParams zero = to_constrained({0.0, 0.0, 0.0, Coords::unconstrained}, box);
  CHECK(zero.mu == doctest::Approx(4.5));
  CHECK(zero.sigma2 == doctest::Approx(1.0));
  const ThetaParams sat = to_constrained({50.0, -50.0, 50.0, Coords::unconstrained}, box);
  CHECK(sat.mu < 6.0);
  CHECK(sat.mu > 6.0 - 1e-12);
  CHECK(sat.rho > box.lo[1]);
  CHECK(sat.sigma2 < 2.0);

  Rng rng = make_rng(8);
  for (int i = 0; i < 1000; ++i) {
    const ThetaParams p = sample_prior(box, rng);
    const ThetaParams q = to_constrained(to_unconstrained(p, box), box);
    REQUIRE(std::abs(p.mu - q.mu) <= 1e-12);
    REQUIRE(std::abs(p.rho - q.rho) <= 1e-12);
    REQUIRE(std::abs(p.sigma2 - q.sigma2) <= 1e-12);
  }
  const ThetaParams c = to_unconstrained_clamped({3.0, 1e-6, 2.0}, box);
  CHECK(std::isfinite(c.mu));
  CHECK(std::isfinite(c.rho));
  CHECK(std::isfinite(c.sigma2));
}

TEST_CASE("grid log-likelihood") {
  DomainMask m(Window(2, 4));
  const PointPattern empty{2, {}};
  CHECK(grid_loglik(GridField{m, std::vector<double>(16, 3.0)}, empty) == doctest::Approx(-std::exp(3.0)));
  const PointPattern one{2, {{0.3, 0.6}}};
  CHECK(grid_loglik(GridField{m, std::vector<double>(16, 0.0)}, one) == doctest::Approx(-1.0));

  // Brute-force re-summation on a masked grid.
  m.set(7, false);
  Rng rng = make_rng(4);
  std::vector<double> z(16);
  for (auto& v : z) v = standard_normal(rng);
  const PointPattern pts{2, {{0.1, 0.1}, {0.6, 0.3}, {0.62, 0.35}}};
  double direct = 0.0;
  for (int c = 0; c < 16; ++c)
    if (m.admissible(c)) direct -= std::exp(z[c]) / 16.0;
  for (const auto& p : pts.points) {
    const int ix = static_cast<int>(p.x * 4), iy = static_cast<int>(p.y * 4);
    direct += z[iy * 4 + ix];
  }
  CHECK(grid_loglik(GridField{m, z}, pts) == doctest::Approx(direct).epsilon(1e-14));
  const auto counts = cell_counts(pts, m);
  CHECK(grid_loglik(z, counts, m) == doctest::Approx(direct).epsilon(1e-14));

  const PointPattern excluded{2, {{0.8, 0.3}}};
  CHECK_THROWS_AS(cell_counts(excluded, m), DomainError);
}
