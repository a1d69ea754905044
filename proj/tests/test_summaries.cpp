#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "lgcpflow/errors.hpp"
#include "lgcpflow/summaries.hpp"

using namespace lgcpflow;

TEST_CASE("default summary lengths") {
  CHECK(SummaryConfig::defaults(1).length() == 59);
  CHECK(SummaryConfig::defaults(2).length() == 55);
  const auto g2 = SummaryConfig::defaults(2).r_grid();
  CHECK(g2.size() == 39);
  CHECK(g2.front() > 0.0);
  CHECK(g2.back() == 0.2);
  const auto g1 = SummaryConfig::defaults(1).r_grid();
  CHECK(g1.size() == 40);
  CHECK(g1.front() == 0.0);
  CHECK(g1.back() == 0.2);
}

TEST_CASE("pair proportions") {
  const PointPattern p{1, {{0.1, 0}, {0.2, 0}, {0.9, 0}}};
  const std::vector<double> r{0.15, 1.0};
  const auto c = pair_proportion(p, r);
  CHECK(c.values[0] == doctest::Approx(1.0 / 3.0));
  CHECK(c.values[1] == 1.0);
  const PointPattern tie{1, {{0.5, 0}, {0.5, 0}}};
  const std::vector<double> r0{0.0};
  CHECK(pair_proportion(tie, r0).values[0] == 1.0);
}

TEST_CASE("L-function degenerate and clustered cases") {
  const auto grid = SummaryConfig::defaults(2).r_grid();
  const PointPattern one{2, {{0.5, 0.5}}};
  const auto d = l_function(one, grid);
  CHECK(d.degenerate);
  for (double v : d.values) CHECK(v == 0.0);

  const DomainMask m(Window(2, 50));
  const LgcpSimulator sim({4.0, 0.1, 1.9}, m);
  const std::vector<double> r{0.05};
  double s = 0.0;
  for (int i = 0; i < 300; ++i) s += l_function(sim.simulate(derive_seed(3, i)), r).values[0];
  CHECK(s / 300 > 0.0);
}

TEST_CASE("L-function is centered for CSR") {
  // High intensity keeps the square-root bias at small r below the MC error.
  const DomainMask m(Window(2, 10));
  const LgcpSimulator sim({7.5, 0.05, 0.0}, m);
  const std::vector<double> r{0.02, 0.05, 0.1, 0.15, 0.2};
  const int reps = 1000;
  std::vector<std::vector<double>> v(r.size());
  for (int i = 0; i < reps; ++i) {
    const auto c = l_function(sim.simulate(derive_seed(21, i)), r);
    for (std::size_t k = 0; k < r.size(); ++k) v[k].push_back(c.values[k]);
  }
  for (std::size_t k = 0; k < r.size(); ++k) {
    double mean = 0.0, ss = 0.0;
    for (double x : v[k]) mean += x;
    mean /= reps;
    for (double x : v[k]) ss += (x - mean) * (x - mean);
    const double se = std::sqrt(ss / (reps - 1) / reps);
    CHECK_MESSAGE(std::abs(mean) < 3.0 * se, "r = " << r[k] << " mean " << mean << " se " << se);
  }
}

TEST_CASE("quadrat statistics") {
  const PointPattern even{2, {{0.1, 0.1}, {0.9, 0.1}, {0.1, 0.9}, {0.9, 0.9}}};
  const auto e = quadrat_stats(even, 2);
  CHECK(e.p_max == 0.25);
  CHECK(e.p_min == 0.25);
  CHECK(e.p_logvar == kLogVarFloor);

  const PointPattern lumped{2, {{0.1, 0.1}, {0.2, 0.3}, {0.4, 0.2}}};
  const auto l = quadrat_stats(lumped, 2);
  CHECK(l.p_max == 1.0);
  CHECK(l.p_min == 0.0);

  const PointPattern halves{2, {{0.1, 0.1}, {0.9, 0.1}}};
  CHECK(quadrat_stats(halves, 2).p_logvar == doctest::Approx(std::log(1.0 / 12.0)));

  const auto z = quadrat_stats(PointPattern{1, {}}, 5);
  CHECK(z.p_max == 0.0);
  CHECK(z.p_min == 0.0);
  CHECK(z.p_logvar == kLogVarFloor);
}

TEST_CASE("degenerate single point 1-D summary") {
  const auto cfg = SummaryConfig::defaults(1);
  const auto s = compose_summary(PointPattern{1, {{0.5, 0}}}, cfg);
  REQUIRE(s.size() == 59);
  CHECK(s.degenerate);
  CHECK(s.values[0] == 0.0);
  for (int k = 1; k <= 40; ++k) CHECK(s.values[static_cast<std::size_t>(k)] == 0.0);
  for (double v : s.values) CHECK(std::isfinite(v));
  const auto empty = compose_summary(PointPattern{1, {}}, cfg);
  CHECK(empty.degenerate);
  for (double v : empty.values) CHECK(std::isfinite(v));
}

TEST_CASE("summary properties over simulated patterns") {
  for (int dim : {1, 2}) {
    const auto cfg = SummaryConfig::defaults(dim);
    const DomainMask m(Window(dim, dim == 1 ? 100 : 20));
    for (int i = 0; i < 25; ++i) {
      const auto th = sample_prior(m.window(), derive_seed(dim, i));
      PointPattern p = simulate_lgcp(th, m, i);
      const auto s = compose_summary(p, cfg);
      REQUIRE(s.size() == cfg.length());
      for (double v : s.values) REQUIRE(std::isfinite(v));
      std::reverse(p.points.begin(), p.points.end());
      const auto r = compose_summary(p, cfg);
      for (std::size_t k = 0; k < s.size(); ++k) CHECK(r.values[k] == doctest::Approx(s.values[k]).epsilon(1e-12));
      if (dim == 1) {
        const auto c = pair_proportion(p, cfg.r_grid());
        CHECK(std::is_sorted(c.values.begin(), c.values.end()));
      }
    }
  }
}

TEST_CASE("standardizer") {
  const std::vector<SummaryVector> same{{{1.0, 2.0}, false}, {{1.0, 2.0}, false}};
  const auto st = SummaryStandardizer::fit(same);
  CHECK(st.means() == std::vector<double>{1.0, 2.0});
  CHECK(st.sds() == std::vector<double>{1.0, 1.0});

  const std::vector<SummaryVector> two{{{0.0}, false}, {{2.0}, false}};
  const auto t = SummaryStandardizer::fit(two);
  CHECK(t.means()[0] == 1.0);
  CHECK(t.sds()[0] == doctest::Approx(std::sqrt(2.0)));

  std::vector<SummaryVector> bank;
  Rng rng = make_rng(1);
  for (int i = 0; i < 50; ++i) bank.push_back({{standard_normal(rng) * 3 + 1, standard_normal(rng) - 4}, false});
  const auto fit = SummaryStandardizer::fit(bank);
  std::vector<double> mean(2, 0.0), ss(2, 0.0);
  std::vector<SummaryVector> applied;
  for (const auto& v : bank) applied.push_back(fit.apply(v));
  for (const auto& v : applied)
    for (int k = 0; k < 2; ++k) mean[k] += v.values[k] / 50;
  for (const auto& v : applied)
    for (int k = 0; k < 2; ++k) ss[k] += (v.values[k] - mean[k]) * (v.values[k] - mean[k]);
  for (int k = 0; k < 2; ++k) {
    CHECK(std::abs(mean[k]) < 1e-12);
    CHECK(std::abs(std::sqrt(ss[k] / 49) - 1.0) < 1e-12);
  }

  const SummaryVector at_means{fit.means(), false};
  for (double v : fit.apply(at_means).values) CHECK(v == 0.0);
  const auto id = SummaryStandardizer::identity(2);
  CHECK(id.apply(bank[3]).values == bank[3].values);
  CHECK(fit.apply(fit.apply(bank[3])).values != fit.apply(bank[3]).values);
  CHECK_THROWS_AS(fit.apply(SummaryVector{{1.0}, false}), DomainError);
}

TEST_CASE("pair kernels agree with brute force") {
  Rng rng = make_rng(2);
  std::vector<Point> pts(700);
  for (auto& p : pts) p = {uniform_open(rng), uniform_open(rng)};
  const auto r = SummaryConfig::defaults(2).r_grid();
  const auto a = kernels::translation_pair_sums(pts, r);
  const auto b = reference::translation_pair_sums(pts, r);
  for (std::size_t k = 0; k < r.size(); ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));
  for (auto& p : pts) p.y = 0.0;
  const auto r1 = SummaryConfig::defaults(1).r_grid();
  CHECK(kernels::pair_counts_1d(pts, r1) == reference::pair_counts_1d(pts, r1));
}
