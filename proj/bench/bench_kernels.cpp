// Serial reference against OpenMP kernels. Prints one line per kernel with
// the median wall time of each and whether the outputs agree.

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "lgcpflow/amortizer.hpp"
#include "lgcpflow/evalkit.hpp"
#include "lgcpflow/mcmc.hpp"

using namespace lgcpflow;

namespace {

double median_seconds(const std::function<void()>& f, int reps) {
  std::vector<double> t;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

template <class T>
std::string agreement(const T& a, const T& b) {
  return a == b ? "identical" : "DIFFERENT";
}

// Chunked sums reorder additions; report the largest relative gap instead.
std::string agreement(const std::vector<double>& a, const std::vector<double>& b) {
  if (a == b) return "identical";
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(a[i]), 1e-300));
  char buf[64];
  std::snprintf(buf, sizeof buf, "max rel diff %.2g", worst);
  return buf;
}

template <class A, class B>
void compare(const char* name, A serial, B parallel, int reps = 5) {
  decltype(serial()) rs, rp;
  const double ts = median_seconds([&] { rs = serial(); }, reps);
  const double tp = median_seconds([&] { rp = parallel(); }, reps);
  std::printf("%-24s serial %9.4fs  openmp %9.4fs  speedup %5.2fx  %s\n", name, ts, tp, ts / tp,
              agreement(rs, rp).c_str());
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());

  Rng rng = make_rng(1);
  std::vector<Point> pts(4000);
  for (auto& p : pts) p = {uniform_open(rng), uniform_open(rng)};
  const auto r = SummaryConfig::defaults(2).r_grid();
  compare("translation pair sums", [&] { return reference::translation_pair_sums(pts, r); },
          [&] { return kernels::translation_pair_sums(pts, r); });

  const ConditionalInn net(InnArchitecture{}, 3);
  std::vector<double> c(55, 0.1), ys(3 * 10000);
  for (auto& y : ys) y = standard_normal(rng);
  compare("inverse batch (L=10000)", [&] { return reference::inverse_batch(net, c, ys); },
          [&] { return kernels::inverse_batch(net, c, ys); });

  std::vector<std::vector<double>> th(16), cs(16);
  std::vector<FlowSample> batch;
  for (int i = 0; i < 16; ++i) {
    th[i] = {standard_normal(rng), standard_normal(rng), standard_normal(rng)};
    cs[i].assign(55, standard_normal(rng));
    batch.push_back({th[i], cs[i]});
  }
  auto grads = [&](bool parallel) {
    GradientTape tape(net.param_count());
    if (parallel) {
      batch_backward(net, batch, tape);
    } else {
      reference::batch_backward(net, batch, tape);
    }
    return tape.grad;
  };
  // Chunked reduction order differs from the serial sum, so compare loosely.
  {
    const auto a = grads(false), b = grads(true);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    const double ts = median_seconds([&] { grads(false); }, 20);
    const double tp = median_seconds([&] { grads(true); }, 20);
    std::printf("%-24s serial %9.4fs  openmp %9.4fs  speedup %5.2fx  max diff %.2g\n", "batch backward (J=16)", ts, tp,
                ts / tp, worst);
  }

  const DomainMask m1(Window(1, 100));
  const auto cfg = SummaryConfig::defaults(1);
  auto bank_summaries = [&](bool parallel) {
    const auto b = parallel ? build_bank(500, m1, cfg, 4) : reference::build_bank(500, m1, cfg, 4);
    std::vector<std::vector<double>> s;
    for (const auto& rec : b.records) s.push_back(rec.summary);
    return s;
  };
  compare("bank (500 sims, 1-D)", [&] { return bank_summaries(false); }, [&] { return bank_summaries(true); }, 3);

  const DomainMask m2(Window(2, 25));
  const ThetaParams theta{4.0, 0.05, 1.0};
  const auto obs = simulate_lgcp(theta, m2, 5);
  const auto zr = default_zpf_grid(20, 0.1);
  compare("zpf estimate", [&] { return reference::zpf_estimate(obs, m2, zr); },
          [&] { return zpf_estimate(obs, m2, zr); }, 20);
  compare("envelope (200 sims)", [&] { return reference::envelope(theta, m2, obs, 200, zr, 6).hi95; },
          [&] { return envelope(theta, m2, obs, 200, zr, 6).hi95; }, 3);

  const auto p1 = simulate_lgcp({4.5, 0.05, 1.0}, m1, 7);
  ChainConfig ch;
  ch.n_iters = 2000;
  ch.burn_in = 500;
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4};
  auto chains = [&](bool parallel) {
    const auto res = parallel ? run_chains(p1, m1, ch, seeds) : reference::run_chains(p1, m1, ch, seeds);
    std::vector<std::vector<ThetaParams>> d;
    for (const auto& x : res) d.push_back(x.draws.draws);
    return d;
  };
  compare("mcmc chains (4 x 2000)", [&] { return chains(false); }, [&] { return chains(true); }, 3);
  return 0;
}
