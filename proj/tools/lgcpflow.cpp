// Command-line front end: simulate, bank, train, infer, mcmc, evaluate and
// envelope. Every run writes resolved_config.ini into its output directory.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lgcpflow/amortizer.hpp"
#include "lgcpflow/errors.hpp"
#include "lgcpflow/evalkit.hpp"
#include "lgcpflow/mcmc.hpp"

namespace fs = std::filesystem;
using namespace lgcpflow;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct Global {
  std::uint64_t seed = 1;
  std::string out = "out";
  std::string mask;
  int dim = 2;
  int grid = 0;  // 0: default for the dimension
};

class OutputDir {
 public:
  explicit OutputDir(const std::string& path) : root_(path) { fs::create_directories(root_); }

  std::string path(const std::string& name) const { return (root_ / name).string(); }

  std::ofstream open(const std::string& name) {
    std::ofstream f(path(name), std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path(name));
    f << std::setprecision(17);
    written_.push_back(name);
    return f;
  }

  static void close(std::ofstream& f, const std::string& what) {
    f.close();
    if (!f) throw std::runtime_error("failed writing " + what);
  }

  void report() const {
    for (const auto& n : written_) std::cout << "wrote " << path(n) << '\n';
  }

 private:
  fs::path root_;
  std::vector<std::string> written_;
};

DomainMask resolve_mask(const Global& g) {
  if (!g.mask.empty()) {
    DomainMask m = DomainMask::read_file(g.mask);
    if (m.dim() != g.dim) throw DomainError("mask is " + std::to_string(m.dim()) + "-D but --dim is " + std::to_string(g.dim));
    if (g.grid != 0 && g.grid != m.window().grid) throw DomainError("mask grid differs from --grid");
    return m;
  }
  const int grid = g.grid != 0 ? g.grid : Window::default_for(g.dim).grid;
  return DomainMask(Window(g.dim, grid));
}

std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_theta(std::ostream& out, const ThetaParams& t) {
  out << "mu = " << shortest(t.mu) << "\nrho = " << shortest(t.rho) << "\nsigma2 = " << shortest(t.sigma2) << '\n';
}

void write_posterior_summary(std::ostream& out, const PosteriorDraws& d) {
  static const char* names[] = {"mu", "rho", "sigma2"};
  const ThetaParams mean = d.mean();
  out << "parameter,mean,lo95,hi95\n";
  for (std::size_t k = 0; k < 3; ++k) {
    const auto ci = credible_interval(d.component(k), 0.95);
    out << names[k] << ',' << shortest(mean.as_array()[k]) << ',' << shortest(ci.first) << ',' << shortest(ci.second)
        << '\n';
  }
}

PointPattern read_pattern(const std::string& path, int expected_dim) {
  PointPattern p = PointPattern::read_csv_file(path);
  if (expected_dim != 0 && p.dim != expected_dim)
    throw DomainError(path + " is " + std::to_string(p.dim) + "-D, expected " + std::to_string(expected_dim) + "-D");
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Amortized posterior inference for log-Gaussian Cox processes"};
  app.set_config("--config", "", "INI file; [section] names match subcommands, flags override");
  app.allow_config_extras(false);
  app.require_subcommand(1);

  Global g;
  app.add_option("--seed", g.seed, "Base RNG seed")->capture_default_str();
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--mask", g.mask, "Mask file ('mask Gx Gy' header)");
  app.add_option("--dim", g.dim, "Spatial dimension (1 or 2)")->check(CLI::IsMember({1, 2}))->capture_default_str();
  app.add_option("--grid", g.grid, "Cells per axis (0: 100 in 1-D, 50 in 2-D)")->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate one LGCP pattern");
  std::optional<double> s_mu, s_rho, s_sigma2;
  double s_cap = kDefaultCountCap;
  sim->add_option("--mu", s_mu, "Fixed mu (otherwise drawn from the prior)");
  sim->add_option("--rho", s_rho, "Fixed rho");
  sim->add_option("--sigma2", s_sigma2, "Fixed sigma2");
  sim->add_option("--count-cap", s_cap, "Maximum expected point count")->capture_default_str();

  // bank
  auto* bank = app.add_subcommand("bank", "Build an offline simulation bank from the prior");
  std::size_t b_n = 4000;
  bank->add_option("--n-sims", b_n, "Number of simulations")->capture_default_str();

  // train
  auto* trn = app.add_subcommand("train", "Train the conditional flow on a bank");
  std::string t_bank;
  TrainOptions topt;
  bool t_raw = false;
  trn->add_option("--bank", t_bank, "Bank CSV from the bank command")->required();
  trn->add_option("--iters", topt.iters, "Training iterations")->capture_default_str();
  trn->add_option("--batch-size", topt.batch_size, "Batch size J")->capture_default_str();
  trn->add_option("--lr0", topt.lr0, "Initial learning rate")->capture_default_str();
  trn->add_option("--decay", topt.decay, "Learning-rate decay factor")->capture_default_str();
  trn->add_option("--decay-every", topt.decay_every, "Iterations per decay step")->capture_default_str();
  trn->add_option("--blocks", topt.n_blocks, "Coupling blocks")->capture_default_str();
  trn->add_option("--hidden", topt.hidden, "Hidden units per layer")->capture_default_str();
  trn->add_flag("--raw", t_raw, "Train on raw (unstandardized) summaries");
  trn->add_flag("--online", topt.online, "Simulate every batch fresh (small grids)");

  // infer
  auto* inf = app.add_subcommand("infer", "Posterior draws for one or more patterns");
  std::string i_ckpt;
  std::vector<std::string> i_patterns;
  std::size_t i_draws = kDefaultPosteriorDraws;
  inf->add_option("--checkpoint", i_ckpt, "Checkpoint from train")->required();
  inf->add_option("--pattern", i_patterns, "Pattern CSV (repeatable)")->required();
  inf->add_option("--draws", i_draws, "Posterior draws per pattern")->capture_default_str();

  // mcmc
  auto* mc = app.add_subcommand("mcmc", "Reference MCMC posterior for one pattern");
  std::string m_pattern;
  ChainConfig mcfg;
  int m_chains = 1;
  mc->add_option("--pattern", m_pattern, "Pattern CSV")->required();
  mc->add_option("--iters", mcfg.n_iters, "Iterations per chain")->capture_default_str();
  mc->add_option("--burn-in", mcfg.burn_in, "Burn-in iterations")->capture_default_str();
  mc->add_option("--thin", mcfg.thin, "Keep every thin-th draw")->capture_default_str();
  mc->add_option("--chains", m_chains, "Independent chains")->capture_default_str();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Recovery metrics on seed-pinned prior datasets");
  std::string e_ckpt;
  int e_datasets = 10;
  std::size_t e_draws = 2000;
  ev->add_option("--checkpoint", e_ckpt, "Checkpoint from train")->required();
  ev->add_option("--datasets", e_datasets, "Number of test datasets")->capture_default_str();
  ev->add_option("--draws", e_draws, "Posterior draws per dataset")->capture_default_str();

  // envelope
  auto* env = app.add_subcommand("envelope", "Posterior-predictive ZPF envelope");
  std::string v_pattern, v_draws;
  std::vector<double> v_theta;
  long v_sims = 1000;
  int v_count = 20;
  double v_rmax = 0.1;
  env->add_option("--pattern", v_pattern, "Observed pattern CSV")->required();
  auto* theta_opt = env->add_option("--theta", v_theta, "mu rho sigma2 to simulate at")->expected(3);
  env->add_option("--draws", v_draws, "Posterior draws CSV; its mean is used")->excludes(theta_opt);
  env->add_option("--n-sims", v_sims, "Simulated patterns")->capture_default_str();
  env->add_option("--r-count", v_count, "Radii in the grid")->capture_default_str();
  env->add_option("--r-max", v_rmax, "Largest radius")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    OutputDir out(g.out);
    {
      // Globals plus the invoked subcommand's section; replayable via --config.
      auto f = out.open("resolved_config.ini");
      f << "seed = " << g.seed << "\nout = \"" << g.out << "\"\nmask = \"" << g.mask << "\"\ndim = " << g.dim
        << "\ngrid = " << g.grid << "\n\n";
      for (const CLI::App* sub : app.get_subcommands())
        f << '[' << sub->get_name() << "]\n" << sub->config_to_str(true, false);
      OutputDir::close(f, "resolved_config.ini");
    }

    if (*sim) {
      const DomainMask mask = resolve_mask(g);
      ThetaParams theta = sample_prior(mask.window(), g.seed);
      if (s_mu) theta.mu = *s_mu;
      if (s_rho) theta.rho = *s_rho;
      if (s_sigma2) theta.sigma2 = *s_sigma2;
      const PointPattern p = simulate_lgcp(theta, mask, derive_seed(g.seed, 1), s_cap);
      auto f = out.open("pattern.csv");
      p.write_csv(f);
      OutputDir::close(f, "pattern.csv");
      auto t = out.open("theta.txt");
      write_theta(t, theta);
      t << "n = " << p.n() << "\nseed = " << g.seed << '\n';
      OutputDir::close(t, "theta.txt");
    } else if (*bank) {
      const DomainMask mask = resolve_mask(g);
      const auto b = build_bank(b_n, mask, SummaryConfig::defaults(g.dim), g.seed);
      auto f = out.open("bank.csv");
      b.write(f);
      OutputDir::close(f, "bank.csv");
    } else if (*trn) {
      const SimulationBank b = SimulationBank::read_file(t_bank);
      topt.seed = g.seed;
      topt.standardize = !t_raw;
      std::optional<DomainMask> online_mask;
      if (topt.online) {
        Global bg = g;
        bg.dim = b.meta.dim();
        bg.grid = b.meta.grid;
        online_mask = resolve_mask(bg);
      }
      const TrainResult r = train(b, topt, online_mask ? &*online_mask : nullptr);
      save_checkpoint(r.checkpoint, out.path("checkpoint.cxfl"));
      load_checkpoint(out.path("checkpoint.cxfl"));
      std::cout << "wrote " << out.path("checkpoint.cxfl") << '\n';
      auto f = out.open("loss.csv");
      f << "iteration,loss\n";
      for (std::size_t i = 0; i < r.loss_trace.size(); ++i) f << i << ',' << r.loss_trace[i] << '\n';
      OutputDir::close(f, "loss.csv");
    } else if (*inf) {
      const Checkpoint ck = load_checkpoint(i_ckpt);
      for (std::size_t j = 0; j < i_patterns.size(); ++j) {
        const PointPattern p = read_pattern(i_patterns[j], ck.dim());
        const PosteriorDraws d = infer(ck, p, i_draws, derive_seed(g.seed, j));
        const std::string stem = fs::path(i_patterns[j]).stem().string() + (i_patterns.size() > 1 ? "_" + std::to_string(j) : "");
        auto f = out.open(stem + "_draws.csv");
        d.write_csv(f);
        OutputDir::close(f, stem + "_draws.csv");
        auto s = out.open(stem + "_summary.csv");
        write_posterior_summary(s, d);
        OutputDir::close(s, stem + "_summary.csv");
      }
    } else if (*mc) {
      const DomainMask mask = resolve_mask(g);
      const PointPattern p = read_pattern(m_pattern, mask.dim());
      if (m_chains < 1) throw DomainError("--chains must be >= 1");
      std::vector<std::uint64_t> seeds;
      for (int c = 0; c < m_chains; ++c) seeds.push_back(derive_seed(g.seed, static_cast<std::uint64_t>(c)));
      const auto results = run_chains(p, mask, mcfg, seeds);
      PosteriorDraws all;
      all.source = "mcmc";
      auto diag = out.open("mcmc_diagnostics.txt");
      for (std::size_t c = 0; c < results.size(); ++c) {
        diag << "[chain " << c << "]\nseed = " << seeds[c] << '\n';
        results[c].diagnostics.write(diag);
        all.draws.insert(all.draws.end(), results[c].draws.draws.begin(), results[c].draws.draws.end());
      }
      OutputDir::close(diag, "mcmc_diagnostics.txt");
      auto f = out.open("mcmc_draws.csv");
      all.write_csv(f);
      OutputDir::close(f, "mcmc_draws.csv");
      auto s = out.open("mcmc_summary.csv");
      write_posterior_summary(s, all);
      OutputDir::close(s, "mcmc_summary.csv");
    } else if (*ev) {
      const Checkpoint ck = load_checkpoint(e_ckpt);
      Global eg = g;
      eg.dim = ck.dim();
      if (eg.grid == 0) eg.grid = ck.manifest.grid;
      const DomainMask mask = resolve_mask(eg);
      if (e_datasets < 2) throw DomainError("--datasets must be >= 2");
      std::vector<DatasetRecovery> rows;
      for (int j = 0; j < e_datasets; ++j) {
        const ThetaParams th = sample_prior(mask.window(), derive_seed(g.seed, 3 * j));
        const PointPattern p = simulate_lgcp(th, mask, derive_seed(g.seed, 3 * j + 1));
        rows.push_back(summarize_posterior(th, infer(ck, p, e_draws, derive_seed(g.seed, 3 * j + 2))));
      }
      const RecoveryReport rep = RecoveryReport::build(std::move(rows), ck.manifest.prior);
      auto f = out.open("recovery.csv");
      rep.write_csv(f);
      OutputDir::close(f, "recovery.csv");
      auto m = out.open("metrics.csv");
      rep.write_metrics(m);
      OutputDir::close(m, "metrics.csv");
    } else if (*env) {
      const DomainMask mask = resolve_mask(g);
      const PointPattern p = read_pattern(v_pattern, mask.dim());
      ThetaParams theta;
      if (!v_draws.empty()) {
        std::ifstream in(v_draws);
        if (!in) throw FormatError("cannot open " + v_draws);
        theta = PosteriorDraws::read_csv(in).mean();
      } else if (v_theta.size() == 3) {
        theta = ThetaParams{v_theta[0], v_theta[1], v_theta[2], Coords::constrained};
      } else {
        throw DomainError("envelope needs --theta or --draws");
      }
      const auto r = default_zpf_grid(v_count, v_rmax);
      const EnvelopeCurve c = envelope(theta, mask, p, v_sims, r, g.seed);
      auto f = out.open("envelope.csv");
      c.write_csv(f);
      OutputDir::close(f, "envelope.csv");
      std::cout << "observed inside band at " << c.coverage() * 100.0 << "% of radii\n";
    }
    out.report();
    return 0;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ResourceError& e) {
    std::cerr << "resource limit: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
