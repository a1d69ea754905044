#include <cmath>
#include <sstream>

#include "lgcpflow/amortizer.hpp"
#include "lgcpflow/errors.hpp"

namespace lgcpflow {

namespace {

struct PreparedRecords {
  std::size_t dim = 3;
  std::size_t summary_dim = 0;
  std::vector<double> theta_u;   // row-major, records x 3
  std::vector<double> summaries;  // row-major, records x summary_dim

  void append(const BankRecord& r, const PriorBox& box, const SummaryStandardizer& standardizer) {
    const auto u = to_unconstrained_clamped(r.theta, box).as_array();
    theta_u.insert(theta_u.end(), u.begin(), u.end());
    const std::size_t at = summaries.size();
    summaries.insert(summaries.end(), r.summary.begin(), r.summary.end());
    standardizer.apply_inplace(std::span<double>(summaries).subspan(at, summary_dim));
  }

  FlowSample sample(std::size_t i) const {
    return {std::span<const double>(theta_u).subspan(i * dim, dim),
            std::span<const double>(summaries).subspan(i * summary_dim, summary_dim)};
  }
};

}  // namespace

Checkpoint initial_checkpoint(const SimulationBank& bank, const TrainOptions& options) {
  bank.validate();
  if (bank.meta.standardized && options.standardize)
    throw DomainError("bank summaries are already standardized; refusing to standardize twice");
  Checkpoint c;
  c.manifest.config = bank.meta.config;
  c.manifest.grid = bank.meta.grid;
  c.manifest.prior = PriorBox::for_window_measure(1.0);
  c.manifest.standardized = options.standardize;
  c.manifest.bank_seed = bank.meta.seed;
  c.manifest.train_seed = options.seed;
  c.manifest.lr0 = options.lr0;

  const std::size_t len = bank.meta.config.length();
  if (options.standardize) {
    std::vector<std::vector<double>> rows;
    rows.reserve(bank.size());
    for (const auto& r : bank.records) rows.push_back(r.summary);
    c.standardizer = SummaryStandardizer::fit(std::span<const std::vector<double>>(rows));
  } else {
    c.standardizer = SummaryStandardizer::identity(len);
  }

  InnArchitecture arch;
  arch.dim = 3;
  arch.summary_dim = static_cast<int>(len);
  arch.n_blocks = options.n_blocks;
  arch.hidden = options.hidden;
  arch.clamp = options.clamp;
  c.net = ConditionalInn(arch, derive_seed(options.seed, 0xA11CE));
  return c;
}

TrainResult train(const SimulationBank& bank, const TrainOptions& options, const DomainMask* online_mask) {
  if (options.iters < 1) throw DomainError("training needs at least one iteration");
  if (options.batch_size < 1) throw DomainError("batch size must be >= 1");
  if (options.online && !online_mask) throw DomainError("online training needs a domain mask");
  if (online_mask && online_mask->dim() != bank.meta.dim()) throw DomainError("online mask dimension differs from bank");

  TrainResult result{initial_checkpoint(bank, options), {}};
  Checkpoint& ckpt = result.checkpoint;
  const PriorBox& box = ckpt.manifest.prior;

  PreparedRecords prepared;
  prepared.summary_dim = bank.meta.config.length();
  if (!options.online)
    for (const auto& r : bank.records) prepared.append(r, box, ckpt.standardizer);

  Rng rng = make_rng(options.seed, 1);
  std::uniform_int_distribution<std::size_t> pick(0, bank.size() - 1);
  GradientTape tape(ckpt.net.param_count());
  std::vector<FlowSample> batch(static_cast<std::size_t>(options.batch_size));
  result.loss_trace.reserve(static_cast<std::size_t>(options.iters));

  for (long it = 0; it < options.iters; ++it) {
    if (options.online) {
      // Fresh (theta, summary) pairs per iteration, one stream per item.
      prepared.theta_u.clear();
      prepared.summaries.clear();
      const BankOptions sim_opts;
      const SimulationBank fresh =
          reference::build_bank(static_cast<std::size_t>(std::max(options.batch_size, 2)), *online_mask,
                                bank.meta.config, derive_seed(options.seed, 1000 + static_cast<std::uint64_t>(it)),
                                sim_opts);
      for (std::size_t j = 0; j < batch.size(); ++j) prepared.append(fresh.records[j], box, ckpt.standardizer);
      for (std::size_t j = 0; j < batch.size(); ++j) batch[j] = prepared.sample(j);
    } else {
      for (auto& item : batch) item = prepared.sample(pick(rng));
    }

    tape.zero();
    double loss = 0.0;
    try {
      loss = batch_backward(ckpt.net, batch, tape);
    } catch (const NumericalError& e) {
      throw NumericalError("training diverged at iteration " + std::to_string(it) + ": " + e.what());
    }
    result.loss_trace.push_back(loss);
    sgd_step(ckpt.net, tape, scheduled_learning_rate(options.lr0, it, options.decay, options.decay_every));
  }
  ckpt.manifest.iterations = options.iters;
  return result;
}

PosteriorDraws infer(const Checkpoint& ckpt, const PointPattern& pattern, std::size_t draws, std::uint64_t seed) {
  if (pattern.dim != ckpt.dim())
    throw DomainError("pattern is " + std::to_string(pattern.dim) + "-D but the checkpoint was trained on " +
                      std::to_string(ckpt.dim()) + "-D data");
  if (draws < 1) throw DomainError("at least one posterior draw is required");
  SummaryVector s = compose_summary(pattern, ckpt.manifest.config);
  if (s.size() != static_cast<std::size_t>(ckpt.net.arch().summary_dim))
    throw DomainError("summary length does not match the checkpoint");
  ckpt.standardizer.apply_inplace(s.values);

  Rng rng = make_rng(seed);
  std::vector<double> latent(draws * 3);
  for (auto& v : latent) v = standard_normal(rng);
  const std::vector<double> theta_u = kernels::inverse_batch(ckpt.net, s.values, latent);

  PosteriorDraws out;
  out.draws.reserve(draws);
  for (std::size_t l = 0; l < draws; ++l) {
    const ThetaParams u{theta_u[3 * l], theta_u[3 * l + 1], theta_u[3 * l + 2], Coords::unconstrained};
    out.draws.push_back(to_constrained(u, ckpt.manifest.prior));
  }
  std::ostringstream src;
  src << "checkpoint(bank_seed=" << ckpt.manifest.bank_seed << ",train_seed=" << ckpt.manifest.train_seed
      << ") pattern(n=" << pattern.n() << ") seed=" << seed;
  out.source = src.str();
  return out;
}

std::vector<std::vector<double>> encode(const Checkpoint& ckpt, const std::vector<BankRecord>& records) {
  std::vector<std::vector<double>> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    std::vector<double> s = r.summary;
    ckpt.standardizer.apply_inplace(s);
    const auto u = to_unconstrained_clamped(r.theta, ckpt.manifest.prior).as_array();
    out.push_back(ckpt.net.forward(u, s).y);
  }
  return out;
}

}  // namespace lgcpflow
