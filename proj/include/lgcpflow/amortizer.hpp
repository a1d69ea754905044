#pragma once

// Amortized posterior estimation: build a simulation bank from the prior,
// train the conditional flow once, then answer any number of datasets by
// pushing Gaussian latent draws back through the inverse network.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lgcpflow/flow.hpp"
#include "lgcpflow/pointproc.hpp"
#include "lgcpflow/posterior.hpp"
#include "lgcpflow/summaries.hpp"

namespace lgcpflow {

struct BankMeta {
  SummaryConfig config;
  int grid = 0;
  std::uint64_t seed = 0;
  double admissible_area = 1.0;
  bool standardized = false;  // summaries in the bank are raw unless set

  int dim() const { return config.dim; }
};

struct BankRecord {
  ThetaParams theta;
  std::vector<double> summary;
};

struct SimulationBank {
  BankMeta meta;
  std::vector<BankRecord> records;

  std::size_t size() const { return records.size(); }
  void validate() const;

  // One manifest line ("# lgcpflow-bank key=value ...") then CSV records
  // mu,rho,sigma2,s0,...; doubles printed in shortest round-trip form.
  void write(std::ostream& out) const;
  static SimulationBank read(std::istream& in);
  void write_file(const std::string& path) const;
  static SimulationBank read_file(const std::string& path);
};

struct BankOptions {
  double count_cap = kDefaultCountCap;
  int retry_cap = 20;  // resamples of theta per record after a resource error
};

// Record i is drawn from stream i of `seed`, so the result does not depend
// on the OpenMP thread count.
SimulationBank build_bank(std::size_t n_sims, const DomainMask& mask, const SummaryConfig& config,
                          std::uint64_t seed, const BankOptions& options = {});

namespace reference {
SimulationBank build_bank(std::size_t n_sims, const DomainMask& mask, const SummaryConfig& config,
                          std::uint64_t seed, const BankOptions& options = {});
}

struct CheckpointManifest {
  int version = 1;
  SummaryConfig config;
  int grid = 0;
  PriorBox prior;
  bool standardized = true;
  long iterations = 0;
  std::uint64_t bank_seed = 0;
  std::uint64_t train_seed = 0;
  double lr0 = 0.0;
};

struct Checkpoint {
  CheckpointManifest manifest;
  ConditionalInn net;
  SummaryStandardizer standardizer;

  int dim() const { return manifest.config.dim; }
};

inline constexpr int kCheckpointVersion = 1;

// "CXFL", u64 manifest length, key = value manifest text, little-endian f64
// weights, u64 FNV-1a checksum of every preceding byte.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

struct TrainOptions {
  long iters = 3000;
  int batch_size = 16;
  double lr0 = 1e-6;
  double decay = 0.95;
  long decay_every = 1000;
  bool standardize = true;
  std::uint64_t seed = 1;
  int n_blocks = 12;
  int hidden = 64;
  double clamp = 2.0;
  // Simulate each batch fresh instead of sampling the bank; the bank is then
  // used only to fit the standardizer.
  bool online = false;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> loss_trace;
};

// Identity-initialized network for the bank's summary layout, with the
// standardizer fitted (or identity when standardize is false).
Checkpoint initial_checkpoint(const SimulationBank& bank, const TrainOptions& options);

TrainResult train(const SimulationBank& bank, const TrainOptions& options, const DomainMask* online_mask = nullptr);

inline constexpr std::size_t kDefaultPosteriorDraws = 10000;

PosteriorDraws infer(const Checkpoint& ckpt, const PointPattern& pattern, std::size_t draws, std::uint64_t seed);

// Latent codes f(theta_u; standardized summary) for bank records.
std::vector<std::vector<double>> encode(const Checkpoint& ckpt, const std::vector<BankRecord>& records);

}  // namespace lgcpflow
