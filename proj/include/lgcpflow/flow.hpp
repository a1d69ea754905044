#pragma once

// Conditional invertible network built from affine coupling blocks.
//
// Every trainable value lives in one flat parameter vector; the layout
// structs below hold offsets into it. Block k applies a fixed coordinate
// permutation and then the coupling
//
//   g1 = x1 * exp(s1(x2, c)) + t1(x2, c)
//   g2 = x2 * exp(s2(g1, c)) + t2(g1, c)
//
// where c is the (standardized) summary vector, the s/t nets are two-hidden-
// layer tanh MLPs and scale outputs pass through clamp * tanh(. / clamp).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lgcpflow {

struct InnArchitecture {
  int dim = 3;
  int summary_dim = 55;
  int n_blocks = 12;
  int hidden = 64;
  double clamp = 2.0;

  int d1() const { return dim / 2; }
  int d2() const { return dim - dim / 2; }
  void validate() const;
  friend bool operator==(const InnArchitecture&, const InnArchitecture&) = default;
};

// Dense layer: W is out x (data_in + cond_in), row-major, data columns first.
struct DenseLayout {
  std::size_t w = 0;
  std::size_t b = 0;
  int data_in = 0;
  int cond_in = 0;
  int out = 0;
  int in() const { return data_in + cond_in; }
};

struct MlpLayout {
  DenseLayout l0, l1, l2;
};

struct BlockLayout {
  MlpLayout s1, t1, s2, t2;
};

struct FlowOutput {
  std::vector<double> y;
  double logdet = 0.0;
};

class ConditionalInn {
 public:
  ConditionalInn() = default;
  // Glorot-uniform hidden layers, zero output layers (identity flow), random
  // permutations; all drawn from `seed`.
  ConditionalInn(const InnArchitecture& arch, std::uint64_t seed);
  // Rebuild from stored parts.
  ConditionalInn(const InnArchitecture& arch, std::uint64_t seed,
                 std::vector<std::vector<int>> permutations, std::vector<double> params);

  const InnArchitecture& arch() const { return arch_; }
  std::uint64_t seed() const { return seed_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }
  const std::vector<BlockLayout>& blocks() const { return blocks_; }
  const std::vector<std::vector<int>>& permutations() const { return perms_; }

  // One coupling block, without its permutation.
  FlowOutput block_forward(std::size_t block, std::span<const double> x, std::span<const double> cond) const;
  std::vector<double> block_inverse(std::size_t block, std::span<const double> g,
                                    std::span<const double> cond) const;

  FlowOutput forward(std::span<const double> x, std::span<const double> cond) const;
  std::vector<double> inverse(std::span<const double> y, std::span<const double> cond) const;

  // Name of the parameter at a flat index, e.g. "block3.t2.l1.w[5]".
  std::string describe_param(std::size_t index) const;

 private:
  void build_layout();
  void check_inputs(std::span<const double> v, std::span<const double> cond) const;

  InnArchitecture arch_{};
  std::uint64_t seed_ = 0;
  std::vector<BlockLayout> blocks_;
  std::vector<std::vector<int>> perms_;
  std::vector<double> params_;
};

// Free-function forms of the block and network passes.
FlowOutput acb_forward(const ConditionalInn& net, std::size_t block, std::span<const double> x,
                       std::span<const double> cond);
std::vector<double> acb_inverse(const ConditionalInn& net, std::size_t block, std::span<const double> g,
                                std::span<const double> cond);
FlowOutput cinn_forward(const ConditionalInn& net, std::span<const double> theta_u, std::span<const double> cond);
std::vector<double> cinn_inverse(const ConditionalInn& net, std::span<const double> y,
                                 std::span<const double> cond);

struct FlowSample {
  std::span<const double> theta_u;
  std::span<const double> summary;
};

struct GradientTape {
  std::vector<double> grad;

  GradientTape() = default;
  explicit GradientTape(std::size_t n) : grad(n, 0.0) {}
  void zero();
  bool finite() const;
};

// Mean over the batch of ||f(theta; c)||^2 / 2 - log|det J|.
double batch_loss(const ConditionalInn& net, std::span<const FlowSample> batch);

// Exact reverse-mode gradient of batch_loss into `tape` (accumulated, so
// zero it first). Returns the loss. OpenMP over fixed item chunks.
double batch_backward(const ConditionalInn& net, std::span<const FlowSample> batch, GradientTape& tape);

void sgd_step(ConditionalInn& net, const GradientTape& tape, double lr);

// lr0 * decay^floor(iteration / every).
double scheduled_learning_rate(double lr0, long iteration, double decay = 0.95, long every = 1000);

// Inverse pass for many latent vectors under one conditioning vector. The
// conditioning contribution to every first layer is computed once up front.
class ConditionedInverse {
 public:
  ConditionedInverse(const ConditionalInn& net, std::span<const double> cond);
  void inverse(std::span<const double> y, std::span<double> x) const;

 private:
  const ConditionalInn* net_;
  std::vector<double> cond_;
  // Per block, per net (s1, t1, s2, t2): b0 + W0_cond * cond.
  std::vector<std::vector<double>> biases_;
};

namespace kernels {
// ys and the result are row-major (count x dim).
std::vector<double> inverse_batch(const ConditionalInn& net, std::span<const double> cond, std::span<const double> ys);
}  // namespace kernels

namespace reference {
std::vector<double> inverse_batch(const ConditionalInn& net, std::span<const double> cond, std::span<const double> ys);
double batch_backward(const ConditionalInn& net, std::span<const FlowSample> batch, GradientTape& tape);
}  // namespace reference

}  // namespace lgcpflow
