#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "lgcpflow/errors.hpp"
#include "lgcpflow/flow.hpp"
#include "lgcpflow/rng.hpp"
#include "mlp_ops.hpp"

namespace lgcpflow {

void InnArchitecture::validate() const {
  if (dim < 1) throw DomainError("flow dimension must be >= 1");
  if (summary_dim < 0) throw DomainError("summary dimension must be >= 0");
  if (n_blocks < 1) throw DomainError("flow needs at least one block");
  if (hidden < 1) throw DomainError("hidden width must be >= 1");
  if (!(clamp > 0.0)) throw DomainError("scale clamp must be positive");
}

namespace {

DenseLayout add_dense(std::size_t& cursor, int data_in, int cond_in, int out) {
  DenseLayout l;
  l.data_in = data_in;
  l.cond_in = cond_in;
  l.out = out;
  l.w = cursor;
  cursor += static_cast<std::size_t>(out) * static_cast<std::size_t>(data_in + cond_in);
  l.b = cursor;
  cursor += static_cast<std::size_t>(out);
  return l;
}

MlpLayout add_mlp(std::size_t& cursor, int data_in, int cond_in, int hidden, int out) {
  MlpLayout m;
  m.l0 = add_dense(cursor, data_in, cond_in, hidden);
  m.l1 = add_dense(cursor, hidden, 0, hidden);
  m.l2 = add_dense(cursor, hidden, 0, out);
  return m;
}

void glorot(std::span<double> params, const DenseLayout& l, Rng& rng) {
  const double limit = std::sqrt(6.0 / (l.in() + l.out));
  std::uniform_real_distribution<double> u(-limit, limit);
  const std::size_t n = static_cast<std::size_t>(l.out) * static_cast<std::size_t>(l.in());
  for (std::size_t i = 0; i < n; ++i) params[l.w + i] = u(rng);
}

}  // namespace

void ConditionalInn::build_layout() {
  arch_.validate();
  blocks_.clear();
  std::size_t cursor = 0;
  const int c = arch_.summary_dim, h = arch_.hidden, d1 = arch_.d1(), d2 = arch_.d2();
  for (int k = 0; k < arch_.n_blocks; ++k) {
    BlockLayout b;
    b.s1 = add_mlp(cursor, d2, c, h, d1);
    b.t1 = add_mlp(cursor, d2, c, h, d1);
    b.s2 = add_mlp(cursor, d1, c, h, d2);
    b.t2 = add_mlp(cursor, d1, c, h, d2);
    blocks_.push_back(b);
  }
  params_.assign(cursor, 0.0);
}

ConditionalInn::ConditionalInn(const InnArchitecture& arch, std::uint64_t seed) : arch_(arch), seed_(seed) {
  build_layout();
  Rng rng = make_rng(seed);
  for (const auto& b : blocks_)
    for (const MlpLayout* m : {&b.s1, &b.t1, &b.s2, &b.t2}) {
      glorot(params_, m->l0, rng);
      glorot(params_, m->l1, rng);
    }
  perms_.resize(static_cast<std::size_t>(arch_.n_blocks));
  for (auto& p : perms_) {
    p.resize(static_cast<std::size_t>(arch_.dim));
    std::iota(p.begin(), p.end(), 0);
    std::shuffle(p.begin(), p.end(), rng);
  }
}

ConditionalInn::ConditionalInn(const InnArchitecture& arch, std::uint64_t seed,
                               std::vector<std::vector<int>> permutations, std::vector<double> params)
    : arch_(arch), seed_(seed), perms_(std::move(permutations)) {
  build_layout();
  if (params.size() != params_.size())
    throw DomainError("parameter count " + std::to_string(params.size()) + " does not match architecture (" +
                      std::to_string(params_.size()) + ")");
  params_ = std::move(params);
  if (perms_.size() != static_cast<std::size_t>(arch_.n_blocks)) throw DomainError("one permutation per block required");
  for (const auto& p : perms_) {
    std::vector<int> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> expect(static_cast<std::size_t>(arch_.dim));
    std::iota(expect.begin(), expect.end(), 0);
    if (sorted != expect) throw DomainError("invalid coordinate permutation");
  }
}

void ConditionalInn::check_inputs(std::span<const double> v, std::span<const double> cond) const {
  if (v.size() != static_cast<std::size_t>(arch_.dim))
    throw DomainError("flow input has " + std::to_string(v.size()) + " entries, expected " + std::to_string(arch_.dim));
  if (cond.size() != static_cast<std::size_t>(arch_.summary_dim))
    throw DomainError("summary has " + std::to_string(cond.size()) + " entries, expected " +
                      std::to_string(arch_.summary_dim));
}

FlowOutput ConditionalInn::block_forward(std::size_t block, std::span<const double> x,
                                         std::span<const double> cond) const {
  check_inputs(x, cond);
  const BlockLayout& b = blocks_.at(block);
  const double* p = params_.data();
  const auto d1 = static_cast<std::size_t>(arch_.d1()), d2 = static_cast<std::size_t>(arch_.d2());
  detail::MlpScratch scratch(arch_.hidden);
  std::vector<double> s(std::max(d1, d2)), t(std::max(d1, d2));
  FlowOutput out{std::vector<double>(x.begin(), x.end()), 0.0};
  double* g1 = out.y.data();
  double* g2 = out.y.data() + d1;
  const double* x2 = x.data() + d1;

  detail::mlp(p, b.s1, x2, cond.data(), nullptr, scratch, s.data());
  detail::mlp(p, b.t1, x2, cond.data(), nullptr, scratch, t.data());
  for (std::size_t i = 0; i < d1; ++i) {
    const double si = detail::soft_clamp(s[i], arch_.clamp);
    g1[i] = x[i] * std::exp(si) + t[i];
    out.logdet += si;
  }
  detail::mlp(p, b.s2, g1, cond.data(), nullptr, scratch, s.data());
  detail::mlp(p, b.t2, g1, cond.data(), nullptr, scratch, t.data());
  for (std::size_t i = 0; i < d2; ++i) {
    const double si = detail::soft_clamp(s[i], arch_.clamp);
    g2[i] = x2[i] * std::exp(si) + t[i];
    out.logdet += si;
  }
  return out;
}

std::vector<double> ConditionalInn::block_inverse(std::size_t block, std::span<const double> g,
                                                  std::span<const double> cond) const {
  check_inputs(g, cond);
  const BlockLayout& b = blocks_.at(block);
  const double* p = params_.data();
  const auto d1 = static_cast<std::size_t>(arch_.d1()), d2 = static_cast<std::size_t>(arch_.d2());
  detail::MlpScratch scratch(arch_.hidden);
  std::vector<double> s(std::max(d1, d2)), t(std::max(d1, d2));
  std::vector<double> x(g.begin(), g.end());
  const double* g1 = g.data();
  double* x2 = x.data() + d1;

  detail::mlp(p, b.s2, g1, cond.data(), nullptr, scratch, s.data());
  detail::mlp(p, b.t2, g1, cond.data(), nullptr, scratch, t.data());
  for (std::size_t i = 0; i < d2; ++i) x2[i] = (g[d1 + i] - t[i]) * std::exp(-detail::soft_clamp(s[i], arch_.clamp));
  detail::mlp(p, b.s1, x2, cond.data(), nullptr, scratch, s.data());
  detail::mlp(p, b.t1, x2, cond.data(), nullptr, scratch, t.data());
  for (std::size_t i = 0; i < d1; ++i) x[i] = (g1[i] - t[i]) * std::exp(-detail::soft_clamp(s[i], arch_.clamp));
  return x;
}

FlowOutput ConditionalInn::forward(std::span<const double> x, std::span<const double> cond) const {
  check_inputs(x, cond);
  for (double v : x)
    if (!std::isfinite(v)) throw DomainError("non-finite flow input");
  FlowOutput out{std::vector<double>(x.begin(), x.end()), 0.0};
  std::vector<double> permuted(x.size());
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const auto& perm = perms_[k];
    for (std::size_t i = 0; i < permuted.size(); ++i) permuted[i] = out.y[static_cast<std::size_t>(perm[i])];
    FlowOutput step = block_forward(k, permuted, cond);
    out.y = std::move(step.y);
    out.logdet += step.logdet;
  }
  return out;
}

std::vector<double> ConditionalInn::inverse(std::span<const double> y, std::span<const double> cond) const {
  check_inputs(y, cond);
  for (double v : y)
    if (!std::isfinite(v)) throw DomainError("non-finite flow input");
  std::vector<double> x(y.begin(), y.end());
  for (std::size_t k = blocks_.size(); k-- > 0;) {
    std::vector<double> permuted = block_inverse(k, x, cond);
    const auto& perm = perms_[k];
    for (std::size_t i = 0; i < permuted.size(); ++i) x[static_cast<std::size_t>(perm[i])] = permuted[i];
  }
  return x;
}

std::string ConditionalInn::describe_param(std::size_t index) const {
  static const char* nets[] = {"s1", "t1", "s2", "t2"};
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const BlockLayout& b = blocks_[k];
    const MlpLayout* ms[] = {&b.s1, &b.t1, &b.s2, &b.t2};
    for (int n = 0; n < 4; ++n) {
      const DenseLayout* ls[] = {&ms[n]->l0, &ms[n]->l1, &ms[n]->l2};
      for (int li = 0; li < 3; ++li) {
        const DenseLayout& l = *ls[li];
        const std::size_t wn = static_cast<std::size_t>(l.out) * static_cast<std::size_t>(l.in());
        std::ostringstream s;
        s << "block" << k << '.' << nets[n] << ".l" << li;
        if (index >= l.w && index < l.w + wn) {
          s << ".w[" << index - l.w << ']';
          return s.str();
        }
        if (index >= l.b && index < l.b + static_cast<std::size_t>(l.out)) {
          s << ".b[" << index - l.b << ']';
          return s.str();
        }
      }
    }
  }
  return "param[" + std::to_string(index) + "]";
}

FlowOutput acb_forward(const ConditionalInn& net, std::size_t block, std::span<const double> x,
                       std::span<const double> cond) {
  return net.block_forward(block, x, cond);
}

std::vector<double> acb_inverse(const ConditionalInn& net, std::size_t block, std::span<const double> g,
                                std::span<const double> cond) {
  return net.block_inverse(block, g, cond);
}

FlowOutput cinn_forward(const ConditionalInn& net, std::span<const double> theta_u, std::span<const double> cond) {
  return net.forward(theta_u, cond);
}

std::vector<double> cinn_inverse(const ConditionalInn& net, std::span<const double> y, std::span<const double> cond) {
  return net.inverse(y, cond);
}

void GradientTape::zero() { std::fill(grad.begin(), grad.end(), 0.0); }

bool GradientTape::finite() const {
  return std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); });
}

double batch_loss(const ConditionalInn& net, std::span<const FlowSample> batch) {
  if (batch.empty()) throw DomainError("batch_loss on an empty batch");
  double total = 0.0;
  for (const auto& item : batch) {
    const FlowOutput f = net.forward(item.theta_u, item.summary);
    double sq = 0.0;
    for (double v : f.y) sq += v * v;
    total += 0.5 * sq - f.logdet;
  }
  return total / static_cast<double>(batch.size());
}

void sgd_step(ConditionalInn& net, const GradientTape& tape, double lr) {
  if (!(lr > 0.0)) throw DomainError("learning rate must be positive");
  auto p = net.params();
  if (tape.grad.size() != p.size()) throw DomainError("gradient tape does not match network");
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * tape.grad[i];
}

double scheduled_learning_rate(double lr0, long iteration, double decay, long every) {
  return lr0 * std::pow(decay, static_cast<double>(iteration / every));
}

}  // namespace lgcpflow
