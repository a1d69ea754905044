#include <cmath>

#include "lgcpflow/errors.hpp"
#include "lgcpflow/flow.hpp"
#include "mlp_ops.hpp"

namespace lgcpflow {

namespace {

std::vector<double> first_layer_bias(const double* p, const DenseLayout& l, std::span<const double> cond) {
  std::vector<double> bias(static_cast<std::size_t>(l.out));
  const int in = l.in();
  for (int o = 0; o < l.out; ++o) {
    const double* row = p + l.w + static_cast<std::size_t>(o) * static_cast<std::size_t>(in);
    double acc = p[l.b + static_cast<std::size_t>(o)];
    for (int j = 0; j < l.cond_in; ++j) acc += row[l.data_in + j] * cond[static_cast<std::size_t>(j)];
    bias[static_cast<std::size_t>(o)] = acc;
  }
  return bias;
}

}  // namespace

ConditionedInverse::ConditionedInverse(const ConditionalInn& net, std::span<const double> cond)
    : net_(&net), cond_(cond.begin(), cond.end()) {
  if (cond.size() != static_cast<std::size_t>(net.arch().summary_dim))
    throw DomainError("summary length does not match the network");
  const double* p = net.params().data();
  for (const auto& b : net.blocks())
    for (const MlpLayout* m : {&b.s1, &b.t1, &b.s2, &b.t2}) biases_.push_back(first_layer_bias(p, m->l0, cond_));
}

void ConditionedInverse::inverse(std::span<const double> y, std::span<double> x) const {
  const InnArchitecture& a = net_->arch();
  const auto d = static_cast<std::size_t>(a.dim), d1 = static_cast<std::size_t>(a.d1()),
             d2 = static_cast<std::size_t>(a.d2());
  if (y.size() != d || x.size() != d) throw DomainError("latent dimension mismatch");
  const double* p = net_->params().data();
  detail::MlpScratch scratch(a.hidden);
  std::vector<double> s(d), t(d), g(y.begin(), y.end()), inner(d);

  const auto& blocks = net_->blocks();
  const auto& perms = net_->permutations();
  for (std::size_t k = blocks.size(); k-- > 0;) {
    const BlockLayout& b = blocks[k];
    const std::vector<double>* bias = &biases_[4 * k];
    const double* g1 = g.data();
    double* x2 = inner.data() + d1;
    detail::mlp(p, b.s2, g1, nullptr, bias[2].data(), scratch, s.data());
    detail::mlp(p, b.t2, g1, nullptr, bias[3].data(), scratch, t.data());
    for (std::size_t i = 0; i < d2; ++i) x2[i] = (g[d1 + i] - t[i]) * std::exp(-detail::soft_clamp(s[i], a.clamp));
    detail::mlp(p, b.s1, x2, nullptr, bias[0].data(), scratch, s.data());
    detail::mlp(p, b.t1, x2, nullptr, bias[1].data(), scratch, t.data());
    for (std::size_t i = 0; i < d1; ++i) inner[i] = (g1[i] - t[i]) * std::exp(-detail::soft_clamp(s[i], a.clamp));
    for (std::size_t i = 0; i < d; ++i) g[static_cast<std::size_t>(perms[k][i])] = inner[i];
  }
  std::copy(g.begin(), g.end(), x.begin());
}

namespace kernels {

std::vector<double> inverse_batch(const ConditionalInn& net, std::span<const double> cond,
                                  std::span<const double> ys) {
  const auto d = static_cast<std::size_t>(net.arch().dim);
  if (ys.size() % d != 0) throw DomainError("latent batch is not a whole number of rows");
  const ConditionedInverse inv(net, cond);
  const std::size_t rows = ys.size() / d;
  std::vector<double> out(ys.size());
  const auto count = static_cast<long>(rows);
#pragma omp parallel for schedule(static)
  for (long r = 0; r < count; ++r) {
    const auto off = static_cast<std::size_t>(r) * d;
    inv.inverse(ys.subspan(off, d), std::span<double>(out).subspan(off, d));
  }
  return out;
}

}  // namespace kernels

namespace reference {

std::vector<double> inverse_batch(const ConditionalInn& net, std::span<const double> cond,
                                  std::span<const double> ys) {
  const auto d = static_cast<std::size_t>(net.arch().dim);
  if (ys.size() % d != 0) throw DomainError("latent batch is not a whole number of rows");
  std::vector<double> out;
  out.reserve(ys.size());
  for (std::size_t off = 0; off < ys.size(); off += d) {
    std::vector<double> x = net.inverse(ys.subspan(off, d), cond);
    out.insert(out.end(), x.begin(), x.end());
  }
  return out;
}

}  // namespace reference

}  // namespace lgcpflow
