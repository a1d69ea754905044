#include <algorithm>
#include <cmath>

#include "lgcpflow/errors.hpp"
#include "lgcpflow/flow.hpp"
#include "mlp_ops.hpp"

namespace lgcpflow {

namespace {

struct MlpCache {
  std::vector<double> x, h1, h2;
};

struct BlockCache {
  std::vector<double> x;  // block input after permutation
  std::vector<double> g1;
  std::vector<double> s1, s2;  // clamped scales
  std::vector<double> e1, e2;  // exp(scales)
  MlpCache s1c, t1c, s2c, t2c;
};

struct Workspace {
  std::vector<BlockCache> blocks;
  std::vector<double> raw, t;             // nets' outputs
  std::vector<double> dz1, dz2, dh1, dh2;  // hidden-layer adjoints
  std::vector<double> d_out_s, d_out_t;
  std::vector<double> dcur, dnext, dg1, dx2;

  explicit Workspace(const InnArchitecture& a) {
    const auto h = static_cast<std::size_t>(a.hidden), d = static_cast<std::size_t>(a.dim);
    blocks.resize(static_cast<std::size_t>(a.n_blocks));
    for (auto& b : blocks) {
      b.x.resize(d);
      b.g1.resize(static_cast<std::size_t>(a.d1()));
      b.s1.resize(static_cast<std::size_t>(a.d1()));
      b.e1.resize(static_cast<std::size_t>(a.d1()));
      b.s2.resize(static_cast<std::size_t>(a.d2()));
      b.e2.resize(static_cast<std::size_t>(a.d2()));
      for (MlpCache* c : {&b.s1c, &b.t1c, &b.s2c, &b.t2c}) {
        c->h1.resize(h);
        c->h2.resize(h);
      }
    }
    raw.resize(d);
    t.resize(d);
    dz1.resize(h);
    dz2.resize(h);
    dh1.resize(h);
    dh2.resize(h);
    d_out_s.resize(d);
    d_out_t.resize(d);
    dcur.resize(d);
    dnext.resize(d);
    dg1.resize(d);
    dx2.resize(d);
  }
};

void mlp_forward_cached(const double* p, const MlpLayout& m, const double* x, const double* cond, MlpCache& c,
                        double* out) {
  c.x.assign(x, x + m.l0.data_in);
  detail::dense(p, m.l0, x, cond, c.h1.data());
  detail::tanh_inplace(c.h1.data(), m.l0.out);
  detail::dense(p, m.l1, c.h1.data(), nullptr, c.h2.data());
  detail::tanh_inplace(c.h2.data(), m.l1.out);
  detail::dense(p, m.l2, c.h2.data(), nullptr, out);
}

// Accumulates parameter adjoints into `grad` and input adjoints into `dx`.
void mlp_backward(const double* p, const MlpLayout& m, const MlpCache& c, const double* cond, const double* dout,
                  double* grad, double* dx, Workspace& ws) {
  const int h = m.l1.out;
  std::fill(ws.dh2.begin(), ws.dh2.end(), 0.0);
  {
    const DenseLayout& l = m.l2;
    for (int o = 0; o < l.out; ++o) {
      const double d = dout[o];
      grad[l.b + static_cast<std::size_t>(o)] += d;
      const std::size_t row = l.w + static_cast<std::size_t>(o) * static_cast<std::size_t>(h);
      for (int j = 0; j < h; ++j) {
        grad[row + static_cast<std::size_t>(j)] += d * c.h2[static_cast<std::size_t>(j)];
        ws.dh2[static_cast<std::size_t>(j)] += p[row + static_cast<std::size_t>(j)] * d;
      }
    }
  }
  for (int j = 0; j < h; ++j) {
    const double v = c.h2[static_cast<std::size_t>(j)];
    ws.dz2[static_cast<std::size_t>(j)] = ws.dh2[static_cast<std::size_t>(j)] * (1.0 - v * v);
  }
  std::fill(ws.dh1.begin(), ws.dh1.end(), 0.0);
  {
    const DenseLayout& l = m.l1;
    for (int o = 0; o < l.out; ++o) {
      const double d = ws.dz2[static_cast<std::size_t>(o)];
      grad[l.b + static_cast<std::size_t>(o)] += d;
      const std::size_t row = l.w + static_cast<std::size_t>(o) * static_cast<std::size_t>(l.in());
      for (int j = 0; j < l.in(); ++j) {
        grad[row + static_cast<std::size_t>(j)] += d * c.h1[static_cast<std::size_t>(j)];
        ws.dh1[static_cast<std::size_t>(j)] += p[row + static_cast<std::size_t>(j)] * d;
      }
    }
  }
  const int h0 = m.l0.out;
  for (int j = 0; j < h0; ++j) {
    const double v = c.h1[static_cast<std::size_t>(j)];
    ws.dz1[static_cast<std::size_t>(j)] = ws.dh1[static_cast<std::size_t>(j)] * (1.0 - v * v);
  }
  {
    const DenseLayout& l = m.l0;
    for (int o = 0; o < l.out; ++o) {
      const double d = ws.dz1[static_cast<std::size_t>(o)];
      grad[l.b + static_cast<std::size_t>(o)] += d;
      const std::size_t row = l.w + static_cast<std::size_t>(o) * static_cast<std::size_t>(l.in());
      for (int j = 0; j < l.data_in; ++j) {
        grad[row + static_cast<std::size_t>(j)] += d * c.x[static_cast<std::size_t>(j)];
        dx[j] += p[row + static_cast<std::size_t>(j)] * d;
      }
      double* gc = grad + row + static_cast<std::size_t>(l.data_in);
      for (int j = 0; j < l.cond_in; ++j) gc[j] += d * cond[j];
    }
  }
}

// Loss contribution weight * (||y||^2 / 2 - logdet) of one item; adds its
// gradient into `grad` and returns the unweighted item loss.
double item_backward(const ConditionalInn& net, const FlowSample& item, double weight, double* grad,
                     Workspace& ws) {
  const InnArchitecture& a = net.arch();
  const double* p = net.params().data();
  const double* cond = item.summary.data();
  const auto d = static_cast<std::size_t>(a.dim), d1 = static_cast<std::size_t>(a.d1()),
             d2 = static_cast<std::size_t>(a.d2());
  const auto& blocks = net.blocks();
  const auto& perms = net.permutations();

  // Forward with caches.
  std::vector<double>& cur = ws.dcur;  // reused as the running state
  std::copy(item.theta_u.begin(), item.theta_u.end(), cur.begin());
  double logdet = 0.0;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    BlockCache& bc = ws.blocks[k];
    const BlockLayout& bl = blocks[k];
    for (std::size_t i = 0; i < d; ++i) bc.x[i] = cur[static_cast<std::size_t>(perms[k][i])];
    const double* x1 = bc.x.data();
    const double* x2 = bc.x.data() + d1;
    mlp_forward_cached(p, bl.s1, x2, cond, bc.s1c, ws.raw.data());
    mlp_forward_cached(p, bl.t1, x2, cond, bc.t1c, ws.t.data());
    for (std::size_t i = 0; i < d1; ++i) {
      bc.s1[i] = detail::soft_clamp(ws.raw[i], a.clamp);
      bc.e1[i] = std::exp(bc.s1[i]);
      bc.g1[i] = x1[i] * bc.e1[i] + ws.t[i];
      logdet += bc.s1[i];
    }
    mlp_forward_cached(p, bl.s2, bc.g1.data(), cond, bc.s2c, ws.raw.data());
    mlp_forward_cached(p, bl.t2, bc.g1.data(), cond, bc.t2c, ws.t.data());
    for (std::size_t i = 0; i < d2; ++i) {
      bc.s2[i] = detail::soft_clamp(ws.raw[i], a.clamp);
      bc.e2[i] = std::exp(bc.s2[i]);
      logdet += bc.s2[i];
    }
    for (std::size_t i = 0; i < d1; ++i) cur[i] = bc.g1[i];
    for (std::size_t i = 0; i < d2; ++i) cur[d1 + i] = x2[i] * bc.e2[i] + ws.t[i];
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < d; ++i) sq += cur[i] * cur[i];
  const double loss = 0.5 * sq - logdet;

  // Reverse sweep. dcur holds dL/d(block output).
  for (std::size_t i = 0; i < d; ++i) ws.dnext[i] = weight * cur[i];
  const double dlogdet = -weight;
  const double inv_clamp = 1.0 / a.clamp;
  for (std::size_t k = blocks.size(); k-- > 0;) {
    BlockCache& bc = ws.blocks[k];
    const BlockLayout& bl = blocks[k];
    const double* x1 = bc.x.data();
    const double* x2 = bc.x.data() + d1;
    const double* dg2 = ws.dnext.data() + d1;
    std::copy(ws.dnext.begin(), ws.dnext.begin() + static_cast<long>(d1), ws.dg1.begin());
    for (std::size_t i = 0; i < d2; ++i) {
      ws.dx2[i] = dg2[i] * bc.e2[i];
      const double ds = dg2[i] * x2[i] * bc.e2[i] + dlogdet;
      const double r = bc.s2[i] * inv_clamp;
      ws.d_out_s[i] = ds * (1.0 - r * r);
      ws.d_out_t[i] = dg2[i];
    }
    mlp_backward(p, bl.s2, bc.s2c, cond, ws.d_out_s.data(), grad, ws.dg1.data(), ws);
    mlp_backward(p, bl.t2, bc.t2c, cond, ws.d_out_t.data(), grad, ws.dg1.data(), ws);

    std::vector<double>& dx = ws.dcur;
    for (std::size_t i = 0; i < d1; ++i) {
      dx[i] = ws.dg1[i] * bc.e1[i];
      const double ds = ws.dg1[i] * x1[i] * bc.e1[i] + dlogdet;
      const double r = bc.s1[i] * inv_clamp;
      ws.d_out_s[i] = ds * (1.0 - r * r);
      ws.d_out_t[i] = ws.dg1[i];
    }
    mlp_backward(p, bl.s1, bc.s1c, cond, ws.d_out_s.data(), grad, ws.dx2.data(), ws);
    mlp_backward(p, bl.t1, bc.t1c, cond, ws.d_out_t.data(), grad, ws.dx2.data(), ws);
    for (std::size_t i = 0; i < d2; ++i) dx[d1 + i] = ws.dx2[i];

    // Undo the permutation: block input i came from state index perm[i].
    for (std::size_t i = 0; i < d; ++i) ws.dnext[static_cast<std::size_t>(perms[k][i])] = dx[i];
  }
  return loss;
}

void check_batch(const ConditionalInn& net, std::span<const FlowSample> batch, const GradientTape& tape) {
  if (batch.empty()) throw DomainError("batch_backward on an empty batch");
  if (tape.grad.size() != net.param_count()) throw DomainError("gradient tape does not match network");
  const auto d = static_cast<std::size_t>(net.arch().dim), c = static_cast<std::size_t>(net.arch().summary_dim);
  for (const auto& item : batch)
    if (item.theta_u.size() != d || item.summary.size() != c) throw DomainError("batch item dimension mismatch");
}

void check_finite(const ConditionalInn& net, const GradientTape& tape, double loss) {
  if (!std::isfinite(loss)) throw NumericalError("non-finite batch loss");
  for (std::size_t i = 0; i < tape.grad.size(); ++i)
    if (!std::isfinite(tape.grad[i])) throw NumericalError("non-finite gradient at " + net.describe_param(i));
}

constexpr std::size_t kGradChunks = 4;

}  // namespace

namespace reference {

double batch_backward(const ConditionalInn& net, std::span<const FlowSample> batch, GradientTape& tape) {
  check_batch(net, batch, tape);
  Workspace ws(net.arch());
  const double w = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& item : batch) total += item_backward(net, item, w, tape.grad.data(), ws);
  const double loss = total / static_cast<double>(batch.size());
  check_finite(net, tape, loss);
  return loss;
}

}  // namespace reference

double batch_backward(const ConditionalInn& net, std::span<const FlowSample> batch, GradientTape& tape) {
  check_batch(net, batch, tape);
  const std::size_t chunks = std::min(kGradChunks, batch.size());
  const double w = 1.0 / static_cast<double>(batch.size());
  // Chunk 0 accumulates straight into the tape; the others get private
  // buffers reduced in chunk order, independent of the thread count.
  std::vector<std::vector<double>> extra(chunks - 1, std::vector<double>(tape.grad.size(), 0.0));
  std::vector<double> losses(batch.size(), 0.0);

#pragma omp parallel for schedule(static, 1)
  for (std::size_t c = 0; c < chunks; ++c) {
    Workspace ws(net.arch());
    double* grad = c == 0 ? tape.grad.data() : extra[c - 1].data();
    for (std::size_t i = c; i < batch.size(); i += chunks) losses[i] = item_backward(net, batch[i], w, grad, ws);
  }
  for (const auto& e : extra)
    for (std::size_t i = 0; i < e.size(); ++i) tape.grad[i] += e[i];

  double total = 0.0;
  for (double l : losses) total += l;
  const double loss = total / static_cast<double>(batch.size());
  check_finite(net, tape, loss);
  return loss;
}

}  // namespace lgcpflow
