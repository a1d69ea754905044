#pragma once

#include <cmath>
#include <vector>

#include "lgcpflow/flow.hpp"

namespace lgcpflow::detail {

// out = b + W_cond * cond + W_data * x. The conditioning columns are summed
// before the data columns so that a precomputed b + W_cond * cond gives
// bit-identical results.
inline void dense(const double* p, const DenseLayout& l, const double* x, const double* cond, double* out) {
  const int in = l.in();
  for (int o = 0; o < l.out; ++o) {
    const double* row = p + l.w + static_cast<std::size_t>(o) * static_cast<std::size_t>(in);
    double acc = p[l.b + static_cast<std::size_t>(o)];
    for (int j = 0; j < l.cond_in; ++j) acc += row[l.data_in + j] * cond[j];
    for (int j = 0; j < l.data_in; ++j) acc += row[j] * x[j];
    out[o] = acc;
  }
}

inline void dense_biased(const double* p, const DenseLayout& l, const double* bias, const double* x, double* out) {
  const int in = l.in();
  for (int o = 0; o < l.out; ++o) {
    const double* row = p + l.w + static_cast<std::size_t>(o) * static_cast<std::size_t>(in);
    double acc = bias[o];
    for (int j = 0; j < l.data_in; ++j) acc += row[j] * x[j];
    out[o] = acc;
  }
}

inline void tanh_inplace(double* v, int n) {
  for (int i = 0; i < n; ++i) v[i] = std::tanh(v[i]);
}

struct MlpScratch {
  std::vector<double> h1, h2;
  explicit MlpScratch(int hidden) : h1(static_cast<std::size_t>(hidden)), h2(static_cast<std::size_t>(hidden)) {}
};

// Raw MLP output (no scale clamp). `bias0` replaces the first-layer bias and
// conditioning product when non-null.
inline void mlp(const double* p, const MlpLayout& m, const double* x, const double* cond, const double* bias0,
                MlpScratch& s, double* out) {
  if (bias0) {
    dense_biased(p, m.l0, bias0, x, s.h1.data());
  } else {
    dense(p, m.l0, x, cond, s.h1.data());
  }
  tanh_inplace(s.h1.data(), m.l0.out);
  dense(p, m.l1, s.h1.data(), nullptr, s.h2.data());
  tanh_inplace(s.h2.data(), m.l1.out);
  dense(p, m.l2, s.h2.data(), nullptr, out);
}

inline double soft_clamp(double raw, double clamp) { return clamp * std::tanh(raw / clamp); }

}  // namespace lgcpflow::detail
