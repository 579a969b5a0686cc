#pragma once

#include <cmath>

#include "dex/math.hpp"
#include "dex/rng.hpp"

namespace dex {

// Variational Gaussian Markov chain, factorized per dimension: init mean and
// log-std, then per step a transition coefficient a_t, offset b_t, and log
// conditional std log s_t. Marginals follow the forward recursion
//   mean_t = a_t mean_{t-1} + b_t,  var_t = a_t^2 var_{t-1} + s_t^2,
//   lag1_t = Cov(x_t, x_{t-1}) = a_t var_{t-1}.
// Parameter matrices are dims x span; column 0 of a/b/logs is unused padding
// so that column s always refers to time offset s.
struct GaussChainQ {
  Vec init_mean;
  Vec init_logstd;
  Mat a;
  Mat b;
  Mat logs;

  int dims() const { return static_cast<int>(init_mean.size()); }
  int span() const { return static_cast<int>(a.cols()); }

  static GaussChainQ make(int dims, int span) {
    GaussChainQ q;
    q.init_mean = Vec::Zero(dims);
    q.init_logstd = Vec::Constant(dims, std::log(0.5));
    q.a = Mat::Ones(dims, span);
    q.b = Mat::Zero(dims, span);
    q.logs = Mat::Constant(dims, span, std::log(0.5));
    return q;
  }

  // Spec initialization: means 0.1 * standard normal, stds 0.5, identity steps.
  static GaussChainQ init_random(int dims, int span, Rng& rng) {
    GaussChainQ q = make(dims, span);
    for (int d = 0; d < dims; ++d) q.init_mean[d] = 0.1 * std_normal(rng);
    return q;
  }

  int param_count() const { return dims() * (2 + 3 * (span() - 1)); }
};

struct ChainMarginals {
  Mat mean;  // dims x span
  Mat var;
  Mat lag1;  // column 0 is zero
};

inline ChainMarginals chain_marginals(const GaussChainQ& q) {
  int D = q.dims(), S = q.span();
  ChainMarginals m;
  m.mean = Mat::Zero(D, S);
  m.var = Mat::Zero(D, S);
  m.lag1 = Mat::Zero(D, S);
  for (int d = 0; d < D; ++d) {
    m.mean(d, 0) = q.init_mean[d];
    m.var(d, 0) = sq(std::exp(q.init_logstd[d]));
    for (int s = 1; s < S; ++s) {
      m.mean(d, s) = q.a(d, s) * m.mean(d, s - 1) + q.b(d, s);
      m.var(d, s) = sq(q.a(d, s)) * m.var(d, s - 1) + sq(std::exp(q.logs(d, s)));
      m.lag1(d, s) = q.a(d, s) * m.var(d, s - 1);
    }
  }
  return m;
}

// Reparameterized sample x(z); the noise matrix can be replayed for common
// random numbers.
inline Mat chain_sample(const GaussChainQ& q, const Mat& z) {
  int D = q.dims(), S = q.span();
  Mat x(D, S);
  for (int d = 0; d < D; ++d) {
    x(d, 0) = q.init_mean[d] + std::exp(q.init_logstd[d]) * z(d, 0);
    for (int s = 1; s < S; ++s)
      x(d, s) = q.a(d, s) * x(d, s - 1) + q.b(d, s) + std::exp(q.logs(d, s)) * z(d, s);
  }
  return x;
}

inline Mat chain_noise(int dims, int span, Rng& rng) {
  Mat z(dims, span);
  for (int d = 0; d < dims; ++d)
    for (int s = 0; s < span; ++s) z(d, s) = std_normal(rng);
  return z;
}

// Chain entropy = sum of conditional entropies, 1/2 ln(2 pi e s^2) each.
inline double chain_entropy(const GaussChainQ& q) {
  constexpr double half_ln_2pie = 1.4189385332046727;  // 0.5 * ln(2 pi e)
  double h = 0.0;
  for (int d = 0; d < q.dims(); ++d) {
    h += half_ln_2pie + q.init_logstd[d];
    for (int s = 1; s < q.span(); ++s) h += half_ln_2pie + q.logs(d, s);
  }
  return h;
}

// Gradient accumulator with the same shape as the parameters.
struct ChainGrad {
  Vec init_mean;
  Vec init_logstd;
  Mat a;
  Mat b;
  Mat logs;

  static ChainGrad zeros_like(const GaussChainQ& q) {
    ChainGrad g;
    g.init_mean = Vec::Zero(q.dims());
    g.init_logstd = Vec::Zero(q.dims());
    g.a = Mat::Zero(q.dims(), q.span());
    g.b = Mat::Zero(q.dims(), q.span());
    g.logs = Mat::Zero(q.dims(), q.span());
    return g;
  }
};

// Backward scan turning objective gradients w.r.t. marginal means/vars/lag1
// covariances into parameter gradients. Arguments are dims x span; glag1
// column 0 is ignored.
inline void chain_backprop_marginals(const GaussChainQ& q, const ChainMarginals& m, Mat gmean,
                                     Mat gvar, const Mat& glag1, ChainGrad& out) {
  int D = q.dims(), S = q.span();
  for (int d = 0; d < D; ++d) {
    for (int s = S - 1; s >= 1; --s) {
      double gm = gmean(d, s), gv = gvar(d, s), gl = glag1(d, s);
      out.a(d, s) += gm * m.mean(d, s - 1) + 2.0 * q.a(d, s) * m.var(d, s - 1) * gv +
                     m.var(d, s - 1) * gl;
      out.b(d, s) += gm;
      out.logs(d, s) += 2.0 * sq(std::exp(q.logs(d, s))) * gv;
      gmean(d, s - 1) += q.a(d, s) * gm;
      gvar(d, s - 1) += sq(q.a(d, s)) * gv + q.a(d, s) * gl;
    }
    out.init_mean[d] += gmean(d, 0);
    out.init_logstd[d] += 2.0 * sq(std::exp(q.init_logstd[d])) * gvar(d, 0);
  }
}

// Backward scan through the sampling recursion x_s = a_s x_{s-1} + b_s + s_s z_s
// for gradients taken at a replayed noise matrix.
inline void chain_backprop_sample(const GaussChainQ& q, const Mat& z, const Mat& x, Mat gx,
                                  ChainGrad& out) {
  int D = q.dims(), S = q.span();
  for (int d = 0; d < D; ++d) {
    for (int s = S - 1; s >= 1; --s) {
      double g = gx(d, s);
      out.a(d, s) += g * x(d, s - 1);
      out.b(d, s) += g;
      out.logs(d, s) += g * std::exp(q.logs(d, s)) * z(d, s);
      gx(d, s - 1) += q.a(d, s) * g;
    }
    out.init_mean[d] += gx(d, 0);
    out.init_logstd[d] += gx(d, 0) * std::exp(q.init_logstd[d]) * z(d, 0);
  }
}

}  // namespace dex
