#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "dex/elbo.hpp"

namespace dex {

// Which parameter groups the gradient steps may move.
struct TrainMask {
  bool vertex_chains = true;
  bool community_chain = true;
  bool rate_chain = true;
  bool birth_eta = true;
  bool theta = true;
};

struct FitOptions {
  int M = 2;
  Dynamics dynamics = Dynamics::RW;
  long iterations = 50000;  // total gradient steps per restart
  int cycle_steps = 10;     // gradient steps between conjugate cycles
  int restarts = 5;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int mc_samples = 1;  // reparameterized draws averaged per gradient step
  double ema = 0.99;
  unsigned long seed = 0;
  TrainMask mask;
  bool early_stop = false;
  double early_tol = 1e-4;
  int early_window = 50;  // conjugate cycles
};

struct TraceRow {
  long cycle = 0;
  long step = 0;
  double elbo_smoothed = 0.0;
  double elbo_sample = 0.0;
};

namespace detail {

struct PackRange {
  long offset = 0;
  long count = 0;
};

struct PackLayout {
  std::vector<PackRange> h;
  PackRange k, lambda, eta, theta;
  long total = 0;
  int M = 0;

  static PackLayout build(const VariationalState& st) {
    PackLayout lay;
    lay.M = st.M;
    long off = 0;
    lay.h.reserve(st.h_q.size());
    for (const auto& q : st.h_q) {
      lay.h.push_back({off, q.param_count()});
      off += q.param_count();
    }
    lay.k = {off, st.k_q.param_count()};
    off += lay.k.count;
    lay.lambda = {off, st.lambda_q.param_count()};
    off += lay.lambda.count;
    lay.eta = {off, st.log_eta.size()};
    off += lay.eta.count;
    int M = st.M;
    long theta_count = M + M * (M + 1) / 2 + M + M * M + M * (M + 1) / 2 + 3;
    lay.theta = {off, theta_count};
    lay.total = off + theta_count;
    return lay;
  }

  Vec mask_vector(const TrainMask& m) const {
    Vec v = Vec::Zero(total);
    auto fill = [&](const PackRange& r, bool on) {
      if (on && r.count > 0) v.segment(r.offset, r.count).setOnes();
    };
    for (const auto& r : h) fill(r, m.vertex_chains);
    fill(k, m.community_chain);
    fill(lambda, m.rate_chain);
    fill(eta, m.birth_eta);
    fill(theta, m.theta);
    return v;
  }
};

inline long pack_chain(const GaussChainQ& q, Vec& out, long off) {
  int D = q.dims(), S = q.span();
  out.segment(off, D) = q.init_mean;
  off += D;
  out.segment(off, D) = q.init_logstd;
  off += D;
  for (int t = 1; t < S; ++t) {
    out.segment(off, D) = q.a.col(t);
    off += D;
    out.segment(off, D) = q.b.col(t);
    off += D;
    out.segment(off, D) = q.logs.col(t);
    off += D;
  }
  return off;
}

inline long unpack_chain(const Vec& in, GaussChainQ& q, long off) {
  int D = q.dims(), S = q.span();
  q.init_mean = in.segment(off, D);
  off += D;
  q.init_logstd = in.segment(off, D);
  off += D;
  for (int t = 1; t < S; ++t) {
    q.a.col(t) = in.segment(off, D);
    off += D;
    q.b.col(t) = in.segment(off, D);
    off += D;
    q.logs.col(t) = in.segment(off, D);
    off += D;
  }
  return off;
}

inline long pack_chain_grad(const ChainGrad& g, int S, Vec& out, long off) {
  long D = g.init_mean.size();
  out.segment(off, D) = g.init_mean;
  off += D;
  out.segment(off, D) = g.init_logstd;
  off += D;
  for (int t = 1; t < S; ++t) {
    out.segment(off, D) = g.a.col(t);
    off += D;
    out.segment(off, D) = g.b.col(t);
    off += D;
    out.segment(off, D) = g.logs.col(t);
    off += D;
  }
  return off;
}

// Lower-triangular factor, row-major, diagonal in log space.
inline long pack_lower(const Mat& b, Vec& out, long off) {
  int n = static_cast<int>(b.rows());
  for (int r = 0; r < n; ++r)
    for (int c = 0; c <= r; ++c) out[off++] = (r == c) ? std::log(b(r, r)) : b(r, c);
  return off;
}

inline long unpack_lower(const Vec& in, Mat& b, long off) {
  int n = static_cast<int>(b.rows());
  b.setZero();
  for (int r = 0; r < n; ++r)
    for (int c = 0; c <= r; ++c) b(r, c) = (r == c) ? std::exp(in[off++]) : in[off++];
  return off;
}

inline long pack_lower_grad(const Mat& g, const Mat& b, Vec& out, long off) {
  int n = static_cast<int>(b.rows());
  for (int r = 0; r < n; ++r)
    for (int c = 0; c <= r; ++c) out[off++] = (r == c) ? g(r, r) * b(r, r) : g(r, c);
  return off;
}

}  // namespace detail

inline Vec pack_state(const VariationalState& st, const ModelParams& params,
                      const detail::PackLayout& lay) {
  Vec out(lay.total);
  long off = 0;
  for (const auto& q : st.h_q) off = detail::pack_chain(q, out, off);
  off = detail::pack_chain(st.k_q, out, off);
  off = detail::pack_chain(st.lambda_q, out, off);
  out.segment(off, st.log_eta.size()) = st.log_eta;
  off += st.log_eta.size();
  int M = st.M;
  out.segment(off, M) = params.mu;
  off += M;
  off = detail::pack_lower(params.B_chol, out, off);
  out.segment(off, M) = params.mu_k;
  off += M;
  for (int r = 0; r < M; ++r)
    for (int c = 0; c < M; ++c) out[off++] = params.A_k(r, c);
  off = detail::pack_lower(params.Bk_chol, out, off);
  out[off++] = params.mu_lambda;
  out[off++] = std::log(params.sigma_lambda);
  out[off++] = params.a_lambda;
  if (off != lay.total) throw InternalError("pack_state: layout mismatch");
  return out;
}

inline void unpack_state(const Vec& in, VariationalState& st, ModelParams& params,
                         const detail::PackLayout& lay) {
  long off = 0;
  for (auto& q : st.h_q) off = detail::unpack_chain(in, q, off);
  off = detail::unpack_chain(in, st.k_q, off);
  off = detail::unpack_chain(in, st.lambda_q, off);
  st.log_eta = in.segment(off, st.log_eta.size());
  off += st.log_eta.size();
  int M = st.M;
  params.mu = in.segment(off, M);
  off += M;
  off = detail::unpack_lower(in, params.B_chol, off);
  params.mu_k = in.segment(off, M);
  off += M;
  for (int r = 0; r < M; ++r)
    for (int c = 0; c < M; ++c) params.A_k(r, c) = in[off++];
  off = detail::unpack_lower(in, params.Bk_chol, off);
  params.mu_lambda = in[off++];
  params.sigma_lambda = std::exp(in[off++]);
  params.a_lambda = in[off++];
  if (off != lay.total) throw InternalError("unpack_state: layout mismatch");
}

inline Vec pack_gradients(const Gradients& g, const VariationalState& st,
                          const ModelParams& params, const detail::PackLayout& lay) {
  Vec out(lay.total);
  long off = 0;
  for (size_t v = 0; v < st.h_q.size(); ++v)
    off = detail::pack_chain_grad(g.h[v], st.h_q[v].span(), out, off);
  off = detail::pack_chain_grad(g.k, st.k_q.span(), out, off);
  off = detail::pack_chain_grad(g.lambda, st.lambda_q.span(), out, off);
  out.segment(off, g.log_eta.size()) = g.log_eta;
  off += g.log_eta.size();
  int M = st.M;
  out.segment(off, M) = g.mu;
  off += M;
  off = detail::pack_lower_grad(g.B_chol, params.B_chol, out, off);
  out.segment(off, M) = g.mu_k;
  off += M;
  for (int r = 0; r < M; ++r)
    for (int c = 0; c < M; ++c) out[off++] = g.A_k(r, c);
  off = detail::pack_lower_grad(g.Bk_chol, params.Bk_chol, out, off);
  out[off++] = g.mu_lambda;
  out[off++] = g.log_sigma_lambda;
  out[off++] = g.a_lambda;
  if (off != lay.total) throw InternalError("pack_gradients: layout mismatch");
  return out;
}

struct StepResult {
  double elbo_sample = 0.0;
  bool skipped = false;
};

// One ascent step of ADAM on the packed parameters; non-finite gradients skip
// the update and bump the skip counter.
inline StepResult grad_step(VariationalState& st, ModelParams& params, const TemporalNetwork& net,
                            Rng& rng, const FitOptions& opts) {
  detail::PackLayout lay = detail::PackLayout::build(st);
  // The objective is sampled only under ATTAS; RW gradients are analytic, so
  // extra draws would just repeat the same computation.
  int draws = params.dynamics == Dynamics::ATTAS ? std::max(opts.mc_samples, 1) : 1;
  Vec gv;
  double value = 0.0;
  for (int s = 0; s < draws; ++s) {
    std::optional<ChainSample> sample;
    if (params.dynamics == Dynamics::ATTAS) sample = sample_chains(st, rng);
    Gradients g = compute_gradients(st, params, net, sample ? &*sample : nullptr);
    Vec one = pack_gradients(g, st, params, lay);
    if (s == 0) {
      gv = std::move(one);
      value = g.value;
    } else {
      gv += one;
      value += g.value;
    }
  }
  gv /= static_cast<double>(draws);
  value /= static_cast<double>(draws);
  if (!gv.allFinite() || !std::isfinite(value)) {
    ++st.adam.skipped;
    return {value, true};
  }
  Vec mask = lay.mask_vector(opts.mask);
  gv.array() *= mask.array();
  st.adam.ensure(lay.total);
  ++st.adam.step;
  st.adam.m = opts.beta1 * st.adam.m + (1.0 - opts.beta1) * gv;
  st.adam.v = opts.beta2 * st.adam.v + (1.0 - opts.beta2) * gv.cwiseProduct(gv);
  double c1 = 1.0 - std::pow(opts.beta1, static_cast<double>(st.adam.step));
  double c2 = 1.0 - std::pow(opts.beta2, static_cast<double>(st.adam.step));
  Vec update = (st.adam.m / c1).cwiseQuotient(((st.adam.v / c2).cwiseSqrt().array() + opts.adam_eps).matrix());
  Vec x = pack_state(st, params, lay);
  x += opts.lr * update.cwiseProduct(mask);
  unpack_state(x, st, params, lay);
  return {value, false};
}

struct FitResult {
  VariationalState state;
  ModelParams params;
  std::vector<TraceRow> trace;
  double final_elbo = -std::numeric_limits<double>::infinity();
  int best_restart = -1;
};

// Structured mean-field fit: alternate exact conjugate updates (zeta then pi)
// with blocks of reparameterized gradient steps, over independent restarts.
inline FitResult fit(const TemporalNetwork& net, const FitOptions& opts) {
  if (opts.restarts < 1) throw DomainError("fit: restarts must be >= 1");
  FitResult best;
  for (int r = 0; r < opts.restarts; ++r) {
    Rng rng = sub_rng(opts.seed, 0xF17000u + static_cast<unsigned long>(r));
    auto [st, params] = vi_init(net, opts.M, opts.dynamics, rng);
    std::vector<TraceRow> trace;
    double smoothed = 0.0;
    bool have_smoothed = false;
    std::vector<double> cycle_smoothed;
    long steps_done = 0, cycle = 0;
    while (steps_done < opts.iterations) {
      ++cycle;
      Expectations e = compute_expectations(st, params, net);
      update_zeta(st, net, params, e);
      update_pi(st, net, params, e);
      long block = std::min<long>(opts.cycle_steps, opts.iterations - steps_done);
      for (long s = 0; s < block; ++s) {
        StepResult sr = grad_step(st, params, net, rng, opts);
        ++steps_done;
        if (std::isfinite(sr.elbo_sample)) {
          smoothed = have_smoothed ? opts.ema * smoothed + (1.0 - opts.ema) * sr.elbo_sample
                                   : sr.elbo_sample;
          have_smoothed = true;
        }
        trace.push_back({cycle, steps_done, smoothed, sr.elbo_sample});
      }
      cycle_smoothed.push_back(smoothed);
      if (opts.early_stop && static_cast<long>(cycle_smoothed.size()) > opts.early_window) {
        double prev = cycle_smoothed[cycle_smoothed.size() - 1 - static_cast<size_t>(opts.early_window)];
        if (smoothed - prev < opts.early_tol) break;
      }
    }
    update_zeta(st, net, params);
    update_pi(st, net, params);
    double final_elbo;
    if (opts.dynamics == Dynamics::RW) {
      final_elbo = elbo(st, params, net).value;
    } else {
      final_elbo = have_smoothed ? smoothed : -std::numeric_limits<double>::infinity();
    }
    if (final_elbo > best.final_elbo || best.best_restart < 0) {
      best.state = std::move(st);
      best.params = std::move(params);
      best.trace = std::move(trace);
      best.final_elbo = final_elbo;
      best.best_restart = r;
    }
  }
  return best;
}

}  // namespace dex
