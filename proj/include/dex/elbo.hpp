#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "dex/generative.hpp"
#include "dex/variational.hpp"

namespace dex {

struct ElboResult {
  double value = 0.0;
  std::map<std::string, double> parts;  // parts sum to value
};

// Gradients of the ELBO with respect to every trainable parameter, in natural
// (unpacked) coordinates. Positive-constrained parameters carry log-space
// gradients where the field name says so.
struct Gradients {
  std::vector<ChainGrad> h;
  ChainGrad k;
  ChainGrad lambda;
  Vec log_eta;
  Vec mu;
  Mat B_chol;  // d/dB entries; diagonal converted to log-space at packing
  Vec mu_k;
  Mat A_k;
  Mat Bk_chol;
  double mu_lambda = 0.0;
  double log_sigma_lambda = 0.0;
  double a_lambda = 0.0;
  double value = 0.0;  // ELBO at the evaluation point
};

namespace detail {

// Accumulators in marginal space (mean/var/lag1 per chain), sample space
// (per-sampled-value, ATTAS transitions), and direct parameter space.
struct GradSink {
  std::vector<Mat> h_gmean, h_gvar, h_glag1, h_gx;
  Mat k_gmean, k_gvar, k_glag1;
  Mat l_gmean, l_gvar, l_glag1;
  Vec g_log_eta;
  Vec g_mu;
  Mat g_sigma;  // d/dSigma, all entries independent; symmetric by construction
  Mat w_pool;   // vertex-state Gaussian residual pool feeding g_sigma
  long n_pool = 0;
  Vec g_mu_k;
  Mat g_a_k;
  Mat wk_pool;
  long nk_pool = 0;
  double g_mu_lambda = 0.0;
  double g_a_lambda = 0.0;
  double wl_pool = 0.0;
  long nl_pool = 0;

  static GradSink zeros(const VariationalState& st, const TemporalNetwork& net) {
    GradSink s;
    size_t nv = st.h_q.size();
    s.h_gmean.resize(nv);
    s.h_gvar.resize(nv);
    s.h_glag1.resize(nv);
    s.h_gx.resize(nv);
    for (size_t v = 0; v < nv; ++v) {
      int sp = st.h_q[v].span();
      s.h_gmean[v] = Mat::Zero(st.M, sp);
      s.h_gvar[v] = Mat::Zero(st.M, sp);
      s.h_glag1[v] = Mat::Zero(st.M, sp);
      s.h_gx[v] = Mat::Zero(st.M, sp);
    }
    int T = net.T();
    s.k_gmean = Mat::Zero(st.M, T);
    s.k_gvar = Mat::Zero(st.M, T);
    s.k_glag1 = Mat::Zero(st.M, T);
    s.l_gmean = Mat::Zero(1, T);
    s.l_gvar = Mat::Zero(1, T);
    s.l_glag1 = Mat::Zero(1, T);
    s.g_log_eta = Vec::Zero(T);
    s.g_mu = Vec::Zero(st.M);
    s.g_sigma = Mat::Zero(st.M, st.M);
    s.w_pool = Mat::Zero(st.M, st.M);
    s.g_mu_k = Vec::Zero(st.M);
    s.g_a_k = Mat::Zero(st.M, st.M);
    s.wk_pool = Mat::Zero(st.M, st.M);
    return s;
  }
};

inline Mat lower_solve_spd_inverse(const Mat& chol) {
  // (L L^T)^{-1} from the lower factor
  int n = static_cast<int>(chol.rows());
  Mat inv_l = chol.triangularView<Eigen::Lower>().solve(Mat::Identity(n, n));
  return inv_l.transpose() * inv_l;
}

inline double half_log_det_2pi_sigma(const Mat& chol) {
  int n = static_cast<int>(chol.rows());
  double ld = 0.0;
  for (int d = 0; d < n; ++d) ld += std::log(chol(d, d));
  return 0.5 * n * std::log(2.0 * M_PI) + ld;
}

// Single implementation of every ELBO term; gradients accumulate into sink
// when non-null so value and gradient cannot drift apart.
inline ElboResult elbo_engine(const VariationalState& st, const ModelParams& params,
                              const TemporalNetwork& net, const ChainSample* sample,
                              GradSink* sink) {
  int T = net.T(), M = st.M;
  bool attas = params.dynamics == Dynamics::ATTAS;
  if (attas && sample == nullptr)
    throw DomainError("elbo: attention dynamics needs a chain sample");

  Expectations e = compute_expectations(st, params, net);
  Mat p_sigma = lower_solve_spd_inverse(params.B_chol);
  Mat p_sigma_k = lower_solve_spd_inverse(params.Bk_chol);
  double hld = half_log_det_2pi_sigma(params.B_chol);
  double hld_k = half_log_det_2pi_sigma(params.Bk_chol);
  double var_l = sq(params.sigma_lambda);

  ElboResult out;
  auto& parts = out.parts;
  for (const char* name :
       {"edge_linear", "vertex_bound", "community_bound", "h_init", "h_transition", "k_chain",
        "lambda_chain", "births", "entropy_pi", "entropy_h", "entropy_k", "entropy_lambda",
        "entropy_births"})
    parts[name] = 0.0;

  // Per-slice edge terms.
  for (int t = 1; t <= T; ++t) {
    const auto& edges = net.slice(t).edges;
    const Mat& pi_t = st.pi[static_cast<size_t>(t - 1)];
    double eta_t = st.eta(t);
    Vec w_t = Vec::Zero(M);

    for (size_t i = 0; i < edges.size(); ++i) {
      auto [u, v] = edges[i];
      int colu = t - net.arrival[static_cast<size_t>(u)];
      int colv = t - net.arrival[static_cast<size_t>(v)];
      const ChainMarginals& cu = e.h[static_cast<size_t>(u)];
      const ChainMarginals& cv = e.h[static_cast<size_t>(v)];
      double h_pi = 0.0;
      for (int m = 0; m < M; ++m) {
        double p = pi_t(static_cast<long>(i), m);
        w_t[m] += p;
        parts["edge_linear"] += p * (cu.mean(m, colu) + cv.mean(m, colv) + e.k.mean(m, t - 1));
        if (p > 0.0) h_pi -= p * std::log(p);
        if (sink) {
          sink->h_gmean[static_cast<size_t>(u)](m, colu) += p;
          sink->h_gmean[static_cast<size_t>(v)](m, colv) += p;
          sink->k_gmean(m, t - 1) += p;
        }
      }
      parts["entropy_pi"] += h_pi;
    }

    // Vertex-normalizer bound, one per edge endpoint: 2 W_m (-S/zeta - ln zeta + 1).
    for (int m = 0; m < M; ++m) {
      if (w_t[m] == 0.0) continue;
      double zeta = st.zeta_vm(t - 1, m);
      double s = e.S(t - 1, m);
      parts["vertex_bound"] += 2.0 * w_t[m] * (-s / zeta - std::log(zeta) + 1.0);
      if (sink) {
        double c = -2.0 * w_t[m] / zeta;
        for (int v : net.vertices_at(t)) {
          const ChainMarginals& cm = e.h[static_cast<size_t>(v)];
          int col = t - net.arrival[static_cast<size_t>(v)];
          double x = lognormal_mean(cm.mean(m, col), cm.var(m, col));
          sink->h_gmean[static_cast<size_t>(v)](m, col) += c * x;
          sink->h_gvar[static_cast<size_t>(v)](m, col) += 0.5 * c * x;
        }
        double zmass = c * eta_t * e.z_mass[m];
        sink->g_log_eta[t - 1] += zmass;
        sink->g_mu[m] += zmass;
        sink->g_sigma(m, m) += 0.5 * zmass;
      }
    }

    // Community-normalizer bound, one per edge.
    double n_t = static_cast<double>(edges.size());
    if (n_t > 0.0) {
      double zeta_c = st.zeta_c[t - 1];
      parts["community_bound"] += n_t * (-e.Sc[t - 1] / zeta_c - std::log(zeta_c) + 1.0);
      if (sink) {
        double c = -n_t / zeta_c;
        for (int m = 0; m < M; ++m) {
          double x = e.Ek_exp(t - 1, m);
          sink->k_gmean(m, t - 1) += c * x;
          sink->k_gvar(m, t - 1) += 0.5 * c * x;
        }
      }
    }
  }

  // Vertex-state chains: initial slice (analytic under both dynamics).
  for (int v = 0; v < net.vertex_count(); ++v) {
    const ChainMarginals& cm = e.h[static_cast<size_t>(v)];
    Vec rbar = cm.mean.col(0) - params.mu;
    Vec var0 = cm.var.col(0);
    parts["h_init"] -=
        hld + 0.5 * (rbar.dot(p_sigma * rbar) + p_sigma.diagonal().dot(var0));
    if (sink) {
      Vec pr = p_sigma * rbar;
      sink->h_gmean[static_cast<size_t>(v)].col(0) -= pr;
      sink->h_gvar[static_cast<size_t>(v)].col(0) -= 0.5 * p_sigma.diagonal();
      sink->g_mu += pr;
      sink->w_pool += var0.asDiagonal();
      sink->w_pool += rbar * rbar.transpose();
      ++sink->n_pool;
    }
  }

  // Vertex-state transitions.
  if (!attas) {
    for (int v = 0; v < net.vertex_count(); ++v) {
      const ChainMarginals& cm = e.h[static_cast<size_t>(v)];
      int sp = st.h_q[static_cast<size_t>(v)].span();
      for (int col = 0; col + 1 < sp; ++col) {
        Vec rbar = cm.mean.col(col + 1) - cm.mean.col(col);
        Vec vdiag = cm.var.col(col + 1) + cm.var.col(col) - 2.0 * cm.lag1.col(col + 1);
        parts["h_transition"] -=
            hld + 0.5 * (rbar.dot(p_sigma * rbar) + p_sigma.diagonal().dot(vdiag));
        if (sink) {
          Vec pr = p_sigma * rbar;
          sink->h_gmean[static_cast<size_t>(v)].col(col + 1) -= pr;
          sink->h_gmean[static_cast<size_t>(v)].col(col) += pr;
          sink->h_gvar[static_cast<size_t>(v)].col(col + 1) -= 0.5 * p_sigma.diagonal();
          sink->h_gvar[static_cast<size_t>(v)].col(col) -= 0.5 * p_sigma.diagonal();
          sink->h_glag1[static_cast<size_t>(v)].col(col + 1) += p_sigma.diagonal();
          sink->w_pool += vdiag.asDiagonal();
          sink->w_pool += rbar * rbar.transpose();
          ++sink->n_pool;
        }
      }
    }
  } else {
    // Attention dynamics: one reparameterized sample of all chains; the
    // transition into t+1 conditions on the slice-t graph and slice-t states.
    std::vector<Vec> states(static_cast<size_t>(net.vertex_count()));
    for (int t = 1; t < T; ++t) {
      auto adj = adjacency(net.slice(t), net.vertex_count());
      for (int v : net.vertices_at(t))
        states[static_cast<size_t>(v)] =
            sample->h_x[static_cast<size_t>(v)].col(t - net.arrival[static_cast<size_t>(v)]);
      for (int v : net.vertices_at(t)) {
        int col = t - net.arrival[static_cast<size_t>(v)];
        const Vec& xv = states[static_cast<size_t>(v)];
        const auto& nbrs = adj[static_cast<size_t>(v)];
        std::vector<Vec> nstates;
        nstates.reserve(nbrs.size());
        for (int j : nbrs) nstates.push_back(states[static_cast<size_t>(j)]);
        auto [w_self, w] = attention_weights(xv, std::span<const Vec>(nstates));
        Vec f = w_self * xv;
        for (size_t j = 0; j < nstates.size(); ++j) f += w[static_cast<long>(j)] * nstates[j];
        Vec r = sample->h_x[static_cast<size_t>(v)].col(col + 1) - f;
        Vec pr = p_sigma * r;
        parts["h_transition"] -= hld + 0.5 * r.dot(pr);
        if (sink) {
          sink->h_gx[static_cast<size_t>(v)].col(col + 1) -= pr;
          // backward through the attention mixture; g = d value / d f
          const Vec& g = pr;
          double s_self = g.dot(xv);
          double s_bar = w_self * s_self;
          std::vector<double> s_j(nstates.size());
          for (size_t j = 0; j < nstates.size(); ++j) {
            s_j[j] = g.dot(nstates[j]);
            s_bar += w[static_cast<long>(j)] * s_j[j];
          }
          Vec gxv = w_self * g + 2.0 * w_self * (s_self - s_bar) * xv;
          for (size_t j = 0; j < nstates.size(); ++j) {
            double wj = w[static_cast<long>(j)];
            int u = nbrs[j];
            int colu = t - net.arrival[static_cast<size_t>(u)];
            sink->h_gx[static_cast<size_t>(u)].col(colu) += wj * g + wj * (s_j[j] - s_bar) * xv;
            gxv += wj * (s_j[j] - s_bar) * nstates[j];
          }
          sink->h_gx[static_cast<size_t>(v)].col(col) += gxv;
          sink->w_pool += r * r.transpose();
          ++sink->n_pool;
        }
      }
    }
  }

  // Community-weight chain: Gaussian initial term plus linear transitions.
  {
    Vec rbar = e.k.mean.col(0) - params.mu_k;
    Vec var0 = e.k.var.col(0);
    parts["k_chain"] -=
        hld_k + 0.5 * (rbar.dot(p_sigma_k * rbar) + p_sigma_k.diagonal().dot(var0));
    if (sink) {
      Vec pr = p_sigma_k * rbar;
      sink->k_gmean.col(0) -= pr;
      sink->k_gvar.col(0) -= 0.5 * p_sigma_k.diagonal();
      sink->g_mu_k += pr;
      sink->wk_pool += var0.asDiagonal();
      sink->wk_pool += rbar * rbar.transpose();
      ++sink->nk_pool;
    }
    const Mat& a = params.A_k;
    for (int t = 1; t < T; ++t) {
      Vec m_prev = e.k.mean.col(t - 1);
      Vec rq = e.k.mean.col(t) - a * m_prev;
      Vec lag = e.k.lag1.col(t);
      Vec v_prev = e.k.var.col(t - 1);
      Mat w = e.k.var.col(t).asDiagonal();
      Mat al = a * lag.asDiagonal();
      w -= al + al.transpose();
      w += a * v_prev.asDiagonal() * a.transpose();
      w += rq * rq.transpose();
      parts["k_chain"] -= hld_k + 0.5 * (p_sigma_k * w).trace();
      if (sink) {
        Vec pr = p_sigma_k * rq;
        Mat pa = p_sigma_k * a;
        sink->k_gmean.col(t) -= pr;
        sink->k_gmean.col(t - 1) += a.transpose() * pr;
        sink->k_gvar.col(t) -= 0.5 * p_sigma_k.diagonal();
        sink->k_gvar.col(t - 1) -= 0.5 * (a.transpose() * p_sigma_k * a).diagonal();
        sink->k_glag1.col(t) += pa.diagonal();
        sink->g_a_k += p_sigma_k * lag.asDiagonal() - pa * v_prev.asDiagonal() +
                       pr * m_prev.transpose();
        sink->wk_pool += w;
        ++sink->nk_pool;
      }
    }
  }

  // Birth-rate chain: scalar Gaussian chain with drift a_lambda.
  {
    double m0 = e.lambda.mean(0, 0), v0 = e.lambda.var(0, 0);
    double rbar = m0 - params.mu_lambda;
    parts["lambda_chain"] -=
        0.5 * std::log(2.0 * M_PI * var_l) + 0.5 * (sq(rbar) + v0) / var_l;
    if (sink) {
      sink->l_gmean(0, 0) -= rbar / var_l;
      sink->l_gvar(0, 0) -= 0.5 / var_l;
      sink->g_mu_lambda += rbar / var_l;
      sink->wl_pool += sq(rbar) + v0;
      ++sink->nl_pool;
    }
    double a = params.a_lambda;
    for (int t = 1; t < T; ++t) {
      double m_prev = e.lambda.mean(0, t - 1), v_prev = e.lambda.var(0, t - 1);
      double m_t = e.lambda.mean(0, t), v_t = e.lambda.var(0, t);
      double lag = e.lambda.lag1(0, t);
      double rq = m_t - a * m_prev;
      double w = v_t + sq(a) * v_prev - 2.0 * a * lag + sq(rq);
      parts["lambda_chain"] -= 0.5 * std::log(2.0 * M_PI * var_l) + 0.5 * w / var_l;
      if (sink) {
        sink->l_gmean(0, t) -= rq / var_l;
        sink->l_gmean(0, t - 1) += a * rq / var_l;
        sink->l_gvar(0, t) -= 0.5 / var_l;
        sink->l_gvar(0, t - 1) -= 0.5 * sq(a) / var_l;
        sink->l_glag1(0, t) += a / var_l;
        sink->g_a_lambda += (lag - a * v_prev + m_prev * rq) / var_l;
        sink->wl_pool += w;
        ++sink->nl_pool;
      }
    }
  }

  // Potential births: E[L] E[lambda] - E[e^lambda] - E[ln L!] per slice, with
  // q(L) = delta + Poisson(eta).
  for (int t = 1; t <= T; ++t) {
    long delta = net.delta_at(t);
    double eta_t = st.eta(t);
    ShiftedPoissonQ q{delta, eta_t};
    double m_t = e.lambda.mean(0, t - 1), v_t = e.lambda.var(0, t - 1);
    double e_exp = lognormal_mean(m_t, v_t);
    parts["births"] += q.mean() * m_t - e_exp - shifted_poisson_e_log_factorial(q);
    parts["entropy_births"] += shifted_poisson_entropy(q);
    if (sink) {
      sink->l_gmean(0, t - 1) += q.mean() - e_exp;
      sink->l_gvar(0, t - 1) -= 0.5 * e_exp;
      sink->g_log_eta[t - 1] += eta_t * (m_t - shifted_poisson_e_log_lp1(q));
      sink->g_log_eta[t - 1] += eta_t * shifted_poisson_entropy_grad(q);
    }
  }

  // Gaussian chain entropies (gradient: +1 on every log-std parameter).
  for (const auto& q : st.h_q) parts["entropy_h"] += chain_entropy(q);
  parts["entropy_k"] = chain_entropy(st.k_q);
  parts["entropy_lambda"] = chain_entropy(st.lambda_q);

  for (const auto& [name, val] : parts) out.value += val;
  return out;
}

}  // namespace detail

inline ElboResult elbo(const VariationalState& st, const ModelParams& params,
                       const TemporalNetwork& net, const ChainSample* sample = nullptr) {
  return detail::elbo_engine(st, params, net, sample, nullptr);
}

inline Gradients compute_gradients(const VariationalState& st, const ModelParams& params,
                                   const TemporalNetwork& net,
                                   const ChainSample* sample = nullptr) {
  detail::GradSink sink = detail::GradSink::zeros(st, net);
  ElboResult res = detail::elbo_engine(st, params, net, sample, &sink);

  Gradients g;
  g.value = res.value;
  int M = st.M;
  bool attas = params.dynamics == Dynamics::ATTAS;

  g.h.reserve(st.h_q.size());
  for (size_t v = 0; v < st.h_q.size(); ++v) {
    ChainGrad cg = ChainGrad::zeros_like(st.h_q[v]);
    chain_backprop_marginals(st.h_q[v], chain_marginals(st.h_q[v]), sink.h_gmean[v],
                             sink.h_gvar[v], sink.h_glag1[v], cg);
    if (attas)
      chain_backprop_sample(st.h_q[v], sample->h_z[v], sample->h_x[v], sink.h_gx[v], cg);
    cg.init_logstd.array() += 1.0;  // entropy
    if (st.h_q[v].span() > 1) cg.logs.rightCols(st.h_q[v].span() - 1).array() += 1.0;
    g.h.push_back(std::move(cg));
  }

  g.k = ChainGrad::zeros_like(st.k_q);
  chain_backprop_marginals(st.k_q, chain_marginals(st.k_q), sink.k_gmean, sink.k_gvar,
                           sink.k_glag1, g.k);
  g.k.init_logstd.array() += 1.0;
  if (st.k_q.span() > 1) g.k.logs.rightCols(st.k_q.span() - 1).array() += 1.0;

  g.lambda = ChainGrad::zeros_like(st.lambda_q);
  chain_backprop_marginals(st.lambda_q, chain_marginals(st.lambda_q), sink.l_gmean, sink.l_gvar,
                           sink.l_glag1, g.lambda);
  g.lambda.init_logstd.array() += 1.0;
  if (st.lambda_q.span() > 1) g.lambda.logs.rightCols(st.lambda_q.span() - 1).array() += 1.0;

  g.log_eta = sink.g_log_eta;

  Mat p_sigma = detail::lower_solve_spd_inverse(params.B_chol);
  Mat p_sigma_k = detail::lower_solve_spd_inverse(params.Bk_chol);
  Mat g_sigma = sink.g_sigma +
                0.5 * (p_sigma * sink.w_pool * p_sigma -
                       static_cast<double>(sink.n_pool) * p_sigma);
  Mat g_sigma_k = 0.5 * (p_sigma_k * sink.wk_pool * p_sigma_k -
                         static_cast<double>(sink.nk_pool) * p_sigma_k);
  g.mu = sink.g_mu;
  g.B_chol = (2.0 * g_sigma * params.B_chol)
                 .triangularView<Eigen::Lower>()
                 .toDenseMatrix();
  g.mu_k = sink.g_mu_k;
  g.A_k = sink.g_a_k;
  g.Bk_chol = (2.0 * g_sigma_k * params.Bk_chol)
                  .triangularView<Eigen::Lower>()
                  .toDenseMatrix();
  g.mu_lambda = sink.g_mu_lambda;
  g.log_sigma_lambda =
      -static_cast<double>(sink.nl_pool) + sink.wl_pool / sq(params.sigma_lambda);
  g.a_lambda = sink.g_a_lambda;
  (void)M;
  return g;
}

}  // namespace dex
