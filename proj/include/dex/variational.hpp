#pragma once

#include <cmath>
#include <vector>

#include "dex/gauss_chain.hpp"
#include "dex/model.hpp"
#include "dex/rng.hpp"
#include "dex/shifted_poisson.hpp"
#include "dex/temporal_network.hpp"

namespace dex {

// First/second moment accumulators over the packed parameter vector.
struct AdamState {
  Vec m;
  Vec v;
  long step = 0;
  long skipped = 0;  // non-finite gradients dropped

  void ensure(long n) {
    if (m.size() != n) {
      m = Vec::Zero(n);
      v = Vec::Zero(n);
      step = 0;
      skipped = 0;
    }
  }
};

// All variational parameters for one network. Chains for never-observed
// potential vertices are the prior and are represented implicitly.
struct VariationalState {
  int M = 1;
  std::vector<Mat> pi;          // per slice: N_t x M responsibilities
  std::vector<GaussChainQ> h_q; // per vertex id; span = T - tau_v + 1
  GaussChainQ k_q;              // dims M, span T
  GaussChainQ lambda_q;         // dims 1, span T
  Vec log_eta;                  // length T
  Mat zeta_vm;                  // T x M
  Vec zeta_c;                   // length T
  AdamState adam;

  double eta(int t) const { return std::exp(log_eta[t - 1]); }
};

// Analytic expectations shared by the conjugate updates, the ELBO, and the
// gradients. S holds the per-(t,m) vertex-normalizer sums that are computed
// once and reused everywhere (the stated bottleneck).
struct Expectations {
  std::vector<ChainMarginals> h;  // per vertex
  ChainMarginals k;
  ChainMarginals lambda;
  Vec z_mass;   // M: E[e^{h_z,m}] under the prior
  Mat Eh_exp_sum;  // T x M: sum over V^(t) of E[e^{h_{v,m,t}}]
  Mat S;        // T x M: Eh_exp_sum + eta_t * z_mass
  Mat Ek_exp;   // T x M: E[e^{k_m^(t)}]
  Vec Sc;       // T: row sums of Ek_exp
};

inline Expectations compute_expectations(const VariationalState& state, const ModelParams& params,
                                         const TemporalNetwork& net) {
  int T = net.T(), M = state.M;
  Expectations e;
  e.h.resize(static_cast<size_t>(net.vertex_count()));
  for (int v = 0; v < net.vertex_count(); ++v) e.h[static_cast<size_t>(v)] = chain_marginals(state.h_q[static_cast<size_t>(v)]);
  e.k = chain_marginals(state.k_q);
  e.lambda = chain_marginals(state.lambda_q);

  Mat sigma = params.sigma();
  e.z_mass = Vec(M);
  for (int m = 0; m < M; ++m) e.z_mass[m] = lognormal_mean(params.mu[m], sigma(m, m));

  e.Eh_exp_sum = Mat::Zero(T, M);
  for (int t = 1; t <= T; ++t) {
    for (int v : net.vertices_at(t)) {
      const ChainMarginals& cm = e.h[static_cast<size_t>(v)];
      int col = t - net.arrival[static_cast<size_t>(v)];
      for (int m = 0; m < M; ++m)
        e.Eh_exp_sum(t - 1, m) += lognormal_mean(cm.mean(m, col), cm.var(m, col));
    }
  }
  e.S = e.Eh_exp_sum;
  for (int t = 1; t <= T; ++t) {
    double eta_t = state.eta(t);
    for (int m = 0; m < M; ++m) e.S(t - 1, m) += eta_t * e.z_mass[m];
  }
  e.Ek_exp = Mat(T, M);
  for (int t = 0; t < T; ++t)
    for (int m = 0; m < M; ++m) e.Ek_exp(t, m) = lognormal_mean(e.k.mean(m, t), e.k.var(m, t));
  e.Sc = e.Ek_exp.rowwise().sum();
  return e;
}

// Tightens the log-sum-exp bounds: zeta parameters move to the current
// expectation sums (the 1-D optimum of each bound).
inline void update_zeta(VariationalState& state, const TemporalNetwork& net,
                        const ModelParams& params, const Expectations& e) {
  state.zeta_vm = e.S;
  state.zeta_c = e.Sc;
  (void)net;
  (void)params;
}

inline void update_zeta(VariationalState& state, const TemporalNetwork& net,
                        const ModelParams& params) {
  update_zeta(state, net, params, compute_expectations(state, params, net));
}

// Conjugate coordinate update of every per-edge responsibility vector.
inline void update_pi(VariationalState& state, const TemporalNetwork& net,
                      const ModelParams& params, const Expectations& e) {
  int T = net.T(), M = state.M;
  for (int t = 1; t <= T; ++t) {
    const auto& edges = net.slice(t).edges;
    Vec base(M);
    for (int m = 0; m < M; ++m) {
      double zeta_m = state.zeta_vm(t - 1, m);
      double zeta_c = state.zeta_c[t - 1];
      base[m] = -2.0 / zeta_m * e.S(t - 1, m) - 2.0 * std::log(zeta_m) + 2.0 +
                e.k.mean(m, t - 1) - e.Sc[t - 1] / zeta_c - std::log(zeta_c);
    }
    Mat& pi_t = state.pi[static_cast<size_t>(t - 1)];
    for (size_t i = 0; i < edges.size(); ++i) {
      auto [u, v] = edges[i];
      Vec logits = base;
      const ChainMarginals& cu = e.h[static_cast<size_t>(u)];
      const ChainMarginals& cv = e.h[static_cast<size_t>(v)];
      int colu = t - net.arrival[static_cast<size_t>(u)];
      int colv = t - net.arrival[static_cast<size_t>(v)];
      for (int m = 0; m < M; ++m) logits[m] += cu.mean(m, colu) + cv.mean(m, colv);
      softmax_inplace(logits);
      pi_t.row(static_cast<long>(i)) = logits.transpose();
    }
  }
}

inline void update_pi(VariationalState& state, const TemporalNetwork& net,
                      const ModelParams& params) {
  update_pi(state, net, params, compute_expectations(state, params, net));
}

// Reparameterization noise and the chain values it produces. Replaying the
// same noise reproduces the same sample for common-random-number checks.
struct ChainSample {
  std::vector<Mat> h_z;  // per vertex: M x span
  std::vector<Mat> h_x;
  Mat k_z, k_x;          // M x T
  Mat lam_z, lam_x;      // 1 x T
};

inline ChainSample draw_chain_noise(const VariationalState& state, Rng& rng) {
  ChainSample s;
  s.h_z.resize(state.h_q.size());
  for (size_t v = 0; v < state.h_q.size(); ++v)
    s.h_z[v] = chain_noise(state.h_q[v].dims(), state.h_q[v].span(), rng);
  s.k_z = chain_noise(state.k_q.dims(), state.k_q.span(), rng);
  s.lam_z = chain_noise(1, state.lambda_q.span(), rng);
  return s;
}

inline void materialize_chain_sample(const VariationalState& state, ChainSample& s) {
  s.h_x.resize(state.h_q.size());
  for (size_t v = 0; v < state.h_q.size(); ++v) s.h_x[v] = chain_sample(state.h_q[v], s.h_z[v]);
  s.k_x = chain_sample(state.k_q, s.k_z);
  s.lam_x = chain_sample(state.lambda_q, s.lam_z);
}

inline ChainSample sample_chains(const VariationalState& state, Rng& rng) {
  ChainSample s = draw_chain_noise(state, rng);
  materialize_chain_sample(state, s);
  return s;
}

// Spec initialization: uniform responsibilities, near-prior chains, newcomer
// floors for eta, neutral theta; zeta set tight immediately after.
inline std::pair<VariationalState, ModelParams> vi_init(const TemporalNetwork& net, int M,
                                                        Dynamics dynamics, Rng& rng) {
  if (M < 1) throw DomainError("vi_init: M must be >= 1");
  int T = net.T();
  VariationalState st;
  st.M = M;
  st.pi.resize(static_cast<size_t>(T));
  for (int t = 1; t <= T; ++t)
    st.pi[static_cast<size_t>(t - 1)] =
        Mat::Constant(net.slice(t).n(), M, 1.0 / static_cast<double>(M));
  st.h_q.reserve(static_cast<size_t>(net.vertex_count()));
  for (int v = 0; v < net.vertex_count(); ++v) {
    int span = T - net.arrival[static_cast<size_t>(v)] + 1;
    st.h_q.push_back(GaussChainQ::init_random(M, span, rng));
  }
  st.k_q = GaussChainQ::init_random(M, T, rng);
  st.lambda_q = GaussChainQ::init_random(1, T, rng);
  st.log_eta = Vec(T);
  for (int t = 1; t <= T; ++t)
    st.log_eta[t - 1] = std::log(std::max<double>(static_cast<double>(net.delta_at(t)), 1.0));
  st.zeta_vm = Mat::Ones(T, M);
  st.zeta_c = Vec::Ones(T);

  ModelParams params = ModelParams::defaults(M, dynamics);
  params.B_chol = 0.1 * Mat::Identity(M, M);
  params.Bk_chol = 0.1 * Mat::Identity(M, M);
  params.A_k = 0.9 * Mat::Identity(M, M);
  params.mu_lambda = std::log(std::max<double>(static_cast<double>(net.delta_at(1)), 1.0));
  params.sigma_lambda = 1.0;
  params.a_lambda = 0.5;

  update_zeta(st, net, params);
  return {std::move(st), std::move(params)};
}

}  // namespace dex
