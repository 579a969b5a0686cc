#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "dex/variational.hpp"

namespace dex {

// Monte-Carlo posterior predictive for one more edge after the last slice.
// Each sample draws final-slice vertex states and community weights from the
// fitted marginals (draw order: vertices by id, dims within vertex, then the
// community chain), softmaxes over all fitted vertices, and scores
// sum_m c_m p_m(i) p_m(j), doubled for distinct pairs.
inline Vec predict_edge_probs(const VariationalState& st, const TemporalNetwork& net,
                              std::span<const VertexPair> pairs, int samples, Rng& rng) {
  if (samples < 1) throw DomainError("predict_edge_probs: sample count must be >= 1");
  int T = net.T(), M = st.M, n = net.vertex_count();
  if (n < 1) throw DomainError("predict_edge_probs: no fitted vertices");
  for (const auto& p : pairs)
    if (p.first < 0 || p.second < 0 || p.first >= n || p.second >= n)
      throw DomainError("predict_edge_probs: unknown vertex in pair");

  std::vector<ChainMarginals> hm;
  hm.reserve(static_cast<size_t>(n));
  for (int v = 0; v < n; ++v) hm.push_back(chain_marginals(st.h_q[static_cast<size_t>(v)]));
  ChainMarginals km = chain_marginals(st.k_q);

  Vec out = Vec::Zero(static_cast<long>(pairs.size()));
  Mat h_hat(M, n);
  Vec k_hat(M);
  for (int s = 0; s < samples; ++s) {
    for (int v = 0; v < n; ++v) {
      int col = T - net.arrival[static_cast<size_t>(v)];
      for (int m = 0; m < M; ++m)
        h_hat(m, v) = hm[static_cast<size_t>(v)].mean(m, col) +
                      std::sqrt(hm[static_cast<size_t>(v)].var(m, col)) * std_normal(rng);
    }
    for (int m = 0; m < M; ++m)
      k_hat[m] = km.mean(m, T - 1) + std::sqrt(km.var(m, T - 1)) * std_normal(rng);
    Vec c_probs = softmax(k_hat);
    Mat p(M, n);
    for (int m = 0; m < M; ++m) p.row(m) = softmax(h_hat.row(m).transpose()).transpose();
    for (size_t i = 0; i < pairs.size(); ++i) {
      auto [u, v] = pairs[i];
      double acc = 0.0;
      for (int m = 0; m < M; ++m) acc += c_probs[m] * p(m, u) * p(m, v);
      out[static_cast<long>(i)] += (u == v) ? acc : 2.0 * acc;
    }
  }
  return out / static_cast<double>(samples);
}

}  // namespace dex
