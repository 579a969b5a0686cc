#pragma once

#include <map>
#include <span>
#include <vector>

#include "dex/temporal_network.hpp"

namespace dex {

// Posterior predictive of a symmetric-Dirichlet multinomial over the distinct
// unordered pairs of the final vertex set; counts pool every training slice.
inline Vec dirichlet_multinomial_scores(const TemporalNetwork& train,
                                        std::span<const VertexPair> pairs, double alpha) {
  if (alpha <= 0.0) throw DomainError("dirichlet_multinomial_scores: alpha must be > 0");
  long v = train.vertex_count();
  double p_total = 0.5 * static_cast<double>(v) * static_cast<double>(v - 1);
  std::map<VertexPair, long> counts;
  long n_tot = 0;
  for (int t = 1; t <= train.T(); ++t) {
    for (const auto& e : train.slice(t).edges) {
      ++counts[e];
      ++n_tot;
    }
  }
  Vec out(static_cast<long>(pairs.size()));
  double denom = static_cast<double>(n_tot) + alpha * p_total;
  for (size_t i = 0; i < pairs.size(); ++i) {
    auto it = counts.find(canonical_pair(pairs[i].first, pairs[i].second));
    long n_ij = (it == counts.end()) ? 0 : it->second;
    out[static_cast<long>(i)] = (static_cast<double>(n_ij) + alpha) / denom;
  }
  return out;
}

// Chance baseline: every ordered pair equally likely.
inline double equiprobable_score(long vertex_count) {
  if (vertex_count < 2) throw DomainError("equiprobable_score: need at least 2 vertices");
  return 1.0 / (static_cast<double>(vertex_count) * static_cast<double>(vertex_count - 1));
}

}  // namespace dex
