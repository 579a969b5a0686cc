#pragma once

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "dex/baselines.hpp"
#include "dex/metrics.hpp"
#include "dex/predict.hpp"

namespace dex {

struct EvalOptions {
  int samples = 500;
  double alpha = 1.0;
  unsigned long seed = 0;
};

// Scores for one fold: model and baselines over the same positive/negative
// pair universe (distinct final-slice pairs over the training vertex set).
struct FoldReport {
  std::vector<VertexPair> pairs;  // positives first, then negatives (train ids)
  std::vector<int> labels;        // 1 = heldout positive, 0 = negative
  Vec model_scores;
  Vec dirmult_scores;
  Vec equiprob_scores;
  RocResult model_roc;
  RocResult dirmult_roc;
  RocResult equiprob_roc;
  long skipped_unknown = 0;  // heldout pairs naming vertices absent from train
};

inline FoldReport evaluate_fold(const TemporalNetwork& train, const VariationalState& fitted,
                                const std::vector<std::pair<std::string, std::string>>& heldout,
                                const EvalOptions& opts) {
  int T = train.T(), n = train.vertex_count();
  FoldReport rep;

  std::set<VertexPair> positives;
  for (const auto& [lu, lv] : heldout) {
    auto iu = train.id_of.find(lu);
    auto iv = train.id_of.find(lv);
    if (iu == train.id_of.end() || iv == train.id_of.end()) {
      ++rep.skipped_unknown;
      continue;
    }
    positives.insert(canonical_pair(iu->second, iv->second));
  }
  if (positives.empty()) throw DomainError("evaluate_fold: no scorable heldout pairs");

  std::set<VertexPair> observed;
  for (const auto& e : train.slice(T).edges) observed.insert(e);

  for (const auto& p : positives) {
    rep.pairs.push_back(p);
    rep.labels.push_back(1);
  }
  long n_neg = 0;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      VertexPair p{u, v};
      if (positives.count(p) || observed.count(p)) continue;
      rep.pairs.push_back(p);
      rep.labels.push_back(0);
      ++n_neg;
    }
  }
  if (n_neg == 0) throw DomainError("evaluate_fold: empty negative set");

  Rng rng = sub_rng(opts.seed, 0xE7A1u);
  rep.model_scores = predict_edge_probs(fitted, train, rep.pairs, opts.samples, rng);
  rep.dirmult_scores = dirichlet_multinomial_scores(train, rep.pairs, opts.alpha);
  rep.equiprob_scores =
      Vec::Constant(static_cast<long>(rep.pairs.size()), equiprobable_score(n));

  std::span<const int> labels(rep.labels);
  auto as_span = [](const Vec& v) {
    return std::span<const double>(v.data(), static_cast<size_t>(v.size()));
  };
  rep.model_roc = roc_auc(as_span(rep.model_scores), labels);
  rep.dirmult_roc = roc_auc(as_span(rep.dirmult_scores), labels);
  rep.equiprob_roc = roc_auc(as_span(rep.equiprob_scores), labels);
  return rep;
}

// Standard error of the mean over per-fold AUCs.
inline std::pair<double, double> mean_and_se(const std::vector<double>& xs) {
  if (xs.empty()) throw DomainError("mean_and_se: empty input");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += sq(x - mean);
  double se = std::sqrt(ss / static_cast<double>(xs.size() - 1)) /
              std::sqrt(static_cast<double>(xs.size()));
  return {mean, se};
}

}  // namespace dex
