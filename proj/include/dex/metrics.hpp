#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "dex/errors.hpp"
#include "dex/variational.hpp"

namespace dex {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocResult {
  std::vector<RocPoint> points;  // (0,0) .. (1,1), one step per distinct score
  double auc = 0.0;
};

// Mann-Whitney AUC (ties at half credit) plus the threshold-sweep ROC curve.
inline RocResult roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DomainError("roc_auc: size mismatch");
  long n = static_cast<long>(scores.size());
  long n_pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw DomainError("roc_auc: labels must be 0/1");
    n_pos += y;
  }
  long n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DomainError("roc_auc: both classes required");

  std::vector<long> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](long a, long b) {
    return scores[static_cast<size_t>(a)] < scores[static_cast<size_t>(b)];
  });

  // average ranks over tie groups; AUC from the positive rank sum
  double rank_sum_pos = 0.0;
  for (long i = 0; i < n;) {
    long j = i;
    while (j < n && scores[static_cast<size_t>(idx[static_cast<size_t>(j)])] ==
                        scores[static_cast<size_t>(idx[static_cast<size_t>(i)])])
      ++j;
    double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (long t = i; t < j; ++t)
      if (labels[static_cast<size_t>(idx[static_cast<size_t>(t)])] == 1) rank_sum_pos += avg_rank;
    i = j;
  }
  RocResult out;
  out.auc = (rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
            (static_cast<double>(n_pos) * static_cast<double>(n_neg));

  // sweep thresholds descending; one point per distinct score
  out.points.push_back({0.0, 0.0});
  long tp = 0, fp = 0;
  for (long i = n - 1; i >= 0;) {
    long j = i;
    while (j >= 0 && scores[static_cast<size_t>(idx[static_cast<size_t>(j)])] ==
                         scores[static_cast<size_t>(idx[static_cast<size_t>(i)])])
      --j;
    for (long t = i; t > j; --t) {
      if (labels[static_cast<size_t>(idx[static_cast<size_t>(t)])] == 1)
        ++tp;
      else
        ++fp;
    }
    out.points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                          static_cast<double>(tp) / static_cast<double>(n_pos)});
    i = j;
  }
  return out;
}

// Normalized mutual information with sqrt-of-entropies normalization.
// Zero-entropy conventions: both single-cluster -> 1; exactly one
// single-cluster (the partitions differ in refinement) -> 0.
inline double nmi(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw DomainError("nmi: length mismatch");
  if (a.empty()) throw DomainError("nmi: empty labelings");
  double n = static_cast<double>(a.size());
  std::map<int, long> ca, cb;
  std::map<std::pair<int, int>, long> cj;
  for (size_t i = 0; i < a.size(); ++i) {
    ++ca[a[i]];
    ++cb[b[i]];
    ++cj[{a[i], b[i]}];
  }
  auto entropy = [n](const std::map<int, long>& c) {
    double h = 0.0;
    for (const auto& [k, cnt] : c) {
      double p = static_cast<double>(cnt) / n;
      h -= p * std::log(p);
    }
    return h;
  };
  double ha = entropy(ca), hb = entropy(cb);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  if (ha == 0.0 || hb == 0.0) return 0.0;
  double mi = 0.0;
  for (const auto& [kk, cnt] : cj) {
    double pj = static_cast<double>(cnt) / n;
    double pa = static_cast<double>(ca[kk.first]) / n;
    double pb = static_cast<double>(cb[kk.second]) / n;
    mi += pj * std::log(pj / (pa * pb));
  }
  double v = mi / std::sqrt(ha * hb);
  return std::clamp(v, 0.0, 1.0);
}

// Per-edge argmax community labels, 1-based; ties go to the smaller index.
inline std::vector<std::vector<int>> map_communities(const VariationalState& st) {
  std::vector<std::vector<int>> out;
  out.reserve(st.pi.size());
  for (const Mat& pi_t : st.pi) {
    std::vector<int> labels(static_cast<size_t>(pi_t.rows()));
    for (long i = 0; i < pi_t.rows(); ++i) {
      int arg = 0;
      for (int m = 1; m < pi_t.cols(); ++m)
        if (pi_t(i, m) > pi_t(i, arg)) arg = m;
      labels[static_cast<size_t>(i)] = arg + 1;
    }
    out.push_back(std::move(labels));
  }
  return out;
}

// Best label-matching accuracy over permutations of the predicted alphabet.
inline double accuracy_up_to_permutation(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size()) throw DomainError("accuracy: length mismatch");
  if (truth.empty()) throw DomainError("accuracy: empty labelings");
  std::vector<int> tvals(truth.begin(), truth.end());
  std::vector<int> pvals(pred.begin(), pred.end());
  std::sort(tvals.begin(), tvals.end());
  tvals.erase(std::unique(tvals.begin(), tvals.end()), tvals.end());
  std::sort(pvals.begin(), pvals.end());
  pvals.erase(std::unique(pvals.begin(), pvals.end()), pvals.end());
  if (pvals.size() > 8 || tvals.size() > 8)
    throw DomainError("accuracy: too many labels for permutation search");
  // map predicted values onto target values (padded with unused slots)
  std::vector<int> targets = tvals;
  while (targets.size() < pvals.size()) targets.push_back(-1 - static_cast<int>(targets.size()));
  std::sort(targets.begin(), targets.end());
  double best = 0.0;
  do {
    std::map<int, int> remap;
    for (size_t i = 0; i < pvals.size(); ++i) remap[pvals[i]] = targets[i];
    long hits = 0;
    for (size_t i = 0; i < truth.size(); ++i)
      if (remap[pred[i]] == truth[i]) ++hits;
    best = std::max(best, static_cast<double>(hits) / static_cast<double>(truth.size()));
  } while (std::next_permutation(targets.begin(), targets.end()));
  return best;
}

}  // namespace dex
