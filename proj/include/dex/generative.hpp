#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "dex/model.hpp"
#include "dex/rng.hpp"
#include "dex/temporal_network.hpp"

namespace dex {

// P(c = m | k) by softmax of k.
inline Vec community_probs(const Vec& k) {
  if (!k.allFinite()) throw DomainError("community_probs: non-finite logits");
  return softmax(k);
}

// Dominance distribution over participants in community m: softmax of the m-th
// state component.
inline Vec vertex_probs(std::span<const Vec> participant_states, int m) {
  if (participant_states.empty()) throw DomainError("vertex_probs: no participants");
  Vec logits(static_cast<long>(participant_states.size()));
  for (size_t i = 0; i < participant_states.size(); ++i) logits[static_cast<long>(i)] = participant_states[i][m];
  return softmax(logits);
}

// Attention over {self} ∪ neighbors from exponentiated dot products,
// jointly normalized.
inline std::pair<double, Vec> attention_weights(const Vec& h_v, std::span<const Vec> neighbor_states) {
  if (!h_v.allFinite()) throw DomainError("attention_weights: non-finite state");
  long n = static_cast<long>(neighbor_states.size());
  Vec dots(n + 1);
  dots[0] = h_v.dot(h_v);
  for (long i = 0; i < n; ++i) {
    if (!neighbor_states[static_cast<size_t>(i)].allFinite())
      throw DomainError("attention_weights: non-finite neighbor state");
    dots[i + 1] = h_v.dot(neighbor_states[static_cast<size_t>(i)]);
  }
  softmax_inplace(dots);
  return {dots[0], dots.tail(n)};
}

// Transition mean: attention-weighted average of the own state and neighbor
// states; equals h_v when the neighbor set is empty.
inline Vec attas_mean(const Vec& h_v, std::span<const Vec> neighbor_states) {
  if (neighbor_states.empty()) return h_v;
  auto [w_self, w] = attention_weights(h_v, neighbor_states);
  Vec f = w_self * h_v;
  for (long i = 0; i < w.size(); ++i) f += w[i] * neighbor_states[static_cast<size_t>(i)];
  return f;
}

namespace detail {

// Adjacency lists (deduplicated, ascending) for ids < n present in the slice.
inline std::vector<std::vector<int>> adjacency(const EdgeSlice& slice, int n) {
  std::vector<std::set<int>> sets(static_cast<size_t>(n));
  for (const auto& [u, v] : slice.edges) {
    if (u < n && v < n) {
      sets[static_cast<size_t>(u)].insert(v);
      sets[static_cast<size_t>(v)].insert(u);
    }
  }
  std::vector<std::vector<int>> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)].assign(sets[static_cast<size_t>(i)].begin(), sets[static_cast<size_t>(i)].end());
  return out;
}

}  // namespace detail

// Transition mean for vertex v given the previous slice's interactions.
inline Vec attas_mean(int v, const EdgeSlice& slice, const std::vector<Vec>& states_by_id) {
  std::set<int> nbrs;
  for (const auto& [a, b] : slice.edges) {
    if (a == v) nbrs.insert(b);
    if (b == v) nbrs.insert(a);
  }
  nbrs.erase(v);
  std::vector<Vec> nstates;
  nstates.reserve(nbrs.size());
  for (int u : nbrs) {
    if (u < 0 || u >= static_cast<int>(states_by_id.size()))
      throw InternalError("attas_mean: neighbor state missing");
    nstates.push_back(states_by_id[static_cast<size_t>(u)]);
  }
  return attas_mean(states_by_id[static_cast<size_t>(v)], nstates);
}

// One transition of every vertex state: Normal(mean, B B^T) with the mean from
// the dynamics (attention average under ATTAS, identity under RW).
inline std::vector<Vec> step_states(const std::vector<Vec>& states, const EdgeSlice& prev_slice,
                                    const ModelParams& params, Rng& rng) {
  int n = static_cast<int>(states.size());
  std::vector<Vec> out(static_cast<size_t>(n));
  auto adj = params.dynamics == Dynamics::ATTAS
                 ? detail::adjacency(prev_slice, n)
                 : std::vector<std::vector<int>>{};
  for (int v = 0; v < n; ++v) {
    Vec mean;
    if (params.dynamics == Dynamics::ATTAS) {
      std::vector<Vec> nstates;
      for (int u : adj[static_cast<size_t>(v)]) {
        if (u == v) continue;
        nstates.push_back(states[static_cast<size_t>(u)]);
      }
      mean = attas_mean(states[static_cast<size_t>(v)], nstates);
    } else {
      mean = states[static_cast<size_t>(v)];
    }
    Vec z(params.M);
    for (int m = 0; m < params.M; ++m) z[m] = std_normal(rng);
    out[static_cast<size_t>(v)] = mean + params.B_chol * z;
  }
  return out;
}

// One step of the birth chain: lambda from its Gaussian chain, L ~ Poisson(e^lambda).
inline std::pair<double, long> sample_birth(std::optional<double> prev_lambda,
                                            const ModelParams& params, Rng& rng) {
  double mean = prev_lambda ? params.a_lambda * *prev_lambda : params.mu_lambda;
  double lambda = mean + params.sigma_lambda * std_normal(rng);
  double rate = std::exp(lambda);
  if (!std::isfinite(rate) || rate > 1e12)
    throw DomainError("sample_birth: e^lambda overflow at lambda=" + std::to_string(lambda));
  return {lambda, poisson_draw(rate, rng)};
}

// Per-slice edge distribution: community weights and per-community vertex CDFs
// over a fixed participant list.
struct EdgeDistribution {
  Vec k_probs;                     // length M
  std::vector<Vec> vertex_probs_m; // per community, probabilities over participants
  std::vector<std::vector<double>> vertex_cdf_m;
};

inline EdgeDistribution build_edge_distribution(const Vec& k_t, std::span<const Vec> participant_states) {
  EdgeDistribution d;
  d.k_probs = community_probs(k_t);
  int M = static_cast<int>(k_t.size());
  d.vertex_probs_m.resize(static_cast<size_t>(M));
  d.vertex_cdf_m.resize(static_cast<size_t>(M));
  for (int m = 0; m < M; ++m) {
    d.vertex_probs_m[static_cast<size_t>(m)] = vertex_probs(participant_states, m);
    const Vec& p = d.vertex_probs_m[static_cast<size_t>(m)];
    auto& cdf = d.vertex_cdf_m[static_cast<size_t>(m)];
    cdf.resize(static_cast<size_t>(p.size()));
    double acc = 0.0;
    for (long i = 0; i < p.size(); ++i) {
      acc += p[i];
      cdf[static_cast<size_t>(i)] = acc;
    }
    cdf.back() = 1.0;
  }
  return d;
}

inline int draw_from_cdf(const std::vector<double>& cdf, Rng& rng) {
  double u = uniform01(rng);
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) --it;
  return static_cast<int>(it - cdf.begin());
}

struct EdgeDraw {
  int c;  // community, 0-based
  int i;  // participant slots, i < j (self-pairs rejected)
  int j;
};

// Community from the k softmax, then two i.i.d. vertex draws; equal pairs are
// redrawn (community kept) until distinct.
inline EdgeDraw sample_edge(const EdgeDistribution& d, Rng& rng) {
  size_t participants = d.vertex_cdf_m.empty() ? 0 : d.vertex_cdf_m[0].size();
  if (participants < 2) throw DomainError("sample_edge: needs at least 2 participants");
  EdgeDraw e;
  e.c = categorical(d.k_probs, rng);
  const auto& cdf = d.vertex_cdf_m[static_cast<size_t>(e.c)];
  do {
    e.i = draw_from_cdf(cdf, rng);
    e.j = draw_from_cdf(cdf, rng);
  } while (e.i == e.j);
  if (e.j < e.i) std::swap(e.i, e.j);
  return e;
}

inline EdgeDraw sample_edge(const Vec& k_t, std::span<const Vec> participant_states, Rng& rng) {
  if (participant_states.size() < 2) throw DomainError("sample_edge: needs at least 2 participants");
  return sample_edge(build_edge_distribution(k_t, participant_states), rng);
}

// Ground-truth latents captured by simulate. Community labels are 1-based in
// this record and in every serialized form.
struct LatentRecord {
  Mat k;                             // T x M
  std::vector<Mat> h;                // per vertex: (T - tau + 1) x M, row 0 at tau
  std::vector<std::vector<int>> c;   // per slice, aligned with edges, labels 1..M
  Vec lambda;                        // length T
  std::vector<long> L;               // potential newcomers per slice
  std::vector<long> discarded;       // potentials that joined no edge
};

// Forward sampler for the full model; edge counts N per slice are supplied.
inline std::pair<TemporalNetwork, LatentRecord> simulate(const ModelParams& params, int T,
                                                         const std::vector<long>& N, Rng& rng) {
  params.validate();
  if (T < 1) throw DomainError("simulate: T must be >= 1");
  if (static_cast<int>(N.size()) != T) throw DomainError("simulate: N must have one entry per slice");
  for (long n : N)
    if (n < 1) throw DomainError("simulate: every N_t must be >= 1");

  int M = params.M;
  LatentRecord rec;
  rec.k = Mat::Zero(T, M);
  rec.lambda = Vec::Zero(T);
  rec.L.assign(static_cast<size_t>(T), 0);
  rec.discarded.assign(static_cast<size_t>(T), 0);
  rec.c.resize(static_cast<size_t>(T));

  TemporalNetwork net;
  net.slices.resize(static_cast<size_t>(T));

  std::vector<Vec> states;             // by id, current slice
  std::vector<int> arrivals;           // by id
  std::vector<std::vector<Vec>> traj;  // by id, rows appended per slice
  std::optional<double> prev_lambda;
  Vec k_prev;

  for (int t = 1; t <= T; ++t) {
    auto [lambda_t, L_t] = sample_birth(prev_lambda, params, rng);
    prev_lambda = lambda_t;
    rec.lambda[t - 1] = lambda_t;
    rec.L[static_cast<size_t>(t - 1)] = L_t;

    Vec zk(M);
    for (int m = 0; m < M; ++m) zk[m] = std_normal(rng);
    Vec k_t = (t == 1 ? params.mu_k : Vec(params.A_k * k_prev)) + params.Bk_chol * zk;
    k_prev = k_t;
    rec.k.row(t - 1) = k_t.transpose();

    std::vector<Vec> potentials(static_cast<size_t>(L_t));
    for (long i = 0; i < L_t; ++i) {
      Vec z(M);
      for (int m = 0; m < M; ++m) z[m] = std_normal(rng);
      potentials[static_cast<size_t>(i)] = params.mu + params.B_chol * z;
    }

    if (t > 1 && !states.empty())
      states = step_states(states, net.slices[static_cast<size_t>(t - 2)], params, rng);

    long existing = static_cast<long>(states.size());
    long participants = existing + L_t;
    if (participants < 2)
      throw DomainError("simulate: fewer than 2 participants in slice " + std::to_string(t));

    std::vector<Vec> pstates;
    pstates.reserve(static_cast<size_t>(participants));
    for (const auto& s : states) pstates.push_back(s);
    for (const auto& s : potentials) pstates.push_back(s);
    EdgeDistribution dist = build_edge_distribution(k_t, pstates);

    std::vector<int> joined(static_cast<size_t>(L_t), -1);  // potential index -> id
    auto materialize = [&](int slot) -> int {
      if (slot < existing) return slot;
      long p = slot - existing;
      if (joined[static_cast<size_t>(p)] < 0) {
        int id = static_cast<int>(states.size());
        joined[static_cast<size_t>(p)] = id;
        states.push_back(potentials[static_cast<size_t>(p)]);
        arrivals.push_back(t);
        traj.emplace_back();
      }
      return joined[static_cast<size_t>(p)];
    };

    auto& slice = net.slices[static_cast<size_t>(t - 1)];
    for (long i = 0; i < N[static_cast<size_t>(t - 1)]; ++i) {
      EdgeDraw e = sample_edge(dist, rng);
      int u = materialize(e.i);
      int v = materialize(e.j);
      slice.edges.push_back(canonical_pair(u, v));
      rec.c[static_cast<size_t>(t - 1)].push_back(e.c + 1);
    }

    long newcomers = 0;
    for (int id : joined)
      if (id >= 0) ++newcomers;
    rec.discarded[static_cast<size_t>(t - 1)] = L_t - newcomers;

    for (size_t id = 0; id < states.size(); ++id) traj[id].push_back(states[id]);
  }

  int n = static_cast<int>(states.size());
  net.labels.resize(static_cast<size_t>(n));
  for (int v = 0; v < n; ++v) net.labels[static_cast<size_t>(v)] = std::to_string(v);
  net.finalize();
  for (int v = 0; v < n; ++v)
    if (net.arrival[static_cast<size_t>(v)] != arrivals[static_cast<size_t>(v)])
      throw InternalError("simulate: arrival bookkeeping mismatch");

  rec.h.resize(static_cast<size_t>(n));
  for (int v = 0; v < n; ++v) {
    const auto& rows = traj[static_cast<size_t>(v)];
    Mat h(static_cast<long>(rows.size()), M);
    for (size_t r = 0; r < rows.size(); ++r) h.row(static_cast<long>(r)) = rows[r].transpose();
    rec.h[static_cast<size_t>(v)] = std::move(h);
  }
  return {std::move(net), std::move(rec)};
}

inline void save_latent_record(const LatentRecord& rec, const TemporalNetwork& net,
                               const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  int T = static_cast<int>(rec.lambda.size());
  int M = static_cast<int>(rec.k.cols());
  {
    std::ofstream f(dir + "/k.csv");
    f << std::setprecision(17);
    f << "t,m,value\n";
    for (int t = 1; t <= T; ++t)
      for (int m = 1; m <= M; ++m) f << t << "," << m << "," << rec.k(t - 1, m - 1) << "\n";
  }
  {
    std::ofstream f(dir + "/h.csv");
    f << std::setprecision(17);
    f << "v,t,m,value\n";
    for (size_t v = 0; v < rec.h.size(); ++v) {
      int tau = net.arrival[v];
      for (long r = 0; r < rec.h[v].rows(); ++r)
        for (int m = 1; m <= M; ++m)
          f << net.labels[v] << "," << (tau + r) << "," << m << "," << rec.h[v](r, m - 1) << "\n";
    }
  }
  {
    std::ofstream f(dir + "/c.csv");
    f << "t,i,label\n";
    for (int t = 1; t <= T; ++t)
      for (size_t i = 0; i < rec.c[static_cast<size_t>(t - 1)].size(); ++i)
        f << t << "," << (i + 1) << "," << rec.c[static_cast<size_t>(t - 1)][i] << "\n";
  }
  {
    std::ofstream f(dir + "/birth.csv");
    f << std::setprecision(17);
    f << "t,lambda,L,discarded\n";
    for (int t = 1; t <= T; ++t)
      f << t << "," << rec.lambda[t - 1] << "," << rec.L[static_cast<size_t>(t - 1)] << ","
        << rec.discarded[static_cast<size_t>(t - 1)] << "\n";
  }
}

struct SparsityRow {
  uint64_t seed;
  long edges;
  long vertices;
};

struct SparsityResult {
  std::vector<SparsityRow> rows;
  std::vector<std::string> warnings;
};

// Single-slice M=1 experiment: pool of Poisson(pool_rate) latent vertices with
// scalar states h ~ Normal(0, sigma^2); edges drawn i.i.d. from the softmax of
// h with self-pairs rejected; |V| = distinct activated vertices, recorded at
// each |E| checkpoint.
inline SparsityResult sparsity_experiment(double sigma, double pool_rate,
                                          const std::vector<long>& checkpoints,
                                          const std::vector<uint64_t>& seeds) {
  if (!(sigma > 0.0)) throw DomainError("sparsity_experiment: sigma must be > 0");
  if (checkpoints.empty()) throw DomainError("sparsity_experiment: no checkpoints");
  for (size_t i = 1; i < checkpoints.size(); ++i)
    if (checkpoints[i] <= checkpoints[i - 1])
      throw DomainError("sparsity_experiment: checkpoints must be increasing");
  SparsityResult out;
  for (uint64_t seed : seeds) {
    Rng rng(seed);
    long pool = poisson_draw(pool_rate, rng);
    if (pool < 2) {
      out.warnings.push_back("seed " + std::to_string(seed) + ": pool < 2, skipped");
      continue;
    }
    std::vector<double> h(static_cast<size_t>(pool));
    for (auto& x : h) x = sigma * std_normal(rng);
    double mx = *std::max_element(h.begin(), h.end());
    std::vector<double> cdf(static_cast<size_t>(pool));
    double acc = 0.0;
    for (size_t i = 0; i < h.size(); ++i) {
      acc += std::exp(h[i] - mx);
      cdf[i] = acc;
    }
    for (auto& x : cdf) x /= acc;
    cdf.back() = 1.0;

    std::vector<char> active(static_cast<size_t>(pool), 0);
    long active_count = 0;
    long drawn = 0;
    auto touch = [&](int v) {
      if (!active[static_cast<size_t>(v)]) {
        active[static_cast<size_t>(v)] = 1;
        ++active_count;
      }
    };
    size_t next_cp = 0;
    bool truncated = false;
    while (next_cp < checkpoints.size()) {
      if (active_count == pool) {
        out.warnings.push_back("seed " + std::to_string(seed) +
                               ": pool exhausted at |E|=" + std::to_string(drawn) +
                               ", remaining checkpoints truncated");
        truncated = true;
        break;
      }
      int i = 0, j = 0;
      do {
        i = draw_from_cdf(cdf, rng);
        j = draw_from_cdf(cdf, rng);
      } while (i == j);
      touch(i);
      touch(j);
      ++drawn;
      if (drawn == checkpoints[next_cp]) {
        out.rows.push_back({seed, drawn, active_count});
        ++next_cp;
      }
    }
    (void)truncated;
  }
  return out;
}

// Pooled log-log slope over checkpoints with |E| >= min_edges. The regression
// is of log|V| on log|E| (the checkpoint design fixes |E|); the reported slope
// is the reciprocal, i.e. d log|E| / d log|V|.
inline double fitted_sparsity_slope(const std::vector<SparsityRow>& rows, long min_edges = 100) {
  std::vector<double> x, y;
  for (const auto& r : rows) {
    if (r.edges >= min_edges && r.vertices >= 2) {
      x.push_back(std::log(static_cast<double>(r.edges)));
      y.push_back(std::log(static_cast<double>(r.vertices)));
    }
  }
  if (x.size() < 2) throw DomainError("fitted_sparsity_slope: not enough checkpoints past min_edges");
  OlsFit f = ols_fit(x, y);
  if (f.slope == 0.0) throw DomainError("fitted_sparsity_slope: degenerate fit");
  return 1.0 / f.slope;
}

inline void save_sparsity_rows(const std::vector<SparsityRow>& rows, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DomainError("cannot write sparsity CSV: " + path);
  f << "seed,edges,vertices\n";
  for (const auto& r : rows) f << r.seed << "," << r.edges << "," << r.vertices << "\n";
}

}  // namespace dex
