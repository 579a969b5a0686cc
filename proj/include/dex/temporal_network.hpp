#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dex/errors.hpp"
#include "dex/rng.hpp"

namespace dex {

using VertexPair = std::pair<int, int>;  // canonical: first <= second

inline VertexPair canonical_pair(int u, int v) {
  return u <= v ? VertexPair{u, v} : VertexPair{v, u};
}

struct EdgeSlice {
  std::vector<VertexPair> edges;  // multiset; no ordering semantics
  long n() const { return static_cast<long>(edges.size()); }
};

// A sequence of per-slice edge multisets over a growing vertex set.
// Vertex ids are dense 0-based ints assigned at ingestion in order of first
// appearance; labels keep the external names. V^(t) = {v : arrival[v] <= t}.
struct TemporalNetwork {
  std::vector<EdgeSlice> slices;                 // index t-1 holds slice t
  std::vector<std::string> labels;               // id -> external label
  std::vector<int> arrival;                      // id -> first slice of participation
  std::vector<int> by_arrival;                   // ids sorted by (arrival, id)
  std::vector<long> count_at;                    // index t-1 -> |V^(t)|
  std::unordered_map<std::string, int> id_of;

  int T() const { return static_cast<int>(slices.size()); }
  int vertex_count() const { return static_cast<int>(labels.size()); }

  const EdgeSlice& slice(int t) const {
    if (t < 1 || t > T()) throw DomainError("slice index out of range: " + std::to_string(t));
    return slices[static_cast<size_t>(t - 1)];
  }

  long vertex_count_at(int t) const {
    if (t < 1 || t > T()) throw DomainError("slice index out of range: " + std::to_string(t));
    return count_at[static_cast<size_t>(t - 1)];
  }

  // V^(t), ordered by (arrival, id).
  std::span<const int> vertices_at(int t) const {
    return {by_arrival.data(), static_cast<size_t>(vertex_count_at(t))};
  }

  // Newcomer count Delta^(t) = |V^(t)| - |V^(t-1)|.
  long delta_at(int t) const {
    return vertex_count_at(t) - (t > 1 ? vertex_count_at(t - 1) : 0);
  }

  // Recomputes arrival, by_arrival, count_at from slices; checks invariants.
  void finalize() {
    int n = vertex_count();
    arrival.assign(static_cast<size_t>(n), 0);
    std::vector<int> first(static_cast<size_t>(n), T() + 1);
    for (int t = 1; t <= T(); ++t) {
      for (const auto& [u, v] : slices[static_cast<size_t>(t - 1)].edges) {
        if (u < 0 || u >= n || v < 0 || v >= n)
          throw InternalError("edge references unknown vertex id");
        first[static_cast<size_t>(u)] = std::min(first[static_cast<size_t>(u)], t);
        first[static_cast<size_t>(v)] = std::min(first[static_cast<size_t>(v)], t);
      }
    }
    for (int v = 0; v < n; ++v) {
      if (first[static_cast<size_t>(v)] > T())
        throw InternalError("vertex participates in no edge: " + labels[static_cast<size_t>(v)]);
      arrival[static_cast<size_t>(v)] = first[static_cast<size_t>(v)];
    }
    by_arrival.resize(static_cast<size_t>(n));
    for (int v = 0; v < n; ++v) by_arrival[static_cast<size_t>(v)] = v;
    std::sort(by_arrival.begin(), by_arrival.end(), [&](int a, int b) {
      if (arrival[static_cast<size_t>(a)] != arrival[static_cast<size_t>(b)])
        return arrival[static_cast<size_t>(a)] < arrival[static_cast<size_t>(b)];
      return a < b;
    });
    count_at.assign(static_cast<size_t>(T()), 0);
    for (int v = 0; v < n; ++v)
      count_at[static_cast<size_t>(arrival[static_cast<size_t>(v)] - 1)] += 1;
    for (int t = 1; t < T(); ++t) count_at[static_cast<size_t>(t)] += count_at[static_cast<size_t>(t - 1)];
    id_of.clear();
    id_of.reserve(static_cast<size_t>(n));
    for (int v = 0; v < n; ++v) id_of[labels[static_cast<size_t>(v)]] = v;
  }
};

// Incremental construction from labeled edges; ids in order of first appearance.
class NetworkBuilder {
 public:
  explicit NetworkBuilder(int T = 0) { net_.slices.resize(static_cast<size_t>(std::max(T, 0))); }

  int intern(const std::string& label) {
    auto it = net_.id_of.find(label);
    if (it != net_.id_of.end()) return it->second;
    int id = net_.vertex_count();
    net_.labels.push_back(label);
    net_.id_of.emplace(label, id);
    return id;
  }

  void add_edge(int t, const std::string& u, const std::string& v) {
    if (t < 1) throw DomainError("slice index must be >= 1, got " + std::to_string(t));
    if (t > static_cast<int>(net_.slices.size())) net_.slices.resize(static_cast<size_t>(t));
    int iu = intern(u);
    int iv = intern(v);
    net_.slices[static_cast<size_t>(t - 1)].edges.push_back(canonical_pair(iu, iv));
  }

  TemporalNetwork build() {
    TemporalNetwork out = std::move(net_);
    net_ = TemporalNetwork{};
    out.finalize();
    return out;
  }

 private:
  TemporalNetwork net_;
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  if (sep == ' ') {  // any whitespace run
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
  } else {
    std::string cur;
    for (char c : line) {
      if (c == sep) {
        out.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    out.push_back(cur);
  }
  return out;
}

}  // namespace detail

// Reads `t sep u sep v` lines; '#' starts a comment line; blank lines ignored.
inline TemporalNetwork parse_temporal_edgelist(std::istream& in, char sep = ' ',
                                               const std::string& source = "<stream>") {
  NetworkBuilder builder;
  std::string line;
  long lineno = 0;
  long edge_lines = 0;
  int max_t = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    if (line[start] == '#') continue;
    auto fields = detail::split_fields(line, sep);
    if (fields.size() != 3) throw ParseError("expected `t u v`, got " + std::to_string(fields.size()) + " fields", lineno);
    int t = 0;
    try {
      size_t pos = 0;
      t = std::stoi(fields[0], &pos);
      if (pos != fields[0].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError("slice index is not an integer: `" + fields[0] + "`", lineno);
    }
    if (t < 1) throw DomainError("slice index must be >= 1, got " + std::to_string(t) +
                                 " at line " + std::to_string(lineno));
    if (fields[1].empty() || fields[2].empty()) throw ParseError("empty vertex label", lineno);
    builder.add_edge(t, fields[1], fields[2]);
    ++edge_lines;
    max_t = std::max(max_t, t);
  }
  if (edge_lines == 0) throw DomainError("edge list has no edges: " + source);
  return builder.build();
}

inline TemporalNetwork load_temporal_edgelist(const std::string& path, char sep = ' ') {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open edge list: " + path);
  return parse_temporal_edgelist(in, sep, path);
}

// Deterministic text form: lines sorted by (t, u label, v label), labels in
// lexicographic order within a line so the output is independent of id order.
inline void serialize_temporal_edgelist(const TemporalNetwork& net, std::ostream& out, char sep = ' ') {
  std::vector<std::tuple<int, std::string, std::string>> lines;
  for (int t = 1; t <= net.T(); ++t) {
    for (const auto& [u, v] : net.slice(t).edges) {
      std::string lu = net.labels[static_cast<size_t>(u)];
      std::string lv = net.labels[static_cast<size_t>(v)];
      if (lv < lu) std::swap(lu, lv);
      lines.emplace_back(t, std::move(lu), std::move(lv));
    }
  }
  std::sort(lines.begin(), lines.end());
  for (const auto& [t, u, v] : lines) out << t << sep << u << sep << v << "\n";
}

inline void save_temporal_edgelist(const TemporalNetwork& net, const std::string& path, char sep = ' ') {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write edge list: " + path);
  serialize_temporal_edgelist(net, out, sep);
}

// Structural equality on the observable network: slice multisets of label
// pairs and per-label arrivals. Internal ids may differ.
inline bool same_network(const TemporalNetwork& a, const TemporalNetwork& b) {
  if (a.T() != b.T() || a.vertex_count() != b.vertex_count()) return false;
  std::ostringstream sa, sb;
  serialize_temporal_edgelist(a, sa);
  serialize_temporal_edgelist(b, sb);
  return sa.str() == sb.str();
}

// Distinct partners of v in slice t; excludes v unless a self-loop exists.
inline std::vector<int> neighbors(const TemporalNetwork& net, int v, int t) {
  if (t < 1 || t > net.T()) throw DomainError("slice index out of range: " + std::to_string(t));
  std::set<int> out;
  for (const auto& [a, b] : net.slice(t).edges) {
    if (a == v) out.insert(b);
    if (b == v) out.insert(a);
  }
  return {out.begin(), out.end()};
}

// Parallel edges collapsed to one per slice; labels resolved by majority vote,
// ties broken uniformly with the seeded generator.
inline std::pair<TemporalNetwork, std::vector<std::vector<int>>> collapse_parallel(
    const TemporalNetwork& net, const std::vector<std::vector<int>>& edge_labels = {},
    uint64_t seed = 0) {
  bool with_labels = !edge_labels.empty();
  if (with_labels && edge_labels.size() != static_cast<size_t>(net.T()))
    throw DomainError("edge label slices do not match network slices");
  TemporalNetwork out;
  out.slices.resize(static_cast<size_t>(net.T()));
  out.labels = net.labels;
  std::vector<std::vector<int>> out_labels(static_cast<size_t>(net.T()));
  Rng rng = sub_rng(seed, 0xC0111A55u);
  for (int t = 1; t <= net.T(); ++t) {
    const auto& slice = net.slice(t);
    if (with_labels && edge_labels[static_cast<size_t>(t - 1)].size() != slice.edges.size())
      throw DomainError("edge label count mismatch in slice " + std::to_string(t));
    std::map<VertexPair, std::map<int, long>> votes;  // ordered: deterministic iteration
    for (size_t i = 0; i < slice.edges.size(); ++i) {
      auto& v = votes[slice.edges[i]];
      if (with_labels) v[edge_labels[static_cast<size_t>(t - 1)][i]] += 1;
    }
    auto& oslice = out.slices[static_cast<size_t>(t - 1)];
    for (const auto& [pair, tally] : votes) {
      oslice.edges.push_back(pair);
      if (with_labels) {
        long best = 0;
        for (const auto& [lab, cnt] : tally) best = std::max(best, cnt);
        std::vector<int> tied;
        for (const auto& [lab, cnt] : tally)
          if (cnt == best) tied.push_back(lab);
        int pick = tied[static_cast<size_t>(std::uniform_int_distribution<size_t>(0, tied.size() - 1)(rng))];
        out_labels[static_cast<size_t>(t - 1)].push_back(pick);
      }
    }
  }
  out.finalize();
  return {std::move(out), std::move(out_labels)};
}

struct HoldoutFold {
  TemporalNetwork train;
  std::vector<std::pair<std::string, std::string>> heldout;  // label pairs, u <= v
};

// Splits the distinct slice-T edges into near-equal parts; fold f trains on
// everything except part f (multiplicity kept for retained slice-T edges).
inline std::vector<HoldoutFold> holdout_split(const TemporalNetwork& net, int folds, uint64_t seed) {
  if (folds < 2) throw DomainError("holdout_split needs folds >= 2");
  int T = net.T();
  std::set<VertexPair> distinct(net.slice(T).edges.begin(), net.slice(T).edges.end());
  if (distinct.empty()) throw DomainError("holdout_split: last slice is empty");
  std::vector<VertexPair> pairs(distinct.begin(), distinct.end());
  Rng rng = sub_rng(seed, 0xF01D5u);
  std::shuffle(pairs.begin(), pairs.end(), rng);
  size_t n = pairs.size();
  size_t base = n / static_cast<size_t>(folds);
  size_t extra = n % static_cast<size_t>(folds);
  std::vector<HoldoutFold> out;
  size_t pos = 0;
  for (int f = 0; f < folds; ++f) {
    size_t take = base + (static_cast<size_t>(f) < extra ? 1 : 0);
    std::set<VertexPair> part(pairs.begin() + static_cast<long>(pos),
                              pairs.begin() + static_cast<long>(pos + take));
    pos += take;
    NetworkBuilder builder(T);
    for (int t = 1; t < T; ++t)
      for (const auto& [u, v] : net.slice(t).edges)
        builder.add_edge(t, net.labels[static_cast<size_t>(u)], net.labels[static_cast<size_t>(v)]);
    for (const auto& e : net.slice(T).edges)
      if (!part.count(e))
        builder.add_edge(T, net.labels[static_cast<size_t>(e.first)], net.labels[static_cast<size_t>(e.second)]);
    HoldoutFold fold;
    fold.train = builder.build();
    for (const auto& [u, v] : part) {
      std::string lu = net.labels[static_cast<size_t>(u)];
      std::string lv = net.labels[static_cast<size_t>(v)];
      if (lv < lu) std::swap(lu, lv);
      fold.heldout.emplace_back(lu, lv);
    }
    std::sort(fold.heldout.begin(), fold.heldout.end());
    out.push_back(std::move(fold));
  }
  return out;
}

}  // namespace dex
