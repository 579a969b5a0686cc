#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <utility>

#include <json.hpp>

#include "dex/variational.hpp"

namespace dex {

namespace detail {

using json = nlohmann::json;

inline json vec_json(const Vec& v) {
  json a = json::array();
  for (long i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json mat_json(const Mat& m) {
  json rows = json::array();
  for (long r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (long c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline Vec json_vec(const json& a) {
  Vec v(static_cast<long>(a.size()));
  for (long i = 0; i < v.size(); ++i) v[i] = a[static_cast<size_t>(i)].get<double>();
  return v;
}

inline Mat json_mat(const json& a) {
  long rows = static_cast<long>(a.size());
  long cols = rows == 0 ? 0 : static_cast<long>(a[0].size());
  Mat m(rows, cols);
  for (long r = 0; r < rows; ++r) {
    const json& row = a[static_cast<size_t>(r)];
    if (static_cast<long>(row.size()) != cols) throw DomainError("checkpoint: ragged matrix");
    for (long c = 0; c < cols; ++c) m(r, c) = row[static_cast<size_t>(c)].get<double>();
  }
  return m;
}

inline json chain_json(const GaussChainQ& q) {
  return {{"init_mean", vec_json(q.init_mean)}, {"init_logstd", vec_json(q.init_logstd)},
          {"a", mat_json(q.a)},                 {"b", mat_json(q.b)},
          {"logs", mat_json(q.logs)}};
}

inline GaussChainQ json_chain(const json& j) {
  GaussChainQ q;
  q.init_mean = json_vec(j.at("init_mean"));
  q.init_logstd = json_vec(j.at("init_logstd"));
  q.a = json_mat(j.at("a"));
  q.b = json_mat(j.at("b"));
  q.logs = json_mat(j.at("logs"));
  if (q.a.rows() != q.init_mean.size() || q.b.rows() != q.a.rows() ||
      q.logs.rows() != q.a.rows() || q.b.cols() != q.a.cols() || q.logs.cols() != q.a.cols())
    throw DomainError("checkpoint: inconsistent chain shapes");
  return q;
}

}  // namespace detail

struct Checkpoint {
  TemporalNetwork net;
  VariationalState state;
  ModelParams params;
  unsigned long seed = 0;
};

inline constexpr const char* kCheckpointFormat = "dex-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const TemporalNetwork& net,
                            const VariationalState& st, const ModelParams& params,
                            unsigned long seed) {
  using detail::json;
  std::ostringstream edges;
  serialize_temporal_edgelist(net, edges);

  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["seed"] = seed;
  j["network"] = edges.str();
  j["params"] = {{"M", params.M},
                 {"dynamics", dynamics_name(params.dynamics)},
                 {"mu_lambda", params.mu_lambda},
                 {"sigma_lambda", params.sigma_lambda},
                 {"a_lambda", params.a_lambda},
                 {"mu", detail::vec_json(params.mu)},
                 {"B_chol", detail::mat_json(params.B_chol)},
                 {"mu_k", detail::vec_json(params.mu_k)},
                 {"A_k", detail::mat_json(params.A_k)},
                 {"Bk_chol", detail::mat_json(params.Bk_chol)}};
  json h = json::array();
  for (const auto& q : st.h_q) h.push_back(detail::chain_json(q));
  json pi = json::array();
  for (const Mat& p : st.pi) pi.push_back(detail::mat_json(p));
  j["state"] = {{"M", st.M},
                {"pi", pi},
                {"h_q", h},
                {"k_q", detail::chain_json(st.k_q)},
                {"lambda_q", detail::chain_json(st.lambda_q)},
                {"log_eta", detail::vec_json(st.log_eta)},
                {"zeta_vm", detail::mat_json(st.zeta_vm)},
                {"zeta_c", detail::vec_json(st.zeta_c)},
                {"adam", {{"m", detail::vec_json(st.adam.m)},
                          {"v", detail::vec_json(st.adam.v)},
                          {"step", st.adam.step},
                          {"skipped", st.adam.skipped}}}};

  std::ofstream out(path);
  if (!out) throw DomainError("cannot write checkpoint: " + path);
  out << j.dump(1) << "\n";
  if (!out) throw DomainError("failed writing checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  using detail::json;
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DomainError("checkpoint is not valid JSON: " + std::string(e.what()));
  }
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat)
      throw DomainError("not a model checkpoint: " + path);
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw DomainError("unsupported checkpoint version in " + path);

    Checkpoint cp;
    cp.seed = j.at("seed").get<unsigned long>();
    std::istringstream edges(j.at("network").get<std::string>());
    cp.net = parse_temporal_edgelist(edges, ' ', "checkpoint network");

    const json& pj = j.at("params");
    cp.params.M = pj.at("M").get<int>();
    cp.params.dynamics = dynamics_from_name(pj.at("dynamics").get<std::string>());
    cp.params.mu_lambda = pj.at("mu_lambda").get<double>();
    cp.params.sigma_lambda = pj.at("sigma_lambda").get<double>();
    cp.params.a_lambda = pj.at("a_lambda").get<double>();
    cp.params.mu = detail::json_vec(pj.at("mu"));
    cp.params.B_chol = detail::json_mat(pj.at("B_chol"));
    cp.params.mu_k = detail::json_vec(pj.at("mu_k"));
    cp.params.A_k = detail::json_mat(pj.at("A_k"));
    cp.params.Bk_chol = detail::json_mat(pj.at("Bk_chol"));
    cp.params.validate();

    const json& sj = j.at("state");
    cp.state.M = sj.at("M").get<int>();
    for (const auto& p : sj.at("pi")) cp.state.pi.push_back(detail::json_mat(p));
    for (const auto& q : sj.at("h_q")) cp.state.h_q.push_back(detail::json_chain(q));
    cp.state.k_q = detail::json_chain(sj.at("k_q"));
    cp.state.lambda_q = detail::json_chain(sj.at("lambda_q"));
    cp.state.log_eta = detail::json_vec(sj.at("log_eta"));
    cp.state.zeta_vm = detail::json_mat(sj.at("zeta_vm"));
    cp.state.zeta_c = detail::json_vec(sj.at("zeta_c"));
    const json& aj = sj.at("adam");
    cp.state.adam.m = detail::json_vec(aj.at("m"));
    cp.state.adam.v = detail::json_vec(aj.at("v"));
    cp.state.adam.step = aj.at("step").get<long>();
    cp.state.adam.skipped = aj.at("skipped").get<long>();

    if (cp.state.M != cp.params.M) throw DomainError("checkpoint: M mismatch");
    if (static_cast<int>(cp.state.h_q.size()) != cp.net.vertex_count())
      throw DomainError("checkpoint: vertex chain count does not match network");
    if (static_cast<int>(cp.state.pi.size()) != cp.net.T())
      throw DomainError("checkpoint: pi slice count does not match network");
    for (int t = 1; t <= cp.net.T(); ++t) {
      const Mat& p = cp.state.pi[static_cast<size_t>(t - 1)];
      if (p.rows() != cp.net.slice(t).n() || p.cols() != cp.state.M)
        throw DomainError("checkpoint: pi shape mismatch at slice " + std::to_string(t));
    }
    for (int v = 0; v < cp.net.vertex_count(); ++v) {
      const GaussChainQ& q = cp.state.h_q[static_cast<size_t>(v)];
      if (q.dims() != cp.state.M ||
          q.span() != cp.net.T() - cp.net.arrival[static_cast<size_t>(v)] + 1)
        throw DomainError("checkpoint: vertex chain shape mismatch");
    }
    if (cp.state.k_q.dims() != cp.state.M || cp.state.k_q.span() != cp.net.T() ||
        cp.state.lambda_q.dims() != 1 || cp.state.lambda_q.span() != cp.net.T() ||
        cp.state.log_eta.size() != cp.net.T() || cp.state.zeta_c.size() != cp.net.T() ||
        cp.state.zeta_vm.rows() != cp.net.T() || cp.state.zeta_vm.cols() != cp.state.M)
      throw DomainError("checkpoint: state shape mismatch");
    return cp;
  } catch (const json::exception& e) {
    throw DomainError("malformed checkpoint: " + std::string(e.what()));
  }
}

}  // namespace dex
