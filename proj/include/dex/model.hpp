#pragma once

#include <string>

#include <Eigen/Dense>

#include "dex/errors.hpp"
#include "dex/math.hpp"

namespace dex {

enum class Dynamics { ATTAS, RW };

inline std::string dynamics_name(Dynamics d) { return d == Dynamics::ATTAS ? "attas" : "rw"; }

inline Dynamics dynamics_from_name(const std::string& s) {
  if (s == "attas") return Dynamics::ATTAS;
  if (s == "rw") return Dynamics::RW;
  throw DomainError("unknown dynamics `" + s + "` (expected attas or rw)");
}

// Generative parameter set theta plus the community count M.
struct ModelParams {
  int M = 1;
  double mu_lambda = 0.0;
  double sigma_lambda = 1.0;
  double a_lambda = 0.5;
  Vec mu;        // vertex-state init mean, length M
  Mat B_chol;    // lower-triangular factor of the vertex-state covariance
  Vec mu_k;      // community-chain init mean, length M
  Mat A_k;       // community-chain transition, M x M
  Mat Bk_chol;   // lower-triangular factor of the community-chain covariance
  Dynamics dynamics = Dynamics::RW;

  Mat sigma() const { return B_chol * B_chol.transpose(); }
  Mat sigma_k() const { return Bk_chol * Bk_chol.transpose(); }

  void validate() const {
    if (M < 1) throw DomainError("ModelParams: M must be >= 1");
    if (!(sigma_lambda > 0.0)) throw DomainError("ModelParams: sigma_lambda must be > 0");
    auto check_vec = [&](const Vec& v, const char* name) {
      if (v.size() != M) throw DomainError(std::string("ModelParams: ") + name + " must have length M");
      if (!v.allFinite()) throw DomainError(std::string("ModelParams: ") + name + " has non-finite entries");
    };
    auto check_chol = [&](const Mat& m, const char* name) {
      if (m.rows() != M || m.cols() != M)
        throw DomainError(std::string("ModelParams: ") + name + " must be M x M");
      if (!m.allFinite()) throw DomainError(std::string("ModelParams: ") + name + " has non-finite entries");
      for (int i = 0; i < M; ++i) {
        if (!(m(i, i) > 0.0))
          throw DomainError(std::string("ModelParams: ") + name + " needs a strictly positive diagonal");
        for (int j = i + 1; j < M; ++j)
          if (m(i, j) != 0.0)
            throw DomainError(std::string("ModelParams: ") + name + " must be lower-triangular");
      }
    };
    check_vec(mu, "mu");
    check_vec(mu_k, "mu_k");
    check_chol(B_chol, "B_chol");
    check_chol(Bk_chol, "Bk_chol");
    if (A_k.rows() != M || A_k.cols() != M) throw DomainError("ModelParams: A_k must be M x M");
    if (!A_k.allFinite()) throw DomainError("ModelParams: A_k has non-finite entries");
    if (!std::isfinite(mu_lambda) || !std::isfinite(a_lambda))
      throw DomainError("ModelParams: birth-chain parameters must be finite");
  }

  // Near-neutral defaults for an M-community model.
  static ModelParams defaults(int M, Dynamics dyn = Dynamics::RW) {
    ModelParams p;
    p.M = M;
    p.mu = Vec::Zero(M);
    p.B_chol = Mat::Identity(M, M);
    p.mu_k = Vec::Zero(M);
    p.A_k = 0.9 * Mat::Identity(M, M);
    p.Bk_chol = 0.3 * Mat::Identity(M, M);
    p.mu_lambda = std::log(50.0);
    p.sigma_lambda = 0.1;
    p.a_lambda = 0.5;
    p.dynamics = dyn;
    return p;
  }
};

}  // namespace dex
