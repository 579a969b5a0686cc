#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dex/errors.hpp"

namespace dex {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline bool all_finite(const Vec& x) { return x.allFinite(); }

// ln sum_i e^{x_i}, max-subtracted.
inline double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  double mx = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}

inline double log_sum_exp(const Vec& x) {
  return log_sum_exp(std::span<const double>(x.data(), static_cast<size_t>(x.size())));
}

// In-place softmax with max-subtraction; input must be finite.
inline void softmax_inplace(Vec& x) {
  if (x.size() == 0) throw DomainError("softmax of empty vector");
  if (!x.allFinite()) throw DomainError("softmax of non-finite logits");
  double mx = x.maxCoeff();
  x = (x.array() - mx).exp();
  x /= x.sum();
}

inline Vec softmax(Vec x) {
  softmax_inplace(x);
  return x;
}

// ln n!
inline double log_factorial(long n) {
  if (n < 0) throw DomainError("log_factorial of negative argument");
  return std::lgamma(static_cast<double>(n) + 1.0);
}

// E[e^X] for X ~ Normal(mean, var).
inline double lognormal_mean(double mean, double var) {
  if (var < 0.0) throw DomainError("lognormal_mean with negative variance");
  double v = std::exp(mean + 0.5 * var);
  if (!std::isfinite(v))
    throw DomainError("lognormal_mean overflow at mean=" + std::to_string(mean) +
                      " var=" + std::to_string(var));
  return v;
}

// Slope and intercept of the least-squares line y = slope*x + intercept.
struct OlsFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline OlsFit ols_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("ols_fit length mismatch");
  size_t n = x.size();
  if (n < 2) throw DomainError("ols_fit needs at least 2 points");
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw DomainError("ols_fit with degenerate x");
  OlsFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

// log|E| / log|V|; < 2 means sparse.
inline double sparsity_ratio(long edge_count, long vertex_count) {
  if (edge_count < 1) throw DomainError("sparsity_ratio needs edge_count >= 1");
  if (vertex_count < 2) throw DomainError("sparsity_ratio needs vertex_count >= 2");
  return std::log(static_cast<double>(edge_count)) / std::log(static_cast<double>(vertex_count));
}

inline double sq(double x) { return x * x; }

}  // namespace dex
