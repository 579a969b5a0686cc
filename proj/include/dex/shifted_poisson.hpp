#pragma once

#include <cmath>

#include "dex/errors.hpp"
#include "dex/math.hpp"

namespace dex {

// q(L) = delta + Poisson(eta): Poisson shifted right by the observed newcomer
// count delta, so the support respects L >= delta a posteriori.
struct ShiftedPoissonQ {
  long delta = 0;
  double eta = 1.0;

  double mean() const { return static_cast<double>(delta) + eta; }
};

namespace detail {

// E_J[g(delta + J)] for J ~ Poisson(eta), truncated once cumulative mass
// reaches 1 - 1e-10 (capped at 1e6 terms).
template <typename G>
double shifted_poisson_expect(long delta, double eta, G&& g) {
  if (!(eta > 0.0)) throw DomainError("shifted poisson: eta must be > 0");
  double log_p = -eta;  // ln P(J = 0)
  double mass = 0.0;
  double acc = 0.0;
  for (long j = 0; j < 1000000; ++j) {
    double p = std::exp(log_p);
    acc += p * g(delta + j);
    mass += p;
    if (mass >= 1.0 - 1e-10) break;
    log_p += std::log(eta) - std::log(static_cast<double>(j) + 1.0);
  }
  return acc;
}

}  // namespace detail

// E_q[ln L!]
inline double shifted_poisson_e_log_factorial(const ShiftedPoissonQ& q) {
  return detail::shifted_poisson_expect(q.delta, q.eta, [](long l) { return log_factorial(l); });
}

// d/d eta E_q[ln L!] = E_q[ln(L + 1)]
inline double shifted_poisson_e_log_lp1(const ShiftedPoissonQ& q) {
  return detail::shifted_poisson_expect(q.delta, q.eta,
                                        [](long l) { return std::log(static_cast<double>(l) + 1.0); });
}

// Entropy; the shift does not change it: H = eta(1 - ln eta) + E_J[ln J!].
inline double shifted_poisson_entropy(const ShiftedPoissonQ& q) {
  double e_lnjf = detail::shifted_poisson_expect(0, q.eta, [](long j) { return log_factorial(j); });
  return q.eta * (1.0 - std::log(q.eta)) + e_lnjf;
}

// d/d eta of the entropy = -ln eta + E_J[ln(J + 1)].
inline double shifted_poisson_entropy_grad(const ShiftedPoissonQ& q) {
  double e_lnjp1 = detail::shifted_poisson_expect(
      0, q.eta, [](long j) { return std::log(static_cast<double>(j) + 1.0); });
  return -std::log(q.eta) + e_lnjp1;
}

}  // namespace dex
