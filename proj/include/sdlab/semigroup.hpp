#ifndef SDLAB_SEMIGROUP_HPP
#define SDLAB_SEMIGROUP_HPP

#include <Eigen/Dense>
#include <cmath>

#include "sdlab/dynamics.hpp"

namespace sdlab {

// Transition probabilities p_t(xi, xi') by uniformization: a Poisson mixture
// of powers of the uniformized jump matrix P = I + Q/lambda. Truncation level
// chosen so the Poisson tail is below tail_eps; all entries stay nonnegative.
inline Eigen::MatrixXd exact_semigroup(const DualStateSpace& space, double t,
                                       double tail_eps = 1e-12) {
  const int n = (int)space.size();
  if (n > 4000) throw StateSpaceTooLarge("dense semigroup limited to 4000 states");
  double lam = 0;
  for (auto& e : space.exit_rate) lam = std::max(lam, e.to_double());
  if (lam == 0 || t == 0) return Eigen::MatrixXd::Identity(n, n);
  // keep the Poisson mean moderate; p_t = (p_{t/2})^2
  if (lam * t > 500.0) {
    Eigen::MatrixXd half = exact_semigroup(space, t / 2, tail_eps / 2);
    return half * half;
  }
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n);
  for (auto& tr : space.transitions)
    P(tr.from, tr.to) += tr.rate.to_double() / lam;
  for (int i = 0; i < n; ++i) P(i, i) -= space.exit_rate[i].to_double() / lam;

  double mu = lam * t;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  double w = std::exp(-mu);  // Poisson(mu) weight at j = 0
  double covered = 0;
  long j = 0;
  for (;;) {
    acc += w * term;
    covered += w;
    if (1.0 - covered < tail_eps && j > mu) break;
    ++j;
    if (j > 1000000) throw std::runtime_error("uniformization failed to converge");
    term = term * P;
    w *= mu / double(j);
  }
  return acc;
}

// action of p_t on a vector (sparse powers; scales far past the dense limit)
inline Eigen::VectorXd apply_semigroup(const DualStateSpace& space, double t,
                                       const Eigen::VectorXd& v,
                                       double tail_eps = 1e-12) {
  const int n = (int)space.size();
  double lam = 0;
  for (auto& e : space.exit_rate) lam = std::max(lam, e.to_double());
  if (lam == 0 || t == 0) return v;
  if (lam * t > 500.0)
    return apply_semigroup(space, t / 2, apply_semigroup(space, t / 2, v, tail_eps / 2),
                           tail_eps / 2);
  std::vector<double> rate(space.transitions.size());
  for (size_t i = 0; i < space.transitions.size(); ++i)
    rate[i] = space.transitions[i].rate.to_double() / lam;
  std::vector<double> stay(n);
  for (int i = 0; i < n; ++i) stay[i] = 1.0 - space.exit_rate[i].to_double() / lam;

  double mu = lam * t;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n), cur = v, nxt(n);
  double w = std::exp(-mu), covered = 0;
  long j = 0;
  for (;;) {
    acc += w * cur;
    covered += w;
    if (1.0 - covered < tail_eps && j > mu) break;
    ++j;
    if (j > 1000000) throw std::runtime_error("uniformization failed to converge");
    for (int i = 0; i < n; ++i) nxt[i] = stay[i] * cur[i];
    for (size_t e = 0; e < space.transitions.size(); ++e)
      nxt[space.transitions[e].from] += rate[e] * cur[space.transitions[e].to];
    cur.swap(nxt);
    w *= mu / double(j);
  }
  return acc;
}

}  // namespace sdlab

#endif
