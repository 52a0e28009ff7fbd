#ifndef SDLAB_MODEL_HPP
#define SDLAB_MODEL_HPP

#include <stdexcept>
#include <string>
#include <cmath>

#include "sdlab/rational.hpp"

namespace sdlab {

struct InvalidModel : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct OutOfSupport : std::domain_error {
  using std::domain_error::domain_error;
};

// sigma selects the interaction: 0 independent walkers, -1 exclusion,
// +1 inclusion. alpha is the rate/capacity parameter, rho the density of the
// reversible product measure.
struct ModelSpec {
  int sigma = 0;
  Rat alpha = Rat(1);
  Rat rho = Rat(1);

  ModelSpec() = default;
  ModelSpec(int sigma_, Rat alpha_, Rat rho_) : sigma(sigma_), alpha(alpha_), rho(rho_) {
    validate();
  }

  void validate() const {
    if (sigma != -1 && sigma != 0 && sigma != 1)
      throw InvalidModel("sigma must be in {-1, 0, +1}");
    if (!(alpha > Rat(0))) throw InvalidModel("alpha must be positive");
    if (!(rho > Rat(0))) throw InvalidModel("rho must be positive");
    if (sigma == -1) {
      if (!alpha.is_integer() || alpha.as_int() < 1)
        throw InvalidModel("exclusion needs integer alpha >= 1");
      if (!(rho < alpha)) throw InvalidModel("exclusion needs rho in (0, alpha)");
    }
  }

  // max occupancy per site (-1 = unbounded)
  long long site_cap() const { return sigma == -1 ? alpha.as_int() : -1; }

  bool in_support(long long n) const {
    return n >= 0 && (sigma != -1 || n <= alpha.as_int());
  }

  std::string name() const {
    switch (sigma) {
      case 0: return "irw";
      case -1: return "sep";
      default: return "sip";
    }
  }
};

// lambda(m): reversible weight of the dual configuration measure, fixed by
// detailed balance of the m-particle stack: lambda(m)/lambda(m-1) =
// (alpha + sigma (m-1)) / m. The printed closed forms for sigma in {0,-1}
// coincide with this; the sigma=+1 reading is validated against the
// orthogonality norms in tests.
inline Rat lambda_weight(const ModelSpec& spec, long long m) {
  if (m < 0) throw OutOfSupport("lambda_weight: negative count");
  if (spec.sigma == -1 && m > spec.alpha.as_int())
    throw OutOfSupport("lambda_weight: count exceeds alpha");
  Rat v(1);
  for (long long j = 1; j <= m; ++j)
    v *= (spec.alpha + Rat(spec.sigma) * Rat(j - 1)) / Rat(j);
  return v;
}

// pi(m) = m! lambda(m): reversible weight of the labeled coordinate process.
inline Rat pi_weight(const ModelSpec& spec, long long m) {
  Rat v = lambda_weight(spec, m);
  for (long long j = 2; j <= m; ++j) v *= Rat(j);
  return v;
}

// Unnormalized marginal weight of nu_rho (rational, Z dropped):
//   sigma=0:  rho^n / n!
//   sigma=-1: binom(alpha, n) (rho/(alpha-rho))^n
//   sigma=+1: (alpha)_n / n!  (rho/(alpha+rho))^n
inline Rat nu_weight(const ModelSpec& spec, long long n) {
  if (!spec.in_support(n)) throw OutOfSupport("nu_weight: outside support");
  Rat v(1);
  if (spec.sigma == 0) {
    for (long long j = 1; j <= n; ++j) v *= spec.rho / Rat(j);
  } else if (spec.sigma == -1) {
    Rat q = spec.rho / (spec.alpha - spec.rho);
    for (long long j = 1; j <= n; ++j)
      v *= (spec.alpha - Rat(j - 1)) / Rat(j) * q;
  } else {
    Rat q = spec.rho / (spec.alpha + spec.rho);
    for (long long j = 1; j <= n; ++j)
      v *= (spec.alpha + Rat(j - 1)) / Rat(j) * q;
  }
  return v;
}

// normalizing constant of the weights above; rational except for sigma=0
inline double nu_normalizer(const ModelSpec& spec) {
  double a = spec.alpha.to_double(), r = spec.rho.to_double();
  switch (spec.sigma) {
    case 0: return std::exp(r);
    case -1: return std::pow(a / (a - r), a);
    default: return std::pow((a + r) / a, a);
  }
}

inline double nu_marginal_pmf(const ModelSpec& spec, long long n) {
  return nu_weight(spec, n).to_double() / nu_normalizer(spec);
}

// ratio pmf(n+1)/pmf(n); used by the inversion sampler and tail bounds
inline double nu_pmf_ratio(const ModelSpec& spec, long long n) {
  double a = spec.alpha.to_double(), r = spec.rho.to_double();
  switch (spec.sigma) {
    case 0: return r / double(n + 1);
    case -1: {
      long long A = spec.alpha.as_int();
      if (n >= A) return 0.0;
      return double(A - n) / double(n + 1) * r / (a - r);
    }
    default: return (a + double(n)) / double(n + 1) * r / (a + r);
  }
}

// closed-form mean and variance of the nu_rho marginal
inline double nu_mean(const ModelSpec& spec) { return spec.rho.to_double(); }
inline double nu_variance(const ModelSpec& spec) {
  double a = spec.alpha.to_double(), r = spec.rho.to_double();
  return r * (1.0 + spec.sigma * r / a);
}

// E[n^j] under nu_rho, exact rational: assembled from factorial moments
// E[(n)_j] via Stirling numbers of the second kind.
inline Rat nu_power_moment(const ModelSpec& spec, int j) {
  // factorial moments: E[(n)_i] = prod_{l<i} (alpha + sigma l) * (rho / alpha)^i
  // (sigma=0 limit: rho^i). Derived from the pgf of each marginal family.
  std::vector<Rat> fact(j + 1, Rat(1));
  for (int i = 1; i <= j; ++i) {
    Rat step = spec.sigma == 0
                   ? spec.rho
                   : (spec.alpha + Rat(spec.sigma) * Rat(i - 1)) * spec.rho / spec.alpha;
    fact[i] = fact[i - 1] * step;
  }
  // Stirling2 triangle
  std::vector<std::vector<Rat>> S(j + 1, std::vector<Rat>(j + 1, Rat(0)));
  S[0][0] = Rat(1);
  for (int a = 1; a <= j; ++a)
    for (int b = 1; b <= a; ++b)
      S[a][b] = S[a - 1][b - 1] + Rat(b) * S[a - 1][b];
  Rat out(0);
  for (int i = 0; i <= j; ++i) out += S[j][i] * fact[i];
  return out;
}

}  // namespace sdlab

#endif
