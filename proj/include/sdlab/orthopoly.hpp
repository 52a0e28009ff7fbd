#ifndef SDLAB_ORTHOPOLY_HPP
#define SDLAB_ORTHOPOLY_HPP

#include <vector>
#include <string>
#include <optional>
#include <stdexcept>
#include <cmath>

#include "sdlab/model.hpp"
#include "sdlab/series.hpp"
#include "sdlab/state.hpp"

namespace sdlab {

struct TruncationTooSmall : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TableOverflow : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoConsistentConvention : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Generating data for the single-site duality polynomials:
//   f(t, n) = e(t) * h(t)^n,   dd(m, n) = [t^m] f(t, n).
// The printed sources disagree on argument signs and on the e-prefactor, so a
// pair carries its provenance: sign switches applied to the printed "ansatz"
// forms, which e-form was used, and whether h came printed or was re-derived
// from the mean-zero constraint e'(0) = -rho h'(0).
struct GeneratingPair {
  Series<Rat> e_coeffs;
  Series<Rat> h_coeffs;
  Series<Rat> h_inv_coeffs;
  int sign_e = +1;
  int sign_h = +1;
  std::string e_form = "ansatz";  // "ansatz" | "family"
  std::string h_form = "printed"; // "printed" | "derived"

  int order() const { return (int)e_coeffs.size() - 1; }
};

// c_sigma as printed in the degree-1 identity table
inline Rat c_sigma_printed(const ModelSpec& spec) {
  switch (spec.sigma) {
    case 0: return Rat(1) / spec.rho;
    case 1: return spec.alpha / spec.rho;
    default: return (spec.alpha + spec.rho) / spec.rho;
  }
}

namespace genfun {

// e as printed with the structural ansatz: e^{-t} or (1 + sigma t)^{sigma alpha}
inline Series<Rat> e_ansatz(const ModelSpec& spec, int order) {
  if (spec.sigma == 0) return exp_series(Rat(-1), order);
  return binomial_series(Rat(spec.sigma), Rat(spec.sigma) * spec.alpha, order);
}
// e as printed with the per-family generating functions: (1 - sigma t)^{-sigma alpha}
inline Series<Rat> e_family(const ModelSpec& spec, int order) {
  if (spec.sigma == 0) return exp_series(Rat(-1), order);
  return binomial_series(Rat(-spec.sigma), Rat(-spec.sigma) * spec.alpha, order);
}
// h as printed: (1 - c_{-sigma} t) / (1 - sigma t)
inline Series<Rat> h_printed(const ModelSpec& spec, int order) {
  ModelSpec flip = spec;
  flip.sigma = -spec.sigma;
  return mobius_series(c_sigma_printed(flip), Rat(spec.sigma), order);
}

}  // namespace genfun

inline GeneratingPair build_generating_pair(const ModelSpec& spec, int order,
                                            int sign_e, int sign_h) {
  if (order < 1) throw std::invalid_argument("generating pair needs order >= 1");
  GeneratingPair gp;
  gp.sign_e = sign_e;
  gp.sign_h = sign_h;
  gp.e_coeffs = series_flip(genfun::e_ansatz(spec, order), sign_e);
  gp.h_coeffs = series_flip(genfun::h_printed(spec, order), sign_h);
  gp.h_inv_coeffs = series_inv(gp.h_coeffs);
  return gp;
}

// h re-derived from the mean-zero constraint with e fixed: the structural
// form (1 - c t)/(1 - sigma t) with c = sigma + e'(0)/rho.
inline GeneratingPair build_generating_pair_derived(const ModelSpec& spec, int order,
                                                    const std::string& e_form, int sign_e) {
  GeneratingPair gp;
  gp.sign_e = sign_e;
  gp.sign_h = +1;
  gp.e_form = e_form;
  gp.h_form = "derived";
  auto base = e_form == "family" ? genfun::e_family(spec, order)
                                 : genfun::e_ansatz(spec, order);
  gp.e_coeffs = series_flip(base, sign_e);
  Rat cstar = Rat(spec.sigma) + gp.e_coeffs[1] / spec.rho;
  gp.h_coeffs = mobius_series(cstar, Rat(spec.sigma), order);
  gp.h_inv_coeffs = series_inv(gp.h_coeffs);
  return gp;
}

struct ConventionInfo {
  int stage = 0;                 // 1: sign search, 2: mean-zero-derived h
  int sign_e = +1, sign_h = +1;
  std::string e_form = "ansatz";
  std::string h_form = "printed";
  Rat c_measured;                // dd(1, n) = c_measured (n - rho); equals -g(1)
  Rat d1_constant;               // d(1, n) = d1_constant (n - rho)
  Rat printed_mean;              // mean of dd(1,.) under the printed (+,+) pair
};

// Single-site orthogonal duality table dd(m, n) = lambda(m) d(m, n), built
// columnwise by the shift recursion dd(m, n+1) = sum_j g(m-j) dd(j, n) with
// g = Taylor coefficients of h. Immutable by contract; extension copies.
class DualityTable {
public:
  ModelSpec spec;
  GeneratingPair pair;
  ConventionInfo convention;
  int m_max = 0, n_max = 0;

  DualityTable() = default;
  DualityTable(const ModelSpec& s, const GeneratingPair& gp, int mmax, int nmax)
      : spec(s), pair(gp), m_max(mmax), n_max(nmax) {
    if (mmax < 1 || gp.order() < mmax)
      throw std::invalid_argument("table order exceeds generating pair order");
    cols_.reserve(nmax + 1);
    Series<Rat> col(gp.e_coeffs.begin(), gp.e_coeffs.begin() + mmax + 1);
    Series<Rat> h(gp.h_coeffs.begin(), gp.h_coeffs.begin() + mmax + 1);
    cols_.push_back(col);
    for (int n = 1; n <= nmax; ++n) cols_.push_back(series_mul(cols_.back(), h));
    refresh_float();
  }

  Rat dd(int m, long long n) const {
    check(m, n);
    return cols_[n][m];
  }
  // d(m, n) = dd(m, n) / lambda(m)
  Rat d(int m, long long n) const {
    Rat lam = lambda_weight(spec, m);
    if (lam == Rat(0)) throw OutOfSupport("d(m, .) with lambda(m) = 0");
    return dd(m, n) / lam;
  }
  double dd_f(int m, long long n) const {
    check(m, n);
    return cols_f_[n][m];
  }
  // row of dd(., n) as doubles, contiguous over m
  const double* row_f(long long n) const {
    if (n < 0 || n > n_max) throw TableOverflow("occupancy outside tabulated range");
    return cols_f_[n].data();
  }

  // g(m) = [t^m] h, gtilde(m) = [t^m] 1/h
  Rat g(int m) const { return pair.h_coeffs.at(m); }
  Rat g_tilde(int m) const { return pair.h_inv_coeffs.at(m); }
  Rat c_measured() const { return convention.c_measured; }

  // capacity needed to evaluate on an occupancy (one extra row so that
  // single-move neighbors eta_j + 1 stay tabulated)
  DualityTable extended(int new_n_max) const {
    if (new_n_max <= n_max) return *this;
    DualityTable t(spec, pair, m_max, new_n_max);
    t.convention = convention;
    t.norm2_ = {};
    return t;
  }

  // ||d(m, .)||^2 in L^2(nu_rho); exact finite sum for exclusion, otherwise a
  // truncated sum with certified geometric tail below tail_eps (relative)
  const std::vector<double>& norm2(double tail_eps = 1e-16) const {
    if (norm2_.empty()) compute_norms(tail_eps);
    return norm2_;
  }
  double mu_single(int m) const { return 1.0 / norm2().at(m); }
  const std::vector<Rat>& norm2_exact() const {
    if (spec.sigma != -1)
      throw std::logic_error("exact norms only for the exclusion family");
    norm2(); // fills the exact cache too
    return norm2_rat_;
  }

private:
  std::vector<Series<Rat>> cols_;            // cols_[n][m] = dd(m, n)
  std::vector<std::vector<double>> cols_f_;  // double mirror
  mutable std::vector<double> norm2_;
  mutable std::vector<Rat> norm2_rat_;

  void check(int m, long long n) const {
    if (m < 0 || m > m_max) throw TableOverflow("degree outside tabulated range");
    if (n < 0 || n > n_max) throw TableOverflow("occupancy outside tabulated range");
  }
  void refresh_float() {
    cols_f_.resize(cols_.size());
    for (size_t n = 0; n < cols_.size(); ++n) {
      cols_f_[n].resize(m_max + 1);
      for (int m = 0; m <= m_max; ++m) cols_f_[n][m] = cols_[n][m].to_double();
    }
  }
  void compute_norms(double tail_eps) const;
};

inline void DualityTable::compute_norms(double tail_eps) const {
  norm2_.assign(m_max + 1, 0.0);
  if (spec.sigma == -1) {
    long long A = spec.alpha.as_int();
    norm2_rat_.assign(m_max + 1, Rat(0));
    Rat Z(0);
    for (long long n = 0; n <= A; ++n) Z += nu_weight(spec, n);
    for (int m = 0; m <= m_max; ++m) {
      if (m > A) { norm2_[m] = 0.0; continue; }
      Rat lam = lambda_weight(spec, m);
      Rat s(0);
      for (long long n = 0; n <= A && n <= n_max; ++n) {
        Rat dn = cols_[n][m] / lam;
        s += dn * dn * nu_weight(spec, n);
      }
      norm2_rat_[m] = s / Z;
      norm2_[m] = norm2_rat_[m].to_double();
    }
    return;
  }
  // sigma in {0, +1}: extend columns privately as far as the tail requires.
  // Term ratios approach the nu ratio limit q_inf from above (polynomial
  // factors), so once they drop below qbar in (q_inf, 1) the tail is bounded
  // by term * qbar / (1 - qbar).
  double Z = nu_normalizer(spec);
  double q_inf = spec.sigma == 0 ? 0.0
                                 : (spec.rho / (spec.alpha + spec.rho)).to_double();
  double qbar = (1.0 + q_inf) / 2.0;
  double tail_mult = qbar / (1.0 - qbar);
  std::vector<Series<Rat>> cols = cols_;
  Series<Rat> h(pair.h_coeffs.begin(), pair.h_coeffs.begin() + m_max + 1);
  auto dd_at = [&](int m, long long n) -> double {
    while ((long long)cols.size() <= n) cols.push_back(series_mul(cols.back(), h));
    return cols[n][m].to_double();
  };
  for (int m = 0; m <= m_max; ++m) {
    double lam = lambda_weight(spec, m).to_double();
    double acc = 0.0, w = 1.0;  // w = unnormalized nu weight
    double prev_term = 0.0;
    int shrinking = 0;
    long long n = 0;
    const long long n_limit = 20000;
    for (;; ++n) {
      if (n >= n_limit)
        throw TruncationTooSmall("norm tail bound not reached within column limit");
      double dn = dd_at(m, n) / lam;
      double term = dn * dn * w;
      acc += term;
      double q = prev_term > 0 ? term / prev_term : 1.0;
      prev_term = term;
      shrinking = (q < qbar) ? shrinking + 1 : 0;
      if (shrinking >= 4 && term * tail_mult <= tail_eps * acc) {
        acc += term * tail_mult;  // certified bound; error < tail_eps * acc
        break;
      }
      w *= nu_pmf_ratio(spec, n);
    }
    norm2_[m] = acc / Z;
  }
}

// Gram-Schmidt oracle: monic polynomials orthogonal under the nu_rho marginal,
// built from exact power moments. Independent of the generating-function route.
inline std::vector<std::vector<Rat>> gram_schmidt_oracle(const ModelSpec& spec, int m_max) {
  std::vector<Rat> mom(2 * m_max + 1);
  for (int j = 0; j <= 2 * m_max; ++j) mom[j] = nu_power_moment(spec, j);
  auto inner = [&](const std::vector<Rat>& a, const std::vector<Rat>& b) {
    Rat s(0);
    for (size_t i = 0; i < a.size(); ++i)
      for (size_t j = 0; j < b.size(); ++j)
        if (a[i] != Rat(0) && b[j] != Rat(0)) s += a[i] * b[j] * mom[i + j];
    return s;
  };
  std::vector<std::vector<Rat>> q;
  for (int m = 0; m <= m_max; ++m) {
    std::vector<Rat> v(m + 1, Rat(0));
    v[m] = Rat(1);  // monic x^m
    for (int j = 0; j < m; ++j) {
      Rat c = inner(v, q[j]) / inner(q[j], q[j]);
      for (size_t i = 0; i < q[j].size(); ++i) v[i] -= c * q[j][i];
    }
    q.push_back(std::move(v));
  }
  return q;
}

inline Rat poly_eval(const std::vector<Rat>& coeffs, long long n) {
  Rat x(n), acc(0);
  for (int i = (int)coeffs.size() - 1; i >= 0; --i) acc = acc * x + coeffs[i];
  return acc;
}

// ---------------------------------------------------------------------------
// Product duality functions D(xi, eta) = prod d(xi_x, eta_x) and
// DD(xi, eta) = Lambda(xi) D(xi, eta) = prod dd(xi_x, eta_x).

struct ProductDuality {
  const DualityTable* table;

  explicit ProductDuality(const DualityTable& t) : table(&t) {}

  Rat eval_DD(const DualConfig& xi, const Occupancy& eta) const {
    Rat v(1);
    for (auto& [x, c] : xi.counts) v *= table->dd(c, eta[x]);
    return v;
  }
  Rat eval_D(const DualConfig& xi, const Occupancy& eta) const {
    Rat v(1);
    for (auto& [x, c] : xi.counts) v *= table->d(c, eta[x]);
    return v;
  }
  double eval_D_f(const DualConfig& xi, const Occupancy& eta) const {
    double v = 1;
    for (auto& [x, c] : xi.counts)
      v *= table->dd_f(c, eta[x]) / lambda_weight(table->spec, c).to_double();
    return v;
  }
  // mu_rho(xi) = prod over sites of the per-degree inverse norms
  double mu_of(const DualConfig& xi) const {
    double v = 1;
    for (auto& [x, c] : xi.counts) v *= table->mu_single(c);
    return v;
  }
};

}  // namespace sdlab

#endif
