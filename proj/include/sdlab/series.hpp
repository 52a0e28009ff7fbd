#ifndef SDLAB_SERIES_HPP
#define SDLAB_SERIES_HPP

#include <vector>
#include <stdexcept>

#include "sdlab/rational.hpp"

namespace sdlab {

// Truncated power series a[0] + a[1] t + ... + a[K] t^K. All operations keep
// the truncation order of the left operand.
template <class Scalar>
using Series = std::vector<Scalar>;

template <class Scalar>
Series<Scalar> series_mul(const Series<Scalar>& a, const Series<Scalar>& b) {
  Series<Scalar> out(a.size(), Scalar(0));
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] == Scalar(0)) continue;
    for (size_t j = 0; j + i < a.size() && j < b.size(); ++j)
      out[i + j] += a[i] * b[j];
  }
  return out;
}

template <class Scalar>
Series<Scalar> series_inv(const Series<Scalar>& a) {
  if (a.empty() || a[0] == Scalar(0))
    throw std::domain_error("series inversion needs a nonzero constant term");
  Series<Scalar> out(a.size(), Scalar(0));
  out[0] = Scalar(1) / a[0];
  for (size_t m = 1; m < a.size(); ++m) {
    Scalar s(0);
    for (size_t j = 0; j < m; ++j)
      if (j < a.size()) s += out[j] * a[m - j];
    out[m] = -s / a[0];
  }
  return out;
}

// coefficients of a(s*t) for s in {+1,-1}
template <class Scalar>
Series<Scalar> series_flip(Series<Scalar> a, int sign) {
  if (sign >= 0) return a;
  for (size_t i = 1; i < a.size(); i += 2) a[i] = -a[i];
  return a;
}

// e^{c t} truncated at order K
inline Series<Rat> exp_series(const Rat& c, int order) {
  Series<Rat> out(order + 1);
  out[0] = Rat(1);
  for (int m = 1; m <= order; ++m) out[m] = out[m - 1] * c / Rat(m);
  return out;
}

// (1 + c t)^expo truncated at order K; expo may be any rational
inline Series<Rat> binomial_series(const Rat& c, const Rat& expo, int order) {
  Series<Rat> out(order + 1);
  out[0] = Rat(1);
  for (int m = 1; m <= order; ++m)
    out[m] = out[m - 1] * (expo - Rat(m - 1)) * c / Rat(m);
  return out;
}

// (1 - cnum t) / (1 - cden t) truncated at order K
inline Series<Rat> mobius_series(const Rat& cnum, const Rat& cden, int order) {
  Series<Rat> out(order + 1);
  out[0] = Rat(1);
  Rat p(1);
  for (int m = 1; m <= order; ++m) {
    // coeff of t^m in (1 - cnum t) * sum cden^j t^j
    out[m] = p * (cden - cnum);
    p *= cden;
  }
  return out;
}

}  // namespace sdlab

#endif
