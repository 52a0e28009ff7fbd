#ifndef SDLAB_FIELDS_HPP
#define SDLAB_FIELDS_HPP

#include <vector>
#include <array>
#include <string>
#include <cmath>
#include <stdexcept>

#include "sdlab/orthopoly.hpp"
#include "sdlab/dynamics.hpp"

namespace sdlab {

struct InadmissibleMove : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// truncation order cap for the product-series machinery
inline constexpr int kMaxFieldOrder = 8;

namespace fields_detail {

template <class Scalar>
using Poly = std::array<Scalar, kMaxFieldOrder + 1>;

// dst = a * b truncated at degree k (dst must not alias a or b)
template <class Scalar>
inline void pmul(Scalar* dst, const Scalar* a, const Scalar* b, int k) {
  for (int m = 0; m <= k; ++m) {
    Scalar s(0);
    for (int j = 0; j <= m; ++j) s += a[j] * b[m - j];
    dst[m] = s;
  }
}
// coefficient of t^k in a * b
template <class Scalar>
inline Scalar pdot(const Scalar* a, const Scalar* b, int k) {
  Scalar s(0);
  for (int j = 0; j <= k; ++j) s += a[j] * b[k - j];
  return s;
}

template <class S>
struct TableGet;
template <>
struct TableGet<double> {
  static double get(const DualityTable& t, int m, long long n) { return t.dd_f(m, n); }
};
template <>
struct TableGet<Rat> {
  static Rat get(const DualityTable& t, int m, long long n) { return t.dd(m, n); }
};

}  // namespace fields_detail

// Balanced product of per-site truncated polynomials with O(k^2 log V)
// single-leaf updates and two-leaf substitution queries.
template <class Scalar>
class ProductTree {
public:
  ProductTree() = default;
  ProductTree(long long V, int k) : V_(V), k_(k) {
    P_ = 1;
    while (P_ < V) P_ <<= 1;
    nodes_.assign(2 * P_ * (k_ + 1), Scalar(0));
    for (long long i = 0; i < 2 * P_; ++i) node(i)[0] = Scalar(1);  // identity leaves
  }

  int order() const { return k_; }
  Scalar* leaf(long long x) { return node(P_ + x); }
  const Scalar* leaf(long long x) const { return node(P_ + x); }
  const Scalar* root() const { return node(1); }

  void rebuild() {
    for (long long i = P_ - 1; i >= 1; --i)
      fields_detail::pmul(node(i), node(2 * i), node(2 * i + 1), k_);
  }
  void update_path(long long x) {
    for (long long i = (P_ + x) >> 1; i >= 1; i >>= 1)
      fields_detail::pmul(node(i), node(2 * i), node(2 * i + 1), k_);
  }

  // coefficient of t^deg in the full product with leaves x and y replaced
  Scalar coeff_with(long long x, const Scalar* px, long long y, const Scalar* py,
                    int deg) const {
    using fields_detail::pmul;
    fields_detail::Poly<Scalar> bufs[2][2];
    long long idx[2] = {P_ + x, P_ + y};
    const Scalar* cur[2] = {px, py};
    int which[2] = {0, 0};
    int alive = 2;
    if (x == y) throw std::logic_error("two-leaf query needs distinct sites");
    while (alive == 2) {
      if ((idx[0] >> 1) == (idx[1] >> 1)) {
        auto* dst = bufs[0][which[0] ^ 1].data();
        if (idx[0] < idx[1]) pmul(dst, cur[0], cur[1], k_);
        else pmul(dst, cur[1], cur[0], k_);
        cur[0] = dst;
        which[0] ^= 1;
        idx[0] >>= 1;
        alive = 1;
        break;
      }
      for (int s = 0; s < 2; ++s) {
        long long sib = idx[s] ^ 1;
        auto* dst = bufs[s][which[s] ^ 1].data();
        pmul(dst, cur[s], node(sib), k_);
        cur[s] = dst;
        which[s] ^= 1;
        idx[s] >>= 1;
      }
    }
    while (idx[0] > 1) {
      long long sib = idx[0] ^ 1;
      auto* dst = bufs[0][which[0] ^ 1].data();
      pmul(dst, cur[0], node(sib), k_);
      cur[0] = dst;
      which[0] ^= 1;
      idx[0] >>= 1;
    }
    return cur[0][deg];
  }

private:
  long long V_ = 0, P_ = 1;
  int k_ = 0;
  std::vector<Scalar> nodes_;

  Scalar* node(long long i) { return nodes_.data() + i * (k_ + 1); }
  const Scalar* node(long long i) const { return nodes_.data() + i * (k_ + 1); }
};

// Evaluates the order-k fluctuation field and its derived functionals on a
// mutable occupancy. The per-site series S_x(t) = sum_m dd(m, eta_x) phi_x^m t^m
// has constant term 1; the coefficient of t^k in prod_x S_x(t) enumerates the
// dual configurations of order k. Raw coefficients are kept in Scalar; the
// n-power scalings live in the double wrappers below.
template <class Scalar>
class FieldEvaluator {
public:
  FieldEvaluator(const ModelSpec& spec, const Torus& torus, const Kernel& kernel,
                 const DualityTable& table, std::vector<Scalar> phi, int k,
                 const Occupancy& eta0)
      : spec_(spec), torus_(torus), kernel_(kernel), table_(table),
        phi_(std::move(phi)), k_(k), eta_(eta0), tree_(torus.V, k),
        shifts_(torus.shift_table(kernel)) {
    if (k < 0 || k > kMaxFieldOrder) throw std::invalid_argument("field order out of range");
    if ((long long)phi_.size() != torus.V) throw std::invalid_argument("phi size mismatch");
    for (size_t r = 0; r < kernel_.size(); ++r) p_f_.push_back(kernel_.p[r].to_double());
    alpha_f_ = spec.alpha.to_double();
    ensure_rows(max_count() + 1);
    for (long long x = 0; x < torus_.V; ++x) site_series(x, eta_[x], tree_.leaf(x));
    tree_.rebuild();
  }

  const Occupancy& state() const { return eta_; }
  const DualityTable& table() const { return table_; }
  int order() const { return k_; }

  // raw coefficient of t^j in prod S_x  (= n^{jd/2} Y^{(n,j)})
  Scalar coeff(int j) const { return tree_.root()[j]; }

  void apply_move(long long i, long long j) {
    eta_.apply_move(i, j);
    ensure_rows(std::max(eta_[i], eta_[j]) + 1);
    site_series(i, eta_[i], tree_.leaf(i));
    site_series(j, eta_[j], tree_.leaf(j));
    tree_.update_path(i);
    tree_.update_path(j);
  }

  // raw coefficient after the move i -> j, without mutating
  Scalar coeff_with_move(long long i, long long j, int deg) const {
    if (eta_[i] < 1) throw InadmissibleMove("no particle to move");
    ensure_rows(eta_[j] + 2);
    fields_detail::Poly<Scalar> si, sj;
    site_series(i, eta_[i] - 1, si.data());
    site_series(j, eta_[j] + 1, sj.data());
    return tree_.coeff_with(i, si.data(), j, sj.data(), deg);
  }

  // raw coefficient of t^deg of the product excluding sites i and j
  Scalar coeff_excluding(long long i, long long j, int deg) const {
    fields_detail::Poly<Scalar> one{};
    one[0] = Scalar(1);
    return tree_.coeff_with(i, one.data(), j, one.data(), deg);
  }

  // raw auxiliary field: sum over xi of order kk with xi_i + xi_j = ell
  Scalar z_raw(int kk, int ell, long long i, long long j) const {
    if (ell < 0 || ell > kk) return Scalar(0);
    Scalar acc(0);
    for (int a = 0; a <= ell; ++a) {
      int b = ell - a;
      Scalar wa = dd_as_scalar(a, eta_[i]) * pow_phi(i, a);
      Scalar wb = dd_as_scalar(b, eta_[j]) * pow_phi(j, b);
      Scalar w = wa * wb;
      if (!(w == Scalar(0))) acc += w * coeff_excluding(i, j, kk - ell);
    }
    return acc;
  }

  // raw mixed-tensor sum: sum_x [t^k] T_x prod_{y != x} S_y with
  // T_x = sum_m m dd(m, eta_x) phi_x^{m-1} psi_x t^m; equals k n^{kd/2} X(phi^(k-1) (x) psi)
  Scalar mixed_raw(const std::vector<Scalar>& psi) const {
    std::vector<Scalar> pre, suf;
    build_prefix_suffix(pre, suf);
    const int K = k_;
    Scalar total(0);
    fields_detail::Poly<Scalar> tx, tmp;
    for (long long x = 0; x < torus_.V; ++x) {
      if (psi[x] == Scalar(0)) continue;
      for (int m = 0; m <= K; ++m)
        tx[m] = m == 0 ? Scalar(0)
                       : dd_as_scalar(m, eta_[x]) * Scalar(m) * pow_phi(x, m - 1) * psi[x];
      bool zero = true;
      for (int m = 1; m <= K; ++m) zero = zero && tx[m] == Scalar(0);
      if (zero) continue;
      fields_detail::pmul(tmp.data(), pre.data() + x * (K + 1), tx.data(), K);
      total += fields_detail::pdot(tmp.data(), suf.data() + (x + 1) * (K + 1), K);
    }
    return total;
  }

  struct DriftCdc {
    Scalar drift_sum;  // sum rate * (coeff_k(moved) - coeff_k)
    Scalar cdc_sum;    // sum rate * (...)^2
  };

  // one sweep over all admissible moves (x, x+r); near pairs bridge through
  // prefix/suffix products, wrapped pairs fall back to the tree query
  DriftCdc drift_cdc_raw() const {
    std::vector<Scalar> pre, suf;
    build_prefix_suffix(pre, suf);
    const int K = k_;
    Scalar base = coeff(K);
    DriftCdc out{Scalar(0), Scalar(0)};
    fields_detail::Poly<Scalar> sa, sb, acc, tmp;
    const int bridge_max = 4 * kernel_.R + 2;
    for (long long x = 0; x < torus_.V; ++x) {
      if (eta_[x] == 0) continue;
      ensure_rows(eta_[x] + 1);
      for (size_t r = 0; r < kernel_.size(); ++r) {
        long long y = shifts_[x * kernel_.size() + r];
        Scalar rate = rate_as_scalar(x, y, r);
        if (rate == Scalar(0)) continue;
        ensure_rows(eta_[y] + 2);
        Scalar moved;
        long long a = std::min(x, y), b = std::max(x, y);
        if (b - a <= bridge_max) {
          site_series(a, eta_[a] + (a == x ? -1 : +1), sa.data());
          site_series(b, eta_[b] + (b == x ? -1 : +1), sb.data());
          fields_detail::pmul(acc.data(), pre.data() + a * (K + 1), sa.data(), K);
          for (long long z = a + 1; z < b; ++z) {
            fields_detail::pmul(tmp.data(), acc.data(), tree_.leaf(z), K);
            acc = tmp;
          }
          fields_detail::pmul(tmp.data(), acc.data(), sb.data(), K);
          moved = fields_detail::pdot(tmp.data(), suf.data() + (b + 1) * (K + 1), K);
        } else {
          moved = coeff_with_move(x, y, K);
        }
        Scalar delta = moved - base;
        out.drift_sum += rate * delta;
        out.cdc_sum += rate * delta * delta;
      }
    }
    return out;
  }

  // coherence check hook: root from scratch vs incremental state
  Scalar coeff_rebuilt(int j) const {
    FieldEvaluator fresh(spec_, torus_, kernel_, table_, phi_, k_, eta_);
    return fresh.coeff(j);
  }

private:
  ModelSpec spec_;
  Torus torus_;
  Kernel kernel_;
  mutable DualityTable table_;
  std::vector<Scalar> phi_;
  int k_;
  Occupancy eta_;
  ProductTree<Scalar> tree_;
  std::vector<long long> shifts_;
  std::vector<double> p_f_;
  double alpha_f_ = 1;

  int max_count() const {
    int m = 0;
    for (int c : eta_.counts) m = std::max(m, c);
    return m;
  }
  void ensure_rows(long long n) const {
    if (n > table_.n_max) table_ = table_.extended((int)std::max<long long>(n, 2 * table_.n_max));
  }
  Scalar dd_as_scalar(int m, long long n) const {
    return fields_detail::TableGet<Scalar>::get(table_, m, n);
  }
  Scalar pow_phi(long long x, int e) const {
    Scalar v(1);
    for (int i = 0; i < e; ++i) v = v * phi_[x];
    return v;
  }
  void site_series(long long x, long long count, Scalar* dst) const {
    Scalar pw(1);
    for (int m = 0; m <= k_; ++m) {
      dst[m] = dd_as_scalar(m, count) * pw;
      pw = pw * phi_[x];
    }
  }
  Scalar rate_as_scalar(long long x, long long y, size_t r) const;
  void build_prefix_suffix(std::vector<Scalar>& pre, std::vector<Scalar>& suf) const {
    const int K = k_;
    const long long V = torus_.V;
    pre.assign((V + 1) * (K + 1), Scalar(0));
    suf.assign((V + 1) * (K + 1), Scalar(0));
    pre[0] = Scalar(1);
    suf[V * (K + 1)] = Scalar(1);
    for (long long x = 0; x < V; ++x)
      fields_detail::pmul(pre.data() + (x + 1) * (K + 1), pre.data() + x * (K + 1),
                          tree_.leaf(x), K);
    for (long long x = V - 1; x >= 0; --x)
      fields_detail::pmul(suf.data() + x * (K + 1), suf.data() + (x + 1) * (K + 1),
                          tree_.leaf(x), K);
  }
};

template <>
inline double FieldEvaluator<double>::rate_as_scalar(long long x, long long y,
                                                     size_t r) const {
  return p_f_[r] * double(eta_[x]) * (alpha_f_ + spec_.sigma * double(eta_[y]));
}
template <>
inline Rat FieldEvaluator<Rat>::rate_as_scalar(long long x, long long y, size_t r) const {
  return kernel_.p[r] * Rat(eta_[x]) * (spec_.alpha + Rat(spec_.sigma) * Rat(eta_[y]));
}

// ---------------------------------------------------------------------------
// double-precision wrappers carrying the n-power scalings (n = L)

struct FieldSample {
  double value;
  int k;
  long long n;
  std::string model;
};

inline double field_scale(const Torus& torus, int k) {
  return std::pow(double(torus.L), -0.5 * k * torus.d);
}

// Y^{(n,k)}(Phi, eta) = n^{-kd/2} [t^k] prod_x S_x(t)
inline FieldSample field_eval(const FieldEvaluator<double>& ev, const Torus& torus) {
  return {field_scale(torus, ev.order()) * ev.coeff(ev.order()), ev.order(), torus.L,
          ev.table().spec.name()};
}

// X^{(n,k)}(phi^{(k-1)} (x) psi, eta)
inline double field_eval_mixed(const FieldEvaluator<double>& ev, const Torus& torus,
                               const std::vector<double>& psi) {
  int k = ev.order();
  if (k < 1) throw std::invalid_argument("mixed field needs k >= 1");
  return field_scale(torus, k) / double(k) * ev.mixed_raw(psi);
}

// n^{d/2+1} (Y(Phi, eta^{i,j}) - Y(Phi, eta))
inline double grad_field(const FieldEvaluator<double>& ev, const Torus& torus,
                         long long i, long long j) {
  int k = ev.order();
  long long cap = ev.table().spec.site_cap();
  if (ev.state()[i] < 1 || (cap >= 0 && ev.state()[j] + 1 > cap))
    throw InadmissibleMove("move not admissible");
  double delta = ev.coeff_with_move(i, j, k) - ev.coeff(k);
  double n = double(torus.L);
  return std::pow(n, 0.5 * torus.d + 1.0) * field_scale(torus, k) * delta;
}

// Z^{(n,k,l)}_{i,j}(Phi, eta) = n^{-kd/2} sum_{xi_i + xi_j = l} Phi_n(xi) DD(xi, eta)
inline double z_field(const FieldEvaluator<double>& ev, const Torus& torus, int kk,
                      int ell, long long i, long long j) {
  return field_scale(torus, kk) * ev.z_raw(kk, ell, i, j);
}

struct DriftCdcValues {
  double drift_exact;  // n^2 L Y^{(n,k)}
  double cdc_exact;    // n^2 Gamma Y^{(n,k)}
};

inline DriftCdcValues drift_cdc_exact(const FieldEvaluator<double>& ev, const Torus& torus) {
  auto raw = ev.drift_cdc_raw();
  double n = double(torus.L);
  int k = ev.order();
  double drift = n * n * field_scale(torus, k) * raw.drift_sum;
  double cdc = n * n * std::pow(field_scale(torus, k), 2) * raw.cdc_sum;
  return {drift, cdc};
}

// alpha k (chi/2) X^{(n,k)}(phi^{(k-1)} (x) laplace phi)
inline double drift_closed(const FieldEvaluator<double>& ev, const Torus& torus,
                           double chi, const std::vector<double>& laplace_phi) {
  const ModelSpec& spec = ev.table().spec;
  return spec.alpha.to_double() * double(ev.order()) * 0.5 * chi *
         field_eval_mixed(ev, torus, laplace_phi);
}

// closed carre-du-champ replacement:
//   rho (alpha + sigma rho) c^2 n^{-d} (Y^{(n,k-1)})^2 sum_{x,r} <r, grad phi(x/n)>^2 p(r)
inline double qv_closed(const FieldEvaluator<double>& ev, const Torus& torus,
                        double grad_quad_sum) {
  const ModelSpec& spec = ev.table().spec;
  int k = ev.order();
  if (k < 1) throw std::invalid_argument("qv_closed needs k >= 1");
  double c = ev.table().c_measured().to_double();
  double rho = spec.rho.to_double();
  double yk1 = field_scale(torus, k - 1) * ev.coeff(k - 1);
  double pref = rho * (spec.alpha.to_double() + spec.sigma * rho);
  return pref * c * c * std::pow(double(torus.L), -double(torus.d)) * grad_quad_sum *
         yk1 * yk1;
}

// sum_{x,r} |<r, grad phi(x/n)>|^2 p(r), the deterministic kernel-gradient sum
inline double grad_quad_sum(const Kernel& kernel, const Torus& torus,
                            const std::vector<std::vector<double>>& grad_phi) {
  double s = 0;
  for (long long x = 0; x < torus.V; ++x)
    for (size_t r = 0; r < kernel.size(); ++r) {
      double dot = 0;
      for (int i = 0; i < torus.d; ++i)
        dot += kernel.support[r][i] * grad_phi[x][i];
      s += kernel.p[r].to_double() * dot * dot;
    }
  return s;
}

}  // namespace sdlab

#endif
