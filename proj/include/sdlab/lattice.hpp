#ifndef SDLAB_LATTICE_HPP
#define SDLAB_LATTICE_HPP

#include <vector>
#include <map>
#include <numeric>
#include <algorithm>
#include <stdexcept>
#include <cstdint>
#include <cstdlib>

#include "sdlab/rational.hpp"

namespace sdlab {

struct SymmetryViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ReducibleKernel : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ZeroAtOriginViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct EmptySupport : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

using Offset = std::vector<int>;  // displacement r in [-R,R]^d

// Symmetric finite-range transition kernel p(r) with rational weights.
// Weights are normalized to sum 1; integer numerators over a common
// denominator are kept for exact rate bookkeeping in the simulator.
struct Kernel {
  int d = 1;
  int R = 1;
  std::vector<Offset> support;     // offsets with p(r) > 0
  std::vector<Rat> p;              // matching probabilities, sum = 1
  std::vector<long long> p_num;    // p[i] = p_num[i] / p_den
  long long p_den = 1;
  Rat chi;                         // second moment per axis

  size_t size() const { return support.size(); }
};

namespace detail {

// lattice generated by the offsets equals Z^d  <=>  integer row reduction
// (which preserves the generated lattice) leaves a triangular basis with
// |det| == 1
inline bool generates_full_lattice(const std::vector<Offset>& offs, int d) {
  std::vector<std::vector<long long>> rows;
  for (const auto& o : offs) rows.emplace_back(o.begin(), o.end());
  int rank = 0;
  __int128 det = 1;
  for (int col = 0; col < d && rank < (int)rows.size(); ++col) {
    // Euclid within the column until a single nonzero entry remains
    for (;;) {
      int piv = -1;
      for (int r = rank; r < (int)rows.size(); ++r)
        if (rows[r][col] != 0 &&
            (piv < 0 || std::abs(rows[r][col]) < std::abs(rows[piv][col])))
          piv = r;
      if (piv < 0) break;
      std::swap(rows[rank], rows[piv]);
      bool done = true;
      for (int r = rank + 1; r < (int)rows.size(); ++r) {
        if (rows[r][col] == 0) continue;
        long long q = rows[r][col] / rows[rank][col];
        for (int i = 0; i < d; ++i) rows[r][i] -= q * rows[rank][i];
        done &= (rows[r][col] == 0);
      }
      if (done) break;
    }
    if (rows[rank][col] != 0) {
      det *= rows[rank][col];
      ++rank;
    }
  }
  if (rank < d) return false;
  return det == 1 || det == -1;
}

}  // namespace detail

// Validates symmetry (sign flips + coordinate permutations), p(0)=0,
// irreducibility on Z^d, and computes chi. Weights are normalized to sum 1.
inline Kernel build_kernel(int d, int R, const std::map<Offset, Rat>& raw) {
  if (d < 1 || R < 1) throw std::invalid_argument("kernel needs d >= 1, R >= 1");
  Kernel k;
  k.d = d;
  k.R = R;
  auto canon = [&](Offset r) {  // |r_i| sorted: orbit representative
    for (auto& x : r) x = x < 0 ? -x : x;
    std::sort(r.begin(), r.end());
    return r;
  };
  std::map<Offset, Rat> orbit_weight;
  Rat total(0);
  for (const auto& [r, w] : raw) {
    if ((int)r.size() != d) throw std::invalid_argument("offset dimension mismatch");
    for (int x : r)
      if (x < -R || x > R) throw std::invalid_argument("offset outside [-R,R]^d");
    if (w < Rat(0)) throw std::invalid_argument("negative kernel weight");
    if (w == Rat(0)) continue;
    bool origin = true;
    for (int x : r) origin &= (x == 0);
    if (origin) throw ZeroAtOriginViolation("p(0) must be 0");
    Offset c = canon(r);
    auto it = orbit_weight.find(c);
    if (it == orbit_weight.end())
      orbit_weight.emplace(c, w);
    else if (it->second != w)
      throw SymmetryViolation("kernel not invariant under sign flips / permutations");
    k.support.push_back(r);
    k.p.push_back(w);
    total += w;
  }
  if (k.support.empty()) throw EmptySupport("kernel has empty support");
  // full symmetry also requires every orbit member to be present
  for (const auto& [c, w] : orbit_weight) {
    size_t present = 0;
    for (const auto& r : k.support)
      if (canon(r) == c) ++present;
    // orbit size: permutations of entries x sign choices of nonzero entries
    std::vector<int> v = c;
    size_t perms = 1, dup = 1;
    for (size_t i = 1, run = 1; i <= v.size(); ++i) {
      if (i < v.size() && v[i] == v[i - 1]) ++run;
      else { for (size_t j = 2; j <= run; ++j) dup *= j; run = 1; }
    }
    for (size_t i = 1; i <= v.size(); ++i) perms *= i;
    size_t signs = 1;
    for (int x : v)
      if (x != 0) signs *= 2;
    if (present != perms / dup * signs)
      throw SymmetryViolation("kernel orbit incomplete under symmetry group");
  }
  for (auto& w : k.p) w /= total;

  if (!detail::generates_full_lattice(k.support, d))
    throw ReducibleKernel("kernel support does not generate the full lattice");

  // chi = sum_r r_l^2 p(r), identical across axes by symmetry; assert it
  for (int axis = 0; axis < d; ++axis) {
    Rat c(0);
    for (size_t i = 0; i < k.support.size(); ++i)
      c += Rat(k.support[i][axis]) * Rat(k.support[i][axis]) * k.p[i];
    if (axis == 0) k.chi = c;
    else if (c != k.chi) throw SymmetryViolation("second moment differs across axes");
  }

  // integer numerators over the common denominator
  Rat::Int den = 1;
  for (const auto& w : k.p) den = den / Rat::gcd(den, w.den()) * w.den();
  if (den > Rat::Int(INT64_MAX)) throw RationalOverflow();
  k.p_den = (long long)den;
  for (const auto& w : k.p)
    k.p_num.push_back((long long)(w.num() * (den / w.den())));
  return k;
}

inline Kernel nearest_neighbor_kernel(int d) {
  std::map<Offset, Rat> w;
  for (int axis = 0; axis < d; ++axis)
    for (int s : {-1, 1}) {
      Offset r(d, 0);
      r[axis] = s;
      w[r] = Rat(1, 2 * d);
    }
  return build_kernel(d, 1, w);
}

// Discrete torus (Z/LZ)^d, site index x = sum_i coord_i L^i.
struct Torus {
  int d = 1;
  int L = 2;
  long long V = 2;

  Torus() = default;
  Torus(int d_, int L_) : d(d_), L(L_) {
    if (d < 1 || L < 2) throw std::invalid_argument("torus needs d >= 1, L >= 2");
    V = 1;
    for (int i = 0; i < d; ++i) V *= L;
  }

  std::vector<int> coords(long long site) const {
    std::vector<int> c(d);
    for (int i = 0; i < d; ++i) { c[i] = int(site % L); site /= L; }
    return c;
  }
  long long site(const std::vector<int>& c) const {
    long long s = 0;
    for (int i = d - 1; i >= 0; --i) {
      int v = ((c[i] % L) + L) % L;
      s = s * L + v;
    }
    return s;
  }
  long long shift(long long x, const Offset& r) const {
    auto c = coords(x);
    for (int i = 0; i < d; ++i) c[i] += r[i];
    return site(c);
  }

  // precomputed shift table: neighbor[x * nr + i] = x + support[i] (wrapped)
  std::vector<long long> shift_table(const Kernel& k) const {
    std::vector<long long> t(V * k.size());
    for (long long x = 0; x < V; ++x)
      for (size_t i = 0; i < k.size(); ++i) t[x * k.size() + i] = shift(x, k.support[i]);
    return t;
  }

  // every site reachable on the wrapped kernel (some (kernel, L) pairs alias)
  bool kernel_irreducible_here(const Kernel& k) const {
    std::vector<char> seen(V, 0);
    std::vector<long long> stack{0};
    seen[0] = 1;
    long long cnt = 1;
    while (!stack.empty()) {
      long long x = stack.back();
      stack.pop_back();
      for (const auto& r : k.support) {
        long long y = shift(x, r);
        if (!seen[y]) { seen[y] = 1; ++cnt; stack.push_back(y); }
      }
    }
    return cnt == V;
  }

  void require_compatible(const Kernel& k) const {
    if (L <= 2 * k.R)
      throw std::invalid_argument("torus must satisfy L > 2R");
    if (!kernel_irreducible_here(k))
      throw ReducibleKernel("kernel is reducible on this torus");
  }
};

}  // namespace sdlab

#endif
